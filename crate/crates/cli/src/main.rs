use clap::Parser;

fn main() -> anyhow::Result<()> {
    samgp_cli::execute(samgp_cli::Cli::parse())
}
