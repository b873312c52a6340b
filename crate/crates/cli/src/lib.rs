//! Command-line front end for `samgp`.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use samgp::complexity::MeasureKind;
use samgp::data::SplitRule;
use samgp::inference::ModelBundle;
use samgp::runner::{self, ExperimentConfig};
use samgp::sharpness::{Adaptivity, Aggregation, NoiseFamily};

#[derive(Parser, Debug)]
#[command(name = "samgp", version, about = "Sharpness-aware GP feature construction for ridge regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train on one dataset; with --seeds, once per seed.
    Run {
        /// CSV file with a header row.
        dataset: Option<PathBuf>,
        #[command(flatten)]
        opts: ConfigArgs,
        /// Seed list such as `1..5` or `1,4,9`.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Run several measures over seeds and datasets and tabulate Wilcoxon outcomes.
    Compare {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[command(flatten)]
        opts: ConfigArgs,
        /// Comma-separated measures.
        #[arg(long, default_value = "sam,pp,tk,gc,rc,wcrv,iodc,none")]
        measures: String,
        #[arg(long, default_value = "1..5")]
        seeds: String,
    },
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV containing the model's input columns.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by `run` and `compare`. Each one overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// fixed-100, ratio-50-50 or ratio-80-20.
    #[arg(long)]
    pub split: Option<SplitRule>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// sam, pp, tk, gc, rc, wcrv, iodc or none.
    #[arg(long)]
    pub measure: Option<MeasureKind>,
    /// one-sam, n-sam, gmp or m-sam:M.
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    /// normal, uniform, laplace or ensemble.
    #[arg(long)]
    pub noise: Option<NoiseFamily>,
    /// instance, batch or none.
    #[arg(long)]
    pub adaptivity: Option<Adaptivity>,
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long)]
    pub cache_capacity: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub label_noise: Option<f64>,
    /// Sharpness reduction layer at inference (on for sam by default).
    #[arg(long)]
    pub reduction: Option<bool>,
    /// Do not clip predictions to the training target range.
    #[arg(long)]
    pub no_bounds: bool,
    /// Score raw inputs instead of constructed features under wcrv.
    #[arg(long)]
    pub wcrv_raw_inputs: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolves the configuration: defaults, then the config file, then flags.
pub fn parse_config(dataset: Option<PathBuf>, a: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::from_json_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = dataset {
        c.dataset = d;
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),* $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { c.$field = v; })*
        };
    }
    set!(
        split <- split,
        seed <- seed,
        population <- population,
        generations <- generations,
        sigma <- sigma,
        rounds <- rounds,
        alpha <- alpha,
        measure <- measure,
        aggregation <- aggregation,
        noise_family <- noise,
        adaptivity <- adaptivity,
        ensemble_size <- ensemble_size,
        cache_capacity <- cache_capacity,
        label_noise <- label_noise,
    );
    if a.target.is_some() {
        c.target = a.target.clone();
    }
    if a.reduction.is_some() {
        c.reduction = a.reduction;
    }
    if a.out.is_some() {
        c.out = a.out.clone();
    }
    if a.no_cache {
        c.cache = false;
    }
    if a.no_bounds {
        c.bounded = false;
    }
    if a.wcrv_raw_inputs {
        c.wcrv_raw_inputs = true;
    }
    c.validate()?;
    Ok(c)
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty seed range `{s}`");
        }
        return Ok((a..=b).collect());
    }
    let seeds = s
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("bad seed list `{s}`"))?;
    if seeds.is_empty() {
        bail!("empty seed list");
    }
    Ok(seeds)
}

pub fn parse_measures(s: &str) -> Result<Vec<MeasureKind>> {
    Ok(s.split(',').map(|t| t.trim().parse()).collect::<Result<Vec<_>, _>>()?)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { dataset, opts, seeds } => {
            let cfg = parse_config(dataset, &opts)?;
            match seeds {
                Some(s) => {
                    let (_, summary) = runner::run_batch(&cfg, &parse_seeds(&s)?)?;
                    println!("{}", serde_json::to_string_pretty(&summary)?);
                }
                None => {
                    let report = runner::run_experiment(&cfg)?;
                    if let Some(out) = &cfg.out {
                        runner::emit_metrics(&report, out)?;
                    }
                    println!("{}", serde_json::to_string_pretty(&report.summary)?);
                }
            }
        }
        Command::Compare { datasets, opts, measures, seeds } => {
            let cfg = parse_config(Some(datasets[0].clone()), &opts)?;
            let cmp = runner::compare_measures(&cfg, &datasets, &parse_measures(&measures)?, &parse_seeds(&seeds)?)?;
            println!("measure,opponent,wins,ties,losses");
            for r in &cmp.table {
                println!("{},{},{},{},{}", r.measure, r.opponent, r.wins, r.ties, r.losses);
            }
        }
        Command::Predict { model, input, out } => {
            let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let bundle = ModelBundle::from_json(&text)?;
            let pred = runner::predict_file(&bundle, &input)?;
            let mut body = String::from("prediction\n");
            for p in pred {
                body.push_str(&format!("{p}\n"));
            }
            match out {
                Some(p) => std::fs::write(p, body)?,
                None => print!("{body}"),
            }
        }
    }
    Ok(())
}
