//! Experiment orchestration: configuration, single runs, seed batches,
//! measure comparisons, and the files they write.
//!
//! A run directory holds
//!
//! - `config.json`: the fully resolved configuration,
//! - `generations.csv`: one row per generation,
//! - `summary.json`: final scores,
//! - `model.json`: the [`ModelBundle`] of the final model,
//! - `timing.csv`: wall time and cache counters per generation.
//!
//! Everything except `timing.csv` is a pure function of the configuration.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{ComplexityMeasure, MeasureKind};
use crate::data::{self, Dataset, SplitRule, SplitSpec};
use crate::evolution::{self, EvolutionConfig, GenerationRecord};
use crate::inference::{self, Member, ModelBundle, PredictionBounds, BUNDLE_FORMAT, BUNDLE_VERSION};
use crate::sharpness::{Adaptivity, Aggregation, NoiseFamily, PerturbationConfig, DEFAULT_CACHE_CAPACITY};
use crate::tree::{Individual, TreeKey};
use crate::{rng, stats, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Last column when absent.
    pub target: Option<String>,
    pub split: SplitRule,
    pub seed: u64,
    pub population: usize,
    pub generations: usize,
    pub sigma: f64,
    pub rounds: usize,
    pub alpha: f64,
    pub measure: MeasureKind,
    pub aggregation: Aggregation,
    pub noise_family: NoiseFamily,
    pub adaptivity: Adaptivity,
    pub ensemble_size: usize,
    pub cache: bool,
    pub cache_capacity: usize,
    pub label_noise: f64,
    /// Sharpness reduction layer at inference; on for `sam` when absent.
    pub reduction: Option<bool>,
    pub bounded: bool,
    pub wcrv_raw_inputs: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            target: None,
            split: SplitRule::Fixed100,
            seed: 0,
            population: 200,
            generations: 100,
            sigma: 0.3,
            rounds: 10,
            alpha: 0.1,
            measure: MeasureKind::Sam,
            aggregation: Aggregation::OneSam,
            noise_family: NoiseFamily::Normal,
            adaptivity: Adaptivity::Instance,
            ensemble_size: 1,
            cache: true,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            label_noise: 0.0,
            reduction: None,
            bounded: true,
            wcrv_raw_inputs: false,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn reduction_enabled(&self) -> bool {
        self.reduction.unwrap_or(self.measure == MeasureKind::Sam)
    }

    pub fn perturbation(&self) -> PerturbationConfig {
        PerturbationConfig {
            sigma: self.sigma,
            rounds: self.rounds,
            noise_family: self.noise_family,
            adaptivity: self.adaptivity,
            aggregation: self.aggregation,
        }
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            population_size: self.population,
            generations: self.generations,
            alpha: self.alpha,
            measure: ComplexityMeasure {
                kind: self.measure,
                wcrv_bins: None,
                wcrv_raw_inputs: self.wcrv_raw_inputs,
            },
            perturbation: self.perturbation(),
            archive_size: self.ensemble_size,
            cache: self.cache,
            cache_capacity: self.cache_capacity,
            seed: rng::derive(self.seed, &[0xE0]),
            ..EvolutionConfig::default()
        }
    }

    /// Every problem with the configuration, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dataset.as_os_str().is_empty() {
            out.push("no dataset given".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            out.push(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.label_noise >= 0.0 && self.label_noise.is_finite()) {
            out.push(format!("label noise must be nonnegative, got {}", self.label_noise));
        }
        if self.ensemble_size < 1 {
            out.push("ensemble size must be at least 1".into());
        }
        let mut evo = self.evolution().problems();
        if self.measure != MeasureKind::Sam {
            evo.extend(self.perturbation().problems().into_iter().filter(|p| !p.starts_with("sigma")));
        }
        for p in evo {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

/// One row of `generations.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetrics {
    pub generation: usize,
    pub best_o1: f64,
    pub best_o2: f64,
    pub archive_score: f64,
    pub train_r2: f64,
    pub test_r2: f64,
    pub mean_trees: f64,
    pub mean_nodes: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub measure: MeasureKind,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// The fixed-100 rule fell back to a 50:50 split.
    pub split_fell_back: bool,
    pub train_r2: f64,
    pub test_r2: f64,
    pub archive_score: f64,
    pub final_models: Vec<String>,
    pub front_size: usize,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub generations: Vec<GenerationMetrics>,
    pub summary: RunSummary,
    pub bundle: ModelBundle,
    pub wall_secs: Vec<f64>,
    pub cache_hits: Vec<u64>,
    pub cache_misses: Vec<u64>,
    /// Training time, excluding data loading.
    pub train_secs: f64,
}

/// Loads the configured dataset and runs one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let d = data::load_csv(&cfg.dataset, cfg.target.as_deref())?;
    run_on_dataset(cfg, &d)
}

/// Data preparation shared by runs and tests: split, add label noise to the
/// raw training target, then z-score inputs and target with training
/// statistics.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub input_stats: data::StandardizationStats,
    pub target_stats: data::StandardizationStats,
    pub fell_back: bool,
}

pub fn prepare(cfg: &ExperimentConfig, d: &Dataset) -> Result<Prepared> {
    let spec = SplitSpec {
        rule: cfg.split,
        seed: rng::derive(cfg.seed, &[0xD5]),
        label_noise_sigma: cfg.label_noise,
    };
    let s = data::split(d, &spec)?;
    let noisy = data::inject_label_noise(&s.train, cfg.label_noise, rng::derive(cfg.seed, &[0x1A]))?;
    let (train, test, input_stats) = data::standardize(&noisy, &s.test)?;
    let (train, test, target_stats) = data::standardize_target(&train, &test);
    Ok(Prepared {
        train,
        test,
        input_stats,
        target_stats,
        fell_back: s.fell_back,
    })
}

struct Scorer<'a> {
    train: &'a Dataset,
    test: &'a Dataset,
    reduction: bool,
    bounds: Option<PredictionBounds>,
    members: HashMap<TreeKey, Member>,
}

impl Scorer<'_> {
    fn members(&mut self, models: &[Individual]) -> Result<Vec<Member>> {
        models
            .iter()
            .map(|m| {
                let key = m.key();
                if let Some(v) = self.members.get(&key) {
                    return Ok(v.clone());
                }
                let v = Member::from_individual(m, &self.train.features)?;
                self.members.insert(key, v.clone());
                Ok(v)
            })
            .collect()
    }

    fn r2(&self, members: &[Member], d: &Dataset) -> Result<f64> {
        let pred = inference::ensemble_predict(members, &d.features, self.reduction, self.bounds.as_ref())?;
        Ok(inference::r2(&d.target, &pred))
    }

    fn score(&mut self, models: &[Individual]) -> Result<(f64, f64)> {
        let members = self.members(models)?;
        Ok((self.r2(&members, self.train)?, self.r2(&members, self.test)?))
    }
}

fn metrics(rec: &GenerationRecord, train_r2: f64, test_r2: f64) -> GenerationMetrics {
    GenerationMetrics {
        generation: rec.generation,
        best_o1: rec.best_o1,
        best_o2: rec.best_o2,
        archive_score: rec.archive_score,
        train_r2,
        test_r2,
        mean_trees: rec.mean_trees,
        mean_nodes: rec.mean_nodes,
    }
}

/// Runs one experiment on an in-memory dataset.
pub fn run_on_dataset(cfg: &ExperimentConfig, d: &Dataset) -> Result<RunReport> {
    let p = prepare(cfg, d)?;
    let evo = cfg.evolution();
    let mut scorer = Scorer {
        train: &p.train,
        test: &p.test,
        reduction: cfg.reduction_enabled(),
        bounds: cfg.bounded.then(|| PredictionBounds::from_targets(&p.train.target)),
        members: HashMap::new(),
    };
    let started = Instant::now();
    let mut scores = Vec::with_capacity(cfg.generations);
    let mut scoring_error = None;
    let result = evolution::run(&evo, &p.train.features, &p.train.target, |view| {
        match scorer.score(&view.final_models()) {
            Ok(s) => scores.push(s),
            Err(e) => {
                scores.push((f64::NAN, f64::NAN));
                scoring_error.get_or_insert(e);
            }
        }
    })?;
    let train_secs = started.elapsed().as_secs_f64();
    if let Some(e) = scoring_error {
        return Err(e);
    }

    let members = scorer.members(&result.final_models)?;
    let (train_r2, test_r2) = scores.last().copied().unwrap_or((f64::NAN, f64::NAN));
    let generations = result
        .records
        .iter()
        .zip(&scores)
        .map(|(r, (a, b))| metrics(r, *a, *b))
        .collect();
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        variable_names: d.names.clone(),
        target_name: d.target_name.clone(),
        input_stats: p.input_stats.clone(),
        target_stats: p.target_stats.clone(),
        reduction: scorer.reduction,
        bounds: scorer.bounds,
        members,
    };
    let summary = RunSummary {
        measure: cfg.measure,
        seed: cfg.seed,
        n_train: p.train.n_instances(),
        n_test: p.test.n_instances(),
        split_fell_back: p.fell_back,
        train_r2,
        test_r2,
        archive_score: result.archive.best_score().unwrap_or(f64::NAN),
        final_models: result.final_models.iter().map(ToString::to_string).collect(),
        front_size: result.front.len(),
    };
    Ok(RunReport {
        config: cfg.clone(),
        generations,
        summary,
        bundle,
        wall_secs: result.records.iter().map(|r| r.elapsed_secs).collect(),
        cache_hits: result.records.iter().map(|r| r.cache_hits).collect(),
        cache_misses: result.records.iter().map(|r| r.cache_misses).collect(),
        train_secs,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TimingRow {
    generation: usize,
    wall_secs: f64,
    cache_hits: u64,
    cache_misses: u64,
}

/// One row of a long-format metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub dataset: String,
    pub measure: MeasureKind,
    pub seed: u64,
    pub generation: usize,
    pub metric: String,
    pub value: f64,
}

fn dataset_label(cfg: &ExperimentConfig) -> String {
    cfg.dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn long_rows(report: &RunReport) -> Vec<LongRow> {
    let dataset = dataset_label(&report.config);
    let mut out = Vec::new();
    for g in &report.generations {
        for (metric, value) in [
            ("best_o1", g.best_o1),
            ("best_o2", g.best_o2),
            ("archive_score", g.archive_score),
            ("train_r2", g.train_r2),
            ("test_r2", g.test_r2),
        ] {
            out.push(LongRow {
                dataset: dataset.clone(),
                measure: report.config.measure,
                seed: report.config.seed,
                generation: g.generation,
                metric: metric.into(),
                value,
            });
        }
    }
    out
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, v)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Writes the run directory described in the module docs.
pub fn emit_metrics(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), &report.config)?;
    write_csv(&dir.join("generations.csv"), &report.generations)?;
    write_json(&dir.join("summary.json"), &report.summary)?;
    fs::write(dir.join("model.json"), report.bundle.to_json()?)?;
    let timing: Vec<TimingRow> = (0..report.generations.len())
        .map(|g| TimingRow {
            generation: g,
            wall_secs: report.wall_secs[g],
            cache_hits: report.cache_hits[g],
            cache_misses: report.cache_misses[g],
        })
        .collect();
    write_csv(&dir.join("timing.csv"), &timing)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub seeds: Vec<u64>,
    pub test_r2: Vec<f64>,
    pub train_r2: Vec<f64>,
    pub median_test_r2: f64,
    pub median_train_r2: f64,
}

impl BatchSummary {
    pub fn from_reports(reports: &[RunReport]) -> Self {
        let test_r2: Vec<f64> = reports.iter().map(|r| r.summary.test_r2).collect();
        let train_r2: Vec<f64> = reports.iter().map(|r| r.summary.train_r2).collect();
        Self {
            seeds: reports.iter().map(|r| r.config.seed).collect(),
            median_test_r2: stats::median(&test_r2),
            median_train_r2: stats::median(&train_r2),
            test_r2,
            train_r2,
        }
    }
}

/// Runs `cfg` once per seed. With an output directory, each run goes to
/// `seed-<s>/` and the batch writes `summary.json` and `long.csv`.
pub fn run_batch(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<(Vec<RunReport>, BatchSummary)> {
    cfg.validate()?;
    let d = data::load_csv(&cfg.dataset, cfg.target.as_deref())?;
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let c = ExperimentConfig { seed, ..cfg.clone() };
        let r = run_on_dataset(&c, &d)?;
        if let Some(out) = &cfg.out {
            emit_metrics(&r, &out.join(format!("seed-{seed}")))?;
        }
        reports.push(r);
    }
    let summary = BatchSummary::from_reports(&reports);
    if let Some(out) = &cfg.out {
        write_json(&out.join("summary.json"), &summary)?;
        let rows: Vec<LongRow> = reports.iter().flat_map(long_rows).collect();
        write_csv(&out.join("long.csv"), &rows)?;
    }
    Ok((reports, summary))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

/// Paired comparison of two score samples: a win or loss when the Wilcoxon
/// signed-rank p-value is below `level`, decided by the sign of the median
/// difference (then the rank sums); a tie otherwise.
pub fn paired_outcome(a: &[f64], b: &[f64], level: f64) -> Outcome {
    let w = stats::wilcoxon_signed_rank(a, b);
    if !(w.p_value < level) {
        return Outcome::Tie;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = stats::median(&diffs);
    let better = if m != 0.0 { m > 0.0 } else { w.w_plus > w.w_minus };
    if better {
        Outcome::Win
    } else {
        Outcome::Loss
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub measure: MeasureKind,
    pub opponent: MeasureKind,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

/// Test R² of one (dataset, measure, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub dataset: String,
    pub measure: MeasureKind,
    pub seed: u64,
    pub train_r2: f64,
    pub test_r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub results: Vec<ComparisonResult>,
    /// Win/tie/loss counts over datasets for every ordered pair of measures,
    /// from the first measure's point of view.
    pub table: Vec<ComparisonRow>,
}

/// Win/tie/loss table from per-run test scores at significance `level`.
pub fn tabulate(results: &[ComparisonResult], measures: &[MeasureKind], level: f64) -> Vec<ComparisonRow> {
    let mut datasets: Vec<&str> = results.iter().map(|r| r.dataset.as_str()).collect();
    datasets.dedup();
    datasets.sort_unstable();
    datasets.dedup();
    let scores = |d: &str, m: MeasureKind| -> Vec<(u64, f64)> {
        let mut v: Vec<(u64, f64)> = results
            .iter()
            .filter(|r| r.dataset == d && r.measure == m)
            .map(|r| (r.seed, r.test_r2))
            .collect();
        v.sort_by_key(|p| p.0);
        v
    };
    let mut table = Vec::new();
    for &a in measures {
        for &b in measures {
            let mut row = ComparisonRow { measure: a, opponent: b, wins: 0, ties: 0, losses: 0 };
            for d in &datasets {
                let (sa, sb) = (scores(d, a), scores(d, b));
                let paired: Vec<(f64, f64)> = sa
                    .iter()
                    .filter_map(|(s, x)| sb.iter().find(|(t, _)| t == s).map(|(_, y)| (*x, *y)))
                    .collect();
                let (xa, xb): (Vec<f64>, Vec<f64>) = paired.into_iter().unzip();
                match paired_outcome(&xa, &xb, level) {
                    Outcome::Win => row.wins += 1,
                    Outcome::Tie => row.ties += 1,
                    Outcome::Loss => row.losses += 1,
                }
            }
            table.push(row);
        }
    }
    table
}

/// Runs every measure on every dataset for every seed and tabulates paired
/// Wilcoxon outcomes at α = 0.05. Runs execute in parallel. With an output
/// directory, writes `results.csv`, `comparison.csv` and `long.csv`, plus a
/// run directory per `(dataset, measure, seed)`.
pub fn compare_measures(
    base: &ExperimentConfig,
    datasets: &[PathBuf],
    measures: &[MeasureKind],
    seeds: &[u64],
) -> Result<Comparison> {
    let loaded: Vec<(PathBuf, Dataset)> = datasets
        .iter()
        .map(|p| Ok((p.clone(), data::load_csv(p, base.target.as_deref())?)))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (di, (path, _)) in loaded.iter().enumerate() {
        for &m in measures {
            for &s in seeds {
                let cfg = ExperimentConfig {
                    dataset: path.clone(),
                    measure: m,
                    seed: s,
                    ..base.clone()
                };
                cfg.validate()?;
                jobs.push((di, cfg));
            }
        }
    }
    let reports: Vec<RunReport> = jobs
        .par_iter()
        .map(|(di, cfg)| run_on_dataset(cfg, &loaded[*di].1))
        .collect::<Result<_>>()?;
    let results: Vec<ComparisonResult> = reports
        .iter()
        .map(|r| ComparisonResult {
            dataset: dataset_label(&r.config),
            measure: r.config.measure,
            seed: r.config.seed,
            train_r2: r.summary.train_r2,
            test_r2: r.summary.test_r2,
        })
        .collect();
    let table = tabulate(&results, measures, 0.05);
    if let Some(out) = &base.out {
        fs::create_dir_all(out)?;
        for r in &reports {
            let dir = out.join(format!("{}-{}-seed-{}", dataset_label(&r.config), r.config.measure, r.config.seed));
            emit_metrics(r, &dir)?;
        }
        write_csv(&out.join("results.csv"), &results)?;
        write_csv(&out.join("comparison.csv"), &table)?;
        let rows: Vec<LongRow> = reports.iter().flat_map(long_rows).collect();
        write_csv(&out.join("long.csv"), &rows)?;
    }
    Ok(Comparison { results, table })
}

/// Predictions of a saved model for the rows of a CSV file. Target columns
/// present in the file are ignored.
pub fn predict_file(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = bundle
        .variable_names
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Ingestion {
                path: path.to_path_buf(),
                message: format!("missing column `{name}`"),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(cols.len());
        for &c in &cols {
            let cell = rec.get(c).unwrap_or("").trim();
            row.push(cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                row: i + 1,
                column: headers[c].to_string(),
                value: cell.to_string(),
            })?);
        }
        rows.push(row);
    }
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| rows[i][j]);
    bundle.predict(&x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_parameter_table() {
        let c = ExperimentConfig::default();
        assert_eq!((c.population, c.generations, c.rounds), (200, 100, 10));
        assert_eq!((c.sigma, c.alpha), (0.3, 0.1));
        assert_eq!(c.ensemble_size, 1);
        assert!(c.cache && c.bounded);
        let e = c.evolution();
        assert_eq!((e.crossover_rate, e.mutation_rate), (0.9, 0.1));
        assert_eq!(e.init_depth, (0, 3));
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = ExperimentConfig {
            sigma: -1.0,
            population: 1,
            label_noise: -0.5,
            ..Default::default()
        };
        match c.validate() {
            Err(Error::Config(p)) => assert_eq!(p.len(), 4, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reduction_defaults_to_sam_only() {
        let mut c = ExperimentConfig::default();
        assert!(c.reduction_enabled());
        c.measure = MeasureKind::Pp;
        assert!(!c.reduction_enabled());
        c.reduction = Some(true);
        assert!(c.reduction_enabled());
    }

    #[test]
    fn outcomes() {
        let a = [0.9, 0.8, 0.85, 0.7, 0.95, 0.75, 0.88];
        let b = [0.5, 0.4, 0.45, 0.3, 0.55, 0.35, 0.48];
        assert_eq!(paired_outcome(&a, &b, 0.05), Outcome::Win);
        assert_eq!(paired_outcome(&b, &a, 0.05), Outcome::Loss);
        assert_eq!(paired_outcome(&a, &a, 0.05), Outcome::Tie);
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig {
            dataset: "d.csv".into(),
            aggregation: Aggregation::MSam(4),
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"m-sam:4\""));
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&s).unwrap(), c);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
