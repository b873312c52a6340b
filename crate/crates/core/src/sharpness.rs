//! Semantic sharpness.
//!
//! Every subtree output `ψ` of every feature tree, terminals included, is
//! replaced by a noisy copy before its parent consumes it. Under the default
//! instance-adaptive scheme the noise is multiplicative:
//!
//! ```text
//! ψ̃ = ψ + ψ · σ · ε,   ε ~ N(0, 1)
//! ```
//!
//! The fitted ridge model is applied to the perturbed features for `K`
//! rounds. For instance `i` and round `k` the loss increase is
//! `d_ik = (Ỹ_ik − Y_i)² − (Ŷ_i − Y_i)²`, and the per-instance sharpness is
//! the running maximum `S_i = max(0, max_k d_ik)`. The aggregate reported as
//! the second objective depends on [`Aggregation`].
//!
//! The noise of a round is a pure function of the round seed and the node's
//! position in its tree, so the perturbed output of a tree in a round can be
//! cached and shared by every individual containing that tree.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ridge::FittedRidgeModel;
use crate::rng::{self, Rng};
use crate::stats;
use crate::tree::{clamp_output, FeatureTree, TreeKey};
use crate::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.3;
pub const DEFAULT_ROUNDS: usize = 10;
pub const DEFAULT_CACHE_CAPACITY: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Normal,
    /// `U(-1, 1)`.
    Uniform,
    /// `Laplace(0, 1)`.
    Laplace,
    /// One of the three above, drawn with probability 1/3 each per round.
    Ensemble,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adaptivity {
    /// Noise scaled elementwise by the subtree output.
    Instance,
    /// Noise scaled by the stddev of the subtree output over the batch.
    Batch,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Aggregation {
    /// Mean over instances of the per-instance worst round.
    OneSam,
    /// Mean over random mini-batches of size `M` of the worst round's batch mean.
    MSam(usize),
    /// Worst round's mean over all instances.
    NSam,
    /// Mean over rounds and instances.
    Gmp,
}

fn parse_choice<T: Copy>(what: &str, s: &str, choices: &[(&str, T)]) -> Result<T> {
    choices
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(s))
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown {what} `{s}`")))
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use NoiseFamily::*;
        parse_choice(
            "noise family",
            s,
            &[("normal", Normal), ("uniform", Uniform), ("laplace", Laplace), ("ensemble", Ensemble)],
        )
    }
}

impl FromStr for Adaptivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Adaptivity::*;
        parse_choice("adaptivity", s, &[("instance", Instance), ("batch", Batch), ("none", None)])
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::OneSam => f.write_str("one-sam"),
            Aggregation::MSam(m) => write!(f, "m-sam:{m}"),
            Aggregation::NSam => f.write_str("n-sam"),
            Aggregation::Gmp => f.write_str("gmp"),
        }
    }
}

/// `one-sam`, `n-sam`, `gmp` or `m-sam:M` (`m-sam` alone means `M = 4`).
impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.to_ascii_lowercase().replace('_', "-");
        match t.as_str() {
            "one-sam" => Ok(Aggregation::OneSam),
            "n-sam" => Ok(Aggregation::NSam),
            "gmp" => Ok(Aggregation::Gmp),
            "m-sam" => Ok(Aggregation::MSam(4)),
            _ => t
                .strip_prefix("m-sam:")
                .and_then(|m| m.parse().ok())
                .map(Aggregation::MSam)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown aggregation `{s}`"))),
        }
    }
}

impl TryFrom<String> for Aggregation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Aggregation> for String {
    fn from(a: Aggregation) -> String {
        a.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub sigma: f64,
    pub rounds: usize,
    pub noise_family: NoiseFamily,
    pub adaptivity: Adaptivity,
    pub aggregation: Aggregation,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            rounds: DEFAULT_ROUNDS,
            noise_family: NoiseFamily::Normal,
            adaptivity: Adaptivity::Instance,
            aggregation: Aggregation::OneSam,
        }
    }
}

impl PerturbationConfig {
    /// All problems, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            out.push(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.rounds < 1 {
            out.push("perturbation rounds must be at least 1".into());
        }
        if let Aggregation::MSam(0) = self.aggregation {
            out.push("m-sharpness batch size must be at least 1".into());
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

    fn fingerprint(&self) -> u64 {
        let agg = match self.aggregation {
            Aggregation::OneSam => 0,
            Aggregation::MSam(m) => 1 + m as u64,
            Aggregation::NSam => u64::MAX - 1,
            Aggregation::Gmp => u64::MAX - 2,
        };
        rng::derive(
            self.sigma.to_bits(),
            &[self.noise_family as u64, self.adaptivity as u64, agg],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    /// `S_i = max(0, max_k d_ik)`.
    pub per_instance: Vec<f64>,
    pub aggregate: f64,
}

/// LRU cache of perturbed tree semantics keyed by tree, round seed and
/// perturbation settings. A cache belongs to one input matrix.
pub struct SemanticsCache {
    inner: Option<Mutex<LruCache<(TreeKey, u64, u64), Arc<Vec<f64>>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl SemanticsCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c))),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// A cache that stores nothing.
    pub fn disabled() -> Self {
        Self::new(0)
    }

    pub fn is_enabled(&self) -> bool {
        self.inner.is_some()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.inner.as_ref().map_or(0, |m| m.lock().unwrap().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &(TreeKey, u64, u64)) -> Option<Arc<Vec<f64>>> {
        let hit = self.inner.as_ref()?.lock().unwrap().get(key).cloned();
        match hit {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        hit
    }

    fn put(&self, key: (TreeKey, u64, u64), v: Arc<Vec<f64>>) {
        if let Some(m) = &self.inner {
            m.lock().unwrap().put(key, v);
        }
    }
}

impl Default for SemanticsCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}

const TAG_FAMILY: u64 = 0xFA31;
const TAG_GROUPING: u64 = 0x6E0B;

/// Seed of perturbation round `k` under a base seed.
pub fn round_seed(base_seed: u64, k: usize) -> u64 {
    rng::derive(base_seed, &[0x5A4D, k as u64])
}

fn round_family(cfg: &PerturbationConfig, round_seed: u64) -> NoiseFamily {
    match cfg.noise_family {
        NoiseFamily::Ensemble => {
            let xi: f64 = rng::derived(round_seed, &[TAG_FAMILY]).random();
            if xi < 1.0 / 3.0 {
                NoiseFamily::Normal
            } else if xi < 2.0 / 3.0 {
                NoiseFamily::Uniform
            } else {
                NoiseFamily::Laplace
            }
        }
        f => f,
    }
}

fn draw(family: NoiseFamily, rng: &mut Rng) -> f64 {
    match family {
        NoiseFamily::Normal | NoiseFamily::Ensemble => StandardNormal.sample(rng),
        NoiseFamily::Uniform => rng.random_range(-1.0..1.0),
        NoiseFamily::Laplace => {
            // Inverse CDF of Laplace(0, 1).
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

fn perturb_node(values: &mut [f64], position: usize, family: NoiseFamily, cfg: &PerturbationConfig, round_seed: u64) {
    let mut r = rng::derived(round_seed, &[position as u64]);
    match cfg.adaptivity {
        Adaptivity::Instance => {
            for v in values.iter_mut() {
                let e = draw(family, &mut r);
                *v = clamp_output(*v + *v * cfg.sigma * e);
            }
        }
        Adaptivity::Batch => {
            let m = stats::mean(values);
            let sd = (values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64).sqrt();
            for v in values.iter_mut() {
                let e = draw(family, &mut r);
                *v = clamp_output(*v + sd * cfg.sigma * e);
            }
        }
        Adaptivity::None => {
            for v in values.iter_mut() {
                let e = draw(family, &mut r);
                *v = clamp_output(*v + cfg.sigma * e);
            }
        }
    }
}

/// Perturbed semantics `φ̃(X)` of one tree for one round.
pub fn perturb_semantics(
    t: &FeatureTree,
    x: &DMatrix<f64>,
    cfg: &PerturbationConfig,
    round_seed: u64,
    cache: &SemanticsCache,
) -> Result<Arc<Vec<f64>>> {
    let key = (t.canonical_key(), round_seed, cfg.fingerprint());
    if let Some(v) = cache.get(&key) {
        return Ok(v);
    }
    let family = round_family(cfg, round_seed);
    let out = Arc::new(t.evaluate_with(x, |pos, values| {
        perturb_node(values, pos, family, cfg, round_seed)
    })?);
    cache.put(key, Arc::clone(&out));
    Ok(out)
}

/// Loss increases `d_ik`, stored round-major (`K × n`).
#[derive(Clone, Debug, PartialEq)]
pub struct LossDiffs {
    pub rounds: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl LossDiffs {
    pub fn new(rounds: usize, n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rounds * n);
        Self { rounds, n, values }
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.n + i]
    }

    pub fn round(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }
}

/// Per-instance worst-case sharpness, clamped at zero.
pub fn per_instance_sharpness(d: &LossDiffs) -> Vec<f64> {
    (0..d.n)
        .map(|i| (0..d.rounds).fold(0.0f64, |s, k| s.max(d.get(k, i))))
        .collect()
}

/// Aggregates loss increases. `one_sam` and `m_sam` start their running
/// maxima at zero; `n_sam` and `gmp` are the plain max-of-means and mean.
/// Mini-batches for `m_sam` are consecutive chunks of a permutation drawn from
/// `grouping_seed`, each weighted by its size.
///
/// Every estimator sums first and divides once, so the ordering
/// `gmp ≤ n_sam ≤ m_sam ≤ one_sam` survives rounding whenever the sums are
/// exact.
pub fn aggregate(d: &LossDiffs, agg: Aggregation, grouping_seed: u64) -> f64 {
    let n = d.n as f64;
    match agg {
        Aggregation::OneSam => per_instance_sharpness(d).iter().sum::<f64>() / n,
        Aggregation::NSam => {
            (0..d.rounds)
                .map(|k| d.round(k).iter().sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
                / n
        }
        Aggregation::Gmp => d.values.iter().sum::<f64>() / (n * d.rounds as f64),
        Aggregation::MSam(m) => {
            let mut order: Vec<usize> = (0..d.n).collect();
            order.shuffle(&mut rng::derived(grouping_seed, &[TAG_GROUPING]));
            let mut total = 0.0;
            for batch in order.chunks_mut(m.max(1)) {
                batch.sort_unstable();
                total += (0..d.rounds).fold(0.0f64, |s, k| s.max(batch.iter().map(|&i| d.get(k, i)).sum()));
            }
            total / n
        }
    }
}

/// Estimates sharpness of feature sets against fitted models. Round seeds
/// derive from `base_seed`, so the same trees see the same noise in every
/// generation.
pub struct SharpnessEstimator {
    pub cfg: PerturbationConfig,
    pub base_seed: u64,
    pub cache: Arc<SemanticsCache>,
}

impl SharpnessEstimator {
    pub fn new(cfg: PerturbationConfig, base_seed: u64, cache: Arc<SemanticsCache>) -> Self {
        Self { cfg, base_seed, cache }
    }

    /// Loss increases of every round for `trees` under `model`.
    pub fn loss_diffs(
        &self,
        trees: &[FeatureTree],
        model: &FittedRidgeModel,
        x: &DMatrix<f64>,
        y: &[f64],
    ) -> Result<LossDiffs> {
        if model.n_features() != trees.len() {
            return Err(Error::Contract(format!(
                "model fitted on {} features, individual has {} trees",
                model.n_features(),
                trees.len()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
        }
        let n = x.nrows();
        let phi = crate::tree::construct_features(trees, x)?;
        let base = model.predict(&phi)?;
        let base_loss: Vec<f64> = base.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).collect();

        let mut values = Vec::with_capacity(self.cfg.rounds * n);
        let mut perturbed = DMatrix::zeros(n, trees.len());
        for k in 0..self.cfg.rounds {
            let seed = round_seed(self.base_seed, k);
            for (j, t) in trees.iter().enumerate() {
                let v = perturb_semantics(t, x, &self.cfg, seed, &self.cache)?;
                perturbed.column_mut(j).copy_from_slice(&v);
            }
            let pred = model.predict(&perturbed)?;
            for i in 0..n {
                let e = pred[i] - y[i];
                values.push(e * e - base_loss[i]);
            }
        }
        Ok(LossDiffs::new(self.cfg.rounds, n, values))
    }

    pub fn estimate(
        &self,
        trees: &[FeatureTree],
        model: &FittedRidgeModel,
        x: &DMatrix<f64>,
        y: &[f64],
    ) -> Result<SharpnessReport> {
        let d = self.loss_diffs(trees, model, x, y)?;
        let aggregate = aggregate(&d, self.cfg.aggregation, self.base_seed);
        Ok(SharpnessReport {
            per_instance: per_instance_sharpness(&d),
            aggregate,
        })
    }
}

/// How a linear layer `Σ w_i x_i` is perturbed when checking that weight
/// noise and input noise agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerNoise {
    /// `w_i + ε_i`, `ε_i ~ N(0, w_i²)`.
    Weight,
    /// `x_i + θ_i`, `θ_i ~ N(0, x_i²)`.
    Input,
    /// `x_i + θ_i`, `θ_i ~ N(0, 1)`; does not match the weight scheme.
    UnscaledInput,
}

const EQUIVALENCE_BATCH: usize = 100;

/// Output samples of a linear layer under one noise scheme. Sample `s` uses
/// input row `s % inputs.len()`.
pub fn layer_output_samples(
    weights: &[f64],
    inputs: &[Vec<f64>],
    noise: LayerNoise,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    const CHUNK: usize = 1024;
    let chunks: Vec<usize> = (0..samples.div_ceil(CHUNK)).collect();
    chunks
        .par_iter()
        .flat_map_iter(|&c| {
            let mut r = rng::derived(seed, &[noise as u64, c as u64]);
            let start = c * CHUNK;
            let end = (start + CHUNK).min(samples);
            (start..end)
                .map(|s| {
                    let x = &inputs[s % inputs.len()];
                    let mut acc = 0.0;
                    for (&w, &xi) in weights.iter().zip(x) {
                        let e: f64 = StandardNormal.sample(&mut r);
                        acc += match noise {
                            LayerNoise::Weight => (w + w * e) * xi,
                            LayerNoise::Input => w * (xi + xi * e),
                            LayerNoise::UnscaledInput => w * (xi + e),
                        };
                    }
                    acc
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// KS statistic between weight-noise outputs and outputs under `against`, for
/// the given layer.
pub fn noise_equivalence_ks(
    weights: &[f64],
    inputs: &[Vec<f64>],
    against: LayerNoise,
    samples: usize,
    seed: u64,
) -> f64 {
    let a = layer_output_samples(weights, inputs, LayerNoise::Weight, samples, rng::derive(seed, &[1]));
    let b = layer_output_samples(weights, inputs, against, samples, rng::derive(seed, &[2]));
    stats::ks_two_sample(&a, &b)
}

/// Random layer of the given width (weights `N(0, 1)`) over a batch of 100
/// inputs drawn from `U(-1, 1)`.
pub fn random_layer(width: usize, rng: &mut Rng) -> (Vec<f64>, Vec<Vec<f64>>) {
    let weights = (0..width).map(|_| StandardNormal.sample(rng)).collect();
    let inputs = (0..EQUIVALENCE_BATCH)
        .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (weights, inputs)
}

/// Two-sample KS statistic between the output distributions of a random
/// linear layer under adaptive weight noise and under input noise scaled by
/// the inputs. The two schemes induce the same distribution, so the
/// statistic shrinks toward zero as `samples` grows.
pub fn verify_noise_equivalence(hidden_width: usize, samples: usize, rng: &mut Rng) -> f64 {
    let (w, x) = random_layer(hidden_width, rng);
    let seed: u64 = rng.random();
    noise_equivalence_ks(&w, &x, LayerNoise::Input, samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge;
    use crate::rng::seeded;

    fn cfg(sigma: f64) -> PerturbationConfig {
        PerturbationConfig { sigma, ..Default::default() }
    }

    fn data(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut r = seeded(seed);
        let x = DMatrix::from_fn(n, p, |_, _| r.random_range(-2.0..2.0));
        let y = (0..n).map(|i| x[(i, 0)] * x[(i, 1 % p)] + r.random_range(-0.1..0.1)).collect();
        (x, y)
    }

    #[test]
    fn zero_sigma_reproduces_semantics() {
        let (x, _) = data(30, 3, 1);
        let t: FeatureTree = "(mul (sin x0) (AQ x1 x2))".parse().unwrap();
        let c = SemanticsCache::disabled();
        for adapt in [Adaptivity::Instance, Adaptivity::Batch, Adaptivity::None] {
            let cfg = PerturbationConfig { adaptivity: adapt, ..cfg(0.0) };
            let got = perturb_semantics(&t, &x, &cfg, 7, &c).unwrap();
            assert_eq!(*got, t.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn zero_semantics_stay_zero_under_instance_noise() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 0.0 } else { i as f64 });
        let t: FeatureTree = "(mul x0 x1)".parse().unwrap();
        let got = perturb_semantics(&t, &x, &cfg(0.3), 3, &SemanticsCache::disabled()).unwrap();
        assert!(got.iter().all(|v| *v == 0.0));
        let t: FeatureTree = "x0".parse().unwrap();
        let got = perturb_semantics(&t, &x, &cfg(0.3), 3, &SemanticsCache::disabled()).unwrap();
        assert!(got.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn terminal_noise_moments() {
        let n = 100_000;
        let x = DMatrix::from_fn(n, 1, |i, _| 1.0 + (i % 7) as f64);
        let t = FeatureTree::terminal(0);
        let got = perturb_semantics(&t, &x, &cfg(0.3), 99, &SemanticsCache::disabled()).unwrap();
        let ratio: Vec<f64> = got.iter().zip(x.iter()).map(|(a, b)| a / b).collect();
        let m = stats::mean(&ratio);
        let sd = (ratio.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
        assert!((sd - 0.3).abs() < 0.01, "sd {sd}");
    }

    #[test]
    fn noise_families_have_unit_scale_shapes() {
        let n = 200_000;
        let x = DMatrix::from_element(n, 1, 1.0);
        let t = FeatureTree::terminal(0);
        for (family, var) in [
            (NoiseFamily::Uniform, 1.0 / 3.0),
            (NoiseFamily::Laplace, 2.0),
            (NoiseFamily::Normal, 1.0),
        ] {
            let c = PerturbationConfig { sigma: 1.0, noise_family: family, ..Default::default() };
            let got = perturb_semantics(&t, &x, &c, 5, &SemanticsCache::disabled()).unwrap();
            let e: Vec<f64> = got.iter().map(|v| v - 1.0).collect();
            let m = stats::mean(&e);
            let v = e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            assert!(m.abs() < 0.02, "{family:?} mean {m}");
            assert!((v - var).abs() / var < 0.03, "{family:?} var {v}");
            if family == NoiseFamily::Uniform {
                assert!(e.iter().all(|x| x.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn ensemble_picks_each_family() {
        let c = PerturbationConfig { noise_family: NoiseFamily::Ensemble, ..Default::default() };
        let mut counts = [0usize; 3];
        for k in 0..3000 {
            match round_family(&c, round_seed(1, k)) {
                NoiseFamily::Normal => counts[0] += 1,
                NoiseFamily::Uniform => counts[1] += 1,
                NoiseFamily::Laplace => counts[2] += 1,
                NoiseFamily::Ensemble => unreachable!(),
            }
        }
        assert!(counts.iter().all(|&c| (900..1100).contains(&c)), "{counts:?}");
    }

    #[test]
    fn batch_adaptivity_uses_column_spread() {
        // A constant terminal has zero spread, so batch noise leaves it alone.
        let x = DMatrix::from_element(50, 1, 4.0);
        let c = PerturbationConfig { adaptivity: Adaptivity::Batch, ..Default::default() };
        let got = perturb_semantics(&FeatureTree::terminal(0), &x, &c, 2, &SemanticsCache::disabled()).unwrap();
        assert!(got.iter().all(|v| *v == 4.0));
        // Unscaled noise moves it.
        let c = PerturbationConfig { adaptivity: Adaptivity::None, ..Default::default() };
        let got = perturb_semantics(&FeatureTree::terminal(0), &x, &c, 2, &SemanticsCache::disabled()).unwrap();
        assert!(got.iter().any(|v| *v != 4.0));
    }

    #[test]
    fn cache_hits_are_bit_identical() {
        let (x, _) = data(40, 2, 3);
        let t: FeatureTree = "(add (square x0) x1)".parse().unwrap();
        let c = SemanticsCache::new(16);
        let a = perturb_semantics(&t, &x, &cfg(0.3), 11, &c).unwrap();
        let b = perturb_semantics(&t, &x, &cfg(0.3), 11, &c).unwrap();
        assert_eq!((c.hits(), c.misses()), (1, 1));
        assert_eq!(a, b);
        let fresh = perturb_semantics(&t, &x, &cfg(0.3), 11, &SemanticsCache::disabled()).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), fresh.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn capacity_one_alternating_always_misses() {
        let (x, _) = data(20, 2, 4);
        let t1: FeatureTree = "(add x0 x1)".parse().unwrap();
        let t2: FeatureTree = "(mul x0 x1)".parse().unwrap();
        let c = SemanticsCache::new(1);
        let none = SemanticsCache::disabled();
        for _ in 0..5 {
            for t in [&t1, &t2] {
                let got = perturb_semantics(t, &x, &cfg(0.3), 1, &c).unwrap();
                assert_eq!(got, perturb_semantics(t, &x, &cfg(0.3), 1, &none).unwrap());
            }
        }
        assert_eq!(c.hits(), 0);
        assert_eq!(c.misses(), 10);
    }

    #[test]
    fn disabled_perturbation_gives_zero_sharpness() {
        let (x, y) = data(25, 2, 5);
        let trees: Vec<FeatureTree> = vec!["(mul x0 x1)".parse().unwrap(), "x0".parse().unwrap()];
        let phi = crate::tree::construct_features(&trees, &x).unwrap();
        let model = ridge::fit(&phi, &y, 0.1).unwrap();
        let est = SharpnessEstimator::new(cfg(0.0), 3, Arc::new(SemanticsCache::disabled()));
        let r = est.estimate(&trees, &model, &x, &y).unwrap();
        assert!(r.per_instance.iter().all(|s| *s == 0.0));
        assert_eq!(r.aggregate, 0.0);
    }

    #[test]
    fn mismatched_model_is_a_contract_error() {
        let (x, y) = data(25, 2, 5);
        let trees: Vec<FeatureTree> = vec!["x0".parse().unwrap()];
        let phi = crate::tree::construct_features(&trees, &x).unwrap();
        let model = ridge::fit(&phi, &y, 0.1).unwrap();
        let two = vec![trees[0].clone(), trees[0].clone()];
        let est = SharpnessEstimator::new(cfg(0.3), 3, Arc::new(SemanticsCache::disabled()));
        assert!(matches!(est.estimate(&two, &model, &x, &y), Err(Error::Contract(_))));
    }

    #[test]
    fn hand_aggregation() {
        // Round-major: round 0 = {0.5, -0.1}, round 1 = {0.2, 0.3}.
        let d = LossDiffs::new(2, 2, vec![0.5, -0.1, 0.2, 0.3]);
        assert!((aggregate(&d, Aggregation::OneSam, 0) - 0.4).abs() < 1e-15);
        assert!((aggregate(&d, Aggregation::NSam, 0) - 0.25).abs() < 1e-15);
        assert!((aggregate(&d, Aggregation::Gmp, 0) - 0.225).abs() < 1e-15);
        assert_eq!(per_instance_sharpness(&d), vec![0.5, 0.3]);
    }

    #[test]
    fn single_instance_aggregations_coincide() {
        let d = LossDiffs::new(3, 1, vec![0.2, 0.7, 0.1]);
        let one = aggregate(&d, Aggregation::OneSam, 0);
        assert_eq!(one, aggregate(&d, Aggregation::NSam, 0));
        assert_eq!(one, aggregate(&d, Aggregation::MSam(4), 0));
    }

    #[test]
    fn negative_diffs_clamp_only_per_instance_paths() {
        let d = LossDiffs::new(2, 2, vec![-0.5, -0.1, -0.2, -0.3]);
        assert_eq!(aggregate(&d, Aggregation::OneSam, 0), 0.0);
        assert_eq!(aggregate(&d, Aggregation::MSam(2), 0), 0.0);
        assert!((aggregate(&d, Aggregation::NSam, 0) + 0.25).abs() < 1e-15);
        assert!((aggregate(&d, Aggregation::Gmp, 0) + 0.275).abs() < 1e-15);
    }

    #[test]
    fn report_is_deterministic_across_cache_states() {
        let (x, y) = data(30, 3, 8);
        let trees: Vec<FeatureTree> = vec!["(mul x0 x1)".parse().unwrap(), "(sin x2)".parse().unwrap()];
        let phi = crate::tree::construct_features(&trees, &x).unwrap();
        let model = ridge::fit(&phi, &y, 0.1).unwrap();
        let cached = SharpnessEstimator::new(cfg(0.3), 21, Arc::new(SemanticsCache::default()));
        let a = cached.estimate(&trees, &model, &x, &y).unwrap();
        let b = cached.estimate(&trees, &model, &x, &y).unwrap();
        let fresh = SharpnessEstimator::new(cfg(0.3), 21, Arc::new(SemanticsCache::disabled()));
        let c = fresh.estimate(&trees, &model, &x, &y).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(cached.cache.hits() > 0);
    }

    #[test]
    fn unit_layer_schemes_agree() {
        let ks = noise_equivalence_ks(&[1.0], &[vec![1.0]], LayerNoise::Input, 100_000, 4);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn config_validation() {
        assert!(PerturbationConfig::default().validate().is_ok());
        let bad = PerturbationConfig { sigma: -1.0, rounds: 0, aggregation: Aggregation::MSam(0), ..Default::default() };
        match bad.validate() {
            Err(Error::Config(p)) => assert_eq!(p.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
