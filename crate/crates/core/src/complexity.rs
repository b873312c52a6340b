//! Complexity measures that can replace sharpness as the second objective.
//!
//! | kind   | value                                                         |
//! |--------|---------------------------------------------------------------|
//! | `pp`   | total node count                                              |
//! | `tk`   | mean squared centered model output                            |
//! | `gc`   | nondominated rank of `(pp, tk)` within the population         |
//! | `rc`   | Rademacher estimate from a fit to sign-flipped targets        |
//! | `wcrv` | MIC-weighted relevance of features to target and residuals    |
//! | `iodc` | negated correlation of input distances and output distances   |
//! | `sam`  | semantic sharpness (see [`crate::sharpness`])                 |
//! | `none` | constant zero; single-objective GP                            |

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::column;
use crate::evolution::{nondominated_ranks, ObjectiveVector};
use crate::ridge::{self, FittedRidgeModel};
use crate::tree::Individual;
use crate::{rng, stats, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Sam,
    Pp,
    Tk,
    Gc,
    Rc,
    Wcrv,
    Iodc,
    None,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 8] = [
        MeasureKind::Sam,
        MeasureKind::Pp,
        MeasureKind::Tk,
        MeasureKind::Gc,
        MeasureKind::Rc,
        MeasureKind::Wcrv,
        MeasureKind::Iodc,
        MeasureKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Sam => "sam",
            MeasureKind::Pp => "pp",
            MeasureKind::Tk => "tk",
            MeasureKind::Gc => "gc",
            MeasureKind::Rc => "rc",
            MeasureKind::Wcrv => "wcrv",
            MeasureKind::Iodc => "iodc",
            MeasureKind::None => "none",
        }
    }

    /// Whether the value of one individual depends on the rest of the population.
    pub fn is_population_level(self) -> bool {
        self == MeasureKind::Gc
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown measure `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityMeasure {
    pub kind: MeasureKind,
    /// Grid size for the MIC approximation; derived from `n` when `None`.
    #[serde(default)]
    pub wcrv_bins: Option<usize>,
    /// Score raw input variables instead of constructed features under `wcrv`.
    #[serde(default)]
    pub wcrv_raw_inputs: bool,
}

impl ComplexityMeasure {
    pub fn new(kind: MeasureKind) -> Self {
        Self {
            kind,
            wcrv_bins: None,
            wcrv_raw_inputs: false,
        }
    }
}

impl From<MeasureKind> for ComplexityMeasure {
    fn from(kind: MeasureKind) -> Self {
        Self::new(kind)
    }
}

/// Parsimony pressure: total node count.
pub fn pp(ind: &Individual) -> f64 {
    ind.node_count() as f64
}

/// Zero-order Tikhonov on centered predictions.
pub fn tk(centered_predictions: &[f64]) -> f64 {
    stats::mean(&centered_predictions.iter().map(|v| v * v).collect::<Vec<_>>())
}

/// Tikhonov of a fitted model on its training features.
pub fn tk_model(model: &FittedRidgeModel, phi: &DMatrix<f64>) -> Result<f64> {
    Ok(tk(&model.predict_centered(phi)?))
}

/// Grand complexity: nondominated rank (0 = first front) of each `(pp, tk)` pair.
pub fn gc(points: &[(f64, f64)]) -> Vec<usize> {
    let v: Vec<ObjectiveVector> = points.iter().map(|&(a, b)| ObjectiveVector::new(a, b)).collect();
    nondominated_ranks(&v)
}

/// Rademacher signs `ζ ∈ {−1, +1}ⁿ`.
pub fn rademacher_signs(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::derived(seed, &[0x7ADE]);
    (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// `(1/n) Σ ζ_i (f_i − y_i)²` for predictions `f` of a model fitted to `−ζy`.
pub fn rc_from_predictions(zeta: &[f64], y: &[f64], f: &[f64]) -> f64 {
    let s: f64 = zeta.iter().zip(y).zip(f).map(|((z, y), f)| z * (f - y) * (f - y)).sum();
    s / y.len() as f64
}

/// Fits ridge on `phi` to `−ζy` and scores the fit against `y`.
pub fn rc(phi: &DMatrix<f64>, y: &[f64], zeta: &[f64], alpha: f64) -> Result<f64> {
    if zeta.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: zeta.len() });
    }
    let flipped: Vec<f64> = zeta.iter().zip(y).map(|(z, y)| -z * y).collect();
    let model = ridge::fit(phi, &flipped, alpha)?;
    Ok(rc_from_predictions(zeta, y, &model.predict(phi)?))
}

/// Dependence score in `[0, 1]` between two samples.
pub trait Mic: Sync {
    fn mic(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Normalized mutual information on an equal-frequency `B × B` grid,
/// `B = ⌈n^0.3⌉` clamped to `[2, 8]` unless fixed.
#[derive(Clone, Copy, Debug, Default)]
pub struct GridNmi {
    pub bins: Option<usize>,
}

impl GridNmi {
    pub fn bins_for(n: usize) -> usize {
        ((n as f64).powf(0.3).ceil() as usize).clamp(2, 8)
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

fn equal_frequency_bins(v: &[f64], b: usize) -> Vec<usize> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && v[order[end]] == v[order[pos]] {
            end += 1;
        }
        // Tied values share the bin of their first rank.
        let bin = (pos * b / n).min(b - 1);
        for &i in &order[pos..end] {
            out[i] = bin;
        }
        pos = end;
    }
    out
}

impl Mic for GridNmi {
    fn mic(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        if n < 2 || is_constant(a) || is_constant(b) {
            return 0.0;
        }
        let k = self.bins.unwrap_or_else(|| Self::bins_for(n)).max(2);
        let (ba, bb) = (equal_frequency_bins(a, k), equal_frequency_bins(b, k));
        let mut joint = vec![0.0; k * k];
        let (mut pa, mut pb) = (vec![0.0; k], vec![0.0; k]);
        let w = 1.0 / n as f64;
        for (&i, &j) in ba.iter().zip(&bb) {
            joint[i * k + j] += w;
            pa[i] += w;
            pb[j] += w;
        }
        let mut mi = 0.0;
        for i in 0..k {
            for j in 0..k {
                let p = joint[i * k + j];
                if p > 0.0 {
                    mi += p * (p / (pa[i] * pb[j])).ln();
                }
            }
        }
        (mi / (k as f64).ln()).clamp(0.0, 1.0)
    }
}

/// Features whose relevance to the target reaches the median relevance score
/// `MIC(f, Y)·MIC(f, R)`; the others score `1 − MIC(f, Y)`.
pub fn wcrv_from_scores(mic_y: &[f64], mic_r: &[f64]) -> f64 {
    let mv = stats::median(mic_y);
    mic_y
        .iter()
        .zip(mic_r)
        .map(|(&my, &mr)| if my >= mv { my * mr } else { 1.0 - my })
        .sum()
}

/// WCRV over the columns of `vars` given target `y` and residuals `y − ŷ`.
pub fn wcrv(mic: &dyn Mic, vars: &DMatrix<f64>, y: &[f64], residuals: &[f64]) -> f64 {
    let (my, mr): (Vec<f64>, Vec<f64>) = (0..vars.ncols())
        .map(|j| {
            let c = column(vars, j);
            (mic.mic(c, y), mic.mic(c, residuals))
        })
        .unzip();
    wcrv_from_scores(&my, &mr)
}

/// Pearson correlation between pairwise Euclidean input distances and pairwise
/// absolute output distances; 0 when either is constant.
pub fn iodc(x: &DMatrix<f64>, y_hat: &[f64]) -> f64 {
    let n = x.nrows();
    let pairs = n * n.saturating_sub(1) / 2;
    let (mut din, mut dout) = (Vec::with_capacity(pairs), Vec::with_capacity(pairs));
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            din.push(d.sqrt());
            dout.push((y_hat[i] - y_hat[j]).abs());
        }
    }
    stats::pearson(&din, &dout).unwrap_or(0.0)
}
