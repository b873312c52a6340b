//! Prediction on unseen data.
//!
//! Each internal node of a final tree keeps its sorted training outputs. At
//! inference the sharpness reduction layer replaces every internal node's
//! output by the nearest stored training value before the parent consumes it,
//! so unseen inputs can only produce semantics the model was trained on.
//! Predictions are then clipped to the training target range and averaged
//! over the ensemble.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::StandardizationStats;
use crate::ridge::FittedRidgeModel;
use crate::tree::{construct_features, FeatureTree, Individual};
use crate::{Error, Result};

/// A tree plus the sorted training outputs of each internal node, indexed by
/// prefix position (`None` for terminals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTree {
    pub tree: FeatureTree,
    pub stored: Vec<Option<Vec<f64>>>,
}

impl SnapshotTree {
    pub fn capture(tree: &FeatureTree, x_train: &DMatrix<f64>) -> Result<Self> {
        let mut stored = vec![None; tree.len()];
        tree.evaluate_with(x_train, |pos, values| {
            if tree.is_internal(pos) {
                let mut s = values.to_vec();
                s.sort_by(f64::total_cmp);
                stored[pos] = Some(s);
            }
        })?;
        Ok(Self { tree: tree.clone(), stored })
    }

    /// Semantics with the reduction layer applied at every internal node.
    pub fn evaluate_reduced(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.tree.evaluate_with(x, |pos, values| {
            if let Some(s) = &self.stored[pos] {
                values.iter_mut().for_each(|v| *v = nearest(s, *v));
            }
        })
    }
}

/// Snapshots of every tree of `ind` on the training inputs.
pub fn snapshot(ind: &Individual, x_train: &DMatrix<f64>) -> Result<Vec<SnapshotTree>> {
    ind.trees().iter().map(|t| SnapshotTree::capture(t, x_train)).collect()
}

/// Nearest value of `sorted` to `q` by binary search; ties go left.
pub fn nearest(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let idx = sorted.partition_point(|v| *v < q).clamp(1, sorted.len() - 1);
    let (left, right) = (sorted[idx - 1], sorted[idx]);
    if q - left <= right - q {
        left
    } else {
        right
    }
}

/// Single-instance evaluation with the reduction layer.
pub fn reduce_sharpness_eval(t: &SnapshotTree, row: &[f64]) -> f64 {
    t.tree.evaluate_row(row, |pos, v| match &t.stored[pos] {
        Some(s) => nearest(s, v),
        None => v,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionBounds {
    pub y_min: f64,
    pub y_max: f64,
}

impl PredictionBounds {
    pub fn from_targets(y: &[f64]) -> Self {
        let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { y_min, y_max }
    }
}

pub fn bounded_predict(y_hat: &[f64], b: &PredictionBounds) -> Vec<f64> {
    y_hat.iter().map(|v| v.clamp(b.y_min, b.y_max)).collect()
}

/// One fitted feature set ready for prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub trees: Vec<SnapshotTree>,
    pub model: FittedRidgeModel,
}

impl Member {
    /// Snapshots a fitted individual. Leave-one-out diagnostics are dropped.
    pub fn from_individual(ind: &Individual, x_train: &DMatrix<f64>) -> Result<Self> {
        let mut model = ind
            .fitted_model()
            .ok_or_else(|| Error::Contract(format!("individual {ind} has no fitted model")))?
            .clone();
        model.loocv_errors.clear();
        model.leverages.clear();
        Ok(Self {
            trees: snapshot(ind, x_train)?,
            model,
        })
    }

    pub fn features(&self, x: &DMatrix<f64>, reduction: bool) -> Result<DMatrix<f64>> {
        if !reduction {
            let trees: Vec<FeatureTree> = self.trees.iter().map(|t| t.tree.clone()).collect();
            return construct_features(&trees, x);
        }
        let mut out = DMatrix::zeros(x.nrows(), self.trees.len());
        for (j, t) in self.trees.iter().enumerate() {
            out.column_mut(j).copy_from_slice(&t.evaluate_reduced(x)?);
        }
        Ok(out)
    }

    /// Features, ridge prediction and clipping to `bounds`.
    pub fn predict(&self, x: &DMatrix<f64>, reduction: bool, bounds: Option<&PredictionBounds>) -> Result<Vec<f64>> {
        let y = self.model.predict(&self.features(x, reduction)?)?;
        Ok(match bounds {
            Some(b) => bounded_predict(&y, b),
            None => y,
        })
    }
}

/// Unweighted mean of the members' predictions.
pub fn ensemble_predict(
    members: &[Member],
    x: &DMatrix<f64>,
    reduction: bool,
    bounds: Option<&PredictionBounds>,
) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("ensemble has no members".into()));
    }
    let mut acc = vec![0.0; x.nrows()];
    for m in members {
        for (a, p) in acc.iter_mut().zip(m.predict(x, reduction, bounds)?) {
            *a += p;
        }
    }
    let k = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

/// Coefficient of determination; 0 when `y_true` is constant.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> f64 {
    assert_eq!(y_true.len(), y_pred.len());
    let m = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - m) * (y - m)).sum();
    if ss_tot == 0.0 {
        return 0.0;
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    1.0 - ss_res / ss_tot
}

pub const BUNDLE_FORMAT: &str = "samgp-model";
pub const BUNDLE_VERSION: u32 = 1;

/// Self-contained model file: maps raw inputs to predictions on the original
/// target scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub variable_names: Vec<String>,
    pub target_name: String,
    /// Raw input → standardized input.
    pub input_stats: StandardizationStats,
    /// Raw target → standardized target (a single column).
    pub target_stats: StandardizationStats,
    pub reduction: bool,
    /// Clipping range on the standardized target scale.
    pub bounds: Option<PredictionBounds>,
    pub members: Vec<Member>,
}

impl ModelBundle {
    /// Predictions on the original target scale for raw inputs.
    pub fn predict(&self, x_raw: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x_raw.ncols() != self.variable_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.variable_names.len(),
                found: x_raw.ncols(),
            });
        }
        let x = self.input_stats.apply(x_raw);
        let y = ensemble_predict(&self.members, &x, self.reduction, self.bounds.as_ref())?;
        Ok(y.into_iter().map(|v| self.target_stats.invert_scalar(v)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s)?;
        if b.format != BUNDLE_FORMAT || b.version != BUNDLE_VERSION {
            return Err(Error::InvalidArgument(format!(
                "not a {BUNDLE_FORMAT} v{BUNDLE_VERSION} document (found {} v{})",
                b.format, b.version
            )));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge;
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn terminal_tree_stores_nothing() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let s = SnapshotTree::capture(&FeatureTree::terminal(0), &x).unwrap();
        assert_eq!(s.stored, vec![None]);
    }

    #[test]
    fn add_snapshot_hand_values() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let t: FeatureTree = "(add x0 x1)".parse().unwrap();
        let s = SnapshotTree::capture(&t, &x).unwrap();
        assert_eq!(s.stored[0], Some(vec![3.0, 7.0]));
        assert_eq!(s.stored[1], None);
    }

    #[test]
    fn nearest_lookup_cases() {
        assert_eq!(nearest(&[3.0, 7.0], 4.9), 3.0);
        assert_eq!(nearest(&[3.0, 7.0], 5.1), 7.0);
        assert_eq!(nearest(&[3.0, 7.0], 5.0), 3.0);
        assert_eq!(nearest(&[3.0, 7.0], 100.0), 7.0);
        assert_eq!(nearest(&[3.0, 7.0], -100.0), 3.0);
        assert_eq!(nearest(&[2.0], 9.0), 2.0);
        assert_eq!(nearest(&[1.0, 2.0, 2.0, 5.0], 2.0), 2.0);
    }

    #[test]
    fn reduction_layer_on_training_point_is_exact() {
        let mut r = seeded(1);
        let x = DMatrix::from_fn(30, 3, |_, _| r.random_range(-2.0..2.0));
        let t: FeatureTree = "(AQ (mul x0 (sin x1)) (sub x2 (square x0)))".parse().unwrap();
        let s = SnapshotTree::capture(&t, &x).unwrap();
        let raw = t.evaluate(&x).unwrap();
        for i in 0..30 {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            assert_eq!(reduce_sharpness_eval(&s, &row), raw[i]);
        }
        assert_eq!(s.evaluate_reduced(&x).unwrap(), raw);
    }

    #[test]
    fn row_and_batch_reduction_agree() {
        let mut r = seeded(2);
        let x = DMatrix::from_fn(20, 2, |_, _| r.random_range(-1.0..1.0));
        let test = DMatrix::from_fn(15, 2, |_, _| r.random_range(-3.0..3.0));
        let t: FeatureTree = "(add (mul x0 x1) (cos x1))".parse().unwrap();
        let s = SnapshotTree::capture(&t, &x).unwrap();
        let batch = s.evaluate_reduced(&test).unwrap();
        for i in 0..15 {
            let row: Vec<f64> = test.row(i).iter().copied().collect();
            assert_eq!(reduce_sharpness_eval(&s, &row), batch[i]);
        }
        let stored = s.stored[0].as_ref().unwrap();
        assert!(batch.iter().all(|v| stored.contains(v)));
    }

    #[test]
    fn bounds_clip() {
        let b = PredictionBounds { y_min: -1.0, y_max: 2.0 };
        assert_eq!(bounded_predict(&[0.5, 7.0, -3.0], &b), vec![0.5, 2.0, -1.0]);
        assert_eq!(PredictionBounds::from_targets(&[3.0, -1.0, 2.0]), PredictionBounds { y_min: -1.0, y_max: 3.0 });
    }

    fn member(expr: &str, x: &DMatrix<f64>, y: &[f64]) -> Member {
        let mut ind = Individual::new(vec![expr.parse().unwrap()]);
        let phi = construct_features(ind.trees(), x).unwrap();
        let model = ridge::fit(&phi, y, 0.1).unwrap();
        ind.set_fitness(crate::tree::Fitness {
            objectives: crate::evolution::ObjectiveVector::new(0.0, 0.0),
            case_errors: vec![],
            model: Some(model),
            features: None,
            tikhonov: 0.0,
        });
        Member::from_individual(&ind, x).unwrap()
    }

    #[test]
    fn ensemble_means() {
        let mut r = seeded(3);
        let x = DMatrix::from_fn(25, 2, |_, _| r.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..25).map(|i| x[(i, 0)] - x[(i, 1)]).collect();
        let a = member("(sub x0 x1)", &x, &y);
        let b = member("(mul x0 x1)", &x, &y);
        assert_eq!(ensemble_predict(&[a.clone()], &x, true, None).unwrap(), a.predict(&x, true, None).unwrap());
        let pa = a.predict(&x, false, None).unwrap();
        let pb = b.predict(&x, false, None).unwrap();
        let got = ensemble_predict(&[a.clone(), b], &x, false, None).unwrap();
        for i in 0..25 {
            assert!((got[i] - 0.5 * (pa[i] + pb[i])).abs() < 1e-12);
        }
        assert_eq!(ensemble_predict(&[a.clone(), a.clone()], &x, true, None).unwrap(), a.predict(&x, true, None).unwrap());
        assert!(ensemble_predict(&[], &x, true, None).is_err());
    }

    #[test]
    fn r2_values() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]), 0.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]), -1.0);
        assert_eq!(r2(&[4.0, 4.0], &[1.0, 2.0]), 0.0);
    }
}
