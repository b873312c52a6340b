use nalgebra::DMatrix;

use super::{FeatureTree, TreeKey, MAX_TREES};
use crate::evolution::ObjectiveVector;
use crate::ridge::FittedRidgeModel;
use crate::rng;

/// Everything computed when an individual is evaluated on the training set.
#[derive(Clone, Debug)]
pub struct Fitness {
    pub objectives: ObjectiveVector,
    /// Per-instance leave-one-out squared errors (the lexicase cases).
    pub case_errors: Vec<f64>,
    /// `None` when evaluation failed.
    pub model: Option<FittedRidgeModel>,
    /// Constructed training features, one column per tree.
    pub features: Option<DMatrix<f64>>,
    /// Mean squared centered model output, kept for population-level measures.
    pub tikhonov: f64,
}

/// A feature set: between one and [`MAX_TREES`] trees.
#[derive(Clone, Debug)]
pub struct Individual {
    trees: Vec<FeatureTree>,
    fitness: Option<Fitness>,
}

impl PartialEq for Individual {
    fn eq(&self, other: &Self) -> bool {
        self.trees == other.trees
    }
}

impl Individual {
    pub fn new(trees: Vec<FeatureTree>) -> Self {
        assert!(
            (1..=MAX_TREES).contains(&trees.len()),
            "an individual holds 1..={MAX_TREES} trees, got {}",
            trees.len()
        );
        Self {
            trees,
            fitness: None,
        }
    }

    pub fn trees(&self) -> &[FeatureTree] {
        &self.trees
    }

    /// Replaces the trees and drops any cached evaluation.
    pub fn set_trees(&mut self, trees: Vec<FeatureTree>) {
        assert!((1..=MAX_TREES).contains(&trees.len()));
        self.trees = trees;
        self.fitness = None;
    }

    pub fn fitness(&self) -> Option<&Fitness> {
        self.fitness.as_ref()
    }

    pub fn fitness_mut(&mut self) -> Option<&mut Fitness> {
        self.fitness.as_mut()
    }

    pub fn set_fitness(&mut self, f: Fitness) {
        self.fitness = Some(f);
    }

    pub fn objectives(&self) -> Option<ObjectiveVector> {
        self.fitness.as_ref().map(|f| f.objectives)
    }

    pub fn case_errors(&self) -> Option<&[f64]> {
        self.fitness.as_ref().map(|f| f.case_errors.as_slice())
    }

    pub fn fitted_model(&self) -> Option<&FittedRidgeModel> {
        self.fitness.as_ref().and_then(|f| f.model.as_ref())
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(FeatureTree::len).sum()
    }

    /// Structural key over the ordered tree list.
    pub fn key(&self) -> TreeKey {
        let mut acc = 0u128;
        for t in &self.trees {
            let k = t.canonical_key().0;
            let lo = rng::mix(acc as u64 ^ k as u64);
            let hi = rng::mix((acc >> 64) as u64 ^ (k >> 64) as u64 ^ lo);
            acc = ((hi as u128) << 64) | lo as u128;
        }
        TreeKey(acc)
    }
}

impl std::fmt::Display for Individual {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.trees.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}
