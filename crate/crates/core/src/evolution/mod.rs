//! The evolutionary loop: ε-lexicase parent selection, variation, NSGA-II
//! survival over `(O₁, O₂)`, an archive of the best individuals by
//! `O₁ + O₂`, and knee-point selection on the final front.

mod archive;
mod engine;
mod lexicase;
mod pareto;

pub use archive::{Archive, ArchiveEntry};
pub use engine::{evaluate, run, EvalContext, EvolutionConfig, EvolutionResult, GenerationRecord, GenerationView};
pub use lexicase::lexicase_select;
pub use pareto::{
    crowding_distance, dominates, mmd_knee, nondominated_fronts, nondominated_ranks, nsga2_select,
    ObjectiveVector, WORST,
};
