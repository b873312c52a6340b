use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lexicase_select, mmd_knee, nondominated_fronts, nsga2_select, Archive, ObjectiveVector};
use crate::complexity::{self, ComplexityMeasure, GridNmi, MeasureKind};
use crate::ridge::{self, DEFAULT_ALPHA};
use crate::rng::{self, Rng};
use crate::sharpness::{PerturbationConfig, SemanticsCache, SharpnessEstimator, DEFAULT_CACHE_CAPACITY};
use crate::tree::{self, construct_features, Fitness, Individual, TreeInitializer};
use crate::{Error, Result};

const TAG_LOOP: u64 = 0xE70;
const TAG_SHARPNESS: u64 = 0x5A;
const TAG_RC: u64 = 0x2C;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub add_tree_rate: f64,
    pub delete_tree_rate: f64,
    /// Depth range of initial and added trees.
    pub init_depth: (usize, usize),
    pub alpha: f64,
    pub measure: ComplexityMeasure,
    pub perturbation: PerturbationConfig,
    pub archive_size: usize,
    pub cache: bool,
    pub cache_capacity: usize,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            generations: 100,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            add_tree_rate: 0.5,
            delete_tree_rate: 0.5,
            init_depth: (0, 3),
            alpha: DEFAULT_ALPHA,
            measure: ComplexityMeasure::new(MeasureKind::Sam),
            perturbation: PerturbationConfig::default(),
            archive_size: 1,
            cache: true,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.population_size < 2 {
            out.push(format!("population must be at least 2, got {}", self.population_size));
        }
        if self.generations < 1 {
            out.push("generations must be at least 1".into());
        }
        for (name, p) in [
            ("crossover rate", self.crossover_rate),
            ("mutation rate", self.mutation_rate),
            ("tree addition rate", self.add_tree_rate),
            ("tree deletion rate", self.delete_tree_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.init_depth.0 > self.init_depth.1 || self.init_depth.1 > tree::MAX_DEPTH {
            out.push(format!("invalid initial depth range {:?}", self.init_depth));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            out.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.archive_size < 1 {
            out.push("archive size must be at least 1".into());
        }
        if self.measure.kind == MeasureKind::Sam {
            out.extend(self.perturbation.problems());
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

    fn single_objective(&self) -> bool {
        self.measure.kind == MeasureKind::None
    }
}

/// Training data and shared state for evaluating individuals.
pub struct EvalContext<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub alpha: f64,
    pub measure: ComplexityMeasure,
    pub sharpness: Option<SharpnessEstimator>,
    /// Rademacher signs of the current generation.
    pub zeta: Vec<f64>,
}

impl<'a> EvalContext<'a> {
    pub fn new(cfg: &EvolutionConfig, x: &'a DMatrix<f64>, y: &'a [f64]) -> Self {
        let sharpness = (cfg.measure.kind == MeasureKind::Sam).then(|| {
            let cache = if cfg.cache {
                SemanticsCache::new(cfg.cache_capacity)
            } else {
                SemanticsCache::disabled()
            };
            SharpnessEstimator::new(cfg.perturbation, rng::derive(cfg.seed, &[TAG_SHARPNESS]), Arc::new(cache))
        });
        Self {
            x,
            y,
            alpha: cfg.alpha,
            measure: cfg.measure,
            sharpness,
            zeta: Vec::new(),
        }
    }
}

fn failed() -> Fitness {
    Fitness {
        objectives: ObjectiveVector::worst(),
        case_errors: Vec::new(),
        model: None,
        features: None,
        tikhonov: super::WORST,
    }
}

/// Fits the ridge model on the individual's features and computes both
/// objectives. Population-level measures (`gc`) leave `o2` at 0 here. Any
/// failure yields the worst objective vector.
pub fn evaluate(ind: &Individual, ctx: &EvalContext) -> Fitness {
    try_evaluate(ind, ctx).unwrap_or_else(|_| failed())
}

fn try_evaluate(ind: &Individual, ctx: &EvalContext) -> Result<Fitness> {
    let phi = construct_features(ind.trees(), ctx.x)?;
    let model = ridge::fit(&phi, ctx.y, ctx.alpha)?;
    let o1 = model.loocv_mse();
    let centered = model.predict_centered(&phi)?;
    let tikhonov = complexity::tk(&centered);
    let o2 = second_objective(ind, &phi, &model, &centered, ctx)?;
    if !(o1.is_finite() && o2.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(Fitness {
        objectives: ObjectiveVector::new(o1, o2),
        case_errors: model.loocv_errors.clone(),
        model: Some(model),
        features: Some(phi),
        tikhonov,
    })
}

fn second_objective(
    ind: &Individual,
    phi: &DMatrix<f64>,
    model: &ridge::FittedRidgeModel,
    centered: &[f64],
    ctx: &EvalContext,
) -> Result<f64> {
    let pred = || centered.iter().map(|c| c + model.target_mean);
    Ok(match ctx.measure.kind {
        MeasureKind::Sam => {
            let est = ctx.sharpness.as_ref().expect("sharpness estimator");
            est.estimate(ind.trees(), model, ctx.x, ctx.y)?.aggregate
        }
        MeasureKind::Pp => complexity::pp(ind),
        MeasureKind::Tk => complexity::tk(centered),
        MeasureKind::Gc | MeasureKind::None => 0.0,
        MeasureKind::Rc => complexity::rc(phi, ctx.y, &ctx.zeta, ctx.alpha)?,
        MeasureKind::Wcrv => {
            let residuals: Vec<f64> = ctx.y.iter().zip(pred()).map(|(y, p)| y - p).collect();
            let mic = GridNmi { bins: ctx.measure.wcrv_bins };
            let vars = if ctx.measure.wcrv_raw_inputs { ctx.x } else { phi };
            complexity::wcrv(&mic, vars, ctx.y, &residuals)
        }
        MeasureKind::Iodc => -complexity::iodc(ctx.x, &pred().collect::<Vec<_>>()),
    })
}

/// Per-generation summary of the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Lowest `o1` in the population after survival.
    pub best_o1: f64,
    /// Lowest `o2` in the population after survival.
    pub best_o2: f64,
    pub archive_score: f64,
    pub mean_trees: f64,
    pub mean_nodes: f64,
    /// Cache counters and wall time vary between runs with the same seed and
    /// are left out of serialized records.
    #[serde(skip)]
    pub cache_hits: u64,
    #[serde(skip)]
    pub cache_misses: u64,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

/// State handed to the observer after each generation.
pub struct GenerationView<'a> {
    pub record: &'a GenerationRecord,
    pub population: &'a [Individual],
    pub archive: &'a Archive,
    pub config: &'a EvolutionConfig,
}

impl GenerationView<'_> {
    /// The individuals that would be returned if the run stopped now.
    pub fn final_models(&self) -> Vec<Individual> {
        final_models(self.config, self.population, self.archive)
    }
}

pub struct EvolutionResult {
    pub population: Vec<Individual>,
    pub archive: Archive,
    /// First nondominated front of the final population.
    pub front: Vec<Individual>,
    /// Archive best under `sam`, the knee of the front otherwise; the whole
    /// archive when it holds more than one member.
    pub final_models: Vec<Individual>,
    pub records: Vec<GenerationRecord>,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

fn first_front(population: &[Individual]) -> Vec<Individual> {
    let obj: Vec<ObjectiveVector> = population.iter().map(objectives).collect();
    nondominated_fronts(&obj)[0].iter().map(|&i| population[i].clone()).collect()
}

fn final_models(cfg: &EvolutionConfig, population: &[Individual], archive: &Archive) -> Vec<Individual> {
    if cfg.archive_size > 1 {
        return archive.members().cloned().collect();
    }
    if cfg.measure.kind == MeasureKind::Sam {
        return archive.best().into_iter().cloned().collect();
    }
    let front = first_front(population);
    let obj: Vec<ObjectiveVector> = front.iter().map(objectives).collect();
    vec![front[mmd_knee(&obj)].clone()]
}

fn objectives(i: &Individual) -> ObjectiveVector {
    i.objectives().unwrap_or_else(ObjectiveVector::worst)
}

fn evaluate_all(pop: &mut [Individual], ctx: &EvalContext) {
    pop.par_iter_mut().for_each(|ind| {
        if ind.fitness().is_none() {
            let f = evaluate(ind, ctx);
            ind.set_fitness(f);
        }
    });
}

/// Recomputes population-dependent second objectives over `pool`.
fn rescore(pool: &mut [Individual], ctx: &EvalContext) {
    match ctx.measure.kind {
        MeasureKind::Gc => {
            let pts: Vec<(f64, f64)> = pool
                .iter()
                .map(|i| match i.fitness() {
                    Some(f) if f.model.is_some() => (complexity::pp(i), f.tikhonov),
                    _ => (super::WORST, super::WORST),
                })
                .collect();
            let ranks = complexity::gc(&pts);
            for (ind, r) in pool.iter_mut().zip(ranks) {
                if let Some(f) = ind.fitness_mut().filter(|f| f.model.is_some()) {
                    f.objectives.o2 = r as f64;
                }
            }
        }
        MeasureKind::Rc => {
            pool.par_iter_mut().for_each(|ind| {
                let Some(f) = ind.fitness_mut() else { return };
                let Some(phi) = &f.features else { return };
                match complexity::rc(phi, ctx.y, &ctx.zeta, ctx.alpha) {
                    Ok(v) if v.is_finite() => f.objectives.o2 = v,
                    _ => f.objectives = ObjectiveVector::worst(),
                }
            });
        }
        _ => {}
    }
}

fn vary(parents: &[Individual], cfg: &EvolutionConfig, var_count: usize, init: &mut TreeInitializer, r: &mut Rng) -> Vec<Individual> {
    let mut out = Vec::with_capacity(parents.len());
    for pair in parents.chunks(2) {
        let (a, b) = if pair.len() == 2 && r.random_bool(cfg.crossover_rate) {
            let (a, b) = tree::crossover(&pair[0], &pair[1], r);
            (a, Some(b))
        } else {
            (pair[0].clone(), pair.get(1).cloned())
        };
        out.push(a);
        out.extend(b);
    }
    for child in out.iter_mut() {
        if r.random_bool(cfg.mutation_rate) {
            *child = tree::mutate(child, var_count, r);
        }
        if r.random_bool(cfg.add_tree_rate) {
            *child = tree::add_tree(child, init, r);
        }
        if r.random_bool(cfg.delete_tree_rate) {
            *child = tree::delete_tree(child, r);
        }
    }
    out
}

fn record(generation: usize, pop: &[Individual], archive: &Archive, ctx: &EvalContext, started: Instant) -> GenerationRecord {
    let obj: Vec<ObjectiveVector> = pop.iter().map(objectives).collect();
    let (hits, misses) = ctx
        .sharpness
        .as_ref()
        .map_or((0, 0), |s| (s.cache.hits(), s.cache.misses()));
    let n = pop.len() as f64;
    GenerationRecord {
        generation,
        best_o1: obj.iter().map(|o| o.o1).fold(f64::INFINITY, f64::min),
        best_o2: obj.iter().map(|o| o.o2).fold(f64::INFINITY, f64::min),
        archive_score: archive.best_score().unwrap_or(f64::INFINITY),
        mean_trees: pop.iter().map(|i| i.trees().len() as f64).sum::<f64>() / n,
        mean_nodes: pop.iter().map(|i| i.node_count() as f64).sum::<f64>() / n,
        cache_hits: hits,
        cache_misses: misses,
        elapsed_secs: started.elapsed().as_secs_f64(),
    }
}

/// Runs the search on standardized training data. `observe` is called once
/// per generation after survival and the archive update.
pub fn run<F>(cfg: &EvolutionConfig, x: &DMatrix<f64>, y: &[f64], mut observe: F) -> Result<EvolutionResult>
where
    F: FnMut(&GenerationView),
{
    cfg.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    if x.nrows() < 2 || x.ncols() < 1 {
        return Err(Error::InvalidArgument("training data needs at least 2 rows and 1 column".into()));
    }
    let started = Instant::now();
    let var_count = x.ncols();
    let n = cfg.population_size;
    let mut r = rng::derived(cfg.seed, &[TAG_LOOP]);
    let mut init = TreeInitializer::new(var_count, cfg.init_depth.0, cfg.init_depth.1);
    let mut ctx = EvalContext::new(cfg, x, y);
    let zeta_for = |g: usize| complexity::rademacher_signs(y.len(), rng::derive(cfg.seed, &[TAG_RC, g as u64]));
    if cfg.measure.kind == MeasureKind::Rc {
        ctx.zeta = zeta_for(0);
    }

    let mut population: Vec<Individual> = (0..n).map(|_| Individual::new(vec![init.generate(&mut r)])).collect();
    evaluate_all(&mut population, &ctx);
    rescore(&mut population, &ctx);
    let mut archive = Archive::new(cfg.archive_size);
    archive.update(&population);

    let mut records = Vec::with_capacity(cfg.generations);
    for g in 0..cfg.generations {
        let errors: Vec<&[f64]> = population
            .iter()
            .map(|i| i.case_errors().filter(|e| !e.is_empty()).unwrap_or(&[]))
            .collect();
        let parents: Vec<Individual> = if errors.iter().all(|e| e.len() == y.len()) {
            (0..n).map(|_| population[lexicase_select(&errors, &mut r)].clone()).collect()
        } else {
            // Failed individuals carry no cases; select among the evaluable ones.
            let ok: Vec<usize> = (0..n).filter(|&i| errors[i].len() == y.len()).collect();
            if ok.is_empty() {
                (0..n).map(|_| population[r.random_range(0..n)].clone()).collect()
            } else {
                let sub: Vec<&[f64]> = ok.iter().map(|&i| errors[i]).collect();
                (0..n).map(|_| population[ok[lexicase_select(&sub, &mut r)]].clone()).collect()
            }
        };
        let mut offspring = vary(&parents, cfg, var_count, &mut init, &mut r);

        if cfg.measure.kind == MeasureKind::Rc {
            ctx.zeta = zeta_for(g + 1);
        }
        evaluate_all(&mut offspring, &ctx);

        population = if cfg.single_objective() {
            let best = (0..n)
                .min_by(|&a, &b| objectives(&population[a]).o1.total_cmp(&objectives(&population[b]).o1))
                .expect("nonempty population");
            let mut next = Vec::with_capacity(n);
            next.push(population[best].clone());
            next.extend(offspring.into_iter().take(n - 1));
            next
        } else {
            let mut pool = population;
            pool.extend(offspring);
            rescore(&mut pool, &ctx);
            let obj: Vec<ObjectiveVector> = pool.iter().map(objectives).collect();
            let mut keep = nsga2_select(&obj, n, &mut r);
            keep.sort_unstable();
            let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
            keep.into_iter().map(|i| slots[i].take().expect("distinct")).collect()
        };
        archive.update(&population);
        let rec = record(g, &population, &archive, &ctx, started);
        observe(&GenerationView {
            record: &rec,
            population: &population,
            archive: &archive,
            config: cfg,
        });
        records.push(rec);
    }

    let (cache_hits, cache_misses) = ctx
        .sharpness
        .as_ref()
        .map_or((0, 0), |s| (s.cache.hits(), s.cache.misses()));
    let front = first_front(&population);
    let final_models = final_models(cfg, &population, &archive);
    Ok(EvolutionResult {
        population,
        archive,
        front,
        final_models,
        records,
        cache_hits,
        cache_misses,
    })
}
