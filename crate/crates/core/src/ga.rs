//! Genetic search over tracker hyperparameters.
//!
//! Fitness is the equal-weight score (HOTA + MOTA + IDF1) of the tracker
//! averaged over a set of sub-scenes. Offspring replace the whole population
//! every generation; the best individual ever evaluated is what gets returned.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::{parse_kv, parse_value};
use crate::metrics::{average_reports, evaluate, predictions_from_results, score, LabeledBox};
use crate::model::{Detection, TrackerConfig};
use crate::tracker::run_sequence;

pub type GaRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneKind {
    Real,
    Integer,
}

/// Search range for one [`TrackerConfig`] field.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneSpec {
    pub name: String,
    pub kind: GeneKind,
    pub low: f64,
    pub high: f64,
}

impl GeneSpec {
    pub fn new(name: &str, low: f64, high: f64) -> Result<Self> {
        if !TrackerConfig::FIELDS.contains(&name) {
            return Err(Error::config(name, "not a tracker parameter"));
        }
        if !(low < high) {
            return Err(Error::config(name, format!("gene range [{low}, {high}] needs low < high")));
        }
        let kind = if TrackerConfig::is_integer_field(name) {
            if low.fract() != 0.0 || high.fract() != 0.0 {
                return Err(Error::config(name, "integer gene needs integer bounds"));
            }
            GeneKind::Integer
        } else {
            GeneKind::Real
        };
        for bound in [low, high] {
            let mut cfg = TrackerConfig::default();
            cfg.set(name, bound)?;
            cfg.validate()?;
        }
        Ok(Self {
            name: name.to_string(),
            kind,
            low,
            high,
        })
    }

    pub fn sample(&self, rng: &mut GaRng) -> f64 {
        match self.kind {
            GeneKind::Real => rng.random_range(self.low..=self.high),
            GeneKind::Integer => rng.random_range(self.low as i64..=self.high as i64) as f64,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.low && value <= self.high && (self.kind == GeneKind::Real || value.fract() == 0.0)
    }
}

/// Default search space; `feature_buffer_size` stays fixed unless a gene for it is added.
pub fn default_gene_specs() -> Vec<GeneSpec> {
    [
        ("min_confidence", 0.1, 0.9),
        ("max_dist", 0.1, 0.9),
        ("max_iou_distance", 0.3, 0.9),
        ("nms_max_overlap", 0.3, 1.0),
        ("max_age", 10.0, 120.0),
        ("n_init", 1.0, 5.0),
        ("nn_budget", 10.0, 200.0),
    ]
    .into_iter()
    .map(|(name, lo, hi)| GeneSpec::new(name, lo, hi).expect("default gene ranges are valid"))
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            max_generations: 50,
            mutation_rate: 0.1,
            crossover_rate: 0.7,
            tolerance: 1e-3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("population_size", "must be at least 2"));
        }
        if self.max_generations < 1 {
            return Err(Error::config("max_generations", "must be at least 1"));
        }
        for (name, v) in [("mutation_rate", self.mutation_rate), ("crossover_rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("{v} outside [0, 1]")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance", "must be > 0"));
        }
        Ok(())
    }
}

/// Contents of a GA config file: run parameters plus optional gene ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct GaSettings {
    pub ga: GaConfig,
    pub genes: Vec<GeneSpec>,
}

impl GaSettings {
    /// `key = value` lines. `gene.<field> = low, high` lines replace the default
    /// search space (all of it, once any gene line is present).
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut ga = GaConfig::default();
        let mut genes = Vec::new();
        for kv in parse_kv(text, path)? {
            match kv.key.as_str() {
                "population_size" => ga.population_size = parse_value(&kv, path)?,
                "max_generations" => ga.max_generations = parse_value(&kv, path)?,
                "mutation_rate" => ga.mutation_rate = parse_value(&kv, path)?,
                "crossover_rate" => ga.crossover_rate = parse_value(&kv, path)?,
                "tolerance" => ga.tolerance = parse_value(&kv, path)?,
                "seed" => ga.seed = parse_value(&kv, path)?,
                key if key.starts_with("gene.") => {
                    let bad = || Error::Parse {
                        path: path.to_path_buf(),
                        line: kv.line,
                        reason: format!("expected `low, high` for `{key}`"),
                    };
                    let (lo, hi) = kv.value.split_once(',').ok_or_else(bad)?;
                    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
                    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
                    genes.push(GeneSpec::new(&key["gene.".len()..], lo, hi)?);
                }
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: kv.line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        ga.validate()?;
        if genes.is_empty() {
            genes = default_gene_specs();
        }
        Ok(Self { ga, genes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Population snapshot.
#[derive(Debug, Clone)]
pub struct GaState {
    pub generation: usize,
    pub population: Vec<TrackerConfig>,
    pub scores: Vec<f64>,
    pub best_ever: (TrackerConfig, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best score within this generation.
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub best_ever: f64,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: TrackerConfig,
    pub score: f64,
    pub history: Vec<GenerationStats>,
    pub final_state: GaState,
}

impl GaOutcome {
    /// `generation,best,mean,std` table.
    pub fn history_table(&self) -> String {
        let mut out = String::from("generation,best,mean,std\n");
        for s in &self.history {
            let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", s.generation, s.best, s.mean, s.std);
        }
        out
    }
}

pub fn initialize_population(
    template: &TrackerConfig,
    genes: &[GeneSpec],
    ga: &GaConfig,
    rng: &mut GaRng,
) -> Vec<TrackerConfig> {
    (0..ga.population_size)
        .map(|_| {
            let mut ind = template.clone();
            for g in genes {
                ind.set(&g.name, g.sample(rng)).expect("gene names are validated");
            }
            ind
        })
        .collect()
}

/// Size-2 tournaments with replacement; ties go to the first drawn.
pub fn select_parents(scores: &[f64], rng: &mut GaRng) -> Vec<(usize, usize)> {
    let n = scores.len();
    let tournament = |rng: &mut GaRng| {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if scores[b] > scores[a] {
            b
        } else {
            a
        }
    };
    (0..n.div_ceil(2))
        .map(|_| {
            let first = tournament(rng);
            (first, tournament(rng))
        })
        .collect()
}

/// Uniform per-gene exchange applied to the pair with probability `rate`.
pub fn crossover(
    a: &TrackerConfig,
    b: &TrackerConfig,
    rate: f64,
    genes: &[GeneSpec],
    rng: &mut GaRng,
) -> (TrackerConfig, TrackerConfig) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    if rng.random::<f64>() < rate {
        for g in genes {
            if rng.random_bool(0.5) {
                let (va, vb) = (a.get(&g.name).unwrap(), b.get(&g.name).unwrap());
                c1.set(&g.name, vb).unwrap();
                c2.set(&g.name, va).unwrap();
            }
        }
    }
    (c1, c2)
}

/// Resamples each gene independently with probability `rate`.
pub fn mutate(individual: &TrackerConfig, rate: f64, genes: &[GeneSpec], rng: &mut GaRng) -> TrackerConfig {
    let mut out = individual.clone();
    for g in genes {
        if rng.random::<f64>() < rate {
            out.set(&g.name, g.sample(rng)).unwrap();
        }
    }
    out
}

/// One evaluation unit: a sub-scene with its ground truth.
#[derive(Debug, Clone)]
pub struct SubScene {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<LabeledBox>,
    pub frame_count: u32,
}

/// Averaged score over `scenes`, or an error if any scene fails to track or evaluate.
pub fn try_fitness(config: &TrackerConfig, scenes: &[SubScene]) -> Result<f64> {
    let reports = scenes
        .iter()
        .map(|s| {
            let results = run_sequence(&s.detections, config, s.frame_count)?;
            evaluate(&s.ground_truth, &predictions_from_results(&results))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(score(&average_reports(&reports)?))
}

/// [`try_fitness`] with failures mapped to negative infinity.
pub fn evaluate_fitness(config: &TrackerConfig, scenes: &[SubScene]) -> f64 {
    try_fitness(config, scenes).unwrap_or(f64::NEG_INFINITY)
}

fn stats(generation: usize, scores: &[f64], best_ever: f64) -> GenerationStats {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    GenerationStats {
        generation,
        best: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
        best_ever,
    }
}

fn score_all<F>(population: &[TrackerConfig], fitness: &F) -> Vec<f64>
where
    F: Fn(&TrackerConfig) -> f64 + Sync,
{
    population
        .par_iter()
        .map(|ind| {
            let s = fitness(ind);
            if s.is_nan() {
                f64::NEG_INFINITY
            } else {
                s
            }
        })
        .collect()
}

/// Runs the optimizer with an arbitrary fitness function.
pub fn run_ga_with<F>(template: &TrackerConfig, genes: &[GeneSpec], ga: &GaConfig, fitness: F) -> Result<GaOutcome>
where
    F: Fn(&TrackerConfig) -> f64 + Sync,
{
    ga.validate()?;
    let mut rng = GaRng::seed_from_u64(ga.seed);
    let population = initialize_population(template, genes, ga, &mut rng);
    evolve(population, genes, ga, fitness, &mut rng)
}

/// Runs the optimizer from an explicit initial population.
pub fn run_ga_from<F>(population: Vec<TrackerConfig>, genes: &[GeneSpec], ga: &GaConfig, fitness: F) -> Result<GaOutcome>
where
    F: Fn(&TrackerConfig) -> f64 + Sync,
{
    ga.validate()?;
    if population.len() != ga.population_size {
        return Err(Error::config(
            "population_size",
            format!("initial population has {} individuals", population.len()),
        ));
    }
    let mut rng = GaRng::seed_from_u64(ga.seed);
    evolve(population, genes, ga, fitness, &mut rng)
}

/// Optimizes tracker parameters against `scenes`.
pub fn run_ga(template: &TrackerConfig, genes: &[GeneSpec], ga: &GaConfig, scenes: &[SubScene]) -> Result<GaOutcome> {
    run_ga_with(template, genes, ga, |cfg| evaluate_fitness(cfg, scenes))
}

fn evolve<F>(
    population: Vec<TrackerConfig>,
    genes: &[GeneSpec],
    ga: &GaConfig,
    fitness: F,
    rng: &mut GaRng,
) -> Result<GaOutcome>
where
    F: Fn(&TrackerConfig) -> f64 + Sync,
{
    let scores = score_all(&population, &fitness);
    let best_idx = argmax(&scores);
    let mut state = GaState {
        generation: 1,
        best_ever: (population[best_idx].clone(), scores[best_idx]),
        population,
        scores,
    };
    let mut history = vec![stats(1, &state.scores, state.best_ever.1)];

    loop {
        let current = history.last().unwrap();
        if current.std <= ga.tolerance || state.generation >= ga.max_generations {
            break;
        }
        let pairs = select_parents(&state.scores, rng);
        let mut offspring = Vec::with_capacity(ga.population_size + 1);
        for (a, b) in pairs {
            let (c1, c2) = crossover(&state.population[a], &state.population[b], ga.crossover_rate, genes, rng);
            offspring.push(mutate(&c1, ga.mutation_rate, genes, rng));
            offspring.push(mutate(&c2, ga.mutation_rate, genes, rng));
        }
        offspring.truncate(ga.population_size);

        let scores = score_all(&offspring, &fitness);
        let best_idx = argmax(&scores);
        if scores[best_idx] > state.best_ever.1 {
            state.best_ever = (offspring[best_idx].clone(), scores[best_idx]);
        }
        state.population = offspring;
        state.scores = scores;
        state.generation += 1;
        history.push(stats(state.generation, &state.scores, state.best_ever.1));
    }

    Ok(GaOutcome {
        best: state.best_ever.0.clone(),
        score: state.best_ever.1,
        history,
        final_state: state,
    })
}

/// First index of the maximum.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
