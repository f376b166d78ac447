//! Real-coded genetic algorithm over the refinement parameters.
//!
//! A genome is `beta`, `lambda` and the 50 weights of `B` and `B'`. Selection
//! is by tournament, crossover is uniform, mutation is per-gene Gaussian and
//! the best individual survives unchanged. Every child draws from its own
//! stream keyed by `(seed, generation, index)`, so batch evaluation order
//! cannot change the result.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Kernel;
use crate::refine::{RefineParams, KERNEL_SIZE};
use crate::rng;

pub const BETA_RANGE: (f64, f64) = (1e-4, 0.5);
pub const LAMBDA_RANGE: (f64, f64) = (0.0, 0.5);
pub const WEIGHT_RANGE: (f64, f64) = (-1.0, 1.0);
const WEIGHTS: usize = KERNEL_SIZE * KERNEL_SIZE;
pub const GENES: usize = 2 + 2 * WEIGHTS;

const INIT_STREAM: u64 = 0x494E_4954;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub beta: f64,
    pub lambda: f64,
    pub kernel_b: Vec<f64>,
    pub kernel_b_prime: Vec<f64>,
}

fn range_of(gene: usize) -> (f64, f64) {
    match gene {
        0 => BETA_RANGE,
        1 => LAMBDA_RANGE,
        _ => WEIGHT_RANGE,
    }
}

impl Genome {
    /// Gaussian `B` (sigma 1), flipped `B'`, beta = lambda = 0.05.
    pub fn prior() -> Self {
        Genome::from_params(&RefineParams::default())
    }

    pub fn from_params(p: &RefineParams) -> Self {
        Genome {
            beta: p.beta,
            lambda: p.lambda,
            kernel_b: p.kernel_b.weights().to_vec(),
            kernel_b_prime: p.kernel_b_prime.weights().to_vec(),
        }
    }

    /// Parameters with this genome's genes and `base`'s remaining settings.
    pub fn to_params(&self, base: &RefineParams) -> RefineParams {
        RefineParams {
            beta: self.beta,
            lambda: self.lambda,
            kernel_b: Kernel::new(KERNEL_SIZE, self.kernel_b.clone()).expect("genome kernels are 5x5"),
            kernel_b_prime: Kernel::new(KERNEL_SIZE, self.kernel_b_prime.clone()).expect("genome kernels are 5x5"),
            ..base.clone()
        }
    }

    pub fn genes(&self) -> Vec<f64> {
        let mut g = Vec::with_capacity(GENES);
        g.push(self.beta);
        g.push(self.lambda);
        g.extend_from_slice(&self.kernel_b);
        g.extend_from_slice(&self.kernel_b_prime);
        g
    }

    pub fn from_genes(g: &[f64]) -> Result<Self> {
        if g.len() != GENES {
            return Err(Error::InvalidArgument(format!("expected {GENES} genes, got {}", g.len())));
        }
        Ok(Genome {
            beta: g[0],
            lambda: g[1],
            kernel_b: g[2..2 + WEIGHTS].to_vec(),
            kernel_b_prime: g[2 + WEIGHTS..].to_vec(),
        })
    }

    /// Clamps every gene into its range.
    pub fn repaired(&self) -> Self {
        let g: Vec<f64> = self
            .genes()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let (lo, hi) = range_of(i);
                if v.is_nan() { lo } else { v.clamp(lo, hi) }
            })
            .collect();
        Genome::from_genes(&g).expect("gene count preserved")
    }

    pub fn in_range(&self) -> bool {
        self.kernel_b.len() == WEIGHTS
            && self.kernel_b_prime.len() == WEIGHTS
            && self.genes().iter().enumerate().all(|(i, v)| {
                let (lo, hi) = range_of(i);
                (lo..=hi).contains(v)
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each gene's range.
    pub mutation_scale: f64,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 24,
            generations: 30,
            tournament: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            elitism: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidArgument("population must be >= 4".into()));
        }
        if self.generations < 1 {
            return Err(Error::InvalidArgument("generations must be >= 1".into()));
        }
        if self.tournament < 1 || self.tournament > self.population {
            return Err(Error::InvalidArgument("tournament size outside [1, population]".into()));
        }
        if self.elitism < 1 || self.elitism >= self.population {
            return Err(Error::InvalidArgument("elitism must be in [1, population)".into()));
        }
        for (name, v) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.mutation_scale >= 0.0 && self.mutation_scale.is_finite()) {
            return Err(Error::InvalidArgument("mutation_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Scores a batch of genomes; higher is better.
pub trait Evaluator {
    fn evaluate(&self, genomes: &[Genome]) -> Vec<f64>;
}

/// Serial evaluation through a closure.
pub struct Serial<F>(pub F);

impl<F: Fn(&Genome) -> f64> Evaluator for Serial<F> {
    fn evaluate(&self, genomes: &[Genome]) -> Vec<f64> {
        genomes.iter().map(&self.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_ever: f64,
}

/// Run record; the final population makes it resumable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub seed: u64,
    pub generations: Vec<GenerationStats>,
    pub best: Genome,
    pub best_fitness: f64,
    pub population: Vec<Genome>,
    pub fitness: Vec<f64>,
}

impl History {
    pub fn next_generation(&self) -> usize {
        self.generations.len()
    }

    pub fn best_curve(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.best_ever).collect()
    }
}

fn score(f: f64) -> f64 {
    if f.is_nan() { f64::NEG_INFINITY } else { f }
}

fn mutate<R: Rng>(genes: &mut [f64], cfg: &GaConfig, rng: &mut R) {
    for (i, g) in genes.iter_mut().enumerate() {
        if rng.random_bool(cfg.mutation_rate) {
            let (lo, hi) = range_of(i);
            let sigma = cfg.mutation_scale * (hi - lo);
            if sigma > 0.0 {
                *g += Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
            }
        }
    }
}

fn tournament<R: Rng>(fitness: &[f64], k: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.random_range(0..fitness.len());
        if score(fitness[c]) > score(fitness[best]) {
            best = c;
        }
    }
    best
}

/// The prior plus mutated copies of it.
pub fn initial_population(cfg: &GaConfig, seed: u64) -> Vec<Genome> {
    let prior = Genome::prior();
    let mut pop = Vec::with_capacity(cfg.population);
    pop.push(prior.clone());
    for i in 1..cfg.population {
        let mut rng = rng::stream(seed, &[INIT_STREAM, i as u64]);
        let mut g = prior.genes();
        mutate(&mut g, cfg, &mut rng);
        pop.push(Genome::from_genes(&g).expect("gene count preserved").repaired());
    }
    pop
}

fn ranked(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    // stable: ties keep the lower index
    idx.sort_by(|&a, &b| score(fitness[b]).total_cmp(&score(fitness[a])));
    idx
}

fn stats(generation: usize, fitness: &[f64], best_ever: f64) -> GenerationStats {
    let best = fitness.iter().copied().map(score).fold(f64::NEG_INFINITY, f64::max);
    let mean = fitness.iter().sum::<f64>() / fitness.len() as f64;
    GenerationStats { generation, best, mean, best_ever: best_ever.max(best) }
}

fn breed(pop: &[Genome], fitness: &[f64], cfg: &GaConfig, seed: u64, generation: usize) -> Vec<Genome> {
    let order = ranked(fitness);
    let mut next: Vec<Genome> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
    for idx in cfg.elitism..cfg.population {
        let mut rng = rng::stream(seed, &[generation as u64, idx as u64]);
        let a = pop[tournament(fitness, cfg.tournament, &mut rng)].genes();
        let b = pop[tournament(fitness, cfg.tournament, &mut rng)].genes();
        let mut child = a.clone();
        if rng.random_bool(cfg.crossover_rate) {
            for (c, bv) in child.iter_mut().zip(&b) {
                if rng.random_bool(0.5) {
                    *c = *bv;
                }
            }
        }
        mutate(&mut child, cfg, &mut rng);
        next.push(Genome::from_genes(&child).expect("gene count preserved").repaired());
    }
    next
}

/// Evolves from the default initial population.
pub fn evolve(eval: &dyn Evaluator, cfg: &GaConfig, seed: u64) -> Result<History> {
    cfg.validate()?;
    evolve_from(eval, cfg, seed, initial_population(cfg, seed))
}

/// Evolves from a caller-supplied initial population.
pub fn evolve_from(eval: &dyn Evaluator, cfg: &GaConfig, seed: u64, initial: Vec<Genome>) -> Result<History> {
    cfg.validate()?;
    if initial.len() != cfg.population {
        return Err(Error::InvalidArgument(format!(
            "initial population has {} genomes, config says {}",
            initial.len(),
            cfg.population
        )));
    }
    let pop: Vec<Genome> = initial.iter().map(Genome::repaired).collect();
    let fitness = eval.evaluate(&pop);
    let best_i = ranked(&fitness)[0];
    let st = stats(0, &fitness, f64::NEG_INFINITY);
    let history = History {
        seed,
        best_fitness: st.best_ever,
        generations: alloc::vec![st],
        best: pop[best_i].clone(),
        population: pop,
        fitness,
    };
    resume(eval, cfg, history, cfg.generations)
}

/// Continues a run until its history holds `total` generations.
pub fn resume(eval: &dyn Evaluator, cfg: &GaConfig, mut h: History, total: usize) -> Result<History> {
    cfg.validate()?;
    if h.population.len() != cfg.population || h.fitness.len() != cfg.population {
        return Err(Error::InvalidArgument("history population does not match config".into()));
    }
    while h.next_generation() < total {
        let generation = h.next_generation();
        let next = breed(&h.population, &h.fitness, cfg, h.seed, generation);
        let order = ranked(&h.fitness);
        // elites are carried with their known fitness
        let mut fitness: Vec<f64> = order[..cfg.elitism].iter().map(|&i| h.fitness[i]).collect();
        fitness.extend(eval.evaluate(&next[cfg.elitism..]));
        let st = stats(generation, &fitness, h.best_fitness);
        let gen_best = ranked(&fitness)[0];
        if score(fitness[gen_best]) > score(h.best_fitness) {
            h.best_fitness = fitness[gen_best];
            h.best = next[gen_best].clone();
        }
        h.generations.push(st);
        h.population = next;
        h.fitness = fitness;
    }
    Ok(h)
}
