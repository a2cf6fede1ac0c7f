//! GA-HH and the plain GA baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::llh::{apply_llh, LlhContext, OPERATOR_COUNT};
use super::{fitness, greedy_complete, greedy_cover, roulette_select, Result, ScpInstance, Solution, SolverError};
use crate::par::Execution;

/// Which LLH results replace the current solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    #[default]
    NonWorsening,
    ImprovingOnly,
    Always,
}

impl Acceptance {
    fn accepts(self, new: f64, old: f64) -> bool {
        match self {
            Acceptance::NonWorsening => new >= old,
            Acceptance::ImprovingOnly => new > old,
            Acceptance::Always => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population_size: usize,
    /// LLH slots per individual.
    pub llh_length: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_generations: usize,
    /// Stop after this many generations without improvement.
    pub stall_generations: usize,
    pub seed: u64,
    pub acceptance: Acceptance,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 30,
            llh_length: 5,
            crossover_prob: 0.8,
            mutation_prob: 0.1,
            max_generations: 500,
            stall_generations: 50,
            seed: 0,
            acceptance: Acceptance::NonWorsening,
            execution: Execution::default(),
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolverError::InvalidParameter(m));
        if self.population_size < 2 {
            return bad(format!("population_size must be >= 2, got {}", self.population_size));
        }
        if self.llh_length == 0 {
            return bad("llh_length must be >= 1".into());
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0,1], got {p}"));
            }
        }
        if self.stall_generations == 0 {
            return bad("stall_generations must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub best: Solution,
    pub best_fitness: f64,
    /// Best fitness after initialization (entry 0) and after each generation.
    pub history: Vec<f64>,
    pub history_sizes: Vec<usize>,
    /// Generation at which the final best was first reached.
    pub iterations_to_best: usize,
    pub generations: usize,
}

impl SolveResult {
    pub fn size(&self) -> usize {
        self.best.size()
    }
}

#[derive(Debug, Clone)]
struct Individual {
    sol: Solution,
    llh: Vec<u8>,
    fit: f64,
    feasible: bool,
}

impl Individual {
    /// Elitism ranks feasible solutions first. Raw fitness alone would
    /// prefer an infeasible 2-of-3 selection (2/3) over the exact cover of a
    /// 3×3 identity instance (0).
    fn beats(&self, other: &Individual) -> bool {
        (self.feasible, self.fit) > (other.feasible, other.fit)
    }

    fn rescore(&mut self, fit: f64, inst: &ScpInstance) {
        self.fit = fit;
        self.feasible = inst.is_feasible(&self.sol);
    }
}

fn best_index(pop: &[Individual]) -> usize {
    let mut b = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.beats(&pop[b]) {
            b = i;
        }
    }
    b
}

/// Book-keeping shared by both GAs: history, stall detection.
struct Tracker {
    history: Vec<f64>,
    sizes: Vec<usize>,
    best_gen: usize,
}

impl Tracker {
    fn new(best: &Individual) -> Self {
        Tracker {
            history: vec![best.fit],
            sizes: vec![best.sol.size()],
            best_gen: 0,
        }
    }

    /// Records a generation; returns whether to stop for stalling.
    fn record(&mut self, gen: usize, best: &Individual, stall: usize) -> bool {
        if best.fit > *self.history.last().unwrap() {
            self.best_gen = gen;
        }
        self.history.push(best.fit);
        self.sizes.push(best.sol.size());
        gen - self.best_gen >= stall
    }

    fn finish(self, best: &Individual) -> SolveResult {
        let mut sol = best.sol.clone();
        sol.cached_fitness = Some(best.fit);
        SolveResult {
            best: sol,
            best_fitness: best.fit,
            generations: self.history.len() - 1,
            history: self.history,
            history_sizes: self.sizes,
            iterations_to_best: self.best_gen,
        }
    }
}

/// Roulette refill of slots `1..P`; slot 0 keeps the elite.
fn select(pop: &[Individual], rng: &mut ChaCha8Rng) -> Vec<Individual> {
    let fits: Vec<f64> = pop.iter().map(|i| i.fit).collect();
    let elite = best_index(pop);
    let mut next = Vec::with_capacity(pop.len());
    next.push(pop[elite].clone());
    for _ in 1..pop.len() {
        next.push(pop[roulette_select(&fits, rng)].clone());
    }
    next
}

fn two_points(len: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let (a, b) = (rng.gen_range(0..len), rng.gen_range(0..len));
    (a.min(b), a.max(b))
}

/// Runs each individual's LLH vector against a population snapshot.
fn apply_phase(
    inst: &ScpInstance,
    pop: &[Individual],
    seeds: &[u64],
    acceptance: Acceptance,
    exec: Execution,
) -> Vec<(Solution, f64)> {
    let snapshot: Vec<Solution> = pop.iter().map(|i| i.sol.clone()).collect();
    let fits: Vec<f64> = pop.iter().map(|i| i.fit).collect();
    exec.map_range(pop.len() - 1, |k| {
        let idx = k + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[k]);
        let mut cur = pop[idx].sol.clone();
        let mut cur_fit = pop[idx].fit;
        for &op in &pop[idx].llh {
            let ctx = LlhContext {
                population: &snapshot,
                fitnesses: &fits,
                index: idx,
                current_fitness: cur_fit,
            };
            let cand = apply_llh(op, &cur, &ctx, &mut rng);
            let f = fitness(&cand, inst);
            if acceptance.accepts(f, cur_fit) {
                cur = cand;
                cur_fit = f;
            }
        }
        (cur, cur_fit)
    })
}

/// Genetic hyper-heuristic.
///
/// Individuals pair a solution (all seeded from [`greedy_cover`]) with a
/// vector of LLH ids. Each generation: elitist roulette selection,
/// two-point crossover and one-point mutation on the LLH vectors, then every
/// non-elite individual applies its LLH vector to its own solution, keeping
/// each step the acceptance rule allows. Deterministic for a given seed
/// regardless of [`Execution`].
pub fn ga_hh_solve(inst: &ScpInstance, params: &GaParams) -> Result<SolveResult> {
    params.validate()?;
    let greedy = greedy_cover(inst)?;
    let f0 = fitness(&greedy, inst);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let l = params.llh_length;
    let mut pop: Vec<Individual> = (0..params.population_size)
        .map(|_| Individual {
            sol: greedy.clone(),
            llh: (0..l).map(|_| rng.gen_range(0..=OPERATOR_COUNT)).collect(),
            fit: f0,
            feasible: true,
        })
        .collect();
    let mut tracker = Tracker::new(&pop[0]);
    for gen in 1..=params.max_generations {
        pop = select(&pop, &mut rng);
        let mut k = 1;
        while k + 1 < pop.len() {
            if rng.gen::<f64>() < params.crossover_prob {
                let (a, b) = two_points(l, &mut rng);
                let (left, right) = pop.split_at_mut(k + 1);
                left[k].llh[a..=b].swap_with_slice(&mut right[0].llh[a..=b]);
            }
            k += 2;
        }
        for ind in pop.iter_mut().skip(1) {
            if rng.gen::<f64>() < params.mutation_prob {
                let pos = rng.gen_range(0..l);
                ind.llh[pos] = rng.gen_range(0..=OPERATOR_COUNT);
            }
        }
        let seeds: Vec<u64> = (1..pop.len()).map(|_| rng.gen()).collect();
        let results = apply_phase(inst, &pop, &seeds, params.acceptance, params.execution);
        for (ind, (sol, fit)) in pop.iter_mut().skip(1).zip(results) {
            ind.sol = sol;
            ind.rescore(fit, inst);
        }
        let b = best_index(&pop);
        if tracker.record(gen, &pop[b], params.stall_generations) {
            break;
        }
    }
    let b = best_index(&pop);
    Ok(tracker.finish(&pop[b]))
}

/// Plain GA on solution vectors, the textbook SCP baseline: individuals
/// start as uniform random bit vectors repaired to feasibility by greedy
/// completion; elitist roulette selection, two-point crossover between
/// consecutive pairs, and with probability `mutation_prob` one random bit
/// flip per individual.
pub fn ga_solve(inst: &ScpInstance, params: &GaParams) -> Result<SolveResult> {
    params.validate()?;
    let m = inst.m();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pop = Vec::with_capacity(params.population_size);
    for _ in 0..params.population_size {
        let bits = (0..m).map(|_| rng.gen::<bool>()).collect();
        let sol = greedy_complete(inst, Solution::from_bits(bits))?;
        let fit = fitness(&sol, inst);
        pop.push(Individual {
            sol,
            llh: Vec::new(),
            fit,
            feasible: true,
        });
    }
    let b = best_index(&pop);
    pop.swap(0, b);
    let mut tracker = Tracker::new(&pop[0]);
    for gen in 1..=params.max_generations {
        pop = select(&pop, &mut rng);
        let mut k = 1;
        while k + 1 < pop.len() {
            if rng.gen::<f64>() < params.crossover_prob {
                let (a, b) = two_points(m, &mut rng);
                let (left, right) = pop.split_at_mut(k + 1);
                left[k].sol.bits_mut()[a..=b].swap_with_slice(&mut right[0].sol.bits_mut()[a..=b]);
            }
            k += 2;
        }
        for ind in pop.iter_mut().skip(1) {
            if rng.gen::<f64>() < params.mutation_prob {
                ind.sol.flip(rng.gen_range(0..m));
            }
        }
        let fits = params.execution.map_slice(&pop[1..], |ind| fitness(&ind.sol, inst));
        for (ind, f) in pop.iter_mut().skip(1).zip(fits) {
            ind.rescore(f, inst);
        }
        let b = best_index(&pop);
        if tracker.record(gen, &pop[b], params.stall_generations) {
            break;
        }
    }
    let b = best_index(&pop);
    Ok(tracker.finish(&pop[b]))
}
