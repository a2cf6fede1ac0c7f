//! Partial set covering over a visibility matrix.
//!
//! Choose the fewest rows (viewpoints) whose union covers at least
//! `⌈δ·n⌉` columns (triangles). Solvers:
//!
//! * [`greedy_cover`]: most-new-columns-first; seeds GA-HH and repairs plain-GA individuals.
//! * [`ga_hh_solve`]: genetic hyper-heuristic evolving sequences of low-level
//!   heuristics ([`llh`]) that are applied to paired solution vectors.
//! * [`ga_solve`]: plain GA on solution vectors, the baseline for GA-HH.
//! * [`brute_force_scp`]: exact branch-and-bound for small instances.

mod exact;
mod ga;
pub mod llh;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::visibility::{coverage_stats, CoverageStats, VisibilityMatrix};

pub use exact::{brute_force_scp, MAX_EXACT_ROWS};
pub use ga::{ga_hh_solve, ga_solve, Acceptance, GaParams, SolveResult};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("instance is infeasible: {} columns can never be covered", uncoverable.len())]
    InstanceInfeasible { uncoverable: Vec<usize> },
    #[error("exact search supports at most {max} rows, got {m}")]
    TooLarge { m: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

/// Binary selection over the m candidate viewpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    bits: Vec<bool>,
    /// Fitness recorded by the solver that produced this solution.
    pub cached_fitness: Option<f64>,
}

impl Solution {
    pub fn zeros(m: usize) -> Self {
        Solution::from_bits(vec![false; m])
    }

    pub fn ones(m: usize) -> Self {
        Solution::from_bits(vec![true; m])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Solution {
            bits,
            cached_fitness: None,
        }
    }

    pub fn from_indices(m: usize, selected: &[usize]) -> Self {
        let mut s = Solution::zeros(m);
        for &i in selected {
            s.bits[i] = true;
        }
        s
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
        self.cached_fitness = None;
    }

    pub fn flip(&mut self, i: usize) {
        self.set(i, !self.bits[i]);
    }

    /// Number of selected viewpoints.
    pub fn size(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    pub(crate) fn bits_mut(&mut self) -> &mut Vec<bool> {
        self.cached_fitness = None;
        &mut self.bits
    }
}

/// An SCP instance: visibility matrix plus target coverage ratio δ.
#[derive(Debug, Clone)]
pub struct ScpInstance {
    matrix: VisibilityMatrix,
    delta: f64,
    required: usize,
    row_counts: Vec<u64>,
}

/// `n_cover` and `Σc` for one selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evaluation {
    pub n_cover: usize,
    pub total: u64,
}

impl ScpInstance {
    pub fn new(matrix: VisibilityMatrix, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(SolverError::InvalidParameter(format!("delta must be in (0,1], got {delta}")));
        }
        let n = matrix.n();
        // Ceiling with a small tolerance so δ·n that is integral in exact
        // arithmetic is not bumped up by rounding noise.
        let required = ((delta * n as f64) - 1e-9).ceil().max(0.0) as usize;
        let row_counts = (0..matrix.m()).map(|i| matrix.row_count(i) as u64).collect();
        Ok(ScpInstance {
            matrix,
            delta,
            required,
            row_counts,
        })
    }

    pub fn matrix(&self) -> &VisibilityMatrix {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.matrix.m()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `⌈δ·n⌉`: columns a feasible selection must cover.
    pub fn required(&self) -> usize {
        self.required
    }

    fn check(&self, s: &Solution) -> Result<()> {
        if s.len() != self.m() {
            return Err(SolverError::DimensionMismatch {
                expected: self.m(),
                got: s.len(),
            });
        }
        Ok(())
    }

    /// Fast path for `n_cover` and `Σc` using packed rows.
    pub fn evaluate(&self, s: &Solution) -> Evaluation {
        let mut acc = vec![0u64; self.matrix.words_per_row()];
        let mut total = 0;
        for (i, _) in s.bits().iter().enumerate().filter(|(_, &b)| b) {
            for (a, w) in acc.iter_mut().zip(self.matrix.row(i)) {
                *a |= w;
            }
            total += self.row_counts[i];
        }
        Evaluation {
            n_cover: acc.iter().map(|w| w.count_ones() as usize).sum(),
            total,
        }
    }

    pub fn coverage(&self, s: &Solution) -> Result<CoverageStats> {
        self.check(s)?;
        coverage_stats(&self.matrix, s.bits()).map_err(|_| SolverError::DimensionMismatch {
            expected: self.m(),
            got: s.len(),
        })
    }

    pub fn is_feasible(&self, s: &Solution) -> bool {
        self.evaluate(s).n_cover >= self.required
    }

    /// Columns no row covers.
    pub fn uncoverable(&self) -> Vec<usize> {
        let union = self.matrix.union_of_rows();
        (0..self.n()).filter(|&j| union[j / 64] >> (j % 64) & 1 == 0).collect()
    }
}

/// Fitness; higher is better.
///
/// Feasible (`n_cover ≥ ⌈δ·n⌉`): `(m − Σs) + (1 − n_cover/Σc)`, i.e. unused
/// viewpoints plus a redundancy bonus in `[0, 1)`.
/// Infeasible: `n_cover / (δ·n)`, which is below 1.
pub fn fitness(s: &Solution, inst: &ScpInstance) -> f64 {
    debug_assert_eq!(s.len(), inst.m());
    fitness_of(inst.evaluate(s), s.size(), inst)
}

pub(crate) fn fitness_of(e: Evaluation, size: usize, inst: &ScpInstance) -> f64 {
    if e.total > 0 && e.n_cover >= inst.required {
        (inst.m() - size) as f64 + (1.0 - e.n_cover as f64 / e.total as f64)
    } else {
        e.n_cover as f64 / (inst.delta * inst.n() as f64)
    }
}

/// Repeatedly selects the row covering the most uncovered columns (lowest
/// index on ties) until `⌈δ·n⌉` columns are covered.
pub fn greedy_cover(inst: &ScpInstance) -> Result<Solution> {
    greedy_complete(inst, Solution::zeros(inst.m()))
}

/// Greedy completion of a partial selection: keeps every selected row and
/// adds rows as [`greedy_cover`] does until the target is met.
pub fn greedy_complete(inst: &ScpInstance, mut s: Solution) -> Result<Solution> {
    inst.check(&s)?;
    let uncoverable = inst.uncoverable();
    if inst.n() - uncoverable.len() < inst.required {
        return Err(SolverError::InstanceInfeasible { uncoverable });
    }
    let mut covered = vec![0u64; inst.matrix.words_per_row()];
    for i in s.selected() {
        for (c, r) in covered.iter_mut().zip(inst.matrix.row(i)) {
            *c |= r;
        }
    }
    let mut n_cover: usize = covered.iter().map(|w| w.count_ones() as usize).sum();
    while n_cover < inst.required {
        let mut best = None;
        let mut best_gain = 0;
        for i in (0..inst.m()).filter(|&i| !s.get(i)) {
            let gain: usize = inst
                .matrix
                .row(i)
                .iter()
                .zip(&covered)
                .map(|(r, c)| (r & !c).count_ones() as usize)
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best = Some(i);
            }
        }
        let i = best.expect("feasibility was checked up front");
        s.set(i, true);
        for (c, r) in covered.iter_mut().zip(inst.matrix.row(i)) {
            *c |= r;
        }
        n_cover += best_gain;
    }
    s.cached_fitness = Some(fitness(&s, inst));
    Ok(s)
}

/// Roulette-wheel selection with `P_i = f_i / Σf`, one uniform draw.
/// All-zero (or empty-mass) fitness falls back to a uniform pick.
pub fn roulette_select<R: Rng + ?Sized>(fitnesses: &[f64], rng: &mut R) -> usize {
    assert!(!fitnesses.is_empty(), "empty population");
    let total: f64 = fitnesses.iter().map(|f| f.max(0.0)).sum();
    if !(total > 0.0) {
        return rng.gen_range(0..fitnesses.len());
    }
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, f) in fitnesses.iter().enumerate() {
        acc += f.max(0.0);
        if r < acc {
            return i;
        }
    }
    // r landed on the rounding slack; return the last non-zero entry.
    fitnesses.iter().rposition(|&f| f > 0.0).unwrap()
}

/// Per-run history as `generation,best_fitness,best_size` CSV.
pub fn history_csv(result: &SolveResult) -> String {
    let mut s = String::from("generation,best_fitness,best_size\n");
    for (g, (f, size)) in result.history.iter().zip(&result.history_sizes).enumerate() {
        s.push_str(&format!("{g},{f},{size}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn inst(rows: &[&[u8]], delta: f64) -> ScpInstance {
        let n = rows[0].len();
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        ScpInstance::new(VisibilityMatrix::from_bool_rows(n, &rows).unwrap(), delta).unwrap()
    }

    fn identity(m: usize) -> ScpInstance {
        let rows: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| i == j).collect()).collect();
        ScpInstance::new(VisibilityMatrix::from_bool_rows(m, &rows).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn fitness_examples() {
        let id = identity(4);
        assert_eq!(fitness(&Solution::ones(4), &id), 0.0);
        assert_eq!(fitness(&Solution::from_bits(vec![true, false, false, false]), &id), 0.25);
        let a = inst(&[&[1, 1, 1], &[1, 0, 0]], 1.0);
        assert_eq!(fitness(&Solution::from_bits(vec![true, false]), &a), 1.0);
        assert_eq!(fitness(&Solution::from_bits(vec![true, true]), &a), 0.25);
        assert_eq!(fitness(&Solution::zeros(2), &a), 0.0);
    }

    #[test]
    fn required_uses_ceiling() {
        let a = inst(&[&[1, 1, 1], &[1, 0, 0]], 1.0);
        assert_eq!(a.required(), 3);
        let b = inst(&[&[1, 1, 1], &[1, 0, 0]], 0.5);
        assert_eq!(b.required(), 2);
        let c = inst(&[&[1, 1, 1, 1, 1, 1, 1, 1, 1, 1]], 0.7);
        assert_eq!(c.required(), 7);
        assert!(ScpInstance::new(VisibilityMatrix::new(3), 0.0).is_err());
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_cover(&identity(3)).unwrap().bits(), &[true, true, true]);
        let a = inst(&[&[1, 1, 1, 0], &[0, 0, 1, 1], &[1, 0, 0, 0]], 1.0);
        assert_eq!(greedy_cover(&a).unwrap().bits(), &[true, true, false]);
    }

    #[test]
    fn completion_keeps_preselected_rows() {
        let a = inst(&[&[1, 1, 1, 0], &[0, 0, 1, 1], &[1, 0, 0, 0]], 1.0);
        let s = greedy_complete(&a, Solution::from_bits(vec![false, false, true])).unwrap();
        assert_eq!(s.bits(), &[true, true, true]);
        let full = Solution::ones(3);
        assert_eq!(greedy_complete(&a, full.clone()).unwrap().bits(), full.bits());
    }

    #[test]
    fn greedy_reports_uncoverable() {
        let a = inst(&[&[1, 0, 0], &[1, 0, 0]], 1.0);
        assert_eq!(
            greedy_cover(&a),
            Err(SolverError::InstanceInfeasible { uncoverable: vec![1, 2] })
        );
        // Partial target ignores the holes as long as enough is coverable.
        let b = inst(&[&[1, 1, 0], &[1, 0, 0]], 0.6);
        assert!(greedy_cover(&b).is_ok());
    }

    #[test]
    fn roulette_degenerate_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(roulette_select(&[5.0, 0.0, 0.0], &mut rng), 0);
        }
        let picks: Vec<usize> = (0..100).map(|_| roulette_select(&[0.0, 0.0], &mut rng)).collect();
        assert!(picks.contains(&0) && picks.contains(&1));
    }

    #[test]
    fn roulette_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[roulette_select(&[1.0, 1.0, 1.0, 1.0], &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() <= 0.02, "{counts:?}");
        }
        let mut zero = 0;
        for _ in 0..draws {
            if roulette_select(&[3.0, 1.0], &mut rng) == 0 {
                zero += 1;
            }
        }
        assert!((zero as f64 / draws as f64 - 0.75).abs() <= 0.02);
    }

    #[test]
    fn history_csv_layout() {
        let r = ga_hh_solve(&identity(3), &GaParams::default()).unwrap();
        let csv = history_csv(&r);
        assert!(csv.starts_with("generation,best_fitness,best_size\n0,0,3\n"), "{csv}");
    }
}
