//! Low-level heuristics: seven operators that turn one solution vector into
//! another, optionally borrowing genes from other population members.
//!
//! Operator ids: 0 is the no-op slot, 1..=7 are the operators below. The
//! "adjacent" solution of individual `i` is individual `(i + 1) % P`.

use rand::Rng;

use super::Solution;

pub const NOOP: u8 = 0;
pub const OPERATOR_COUNT: u8 = 7;

/// Population snapshot visible to an operator.
#[derive(Debug, Clone, Copy)]
pub struct LlhContext<'a> {
    pub population: &'a [Solution],
    pub fitnesses: &'a [f64],
    /// Index of the solution being modified.
    pub index: usize,
    /// Fitness of the solution being modified (it may have drifted from the
    /// snapshot after earlier operators in the same vector).
    pub current_fitness: f64,
}

impl<'a> LlhContext<'a> {
    pub fn adjacent(&self) -> usize {
        (self.index + 1) % self.population.len()
    }

    fn random_other<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let p = self.population.len();
        if p < 2 {
            return self.index;
        }
        let j = rng.gen_range(0..p - 1);
        if j >= self.index {
            j + 1
        } else {
            j
        }
    }
}

/// `out[i] = if mask[i] { s1[i] } else { s2[i] }`.
pub fn mask_mix(s1: &Solution, s2: &Solution, mask: &[bool]) -> Solution {
    let bits = s1
        .bits()
        .iter()
        .zip(s2.bits())
        .zip(mask)
        .map(|((&a, &b), &m)| if m { a } else { b })
        .collect();
    Solution::from_bits(bits)
}

/// Copies `donor[a..=b]` into `s`.
fn exchange_segment<R: Rng + ?Sized>(s: &mut Solution, donor: &Solution, rng: &mut R) {
    let m = s.len();
    let (mut a, mut b) = (rng.gen_range(0..m), rng.gen_range(0..m));
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    s.bits_mut()[a..=b].copy_from_slice(&donor.bits()[a..=b]);
}

fn uniform_mask<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<bool> {
    (0..m).map(|_| rng.gen::<bool>()).collect()
}

/// Mask whose expected density of ones is `f1 / (f1 + f2)` (0.5 when both are zero).
pub fn fitness_weighted_mask<R: Rng + ?Sized>(f1: f64, f2: f64, m: usize, rng: &mut R) -> Vec<bool> {
    let sum = f1.max(0.0) + f2.max(0.0);
    let p = if sum > 0.0 { f1.max(0.0) / sum } else { 0.5 };
    (0..m).map(|_| rng.gen::<f64>() < p).collect()
}

/// Applies operator `op` (1..=7) to `s`, returning a new solution.
///
/// * 1 random-mutation: flip one random bit.
/// * 2 random-swap: swap the values at two random positions.
/// * 3 section-crossover: take a random segment from the adjacent solution.
/// * 4 adjacent scattered crossover: uniform random mask against the adjacent solution.
/// * 5 random scattered crossover: uniform random mask against a random other solution.
/// * 6 fusion crossover: mask density proportional to the fitness of `s`
///   relative to the adjacent solution.
/// * 7 multi-section crossover: 2 to 4 segment exchanges with the adjacent solution.
pub fn apply_llh<R: Rng + ?Sized>(op: u8, s: &Solution, ctx: &LlhContext<'_>, rng: &mut R) -> Solution {
    let m = s.len();
    if m == 0 || op == NOOP {
        return s.clone();
    }
    let adjacent = || &ctx.population[ctx.adjacent()];
    match op {
        1 => {
            let mut out = s.clone();
            out.flip(rng.gen_range(0..m));
            out
        }
        2 => {
            let mut out = s.clone();
            if m >= 2 {
                let a = rng.gen_range(0..m);
                let mut b = rng.gen_range(0..m - 1);
                if b >= a {
                    b += 1;
                }
                out.bits_mut().swap(a, b);
            }
            out
        }
        3 => {
            let mut out = s.clone();
            exchange_segment(&mut out, adjacent(), rng);
            out
        }
        4 => mask_mix(s, adjacent(), &uniform_mask(m, rng)),
        5 => {
            let j = ctx.random_other(rng);
            mask_mix(s, &ctx.population[j], &uniform_mask(m, rng))
        }
        6 => {
            let f2 = ctx.fitnesses[ctx.adjacent()];
            let mask = fitness_weighted_mask(ctx.current_fitness, f2, m, rng);
            mask_mix(s, adjacent(), &mask)
        }
        7 => {
            let mut out = s.clone();
            let r = rng.gen_range(2..=4);
            for _ in 0..r {
                exchange_segment(&mut out, adjacent(), rng);
            }
            out
        }
        _ => panic!("unknown low-level heuristic {op}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hamming(a: &Solution, b: &Solution) -> usize {
        a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count()
    }

    fn ctx<'a>(pop: &'a [Solution], fits: &'a [f64], index: usize) -> LlhContext<'a> {
        LlhContext {
            population: pop,
            fitnesses: fits,
            index,
            current_fitness: fits[index],
        }
    }

    #[test]
    fn llh1_flips_exactly_one_bit() {
        let pop = vec![Solution::zeros(3), Solution::zeros(3)];
        let fits = [0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let out = apply_llh(1, &pop[0], &ctx(&pop, &fits, 0), &mut rng);
            assert_eq!(out.size(), 1);
            assert_eq!(hamming(&out, &pop[0]), 1);
        }
    }

    #[test]
    fn llh2_preserves_selection_count() {
        let s = Solution::from_bits(vec![true, false, true, false, false]);
        let pop = vec![s.clone(), Solution::zeros(5)];
        let fits = [1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let out = apply_llh(2, &s, &ctx(&pop, &fits, 0), &mut rng);
            assert_eq!(out.size(), 2);
            assert!(hamming(&out, &s) == 0 || hamming(&out, &s) == 2);
        }
    }

    #[test]
    fn llh4_mask_extremes() {
        let s1 = Solution::from_bits(vec![true, false, true, true]);
        let s2 = Solution::from_bits(vec![false, true, false, false]);
        assert_eq!(mask_mix(&s1, &s2, &[true; 4]).bits(), s1.bits());
        assert_eq!(mask_mix(&s1, &s2, &[false; 4]).bits(), s2.bits());
    }

    #[test]
    fn crossovers_only_take_genes_from_parents() {
        let s1 = Solution::ones(12);
        let s2 = Solution::zeros(12);
        let pop = vec![s1.clone(), s2.clone(), Solution::zeros(12)];
        let fits = [2.0, 1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for op in 3..=7 {
            for _ in 0..20 {
                let out = apply_llh(op, &s1, &ctx(&pop, &fits, 0), &mut rng);
                assert_eq!(out.len(), 12);
                // Every gene is either from s1 (1) or from a zero donor.
                let _ = out.size();
            }
        }
        // Segment crossover against an identical neighbour is a no-op.
        let same = vec![s1.clone(), s1.clone()];
        for op in [3, 4, 6, 7] {
            let out = apply_llh(op, &s1, &ctx(&same, &[1.0, 1.0], 0), &mut rng);
            assert_eq!(out.bits(), s1.bits());
        }
    }

    #[test]
    fn llh6_density_follows_fitness() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let trials = 10_000;
        let m = 16;
        let ones: usize = (0..trials)
            .map(|_| fitness_weighted_mask(3.0, 3.0, m, &mut rng).iter().filter(|&&b| b).count())
            .sum();
        let density = ones as f64 / (trials * m) as f64;
        assert!((density - 0.5).abs() <= 0.02, "{density}");

        let ones: usize = (0..trials)
            .map(|_| fitness_weighted_mask(0.0, 0.0, 1, &mut rng).iter().filter(|&&b| b).count())
            .sum();
        assert!((ones as f64 / trials as f64 - 0.5).abs() <= 0.02);

        let ones: usize = (0..trials)
            .map(|_| fitness_weighted_mask(3.0, 1.0, 1, &mut rng).iter().filter(|&&b| b).count())
            .sum();
        assert!((ones as f64 / trials as f64 - 0.75).abs() <= 0.02);
    }

    #[test]
    fn llh5_never_picks_self_when_others_exist() {
        let pop = vec![Solution::ones(8), Solution::zeros(8), Solution::zeros(8)];
        let c = ctx(&pop, &[1.0, 1.0, 1.0], 0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            assert_ne!(c.random_other(&mut rng), 0);
        }
    }
}
