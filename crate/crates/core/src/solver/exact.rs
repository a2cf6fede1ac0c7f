use super::{fitness, Result, ScpInstance, Solution, SolverError};

/// Largest row count [`brute_force_scp`] accepts.
pub const MAX_EXACT_ROWS: usize = 25;

/// Exact minimum-cardinality partial cover by depth-first branch and bound.
///
/// Sizes are tried in increasing order and combinations in lexicographic
/// order, so ties resolve to the lexicographically smallest index set.
pub fn brute_force_scp(inst: &ScpInstance) -> Result<Solution> {
    let m = inst.m();
    if m > MAX_EXACT_ROWS {
        return Err(SolverError::TooLarge { m, max: MAX_EXACT_ROWS });
    }
    let uncoverable = inst.uncoverable();
    if inst.n() - uncoverable.len() < inst.required() {
        return Err(SolverError::InstanceInfeasible { uncoverable });
    }
    if inst.required() == 0 {
        let mut s = Solution::zeros(m);
        s.cached_fitness = Some(fitness(&s, inst));
        return Ok(s);
    }
    let counts: Vec<usize> = (0..m).map(|i| inst.matrix().row_count(i)).collect();
    // suffix_max[i] = largest row count among rows i..m
    let mut suffix_max = vec![0; m + 1];
    for i in (0..m).rev() {
        suffix_max[i] = suffix_max[i + 1].max(counts[i]);
    }
    let words = inst.matrix().words_per_row();
    for k in 1..=m {
        let mut chosen = Vec::with_capacity(k);
        let search = Search {
            inst,
            suffix_max: &suffix_max,
            k,
        };
        if search.dfs(0, &vec![0u64; words], 0, &mut chosen) {
            let mut s = Solution::from_indices(m, &chosen);
            s.cached_fitness = Some(fitness(&s, inst));
            return Ok(s);
        }
    }
    unreachable!("the full selection is feasible")
}

struct Search<'a> {
    inst: &'a ScpInstance,
    suffix_max: &'a [usize],
    k: usize,
}

impl Search<'_> {
    fn dfs(&self, start: usize, covered: &[u64], n_cover: usize, chosen: &mut Vec<usize>) -> bool {
        if n_cover >= self.inst.required() {
            return true;
        }
        let left = self.k - chosen.len();
        let m = self.inst.m();
        if left == 0 || m - start < left {
            return false;
        }
        if n_cover + left * self.suffix_max[start] < self.inst.required() {
            return false;
        }
        let mut next = covered.to_vec();
        for i in start..=m - left {
            let mut c = 0;
            for ((dst, a), b) in next.iter_mut().zip(covered).zip(self.inst.matrix().row(i)) {
                *dst = a | b;
                c += dst.count_ones() as usize;
            }
            chosen.push(i);
            if self.dfs(i + 1, &next, c, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::inst;
    use crate::visibility::VisibilityMatrix;

    #[test]
    fn finds_minimum() {
        let a = inst(&[&[1, 1, 1, 0], &[0, 0, 1, 1], &[1, 0, 0, 0]], 1.0);
        assert_eq!(brute_force_scp(&a).unwrap().selected(), vec![0, 1]);
        let b = inst(&[&[1, 1, 0, 0], &[0, 0, 1, 1], &[1, 1, 1, 1]], 1.0);
        assert_eq!(brute_force_scp(&b).unwrap().selected(), vec![2]);
    }

    #[test]
    fn lexicographic_tie_break() {
        let a = inst(&[&[1, 1, 0, 0], &[0, 0, 1, 1], &[1, 1, 0, 0], &[0, 0, 1, 1]], 1.0);
        assert_eq!(brute_force_scp(&a).unwrap().selected(), vec![0, 1]);
    }

    #[test]
    fn partial_target() {
        let a = inst(&[&[1, 1, 1, 0, 0], &[0, 0, 0, 1, 1], &[1, 0, 0, 0, 0]], 0.6);
        assert_eq!(brute_force_scp(&a).unwrap().selected(), vec![0]);
    }

    #[test]
    fn too_large_and_infeasible() {
        let rows = vec![vec![true]; 26];
        let big = ScpInstance::new(VisibilityMatrix::from_bool_rows(1, &rows).unwrap(), 1.0).unwrap();
        assert!(matches!(brute_force_scp(&big), Err(SolverError::TooLarge { m: 26, .. })));
        let hole = inst(&[&[1, 0]], 1.0);
        assert!(matches!(brute_force_scp(&hole), Err(SolverError::InstanceInfeasible { .. })));
    }
}
