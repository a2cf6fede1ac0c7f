mod common;

use common::*;
use proptest::prelude::*;
use viewplan::par::Execution;
use viewplan::solver::*;

fn params(seed: u64) -> GaParams {
    GaParams {
        max_generations: 120,
        stall_generations: 40,
        seed,
        ..Default::default()
    }
}

fn all_subsets(m: usize) -> impl Iterator<Item = Solution> {
    (0u32..1 << m).map(move |mask| Solution::from_bits((0..m).map(|i| mask >> i & 1 == 1).collect()))
}

/// Exhaustive minimum, independent of `brute_force_scp`.
fn exhaustive_min(inst: &ScpInstance) -> Option<usize> {
    all_subsets(inst.m()).filter(|s| inst.is_feasible(s)).map(|s| s.size()).min()
}

fn counts(inst: &ScpInstance, s: &Solution) -> (usize, usize) {
    let mut c = vec![0usize; inst.n()];
    for i in s.selected() {
        for j in inst.matrix().row_indices(i) {
            c[j] += 1;
        }
    }
    (c.iter().filter(|&&x| x > 0).count(), c.iter().sum())
}

/// Eq. 14 recomputed from scratch.
fn eq14(inst: &ScpInstance, s: &Solution) -> f64 {
    let (n_cover, total) = counts(inst, s);
    let need = inst.delta() * inst.n() as f64;
    if total == 0 || (n_cover as f64) < need - 1e-9 {
        n_cover as f64 / need
    } else {
        (inst.m() - s.size()) as f64 + (1.0 - n_cover as f64 / total as f64)
    }
}

/// Three disjoint 5-column blocks cover all 15 columns; seven decoys hold 7
/// columns each, so no two rows reach 15 and greedy opens with a decoy.
fn crafted(seed: u64) -> ScpInstance {
    let mut r = rng(seed);
    let mut rows: Vec<Vec<bool>> = (0..3).map(|b| (0..15).map(|j| j / 5 == b).collect()).collect();
    for _ in 0..7 {
        let mut row = vec![false; 15];
        for j in rand::seq::index::sample(&mut r, 15, 7) {
            row[j] = true;
        }
        rows.insert(rand::Rng::gen_range(&mut r, 0..=rows.len()), row);
    }
    ScpInstance::new(viewplan::VisibilityMatrix::from_bool_rows(15, &rows).unwrap(), 1.0).unwrap()
}

fn crafted_runs(inst: &ScpInstance, solve: fn(&ScpInstance, &GaParams) -> Result<SolveResult>) -> Vec<SolveResult> {
    (0..10)
        .map(|seed| {
            let p = GaParams {
                max_generations: 200,
                seed,
                ..Default::default()
            };
            solve(inst, &p).unwrap()
        })
        .collect()
}

#[test]
fn crafted_instance_with_optimum_three() {
    let inst = crafted(4);
    assert_eq!(exhaustive_min(&inst), Some(3));
    assert_eq!(brute_force_scp(&inst).unwrap().size(), 3);
    assert_eq!(greedy_cover(&inst).unwrap().size(), 4);
    let hh = crafted_runs(&inst, ga_hh_solve);
    assert!(hh.iter().filter(|r| r.size() == 3).count() >= 9);
    assert!(crafted_runs(&inst, ga_solve).iter().any(|r| r.size() == 3));
}

// Every GA-HH individual starts from the greedy cover and only
// non-worsening moves survive, so a greedy plateau with no feasible
// single-swap path to the optimum holds the whole population.
#[test]
fn greedy_trap_holds_gahh() {
    let inst = crafted(0);
    assert_eq!(brute_force_scp(&inst).unwrap().size(), 3);
    assert_eq!(greedy_cover(&inst).unwrap().size(), 4);
    assert!(crafted_runs(&inst, ga_hh_solve).iter().all(|r| r.size() == 4));
    let always = GaParams {
        max_generations: 200,
        acceptance: Acceptance::Always,
        ..Default::default()
    };
    let escaped = (0..10).filter(|&seed| ga_hh_solve(&inst, &GaParams { seed, ..always.clone() }).unwrap().size() == 3);
    assert!(escaped.count() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fitness_matches_recomputation(seed in 0u64..10_000, m in 1usize..10, n in 1usize..30, delta in 0.05f64..=1.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, m, n, 0.3, delta);
        for s in all_subsets(m).take(64) {
            prop_assert!((fitness(&s, &inst) - eq14(&inst, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn fitness_ordering(seed in 0u64..10_000, m in 2usize..9, n in 2usize..25, delta in 0.1f64..=1.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, m, n, 0.35, delta);
        let subsets: Vec<Solution> = all_subsets(m).collect();
        let feasible: Vec<&Solution> = subsets.iter().filter(|s| inst.is_feasible(s)).collect();
        for s in &subsets {
            let f = fitness(s, &inst);
            prop_assert!(f >= 0.0);
            if inst.is_feasible(s) {
                prop_assert!(f >= (m - s.size()) as f64);
            } else {
                prop_assert!(f < 1.0);
                for g in feasible.iter().filter(|g| g.size() < m) {
                    prop_assert!(fitness(g, &inst) > f);
                }
            }
        }
        for a in &feasible {
            for b in &feasible {
                let (ca, ta) = counts(&inst, a);
                let (cb, tb) = counts(&inst, b);
                let (fa, fb) = (fitness(a, &inst), fitness(b, &inst));
                if a.size() < b.size() && ca * tb == cb * ta {
                    prop_assert!(fa > fb);
                }
                if a.size() == b.size() && ca == cb && ta > tb {
                    prop_assert!(fa > fb);
                }
            }
        }
    }

    #[test]
    fn greedy_is_feasible_and_bounded(seed in 0u64..10_000, m in 1usize..15, n in 1usize..40, delta in 0.05f64..=1.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, m, n, 0.2, delta);
        let g = greedy_cover(&inst).unwrap();
        prop_assert!(inst.is_feasible(&g));
        let (n_cover, _) = counts(&inst, &g);
        prop_assert!(n_cover as f64 >= delta * n as f64 - 1e-9);
        prop_assert!(g.size() >= exhaustive_min(&inst).unwrap());
    }

    #[test]
    fn exact_matches_exhaustive(seed in 0u64..10_000, m in 1usize..12, n in 1usize..30, delta in 0.05f64..=1.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, m, n, 0.25, delta);
        let b = brute_force_scp(&inst).unwrap();
        prop_assert!(inst.is_feasible(&b));
        prop_assert_eq!(Some(b.size()), exhaustive_min(&inst));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solvers_never_beat_the_optimum(seed in 0u64..10_000, m in 4usize..=20, n in 5usize..40) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, m, n, 0.2, 1.0);
        let opt = brute_force_scp(&inst).unwrap().size();
        for res in [ga_hh_solve(&inst, &params(seed)).unwrap(), ga_solve(&inst, &params(seed)).unwrap()] {
            prop_assert!(inst.is_feasible(&res.best));
            prop_assert!(res.size() >= opt);
            prop_assert!(res.history.windows(2).all(|w| w[1] >= w[0]));
        }
        prop_assert!(greedy_cover(&inst).unwrap().size() >= opt);
    }

    #[test]
    fn runs_replay_across_thread_modes(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 40, 120, 0.08, 0.9);
        for acceptance in [Acceptance::NonWorsening, Acceptance::ImprovingOnly, Acceptance::Always] {
            let seq = GaParams { acceptance, execution: Execution::Sequential, ..params(seed) };
            let par = GaParams { execution: Execution::Parallel, ..seq.clone() };
            let a = ga_hh_solve(&inst, &seq).unwrap();
            let b = ga_hh_solve(&inst, &par).unwrap();
            prop_assert_eq!(&a.history, &b.history);
            prop_assert_eq!(a.best.bits(), b.best.bits());
            prop_assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
        }
        let a = ga_solve(&inst, &GaParams { execution: Execution::Sequential, ..params(seed) }).unwrap();
        let b = ga_solve(&inst, &GaParams { execution: Execution::Parallel, ..params(seed) }).unwrap();
        prop_assert_eq!(a.history, b.history);
    }
}
