//! Random-sampling baseline and the paired method comparison.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{build_candidate_pool, complement, report_from, solve_pool, CandidatePool, PlanConfig, PlanError, Result};
use crate::mesh::{Aabb, TriangleMesh, Vec3};
use crate::viewgen::Viewpoint;
use crate::visibility::{Visibility, VisibilityMatrix, VisibilityOptions};

/// Rejection attempts allowed per requested candidate.
const ATTEMPTS_PER_CANDIDATE: usize = 100;

/// Top-up rounds allowed per planner outer iteration.
const TOPUP_ROUNDS_PER_ITER: usize = 10;

fn nearest(points: &[Vec3], among: &[usize], p: &Vec3) -> (usize, f64) {
    among
        .iter()
        .map(|&t| (t, (points[t] - p).norm()))
        .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// Uniform rejection sampling around the triangles in `targets`: positions
/// in their bounding box inflated by fod, kept when at least `d_safe` from
/// every centroid, within fod of some target centroid and not below
/// `h_limit`; each camera looks at its nearest target centroid.
fn sample_around(
    mesh: &TriangleMesh,
    cfg: &PlanConfig,
    targets: &[usize],
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Viewpoint>> {
    let fod = cfg.camera.fod;
    let cs = &cfg.constraints;
    let centroids = mesh.centroids();
    let all: Vec<usize> = (0..mesh.len()).collect();
    let bb = Aabb::from_points(targets.iter().map(|&t| &centroids[t])).inflate(fod);
    let cap = ATTEMPTS_PER_CANDIDATE * budget;
    let mut out = Vec::with_capacity(budget);
    let mut attempts = 0;
    while out.len() < budget {
        if attempts == cap {
            return Err(PlanError::SamplingStarved {
                budget,
                accepted: out.len(),
                attempts,
            });
        }
        attempts += 1;
        let p = Vec3::from_fn(|i, _| rng.gen_range(bb.min[i]..=bb.max[i]));
        if p.z < cs.h_limit {
            continue;
        }
        if nearest(centroids, &all, &p).1 < cs.d_safe {
            continue;
        }
        let (t, dist) = nearest(centroids, targets, &p);
        if dist > fod {
            continue;
        }
        if let Some(vp) = Viewpoint::aimed_at(p, centroids[t], None) {
            out.push(vp);
        }
    }
    Ok(out)
}

/// `budget` random candidates around the whole mesh.
pub fn random_sampling_baseline(mesh: &TriangleMesh, cfg: &PlanConfig, budget: usize, seed: u64) -> Result<Vec<Viewpoint>> {
    if budget == 0 {
        return Err(PlanError::Config("candidate budget must be >= 1".into()));
    }
    let all: Vec<usize> = (0..mesh.len()).collect();
    sample_around(mesh, cfg, &all, budget, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Candidates seen so far against share of target triangles still unseen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub candidates: usize,
    pub uncovered_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRun {
    pub method: String,
    pub seed: u64,
    pub selected: usize,
    /// Covered share of the triangles the proposed method found coverable.
    pub coverage_ratio: f64,
    pub candidates: usize,
    pub iterations_to_best: usize,
    pub curve: Vec<CurvePoint>,
    /// Selected viewpoints, for constraint audits.
    pub viewpoints: Vec<Viewpoint>,
    #[serde(skip)]
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub selected_mean: f64,
    pub selected_std: f64,
    pub coverage_mean: f64,
    pub coverage_std: f64,
    pub candidates_mean: f64,
    pub candidates_std: f64,
    pub iterations_to_best_mean: f64,
    pub iterations_to_best_std: f64,
    #[serde(skip)]
    pub wall_mean: f64,
    #[serde(skip)]
    pub wall_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub proposed: Vec<MethodRun>,
    pub random: Vec<MethodRun>,
    pub summaries: Vec<MethodSummary>,
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(method: &str, runs: &[MethodRun]) -> MethodSummary {
    let col = |f: &dyn Fn(&MethodRun) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
    let (selected_mean, selected_std) = col(&|r| r.selected as f64);
    let (coverage_mean, coverage_std) = col(&|r| r.coverage_ratio);
    let (candidates_mean, candidates_std) = col(&|r| r.candidates as f64);
    let (iterations_to_best_mean, iterations_to_best_std) = col(&|r| r.iterations_to_best as f64);
    let (wall_mean, wall_std) = col(&|r| r.wall_secs);
    MethodSummary {
        method: method.to_string(),
        runs: runs.len(),
        selected_mean,
        selected_std,
        coverage_mean,
        coverage_std,
        candidates_mean,
        candidates_std,
        iterations_to_best_mean,
        iterations_to_best_std,
        wall_mean,
        wall_std,
    }
}

fn unseen_ratio(matrix: &VisibilityMatrix, rows: usize, targets: &[usize]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let mut acc = vec![0u64; matrix.words_per_row()];
    for i in 0..rows {
        for (a, w) in acc.iter_mut().zip(matrix.row(i)) {
            *a |= w;
        }
    }
    let unseen = targets.iter().filter(|&&t| acc[t / 64] >> (t % 64) & 1 == 0).count();
    unseen as f64 / targets.len() as f64
}

fn run_proposed(mesh: &TriangleMesh, cfg: &PlanConfig, seed: u64) -> Result<(MethodRun, CandidatePool)> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cluster_seed, ga_seed) = (rng.gen(), rng.gen());
    let pool = build_candidate_pool(mesh, cfg, cluster_seed)?;
    let coverable = pool.coverable();
    let curve = pool
        .iterations
        .iter()
        .map(|it| CurvePoint {
            candidates: it.pool_size,
            uncovered_ratio: unseen_ratio(&pool.matrix, it.pool_size, &coverable),
        })
        .collect();
    let (best, summary) = solve_pool(&pool, cfg, ga_seed)?;
    let report = report_from(mesh, cfg, pool.clone(), &best, summary, 0.0);
    Ok((
        MethodRun {
            method: "proposed".into(),
            seed,
            selected: report.viewpoints.len(),
            coverage_ratio: report.coverage_ratio,
            candidates: report.candidate_count,
            iterations_to_best: report.solver.iterations_to_best,
            curve,
            viewpoints: report.viewpoints,
            wall_secs: start.elapsed().as_secs_f64(),
        },
        pool,
    ))
}

/// Two-step random sampling: a matched initial budget over the whole mesh,
/// then rounds of samples around still-unseen target triangles.
fn run_random(mesh: &TriangleMesh, cfg: &PlanConfig, seed: u64, budget: usize, coverable: &[usize]) -> Result<MethodRun> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ba5e_11e5);
    let ga_seed: u64 = rng.gen();
    let vis = Visibility::new(mesh, cfg.camera, VisibilityOptions::default());
    let all: Vec<usize> = (0..mesh.len()).collect();
    let mut pool = sample_around(mesh, cfg, &all, budget, &mut rng)?;
    let mut matrix = vis.matrix(&pool, cfg.execution);
    let mut curve = vec![CurvePoint {
        candidates: pool.len(),
        uncovered_ratio: unseen_ratio(&matrix, matrix.m(), coverable),
    }];
    for _ in 1..cfg.max_outer_iters * TOPUP_ROUNDS_PER_ITER {
        let union = matrix.union_of_rows();
        let missing: Vec<usize> = coverable.iter().copied().filter(|&t| union[t / 64] >> (t % 64) & 1 == 0).collect();
        if missing.is_empty() {
            break;
        }
        let extra = sample_around(mesh, cfg, &missing, missing.len().min(budget), &mut rng)?;
        for row in vis.rows(&extra, cfg.execution) {
            matrix.push_row(&row);
        }
        pool.extend(extra);
        curve.push(CurvePoint {
            candidates: pool.len(),
            uncovered_ratio: unseen_ratio(&matrix, matrix.m(), coverable),
        });
    }
    // Coverable triangles the random pool never saw stay out of its instance
    // but still count against its coverage ratio.
    let union = matrix.union_of_rows();
    let never: Vec<usize> = coverable.iter().copied().filter(|&t| union[t / 64] >> (t % 64) & 1 == 0).collect();
    let mut excluded = complement(mesh.len(), coverable);
    excluded.extend(&never);
    excluded.sort_unstable();
    let pool = CandidatePool {
        viewpoints: pool,
        matrix,
        uncoverable: excluded,
        iterations: Vec::new(),
        timing: Default::default(),
    };
    let (best, summary) = solve_pool(&pool, cfg, ga_seed)?;
    let report = report_from(mesh, cfg, pool, &best, summary, 0.0);
    Ok(MethodRun {
        method: "random".into(),
        seed,
        selected: report.viewpoints.len(),
        coverage_ratio: if coverable.is_empty() {
            1.0
        } else {
            coverable.iter().filter(|&&t| report.cover_counts[t] > 0).count() as f64 / coverable.len() as f64
        },
        candidates: report.candidate_count,
        iterations_to_best: report.solver.iterations_to_best,
        curve,
        viewpoints: report.viewpoints,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Paired runs of the proposed pipeline and the random baseline over seeds
/// `cfg.seed .. cfg.seed + repeats`. The baseline's initial budget equals
/// the proposed method's final candidate pool.
pub fn compare_methods(mesh: &TriangleMesh, cfg: &PlanConfig, repeats: usize) -> Result<Comparison> {
    if repeats == 0 {
        return Err(PlanError::Config("repeats must be >= 1".into()));
    }
    cfg.validate()?;
    let mut proposed = Vec::with_capacity(repeats);
    let mut random = Vec::with_capacity(repeats);
    for r in 0..repeats as u64 {
        let seed = cfg.seed.wrapping_add(r);
        let (run, pool) = run_proposed(mesh, cfg, seed)?;
        let budget = pool.viewpoints.len().max(1);
        random.push(run_random(mesh, cfg, seed, budget, &pool.coverable())?);
        proposed.push(run);
    }
    let summaries = vec![summarize("proposed", &proposed), summarize("random", &random)];
    Ok(Comparison {
        proposed,
        random,
        summaries,
    })
}

impl Comparison {
    /// Per-method mean and standard deviation; reproducible for a fixed seed.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "method,runs,selected_mean,selected_std,coverage_mean,coverage_std,candidates_mean,candidates_std,iterations_to_best_mean,iterations_to_best_std\n",
        );
        for m in &self.summaries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                m.method,
                m.runs,
                m.selected_mean,
                m.selected_std,
                m.coverage_mean,
                m.coverage_std,
                m.candidates_mean,
                m.candidates_std,
                m.iterations_to_best_mean,
                m.iterations_to_best_std
            );
        }
        s
    }

    fn runs(&self) -> impl Iterator<Item = &MethodRun> {
        self.proposed.iter().zip(&self.random).flat_map(|(a, b)| [a, b])
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from("method,seed,selected,coverage_ratio,candidates,iterations_to_best\n");
        for r in self.runs() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.method, r.seed, r.selected, r.coverage_ratio, r.candidates, r.iterations_to_best
            );
        }
        s
    }

    /// Uncovered share against candidate count per run.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("method,seed,step,candidates,uncovered_ratio\n");
        for r in self.runs() {
            for (i, p) in r.curve.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{}", r.method, r.seed, i, p.candidates, p.uncovered_ratio);
            }
        }
        s
    }

    /// Wall-clock seconds; varies run to run, so it lives apart from the other tables.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("method,seed,wall_secs\n");
        for r in self.runs() {
            let _ = writeln!(s, "{},{},{}", r.method, r.seed, r.wall_secs);
        }
        for m in &self.summaries {
            let _ = writeln!(s, "{},mean,{}", m.method, m.wall_mean);
            let _ = writeln!(s, "{},std,{}", m.method, m.wall_std);
        }
        s
    }
}
