//! The outer generate-test loop.
//!
//! Each outer iteration clusters the triangles no candidate sees yet, turns
//! every cluster into one corrected viewpoint and appends its visibility row.
//! Once the pool can reach the coverage target the covering subset is solved.
//! A triangle that stays unseen after its second clustering attempt gets a
//! viewpoint of its own; if even that one misses it, the triangle is
//! declared uncoverable and dropped from the target.

mod baseline;
mod config;
mod export;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::mesh::{self, MeshError, TriangleMesh, Vec3};
use crate::solver::{self, ScpInstance, Solution, SolverError};
use crate::spectral::{self, ClusterParams, SpectralError, MAX_DENSE_SIZE};
use crate::viewgen::{self, ConstraintSpace, Viewpoint};
use crate::visibility::{Visibility, VisibilityMatrix, VisibilityOptions};

pub use baseline::{
    compare_methods, random_sampling_baseline, Comparison, CurvePoint, MethodRun, MethodSummary,
};
pub use config::{ClusterSettings, PlanConfig, SolverKind, DEFAULT_D_SAFE, DEFAULT_H_LIMIT};
pub use export::{coverage_csv, export_visualization, viewpoints_json, visualization_scene};

/// A triangle stays in the target until it went unseen through this many
/// outer iterations that clustered it.
const ATTEMPTS_BEFORE_UNCOVERABLE: u8 = 2;
/// Recursion limit when splitting clusters whose normals cancel out.
const MAX_SPLIT_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("no progress in outer iteration {iteration}: {unseen} triangles unseen and no new feasible candidates ({rejected} rejected by correction)")]
    NoProgress {
        iteration: usize,
        unseen: usize,
        rejected: usize,
    },
    #[error("random sampling starved: {accepted} of {budget} candidates after {attempts} attempts")]
    SamplingStarved {
        budget: usize,
        accepted: usize,
        attempts: usize,
    },
}

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

/// Applies the configured subdivision.
pub fn prepare_mesh(mesh: &TriangleMesh, cfg: &PlanConfig) -> Result<TriangleMesh> {
    Ok(match cfg.max_area {
        Some(a) => mesh::subdivide(mesh, a)?,
        None => mesh.clone(),
    })
}

/// Per-stage wall-clock seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timing {
    pub cluster: f64,
    pub viewgen: f64,
    pub visibility: f64,
    pub solve: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Triangles clustered this iteration.
    pub subset_size: usize,
    pub clusters: usize,
    pub new_candidates: usize,
    /// Clusters whose viewpoint could not be corrected into the constraint space.
    pub rejected: usize,
    pub pool_size: usize,
    /// Target triangles no candidate sees after this iteration.
    pub unseen: usize,
    pub newly_uncoverable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub algorithm: SolverKind,
    pub best_fitness: f64,
    pub iterations_to_best: usize,
    pub generations: usize,
    pub history: Vec<f64>,
    pub history_sizes: Vec<usize>,
}

/// Candidates plus their visibility rows, before the covering subset is chosen.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub viewpoints: Vec<Viewpoint>,
    pub matrix: VisibilityMatrix,
    pub uncoverable: Vec<usize>,
    pub iterations: Vec<IterationStats>,
    pub timing: Timing,
}

impl CandidatePool {
    /// Triangles in the coverage target.
    pub fn coverable(&self) -> Vec<usize> {
        complement(self.matrix.n(), &self.uncoverable)
    }

    /// The SCP over the coverable columns.
    pub fn instance(&self, delta: f64) -> Result<ScpInstance> {
        Ok(ScpInstance::new(self.matrix.select_columns(&self.coverable()), delta)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    /// Selected viewpoints, in candidate order.
    pub viewpoints: Vec<Viewpoint>,
    /// Indices of the selected viewpoints in `candidates`.
    pub selected: Vec<usize>,
    /// Covered share of the coverable triangles.
    pub coverage_ratio: f64,
    /// Covered share of all triangles.
    pub surface_coverage_ratio: f64,
    pub triangle_count: usize,
    pub covered: usize,
    pub uncoverable: Vec<usize>,
    pub candidate_count: usize,
    pub outer_iterations: usize,
    pub iterations: Vec<IterationStats>,
    pub solver: SolverSummary,
    /// Selected viewpoints violating d_safe or h_limit when re-checked.
    pub constraint_violations: usize,
    pub candidates: Vec<Viewpoint>,
    /// Per-triangle number of selected viewpoints that see it.
    pub cover_counts: Vec<u32>,
    /// Wall-clock data is kept out of `report.json` so it stays reproducible.
    #[serde(skip)]
    pub timing: Timing,
}

impl PlanReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn complement(n: usize, removed: &[usize]) -> Vec<usize> {
    let removed: BTreeSet<usize> = removed.iter().copied().collect();
    (0..n).filter(|t| !removed.contains(t)).collect()
}

/// Cluster count for `subset`: one cluster per expected camera footprint,
/// `ceil(area / (ρ·footprint))`, clamped to `[1, |subset|]`.
pub fn auto_k(mesh: &TriangleMesh, subset: &[usize], cfg: &PlanConfig) -> usize {
    let area: f64 = subset.iter().map(|&t| mesh.area(t)).sum();
    let per = cfg.cluster.packing * cfg.camera.footprint_area(cfg.offset_factor);
    ((area / per).ceil() as usize).clamp(1, subset.len().max(1))
}

fn cluster_params(cfg: &PlanConfig, k: usize, seed: u64) -> ClusterParams {
    ClusterParams {
        theta: cfg.cluster.theta,
        sigma: cfg.cluster.sigma,
        k,
        kmeans_max_iter: cfg.cluster.kmeans_max_iter,
        seed,
        eigenvector_order: cfg.cluster.eigenvector_order,
    }
}

/// Splits `subset` at the median of its longest centroid axis.
fn spatial_halves(mesh: &TriangleMesh, subset: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let bb = crate::mesh::Aabb::from_points(subset.iter().map(|&t| &mesh.centroids()[t]));
    let axis = bb.longest_axis();
    let mut sorted = subset.to_vec();
    sorted.sort_by(|&a, &b| mesh.centroid(a)[axis].total_cmp(&mesh.centroid(b)[axis]).then(a.cmp(&b)));
    let right = sorted.split_off(sorted.len() / 2);
    (sorted, right)
}

/// Clusters `subset` into triangle-index groups. Oversized subsets are cut
/// spatially first; clusters whose normals cancel are split in two.
fn cluster_subset(mesh: &TriangleMesh, subset: &[usize], k: usize, cfg: &PlanConfig, seed: u64) -> Result<Vec<Vec<usize>>> {
    if subset.len() > MAX_DENSE_SIZE {
        let (a, b) = spatial_halves(mesh, subset);
        let area = |s: &[usize]| s.iter().map(|&t| mesh.area(t)).sum::<f64>();
        let ka = ((k as f64 * area(&a) / (area(&a) + area(&b))).round() as usize).clamp(1, k.max(2) - 1);
        let mut out = cluster_subset(mesh, &a, ka.min(a.len()), cfg, seed)?;
        out.extend(cluster_subset(mesh, &b, (k.saturating_sub(ka)).clamp(1, b.len()), cfg, seed.wrapping_add(1))?);
        return Ok(out);
    }
    let k = k.clamp(1, subset.len());
    let assignment = spectral::cluster_mesh(mesh, subset, &cluster_params(cfg, k, seed))?;
    let mut out = Vec::with_capacity(k);
    for c in 0..assignment.k() {
        split_degenerate(mesh, assignment.triangles_of(c, subset), cfg, seed, 0, &mut out)?;
    }
    Ok(out)
}

fn split_degenerate(
    mesh: &TriangleMesh,
    members: Vec<usize>,
    cfg: &PlanConfig,
    seed: u64,
    depth: usize,
    out: &mut Vec<Vec<usize>>,
) -> Result<()> {
    let frame = viewgen::cluster_center_and_normal(mesh, &members);
    if !frame.degenerate || members.len() < 2 || depth >= MAX_SPLIT_DEPTH {
        out.push(members);
        return Ok(());
    }
    let halves = if members.len() > MAX_DENSE_SIZE {
        let (a, b) = spatial_halves(mesh, &members);
        vec![a, b]
    } else {
        let a = spectral::cluster_mesh(mesh, &members, &cluster_params(cfg, 2, seed))?;
        (0..2).map(|c| a.triangles_of(c, &members)).collect()
    };
    for h in halves {
        split_degenerate(mesh, h, cfg, seed, depth + 1, out)?;
    }
    Ok(())
}

fn corrected_viewpoint(mesh: &TriangleMesh, members: &[usize], cfg: &PlanConfig) -> Option<Viewpoint> {
    let d = cfg.offset();
    let frame = viewgen::cluster_center_and_normal(mesh, members);
    if frame.degenerate {
        return None;
    }
    let vp = viewgen::generate_viewpoint(frame.center, frame.resultant, d).ok()?;
    viewgen::correct_viewpoint(&vp, frame.center, frame.resultant, d, mesh, &cfg.constraints)
        .ok()
        .map(|c| c.viewpoint)
}

/// One corrected viewpoint per cluster; `None` where correction failed.
fn viewpoints_for(mesh: &TriangleMesh, clusters: &[Vec<usize>], first_id: usize, cfg: &PlanConfig) -> Vec<Option<Viewpoint>> {
    cfg.execution.map_range(clusters.len(), |c| {
        let mut vp = corrected_viewpoint(mesh, &clusters[c], cfg)?;
        vp.source_cluster = Some(first_id + c);
        Some(vp)
    })
}

fn unseen(union: &[u64], target: impl Iterator<Item = usize>) -> Vec<usize> {
    target.filter(|&t| union[t / 64] >> (t % 64) & 1 == 0).collect()
}

/// Runs the outer loop until the pool can cover `delta` of the coverable
/// triangles. `seed` drives clustering.
pub fn build_candidate_pool(mesh: &TriangleMesh, cfg: &PlanConfig, seed: u64) -> Result<CandidatePool> {
    cfg.validate()?;
    let start = Instant::now();
    let n = mesh.len();
    let vis = Visibility::new(mesh, cfg.camera, VisibilityOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut timing = Timing::default();
    let mut pool: Vec<Viewpoint> = Vec::new();
    let mut matrix = VisibilityMatrix::new(n);
    let mut attempts = vec![0u8; n];
    let mut uncoverable: BTreeSet<usize> = BTreeSet::new();
    let mut iterations = Vec::new();
    let mut subset: Vec<usize> = (0..n).collect();
    let mut cluster_id = 0;

    for iteration in 1..=cfg.max_outer_iters {
        let t0 = Instant::now();
        let k = cfg.cluster.k.unwrap_or_else(|| auto_k(mesh, &subset, cfg));
        let clusters = cluster_subset(mesh, &subset, k, cfg, rng.gen())?;
        let t1 = Instant::now();
        let vps = viewpoints_for(mesh, &clusters, cluster_id, cfg);
        cluster_id += clusters.len();
        let fresh: Vec<Viewpoint> = vps.iter().flatten().copied().collect();
        let rejected = vps.len() - fresh.len();
        let t2 = Instant::now();
        for row in vis.rows(&fresh, cfg.execution) {
            matrix.push_row(&row);
        }
        pool.extend_from_slice(&fresh);
        let t3 = Instant::now();
        timing.cluster += (t1 - t0).as_secs_f64();
        timing.viewgen += (t2 - t1).as_secs_f64();
        timing.visibility += (t3 - t2).as_secs_f64();

        let mut union = matrix.union_of_rows();
        let mut last_chance = Vec::new();
        for t in unseen(&union, subset.iter().copied()) {
            attempts[t] += 1;
            if attempts[t] >= ATTEMPTS_BEFORE_UNCOVERABLE {
                last_chance.push(t);
            }
        }
        let mut fresh_count = fresh.len();
        let mut rejected = rejected;
        let mut newly = 0;
        if !last_chance.is_empty() {
            let t4 = Instant::now();
            let singles: Vec<Vec<usize>> = last_chance.iter().map(|&t| vec![t]).collect();
            let vps = viewpoints_for(mesh, &singles, cluster_id, cfg);
            cluster_id += singles.len();
            let extra: Vec<Viewpoint> = vps.iter().flatten().copied().collect();
            rejected += vps.len() - extra.len();
            fresh_count += extra.len();
            let t5 = Instant::now();
            for row in vis.rows(&extra, cfg.execution) {
                matrix.push_row(&row);
            }
            pool.extend_from_slice(&extra);
            timing.viewgen += (t5 - t4).as_secs_f64();
            timing.visibility += t5.elapsed().as_secs_f64();
            union = matrix.union_of_rows();
            for t in unseen(&union, last_chance.into_iter()) {
                uncoverable.insert(t);
                newly += 1;
            }
        }
        let target: Vec<usize> = (0..n).filter(|t| !uncoverable.contains(t)).collect();
        let missing = unseen(&union, target.iter().copied());
        let required = ((cfg.delta * target.len() as f64) - 1e-9).ceil() as usize;
        iterations.push(IterationStats {
            iteration,
            subset_size: subset.len(),
            clusters: clusters.len(),
            new_candidates: fresh_count,
            rejected,
            pool_size: pool.len(),
            unseen: missing.len(),
            newly_uncoverable: newly,
        });
        let reachable = target.len() - missing.len() >= required;
        if reachable {
            break;
        }
        if fresh_count == 0 && newly == 0 {
            return Err(PlanError::NoProgress {
                iteration,
                unseen: missing.len(),
                rejected,
            });
        }
        if iteration == cfg.max_outer_iters {
            // Out of iterations: whatever is still unseen cannot be targeted.
            uncoverable.extend(missing);
            break;
        }
        subset = missing;
    }
    timing.total = start.elapsed().as_secs_f64();
    Ok(CandidatePool {
        viewpoints: pool,
        matrix,
        uncoverable: uncoverable.into_iter().collect(),
        iterations,
        timing,
    })
}

/// Solves the covering subset over the pool's coverable columns.
pub fn solve_pool(pool: &CandidatePool, cfg: &PlanConfig, seed: u64) -> Result<(Solution, SolverSummary)> {
    let inst = pool.instance(cfg.delta)?;
    let mut ga = cfg.ga.clone();
    ga.seed = seed;
    ga.execution = cfg.execution;
    let (best, summary) = match cfg.solver {
        SolverKind::Greedy => {
            let s = solver::greedy_cover(&inst)?;
            let f = solver::fitness(&s, &inst);
            let size = s.size();
            (
                s,
                SolverSummary {
                    algorithm: SolverKind::Greedy,
                    best_fitness: f,
                    iterations_to_best: 0,
                    generations: 0,
                    history: vec![f],
                    history_sizes: vec![size],
                },
            )
        }
        kind => {
            let r = if kind == SolverKind::Gahh {
                solver::ga_hh_solve(&inst, &ga)?
            } else {
                solver::ga_solve(&inst, &ga)?
            };
            let summary = SolverSummary {
                algorithm: kind,
                best_fitness: r.best_fitness,
                iterations_to_best: r.iterations_to_best,
                generations: r.generations,
                history: r.history.clone(),
                history_sizes: r.history_sizes.clone(),
            };
            (r.best, summary)
        }
    };
    Ok((best, summary))
}

/// Viewpoints violating `d_safe` (centroid or exact clearance as configured) or `h_limit`.
pub fn constraint_violations(mesh: &TriangleMesh, cs: &ConstraintSpace, vps: &[Viewpoint]) -> usize {
    vps.iter().filter(|v| !cs.is_feasible(&v.position, mesh)).count()
}

pub(crate) fn report_from(
    mesh: &TriangleMesh,
    cfg: &PlanConfig,
    pool: CandidatePool,
    best: &Solution,
    solver: SolverSummary,
    solve_secs: f64,
) -> PlanReport {
    let selected = best.selected();
    let n = mesh.len();
    let mut counts = vec![0u32; n];
    for &i in &selected {
        for t in pool.matrix.row_indices(i) {
            counts[t] += 1;
        }
    }
    let covered = counts.iter().filter(|&&c| c > 0).count();
    let coverable = n - pool.uncoverable.len();
    let viewpoints: Vec<Viewpoint> = selected.iter().map(|&i| pool.viewpoints[i]).collect();
    let mut timing = pool.timing;
    timing.solve = solve_secs;
    timing.total += solve_secs;
    PlanReport {
        constraint_violations: constraint_violations(mesh, &cfg.constraints, &viewpoints),
        viewpoints,
        selected,
        coverage_ratio: if coverable == 0 { 1.0 } else { covered as f64 / coverable as f64 },
        surface_coverage_ratio: if n == 0 { 0.0 } else { covered as f64 / n as f64 },
        triangle_count: n,
        covered,
        uncoverable: pool.uncoverable,
        candidate_count: pool.viewpoints.len(),
        outer_iterations: pool.iterations.len(),
        iterations: pool.iterations,
        solver,
        candidates: pool.viewpoints,
        cover_counts: counts,
        timing,
    }
}

/// Full pipeline on an already prepared mesh (see [`prepare_mesh`]).
pub fn plan(mesh: &TriangleMesh, cfg: &PlanConfig) -> Result<PlanReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (cluster_seed, ga_seed) = (rng.gen(), rng.gen());
    let pool = build_candidate_pool(mesh, cfg, cluster_seed)?;
    let t = Instant::now();
    let (best, summary) = solve_pool(&pool, cfg, ga_seed)?;
    Ok(report_from(mesh, cfg, pool, &best, summary, t.elapsed().as_secs_f64()))
}

/// Centroid of the mesh, handy for aiming test cameras.
pub fn mesh_center(mesh: &TriangleMesh) -> Vec3 {
    mesh.centroids().iter().sum::<Vec3>() / mesh.len().max(1) as f64
}
