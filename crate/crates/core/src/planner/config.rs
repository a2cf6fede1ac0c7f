use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PlanError, Result};
use crate::par::Execution;
use crate::solver::{Acceptance, GaParams};
use crate::spectral::EigenvectorOrder;
use crate::viewgen::ConstraintSpace;
use crate::visibility::CameraModel;

/// Which solver picks the final subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Gahh,
    Ga,
    Greedy,
}

/// Clustering knobs the planner passes to `spectral`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSettings {
    pub theta: f64,
    pub sigma: f64,
    /// Fixed cluster count per outer iteration; `None` uses the area rule.
    pub k: Option<usize>,
    /// Packing efficiency ρ in the area rule.
    pub packing: f64,
    pub kmeans_max_iter: usize,
    pub eigenvector_order: EigenvectorOrder,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            theta: 0.5,
            sigma: 0.35,
            k: None,
            packing: 0.5,
            kmeans_max_iter: 100,
            eigenvector_order: EigenvectorOrder::SmallestNonzero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanConfig {
    pub camera: CameraModel,
    pub constraints: ConstraintSpace,
    pub cluster: ClusterSettings,
    pub ga: GaParams,
    pub solver: SolverKind,
    pub delta: f64,
    pub max_outer_iters: usize,
    /// Nominal offset as a fraction of the camera's fod.
    pub offset_factor: f64,
    /// Subdivide the input until no triangle is larger than this (m²).
    pub max_area: Option<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

pub const DEFAULT_D_SAFE: f64 = 3.0;
pub const DEFAULT_H_LIMIT: f64 = 2.0;

impl Default for PlanConfig {
    fn default() -> Self {
        let camera = CameraModel::default();
        let offset_factor = 0.95;
        PlanConfig {
            camera,
            constraints: ConstraintSpace::with_defaults(DEFAULT_D_SAFE, DEFAULT_H_LIMIT, offset_factor * camera.fod),
            cluster: ClusterSettings::default(),
            ga: GaParams::default(),
            solver: SolverKind::Gahh,
            delta: 1.0,
            max_outer_iters: 10,
            offset_factor,
            max_area: Some(4.0),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// On-disk form: one flat table, every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatConfig {
    fod: Option<f64>,
    fov: Option<f64>,
    beta_max: Option<f64>,
    min_range: Option<f64>,
    d_safe: Option<f64>,
    h_limit: Option<f64>,
    max_correction_iters: Option<usize>,
    d_step: Option<f64>,
    correction_step: Option<f64>,
    exact_clearance: Option<bool>,
    theta: Option<f64>,
    sigma: Option<f64>,
    /// 0 means automatic.
    k: Option<usize>,
    packing: Option<f64>,
    kmeans_max_iter: Option<usize>,
    eigenvector_order: Option<EigenvectorOrder>,
    population_size: Option<usize>,
    llh_length: Option<usize>,
    crossover_prob: Option<f64>,
    mutation_prob: Option<f64>,
    max_generations: Option<usize>,
    stall_generations: Option<usize>,
    acceptance: Option<Acceptance>,
    solver: Option<SolverKind>,
    delta: Option<f64>,
    max_outer_iters: Option<usize>,
    offset_factor: Option<f64>,
    /// 0 disables subdivision.
    max_area: Option<f64>,
    seed: Option<u64>,
    parallel: Option<bool>,
}

impl PlanConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let f: FlatConfig = toml::from_str(src).map_err(|e| PlanError::Config(e.message().to_string()))?;
        let mut c = PlanConfig::default();
        let cam = &mut c.camera;
        set(&mut cam.fod, f.fod);
        set(&mut cam.fov, f.fov);
        set(&mut cam.beta_max, f.beta_max);
        set(&mut cam.min_range, f.min_range);
        set(&mut c.offset_factor, f.offset_factor);
        let d = c.offset_factor * c.camera.fod;
        let d_safe = f.d_safe.unwrap_or(DEFAULT_D_SAFE);
        let mut cs = ConstraintSpace::with_defaults(d_safe, f.h_limit.unwrap_or(DEFAULT_H_LIMIT), d);
        set(&mut cs.max_correction_iters, f.max_correction_iters);
        set(&mut cs.d_step, f.d_step);
        set(&mut cs.correction_step, f.correction_step);
        set(&mut cs.exact_clearance, f.exact_clearance);
        c.constraints = cs;
        let cl = &mut c.cluster;
        set(&mut cl.theta, f.theta);
        set(&mut cl.sigma, f.sigma);
        if let Some(k) = f.k {
            cl.k = (k > 0).then_some(k);
        }
        set(&mut cl.packing, f.packing);
        set(&mut cl.kmeans_max_iter, f.kmeans_max_iter);
        set(&mut cl.eigenvector_order, f.eigenvector_order);
        let ga = &mut c.ga;
        set(&mut ga.population_size, f.population_size);
        set(&mut ga.llh_length, f.llh_length);
        set(&mut ga.crossover_prob, f.crossover_prob);
        set(&mut ga.mutation_prob, f.mutation_prob);
        set(&mut ga.max_generations, f.max_generations);
        set(&mut ga.stall_generations, f.stall_generations);
        set(&mut ga.acceptance, f.acceptance);
        set(&mut c.solver, f.solver);
        set(&mut c.delta, f.delta);
        set(&mut c.max_outer_iters, f.max_outer_iters);
        if let Some(a) = f.max_area {
            c.max_area = (a > 0.0).then_some(a);
        }
        set(&mut c.seed, f.seed);
        if let Some(p) = f.parallel {
            c.execution = if p { Execution::Parallel } else { Execution::Sequential };
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| PlanError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    /// Flat TOML with every key spelled out.
    pub fn to_toml_string(&self) -> String {
        let c = &self.camera;
        let cs = &self.constraints;
        let cl = &self.cluster;
        let ga = &self.ga;
        format!(
            "# camera\nfod = {:?}\nfov = {:?}\nbeta_max = {:?}\nmin_range = {:?}\n\n\
             # constraints\nd_safe = {:?}\nh_limit = {:?}\nmax_correction_iters = {}\nd_step = {:?}\n\
             correction_step = {:?}\nexact_clearance = {}\n\n\
             # clustering (k = 0: one cluster per expected footprint)\ntheta = {:?}\nsigma = {:?}\nk = {}\n\
             packing = {:?}\nkmeans_max_iter = {}\neigenvector_order = \"{}\"\n\n\
             # solver\nsolver = \"{}\"\npopulation_size = {}\nllh_length = {}\ncrossover_prob = {:?}\n\
             mutation_prob = {:?}\nmax_generations = {}\nstall_generations = {}\nacceptance = \"{}\"\n\n\
             # pipeline (max_area = 0: no subdivision)\ndelta = {:?}\nmax_outer_iters = {}\noffset_factor = {:?}\n\
             max_area = {:?}\nseed = {}\n",
            c.fod,
            c.fov,
            c.beta_max,
            c.min_range,
            cs.d_safe,
            cs.h_limit,
            cs.max_correction_iters,
            cs.d_step,
            cs.correction_step,
            cs.exact_clearance,
            cl.theta,
            cl.sigma,
            cl.k.unwrap_or(0),
            cl.packing,
            cl.kmeans_max_iter,
            name(&cl.eigenvector_order),
            name(&self.solver),
            ga.population_size,
            ga.llh_length,
            ga.crossover_prob,
            ga.mutation_prob,
            ga.max_generations,
            ga.stall_generations,
            name(&ga.acceptance),
            self.delta,
            self.max_outer_iters,
            self.offset_factor,
            self.max_area.unwrap_or(0.0),
            self.seed,
        )
    }

    /// Nominal camera-to-cluster distance `offset_factor · fod`.
    pub fn offset(&self) -> f64 {
        self.offset_factor * self.camera.fod
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PlanError::Config(m));
        self.camera.validate().map_err(|e| PlanError::Config(e.to_string()))?;
        self.constraints.validate().map_err(|e| PlanError::Config(e.to_string()))?;
        self.ga.validate().map_err(|e| PlanError::Config(e.to_string()))?;
        let cl = &self.cluster;
        if !(cl.theta > 0.0 && cl.theta < 1.0) {
            return bad(format!("theta must be in (0,1), got {}", cl.theta));
        }
        if !(cl.sigma > 0.0 && cl.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", cl.sigma));
        }
        if !(cl.packing > 0.0 && cl.packing <= 1.0) {
            return bad(format!("packing must be in (0,1], got {}", cl.packing));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must be in (0,1], got {}", self.delta));
        }
        if !(self.offset_factor > 0.0 && self.offset_factor <= 1.0) {
            return bad(format!("offset_factor must be in (0,1], got {}", self.offset_factor));
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be >= 1".into());
        }
        if let Some(a) = self.max_area {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("max_area must be positive, got {a}"));
            }
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// snake_case name of a unit enum variant, via its serde form.
fn name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
