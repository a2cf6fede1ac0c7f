//! Candidate viewpoint generation and local potential-field correction.
//!
//! Each cluster yields one viewpoint: its center pushed out by `d` along the
//! normalized resultant of member normals, looking back at the center.
//! Positions that come too close to the surface or too low are nudged by
//! summed repulsive / attractive unit vectors; if that does not settle, the
//! offset is shortened step by step and the nudging repeated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{TriangleMesh, Vec3};

/// Resultant normals shorter than this are treated as cancelled out.
pub const DEGENERATE_RESULTANT: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ViewgenError {
    #[error("resultant normal vanishes; the cluster faces opposite directions")]
    DegenerateNormal,
    #[error("repulsive forces cancel out")]
    CancelledField,
    #[error("no feasible position found after {retreats} retreats")]
    CorrectionFailed { retreats: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = ViewgenError> = std::result::Result<T, E>;

/// Camera pose: position plus unit viewing direction (roll-free).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub position: Vec3,
    pub direction: Vec3,
    pub source_cluster: Option<usize>,
}

impl Viewpoint {
    /// A viewpoint at `position` looking at `target`; `None` when they coincide.
    pub fn aimed_at(position: Vec3, target: Vec3, source_cluster: Option<usize>) -> Option<Viewpoint> {
        let d = target - position;
        let n = d.norm();
        (n > 0.0 && n.is_finite()).then(|| Viewpoint {
            position,
            direction: d / n,
            source_cluster,
        })
    }
}

/// Where viewpoints may be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpace {
    /// Minimum clearance to the surface, meters.
    pub d_safe: f64,
    /// Minimum viewpoint height (z), meters.
    pub h_limit: f64,
    pub max_correction_iters: usize,
    /// Offset reduction per retreat, meters.
    pub d_step: f64,
    /// Length of one potential-field move, meters.
    pub correction_step: f64,
    /// Measure clearance to the closest point of each triangle instead of its centroid.
    pub exact_clearance: bool,
}

impl ConstraintSpace {
    /// Defaults derived from `d_safe` and the nominal offset `d`:
    /// step `d_safe/4`, 20 moves per attempt, retreat by `0.05·d`.
    pub fn with_defaults(d_safe: f64, h_limit: f64, d: f64) -> Self {
        ConstraintSpace {
            d_safe,
            h_limit,
            max_correction_iters: 20,
            d_step: 0.05 * d,
            correction_step: d_safe / 4.0,
            exact_clearance: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_safe > 0.0) {
            return Err(ViewgenError::InvalidParameter(format!("d_safe must be positive, got {}", self.d_safe)));
        }
        if !(self.d_step > 0.0) {
            return Err(ViewgenError::InvalidParameter(format!("d_step must be positive, got {}", self.d_step)));
        }
        if !(self.correction_step > 0.0) {
            return Err(ViewgenError::InvalidParameter(format!(
                "correction_step must be positive, got {}",
                self.correction_step
            )));
        }
        if !self.h_limit.is_finite() {
            return Err(ViewgenError::InvalidParameter("h_limit must be finite".into()));
        }
        Ok(())
    }

    /// Distance from `p` to the nearest repulsor (centroid or closest triangle point).
    pub fn clearance(&self, p: &Vec3, mesh: &TriangleMesh) -> f64 {
        (0..mesh.len())
            .map(|t| (p - self.repulsor(p, mesh, t)).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_feasible(&self, p: &Vec3, mesh: &TriangleMesh) -> bool {
        p.z >= self.h_limit && self.clearance(p, mesh) >= self.d_safe
    }

    fn repulsor(&self, p: &Vec3, mesh: &TriangleMesh, t: usize) -> Vec3 {
        if self.exact_clearance {
            closest_point_on_triangle(p, &mesh.triangle_points(t))
        } else {
            mesh.centroid(t)
        }
    }
}

/// Closest point to `p` on a triangle (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Cluster center and (unnormalized) mean of member unit normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterFrame {
    pub center: Vec3,
    pub resultant: Vec3,
    pub degenerate: bool,
}

pub fn cluster_center_and_normal(mesh: &TriangleMesh, members: &[usize]) -> ClusterFrame {
    assert!(!members.is_empty(), "cluster has no members");
    let t = members.len() as f64;
    let center = members.iter().map(|&i| mesh.centroid(i)).sum::<Vec3>() / t;
    let resultant = members.iter().map(|&i| mesh.normal(i)).sum::<Vec3>() / t;
    ClusterFrame {
        center,
        resultant,
        degenerate: resultant.norm() < DEGENERATE_RESULTANT,
    }
}

/// `P = C + d·N̂`, looking back at `C`.
pub fn generate_viewpoint(center: Vec3, resultant: Vec3, d: f64) -> Result<Viewpoint> {
    if !(d > 0.0) {
        return Err(ViewgenError::InvalidParameter(format!("offset must be positive, got {d}")));
    }
    let n = resultant.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(ViewgenError::DegenerateNormal);
    }
    let position = center + resultant * (d / n);
    Viewpoint::aimed_at(position, center, None).ok_or(ViewgenError::DegenerateNormal)
}

/// Unit sum of `P − p_i` over repulsors closer than `d_safe`; `None` when nothing is that close.
pub fn repulsion_correction(p: &Vec3, mesh: &TriangleMesh, d_safe: f64) -> Result<Option<Vec3>> {
    repulsion_with(p, mesh, d_safe, |t| mesh.centroid(t))
}

fn repulsion_with(p: &Vec3, mesh: &TriangleMesh, d_safe: f64, repulsor: impl Fn(usize) -> Vec3) -> Result<Option<Vec3>> {
    let mut sum = Vec3::zeros();
    let mut violated = false;
    for t in 0..mesh.len() {
        let away = p - repulsor(t);
        if away.norm() < d_safe {
            sum += away;
            violated = true;
        }
    }
    if !violated {
        return Ok(None);
    }
    let n = sum.norm();
    if n < 1e-9 {
        return Err(ViewgenError::CancelledField);
    }
    Ok(Some(sum / n))
}

/// Straight up towards `h_limit` when `p` is strictly below it.
pub fn altitude_correction(p: &Vec3, h_limit: f64) -> Option<Vec3> {
    (p.z < h_limit).then(|| {
        let target = Vec3::new(p.x, p.y, h_limit);
        (target - p).normalize()
    })
}

/// Outcome of [`correct_viewpoint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub viewpoint: Viewpoint,
    /// Potential-field moves taken across all attempts.
    pub moves: usize,
    /// Offset reductions taken.
    pub retreats: usize,
}

/// Runs the potential field from `start`; returns the final position and
/// whether it is feasible.
fn descend(start: Vec3, mesh: &TriangleMesh, cs: &ConstraintSpace, moves: &mut usize) -> (Vec3, bool) {
    let mut p = start;
    for it in 0..=cs.max_correction_iters {
        let rep = if cs.exact_clearance {
            repulsion_with(&p, mesh, cs.d_safe, |t| closest_point_on_triangle(&p, &mesh.triangle_points(t)))
        } else {
            repulsion_correction(&p, mesh, cs.d_safe)
        };
        let alt = altitude_correction(&p, cs.h_limit);
        let dir = match (rep, alt) {
            (Ok(None), None) => return (p, true),
            (Ok(Some(r)), Some(a)) => r + a,
            (Ok(Some(r)), None) => r,
            (Ok(None), Some(a)) | (Err(_), Some(a)) => a,
            (Err(_), None) => return (p, false),
        };
        if it == cs.max_correction_iters {
            break;
        }
        let n = dir.norm();
        if n < 1e-12 {
            return (p, false);
        }
        p += dir * (cs.correction_step / n);
        *moves += 1;
    }
    (p, false)
}

/// Moves an infeasible viewpoint into the constraint space.
///
/// Phase 1 applies up to `max_correction_iters` potential-field moves. If the
/// position is still infeasible, the offset is reduced to `d − i·d_step`
/// (i = 1, 2, ...) and Phase 1 repeated, until feasible or the offset runs
/// out. The direction of a moved viewpoint is re-aimed at `center`.
pub fn correct_viewpoint(
    vp: &Viewpoint,
    center: Vec3,
    resultant: Vec3,
    d: f64,
    mesh: &TriangleMesh,
    cs: &ConstraintSpace,
) -> Result<Correction> {
    cs.validate()?;
    if cs.is_feasible(&vp.position, mesh) {
        return Ok(Correction {
            viewpoint: *vp,
            moves: 0,
            retreats: 0,
        });
    }
    let n = resultant.norm();
    if !(n > 0.0) {
        return Err(ViewgenError::DegenerateNormal);
    }
    let axis = resultant / n;
    let mut moves = 0;
    let mut retreats = 0;
    let mut start = vp.position;
    loop {
        let (p, ok) = descend(start, mesh, cs, &mut moves);
        if ok {
            if let Some(v) = Viewpoint::aimed_at(p, center, vp.source_cluster) {
                return Ok(Correction {
                    viewpoint: v,
                    moves,
                    retreats,
                });
            }
        }
        let offset = d - (retreats + 1) as f64 * cs.d_step;
        if offset <= 1e-12 * d {
            return Err(ViewgenError::CorrectionFailed { retreats });
        }
        retreats += 1;
        start = center + axis * offset;
    }
}
