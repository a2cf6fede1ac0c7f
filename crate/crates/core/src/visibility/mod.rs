//! Four-condition visibility model and the m×n visibility matrix.
//!
//! A triangle counts as seen from a viewpoint when its centroid is
//!
//! 1. inside the depth range `(min_range, fod]`,
//! 2. inside the viewing cone (angle to the optical axis at most `fov/2`),
//! 3. observed at an incidence angle of at most `beta_max` from its normal,
//! 4. not hidden behind any other triangle.
//!
//! Occlusion queries go through a [`Bvh`]; rows of the matrix are independent
//! and are computed in parallel when the `parallel` feature is on.

mod bvh;
mod matrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{TriangleMesh, Vec3};
use crate::par::Execution;
use crate::viewgen::Viewpoint;

pub use bvh::Bvh;
pub use matrix::VisibilityMatrix;

/// Minimum ray parameter counted as a hit, meters.
pub const EPS_RAY: f64 = 1e-6;
/// Hits closer than this to the target point do not occlude it, meters.
pub const EPS_OCC: f64 = 1e-4;
/// Determinants below this are treated as a ray parallel to the triangle.
pub const PARALLEL_DET: f64 = 1e-12;
/// Barycentric slack so rays through shared edges and vertices cannot slip
/// between neighbouring triangles.
pub const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VisibilityError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("bit-matrix format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Camera sensing envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Maximum viewing distance (field of depth), meters.
    pub fod: f64,
    /// Full cone angle, degrees.
    pub fov: f64,
    /// Maximum incidence angle between triangle normal and the ray to the camera, degrees.
    pub beta_max: f64,
    /// Near clip, meters.
    pub min_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            fod: 30.0,
            fov: 80.0,
            beta_max: 75.0,
            min_range: 0.0,
        }
    }
}

impl CameraModel {
    pub fn new(fod: f64, fov: f64) -> Self {
        CameraModel {
            fod,
            fov,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), VisibilityError> {
        if !(self.min_range >= 0.0 && self.fod > self.min_range) {
            return Err(VisibilityError::InvalidCamera(format!(
                "need fod > min_range >= 0 (fod={}, min_range={})",
                self.fod, self.min_range
            )));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(VisibilityError::InvalidCamera(format!("fov must be in (0,180), got {}", self.fov)));
        }
        if !(self.beta_max > 0.0 && self.beta_max <= 90.0) {
            return Err(VisibilityError::InvalidCamera(format!(
                "beta_max must be in (0,90], got {}",
                self.beta_max
            )));
        }
        Ok(())
    }

    /// Area of the square footprint seen head-on from `offset_factor·fod` away.
    pub fn footprint_area(&self, offset_factor: f64) -> f64 {
        let side = 2.0 * offset_factor * self.fod * (self.fov.to_radians() / 2.0).tan();
        side * side
    }
}

/// Möller–Trumbore. Returns the smallest ray parameter `t > eps_ray` at
/// which the ray hits the triangle's interior or edge (edges widened by
/// [`EDGE_SLACK`] in barycentric units).
pub fn ray_triangle_intersect(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3], eps_ray: f64) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < PARALLEL_DET {
        return None;
    }
    let f = 1.0 / det;
    let s = origin - tri[0];
    let u = f * s.dot(&h);
    if !(-EDGE_SLACK..=1.0 + EDGE_SLACK).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = f * dir.dot(&q);
    if v < -EDGE_SLACK || u + v > 1.0 + EDGE_SLACK {
        return None;
    }
    let t = f * e2.dot(&q);
    (t > eps_ray).then_some(t)
}

/// How occlusion (condition 4) is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occlusion {
    #[default]
    Bvh,
    /// Test every triangle; for benchmarking and cross-checks.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityOptions {
    pub eps_ray: f64,
    pub eps_occ: f64,
    /// Require the three vertices as well as the centroid to pass.
    pub strict_vertices: bool,
    pub occlusion: Occlusion,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        VisibilityOptions {
            eps_ray: EPS_RAY,
            eps_occ: EPS_OCC,
            strict_vertices: false,
            occlusion: Occlusion::Bvh,
        }
    }
}

/// Everything needed to answer visibility queries against one mesh.
#[derive(Debug, Clone)]
pub struct Visibility<'a> {
    mesh: &'a TriangleMesh,
    bvh: Bvh,
    camera: CameraModel,
    options: VisibilityOptions,
    cos_half_fov: f64,
    cos_beta: f64,
}

impl<'a> Visibility<'a> {
    pub fn new(mesh: &'a TriangleMesh, camera: CameraModel, options: VisibilityOptions) -> Self {
        Visibility {
            mesh,
            bvh: Bvh::build(mesh),
            camera,
            options,
            cos_half_fov: (camera.fov.to_radians() / 2.0).cos(),
            cos_beta: camera.beta_max.to_radians().cos(),
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    fn point_visible(&self, vp: &Viewpoint, t: usize, p: &Vec3) -> bool {
        let to = p - vp.position;
        let dist = to.norm();
        if !(dist > self.camera.min_range && dist <= self.camera.fod) {
            return false;
        }
        let dir = to / dist;
        if vp.direction.dot(&dir) < self.cos_half_fov {
            return false;
        }
        if self.mesh.normal(t).dot(&(-dir)) < self.cos_beta {
            return false;
        }
        let t_max = dist - self.options.eps_occ;
        !match self.options.occlusion {
            Occlusion::Bvh => self.bvh.segment_blocked(&vp.position, &dir, t_max, t, self.options.eps_ray),
            Occlusion::Linear => (0..self.mesh.len()).any(|o| {
                o != t
                    && ray_triangle_intersect(&vp.position, &dir, &self.mesh.triangle_points(o), self.options.eps_ray)
                        .is_some_and(|h| h < t_max)
            }),
        }
    }

    /// Whether triangle `t` is seen from `vp`.
    pub fn is_visible(&self, vp: &Viewpoint, t: usize) -> bool {
        if !self.point_visible(vp, t, &self.mesh.centroid(t)) {
            return false;
        }
        if self.options.strict_vertices {
            return self.mesh.triangle_points(t).iter().all(|p| self.point_visible(vp, t, p));
        }
        true
    }

    /// One packed matrix row for `vp`.
    pub fn row(&self, vp: &Viewpoint) -> Vec<u64> {
        let n = self.mesh.len();
        let mut words = vec![0u64; matrix::words_for(n)];
        for t in 0..n {
            if self.is_visible(vp, t) {
                words[t / 64] |= 1 << (t % 64);
            }
        }
        words
    }

    /// Rows for `vps`, in order.
    pub fn rows(&self, vps: &[Viewpoint], exec: Execution) -> Vec<Vec<u64>> {
        exec.map_slice(vps, |vp| self.row(vp))
    }

    pub fn matrix(&self, vps: &[Viewpoint], exec: Execution) -> VisibilityMatrix {
        let mut m = VisibilityMatrix::new(self.mesh.len());
        for r in self.rows(vps, exec) {
            m.push_row(&r);
        }
        m
    }
}

/// Single query with default options. Builds a BVH; prefer [`Visibility`] for batches.
pub fn is_visible(vp: &Viewpoint, t: usize, mesh: &TriangleMesh, camera: &CameraModel) -> bool {
    Visibility::new(mesh, *camera, VisibilityOptions::default()).is_visible(vp, t)
}

pub fn visibility_matrix(vps: &[Viewpoint], mesh: &TriangleMesh, camera: &CameraModel) -> VisibilityMatrix {
    Visibility::new(mesh, *camera, VisibilityOptions::default()).matrix(vps, Execution::default())
}

/// Per-triangle cover counts `c = s·A` and the number of triangles covered at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageStats {
    pub counts: Vec<u32>,
    pub n_cover: usize,
}

impl CoverageStats {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn coverage_stats(a: &VisibilityMatrix, selection: &[bool]) -> Result<CoverageStats, VisibilityError> {
    if selection.len() != a.m() {
        return Err(VisibilityError::DimensionMismatch {
            expected: a.m(),
            got: selection.len(),
        });
    }
    let mut counts = vec![0u32; a.n()];
    for (i, _) in selection.iter().enumerate().filter(|(_, &s)| s) {
        for j in a.row_indices(i) {
            counts[j] += 1;
        }
    }
    let n_cover = counts.iter().filter(|&&c| c >= 1).count();
    Ok(CoverageStats { counts, n_cover })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, MeshBuilder};
    use approx::assert_relative_eq;

    fn tri() -> [Vec3; 3] {
        [Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    #[test]
    fn ray_hits_axis_aligned() {
        let t = ray_triangle_intersect(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0), &tri(), EPS_RAY);
        assert_relative_eq!(t.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_misses_behind_and_parallel() {
        assert_eq!(ray_triangle_intersect(&Vec3::new(0.0, 0.0, 1.0), &Vec3::z(), &tri(), EPS_RAY), None);
        assert_eq!(ray_triangle_intersect(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::x(), &tri(), EPS_RAY), None);
    }

    #[test]
    fn ray_hits_edge() {
        // Straight down onto the edge y = -1.
        let t = ray_triangle_intersect(&Vec3::new(0.0, -1.0, 2.0), &Vec3::new(0.0, 0.0, -1.0), &tri(), EPS_RAY);
        assert!(t.is_some());
    }

    #[test]
    fn rays_through_box_corner_are_blocked() {
        // Inner box sealed in an outer box; the ray enters at the outer corner vertex.
        let m = crate::synthetic::by_name("cavity").unwrap();
        let origin = Vec3::new(-11.64, -11.64, 31.64);
        let dir = Vec3::new(1.0, 1.0, -1.0).normalize();
        let hit = (0..m.len()).any(|o| {
            let p = m.centroid(o);
            let outer = p.x <= 1e-9 || p.y <= 1e-9 || p.z >= 20.0 - 1e-9;
            outer && ray_triangle_intersect(&origin, &dir, &m.triangle_points(o), EPS_RAY).is_some()
        });
        assert!(hit);
    }

    fn floor() -> TriangleMesh {
        // One 2 m triangle centered at the origin, facing up.
        MeshBuilder::new()
            .triangle(Vec3::new(-1.0, -1.0, 0.0), Vec3::new(2.0, -1.0, 0.0), Vec3::new(-1.0, 2.0, 0.0))
            .build()
    }

    fn cam() -> CameraModel {
        CameraModel {
            fod: 30.0,
            fov: 80.0,
            beta_max: 75.0,
            min_range: 0.0,
        }
    }

    #[test]
    fn visible_from_above() {
        let m = floor();
        let vp = Viewpoint::aimed_at(Vec3::new(0.0, 0.0, 10.0), Vec3::zeros(), None).unwrap();
        assert!(is_visible(&vp, 0, &m, &cam()));
        let far = Viewpoint::aimed_at(Vec3::new(0.0, 0.0, 35.0), Vec3::zeros(), None).unwrap();
        assert!(!is_visible(&far, 0, &m, &cam()));
    }

    #[test]
    fn occluder_blocks() {
        let mut b = MeshBuilder::new();
        b.triangle(Vec3::new(-1.0, -1.0, 0.0), Vec3::new(2.0, -1.0, 0.0), Vec3::new(-1.0, 2.0, 0.0));
        b.triangle(Vec3::new(-1.0, -1.0, 5.0), Vec3::new(2.0, -1.0, 5.0), Vec3::new(-1.0, 2.0, 5.0));
        let m = b.build();
        let vp = Viewpoint::aimed_at(Vec3::new(0.0, 0.0, 10.0), Vec3::zeros(), None).unwrap();
        assert!(!is_visible(&vp, 0, &m, &cam()));
        assert!(is_visible(&vp, 1, &m, &cam()));
    }

    #[test]
    fn incidence_and_cone_limits() {
        let m = floor();
        // Looking at the centroid from a grazing 80° incidence.
        let c = m.centroid(0);
        let dir = Vec3::new(80f64.to_radians().sin(), 0.0, 80f64.to_radians().cos());
        let vp = Viewpoint::aimed_at(c + dir * 10.0, c, None).unwrap();
        assert!(!is_visible(&vp, 0, &m, &cam()));
        // Directly above but looking sideways.
        let side = Viewpoint {
            position: c + Vec3::z() * 10.0,
            direction: Vec3::x(),
            source_cluster: None,
        };
        assert!(!is_visible(&side, 0, &m, &cam()));
        // Near clip.
        let near = CameraModel { min_range: 12.0, ..cam() };
        let vp = Viewpoint::aimed_at(c + Vec3::z() * 10.0, c, None).unwrap();
        assert!(!is_visible(&vp, 0, &m, &near));
    }

    #[test]
    fn floor_row_and_reversed_row() {
        let m = synthetic::flat_plate(4.0, 4.0, 0.0);
        let c = Vec3::new(2.0, 2.0, 0.0);
        let vp = Viewpoint::aimed_at(c + Vec3::z() * 10.0, c, None).unwrap();
        let a = visibility_matrix(&[vp], &m, &cam());
        assert_eq!((a.m(), a.n()), (1, 2));
        assert!(a.get(0, 0) && a.get(0, 1));
        let away = Viewpoint {
            direction: -vp.direction,
            ..vp
        };
        let a = visibility_matrix(&[away], &m, &cam());
        assert_eq!(a.row_count(0), 0);
    }

    #[test]
    fn cube_face_viewpoints_see_their_face() {
        let cube = synthetic::closed_box(Vec3::zeros(), Vec3::repeat(10.0));
        let center = Vec3::repeat(5.0);
        let axes = [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()];
        let vps: Vec<_> = axes
            .iter()
            .map(|a| Viewpoint::aimed_at(center + a * 20.0, center + a * 5.0, None).unwrap())
            .collect();
        let a = visibility_matrix(&vps, &cube, &cam());
        for (i, axis) in axes.iter().enumerate() {
            let seen: Vec<usize> = a.row_indices(i).collect();
            assert_eq!(seen.len(), 2, "row {i}: {seen:?}");
            for t in seen {
                assert_relative_eq!(cube.normal(t), *axis, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn strict_vertices_is_more_conservative() {
        let m = synthetic::flat_plate(40.0, 40.0, 0.0);
        let c = m.centroid(0);
        let vp = Viewpoint::aimed_at(c + Vec3::z() * 10.0, c, None).unwrap();
        let relaxed = Visibility::new(&m, cam(), VisibilityOptions::default());
        let strict = Visibility::new(
            &m,
            cam(),
            VisibilityOptions {
                strict_vertices: true,
                ..Default::default()
            },
        );
        assert!(relaxed.is_visible(&vp, 0));
        assert!(!strict.is_visible(&vp, 0));
    }

    #[test]
    fn linear_and_bvh_agree() {
        let m = crate::mesh::subdivide(&synthetic::default_l_tower(), 60.0).unwrap();
        let vps: Vec<_> = [(-20.0, -20.0, 30.0), (60.0, 10.0, 20.0), (30.0, 30.0, 50.0)]
            .iter()
            .map(|&(x, y, z)| Viewpoint::aimed_at(Vec3::new(x, y, z), Vec3::new(20.0, 20.0, 18.0), None).unwrap())
            .collect();
        let cam = CameraModel::new(60.0, 90.0);
        let bvh = Visibility::new(&m, cam, VisibilityOptions::default()).matrix(&vps, Execution::Sequential);
        let lin = Visibility::new(
            &m,
            cam,
            VisibilityOptions {
                occlusion: Occlusion::Linear,
                ..Default::default()
            },
        )
        .matrix(&vps, Execution::Parallel);
        assert_eq!(bvh, lin);
        assert!(bvh.row_count(0) > 0);
    }

    #[test]
    fn coverage_examples() {
        let id = VisibilityMatrix::from_bool_rows(
            3,
            &[vec![true, false, false], vec![false, true, false], vec![false, false, true]],
        )
        .unwrap();
        let s = coverage_stats(&id, &[true, true, true]).unwrap();
        assert_eq!((s.counts.clone(), s.n_cover), (vec![1, 1, 1], 3));
        let s = coverage_stats(&id, &[false, false, false]).unwrap();
        assert_eq!((s.counts.clone(), s.n_cover), (vec![0, 0, 0], 0));
        let a = VisibilityMatrix::from_bool_rows(3, &[vec![true, true, false], vec![false, true, true]]).unwrap();
        let s = coverage_stats(&a, &[true, true]).unwrap();
        assert_eq!((s.counts.clone(), s.n_cover), (vec![1, 2, 1], 3));
        assert!(coverage_stats(&a, &[true]).is_err());
    }
}
