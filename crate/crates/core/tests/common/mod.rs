#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewplan::mesh::{TriangleMesh, Vec3};
use viewplan::solver::ScpInstance;
use viewplan::synthetic::MeshBuilder;
use viewplan::visibility::{CameraModel, VisibilityMatrix};
use viewplan::Viewpoint;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec(rng: &mut impl Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

/// Random scene with at most `max_tris` triangles: either a loose soup of
/// triangles or a handful of boxes on a ground plate.
pub fn random_scene(rng: &mut impl Rng, max_tris: usize) -> TriangleMesh {
    let mut b = MeshBuilder::new();
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(20..=max_tris);
        for _ in 0..n {
            let a = rand_vec(rng, 0.0, 30.0);
            let u = rand_vec(rng, -3.0, 3.0);
            let v = rand_vec(rng, -3.0, 3.0);
            b.triangle(a, a + u, a + v);
        }
    } else {
        b.quad(
            Vec3::new(-5.0, -5.0, 0.0),
            Vec3::new(35.0, -5.0, 0.0),
            Vec3::new(35.0, 35.0, 0.0),
            Vec3::new(-5.0, 35.0, 0.0),
        );
        let boxes = rng.gen_range(2..=(max_tris - 2) / 12);
        for _ in 0..boxes {
            let lo = Vec3::new(rng.gen_range(0.0..25.0), rng.gen_range(0.0..25.0), 0.0);
            let size = Vec3::new(rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0), rng.gen_range(1.0..10.0));
            b.boxed(lo, lo + size, false, true);
        }
    }
    b.build()
}

/// Viewpoints scattered around the scene, each aimed near some triangle.
pub fn random_viewpoints(rng: &mut impl Rng, mesh: &TriangleMesh, count: usize) -> Vec<Viewpoint> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vec3::new(rng.gen_range(-10.0..40.0), rng.gen_range(-10.0..40.0), rng.gen_range(1.0..25.0));
        let t = rng.gen_range(0..mesh.len());
        let target = oracle_centroid(&mesh.triangle_points(t)) + rand_vec(rng, -2.0, 2.0);
        if let Some(v) = Viewpoint::aimed_at(p, target, None) {
            out.push(v);
        }
    }
    out
}

pub fn oracle_centroid(t: &[Vec3; 3]) -> Vec3 {
    (t[0] + t[1] + t[2]) / 3.0
}

pub fn oracle_normal(t: &[Vec3; 3]) -> Vec3 {
    (t[1] - t[0]).cross(&(t[2] - t[0])).normalize()
}

/// Segment/triangle test via the supporting plane and edge half-spaces.
fn oracle_hit(origin: &Vec3, dir: &Vec3, t: &[Vec3; 3], t_min: f64, t_max: f64) -> bool {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let denom = n.dot(dir);
    if denom.abs() < 1e-12 * n.norm() {
        return false;
    }
    let s = n.dot(&(t[0] - origin)) / denom;
    if !(s > t_min && s < t_max) {
        return false;
    }
    let x = origin + dir * s;
    (0..3).all(|i| {
        let a = t[i];
        let b = t[(i + 1) % 3];
        (b - a).cross(&(x - a)).dot(&n) >= -1e-9 * n.norm_squared()
    })
}

/// All-pairs, all-occluders visibility without any acceleration structure.
pub fn oracle_visible(vp: &Viewpoint, tri: usize, mesh: &TriangleMesh, cam: &CameraModel) -> bool {
    let pts = mesh.triangle_points(tri);
    let p = oracle_centroid(&pts);
    let to = p - vp.position;
    let dist = to.norm();
    if dist <= cam.min_range || dist > cam.fod {
        return false;
    }
    let dir = to / dist;
    if vp.direction.dot(&dir).clamp(-1.0, 1.0).acos() > (cam.fov / 2.0).to_radians() + 1e-12 {
        return false;
    }
    if oracle_normal(&pts).dot(&-dir).clamp(-1.0, 1.0).acos() > cam.beta_max.to_radians() + 1e-12 {
        return false;
    }
    !(0..mesh.len()).any(|o| o != tri && oracle_hit(&vp.position, &dir, &mesh.triangle_points(o), 1e-6, dist - 1e-4))
}

pub fn oracle_matrix(vps: &[Viewpoint], mesh: &TriangleMesh, cam: &CameraModel) -> Vec<Vec<bool>> {
    vps.iter()
        .map(|v| (0..mesh.len()).map(|t| oracle_visible(v, t, mesh, cam)).collect())
        .collect()
}

/// Random instance with `m` rows over `n` columns; every column is forced
/// into at least one row so the instance is feasible at any δ.
pub fn random_instance(rng: &mut impl Rng, m: usize, n: usize, density: f64, delta: f64) -> ScpInstance {
    let mut rows: Vec<Vec<bool>> = (0..m).map(|_| (0..n).map(|_| rng.gen_bool(density)).collect()).collect();
    for j in 0..n {
        if !rows.iter().any(|r| r[j]) {
            let i = rng.gen_range(0..m);
            rows[i][j] = true;
        }
    }
    ScpInstance::new(VisibilityMatrix::from_bool_rows(n, &rows).unwrap(), delta).unwrap()
}

pub fn instance(rows: &[&[u8]], delta: f64) -> ScpInstance {
    let n = rows[0].len();
    let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
    ScpInstance::new(VisibilityMatrix::from_bool_rows(n, &rows).unwrap(), delta).unwrap()
}

/// Smallest clearance from `p` to any triangle centroid, recomputed from raw vertices.
pub fn min_centroid_distance(p: &Vec3, mesh: &TriangleMesh) -> f64 {
    (0..mesh.len())
        .map(|t| (p - oracle_centroid(&mesh.triangle_points(t))).norm())
        .fold(f64::INFINITY, f64::min)
}
