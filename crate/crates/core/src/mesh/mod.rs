//! Triangle meshes: the single geometric source of truth for the pipeline.
//!
//! A [`TriangleMesh`] is immutable once built. Per-triangle centroid, unit
//! normal and area are computed at construction and never change, so the mesh
//! can be shared freely across threads.

mod io;

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::Vector3;
use thiserror::Error;

pub use io::{load_mesh, write_obj, LoadReport, MeshFormat, PlyScene};

pub type Vec3 = Vector3<f64>;

/// Vertices closer than this (meters) are merged at load time.
pub const WELD_TOLERANCE: f64 = 1e-6;

/// Triangles with an area at or below this (m²) are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Default upper bound on the number of triangles produced by [`subdivide`].
pub const DEFAULT_SUBDIVISION_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("mesh has no valid triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {vertex}, but only {count} vertices exist")]
    InvalidIndex {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("subdivision would exceed the cap of {cap} triangles")]
    SubdivisionOverflow { cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown mesh format: {0}")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MeshError> = std::result::Result<T, E>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// An inverted box; the identity for [`Aabb::union`].
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::repeat(margin),
            max: self.max + Vec3::repeat(margin),
        }
    }

    pub fn longest_axis(&self) -> usize {
        let s = self.size();
        if s.x >= s.y && s.x >= s.z {
            0
        } else if s.y >= s.z {
            1
        } else {
            2
        }
    }

    /// Slab test. Returns true when the ray segment `[0, t_max]` touches the box.
    pub fn hit_by_ray(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf means the ray lies in the slab plane; keep the interval.
            if near.is_nan() || far.is_nan() {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return false;
                }
                continue;
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Indexed triangle mesh with cached per-triangle geometry.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    centroids: Vec<Vec3>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
}

fn triangle_geometry(a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Vec3, f64) {
    let cross = (b - a).cross(&(c - a));
    let norm = cross.norm();
    let centroid = (a + b + c) / 3.0;
    let normal = if norm > 0.0 { cross / norm } else { Vec3::zeros() };
    (centroid, normal, 0.5 * norm)
}

impl TriangleMesh {
    /// Builds a mesh from indexed triangles, dropping degenerate ones.
    ///
    /// Returns the mesh and the number of dropped triangles.
    pub fn from_indexed(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<(Self, usize)> {
        let count = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&vertex) = tri.iter().find(|&&v| v >= count) {
                return Err(MeshError::InvalidIndex {
                    triangle: t,
                    vertex,
                    count,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                dropped += 1;
                continue;
            }
            let (c, n, a) = triangle_geometry(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if a <= DEGENERATE_AREA || !a.is_finite() {
                dropped += 1;
                continue;
            }
            kept.push(*tri);
            centroids.push(c);
            normals.push(n);
            areas.push(a);
        }
        if kept.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        Ok((
            TriangleMesh {
                vertices,
                triangles: kept,
                centroids,
                normals,
                areas,
            },
            dropped,
        ))
    }

    /// Builds a mesh from a triangle soup, welding vertices within
    /// [`WELD_TOLERANCE`] and dropping degenerate triangles.
    pub fn from_soup(soup: &[[Vec3; 3]]) -> Result<(Self, LoadReport)> {
        let mut welder = Welder::new(WELD_TOLERANCE);
        let triangles: Vec<[usize; 3]> = soup
            .iter()
            .map(|t| [welder.insert(t[0]), welder.insert(t[1]), welder.insert(t[2])])
            .collect();
        let input_vertices = soup.len() * 3;
        let vertices = welder.into_vertices();
        let welded = input_vertices - vertices.len();
        let (mesh, dropped) = Self::from_indexed(vertices, triangles)?;
        Ok((
            mesh,
            LoadReport {
                input_triangles: soup.len(),
                dropped_degenerate: dropped,
                welded_vertices: welded,
            },
        ))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        self.centroids[t]
    }

    pub fn normal(&self, t: usize) -> Vec3 {
        self.normals[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn centroids(&self) -> &[Vec3] {
        &self.centroids
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Tight bounds over all vertices referenced by triangles.
    pub fn bounding_box(&self) -> Result<Aabb> {
        if self.triangles.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let mut b = Aabb::empty();
        for tri in &self.triangles {
            for &v in tri {
                b.grow(&self.vertices[v]);
            }
        }
        Ok(b)
    }

    /// Reverses the winding of every triangle, negating all normals.
    pub fn flip_normals(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
            centroids: self.centroids.clone(),
            normals: self.normals.iter().map(|n| -n).collect(),
            areas: self.areas.clone(),
        }
    }

    /// Concatenates two meshes without welding.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len();
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.triangles
            .extend(other.triangles.iter().map(|t| t.map(|v| v + offset)));
        out.centroids.extend_from_slice(&other.centroids);
        out.normals.extend_from_slice(&other.normals);
        out.areas.extend_from_slice(&other.areas);
        out
    }

    /// Applies `f` to every vertex.
    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<TriangleMesh> {
        let vertices = self.vertices.iter().map(f).collect();
        Self::from_indexed(vertices, self.triangles.clone()).map(|(m, _)| m)
    }
}

/// Spatial hash that merges points within a tolerance.
struct Welder {
    tolerance: f64,
    vertices: Vec<Vec3>,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl Welder {
    fn new(tolerance: f64) -> Self {
        Welder {
            tolerance,
            vertices: Vec::new(),
            cells: HashMap::new(),
        }
    }

    fn cell(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.tolerance).floor() as i64,
            (p.y / self.tolerance).floor() as i64,
            (p.z / self.tolerance).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Vec3) -> usize {
        let key = self.cell(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let k = [key[0] + dx, key[1] + dy, key[2] + dz];
                    if let Some(ids) = self.cells.get(&k) {
                        for &id in ids {
                            if (self.vertices[id] - p).norm() <= self.tolerance {
                                return id;
                            }
                        }
                    }
                }
            }
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.cells.entry(key).or_default().push(id);
        id
    }

    fn into_vertices(self) -> Vec<Vec3> {
        self.vertices
    }
}

/// Recursive longest-edge bisection until every triangle has area at most
/// `max_area`. Uses [`DEFAULT_SUBDIVISION_CAP`].
pub fn subdivide(mesh: &TriangleMesh, max_area: f64) -> Result<TriangleMesh> {
    subdivide_capped(mesh, max_area, DEFAULT_SUBDIVISION_CAP)
}

/// [`subdivide`] with an explicit output triangle cap.
///
/// Edge midpoints are shared between the two triangles that split a common
/// edge, so conforming input stays conforming wherever both sides split.
pub fn subdivide_capped(mesh: &TriangleMesh, max_area: f64, cap: usize) -> Result<TriangleMesh> {
    if !(max_area > 0.0) || !max_area.is_finite() {
        return Err(MeshError::InvalidParameter(format!(
            "max_area must be positive, got {max_area}"
        )));
    }
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out: Vec<[usize; 3]> = Vec::with_capacity(mesh.len());

    for &root in &mesh.triangles {
        let mut stack = vec![root];
        while let Some(tri) = stack.pop() {
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if area <= max_area {
                out.push(tri);
                if out.len() > cap {
                    return Err(MeshError::SubdivisionOverflow { cap });
                }
                continue;
            }
            if out.len() + stack.len() + 2 > cap {
                return Err(MeshError::SubdivisionOverflow { cap });
            }
            // Longest edge (i, i+1); first wins on ties.
            let lens = [(b - a).norm_squared(), (c - b).norm_squared(), (a - c).norm_squared()];
            let mut e = 0;
            for i in 1..3 {
                if lens[i] > lens[e] {
                    e = i;
                }
            }
            let (p, q, r) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
            let key = (p.min(q), p.max(q));
            let m = *midpoints.entry(key).or_insert_with(|| {
                vertices.push((vertices[p] + vertices[q]) * 0.5);
                vertices.len() - 1
            });
            // Pushed in reverse so the first child is emitted first.
            stack.push([m, q, r]);
            stack.push([p, m, r]);
        }
    }
    TriangleMesh::from_indexed(vertices, out).map(|(m, _)| m)
}
