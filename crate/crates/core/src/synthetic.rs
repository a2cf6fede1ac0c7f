//! Synthetic test geometry: plates, boxes, a gabled house and an L-shaped
//! tower. All meshes use outward (counter-clockwise) winding, with the z axis
//! pointing up and the ground at z = 0 for the building models.

use crate::mesh::{TriangleMesh, Vec3};

/// Accumulates quads and triangles into an indexed mesh.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn vertex(&mut self, p: Vec3) -> usize {
        if let Some(i) = self.vertices.iter().position(|v| (v - p).norm() < 1e-9) {
            return i;
        }
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    pub fn triangle(&mut self, a: Vec3, b: Vec3, c: Vec3) -> &mut Self {
        let t = [self.vertex(a), self.vertex(b), self.vertex(c)];
        self.triangles.push(t);
        self
    }

    /// Counter-clockwise quad seen from the side its normal points to.
    pub fn quad(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> &mut Self {
        self.triangle(a, b, c).triangle(a, c, d)
    }

    /// Axis-aligned box faces; `bottom`/`top` toggle the horizontal faces.
    pub fn boxed(&mut self, min: Vec3, max: Vec3, bottom: bool, top: bool) -> &mut Self {
        let p = |i: usize, j: usize, k: usize| {
            Vec3::new(
                if i == 0 { min.x } else { max.x },
                if j == 0 { min.y } else { max.y },
                if k == 0 { min.z } else { max.z },
            )
        };
        if bottom {
            self.quad(p(0, 0, 0), p(0, 1, 0), p(1, 1, 0), p(1, 0, 0));
        }
        if top {
            self.quad(p(0, 0, 1), p(1, 0, 1), p(1, 1, 1), p(0, 1, 1));
        }
        self.quad(p(0, 0, 0), p(1, 0, 0), p(1, 0, 1), p(0, 0, 1));
        self.quad(p(0, 1, 0), p(0, 1, 1), p(1, 1, 1), p(1, 1, 0));
        self.quad(p(0, 0, 0), p(0, 0, 1), p(0, 1, 1), p(0, 1, 0));
        self.quad(p(1, 0, 0), p(1, 1, 0), p(1, 1, 1), p(1, 0, 1))
    }

    pub fn build(&self) -> TriangleMesh {
        TriangleMesh::from_indexed(self.vertices.clone(), self.triangles.clone())
            .expect("synthetic geometry is valid")
            .0
    }
}

/// Closed unit cube `[0,1]³`, 12 triangles.
pub fn unit_cube() -> TriangleMesh {
    closed_box(Vec3::zeros(), Vec3::repeat(1.0))
}

pub fn closed_box(min: Vec3, max: Vec3) -> TriangleMesh {
    MeshBuilder::new().boxed(min, max, true, true).build()
}

/// Box with no top face (e.g. a courtyard or an empty container).
pub fn open_box(min: Vec3, max: Vec3) -> TriangleMesh {
    MeshBuilder::new().boxed(min, max, true, false).build()
}

/// Horizontal `width × depth` rectangle at height `z`, normal +z, 2 triangles.
pub fn flat_plate(width: f64, depth: f64, z: f64) -> TriangleMesh {
    MeshBuilder::new()
        .quad(
            Vec3::new(0.0, 0.0, z),
            Vec3::new(width, 0.0, z),
            Vec3::new(width, depth, z),
            Vec3::new(0.0, depth, z),
        )
        .build()
}

/// Gabled house standing on the ground (no floor face). The ridge runs along x.
pub fn house(width: f64, depth: f64, wall_height: f64, ridge_height: f64) -> TriangleMesh {
    let (w, d, h, r) = (width, depth, wall_height, ridge_height);
    let v = Vec3::new;
    let mut b = MeshBuilder::new();
    b.boxed(Vec3::zeros(), v(w, d, h), false, false);
    b.quad(v(0.0, 0.0, h), v(w, 0.0, h), v(w, d / 2.0, r), v(0.0, d / 2.0, r));
    b.quad(v(w, d, h), v(0.0, d, h), v(0.0, d / 2.0, r), v(w, d / 2.0, r));
    b.triangle(v(0.0, 0.0, h), v(0.0, d / 2.0, r), v(0.0, d, h));
    b.triangle(v(w, 0.0, h), v(w, d, h), v(w, d / 2.0, r));
    b.build()
}

/// The default house used by the comparison experiments: 30 × 20 m
/// footprint, 12 m eaves, 20 m ridge.
pub fn default_house() -> TriangleMesh {
    house(30.0, 20.0, 12.0, 20.0)
}

/// L-shaped flat-roofed tower: the `arm × arm` square footprint minus its
/// upper-right `arm/2 × arm/2` quadrant, extruded to `height`.
pub fn l_tower(arm: f64, height: f64) -> TriangleMesh {
    let a = arm;
    let half = arm / 2.0;
    let outline = [
        (0.0, 0.0),
        (a, 0.0),
        (a, half),
        (half, half),
        (half, a),
        (0.0, a),
    ];
    let v = Vec3::new;
    let mut b = MeshBuilder::new();
    for i in 0..outline.len() {
        let (px, py) = outline[i];
        let (qx, qy) = outline[(i + 1) % outline.len()];
        b.quad(v(px, py, 0.0), v(qx, qy, 0.0), v(qx, qy, height), v(px, py, height));
    }
    let roof = |b: &mut MeshBuilder, x0: f64, y0: f64, x1: f64, y1: f64| {
        b.quad(v(x0, y0, height), v(x1, y0, height), v(x1, y1, height), v(x0, y1, height));
    };
    roof(&mut b, 0.0, 0.0, half, half);
    roof(&mut b, half, 0.0, a, half);
    roof(&mut b, 0.0, half, half, a);
    b.build()
}

/// The default L-tower used by the comparison experiments: 40 m arms, 36 m tall.
pub fn default_l_tower() -> TriangleMesh {
    l_tower(40.0, 36.0)
}

/// A closed box with a smaller closed box sealed inside it. The inner box
/// cannot be seen from anywhere outside the outer one.
pub fn box_with_cavity(outer_min: Vec3, outer_max: Vec3, inner_half: f64) -> TriangleMesh {
    let c = (outer_min + outer_max) * 0.5;
    MeshBuilder::new()
        .boxed(outer_min, outer_max, true, true)
        .boxed(c - Vec3::repeat(inner_half), c + Vec3::repeat(inner_half), true, true)
        .build()
}

/// Names accepted by [`by_name`].
pub const SHAPES: [&str; 6] = ["plate", "open-box", "cube", "house", "l-tower", "cavity"];

/// Building-scale instances of every synthetic shape, by name.
pub fn by_name(name: &str) -> Option<TriangleMesh> {
    Some(match name {
        "plate" => flat_plate(10.0, 10.0, 0.0),
        "open-box" => open_box(Vec3::zeros(), Vec3::new(20.0, 20.0, 10.0)),
        "cube" => closed_box(Vec3::new(0.0, 0.0, 10.0), Vec3::new(10.0, 10.0, 20.0)),
        "house" => default_house(),
        "l-tower" => default_l_tower(),
        "cavity" => box_with_cavity(Vec3::new(0.0, 0.0, 10.0), Vec3::new(10.0, 10.0, 20.0), 1.0),
        _ => return None,
    })
}
