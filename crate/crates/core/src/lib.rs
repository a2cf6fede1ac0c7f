//! Offline view planning for 3D surface inspection.
//!
//! Given a triangle mesh of a building-scale structure and a camera model, the
//! pipeline groups surface triangles with spectral clustering, turns every
//! cluster into a candidate viewpoint, repairs infeasible positions with a
//! local potential field, builds the viewpoint/triangle visibility matrix and
//! finally picks a near-minimal covering subset with a genetic hyper-heuristic.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`mesh`] loading, validation, subdivision and PLY/OBJ export.
//! * [`spectral`] affinity matrices, random-walk Laplacian, eigen-embedding, k-means.
//! * [`viewgen`] candidate generation and potential-field correction.
//! * [`visibility`] four-condition visibility model with a BVH occlusion test.
//! * [`solver`] partial set covering: GA-HH, plain GA, greedy and exact search.
//! * [`planner`] the outer re-clustering loop, random-sampling baseline and reports.
//!
//! Data-parallel loops go through [`par`]; with the default `parallel` feature
//! they run on rayon, otherwise sequentially. Results are identical either way.

pub mod mesh;
pub mod par;
pub mod planner;
pub mod solver;
pub mod spectral;
pub mod synthetic;
pub mod viewgen;
pub mod visibility;

pub use mesh::{Aabb, TriangleMesh, Vec3};
pub use planner::{PlanConfig, PlanReport};
pub use solver::{ScpInstance, Solution};
pub use viewgen::Viewpoint;
pub use visibility::{CameraModel, VisibilityMatrix};
