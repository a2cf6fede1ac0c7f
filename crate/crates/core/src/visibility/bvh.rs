//! Bounding volume hierarchy over mesh triangles for any-hit segment queries.

use crate::mesh::{Aabb, TriangleMesh, Vec3};

use super::ray_triangle_intersect;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Immutable BVH; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    triangles: Vec<[Vec3; 3]>,
}

impl Bvh {
    /// Median split on the longest axis of the centroid bounds.
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.len()).map(|t| mesh.triangle_points(t)).collect();
        let mut order: Vec<usize> = (0..mesh.len()).collect();
        let mut nodes = Vec::with_capacity(2 * mesh.len() / LEAF_SIZE + 1);
        if !order.is_empty() {
            build_node(&mut nodes, &mut order, 0, mesh.len(), &triangles, mesh.centroids());
        }
        Bvh { nodes, order, triangles }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Whether any triangle other than `exclude` is hit at a ray parameter in
    /// `(eps_ray, t_max)`. `dir` must be unit length.
    pub fn segment_blocked(&self, origin: &Vec3, dir: &Vec3, t_max: f64, exclude: usize, eps_ray: f64) -> bool {
        if self.nodes.is_empty() || t_max <= eps_ray {
            return false;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bounds().hit_by_ray(origin, &inv, t_max) {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        if t == exclude {
                            continue;
                        }
                        if let Some(hit) = ray_triangle_intersect(origin, dir, &self.triangles[t], eps_ray) {
                            if hit < t_max {
                                return true;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    triangles: &[[Vec3; 3]],
    centroids: &[Vec3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        for p in &triangles[t] {
            bounds.grow(p);
        }
        cbounds.grow(&centroids[t]);
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let axis = cbounds.longest_axis();
    let mid = (start + end) / 2;
    order[start..end].sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build_node(nodes, order, start, mid, triangles, centroids);
    let right = build_node(nodes, order, mid, end, triangles, centroids);
    nodes[id] = Node::Inner { bounds, left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::subdivide;
    use crate::synthetic;

    #[test]
    fn blocked_matches_linear_scan() {
        let mesh = subdivide(&synthetic::default_house(), 30.0).unwrap();
        let bvh = Bvh::build(&mesh);
        let origin = Vec3::new(-20.0, -15.0, 25.0);
        for t in 0..mesh.len() {
            let to = mesh.centroid(t) - origin;
            let dist = to.norm();
            let dir = to / dist;
            let linear = (0..mesh.len()).any(|o| {
                o != t
                    && ray_triangle_intersect(&origin, &dir, &mesh.triangle_points(o), 1e-6)
                        .is_some_and(|h| h < dist - 1e-4)
            });
            assert_eq!(bvh.segment_blocked(&origin, &dir, dist - 1e-4, t, 1e-6), linear, "triangle {t}");
        }
    }
}
