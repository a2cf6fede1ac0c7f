//! Spectral clustering of surface triangles.
//!
//! Pipeline: weighted distance/normal-angle cost matrix, Gaussian similarity,
//! random-walk Laplacian `L_rw = I - D⁻¹W`, eigen-embedding and k-means.
//!
//! `L_rw` is not symmetric, so its spectrum is obtained from the similar
//! symmetric matrix `D^{-1/2} W D^{-1/2}` with a dense symmetric solver;
//! eigenvectors are mapped back through `u = D^{-1/2} v`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::par::Execution;

/// Largest subset handed to the dense eigensolver.
pub const MAX_DENSE_SIZE: usize = 2000;

/// Eigenvalues at or below this are treated as zero and skipped.
pub const ZERO_EIGENVALUE: f64 = 1e-10;

const EIGEN_TOLERANCE: f64 = f64::EPSILON;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("all centroids in the subset coincide")]
    DegenerateSubset,
    #[error("subset has {got} triangles, need at least {need}")]
    SubsetTooSmall { need: usize, got: usize },
    #[error("row {0} of the similarity matrix has zero degree")]
    ZeroDegreeRow(usize),
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("only {available} non-zero eigenvalues available, {k} requested")]
    NotEnoughEigenvectors { k: usize, available: usize },
    #[error("subset of {n} triangles exceeds the dense solver limit of {max}; split the subset first")]
    TooLarge { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = SpectralError> = std::result::Result<T, E>;

/// Which end of the non-zero spectrum feeds the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenvectorOrder {
    /// The k smallest eigenvalues strictly above [`ZERO_EIGENVALUE`].
    #[default]
    SmallestNonzero,
    /// The k largest eigenvalues.
    Largest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Weight of the distance term, in (0, 1).
    pub theta: f64,
    /// Gaussian bandwidth on normalized costs.
    pub sigma: f64,
    pub k: usize,
    pub kmeans_max_iter: usize,
    pub seed: u64,
    pub eigenvector_order: EigenvectorOrder,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            theta: 0.5,
            sigma: 0.35,
            k: 1,
            kmeans_max_iter: 100,
            seed: 0,
            eigenvector_order: EigenvectorOrder::SmallestNonzero,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(SpectralError::InvalidParameter(format!("theta must be in (0,1), got {}", self.theta)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(SpectralError::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.k < 1 {
            return Err(SpectralError::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Partition of subset positions `0..n` into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl ClusterAssignment {
    pub fn from_labels(labels: Vec<usize>, k: usize) -> Self {
        let mut members = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        ClusterAssignment { labels, members }
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Members of cluster `c` translated back to triangle indices.
    pub fn triangles_of(&self, c: usize, subset: &[usize]) -> Vec<usize> {
        self.members[c].iter().map(|&p| subset[p]).collect()
    }
}

/// `G_ij = θ·ŝ_ij + (1−θ)·γ̂_ij` with the centroid distance normalized by the
/// subset's largest pairwise distance and the normal angle normalized by π.
pub fn cost_matrix(mesh: &TriangleMesh, subset: &[usize], theta: f64) -> Result<DMatrix<f64>> {
    if subset.len() < 2 {
        return Err(SpectralError::SubsetTooSmall { need: 2, got: subset.len() });
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(SpectralError::InvalidParameter(format!("theta must be in (0,1), got {theta}")));
    }
    let n = subset.len();
    let centroids: Vec<_> = subset.iter().map(|&t| mesh.centroid(t)).collect();
    let normals: Vec<_> = subset.iter().map(|&t| mesh.normal(t)).collect();

    // Upper-triangle rows; each entry is computed once and mirrored.
    let rows = Execution::default().map_range(n, |i| {
        (i + 1..n)
            .map(|j| {
                let dist = (centroids[i] - centroids[j]).norm();
                let cos = normals[i].dot(&normals[j]).clamp(-1.0, 1.0);
                (dist, cos.acos() / std::f64::consts::PI)
            })
            .collect::<Vec<_>>()
    });
    let max_dist = rows
        .iter()
        .flat_map(|r| r.iter().map(|&(d, _)| d))
        .fold(0.0f64, f64::max);
    if max_dist <= 0.0 {
        return Err(SpectralError::DegenerateSubset);
    }
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (o, &(dist, angle)) in row.iter().enumerate() {
            let j = i + 1 + o;
            let v = theta * (dist / max_dist) + (1.0 - theta) * angle;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Gaussian kernel `W_ij = exp(−G_ij² / 2σ²)`.
pub fn similarity_matrix(cost: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let two_s2 = 2.0 * sigma * sigma;
    let n = cost.nrows();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = (-(cost[(i, i)] * cost[(i, i)]) / two_s2).exp();
        for j in i + 1..n {
            let v = (-(cost[(i, j)] * cost[(i, j)]) / two_s2).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

/// Random-walk Laplacian together with the degrees it was built from.
#[derive(Debug, Clone)]
pub struct RwLaplacian {
    /// `I − D⁻¹W`.
    pub matrix: DMatrix<f64>,
    pub degrees: DVector<f64>,
    /// The symmetric similarity the Laplacian came from.
    pub similarity: DMatrix<f64>,
}

pub fn rw_laplacian(w: &DMatrix<f64>) -> Result<RwLaplacian> {
    let n = w.nrows();
    let degrees = DVector::from_iterator(n, w.row_iter().map(|r| r.sum()));
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(SpectralError::ZeroDegreeRow(i));
    }
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let p = w[(i, j)] / degrees[i];
            l[(i, j)] = if i == j { 1.0 - p } else { -p };
        }
    }
    Ok(RwLaplacian {
        matrix: l,
        degrees,
        similarity: w.clone(),
    })
}

/// Full spectrum of `L_rw`: eigenvalues ascending and matching eigenvectors
/// (columns, unit Euclidean norm, sign fixed so the largest entry is positive).
pub fn rw_spectrum(lap: &RwLaplacian) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = lap.degrees.len();
    if n > MAX_DENSE_SIZE {
        return Err(SpectralError::TooLarge { n, max: MAX_DENSE_SIZE });
    }
    let inv_sqrt: Vec<f64> = lap.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = lap.similarity[(i, i)] * inv_sqrt[i] * inv_sqrt[i];
        for j in i + 1..n {
            let v = lap.similarity[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::try_new(s, EIGEN_TOLERANCE, EIGEN_MAX_ITER).ok_or(SpectralError::EigenFailure)?;

    // L_sym = I − S shares its eigenvalues with L_rw.
    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 - l).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut vectors = DMatrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        sorted.push(values[src]);
        let mut u = DVector::from_iterator(n, (0..n).map(|r| eig.eigenvectors[(r, src)] * inv_sqrt[r]));
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        let pivot = u
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > u[best].abs() + 1e-12 { i } else { best });
        if u[pivot] < 0.0 {
            u = -u;
        }
        vectors.set_column(col, &u);
    }
    Ok((sorted, vectors))
}

/// Embeds each node as a row of `k` eigenvector entries of `L_rw`.
pub fn spectral_embed(lap: &RwLaplacian, k: usize, order: EigenvectorOrder) -> Result<DMatrix<f64>> {
    let n = lap.degrees.len();
    if k >= n {
        return Err(SpectralError::SubsetTooSmall { need: k + 1, got: n });
    }
    let (values, vectors) = rw_spectrum(lap)?;
    let nonzero: Vec<usize> = (0..n).filter(|&i| values[i] > ZERO_EIGENVALUE).collect();
    if nonzero.len() < k {
        return Err(SpectralError::NotEnoughEigenvectors {
            k,
            available: nonzero.len(),
        });
    }
    let picked: Vec<usize> = match order {
        EigenvectorOrder::SmallestNonzero => nonzero[..k].to_vec(),
        EigenvectorOrder::Largest => nonzero[nonzero.len() - k..].iter().rev().copied().collect(),
    };
    let mut out = DMatrix::zeros(n, k);
    for (c, &src) in picked.iter().enumerate() {
        out.set_column(c, &vectors.column(src));
    }
    Ok(out)
}

fn sq_dist(points: &DMatrix<f64>, row: usize, center: &[f64]) -> f64 {
    center
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let d = points[(row, c)] - v;
            d * d
        })
        .sum()
}

/// Lloyd's k-means with k-means++ seeding over the rows of `points`.
///
/// Never returns an empty cluster: an emptied centroid is re-seeded at the
/// point farthest from its own centroid.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize) -> ClusterAssignment {
    let n = points.nrows();
    let dim = points.ncols();
    assert!(k >= 1 && n >= k, "kmeans needs 1 <= k <= n (k={k}, n={n})");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = |i: usize| -> Vec<f64> { (0..dim).map(|c| points[(i, c)]).collect() };

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = vec![row(rng.gen_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if r < acc {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centers.push(row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(points, i, centers.last().unwrap()));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..n {
            let current = labels[i];
            let mut best = if current < k { current } else { 0 };
            let mut best_d = sq_dist(points, i, &centers[best]);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(points, i, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if best != current {
                labels[i] = best;
                changed = true;
            }
        }
        changed |= repair_empty(points, &mut labels, &mut centers);
        if !changed {
            break;
        }
        update_centers(points, &labels, &mut centers);
    }
    repair_empty(points, &mut labels, &mut centers);
    ClusterAssignment::from_labels(labels, k)
}

fn update_centers(points: &DMatrix<f64>, labels: &[usize], centers: &mut [Vec<f64>]) {
    let dim = points.ncols();
    let mut sums = vec![vec![0.0; dim]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for c in 0..dim {
            sums[l][c] += points[(i, c)];
        }
    }
    for (j, center) in centers.iter_mut().enumerate() {
        if counts[j] > 0 {
            for c in 0..dim {
                center[c] = sums[j][c] / counts[j] as f64;
            }
        }
    }
}

/// Moves the farthest-from-centroid point of a multi-member cluster into each
/// empty cluster. Returns whether anything moved.
fn repair_empty(points: &DMatrix<f64>, labels: &mut [usize], centers: &mut [Vec<f64>]) -> bool {
    let k = centers.len();
    let mut moved = false;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return moved;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] > 1 {
                let d = sq_dist(points, i, &centers[l]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        let i = far.expect("n >= k guarantees a multi-member cluster");
        labels[i] = empty;
        centers[empty] = (0..points.ncols()).map(|c| points[(i, c)]).collect();
        moved = true;
    }
}

/// Clusters `subset` (triangle indices) into `params.k` groups. Labels are
/// indexed by position in `subset`.
pub fn cluster_mesh(mesh: &TriangleMesh, subset: &[usize], params: &ClusterParams) -> Result<ClusterAssignment> {
    params.validate()?;
    let n = subset.len();
    let k = params.k;
    if n < k {
        return Err(SpectralError::SubsetTooSmall { need: k, got: n });
    }
    if n == k {
        return Ok(ClusterAssignment::from_labels((0..n).collect(), k));
    }
    if k == 1 {
        return Ok(ClusterAssignment::from_labels(vec![0; n], 1));
    }
    if n > MAX_DENSE_SIZE {
        return Err(SpectralError::TooLarge { n, max: MAX_DENSE_SIZE });
    }
    let g = cost_matrix(mesh, subset, params.theta)?;
    let w = similarity_matrix(&g, params.sigma);
    let lap = rw_laplacian(&w)?;
    let embedding = spectral_embed(&lap, k, params.eigenvector_order)?;
    Ok(kmeans(&embedding, k, params.seed, params.kmeans_max_iter))
}
