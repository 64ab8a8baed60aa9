//! Communication graph and the stacked protocol matrices.
//!
//! Estimates are stacked row-major: entry `(i, j)` of the `N x N` estimate
//! matrix (player `i`'s estimate of player `j`) sits at index `i*N + j` of
//! the `N^2` vector. `A0` enumerates `a_ij` in the same order.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected, connected, weighted communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: DMatrix<f64>,
}

impl Topology {
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::InvalidTopology(format!("adjacency must be square, got {}x{}", n, adjacency.ncols())));
        }
        if n < 2 {
            return Err(Error::InvalidTopology("need at least 2 players".into()));
        }
        if adjacency.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adjacency"));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidTopology(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if a < 0.0 {
                    return Err(Error::InvalidTopology(format!("negative weight a[{i}][{j}] = {a}")));
                }
                if a != adjacency[(j, i)] {
                    return Err(Error::InvalidTopology(format!(
                        "asymmetric weights a[{i}][{j}] = {a} vs a[{j}][{i}] = {}",
                        adjacency[(j, i)]
                    )));
                }
            }
        }
        let topo = Self { adjacency };
        if !topo.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(topo)
    }

    /// Builds the graph from an undirected edge list `(i, j, weight)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidTopology(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if i == j {
                return Err(Error::InvalidTopology(format!("self-loop at node {i}")));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidTopology(format!("edge ({i}, {j}) has non-positive weight {w}")));
            }
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        Self::from_adjacency(a)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Self::path(n);
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).sum()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.degree(i) } else { -self.adjacency[(i, j)] })
    }

    fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if self.adjacency[(i, j)] > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Supremum of gains `h` for which `rho(I - h S) < 1` is guaranteed:
    /// `min over edges (i, j) of 1 / (sum_l a_il + a_ij)`.
    pub fn h_max(&self) -> f64 {
        let n = self.n();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let deg = self.degree(i);
            for j in 0..n {
                let a = self.adjacency[(i, j)];
                if a > 0.0 {
                    best = best.min(1.0 / (deg + a));
                }
            }
        }
        best
    }

    /// Stacked protocol matrices for gain `h`.
    pub fn build_matrices(&self, h: f64) -> Result<ProtocolMatrices> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter { name: "h", reason: format!("must be positive, got {h}") });
        }
        let n = self.n();
        let nn = n * n;
        let laplacian = self.laplacian();
        let a0_diag: Vec<f64> = (0..nn).map(|k| self.adjacency[(k / n, k % n)]).collect();
        let a0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(a0_diag));
        let s = laplacian.kronecker(&DMatrix::<f64>::identity(n, n)) + &a0;
        let eye = DMatrix::<f64>::identity(nn, nn);
        let h_matrix = &eye - &s * h;
        let g_matrix = &eye + &s * h;
        Ok(ProtocolMatrices { h, laplacian, a0, s, h_matrix, g_matrix })
    }
}

/// `L`, `A0`, `S = L (x) I + A0`, `H = I - hS` and `G = I + hS`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolMatrices {
    pub h: f64,
    pub laplacian: DMatrix<f64>,
    pub a0: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub h_matrix: DMatrix<f64>,
    pub g_matrix: DMatrix<f64>,
}

/// Spectral norms of the protocol matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    pub h: f64,
    pub g: f64,
    pub s: f64,
    pub a0: f64,
}

impl ProtocolMatrices {
    pub fn norms(&self) -> MatrixNorms {
        let norm = |m: &DMatrix<f64>| spectral_norm(m).expect("protocol matrices are finite");
        MatrixNorms { h: norm(&self.h_matrix), g: norm(&self.g_matrix), s: norm(&self.s), a0: norm(&self.a0) }
    }
}

/// Largest singular value of a square matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    if m.is_square() && *m == m.transpose() {
        let eig = m.clone().symmetric_eigenvalues();
        return Ok(eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())));
    }
    Ok(m.singular_values().max())
}

/// Spectral radius of a symmetric matrix.
pub fn symmetric_spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
