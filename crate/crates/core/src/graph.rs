//! Leader-rooted communication digraphs.
//!
//! Node `0` is the leader and nodes `1..=N` are followers. A weight
//! `a_ij > 0` means follower `i` receives data from node `j`, so the
//! consensus terms read `Σ_j a_ij (x_j - x_i)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::{spectrum, Matrix};

/// Weighted digraph over `{0, 1, …, N}` with the leader at node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    n_followers: usize,
    // Row i-1 holds a_ij for follower i, j = 0..=N.
    weights: Vec<Vec<f64>>,
}

impl Digraph {
    pub fn new(n_followers: usize) -> Result<Self> {
        if n_followers == 0 {
            return Err(Error::InvalidArgument(
                "graph needs at least one follower".into(),
            ));
        }
        Ok(Self {
            n_followers,
            weights: vec![vec![0.0; n_followers + 1]; n_followers],
        })
    }

    /// Builds a graph from `(from, to, weight)` triples.
    pub fn from_edges(n_followers: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new(n_followers)?;
        for &(from, to, w) in edges {
            g.add_edge(from, to, w)?;
        }
        Ok(g)
    }

    /// Unit-weight graph from `(from, to)` pairs.
    pub fn from_unit_edges(n_followers: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(n_followers)?;
        for &(from, to) in edges {
            g.add_edge(from, to, 1.0)?;
        }
        Ok(g)
    }

    /// Adds (or overwrites) the edge `from → to`.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) -> Result<()> {
        let n = self.n_followers;
        if from > n || to > n {
            return Err(Error::InvalidArgument(format!(
                "edge {from} -> {to} references a node outside 0..={n}"
            )));
        }
        if to == 0 {
            return Err(Error::InvalidArgument(format!(
                "edge {from} -> 0: the leader does not receive"
            )));
        }
        if from == to {
            return Err(Error::InvalidArgument(format!("self-loop on node {to}")));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "edge {from} -> {to} has invalid weight {weight}"
            )));
        }
        self.weights[to - 1][from] = weight;
        Ok(())
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    /// `a_ij` for follower `i ∈ 1..=N` and node `j ∈ 0..=N`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i - 1][j]
    }

    /// Nonzero in-neighbors `(j, a_ij)` of follower `i`, in ascending `j`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights[i - 1]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(j, &w)| (j, w))
    }

    /// All edges `(from, to, weight)` in follower-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (1..=self.n_followers)
            .flat_map(|i| self.neighbors(i).map(move |(j, w)| (j, i, w)))
            .collect()
    }
}

/// Laplacian `L̄`, its trailing block `H`, and `δ_H = min Re σ(H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    pub laplacian: Matrix,
    pub h: Matrix,
    pub delta_h: f64,
}

pub fn build_network_matrices(g: &Digraph) -> Result<NetworkMatrices> {
    let n = g.n_followers();
    let mut laplacian = Matrix::zeros(n + 1, n + 1);
    for i in 1..=n {
        let mut degree = 0.0;
        for (j, w) in g.neighbors(i) {
            laplacian[(i, j)] = -w;
            degree += w;
        }
        laplacian[(i, i)] = degree;
    }
    let h = laplacian.view((1, 1), (n, n)).into_owned();
    let delta_h = spectrum(&h)?.min_re();
    Ok(NetworkMatrices {
        laplacian,
        h,
        delta_h,
    })
}

/// Whether every follower is reachable from the leader.
pub fn has_spanning_tree(g: &Digraph) -> bool {
    let n = g.n_followers();
    let mut seen = vec![false; n + 1];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(j) = queue.pop_front() {
        for i in 1..=n {
            if !seen[i] && g.weight(i, j) > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Nonpositive off-diagonal entries and spectrum strictly in the open right half-plane.
pub fn is_m_matrix(a: &Matrix) -> Result<bool> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(
            "is_m_matrix",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(spectrum(a)?.min_re() > 0.0)
}

/// Reference topology: chain `0→1→2→3→4` closed by `4→1`.
pub fn reference_graph() -> Digraph {
    Digraph::from_unit_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 1)])
        .expect("reference edges are valid")
}
