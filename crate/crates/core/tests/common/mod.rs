#![allow(dead_code)]

use distobs::graph::Digraph;
use distobs::leader::LeaderSystem;
use distobs::riccati::is_detectable;
use distobs::{Matrix, Vector};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn uniform_vector<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(lo..hi))
}

/// Edge set drawn independently with probability `density`; no guarantee of
/// reachability.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64) -> Digraph {
    let mut g = Digraph::new(n).unwrap();
    for to in 1..=n {
        for from in 0..=n {
            if from != to && rng.random_bool(density) {
                g.add_edge(from, to, rng.random_range(0.2..2.0)).unwrap();
            }
        }
    }
    g
}

/// Random tree hanging off the leader plus extra random edges.
pub fn random_rooted_digraph<R: Rng>(rng: &mut R, n: usize) -> Digraph {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut g = Digraph::new(n).unwrap();
    for (k, &node) in order.iter().enumerate() {
        // parent is the leader or an earlier node in the shuffled order
        let pick = rng.random_range(0..=k);
        let parent = if pick == k { 0 } else { order[pick] };
        g.add_edge(parent, node, rng.random_range(0.2..2.0)).unwrap();
    }
    for to in 1..=n {
        for from in 0..=n {
            if from != to && g.weight(to, from) == 0.0 && rng.random_bool(0.2) {
                g.add_edge(from, to, rng.random_range(0.2..2.0)).unwrap();
            }
        }
    }
    g
}

/// Rejection-sampled detectable pair `(C, A)` with entries in `[-1, 1]`.
pub fn random_detectable_pair<R: Rng>(rng: &mut R, n: usize, p: usize) -> (Matrix, Matrix) {
    loop {
        let a = uniform_matrix(rng, n, n, -1.0, 1.0);
        let c = uniform_matrix(rng, p, n, -1.0, 1.0);
        if is_detectable(&a, &c).unwrap() {
            return (c, a);
        }
    }
}

/// Random leader; half the draws repeat a block so the minimal polynomial has
/// lower degree than `q`.
pub fn random_leader<R: Rng>(rng: &mut R, q: usize, p: usize) -> LeaderSystem {
    let s0 = if q >= 2 && q % 2 == 0 && rng.random_bool(0.5) {
        let b = uniform_matrix(rng, q / 2, q / 2, -1.0, 1.0);
        let mut s = Matrix::zeros(q, q);
        s.view_mut((0, 0), (q / 2, q / 2)).copy_from(&b);
        s.view_mut((q / 2, q / 2), (q / 2, q / 2)).copy_from(&b);
        s
    } else {
        uniform_matrix(rng, q, q, -1.0, 1.0)
    };
    let c0 = uniform_matrix(rng, p, q, -1.0, 1.0);
    let v0 = uniform_vector(rng, q, -1.0, 1.0);
    LeaderSystem::new(s0, c0, v0).unwrap()
}
