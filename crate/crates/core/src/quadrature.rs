//! Gauss quadrature rules built from the Jacobi matrix of the orthogonal
//! polynomial family (Golub-Welsch).

use ndarray::Array2;

use crate::linalg::hermitian_eigen;
use crate::scalar::C;

/// Nodes and weights (summing to one) of a probability-weighted rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().copied().zip(self.weights.iter().copied()).collect()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn golub_welsch(n: usize, off_diagonal: impl Fn(usize) -> f64) -> Rule {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut j = Array2::from_elem((n, n), C::new(0.0, 0.0));
    for i in 1..n {
        let b = off_diagonal(i);
        j[[i - 1, i]] = C::new(b, 0.0);
        j[[i, i - 1]] = C::new(b, 0.0);
    }
    let eig = hermitian_eigen(&j);
    let weights: Vec<f64> = (0..n).map(|k| eig.vectors[[0, k]].norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    Rule { nodes: eig.values, weights: weights.into_iter().map(|w| w / total).collect() }
}

/// Rule for the standard normal distribution (probabilists' Hermite).
pub fn gauss_hermite_normal(n: usize) -> Rule {
    golub_welsch(n, |i| (i as f64).sqrt())
}

/// Rule for the uniform distribution on `[-1, 1]` (Legendre).
pub fn gauss_legendre_uniform(n: usize) -> Rule {
    golub_welsch(n, |i| {
        let i = i as f64;
        i / (4.0 * i * i - 1.0).sqrt()
    })
}

/// Rule for `N(mean, stddev²)`.
pub fn normal_rule(mean: f64, stddev: f64, n: usize) -> Rule {
    let r = gauss_hermite_normal(n);
    Rule { nodes: r.nodes.iter().map(|x| mean + stddev * x).collect(), weights: r.weights }
}

/// Rule for the uniform distribution on `[lo, hi]`.
pub fn uniform_rule(lo: f64, hi: f64, n: usize) -> Rule {
    let r = gauss_legendre_uniform(n);
    let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    Rule { nodes: r.nodes.iter().map(|x| mid + half * x).collect(), weights: r.weights }
}
