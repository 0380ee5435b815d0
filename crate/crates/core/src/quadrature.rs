//! Gauss–Hermite rules for expectations under a standard normal law.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights such that `Σ wᵢ f(xᵢ) ≈ E[f(W)]`, `W ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Rule with `n` nodes, built by Golub–Welsch on the Jacobi matrix of the
    /// probabilists' Hermite polynomials. Exact for polynomials of degree `2n − 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        if n == 1 {
            return GaussHermite { nodes: vec![0.0], weights: vec![1.0] };
        }
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let off = (k as f64).sqrt();
            j[(k - 1, k)] = off;
            j[(k, k - 1)] = off;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Impose the exact symmetry of the rule.
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let k = n - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[k].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[k].1);
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(k: u32) -> f64 {
        (1..=k).step_by(2).map(f64::from).product()
    }

    #[test]
    fn normal_moments_are_exact() {
        for n in [2usize, 5, 16, 32, 64] {
            let gh = GaussHermite::new(n);
            for m in 0..(2 * n as u32).min(24) {
                let exact = if m % 2 == 1 { 0.0 } else { double_factorial_odd(m.saturating_sub(1)) };
                let got = gh.expect(|x| x.powi(m as i32));
                assert!((got - exact).abs() <= 1e-11 * double_factorial_odd(m + 1).max(1.0), "n={n} m={m} {got} {exact}");
            }
        }
    }

    #[test]
    fn lognormal_mean() {
        let gh = GaussHermite::new(16);
        let s = 0.3;
        let got = gh.expect(|x| (s * x).exp());
        assert!((got - (0.5 * s * s).exp()).abs() < 1e-14);
    }
}
