//! Gauss-Hermite quadrature for one-dimensional Gaussian expectations.
//!
//! Nodes and weights are for the physicists' convention, i.e. they integrate
//! `exp(-x^2) f(x)` over the real line. [`GaussHermite::expect`] rescales to
//! expectations under an arbitrary `N(mean, var)`.

use std::f64::consts::PI;

/// A fixed Gauss-Hermite rule.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule by Newton iteration on the Hermite recurrence.
    ///
    /// Supports `n` up to 180; the extrapolated initial guesses lose the
    /// root ordering beyond that and the iteration can land on a wrong root.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "quadrature needs at least one node");
        assert!(n <= 180, "node counts above 180 are not supported");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            // Initial guesses for the i-th largest root, then Newton.
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                // Orthonormal Hermite recurrence up to degree n.
                let mut p1 = PI.powf(-0.25);
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `exp(-x^2) f(x)` over the real line.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Expectation `E[f(X)]` for `X ~ N(mean, var)`.
    ///
    /// `var = 0` degenerates to a point evaluation at the mean.
    pub fn expect<F: Fn(f64) -> f64>(&self, mean: f64, var: f64, f: F) -> f64 {
        assert!(var >= 0.0, "variance must be nonnegative");
        if var == 0.0 {
            return f(mean);
        }
        let s = (2.0 * var).sqrt();
        self.integrate(|x| f(mean + s * x)) / PI.sqrt()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 7, 61, 122] {
            let gh = GaussHermite::new(n);
            let total: f64 = gh.weights().iter().sum();
            assert!(
                (total - PI.sqrt()).abs() < 1e-12,
                "n={n}: weight sum {total}"
            );
        }
    }

    #[test]
    fn gaussian_moments() {
        let gh = GaussHermite::new(61);
        // E[X^2] under N(3, 4) = 4 + 9
        let m2 = gh.expect(3.0, 4.0, |x| x * x);
        assert!((m2 - 13.0).abs() < 1e-10);
        // E[X^4] under N(0, 1) = 3
        let m4 = gh.expect(0.0, 1.0, |x| x.powi(4));
        assert!((m4 - 3.0).abs() < 1e-10);
    }

    #[test]
    fn polynomial_exactness() {
        // An n-point rule integrates polynomials of degree 2n-1 exactly.
        let gh = GaussHermite::new(5);
        let val = gh.integrate(|x| x.powi(8));
        // int x^8 e^{-x^2} = 105/16 sqrt(pi)
        assert!((val - 105.0 / 16.0 * PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn smooth_integrand_converges_with_doubling() {
        let f = |x: f64| (x * 0.7).cos() * (-0.3 * x).exp();
        let a = GaussHermite::new(61).expect(0.1, 2.0, f);
        let b = GaussHermite::new(122).expect(0.1, 2.0, f);
        assert!(((a - b) / b).abs() < 1e-12);
    }

    #[test]
    fn degenerate_variance_is_point_mass() {
        let gh = GaussHermite::new(61);
        assert_eq!(gh.expect(2.5, 0.0, |x| x * x), 6.25);
    }
}
