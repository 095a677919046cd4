use std::sync::OnceLock;

use super::quadrature::GaussLegendre;

/// Gauss-Legendre nodes on [0, 1] with the matching spectral integration matrix.
///
/// `matrix[m][j] = ∫_0^{t_m} L_j(s) ds` for the Lagrange basis on the nodes, so
/// values of a smooth function at the nodes give its running integral at the nodes.
#[derive(Debug, Clone)]
pub struct Collocation {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
}

impl Collocation {
    pub fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let nodes: Vec<f64> = gl.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let weights: Vec<f64> = gl.weights.iter().map(|w| 0.5 * w).collect();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let p: f64 = (0..n)
                    .filter(|&k| k != j)
                    .map(|k| nodes[j] - nodes[k])
                    .product();
                1.0 / p
            })
            .collect();
        let mut c = Self {
            nodes,
            weights,
            bary,
            matrix: Vec::new(),
        };
        c.matrix = c
            .nodes
            .clone()
            .iter()
            .map(|&t| c.partial_weights(t))
            .collect();
        c
    }

    pub fn cached(n: usize) -> &'static Collocation {
        static RULES: [OnceLock<Collocation>; 33] = [const { OnceLock::new() }; 33];
        assert!((2..=32).contains(&n));
        RULES[n].get_or_init(|| Collocation::new(n))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lagrange basis values at `s`.
    pub fn basis(&self, s: f64) -> Vec<f64> {
        let n = self.nodes.len();
        if let Some(j) = self.nodes.iter().position(|&t| t == s) {
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            return v;
        }
        let terms: Vec<f64> = (0..n).map(|j| self.bary[j] / (s - self.nodes[j])).collect();
        let total: f64 = terms.iter().sum();
        terms.iter().map(|t| t / total).collect()
    }

    /// Weights `w_j` with `∫_0^tau p = Σ w_j p(t_j)` for the interpolant `p`.
    pub fn partial_weights(&self, tau: f64) -> Vec<f64> {
        let n = self.nodes.len();
        let mut out = vec![0.0; n];
        if tau == 0.0 {
            return out;
        }
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            let b = self.basis(t * tau);
            for j in 0..n {
                out[j] += w * tau * b[j];
            }
        }
        out
    }

    /// `|c_{n-2}| + |c_{n-1}|`, the two highest Legendre coefficients of the interpolant of
    /// `values` on [0, 1]. Small values mean the interpolant has resolved the function.
    pub fn legendre_tail(&self, values: &[f64]) -> f64 {
        let n = self.nodes.len();
        let mut top = [0.0; 2];
        for ((t, w), v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let x = 2.0 * t - 1.0;
            let (mut p0, mut p1) = (1.0, x);
            for k in 1..n - 1 {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            // p0 = P_{n-2}(x), p1 = P_{n-1}(x)
            top[0] += w * v * p0;
            top[1] += w * v * p1;
        }
        (2 * n - 3) as f64 * top[0].abs() + (2 * n - 1) as f64 * top[1].abs()
    }

    /// Interpolate node values at `s` in [0, 1].
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        self.basis(s).iter().zip(values).map(|(b, v)| b * v).sum()
    }
}
