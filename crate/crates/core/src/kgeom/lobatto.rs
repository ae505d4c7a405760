//! Chebyshev–Gauss–Lobatto nodes on `[-1, 1]`: differentiation matrix,
//! Clenshaw–Curtis weights and barycentric interpolation.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct ChebyshevGrid {
    /// Nodes `x_j = cos(πj/N)`, `j = 0..=N`, decreasing from 1 to −1.
    pub nodes: Vec<f64>,
    /// Row-major `(N+1) × (N+1)` differentiation matrix.
    diff: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
}

impl ChebyshevGrid {
    /// Grid with `count` nodes (`count ≥ 3`).
    pub fn new(count: usize) -> Self {
        assert!(count >= 3, "need at least three Lobatto nodes");
        let n = count - 1;
        let nodes: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
        let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
        let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut diff = vec![0.0; count * count];
        for i in 0..count {
            let mut row_sum = 0.0;
            for j in 0..count {
                if i != j {
                    let d = c(i) / c(j) * sign(i + j) / (nodes[i] - nodes[j]);
                    diff[i * count + j] = d;
                    row_sum += d;
                }
            }
            diff[i * count + i] = -row_sum;
        }

        let mut weights = vec![0.0; count];
        let mut interior = vec![1.0; count];
        let nf = n as f64;
        if n.is_multiple_of(2) {
            weights[0] = 1.0 / (nf * nf - 1.0);
            for j in 1..n {
                let t = PI * j as f64 / nf;
                for k in 1..n / 2 {
                    let kf = k as f64;
                    interior[j] -= 2.0 * (2.0 * kf * t).cos() / (4.0 * kf * kf - 1.0);
                }
                interior[j] -= (nf * t).cos() / (nf * nf - 1.0);
            }
        } else {
            weights[0] = 1.0 / (nf * nf);
            for j in 1..n {
                let t = PI * j as f64 / nf;
                for k in 1..=(n - 1) / 2 {
                    let kf = k as f64;
                    interior[j] -= 2.0 * (2.0 * kf * t).cos() / (4.0 * kf * kf - 1.0);
                }
            }
        }
        weights[n] = weights[0];
        for j in 1..n {
            weights[j] = 2.0 * interior[j] / nf;
        }

        let bary = (0..count)
            .map(|j| sign(j) * if j == 0 || j == n { 0.5 } else { 1.0 })
            .collect();
        Self {
            nodes,
            diff,
            weights,
            bary,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let m = self.len();
        assert_eq!(f.len(), m);
        (0..m)
            .map(|i| {
                self.diff[i * m..(i + 1) * m]
                    .iter()
                    .zip(f)
                    .map(|(d, v)| d * v)
                    .sum()
            })
            .collect()
    }

    /// `∫_{-1}^{1} f dx`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Value at `x` of the polynomial interpolating `f` at the nodes.
    pub fn interpolate(&self, f: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in self.nodes.iter().zip(f).enumerate() {
            let diff = x - xj;
            if diff == 0.0 {
                return fj;
            }
            let t = self.bary[j] / diff;
            num += t * fj;
            den += t;
        }
        num / den
    }
}
