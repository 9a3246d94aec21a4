//! Chebyshev-Gauss-Lobatto utilities on mapped intervals.
//!
//! Nodes are stored in ascending order, so node 0 is the bottom of a layer and
//! node `n` its top.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::C64;

/// Ascending CGL points `-cos(j pi / n)`, `j = 0..=n`.
pub fn cgl_points(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n)
        .map(|j| {
            // symmetric evaluation keeps the midpoint exactly zero
            let v = (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin();
            -v
        })
        .map(|x: f64| if x == 0.0 { 0.0 } else { x })
        .collect()
}

/// Barycentric weights for CGL points (common factors dropped).
pub fn cgl_bary_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Barycentric weights for arbitrary distinct nodes, scaled to unit max.
pub fn bary_weights(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = if hi > lo { 4.0 / (hi - lo) } else { 1.0 };
    let mut w: Vec<f64> = (0..m)
        .map(|j| {
            let mut p = 1.0;
            for k in 0..m {
                if k != j {
                    p *= scale * (x[j] - x[k]);
                }
            }
            1.0 / p
        })
        .collect();
    let mx = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for v in &mut w {
        *v /= mx;
    }
    w
}

/// First-derivative matrix for the interpolant through `x` with weights `w`.
pub fn diff_matrix(x: &[f64], w: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Interpolation matrix from values at `x` to values at `t`.
pub fn interp_matrix(x: &[f64], w: &[f64], t: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut p = DMatrix::zeros(t.len(), m);
    for (i, &ti) in t.iter().enumerate() {
        if let Some(j) = x.iter().position(|&xj| xj == ti) {
            p[(i, j)] = 1.0;
            continue;
        }
        let mut den = 0.0;
        for j in 0..m {
            let c = w[j] / (ti - x[j]);
            p[(i, j)] = c;
            den += c;
        }
        for j in 0..m {
            p[(i, j)] /= den;
        }
    }
    p
}

/// Evaluate the interpolant of complex data `f` at a single point.
pub fn eval_bary(x: &[f64], w: &[f64], f: &[C64], t: f64) -> C64 {
    let row = interp_matrix(x, w, &[t]);
    f.iter()
        .enumerate()
        .fold(C64::new(0.0, 0.0), |acc, (j, v)| acc + v * row[(0, j)])
}

/// Clenshaw-Curtis weights on the `m + 1` ascending CGL points of [-1, 1].
pub fn clenshaw_curtis(m: usize) -> Vec<f64> {
    assert!(m >= 1);
    let mf = m as f64;
    let mut w = vec![0.0; m + 1];
    let end = if m % 2 == 0 {
        1.0 / (mf * mf - 1.0)
    } else {
        1.0 / (mf * mf)
    };
    w[0] = end;
    w[m] = end;
    for (j, wj) in w.iter_mut().enumerate().take(m).skip(1) {
        let th = PI * j as f64 / mf;
        let mut v = 1.0;
        if m % 2 == 0 {
            for k in 1..m / 2 {
                v -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (mf * th).cos() / (mf * mf - 1.0);
        } else {
            for k in 1..=(m - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        *wj = 2.0 * v / mf;
    }
    // the node ordering flip leaves the weights unchanged (they are symmetric)
    w
}

/// Collocation data for one layer `(lo, hi)` at degree `n`, plus the doubled
/// quadrature grid used for form assembly.
#[derive(Debug, Clone)]
pub struct LayerGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// reference nodes in [-1, 1]
    pub x: Vec<f64>,
    pub bary: Vec<f64>,
    /// physical nodes
    pub y: Vec<f64>,
    /// d/dy at the nodes
    pub d: DMatrix<f64>,
    pub fine_y: Vec<f64>,
    pub fine_w: Vec<f64>,
    /// values at fine nodes
    pub interp: DMatrix<f64>,
    /// derivatives at fine nodes
    pub interp_d: DMatrix<f64>,
}

impl LayerGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        let x = cgl_points(n);
        let bary = cgl_bary_weights(n);
        let half = 0.5 * (hi - lo);
        let y = x.iter().map(|&t| map_point(lo, hi, t)).collect();
        let d = diff_matrix(&x, &bary) / half;
        let m = 2 * n;
        let fx = cgl_points(m);
        let fine_w = clenshaw_curtis(m).into_iter().map(|v| v * half).collect();
        let fine_y = fx.iter().map(|&t| map_point(lo, hi, t)).collect();
        let interp = interp_matrix(&x, &bary, &fx);
        let interp_d = &interp * &d;
        Self {
            lo,
            hi,
            n,
            x,
            bary,
            y,
            d,
            fine_y,
            fine_w,
            interp,
            interp_d,
        }
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Map a physical point into [-1, 1].
    pub fn to_ref(&self, y: f64) -> f64 {
        (2.0 * y - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Exact Lagrange mass matrix `int l_i l_j dy`.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let mut wp = self.interp.clone();
        for (i, w) in self.fine_w.iter().enumerate() {
            wp.row_mut(i).scale_mut(*w);
        }
        self.interp.transpose() * wp
    }

    /// Quadrature weights acting directly on nodal values (exact to degree n).
    pub fn nodal_weights(&self) -> Vec<f64> {
        let w = DMatrix::from_row_slice(1, self.fine_w.len(), &self.fine_w);
        let r = w * &self.interp;
        r.iter().copied().collect()
    }

    /// Interpolate complex nodal values to a physical point.
    pub fn eval(&self, f: &[C64], y: f64) -> C64 {
        eval_bary(&self.x, &self.bary, f, self.to_ref(y))
    }
}

fn map_point(lo: f64, hi: f64, t: f64) -> f64 {
    if t == -1.0 {
        lo
    } else if t == 1.0 {
        hi
    } else {
        lo + 0.5 * (t + 1.0) * (hi - lo)
    }
}

/// Apply a real matrix to a complex vector.
pub fn apply(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for (j, x) in v.iter().enumerate() {
                acc += x * m[(i, j)];
            }
            acc
        })
        .collect()
}
