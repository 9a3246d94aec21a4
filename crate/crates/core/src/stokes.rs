//! Per-mode two-layer Stokes problem
//!
//! ```text
//! grad q - nu Lap u = f,  div u = g      in each layer
//! [u] = 0,  [(q I - nu D u) e3] = h      at y3 = 0
//! u = 0                                  at y3 = -l, tau
//! ```
//!
//! with horizontal derivatives replaced by `i xi`. Velocity is collocated at
//! degree `n` (CGL nodes), pressure at degree `n - 2` through its values at the
//! `n - 1` interior CGL nodes. Momentum and divergence are enforced at those
//! interior nodes; walls, continuity and the three traction jumps close the
//! square system of size `8 n + 4`.
//!
//! For `xi != 0` the pressure has no free constant and its horizontal mean
//! (hence its domain mean) vanishes identically. For `xi = 0` the constant is
//! fixed by a mean-zero row and the flux condition `int g = 0` is checked.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cheb::{bary_weights, diff_matrix, interp_matrix, LayerGrid};
use crate::discretize::{Grids, ModeOperators, PHI, PSI, THETA};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Layer, ModeProfile, RTParameters, WaveVector};
use crate::C64;

/// Geometry, wavevector and per-layer viscosity of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesProblem {
    pub wavevector: WaveVector,
    pub degree: usize,
    pub l: f64,
    pub tau: f64,
    /// `[minus, plus]`
    pub viscosity: [f64; 2],
}

impl StokesProblem {
    pub fn new(p: &RTParameters, xi: &WaveVector, degree: usize) -> Self {
        Self {
            wavevector: *xi,
            degree,
            l: p.l,
            tau: p.tau,
            viscosity: [p.mu_minus, p.mu_plus],
        }
    }
}

/// Right-hand sides sampled at each layer's CGL nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesData {
    /// `f`, indexed `[layer][component][node]`
    pub interior: [[Vec<C64>; 3]; 2],
    /// `g`, indexed `[layer][node]`
    pub divergence: [Vec<C64>; 2],
    /// `h`
    pub jump: [C64; 3],
}

impl StokesData {
    pub fn zeros(degree: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); degree + 1];
        Self {
            interior: [[z(), z(), z()], [z(), z(), z()]],
            divergence: [z(), z()],
            jump: [C64::new(0.0, 0.0); 3],
        }
    }

    /// Sample `f(layer, y)` and `g(layer, y)` on the collocation nodes.
    pub fn sample<F, G>(problem: &StokesProblem, f: F, g: G, jump: [C64; 3]) -> Self
    where
        F: Fn(Layer, f64) -> [C64; 3],
        G: Fn(Layer, f64) -> C64,
    {
        let grids = Grids::new(problem.l, problem.tau, problem.degree);
        let mut d = Self::zeros(problem.degree);
        for layer in Layer::BOTH {
            let li = layer.index();
            for (j, &y) in grids.get(layer).y.iter().enumerate() {
                let v = f(layer, y);
                for c in 0..3 {
                    d.interior[li][c][j] = v[c];
                }
                d.divergence[li][j] = g(layer, y);
            }
        }
        d.jump = jump;
        d
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: C64, other: &Self, b: C64) -> Self {
        let mut out = self.clone();
        for li in 0..2 {
            for c in 0..3 {
                for (j, v) in out.interior[li][c].iter_mut().enumerate() {
                    *v = a * *v + b * other.interior[li][c][j];
                }
            }
            for (j, v) in out.divergence[li].iter_mut().enumerate() {
                *v = a * *v + b * other.divergence[li][j];
            }
        }
        for c in 0..3 {
            out.jump[c] = a * self.jump[c] + b * other.jump[c];
        }
        out
    }
}

/// Pressure polynomial of degree `n - 2` per layer, stored at interior CGL nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureProfile {
    pub degree: usize,
    pub l: f64,
    pub tau: f64,
    /// physical node positions, `[minus, plus]`
    pub nodes: [Vec<f64>; 2],
    pub values: [Vec<C64>; 2],
}

/// Interior-node pressure basis on one layer.
struct PressureBasis {
    x: Vec<f64>,
    w: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl PressureBasis {
    fn new(grid: &LayerGrid) -> Self {
        let x = grid.x[1..grid.n].to_vec();
        let w = bary_weights(&x);
        Self {
            x,
            w,
            lo: grid.lo,
            hi: grid.hi,
        }
    }

    fn to_ref(&self, y: f64) -> f64 {
        (2.0 * y - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Row of interpolation weights at physical `y`.
    fn row(&self, y: f64) -> Vec<f64> {
        let m = interp_matrix(&self.x, &self.w, &[self.to_ref(y)]);
        m.iter().copied().collect()
    }

    /// d/dy at the pressure nodes.
    fn diff(&self) -> DMatrix<f64> {
        diff_matrix(&self.x, &self.w) * (2.0 / (self.hi - self.lo))
    }

    /// Quadrature weights acting on nodal values.
    fn integral_weights(&self, grid: &LayerGrid) -> Vec<f64> {
        let fx: Vec<f64> = grid.fine_y.iter().map(|&y| self.to_ref(y)).collect();
        let p = interp_matrix(&self.x, &self.w, &fx);
        (0..self.x.len())
            .map(|j| (0..fx.len()).map(|i| grid.fine_w[i] * p[(i, j)]).sum())
            .collect()
    }
}

impl PressureProfile {
    fn bases(&self, l: f64, tau: f64) -> [PressureBasis; 2] {
        let g = Grids::new(l, tau, self.degree);
        [PressureBasis::new(&g.minus), PressureBasis::new(&g.plus)]
    }

    pub fn zeros(l: f64, tau: f64, degree: usize) -> Self {
        let g = Grids::new(l, tau, degree);
        let nodes = [g.minus.y[1..degree].to_vec(), g.plus.y[1..degree].to_vec()];
        Self {
            degree,
            l,
            tau,
            values: [vec![C64::new(0.0, 0.0); degree - 1], vec![C64::new(0.0, 0.0); degree - 1]],
            nodes,
        }
    }

    fn depths(&self) -> (f64, f64) {
        (self.l, self.tau)
    }

    /// Evaluate `q` at `y` in `layer` (extrapolates to the layer ends).
    pub fn eval(&self, layer: Layer, y: f64) -> C64 {
        let (l, tau) = self.depths();
        let b = &self.bases(l, tau)[layer.index()];
        let row = b.row(y);
        row.iter()
            .zip(&self.values[layer.index()])
            .fold(C64::new(0.0, 0.0), |a, (w, v)| a + v * *w)
    }

    /// `q'` at the pressure nodes of `layer`.
    pub fn derivative(&self, layer: Layer) -> Vec<C64> {
        let (l, tau) = self.depths();
        let d = self.bases(l, tau)[layer.index()].diff();
        crate::cheb::apply(&d, &self.values[layer.index()])
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut().flatten() {
            *v *= c;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |a, v| a.max(v.norm()))
    }

    /// `int q dy3` over both layers.
    pub fn integral(&self) -> C64 {
        let (l, tau) = self.depths();
        let g = Grids::new(l, tau, self.degree);
        let b = self.bases(l, tau);
        let mut acc = C64::new(0.0, 0.0);
        for layer in Layer::BOTH {
            let w = b[layer.index()].integral_weights(g.get(layer));
            for (wj, v) in w.iter().zip(&self.values[layer.index()]) {
                acc += v * *wj;
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesModeSolution {
    pub velocity_profile: ModeProfile,
    pub pressure_profile: PressureProfile,
    /// `q_plus(0) - q_minus(0)`
    pub jump_of_q: C64,
    /// domain mean of `q e^{i xi . y_h}` (identically zero for `xi != 0`)
    pub pressure_mean: C64,
    /// max over collocation points of `|div u - g|`
    pub divergence_residual: f64,
}

fn layer_offset(n: usize, layer: Layer) -> usize {
    layer.index() * (4 * n + 2)
}

fn vdof(n: usize, layer: Layer, comp: usize, j: usize) -> usize {
    layer_offset(n, layer) + comp * (n + 1) + j
}

fn qdof(n: usize, layer: Layer, j: usize) -> usize {
    layer_offset(n, layer) + 3 * (n + 1) + j
}

struct Assembly {
    a: DMatrix<C64>,
    b: DVector<C64>,
    row: usize,
}

impl Assembly {
    fn push(&mut self, entries: &[(usize, C64)], rhs: C64) {
        for &(c, v) in entries {
            self.a[(self.row, c)] += v;
        }
        self.b[self.row] = rhs;
        self.row += 1;
    }
}

/// Solve with general per-layer viscosity.
pub fn solve_stokes(problem: &StokesProblem, data: &StokesData) -> Result<StokesModeSolution> {
    let n = problem.degree;
    if n < crate::discretize::MIN_DEGREE {
        return Err(Error::DegreeTooLow(n));
    }
    let xi = problem.wavevector;
    let (x1, x2) = (xi.xi1, xi.xi2);
    let xs = xi.xi_sq();
    let grids = Grids::new(problem.l, problem.tau, n);
    let bases = [PressureBasis::new(&grids.minus), PressureBasis::new(&grids.plus)];
    let size = 8 * n + 4;
    let mut asm = Assembly {
        a: DMatrix::zeros(size, size),
        b: DVector::zeros(size),
        row: 0,
    };
    let i = C64::i();
    let r = |v: f64| C64::new(v, 0.0);
    for layer in Layer::BOTH {
        let li = layer.index();
        let g = grids.get(layer);
        let d2 = &g.d * &g.d;
        let dq = bases[li].diff();
        let nu = problem.viscosity[li];
        for j in 1..n {
            for c in 0..3 {
                let mut e: Vec<(usize, C64)> = (0..=n).map(|k| (vdof(n, layer, c, k), r(-nu * d2[(j, k)]))).collect();
                e.push((vdof(n, layer, c, j), r(nu * xs)));
                match c {
                    PHI => e.push((qdof(n, layer, j - 1), i * x1)),
                    PSI => e.push((qdof(n, layer, j - 1), i * x2)),
                    _ => e.extend((0..n - 1).map(|k| (qdof(n, layer, k), r(dq[(j - 1, k)])))),
                }
                asm.push(&e, data.interior[li][c][j]);
            }
            let mut e = vec![(vdof(n, layer, PHI, j), i * x1), (vdof(n, layer, PSI, j), i * x2)];
            e.extend((0..=n).map(|k| (vdof(n, layer, THETA, k), r(g.d[(j, k)]))));
            asm.push(&e, data.divergence[li][j]);
        }
    }
    let zero = C64::new(0.0, 0.0);
    for c in 0..3 {
        asm.push(&[(vdof(n, Layer::Minus, c, 0), r(1.0))], zero);
        asm.push(&[(vdof(n, Layer::Plus, c, n), r(1.0))], zero);
        asm.push(&[(vdof(n, Layer::Minus, c, n), r(1.0)), (vdof(n, Layer::Plus, c, 0), r(-1.0))], zero);
    }
    // traction jumps: upper trace (node 0) minus lower trace (node n)
    let (gm, gp) = (&grids.minus, &grids.plus);
    let (num, nup) = (problem.viscosity[0], problem.viscosity[1]);
    for (c, xc) in [(PHI, x1), (PSI, x2)] {
        let mut e = Vec::new();
        for k in 0..=n {
            e.push((vdof(n, Layer::Plus, c, k), r(-nup * gp.d[(0, k)])));
            e.push((vdof(n, Layer::Minus, c, k), r(num * gm.d[(n, k)])));
        }
        e.push((vdof(n, Layer::Plus, THETA, 0), -nup * i * xc));
        e.push((vdof(n, Layer::Minus, THETA, n), num * i * xc));
        asm.push(&e, data.jump[c]);
    }
    {
        let mut e = Vec::new();
        for k in 0..=n {
            e.push((vdof(n, Layer::Plus, THETA, k), r(-2.0 * nup * gp.d[(0, k)])));
            e.push((vdof(n, Layer::Minus, THETA, k), r(2.0 * num * gm.d[(n, k)])));
        }
        for (k, w) in bases[1].row(0.0).into_iter().enumerate() {
            e.push((qdof(n, Layer::Plus, k), r(w)));
        }
        for (k, w) in bases[0].row(0.0).into_iter().enumerate() {
            e.push((qdof(n, Layer::Minus, k), r(-w)));
        }
        asm.push(&e, data.jump[2]);
    }
    debug_assert_eq!(asm.row, size);
    // row equilibration
    for k in 0..size {
        let m = asm.a.row(k).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        if m > 0.0 {
            asm.a.row_mut(k).unscale_mut(m);
            asm.b[k] /= m;
        }
    }
    let sol = if xi.is_zero() {
        solve_mean_mode(&asm, &grids, &bases, data, n)?
    } else {
        let lu = asm.a.clone().lu();
        let u = lu.u();
        let dmax = (0..size).fold(0.0f64, |a, k| a.max(u[(k, k)].norm()));
        let dmin = (0..size).fold(f64::INFINITY, |a, k| a.min(u[(k, k)].norm()));
        if !(dmin > 1e-14 * dmax) {
            return Err(Error::SingularSystem);
        }
        lu.solve(&asm.b).ok_or(Error::SingularSystem)?
    };
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let mut vel = ModeProfile::zeros(xi, n);
    let mut pres = PressureProfile::zeros(problem.l, problem.tau, n);
    for layer in Layer::BOTH {
        let lp = vel.layer_mut(layer);
        for c in 0..3 {
            let comp = lp.component_mut(c);
            for j in 0..=n {
                comp[j] = sol[vdof(n, layer, c, j)];
            }
        }
        for j in 0..n - 1 {
            pres.values[layer.index()][j] = sol[qdof(n, layer, j)];
        }
    }
    let mut divres = 0.0f64;
    for layer in Layer::BOTH {
        let g = grids.get(layer);
        let lp = vel.layer(layer);
        let dt = crate::cheb::apply(&g.d, &lp.theta);
        for j in 1..n {
            let dv = i * x1 * lp.phi[j] + i * x2 * lp.psi[j] + dt[j];
            divres = divres.max((dv - data.divergence[layer.index()][j]).norm());
        }
    }
    let jump_of_q = pres.eval(Layer::Plus, 0.0) - pres.eval(Layer::Minus, 0.0);
    let pressure_mean = if xi.is_zero() {
        pres.integral() / (problem.l + problem.tau)
    } else {
        C64::new(0.0, 0.0)
    };
    Ok(StokesModeSolution {
        velocity_profile: vel,
        pressure_profile: pres,
        jump_of_q,
        pressure_mean,
        divergence_residual: divres,
    })
}

fn solve_mean_mode(
    asm: &Assembly,
    grids: &Grids,
    bases: &[PressureBasis; 2],
    data: &StokesData,
    n: usize,
) -> Result<DVector<C64>> {
    // flux compatibility: int g = theta(tau) - theta(-l) = 0
    let mut flux = C64::new(0.0, 0.0);
    let mut gmax = 0.0f64;
    for layer in Layer::BOTH {
        let w = grids.get(layer).nodal_weights();
        for (wj, v) in w.iter().zip(&data.divergence[layer.index()]) {
            flux += v * *wj;
            gmax = gmax.max(v.norm());
        }
    }
    if flux.norm() > 1e-8 * gmax.max(1.0) {
        return Err(Error::IncompatibleData(flux.norm()));
    }
    let size = asm.a.nrows();
    let mut aug = DMatrix::zeros(size + 1, size);
    aug.view_mut((0, 0), (size, size)).copy_from(&asm.a);
    let mut rhs = DVector::zeros(size + 1);
    rhs.rows_mut(0, size).copy_from(&asm.b);
    for layer in Layer::BOTH {
        let w = bases[layer.index()].integral_weights(grids.get(layer));
        for (k, wk) in w.into_iter().enumerate() {
            aug[(size, qdof(n, layer, k))] = C64::new(wk, 0.0);
        }
    }
    let x = linalg::lstsq(&aug, &rhs)?;
    let res = (&asm.a * &x - &asm.b).norm();
    if res > 1e-8 * asm.b.norm().max(1.0) {
        return Err(Error::IncompatibleData(res));
    }
    Ok(x)
}

/// Stokes solve with viscosity `mu` per layer.
pub fn solve_mode_stokes(
    p: &RTParameters,
    xi: &WaveVector,
    degree: usize,
    data: &StokesData,
) -> Result<StokesModeSolution> {
    solve_stokes(&StokesProblem::new(p, xi, degree), data)
}

/// Pressure of an eigenmode at growth rate `lambda`, recovered twice: from the
/// constraint multipliers of the discrete eigenproblem (a) and from the Stokes
/// problem with modified viscosity `lambda mu + kappa rho + m3^2` (b).
/// Returns the path (b) pressure and the relative max difference of the two.
pub fn pressure_for_eigenmode(
    p: &RTParameters,
    ops: &ModeOperators,
    w: &ModeProfile,
    lambda: f64,
) -> Result<(PressureProfile, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    let n = ops.degree;
    if w.degree != n || w.wavevector.key() != ops.wavevector.key() {
        return Err(Error::ProfileMismatch("eigenprofile does not match the operators".into()));
    }
    let xi = ops.wavevector;
    let x = w.to_dofs();
    let xmx = (x.adjoint() * &ops.mass * &x)[(0, 0)].re;
    if xmx == 0.0 {
        return Ok((PressureProfile::zeros(p.l, p.tau, n), 0.0));
    }
    let a = ops.energy_form(lambda);
    let sigma = (x.adjoint() * &a * &x)[(0, 0)].re / xmx;

    // (b) Stokes problem
    let m = p.effective_field();
    let (m3, mh) = (m[2], xi.field_projection(p));
    let grids = Grids::for_params(p, n);
    let i = C64::i();
    let mut data = StokesData::zeros(n);
    for layer in Layer::BOTH {
        let g = grids.get(layer);
        let lp = w.layer(layer);
        let rho = p.rho(layer);
        for c in 0..3 {
            let u = lp.component(c);
            let du = crate::cheb::apply(&g.d, u);
            for j in 0..=n {
                data.interior[layer.index()][c][j] =
                    u[j] * (-mh * mh + m3 * m3 * xi.xi_sq() + sigma * rho) + 2.0 * i * mh * m3 * du[j];
            }
        }
    }
    data.jump[2] = w.interface_trace() * (p.g * p.rho_jump() - p.vartheta * xi.xi_sq());
    let problem = StokesProblem {
        wavevector: xi,
        degree: n,
        l: p.l,
        tau: p.tau,
        viscosity: [
            lambda * p.mu_minus + p.kappa_minus * p.rho_minus + m3 * m3,
            lambda * p.mu_plus + p.kappa_plus * p.rho_plus + m3 * m3,
        ],
    };
    let sol = solve_stokes(&problem, &data)?;
    let beta = sol.pressure_profile.scaled(C64::new(1.0 / lambda, 0.0));

    // (a) multipliers: C^H mu = -(A - sigma M) x
    let res = &a * &x - (&ops.mass * &x) * C64::new(sigma, 0.0);
    let ch = ops.constraints.adjoint();
    let qr = ch.qr();
    let qtr = qr.q().adjoint() * (-res);
    let mult = qr
        .r()
        .solve_upper_triangular(&qtr)
        .ok_or_else(|| Error::NumericalBreakdown("constraint stack is rank deficient".into()))?;
    let mut diff = 0.0f64;
    for layer in Layer::BOTH {
        let rows = ops.divergence_rows(layer);
        let b = DVector::from_fn(n + 1, |j, _| {
            let k = rows.start + j;
            mult[k] / ops.row_scale[k]
        });
        let ml = grids.get(layer).mass_matrix();
        let chol = ml
            .cholesky()
            .ok_or_else(|| Error::NumericalBreakdown("layer mass matrix".into()))?;
        let mut re = DVector::from_fn(n + 1, |j, _| b[j].re);
        let mut im = DVector::from_fn(n + 1, |j, _| b[j].im);
        chol.solve_mut(&mut re);
        chol.solve_mut(&mut im);
        for j in 1..n {
            let sb = -C64::new(re[j], im[j]);
            let ba = sb / lambda;
            diff = diff.max((ba - beta.values[layer.index()][j - 1]).norm());
        }
    }
    let scale = beta.max_abs();
    let consistency = if scale > 0.0 { diff / scale } else { diff };
    Ok((beta, consistency))
}
