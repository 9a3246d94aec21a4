//! Per-wavevector two-layer discretization.
//!
//! Each layer carries one degree-`n` polynomial per velocity component, stored
//! as values at the mapped CGL nodes. The unknown vector is
//! `[minus: phi, psi, theta | plus: phi, psi, theta]`, `6 (n + 1)` entries.
//! Constraints: divergence at every node of both layers (an exact polynomial
//! identity), homogeneous Dirichlet rows at the two walls, and continuity of the
//! three components at `y3 = 0`. Forms are assembled exactly with Clenshaw-Curtis
//! weights on the doubled grid.
//!
//! For the lattice sweeps the same construction is used at the canonical
//! wavevector `(|xi|, 0)`: there the along-`xi` component and `theta` decouple
//! from the transverse component, so the constrained problem splits into a
//! poloidal and a toroidal block. Any other `xi` of the same length is a rotation
//! of the horizontal frame, which leaves every form invariant once
//! `m_h = M_h . xi` is held fixed.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::cheb::LayerGrid;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Layer, ModeProfile, RTParameters, WaveVector};
use crate::C64;

pub const MIN_DEGREE: usize = 8;

pub const PHI: usize = 0;
pub const PSI: usize = 1;
pub const THETA: usize = 2;

/// Index of nodal value `j` of component `comp` in `layer`.
pub fn dof(n: usize, layer: Layer, comp: usize, j: usize) -> usize {
    layer.index() * 3 * (n + 1) + comp * (n + 1) + j
}

/// Rank of the full constraint stack at degree `n`.
pub fn expected_rank(n: usize) -> usize {
    2 * (n + 1) + 9
}

#[derive(Debug, Clone)]
pub struct Grids {
    pub minus: LayerGrid,
    pub plus: LayerGrid,
}

impl Grids {
    pub fn new(l: f64, tau: f64, n: usize) -> Self {
        Self {
            minus: LayerGrid::new(-l, 0.0, n),
            plus: LayerGrid::new(0.0, tau, n),
        }
    }

    pub fn for_params(p: &RTParameters, n: usize) -> Self {
        Self::new(p.l, p.tau, n)
    }

    pub fn get(&self, layer: Layer) -> &LayerGrid {
        match layer {
            Layer::Minus => &self.minus,
            Layer::Plus => &self.plus,
        }
    }
}

/// One quadratic term `weight * int |sum_a c_a (d/dy)^{o_a} w_{comp_a}|^2`.
struct Term {
    parts: Vec<(usize, usize, C64)>,
    weight: f64,
}

fn term(weight: f64, parts: &[(usize, usize, C64)]) -> Term {
    Term {
        parts: parts.to_vec(),
        weight,
    }
}

/// Gram matrices `G[a][b] = (Op_a)^T W Op_b` with `Op_0 = P`, `Op_1 = P D`.
fn layer_grams(grid: &LayerGrid) -> [[DMatrix<f64>; 2]; 2] {
    let ops = [&grid.interp, &grid.interp_d];
    let weighted = |m: &DMatrix<f64>| {
        let mut w = m.clone();
        for (i, wi) in grid.fine_w.iter().enumerate() {
            w.row_mut(i).scale_mut(*wi);
        }
        w
    };
    let w0 = weighted(ops[0]);
    let w1 = weighted(ops[1]);
    let g00 = ops[0].transpose() * &w0;
    let g01 = ops[0].transpose() * &w1;
    let g11 = ops[1].transpose() * &w1;
    let g10 = g01.transpose();
    [[g00, g01], [g10, g11]]
}

fn add_terms(
    form: &mut DMatrix<C64>,
    grams: &[[DMatrix<f64>; 2]; 2],
    n: usize,
    layer: Layer,
    scale: f64,
    terms: &[Term],
) {
    let n1 = n + 1;
    for t in terms {
        for &(ca, oa, a) in &t.parts {
            for &(cb, ob, b) in &t.parts {
                let f = a.conj() * b * (t.weight * scale);
                let g = &grams[oa][ob];
                let r0 = dof(n, layer, ca, 0);
                let c0 = dof(n, layer, cb, 0);
                for i in 0..n1 {
                    for j in 0..n1 {
                        form[(r0 + i, c0 + j)] += f * g[(i, j)];
                    }
                }
            }
        }
    }
}

/// Terms of `1/2 |D w|^2`.
fn strain_terms(xi1: f64, xi2: f64) -> Vec<Term> {
    let i = C64::i();
    let one = C64::new(1.0, 0.0);
    vec![
        term(0.5, &[(PHI, 0, 2.0 * i * xi1)]),
        term(0.5, &[(PSI, 0, 2.0 * i * xi2)]),
        term(0.5, &[(THETA, 1, C64::new(2.0, 0.0))]),
        term(1.0, &[(PHI, 0, i * xi2), (PSI, 0, i * xi1)]),
        term(1.0, &[(PHI, 1, one), (THETA, 0, i * xi1)]),
        term(1.0, &[(PSI, 1, one), (THETA, 0, i * xi2)]),
    ]
}

fn mass_terms() -> Vec<Term> {
    (0..3).map(|c| term(1.0, &[(c, 0, C64::new(1.0, 0.0))])).collect()
}

fn gradient_terms() -> Vec<Term> {
    (0..3).map(|c| term(1.0, &[(c, 1, C64::new(1.0, 0.0))])).collect()
}

/// Terms of `|i m_h w + m3 w'|^2`.
fn magnetic_terms(mh: f64, m3: f64) -> Vec<Term> {
    (0..3)
        .map(|c| term(1.0, &[(c, 0, C64::new(0.0, mh)), (c, 1, C64::new(m3, 0.0))]))
        .collect()
}

/// Parameter-free building blocks of every form at one wavevector.
pub(crate) struct UnitForms {
    pub mass: [DMatrix<C64>; 2],
    pub strain: [DMatrix<C64>; 2],
    pub grad1: DMatrix<C64>,
    /// `H` with `|i m_h w + m3 w'|^2 = m_h^2 |w|^2 + m3^2 |w'|^2 + m_h m3 H`
    pub cross: DMatrix<C64>,
}

pub(crate) fn unit_forms(grids: &Grids, xi1: f64, xi2: f64) -> UnitForms {
    let n = grids.minus.n;
    let nd = 6 * (n + 1);
    let zero = || DMatrix::<C64>::zeros(nd, nd);
    let grams = [layer_grams(&grids.minus), layer_grams(&grids.plus)];
    let mut mass = [zero(), zero()];
    let mut strain = [zero(), zero()];
    let mut grad1 = zero();
    let mut mag = zero();
    for layer in Layer::BOTH {
        let g = &grams[layer.index()];
        add_terms(&mut mass[layer.index()], g, n, layer, 1.0, &mass_terms());
        add_terms(&mut strain[layer.index()], g, n, layer, 1.0, &strain_terms(xi1, xi2));
        add_terms(&mut grad1, g, n, layer, 1.0, &gradient_terms());
        add_terms(&mut mag, g, n, layer, 1.0, &magnetic_terms(1.0, 1.0));
    }
    let cross = linalg::hermitize(&(mag - &mass[0] - &mass[1] - &grad1));
    UnitForms {
        mass,
        strain,
        grad1,
        cross,
    }
}

/// Unnormalized constraint rows: divergence (minus nodes, plus nodes), walls
/// (minus bottom phi, psi, theta; plus top phi, psi, theta), continuity.
pub(crate) fn raw_constraints(grids: &Grids, xi1: f64, xi2: f64) -> DMatrix<C64> {
    let n = grids.minus.n;
    let n1 = n + 1;
    let nd = 6 * n1;
    let mut c = DMatrix::<C64>::zeros(2 * n1 + 9, nd);
    for layer in Layer::BOTH {
        let g = grids.get(layer);
        for j in 0..n1 {
            let r = layer.index() * n1 + j;
            c[(r, dof(n, layer, PHI, j))] += C64::new(0.0, xi1);
            c[(r, dof(n, layer, PSI, j))] += C64::new(0.0, xi2);
            for k in 0..n1 {
                c[(r, dof(n, layer, THETA, k))] += C64::new(g.d[(j, k)], 0.0);
            }
        }
    }
    let one = C64::new(1.0, 0.0);
    for comp in 0..3 {
        c[(2 * n1 + comp, dof(n, Layer::Minus, comp, 0))] = one;
        c[(2 * n1 + 3 + comp, dof(n, Layer::Plus, comp, n))] = one;
        c[(2 * n1 + 6 + comp, dof(n, Layer::Minus, comp, n))] = one;
        c[(2 * n1 + 6 + comp, dof(n, Layer::Plus, comp, 0))] = -one;
    }
    c
}

/// Discrete forms and constraints for one wavevector.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub wavevector: WaveVector,
    pub degree: usize,
    pub dof_count: usize,
    /// `int rho |w|^2`
    pub mass: DMatrix<C64>,
    /// `1/2 int mu |D w|^2`
    pub k_visc: DMatrix<C64>,
    /// `1/2 int kappa rho |D w|^2`
    pub k_elast: DMatrix<C64>,
    /// `int |i m_h w + m3 w'|^2` with the effective field
    pub k_mag: DMatrix<C64>,
    /// `g [rho] |theta(0)|^2`
    pub b_grav: DMatrix<C64>,
    /// `vartheta |xi|^2 |theta(0)|^2`
    pub b_tens: DMatrix<C64>,
    /// row-normalized constraint stack
    pub constraints: DMatrix<C64>,
    /// Euclidean norms of the raw rows
    pub row_scale: Vec<f64>,
    /// orthonormal basis of the constraint kernel
    pub kernel: DMatrix<C64>,
}

impl ModeOperators {
    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    /// Index of `theta(0)` (lower-layer trace).
    pub fn interface_dof(&self) -> usize {
        dof(self.degree, Layer::Minus, THETA, self.degree)
    }

    /// Row range of the divergence rows of `layer`.
    pub fn divergence_rows(&self, layer: Layer) -> std::ops::Range<usize> {
        let n1 = self.degree + 1;
        layer.index() * n1..(layer.index() + 1) * n1
    }

    /// `s K_visc + K_elast + K_mag + B_tens - B_grav`.
    pub fn energy_form(&self, s: f64) -> DMatrix<C64> {
        let mut a = &self.k_visc * C64::new(s, 0.0);
        a += &self.k_elast;
        a += &self.k_mag;
        a += &self.b_tens;
        a -= &self.b_grav;
        a
    }

    /// Restrict a full form to the kernel: `Z^H A Z`.
    pub fn reduce(&self, a: &DMatrix<C64>) -> DMatrix<C64> {
        linalg::hermitize(&(self.kernel.adjoint() * a * &self.kernel))
    }
}

pub fn build_mode_operators(p: &RTParameters, xi: &WaveVector, degree: usize) -> Result<ModeOperators> {
    if degree < MIN_DEGREE {
        return Err(Error::DegreeTooLow(degree));
    }
    let n = degree;
    let grids = Grids::for_params(p, n);
    let u = unit_forms(&grids, xi.xi1, xi.xi2);
    let nd = 6 * (n + 1);
    let r = |c: f64| C64::new(c, 0.0);
    let mass = &u.mass[0] * r(p.rho_minus) + &u.mass[1] * r(p.rho_plus);
    let k_visc = &u.strain[0] * r(p.mu_minus) + &u.strain[1] * r(p.mu_plus);
    let k_elast = &u.strain[0] * r(p.kappa_minus * p.rho_minus) + &u.strain[1] * r(p.kappa_plus * p.rho_plus);
    let m3 = p.effective_field()[2];
    let mh = xi.field_projection(p);
    let mut k_mag = DMatrix::zeros(nd, nd);
    let grams = [layer_grams(&grids.minus), layer_grams(&grids.plus)];
    for layer in Layer::BOTH {
        add_terms(&mut k_mag, &grams[layer.index()], n, layer, 1.0, &magnetic_terms(mh, m3));
    }
    let e = dof(n, Layer::Minus, THETA, n);
    let mut b_grav = DMatrix::zeros(nd, nd);
    b_grav[(e, e)] = r(p.g * p.rho_jump());
    let mut b_tens = DMatrix::zeros(nd, nd);
    b_tens[(e, e)] = r(p.vartheta * xi.xi_sq());
    let raw = raw_constraints(&grids, xi.xi1, xi.xi2);
    let (constraints, row_scale) = linalg::normalize_rows(&raw);
    let kernel = linalg::null_space(&constraints, expected_rank(n))?;
    Ok(ModeOperators {
        wavevector: *xi,
        degree,
        dof_count: nd,
        mass: linalg::hermitize(&mass),
        k_visc: linalg::hermitize(&k_visc),
        k_elast: linalg::hermitize(&k_elast),
        k_mag: linalg::hermitize(&k_mag),
        b_grav,
        b_tens,
        constraints,
        row_scale,
        kernel,
    })
}

/// Largest generalized eigenvalue of `(Z^H N Z, Z^H D Z)`.
///
/// `D` may be singular on the kernel as long as `N` vanishes on the singular
/// directions (for example `B_grav / B_tens`, which both act on `theta(0)` only);
/// otherwise the quotient is unbounded and `IndefiniteDenominator` is returned.
pub fn rayleigh_quotient_bound(
    ops: &ModeOperators,
    numerator: &DMatrix<C64>,
    denominator: &DMatrix<C64>,
) -> Result<f64> {
    linalg::sup_quotient(&ops.reduce(numerator), &ops.reduce(denominator))
}

// ---------------------------------------------------------------------------
// canonical-frame block geometry used by the lattice sweeps

/// Restriction of the unit forms to one decoupled block, in kernel coordinates.
#[derive(Debug)]
pub(crate) struct BlockGeometry {
    /// full-dof indices covered by the block
    pub idx: Vec<usize>,
    /// orthonormal kernel basis within the block
    pub z: DMatrix<C64>,
    pub mass: [DMatrix<C64>; 2],
    pub strain: [DMatrix<C64>; 2],
    pub grad1: DMatrix<C64>,
    pub cross: DMatrix<C64>,
    /// `Z^H e_theta(0)`; absent in the toroidal block
    pub trace: Option<DVector<C64>>,
}

impl BlockGeometry {
    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn bytes(&self) -> usize {
        let k = self.dim();
        16 * (self.z.len() + 6 * k * k + k)
    }
}

#[derive(Debug)]
pub(crate) struct ModeGeometry {
    pub degree: usize,
    /// poloidal (along-xi and theta), toroidal (transverse)
    pub blocks: [BlockGeometry; 2],
}

impl ModeGeometry {
    fn bytes(&self) -> usize {
        self.blocks.iter().map(BlockGeometry::bytes).sum()
    }
}

fn block_geometry(
    u: &UnitForms,
    raw: &DMatrix<C64>,
    n: usize,
    comps: &[usize],
    rows: &[usize],
    rank: usize,
    with_trace: bool,
) -> Result<BlockGeometry> {
    let mut idx = Vec::new();
    for layer in Layer::BOTH {
        for &c in comps {
            for j in 0..=n {
                idx.push(dof(n, layer, c, j));
            }
        }
    }
    let sub = raw.select_rows(rows).select_columns(&idx);
    let (sub, _) = linalg::normalize_rows(&sub);
    let z = linalg::null_space(&sub, rank)?;
    let restrict = |a: &DMatrix<C64>| {
        let ab = a.select_rows(&idx).select_columns(&idx);
        linalg::hermitize(&(z.adjoint() * ab * &z))
    };
    let trace = if with_trace {
        let e = dof(n, Layer::Minus, THETA, n);
        let pos = idx.iter().position(|&i| i == e).expect("trace dof in block");
        Some(DVector::from_fn(z.ncols(), |j, _| z[(pos, j)].conj()))
    } else {
        None
    };
    Ok(BlockGeometry {
        mass: [restrict(&u.mass[0]), restrict(&u.mass[1])],
        strain: [restrict(&u.strain[0]), restrict(&u.strain[1])],
        grad1: restrict(&u.grad1),
        cross: restrict(&u.cross),
        trace,
        idx,
        z,
    })
}

fn build_geometry(l: f64, tau: f64, n: usize, xi_norm: f64) -> Result<ModeGeometry> {
    let grids = Grids::new(l, tau, n);
    let u = unit_forms(&grids, xi_norm, 0.0);
    let raw = raw_constraints(&grids, xi_norm, 0.0);
    let n1 = n + 1;
    let wall = |layer: usize, c: usize| 2 * n1 + 3 * layer + c;
    let cont = |c: usize| 2 * n1 + 6 + c;
    let mut pol_rows: Vec<usize> = (0..2 * n1).collect();
    pol_rows.extend([wall(0, PHI), wall(0, THETA), wall(1, PHI), wall(1, THETA), cont(PHI), cont(THETA)]);
    let tor_rows = [wall(0, PSI), wall(1, PSI), cont(PSI)];
    let pol = block_geometry(&u, &raw, n, &[PHI, THETA], &pol_rows, 2 * n1 + 6, true)?;
    let tor = block_geometry(&u, &raw, n, &[PSI], &tor_rows, 3, false)?;
    Ok(ModeGeometry {
        degree: n,
        blocks: [pol, tor],
    })
}

type GeometryKey = (usize, u64, u64, u64);

struct GeometryCache {
    map: HashMap<GeometryKey, Arc<ModeGeometry>>,
    order: VecDeque<GeometryKey>,
    bytes: usize,
}

const CACHE_BUDGET: usize = 1 << 30;

fn cache() -> &'static Mutex<GeometryCache> {
    static CACHE: OnceLock<Mutex<GeometryCache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(GeometryCache {
            map: HashMap::new(),
            order: VecDeque::new(),
            bytes: 0,
        })
    })
}

/// Canonical-frame geometry for `|xi| = xi_norm`, memoized process-wide.
pub(crate) fn mode_geometry(l: f64, tau: f64, n: usize, xi_norm: f64) -> Result<Arc<ModeGeometry>> {
    if n < MIN_DEGREE {
        return Err(Error::DegreeTooLow(n));
    }
    let key = (n, l.to_bits(), tau.to_bits(), xi_norm.to_bits());
    if let Some(g) = cache().lock().unwrap().map.get(&key) {
        return Ok(g.clone());
    }
    let g = Arc::new(build_geometry(l, tau, n, xi_norm)?);
    let mut c = cache().lock().unwrap();
    if !c.map.contains_key(&key) {
        c.bytes += g.bytes();
        c.map.insert(key, g.clone());
        c.order.push_back(key);
        while c.bytes > CACHE_BUDGET && c.order.len() > 1 {
            let old = c.order.pop_front().unwrap();
            if let Some(v) = c.map.remove(&old) {
                c.bytes -= v.bytes();
            }
        }
    }
    Ok(g)
}

/// Rotate a canonical-frame dof vector (`phi` along `xi`, `psi` transverse) into
/// the frame of `xi`.
pub(crate) fn rotate_from_canonical(x: &DVector<C64>, n: usize, xi: &WaveVector) -> DVector<C64> {
    let r = xi.xi_norm();
    let (c, s) = (xi.xi1 / r, xi.xi2 / r);
    let mut out = x.clone();
    for layer in Layer::BOTH {
        for j in 0..=n {
            let a = x[dof(n, layer, PHI, j)];
            let b = x[dof(n, layer, PSI, j)];
            out[dof(n, layer, PHI, j)] = a * c - b * s;
            out[dof(n, layer, PSI, j)] = a * s + b * c;
        }
    }
    out
}

/// Profile from canonical block coordinates `z` of block `b`.
pub(crate) fn profile_from_block(
    geom: &ModeGeometry,
    block: usize,
    z: &DVector<C64>,
    xi: &WaveVector,
) -> ModeProfile {
    let n = geom.degree;
    let bg = &geom.blocks[block];
    let xb = &bg.z * z;
    let mut x = DVector::zeros(6 * (n + 1));
    for (k, &i) in bg.idx.iter().enumerate() {
        x[i] = xb[k];
    }
    let mut x = rotate_from_canonical(&x, n, xi);
    linalg::canonical_phase(&mut x);
    ModeProfile::from_dofs(*xi, n, &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::evaluate_functionals;

    fn herm_err(a: &DMatrix<C64>) -> f64 {
        let d = (a - a.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        d / a.iter().fold(1e-300f64, |m, v| m.max(v.norm()))
    }

    fn rich_params() -> RTParameters {
        let mut p = RTParameters::reference();
        p.kappa_minus = 0.3;
        p.kappa_plus = 0.7;
        p.lambda = 1.5;
        p.m_bar = [0.4, -0.3, 0.6];
        p.vartheta = 0.2;
        p.tau = 1.3;
        p
    }

    #[test]
    fn dimensions_and_kernel() {
        let p = RTParameters::reference();
        let ops = build_mode_operators(&p, &WaveVector::of(&p, 1, 0), 16).unwrap();
        assert_eq!(ops.dof_count, 3 * 2 * 17);
        assert_eq!(ops.kernel_dim(), ops.dof_count - expected_rank(16));
        let cz = (&ops.constraints * &ops.kernel).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(cz <= 1e-12, "{cz}");
        assert!(matches!(
            build_mode_operators(&p, &WaveVector::of(&p, 1, 0), 7),
            Err(Error::DegreeTooLow(7))
        ));
    }

    #[test]
    fn forms_hermitian_and_definite_on_kernel() {
        let p = rich_params();
        let ops = build_mode_operators(&p, &WaveVector::of(&p, 2, -1), 12).unwrap();
        for f in [&ops.mass, &ops.k_visc, &ops.k_elast, &ops.k_mag, &ops.b_grav, &ops.b_tens] {
            assert!(herm_err(f) <= 1e-12);
        }
        assert!(linalg::min_eigenvalue(&ops.reduce(&ops.mass)).unwrap() > 0.0);
        assert!(linalg::min_eigenvalue(&ops.reduce(&ops.k_visc)).unwrap() > 0.0);
        let rank = |a: &DMatrix<C64>| a.iter().filter(|v| v.norm() > 0.0).count();
        assert!(rank(&ops.b_grav) <= 2 && rank(&ops.b_tens) <= 2);
    }

    #[test]
    fn equal_densities_give_identical_layer_blocks() {
        let mut p = RTParameters::reference();
        p.rho_plus = p.rho_minus;
        let ops = build_mode_operators(&p, &WaveVector::of(&p, 1, 1), 10).unwrap();
        let n1 = 11;
        let a = ops.mass.view((0, 0), (3 * n1, 3 * n1));
        let b = ops.mass.view((3 * n1, 3 * n1), (3 * n1, 3 * n1));
        assert!((a - b).norm() <= 1e-13 * a.norm());
    }

    #[test]
    fn forms_match_pointwise_quadrature() {
        let p = rich_params();
        let xi = WaveVector::of(&p, 1, 2);
        let n = 14;
        let ops = build_mode_operators(&p, &xi, n).unwrap();
        // any kernel vector is an admissible profile
        let x = DVector::from_fn(ops.kernel_dim(), |i, _| C64::new((i as f64).sin(), (0.3 * i as f64).cos()));
        let w = &ops.kernel * x;
        let prof = ModeProfile::from_dofs(xi, n, &w);
        let f = evaluate_functionals(&p, &prof, 0.8).unwrap();
        let q = |a: &DMatrix<C64>| (w.adjoint() * a * &w)[(0, 0)].re;
        let e = q(&ops.energy_form(0.0));
        let ff = q(&ops.energy_form(0.8));
        assert!((q(&ops.mass) - f.rho_norm_sq).abs() <= 1e-12 * f.rho_norm_sq);
        assert!((e - f.e).abs() <= 1e-11 * f.i.abs().max(1.0));
        assert!((ff - f.f).abs() <= 1e-11 * f.i.abs().max(1.0));
    }

    #[test]
    fn block_geometry_matches_full_operators() {
        let p = rich_params();
        let xi = WaveVector::of(&p, 2, 1);
        let n = 12;
        let ops = build_mode_operators(&p, &xi, n).unwrap();
        let geom = build_geometry(p.l, p.tau, n, xi.xi_norm()).unwrap();
        let k: usize = geom.blocks.iter().map(|b| b.dim()).sum();
        assert_eq!(k, ops.kernel_dim());
        // smallest generalized eigenvalue agrees between the two constructions
        let s = 0.6;
        let full = {
            let l = linalg::cholesky(&ops.reduce(&ops.mass)).unwrap();
            linalg::min_eigenvalue(&linalg::congruence(&l, &ops.reduce(&ops.energy_form(s)))).unwrap()
        };
        let m = p.effective_field();
        let mh = xi.field_projection(&p);
        let mut best = f64::INFINITY;
        for b in &geom.blocks {
            let r = |c: f64| C64::new(c, 0.0);
            let mass = &b.mass[0] * r(p.rho_minus) + &b.mass[1] * r(p.rho_plus);
            let mut a = (&b.strain[0] * r(s * p.mu_minus + p.kappa_minus * p.rho_minus))
                + (&b.strain[1] * r(s * p.mu_plus + p.kappa_plus * p.rho_plus))
                + (&b.mass[0] + &b.mass[1]) * r(mh * mh)
                + &b.grad1 * r(m[2] * m[2])
                + &b.cross * r(mh * m[2]);
            if let Some(t) = &b.trace {
                a += (t * t.adjoint()) * r(p.vartheta * xi.xi_sq() - p.g * p.rho_jump());
            }
            let l = linalg::cholesky(&mass).unwrap();
            best = best.min(linalg::min_eigenvalue(&linalg::congruence(&l, &a)).unwrap());
        }
        assert!((best - full).abs() <= 1e-10 * full.abs().max(1.0), "{best} {full}");
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let mut p = RTParameters::reference();
        p.vartheta = 0.7;
        let xi = WaveVector::of(&p, 1, 1);
        let ops = build_mode_operators(&p, &xi, 10).unwrap();
        let one = rayleigh_quotient_bound(&ops, &ops.k_visc, &ops.k_visc).unwrap();
        assert!((one - 1.0).abs() < 1e-10);
        let zero = rayleigh_quotient_bound(&ops, &DMatrix::zeros(ops.dof_count, ops.dof_count), &ops.mass).unwrap();
        assert_eq!(zero, 0.0);
        let q = rayleigh_quotient_bound(&ops, &ops.b_grav, &ops.b_tens).unwrap();
        let exact = p.g * p.rho_jump() / (p.vartheta * xi.xi_sq());
        assert!((q - exact).abs() <= 1e-12 * exact);
        assert_eq!(
            rayleigh_quotient_bound(&ops, &ops.mass, &ops.b_tens),
            Err(Error::IndefiniteDenominator)
        );
    }

    #[test]
    fn rotation_preserves_constraints() {
        let p = RTParameters::reference();
        let xi = WaveVector::of(&p, 3, -2);
        let n = 10;
        let geom = build_geometry(p.l, p.tau, n, xi.xi_norm()).unwrap();
        let ops = build_mode_operators(&p, &xi, n).unwrap();
        for b in 0..2 {
            let z = DVector::from_fn(geom.blocks[b].dim(), |i, _| C64::new(1.0 / (1.0 + i as f64), 0.2));
            let w = profile_from_block(&geom, b, &z, &xi).to_dofs();
            assert!((&ops.constraints * &w).norm() <= 1e-12 * w.norm());
        }
    }
}
