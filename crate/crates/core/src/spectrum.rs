//! `alpha(s) = inf F(w, s)` over unit-mass admissible modes, evaluated as the
//! smallest constrained eigenvalue over a half lattice of wavevectors.
//!
//! The mean mode `xi = 0` is left out: with both walls fixed the divergence
//! constraint forces `theta' = 0`, hence `theta = 0`, so gravity does no work on
//! it and its energy is nonnegative. It can never lower a negative infimum and
//! the growth rate only depends on where `alpha < 0`.
//!
//! Forms are even in `xi`, so only `k1 > 0` or `k1 = 0, k2 > 0` is swept. Modes
//! sharing `(|xi|^2, (M_h . xi)^2)` share one pencil; the reported representative
//! is the lexicographically smallest `(k1, k2)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{self, ModeGeometry, ModeOperators};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{validate_parameters, ModeProfile, RTParameters, WaveVector};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeLattice {
    /// radius of the half disk in index space
    pub k_max: u32,
    /// optional cutoff on `|xi|`
    pub xi_max: Option<f64>,
    pub adaptive: bool,
    /// shell margin is `margin_factor * |alpha| + margin_offset`
    pub margin_factor: f64,
    pub margin_offset: f64,
    /// hard cap on `k_max` when adapting
    pub cap: u32,
}

impl ModeLattice {
    pub fn new(k_max: u32) -> Self {
        Self {
            k_max,
            xi_max: None,
            adaptive: false,
            margin_factor: 10.0,
            margin_offset: 1.0,
            cap: 256,
        }
    }

    pub fn adaptive(k_max: u32) -> Self {
        Self {
            adaptive: true,
            ..Self::new(k_max)
        }
    }

    pub fn with_k_max(&self, k_max: u32) -> Self {
        Self { k_max, ..*self }
    }

    /// Half-lattice modes, ordered lexicographically by `(k1, k2)`.
    pub fn modes(&self, p: &RTParameters) -> Vec<WaveVector> {
        let k = self.k_max as i64;
        let mut out = Vec::new();
        for k1 in 0..=k {
            for k2 in -k..=k {
                if k1 * k1 + k2 * k2 > k * k || (k1 == 0 && k2 <= 0) {
                    continue;
                }
                let w = WaveVector::of(p, k1, k2);
                if let Some(x) = self.xi_max {
                    if w.xi_norm() > x {
                        continue;
                    }
                }
                out.push(w);
            }
        }
        out
    }

    fn in_shell(&self, w: &WaveVector) -> bool {
        let k = self.k_max as i64;
        let r2 = w.k1 * w.k1 + w.k2 * w.k2;
        r2 > (k - 1) * (k - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub s: f64,
    pub alpha: f64,
    pub argmin_wavevector: WaveVector,
    /// `||sqrt(rho) w||^2 = 1`
    pub argmin_profile: ModeProfile,
    /// `1/2 ||sqrt(mu) D w||^2` of the minimizer
    pub argmin_viscous_energy: f64,
    pub per_mode_minima: Vec<(WaveVector, f64)>,
    pub lattice_k_max: u32,
}

/// Discrete analogue of `lim_{s -> 0} alpha(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroLimit {
    pub value: f64,
    pub argmin: WaveVector,
    /// some mode has `E` clearly negative (beyond eigensolver noise)
    pub unstable: bool,
    /// noise level attached to the argmin mode
    pub tolerance: f64,
}

/// One decoupled block of a mode pencil in mass-orthonormal coordinates.
#[derive(Debug)]
struct BlockPencil {
    chol: DMatrix<C64>,
    visc: DMatrix<C64>,
    rest: DMatrix<C64>,
    visc_min: f64,
    rest_min: f64,
    rest_tol: f64,
}

impl BlockPencil {
    fn matrix(&self, s: f64) -> DMatrix<C64> {
        let mut a = &self.visc * C64::new(s, 0.0);
        a += &self.rest;
        a
    }
}

fn block_pencil(
    b: &discretize::BlockGeometry,
    p: &RTParameters,
    xi_sq: f64,
    mh: f64,
) -> Result<BlockPencil> {
    let r = |c: f64| C64::new(c, 0.0);
    let m3 = p.effective_field()[2];
    let mass = &b.mass[0] * r(p.rho_minus) + &b.mass[1] * r(p.rho_plus);
    let chol = linalg::cholesky(&mass)?;
    let visc = &b.strain[0] * r(p.mu_minus) + &b.strain[1] * r(p.mu_plus);
    let mut rest = &b.strain[0] * r(p.kappa_minus * p.rho_minus) + &b.strain[1] * r(p.kappa_plus * p.rho_plus);
    if mh != 0.0 {
        rest += (&b.mass[0] + &b.mass[1]) * r(mh * mh);
    }
    if m3 != 0.0 {
        rest += &b.grad1 * r(m3 * m3);
    }
    if mh != 0.0 && m3 != 0.0 {
        rest += &b.cross * r(mh * m3);
    }
    if let Some(t) = &b.trace {
        rest += (t * t.adjoint()) * r(p.vartheta * xi_sq - p.g * p.rho_jump());
    }
    let visc = linalg::congruence(&chol, &visc);
    let rest = linalg::congruence(&chol, &rest);
    let visc_min = linalg::min_eigenvalue(&visc)?;
    let rest_min = linalg::min_eigenvalue(&rest)?;
    let rest_tol = 1e-10 * linalg::frobenius(&rest);
    Ok(BlockPencil {
        chol,
        visc,
        rest,
        visc_min,
        rest_min,
        rest_tol,
    })
}

struct ModeGroup {
    rep: WaveVector,
    members: Vec<usize>,
    geom: Arc<ModeGeometry>,
    blocks: Vec<BlockPencil>,
}

impl ModeGroup {
    fn lower_bound(&self, s: f64) -> f64 {
        self.blocks
            .iter()
            .map(|b| s * b.visc_min + b.rest_min)
            .fold(f64::INFINITY, f64::min)
    }

    fn value(&self, s: f64) -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, 0);
        for (i, b) in self.blocks.iter().enumerate() {
            let v = linalg::min_eigenvalue(&b.matrix(s))?;
            if v < best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    }
}

/// Minimizing eigenpair of one mode.
#[derive(Debug, Clone)]
pub struct ModeEigen {
    pub wavevector: WaveVector,
    pub eigenvalue: f64,
    pub profile: ModeProfile,
    pub viscous_energy: f64,
}

/// Frozen lattice with one assembled pencil per distinct mode class.
pub struct ModeSpectrum {
    params: RTParameters,
    degree: usize,
    lattice: ModeLattice,
    modes: Vec<WaveVector>,
    groups: Vec<ModeGroup>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-13 * a.abs().max(b.abs())
}

impl ModeSpectrum {
    pub fn new(p: &RTParameters, lattice: &ModeLattice, degree: usize) -> Result<Self> {
        let p = validate_parameters(p)?;
        Self::new_unchecked(&p, lattice, degree)
    }

    /// Same as [`ModeSpectrum::new`] without parameter validation (test harnesses
    /// switch gravity or the density jump off).
    pub fn new_unchecked(p: &RTParameters, lattice: &ModeLattice, degree: usize) -> Result<Self> {
        if degree < discretize::MIN_DEGREE {
            return Err(Error::DegreeTooLow(degree));
        }
        let modes = lattice.modes(p);
        if modes.is_empty() {
            return Err(Error::InvalidArgument("lattice contains no modes".into()));
        }
        let keys: Vec<(f64, f64)> = modes
            .iter()
            .map(|w| {
                let mh = w.field_projection(p);
                (w.xi_sq(), mh * mh)
            })
            .collect();
        let mut order: Vec<usize> = (0..modes.len()).collect();
        order.sort_by(|&a, &b| {
            keys[a]
                .0
                .total_cmp(&keys[b].0)
                .then(keys[a].1.total_cmp(&keys[b].1))
                .then(modes[a].key().cmp(&modes[b].key()))
        });
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &i in &order {
            if let Some(last) = classes.last_mut() {
                let f = last[0];
                if same(keys[f].0, keys[i].0) && same(keys[f].1, keys[i].1) {
                    last.push(i);
                    continue;
                }
            }
            classes.push(vec![i]);
        }
        for c in &mut classes {
            c.sort_by_key(|&i| modes[i].key());
        }
        let groups: Result<Vec<ModeGroup>> = classes
            .into_par_iter()
            .map(|members| {
                let rep = modes[members[0]];
                let geom = discretize::mode_geometry(p.l, p.tau, degree, rep.xi_norm())?;
                let mh = rep.field_projection(p);
                let blocks = geom
                    .blocks
                    .iter()
                    .map(|b| block_pencil(b, p, rep.xi_sq(), mh))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ModeGroup {
                    rep,
                    members,
                    geom,
                    blocks,
                })
            })
            .collect();
        let mut groups = groups?;
        groups.sort_by_key(|g| g.rep.key());
        Ok(Self {
            params: *p,
            degree,
            lattice: *lattice,
            modes,
            groups,
        })
    }

    pub fn params(&self) -> &RTParameters {
        &self.params
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lattice(&self) -> &ModeLattice {
        &self.lattice
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    /// Number of distinct pencils after merging equivalent modes.
    pub fn class_count(&self) -> usize {
        self.groups.len()
    }

    fn better(a: (f64, WaveVector), b: (f64, WaveVector)) -> bool {
        a.0 < b.0 || (a.0 == b.0 && a.1.key() < b.1.key())
    }

    /// `alpha(s)` and the representative minimizing wavevector. Classes whose
    /// Weyl lower bound already exceeds the running minimum are skipped.
    pub fn alpha(&self, s: f64) -> Result<(f64, WaveVector)> {
        let mut order: Vec<(f64, usize)> = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.lower_bound(s), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(f64, WaveVector)> = None;
        for (lb, i) in order {
            if let Some(b) = best {
                if lb > b.0 {
                    break;
                }
            }
            let g = &self.groups[i];
            let v = (g.value(s)?.0, g.rep);
            if best.is_none_or(|b| Self::better(v, b)) {
                best = Some(v);
            }
        }
        Ok(best.expect("nonempty lattice"))
    }

    fn group_of(&self, xi: &WaveVector) -> Option<&ModeGroup> {
        self.groups
            .iter()
            .find(|g| g.members.iter().any(|&m| self.modes[m].key() == xi.key()))
    }

    /// Minimizing eigenpair of the class containing `xi`, reported at `xi`.
    pub fn eigenpair(&self, xi: &WaveVector, s: f64) -> Result<ModeEigen> {
        let g = self
            .group_of(xi)
            .ok_or_else(|| Error::InvalidArgument(format!("mode ({}, {}) not in lattice", xi.k1, xi.k2)))?;
        let (_, bi) = g.value(s)?;
        let b = &g.blocks[bi];
        let (val, y) = linalg::min_eigenpair(&b.matrix(s))?;
        let visc = (y.adjoint() * &b.visc * &y)[(0, 0)].re;
        let z = linalg::lift(&b.chol, &y);
        let profile = discretize::profile_from_block(&g.geom, bi, &z, xi);
        Ok(ModeEigen {
            wavevector: *xi,
            eigenvalue: val,
            profile,
            viscous_energy: visc,
        })
    }

    /// Per-mode minima for every lattice mode plus the minimizer.
    pub fn sample(&self, s: f64) -> Result<AlphaSample> {
        let vals: Result<Vec<f64>> = self.groups.par_iter().map(|g| Ok(g.value(s)?.0)).collect();
        let vals = vals?;
        let mut best: Option<(f64, WaveVector)> = None;
        let mut per_mode = vec![(WaveVector::new(0, 0, 1.0, 1.0), 0.0); self.modes.len()];
        for (g, &v) in self.groups.iter().zip(&vals) {
            for &m in &g.members {
                per_mode[m] = (self.modes[m], v);
            }
            if best.is_none_or(|b| Self::better((v, g.rep), b)) {
                best = Some((v, g.rep));
            }
        }
        let (alpha, rep) = best.expect("nonempty lattice");
        let eig = self.eigenpair(&rep, s)?;
        Ok(AlphaSample {
            s,
            alpha,
            argmin_wavevector: rep,
            argmin_profile: eig.profile,
            argmin_viscous_energy: eig.viscous_energy,
            per_mode_minima: per_mode,
            lattice_k_max: self.lattice.k_max,
        })
    }

    /// Minimum of `E` alone over the frozen lattice.
    pub fn zero_limit(&self) -> ZeroLimit {
        let mut best: Option<(f64, WaveVector, f64)> = None;
        let mut unstable = false;
        for g in &self.groups {
            for b in &g.blocks {
                if b.rest_min < -b.rest_tol {
                    unstable = true;
                }
                if best.is_none_or(|x| Self::better((b.rest_min, g.rep), (x.0, x.1))) {
                    best = Some((b.rest_min, g.rep, b.rest_tol));
                }
            }
        }
        let (value, argmin, tolerance) = best.expect("nonempty lattice");
        ZeroLimit {
            value,
            argmin,
            unstable,
            tolerance,
        }
    }

    /// Whether every boundary-shell minimum clears `alpha` by the lattice margin.
    pub fn shell_clear(&self, sample: &AlphaSample) -> bool {
        let margin = self.lattice.margin_factor * sample.alpha.abs() + self.lattice.margin_offset;
        sample
            .per_mode_minima
            .iter()
            .filter(|(w, _)| self.lattice.in_shell(w))
            .all(|(_, v)| *v >= sample.alpha + margin)
    }

    /// Per-block numerator and denominator of the discriminant quotient for
    /// every class: `(|xi|, representative, [(N, D)])`.
    pub(crate) fn discriminant_forms(&self) -> Vec<(WaveVector, Vec<(DMatrix<C64>, DMatrix<C64>)>)> {
        let p = &self.params;
        let r = |c: f64| C64::new(c, 0.0);
        let m3 = p.effective_field()[2];
        self.groups
            .iter()
            .map(|g| {
                let mh = g.rep.field_projection(p);
                let forms = g
                    .geom
                    .blocks
                    .iter()
                    .filter_map(|b| {
                        let t = b.trace.as_ref()?;
                        let tt: DMatrix<C64> = t * t.adjoint();
                        let num = &tt * r(p.g * p.rho_jump());
                        let den = &b.strain[0] * r(p.kappa_minus * p.rho_minus)
                            + &b.strain[1] * r(p.kappa_plus * p.rho_plus)
                            + (&b.mass[0] + &b.mass[1]) * r(mh * mh)
                            + &b.grad1 * r(m3 * m3)
                            + &b.cross * r(mh * m3)
                            + &tt * r(p.vartheta * g.rep.xi_sq());
                        Some((num, linalg::hermitize(&den)))
                    })
                    .collect();
                (g.rep, forms)
            })
            .collect()
    }
}

/// Smallest eigenvalue of `Z^H (s K_visc + K_elast + K_mag + B_tens - B_grav) Z`
/// relative to `Z^H M Z`, with the eigenprofile lifted, mass-normalized and
/// phase-fixed.
pub fn min_constrained_eigen(ops: &ModeOperators, s: f64) -> Result<(f64, ModeProfile)> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("s = {s} must be nonnegative")));
    }
    let chol = linalg::cholesky(&ops.reduce(&ops.mass))?;
    let a = linalg::congruence(&chol, &ops.reduce(&ops.energy_form(s)));
    let (val, y) = linalg::min_eigenpair(&a)?;
    let mut x: DVector<C64> = &ops.kernel * linalg::lift(&chol, &y);
    linalg::canonical_phase(&mut x);
    Ok((val, ModeProfile::from_dofs(ops.wavevector, ops.degree, &x)))
}

/// `alpha(s)` with optional lattice adaptation.
pub fn alpha_of_s(p: &RTParameters, s: f64, lattice: &ModeLattice, degree: usize) -> Result<AlphaSample> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("s = {s} must be nonnegative")));
    }
    let mut k = lattice.k_max;
    loop {
        let spec = ModeSpectrum::new(p, &lattice.with_k_max(k), degree)?;
        let sample = spec.sample(s)?;
        if !lattice.adaptive || spec.shell_clear(&sample) {
            return Ok(sample);
        }
        if k >= lattice.cap {
            return Err(Error::LatticeExhausted { cap: lattice.cap });
        }
        k = (k + (k / 2).max(4)).min(lattice.cap);
    }
}

/// Discrete `lim_{s -> 0} alpha(s)` on the (non-adapted) lattice.
pub fn limit_alpha_at_zero(p: &RTParameters, lattice: &ModeLattice, degree: usize) -> Result<ZeroLimit> {
    Ok(ModeSpectrum::new(p, lattice, degree)?.zero_limit())
}
