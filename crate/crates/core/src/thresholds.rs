//! Stability discriminant and closed-form thresholds.
//!
//! `Dis = sup g[rho] |w3(0)|^2 / I(w)` over admissible modes; the configuration
//! is unstable iff `Dis > 1`. Per mode the supremum is the largest generalized
//! eigenvalue of the gravity form against the stabilizing forms on the
//! constraint kernel. When none of `vartheta`, `kappa`, `M3` is active the
//! stabilizing form degenerates and `Dis = +inf`.

use serde::{Deserialize, Serialize};

use crate::cheb::{cgl_points, clenshaw_curtis};
use crate::discretize::Grids;
use crate::error::{Error, Result};
use crate::growth::Verdict;
use crate::linalg;
use crate::model::{validate_parameters, Layer, ModeProfile, RTParameters, WaveVector};
use crate::spectrum::{ModeLattice, ModeSpectrum};
use crate::C64;

/// `1 / (1/tau + 1/l)`.
pub fn poincare_constant(l: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("l", l), ("tau", tau)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveParameter(name.into()));
        }
    }
    Ok(1.0 / (1.0 / tau + 1.0 / l))
}

/// `vartheta_T = g [rho] max(L1^2, L2^2)`.
pub fn surface_tension_threshold(g: f64, rho_jump: f64, l1: f64, l2: f64) -> Result<f64> {
    if !(rho_jump > 0.0) {
        return Err(Error::RtConditionViolated {
            rho_plus: rho_jump,
            rho_minus: 0.0,
        });
    }
    for (name, v) in [("g", g), ("l1", l1), ("l2", l2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveParameter(name.into()));
        }
    }
    Ok(g * rho_jump * (l1 * l1).max(l2 * l2))
}

/// `m_S = sqrt(g [rho] / (lambda (1/tau + 1/l)))`.
pub fn vertical_field_threshold(g: f64, rho_jump: f64, lambda: f64, l: f64, tau: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::ZeroPermeability);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NegativeCoefficient("lambda".into()));
    }
    if !(rho_jump > 0.0) {
        return Err(Error::RtConditionViolated {
            rho_plus: rho_jump,
            rho_minus: 0.0,
        });
    }
    Ok((g * rho_jump * poincare_constant(l, tau)? / lambda).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// `None` when `Dis = +inf`
    pub dis_value: Option<f64>,
    pub dis_infinite: bool,
    pub verdict: Verdict,
    /// set when `kappa = 0` and `M = 0`
    pub vartheta_t: Option<f64>,
    /// set when `vartheta = kappa = 0` and `lambda > 0`
    pub m_s: Option<f64>,
    pub poincare_const: f64,
    pub a_const: f64,
    /// `(|xi|, max per-mode quotient at that |xi|)`, ascending in `|xi|`;
    /// infinite values are written as `"inf"`
    #[serde(with = "extended_pairs")]
    pub per_mode_curve: Vec<(f64, f64)>,
    pub argmax: Option<WaveVector>,
    /// quadratic extrapolation of the curve in `1/|xi|` to `|xi| = inf`
    pub extrapolated: Option<f64>,
    /// the maximum sits at the largest `|xi|` of the lattice
    pub sup_may_be_limit: bool,
    /// `(m_S / M3)^2` for a pure vertical field
    pub analytic_bound: Option<f64>,
    /// modes whose stabilizing form is singular where gravity acts
    pub infinite_modes: Vec<WaveVector>,
}

impl ThresholdReport {
    pub fn dis(&self) -> f64 {
        self.dis_value.unwrap_or(f64::INFINITY)
    }
}

mod extended_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Tag(String),
    }

    fn to_ext(v: f64) -> Ext {
        if v.is_finite() {
            Ext::Num(v)
        } else if v > 0.0 {
            Ext::Tag("inf".into())
        } else if v < 0.0 {
            Ext::Tag("-inf".into())
        } else {
            Ext::Tag("nan".into())
        }
    }

    pub fn serialize<S: Serializer>(v: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        let ext: Vec<(f64, Ext)> = v.iter().map(|&(x, y)| (x, to_ext(y))).collect();
        ext.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
        let ext: Vec<(f64, Ext)> = Vec::deserialize(d)?;
        ext.into_iter()
            .map(|(x, e)| match e {
                Ext::Num(v) => Ok((x, v)),
                Ext::Tag(t) => match t.as_str() {
                    "inf" => Ok((x, f64::INFINITY)),
                    "-inf" => Ok((x, f64::NEG_INFINITY)),
                    "nan" => Ok((x, f64::NAN)),
                    _ => Err(serde::de::Error::custom(format!("bad value `{t}`"))),
                },
            })
            .collect()
    }
}

fn verdict_of(dis: f64) -> Verdict {
    if dis > 1.0 + 1e-9 {
        Verdict::Unstable
    } else if dis < 1.0 - 1e-9 {
        Verdict::Stable
    } else {
        Verdict::Neutral
    }
}

/// Fit `c0 + c1 t + c2 t^2`, `t = 1/|xi|`, through the last three points.
fn richardson(curve: &[(f64, f64)]) -> Option<f64> {
    if curve.len() < 3 {
        return None;
    }
    let pts = &curve[curve.len() - 3..];
    let t: Vec<f64> = pts.iter().map(|p| 1.0 / p.0).collect();
    let v: Vec<f64> = pts.iter().map(|p| p.1).collect();
    // Lagrange interpolation evaluated at t = 0
    let mut acc = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (0.0 - t[j]) / (t[i] - t[j]);
            }
        }
        acc += w * v[i];
    }
    acc.is_finite().then_some(acc)
}

pub fn discriminant(p: &RTParameters, lattice: &ModeLattice, degree: usize) -> Result<ThresholdReport> {
    let p = validate_parameters(p)?;
    let m = p.effective_field();
    let poincare_const = poincare_constant(p.l, p.tau)?;
    let a_const = (p.l1 * p.l1).max(p.l2 * p.l2);
    let no_kappa = p.kappa_plus == 0.0 && p.kappa_minus == 0.0;
    let vartheta_t = (no_kappa && p.m_bar == [0.0; 3])
        .then(|| surface_tension_threshold(p.g, p.rho_jump(), p.l1, p.l2))
        .transpose()?;
    let m_s = (p.vartheta == 0.0 && no_kappa && p.lambda > 0.0)
        .then(|| vertical_field_threshold(p.g, p.rho_jump(), p.lambda, p.l, p.tau))
        .transpose()?;
    let analytic_bound = match m_s {
        Some(ms) if p.m_bar[0] == 0.0 && p.m_bar[1] == 0.0 && p.m_bar[2] != 0.0 => {
            Some((ms / p.m_bar[2]).powi(2))
        }
        _ => None,
    };
    let mut report = ThresholdReport {
        dis_value: None,
        dis_infinite: true,
        verdict: Verdict::Unstable,
        vartheta_t,
        m_s,
        poincare_const,
        a_const,
        per_mode_curve: Vec::new(),
        argmax: None,
        extrapolated: None,
        sup_may_be_limit: false,
        analytic_bound,
        infinite_modes: Vec::new(),
    };
    if p.vartheta == 0.0 && no_kappa && m[2] == 0.0 {
        return Ok(report);
    }
    let spec = ModeSpectrum::new_unchecked(&p, lattice, degree)?;
    let mut per_class: Vec<(WaveVector, f64)> = Vec::new();
    for (rep, forms) in spec.discriminant_forms() {
        let mut v = 0.0f64;
        for (num, den) in &forms {
            match linalg::sup_quotient(num, den) {
                Ok(q) => v = v.max(q),
                Err(Error::IndefiniteDenominator) => v = f64::INFINITY,
                Err(e) => return Err(e),
            }
        }
        if v.is_infinite() {
            report.infinite_modes.push(rep);
        }
        per_class.push((rep, v));
    }
    let mut best: Option<(f64, WaveVector)> = None;
    for &(w, v) in &per_class {
        if best.is_none_or(|b| v > b.0 || (v == b.0 && w.key() < b.1.key())) {
            best = Some((v, w));
        }
    }
    let (dis, argmax) = best.expect("nonempty lattice");
    let mut curve: Vec<(f64, f64)> = per_class.iter().map(|(w, v)| (w.xi_norm(), *v)).collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (x, v) in curve {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() <= 1e-13 * x => last.1 = last.1.max(v),
            _ => merged.push((x, v)),
        }
    }
    let xmax = merged.last().map(|c| c.0).unwrap_or(0.0);
    report.sup_may_be_limit = dis.is_finite() && (argmax.xi_norm() - xmax).abs() <= 1e-13 * xmax;
    report.extrapolated = if merged.iter().all(|c| c.1.is_finite()) {
        richardson(&merged)
    } else {
        None
    };
    report.per_mode_curve = merged;
    report.argmax = Some(argmax);
    report.dis_infinite = dis.is_infinite();
    report.dis_value = dis.is_finite().then_some(dis);
    report.verdict = verdict_of(dis);
    Ok(report)
}

/// Smallest `n` in `1..=big_n` with `|n alpha - m| < 1/big_n`, `m` the nearest
/// integer to `n alpha`.
pub fn dirichlet_approximation(alpha: f64, big_n: u64) -> (u64, i64) {
    let n_max = big_n.max(1);
    let bound = 1.0 / n_max as f64;
    for n in 1..=n_max {
        let x = n as f64 * alpha;
        let m = x.round();
        if (x - m).abs() < bound {
            return (n, m as i64);
        }
    }
    // unreachable for finite alpha by the pigeonhole principle; rounding at
    // the bound is the only way here
    let x = n_max as f64 * alpha;
    (n_max, x.round() as i64)
}

/// Best rational `a/b` with `b <= max_den` from the continued fraction of `x`,
/// accepted only if it matches `x` to `tol` relative.
pub fn rational_approximation(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let scale = x.abs().max(1.0);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol * scale {
            return Some((h1, k1));
        }
        let frac = r - r.floor();
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

const RATIONAL_DEN: i64 = 10_000;
const RATIONAL_TOL: f64 = 1e-12;
const DIRICHLET_CAP: u64 = 1_000_000;

/// Smooth bump equal to 1 at `y3 = 0`, with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    scale: f64,
}

impl Bump {
    /// Supported on the middle 60% of `(-l, tau)`; if that misses the interface
    /// it is recentred at 0 with half width `0.6 min(l, tau)`.
    pub fn new(l: f64, tau: f64) -> Self {
        let (mut c, mut h) = (0.5 * (tau - l), 0.3 * (l + tau));
        if c.abs() >= 0.9 * h {
            c = 0.0;
            h = 0.6 * l.min(tau);
        }
        let mut b = Self {
            center: c,
            half_width: h,
            scale: 1.0,
        };
        b.scale = 1.0 / b.raw(0.0).0;
        b
    }

    fn raw(&self, y: f64) -> (f64, f64) {
        let t = (y - self.center) / self.half_width;
        if t.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - t * t;
        let v = (1.0 - 1.0 / q).exp();
        (v, v * (-2.0 * t / (q * q)) / self.half_width)
    }

    /// `(psi(y), psi'(y))`
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let (v, d) = self.raw(y);
        (v * self.scale, d * self.scale)
    }
}

/// Composite Clenshaw-Curtis rule on `[a, b]`.
fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let x = cgl_points(order);
    let w = clenshaw_curtis(order);
    let hp = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * (order + 1));
    for k in 0..panels {
        let lo = a + k as f64 * hp;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * hp * (xi + 1.0), 0.5 * hp * wi));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Destabilizer {
    pub wavevector: WaveVector,
    /// `w = (i xi psi' / |xi|^2, psi)` sampled on the collocation nodes
    pub profile: ModeProfile,
    /// `||d_M w||^2 / |w3(0)|^2` with the effective field
    pub achieved_ratio: f64,
    pub rational: bool,
    /// `(n, m, N)` of the Dirichlet step in the irrational case
    pub dirichlet: Option<(u64, i64, u64)>,
}

fn half_lattice(k1: i64, k2: i64) -> (i64, i64) {
    if k1 < 0 || (k1 == 0 && k2 < 0) {
        (-k1, -k2)
    } else {
        (k1, k2)
    }
}

/// `||d_M w||^2 / |psi(0)|^2 = m_h^2 int (psi^2 + psi'^2 / |xi|^2)`.
fn destabilizer_ratio(p: &RTParameters, xi: &WaveVector, bump: &Bump) -> f64 {
    let mh = xi.field_projection(p);
    if mh == 0.0 {
        return 0.0;
    }
    let (a, b) = (bump.center - bump.half_width, bump.center + bump.half_width);
    let xs = xi.xi_sq();
    let integral: f64 = composite_rule(a, b, 64, 32)
        .into_iter()
        .map(|(y, w)| {
            let (v, d) = bump.eval(y);
            w * (v * v + d * d / xs)
        })
        .sum();
    mh * mh * integral
}

fn destabilizer_profile(p: &RTParameters, xi: &WaveVector, bump: &Bump, degree: usize) -> ModeProfile {
    let grids = Grids::for_params(p, degree);
    let mut w = ModeProfile::zeros(*xi, degree);
    let xs = xi.xi_sq();
    let i = C64::i();
    for layer in Layer::BOTH {
        let ys = grids.get(layer).y.clone();
        let lp = w.layer_mut(layer);
        for (j, y) in ys.into_iter().enumerate() {
            let (v, d) = bump.eval(y);
            lp.phi[j] = i * xi.xi1 * d / xs;
            lp.psi[j] = i * xi.xi2 * d / xs;
            lp.theta[j] = C64::new(v, 0.0);
        }
    }
    w
}

/// Divergence-free test field with `||d_M w||^2 < a_target |w3(0)|^2` for a
/// purely horizontal field.
pub fn horizontal_field_destabilizer(p: &RTParameters, a_target: f64, degree: usize) -> Result<Destabilizer> {
    if p.m_bar[2] != 0.0 || (p.m_bar[0] == 0.0 && p.m_bar[1] == 0.0) {
        return Err(Error::VerticalFieldPresent);
    }
    if !(a_target > 0.0) {
        return Err(Error::InvalidArgument(format!("a_target = {a_target} must be positive")));
    }
    if degree < crate::discretize::MIN_DEGREE {
        return Err(Error::DegreeTooLow(degree));
    }
    let bump = Bump::new(p.l, p.tau);
    let [m1, m2, _] = p.m_bar;
    let exact = if m1 == 0.0 {
        Some((1, 0))
    } else {
        let r = p.l1 * m2 / (m1 * p.l2);
        // M . xi = (m1 / L1) (k1 + r k2) vanishes for k = (a, -b) when r = a / b
        rational_approximation(r, RATIONAL_DEN, RATIONAL_TOL).map(|(a, b)| half_lattice(a, -b))
    };
    if let Some((k1, k2)) = exact {
        let xi = WaveVector::of(p, k1, k2);
        return Ok(Destabilizer {
            wavevector: xi,
            profile: destabilizer_profile(p, &xi, &bump, degree),
            achieved_ratio: destabilizer_ratio(p, &xi, &bump),
            rational: true,
            dirichlet: None,
        });
    }
    let r = p.l1 * m2 / (m1 * p.l2);
    let mut big_n = 2u64;
    loop {
        let (n, m) = dirichlet_approximation(r, big_n);
        // k1 + r k2 = m - n r
        let (k1, k2) = half_lattice(m, -(n as i64));
        let xi = WaveVector::of(p, k1, k2);
        let ratio = destabilizer_ratio(p, &xi, &bump);
        if ratio < a_target {
            return Ok(Destabilizer {
                wavevector: xi,
                profile: destabilizer_profile(p, &xi, &bump, degree),
                achieved_ratio: ratio,
                rational: false,
                dirichlet: Some((n, m, big_n)),
            });
        }
        if big_n >= DIRICHLET_CAP {
            return Err(Error::DenominatorBoundExceeded(DIRICHLET_CAP));
        }
        big_n = (big_n * 2).min(DIRICHLET_CAP);
    }
}

pub const COEFFICIENTS: [&str; 3] = ["vartheta", "M3", "kappa_scale"];

/// Set a sweepable coefficient. `kappa_scale` multiplies both elasticity
/// coefficients of `base`, or sets both when they are zero.
pub fn set_coefficient(base: &RTParameters, name: &str, value: f64) -> Result<RTParameters> {
    let mut p = *base;
    match name {
        "vartheta" => p.vartheta = value,
        "M3" => p.m_bar[2] = value,
        "kappa_scale" => {
            if base.kappa_plus == 0.0 && base.kappa_minus == 0.0 {
                p.kappa_plus = value;
                p.kappa_minus = value;
            } else {
                p.kappa_plus = base.kappa_plus * value;
                p.kappa_minus = base.kappa_minus * value;
            }
        }
        other => return Err(Error::UnknownCoefficient(other.into())),
    }
    Ok(p)
}

/// Coefficient value where the instability verdict flips, bisected until the
/// bracket is narrower than `tol` relative.
pub fn critical_coefficient(
    p: &RTParameters,
    name: &str,
    bracket: (f64, f64),
    lattice: &ModeLattice,
    degree: usize,
    tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    let unstable = |v: f64| -> Result<bool> {
        let q = validate_parameters(&set_coefficient(p, name, v)?)?;
        Ok(ModeSpectrum::new_unchecked(&q, lattice, degree)?.zero_limit().unstable)
    };
    let ulo = unstable(lo)?;
    if ulo == unstable(hi)? {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > tol * lo.abs().max(hi.abs()) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if unstable(mid)? == ulo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
