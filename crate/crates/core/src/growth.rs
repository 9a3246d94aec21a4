//! Largest growth rate and the associated normal mode.
//!
//! `Lambda` is the root of `h(s) = s - sqrt(-alpha(s))` on `(0, J)`, where `J`
//! is the neutral point `alpha(J) = 0`. Since `alpha` is increasing, `h` is
//! increasing and plain bisection always converges. The lattice is frozen for
//! the whole bisection so that every `alpha` sample comes from the same
//! discrete problem; with an adaptive lattice the shell is checked at the root
//! and the solve is repeated on a larger lattice if needed.

use serde::{Deserialize, Serialize};

use crate::discretize::build_mode_operators;
use crate::error::{Error, Result};
use crate::model::{validate_parameters, Layer, ModeProfile, RTParameters, WaveVector};
use crate::spectrum::{ModeLattice, ModeSpectrum, ZeroLimit};
use crate::stokes::{pressure_for_eigenmode, PressureProfile};
use crate::discretize::Grids;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Unstable,
    Stable,
    /// discriminant within rounding of 1
    Neutral,
}

/// Sign-change bracket of `alpha` around the neutral point `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralBracket {
    pub s_lo: f64,
    pub s_hi: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

/// Max-norm residuals of the normal-mode equations, each relative to the
/// largest term entering it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub interior: f64,
    pub interface: f64,
    /// wall values relative to `max |w|`
    pub boundary: f64,
    /// `max |div w|` over all nodes
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthResult {
    pub verdict: Verdict,
    pub lambda: Option<f64>,
    pub critical_wavevector: Option<WaveVector>,
    /// `||sqrt(rho) w||^2 = 1`
    pub eigenprofile: Option<ModeProfile>,
    pub pressure_profile: Option<PressureProfile>,
    pub frak_j: Option<NeutralBracket>,
    /// every `(s, alpha(s))` evaluated, in order
    pub iterations: Vec<(f64, f64)>,
    pub residual_report: Option<ResidualReport>,
    /// relative difference of the two pressure recoveries
    pub pressure_consistency: Option<f64>,
    /// `alpha(Lambda)` from the fresh eigensolve at the root
    pub alpha_at_lambda: Option<f64>,
    pub zero_limit: ZeroLimit,
    pub degree: usize,
    pub lattice_k_max: u32,
}

impl GrowthResult {
    /// `|Lambda^2 + alpha(Lambda)| / max(1, Lambda^2)`.
    pub fn fixed_point_defect(&self) -> Option<f64> {
        let (l, a) = (self.lambda?, self.alpha_at_lambda?);
        Some((l * l + a).abs() / (l * l).max(1.0))
    }
}

const MAX_STEPS: u32 = 60;

/// Bracket the neutral point on a prebuilt spectrum, logging every sample.
pub fn find_neutral_bound_on(
    spec: &ModeSpectrum,
    s_hi_guess: f64,
    log: &mut Vec<(f64, f64)>,
) -> Result<NeutralBracket> {
    if !spec.zero_limit().unstable {
        return Err(Error::NotUnstable);
    }
    let mut eval = |s: f64| -> Result<f64> {
        let a = spec.alpha(s)?.0;
        log.push((s, a));
        Ok(a)
    };
    let s0 = if s_hi_guess > 0.0 && s_hi_guess.is_finite() {
        s_hi_guess
    } else {
        1.0
    };
    let a0 = eval(s0)?;
    let (mut lo, mut hi, mut alo, mut ahi);
    if a0 < 0.0 {
        (lo, alo) = (s0, a0);
        (hi, ahi) = (s0, a0);
        let mut steps = 0;
        while ahi < 0.0 {
            if steps == MAX_STEPS {
                return Err(Error::ExpansionExhausted(MAX_STEPS));
            }
            (lo, alo) = (hi, ahi);
            hi *= 2.0;
            ahi = eval(hi)?;
            steps += 1;
        }
    } else {
        (hi, ahi) = (s0, a0);
        (lo, alo) = (s0, a0);
        let mut steps = 0;
        while alo >= 0.0 {
            if steps == MAX_STEPS {
                return Err(Error::NotUnstable);
            }
            (hi, ahi) = (lo, alo);
            lo *= 0.5;
            alo = eval(lo)?;
            steps += 1;
        }
    }
    while hi - lo > 1e-3 * hi {
        let m = 0.5 * (lo + hi);
        let a = eval(m)?;
        if a < 0.0 {
            (lo, alo) = (m, a);
        } else {
            (hi, ahi) = (m, a);
        }
    }
    Ok(NeutralBracket {
        s_lo: lo,
        s_hi: hi,
        alpha_lo: alo,
        alpha_hi: ahi,
    })
}

pub fn find_neutral_bound(
    p: &RTParameters,
    lattice: &ModeLattice,
    degree: usize,
    s_hi_guess: f64,
) -> Result<NeutralBracket> {
    let spec = ModeSpectrum::new(p, lattice, degree)?;
    find_neutral_bound_on(&spec, s_hi_guess, &mut Vec::new())
}

fn h_of(s: f64, alpha: f64) -> f64 {
    s - (-alpha).max(0.0).sqrt()
}

fn converged(s: f64, alpha: f64, tol: f64) -> bool {
    h_of(s, alpha).abs() <= tol && (s * s + alpha).abs() <= tol * (s * s).max(1.0)
}

/// Growth rate on a frozen spectrum.
pub fn solve_growth_rate_on(spec: &ModeSpectrum, tol: f64) -> Result<GrowthResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    let p = *spec.params();
    let degree = spec.degree();
    let zero_limit = spec.zero_limit();
    let mut result = GrowthResult {
        verdict: Verdict::Stable,
        lambda: None,
        critical_wavevector: None,
        eigenprofile: None,
        pressure_profile: None,
        frak_j: None,
        iterations: Vec::new(),
        residual_report: None,
        pressure_consistency: None,
        alpha_at_lambda: None,
        zero_limit,
        degree,
        lattice_k_max: spec.lattice().k_max,
    };
    if !zero_limit.unstable {
        return Ok(result);
    }
    // a natural scale for J: sqrt(-alpha(0)) bounds Lambda from above
    let guess = (-zero_limit.value).max(0.0).sqrt().max(1e-3);
    let mut log = Vec::new();
    let bracket = find_neutral_bound_on(spec, guess, &mut log)?;

    let mut a = 0.0f64;
    let mut b = bracket.s_hi;
    for &(s, al) in &log {
        let h = h_of(s, al);
        if h < 0.0 {
            a = a.max(s);
        } else if h > 0.0 {
            b = b.min(s);
        }
    }
    let (lambda, wv) = loop {
        let m = 0.5 * (a + b);
        let (al, wv) = spec.alpha(m)?;
        log.push((m, al));
        if converged(m, al, tol) {
            break (m, wv);
        }
        let h = h_of(m, al);
        if h < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 4.0 * f64::EPSILON * b {
            return Err(Error::ToleranceNotMet { s: m, h });
        }
    };

    let eig = spec.eigenpair(&wv, lambda)?;
    let ops = build_mode_operators(&p, &wv, degree)?;
    let (beta, consistency) = pressure_for_eigenmode(&p, &ops, &eig.profile, lambda)?;
    result.verdict = Verdict::Unstable;
    result.lambda = Some(lambda);
    result.critical_wavevector = Some(wv);
    result.alpha_at_lambda = Some(eig.eigenvalue);
    result.eigenprofile = Some(eig.profile);
    result.pressure_profile = Some(beta);
    result.pressure_consistency = Some(consistency);
    result.frak_j = Some(bracket);
    result.iterations = log;
    let mode = build_normal_mode(&result)?;
    result.residual_report = Some(normal_mode_residual(&p, &mode, degree));
    Ok(result)
}

/// Largest growth rate `Lambda`, or a `Stable` verdict when the discrete
/// energy is nonnegative on every lattice mode.
pub fn solve_growth_rate(p: &RTParameters, lattice: &ModeLattice, degree: usize, tol: f64) -> Result<GrowthResult> {
    let p = validate_parameters(p)?;
    let mut k = lattice.k_max;
    loop {
        let spec = ModeSpectrum::new_unchecked(&p, &lattice.with_k_max(k), degree)?;
        let r = solve_growth_rate_on(&spec, tol)?;
        if !lattice.adaptive || r.verdict == Verdict::Stable {
            return Ok(r);
        }
        let sample = spec.sample(r.lambda.expect("unstable result"))?;
        if spec.shell_clear(&sample) {
            return Ok(r);
        }
        if k >= lattice.cap {
            return Err(Error::LatticeExhausted { cap: lattice.cap });
        }
        k = (k + (k / 2).max(4)).min(lattice.cap);
    }
}

/// `(eta, u, q) = e^{Lambda t} (w / Lambda, w, beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMode {
    pub lambda: f64,
    pub wavevector: WaveVector,
    pub eta_profile: ModeProfile,
    pub u_profile: ModeProfile,
    pub q_profile: PressureProfile,
}

/// Snapshot of a normal mode at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub eta: ModeProfile,
    pub u: ModeProfile,
    pub q: PressureProfile,
}

impl NormalMode {
    pub fn field(&self, t: f64) -> ModeField {
        let e = C64::new((self.lambda * t).exp(), 0.0);
        ModeField {
            eta: self.eta_profile.scaled(e),
            u: self.u_profile.scaled(e),
            q: self.q_profile.scaled(e),
        }
    }
}

pub fn build_normal_mode(result: &GrowthResult) -> Result<NormalMode> {
    if result.verdict != Verdict::Unstable {
        return Err(Error::StableInput);
    }
    let (Some(lambda), Some(w), Some(beta)) = (result.lambda, &result.eigenprofile, &result.pressure_profile) else {
        return Err(Error::StableInput);
    };
    let eta = w.scaled(C64::new(1.0 / lambda, 0.0));
    // u is defined through eta so that eta * Lambda == u holds bit for bit
    let u = eta.scaled(C64::new(lambda, 0.0));
    Ok(NormalMode {
        lambda,
        wavevector: w.wavevector,
        eta_profile: eta,
        u_profile: u,
        q_profile: beta.clone(),
    })
}

/// Strong-form residuals of the normal-mode system at the collocation nodes.
///
/// The profile's own degree is used; `degree` only documents the caller's
/// expectation and is checked in debug builds.
pub fn normal_mode_residual(p: &RTParameters, mode: &NormalMode, degree: usize) -> ResidualReport {
    let w = &mode.u_profile;
    let n = w.degree;
    debug_assert_eq!(n, degree, "profile degree");
    let lam = mode.lambda;
    let xi = w.wavevector;
    let (x1, x2, xs) = (xi.xi1, xi.xi2, xi.xi_sq());
    let m3 = p.effective_field()[2];
    let mh = xi.field_projection(p);
    let grids = Grids::for_params(p, n);
    let i = C64::i();
    let beta = &mode.q_profile;

    let mut interior = (0.0f64, 0.0f64);
    let mut div = 0.0f64;
    let mut derivs = Vec::new();
    for layer in Layer::BOTH {
        let g = grids.get(layer);
        let lp = w.layer(layer);
        let rho = p.rho(layer);
        let nu = lam * p.mu(layer) + p.kappa(layer) * rho;
        let d1: Vec<Vec<C64>> = (0..3).map(|c| crate::cheb::apply(&g.d, lp.component(c))).collect();
        let d2: Vec<Vec<C64>> = d1.iter().map(|v| crate::cheb::apply(&g.d, v)).collect();
        let bq = &beta.values[layer.index()];
        let dbq = beta.derivative(layer);
        for j in 1..n {
            let grad = [i * x1 * bq[j - 1], i * x2 * bq[j - 1], dbq[j - 1]];
            for c in 0..3 {
                let u = lp.component(c)[j];
                let inertia = u * (lam * lam * rho);
                let mag = -u * (mh * mh) + 2.0 * i * mh * m3 * d1[c][j] + m3 * m3 * d2[c][j];
                let press = grad[c] * lam;
                let visc = (d2[c][j] - u * xs) * nu;
                let r = inertia - mag + press - visc;
                interior.0 = interior.0.max(r.norm());
                for t in [inertia, mag, press, visc] {
                    interior.1 = interior.1.max(t.norm());
                }
            }
        }
        for j in 0..=n {
            let d = i * x1 * lp.phi[j] + i * x2 * lp.psi[j] + d1[2][j];
            div = div.max(d.norm());
        }
        derivs.push(d1);
    }

    // interface: upper trace minus lower trace
    let trace = |layer: Layer| -> ([C64; 3], [C64; 3], C64) {
        let li = layer.index();
        let j = if layer == Layer::Minus { n } else { 0 };
        let lp = w.layer(layer);
        let u = [lp.phi[j], lp.psi[j], lp.theta[j]];
        let d = [derivs[li][0][j], derivs[li][1][j], derivs[li][2][j]];
        (u, d, beta.eval(layer, 0.0))
    };
    let theta0 = w.interface_trace();
    let mut jump = [C64::new(0.0, 0.0); 3];
    let mut jscale = 0.0f64;
    for (layer, sign) in [(Layer::Plus, 1.0), (Layer::Minus, -1.0)] {
        let (u, d, b) = trace(layer);
        let nu = lam * p.mu(layer) + p.kappa(layer) * p.rho(layer);
        let strain = [d[0] + i * x1 * u[2], d[1] + i * x2 * u[2], 2.0 * d[2]];
        for c in 0..3 {
            let press = if c == 2 { b * lam } else { C64::new(0.0, 0.0) };
            let visc = -strain[c] * nu;
            let mag = -(i * mh * u[c] + m3 * d[c]) * m3;
            jump[c] += (press + visc + mag) * sign;
            for t in [press, visc, mag] {
                jscale = jscale.max(t.norm());
            }
        }
    }
    let grav = theta0 * (p.g * p.rho_jump());
    let tens = theta0 * (p.vartheta * xs);
    jump[2] += tens - grav;
    jscale = jscale.max(grav.norm()).max(tens.norm());
    let jmax = jump.iter().fold(0.0f64, |a, v| a.max(v.norm()));

    let wmax = w.max_abs();
    let mut walls = 0.0f64;
    for c in 0..3 {
        walls = walls.max(w.layer_minus.component(c)[0].norm());
        walls = walls.max(w.layer_plus.component(c)[n].norm());
    }
    let rel = |a: f64, s: f64| if s > 0.0 { a / s } else { a };
    ResidualReport {
        interior: rel(interior.0, interior.1),
        interface: rel(jmax, jscale),
        boundary: rel(walls, wmax),
        divergence: div,
    }
}
