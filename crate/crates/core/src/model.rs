//! Problem parameters, Fourier wavevectors, per-mode profiles and the energy
//! functionals `E`, `I` and `F`.
//!
//! A mode is `w(y) = (phi, psi, theta)(y3) * exp(i xi . y_h)`. Horizontal
//! derivatives become multiplication by `i xi`. Every integral below omits the
//! common horizontal factor `4 pi^2 L1 L2` (see [`Functionals::horizontal_measure`]).

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cheb::{apply, LayerGrid};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RTParameters {
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub vartheta: f64,
    pub g: f64,
    pub lambda: f64,
    pub m_bar: [f64; 3],
    pub l: f64,
    pub tau: f64,
    pub l1: f64,
    pub l2: f64,
}

impl RTParameters {
    /// Heavy-over-light reference fluids with every stabilizer switched off.
    pub fn reference() -> Self {
        Self {
            rho_plus: 2.0,
            rho_minus: 1.0,
            mu_plus: 1.0,
            mu_minus: 1.0,
            kappa_plus: 0.0,
            kappa_minus: 0.0,
            vartheta: 0.0,
            g: 1.0,
            lambda: 0.0,
            m_bar: [0.0; 3],
            l: 1.0,
            tau: 1.0,
            l1: 1.0,
            l2: 1.0,
        }
    }

    pub fn rho_jump(&self) -> f64 {
        self.rho_plus - self.rho_minus
    }

    /// Field actually used by the forms: `sqrt(lambda) * m_bar`.
    pub fn effective_field(&self) -> [f64; 3] {
        let s = self.lambda.sqrt();
        [s * self.m_bar[0], s * self.m_bar[1], s * self.m_bar[2]]
    }

    pub fn rho(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Minus => self.rho_minus,
            Layer::Plus => self.rho_plus,
        }
    }

    pub fn mu(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Minus => self.mu_minus,
            Layer::Plus => self.mu_plus,
        }
    }

    pub fn kappa(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Minus => self.kappa_minus,
            Layer::Plus => self.kappa_plus,
        }
    }

    /// Layer interval in `y3`.
    pub fn interval(&self, layer: Layer) -> (f64, f64) {
        match layer {
            Layer::Minus => (-self.l, 0.0),
            Layer::Plus => (0.0, self.tau),
        }
    }

    pub fn validate(self) -> Result<Self> {
        validate_parameters(&self)
    }
}

/// Check positivity, nonnegativity and the RT condition `rho_plus > rho_minus`.
pub fn validate_parameters(p: &RTParameters) -> Result<RTParameters> {
    let positive = [
        ("rho_plus", p.rho_plus),
        ("rho_minus", p.rho_minus),
        ("mu_plus", p.mu_plus),
        ("mu_minus", p.mu_minus),
        ("g", p.g),
        ("l", p.l),
        ("tau", p.tau),
        ("l1", p.l1),
        ("l2", p.l2),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveParameter(name.into()));
        }
    }
    let nonneg = [
        ("kappa_plus", p.kappa_plus),
        ("kappa_minus", p.kappa_minus),
        ("vartheta", p.vartheta),
        ("lambda", p.lambda),
    ];
    for (name, v) in nonneg {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::NegativeCoefficient(name.into()));
        }
    }
    for (i, v) in p.m_bar.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("m_bar[{i}] is not finite")));
        }
    }
    if p.rho_plus <= p.rho_minus {
        return Err(Error::RtConditionViolated {
            rho_plus: p.rho_plus,
            rho_minus: p.rho_minus,
        });
    }
    Ok(*p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    /// lower layer, `-l < y3 < 0`
    Minus,
    /// upper layer, `0 < y3 < tau`
    Plus,
}

impl Layer {
    pub const BOTH: [Layer; 2] = [Layer::Minus, Layer::Plus];

    pub fn index(self) -> usize {
        match self {
            Layer::Minus => 0,
            Layer::Plus => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVector {
    pub k1: i64,
    pub k2: i64,
    pub xi1: f64,
    pub xi2: f64,
}

impl WaveVector {
    pub fn new(k1: i64, k2: i64, l1: f64, l2: f64) -> Self {
        Self {
            k1,
            k2,
            xi1: k1 as f64 / l1,
            xi2: k2 as f64 / l2,
        }
    }

    pub fn of(p: &RTParameters, k1: i64, k2: i64) -> Self {
        Self::new(k1, k2, p.l1, p.l2)
    }

    pub fn xi_sq(&self) -> f64 {
        self.xi1 * self.xi1 + self.xi2 * self.xi2
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi_sq().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }

    /// `m_h = (sqrt(lambda) M_h) . xi`.
    pub fn field_projection(&self, p: &RTParameters) -> f64 {
        let m = p.effective_field();
        m[0] * self.xi1 + m[1] * self.xi2
    }

    pub fn key(&self) -> (i64, i64) {
        (self.k1, self.k2)
    }
}

/// Nodal values of the three velocity components on one layer's CGL nodes
/// (ascending in `y3`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub phi: Vec<C64>,
    pub psi: Vec<C64>,
    pub theta: Vec<C64>,
}

impl LayerProfile {
    pub fn zeros(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n + 1];
        Self {
            phi: z.clone(),
            psi: z.clone(),
            theta: z,
        }
    }

    pub fn component(&self, c: usize) -> &[C64] {
        match c {
            0 => &self.phi,
            1 => &self.psi,
            _ => &self.theta,
        }
    }

    pub fn component_mut(&mut self, c: usize) -> &mut Vec<C64> {
        match c {
            0 => &mut self.phi,
            1 => &mut self.psi,
            _ => &mut self.theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub wavevector: WaveVector,
    pub degree: usize,
    pub layer_minus: LayerProfile,
    pub layer_plus: LayerProfile,
}

impl ModeProfile {
    pub fn zeros(wavevector: WaveVector, degree: usize) -> Self {
        Self {
            wavevector,
            degree,
            layer_minus: LayerProfile::zeros(degree),
            layer_plus: LayerProfile::zeros(degree),
        }
    }

    pub fn layer(&self, layer: Layer) -> &LayerProfile {
        match layer {
            Layer::Minus => &self.layer_minus,
            Layer::Plus => &self.layer_plus,
        }
    }

    pub fn layer_mut(&mut self, layer: Layer) -> &mut LayerProfile {
        match layer {
            Layer::Minus => &mut self.layer_minus,
            Layer::Plus => &mut self.layer_plus,
        }
    }

    /// Flatten as `[minus: phi, psi, theta | plus: phi, psi, theta]`.
    pub fn to_dofs(&self) -> DVector<C64> {
        let n1 = self.degree + 1;
        let mut v = DVector::zeros(6 * n1);
        for layer in Layer::BOTH {
            let lp = self.layer(layer);
            for c in 0..3 {
                let off = layer.index() * 3 * n1 + c * n1;
                for (j, x) in lp.component(c).iter().enumerate() {
                    v[off + j] = *x;
                }
            }
        }
        v
    }

    pub fn from_dofs(wavevector: WaveVector, degree: usize, x: &DVector<C64>) -> Self {
        let n1 = degree + 1;
        assert_eq!(x.len(), 6 * n1, "dof vector length");
        let mut out = Self::zeros(wavevector, degree);
        for layer in Layer::BOTH {
            let lp = out.layer_mut(layer);
            for c in 0..3 {
                let off = layer.index() * 3 * n1 + c * n1;
                let comp = lp.component_mut(c);
                for j in 0..n1 {
                    comp[j] = x[off + j];
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for layer in Layer::BOTH {
            let lp = out.layer_mut(layer);
            for k in 0..3 {
                for v in lp.component_mut(k).iter_mut() {
                    *v *= c;
                }
            }
        }
        out
    }

    /// `theta(0)`, read from the lower layer.
    pub fn interface_trace(&self) -> C64 {
        self.layer_minus.theta[self.degree]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_dofs().iter().fold(0.0, |a, v| a.max(v.norm()))
    }

    /// Check lengths and the wavevector against the parameters.
    pub fn check_consistency(&self, p: &RTParameters) -> Result<()> {
        let n1 = self.degree + 1;
        for layer in Layer::BOTH {
            let lp = self.layer(layer);
            for c in 0..3 {
                if lp.component(c).len() != n1 {
                    return Err(Error::ProfileMismatch(format!(
                        "{layer:?} component {c} has {} values, degree {} needs {n1}",
                        lp.component(c).len(),
                        self.degree
                    )));
                }
            }
        }
        let expect = WaveVector::of(p, self.wavevector.k1, self.wavevector.k2);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if !close(expect.xi1, self.wavevector.xi1) || !close(expect.xi2, self.wavevector.xi2) {
            return Err(Error::ProfileMismatch(format!(
                "wavevector ({}, {}) does not match k/L for L = ({}, {})",
                self.wavevector.xi1, self.wavevector.xi2, p.l1, p.l2
            )));
        }
        Ok(())
    }
}

/// Values of the energy functionals on one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "F")]
    pub f: f64,
    /// `||sqrt(rho) w||^2`
    pub rho_norm_sq: f64,
    /// `g [rho] |theta(0)|^2`
    pub grav_term: f64,
    /// `1/2 ||sqrt(mu) D w||^2`
    pub visc_term: f64,
    pub elastic_term: f64,
    pub magnetic_term: f64,
    pub tension_term: f64,
    /// factor `4 pi^2 L1 L2` omitted from every value above
    pub horizontal_measure: f64,
}

/// Evaluate `E`, `I` and `F(., s)` on `w` by per-layer quadrature of the
/// pointwise integrands.
pub fn evaluate_functionals(p: &RTParameters, w: &ModeProfile, s: f64) -> Result<Functionals> {
    w.check_consistency(p)?;
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("s = {s} must be nonnegative")));
    }
    let xi = w.wavevector;
    let m = p.effective_field();
    let mh = xi.field_projection(p);
    let m3 = m[2];
    let i = C64::i();
    let (mut mass, mut visc, mut elast, mut mag) = (0.0, 0.0, 0.0, 0.0);
    for layer in Layer::BOTH {
        let (lo, hi) = p.interval(layer);
        let grid = LayerGrid::new(lo, hi, w.degree);
        let lp = w.layer(layer);
        let v: Vec<Vec<C64>> = (0..3).map(|c| apply(&grid.interp, lp.component(c))).collect();
        let dv: Vec<Vec<C64>> = (0..3).map(|c| apply(&grid.interp_d, lp.component(c))).collect();
        let (mut m0, mut d0, mut g0) = (0.0, 0.0, 0.0);
        for (k, wk) in grid.fine_w.iter().enumerate() {
            let (a, b, t) = (v[0][k], v[1][k], v[2][k]);
            let (da, db, dt) = (dv[0][k], dv[1][k], dv[2][k]);
            m0 += wk * (a.norm_sqr() + b.norm_sqr() + t.norm_sqr());
            // D w = grad w + grad w^T with grad_j -> i xi_j for j = 1, 2
            let d11 = 2.0 * i * xi.xi1 * a;
            let d22 = 2.0 * i * xi.xi2 * b;
            let d33 = 2.0 * dt;
            let d12 = i * xi.xi2 * a + i * xi.xi1 * b;
            let d13 = da + i * xi.xi1 * t;
            let d23 = db + i * xi.xi2 * t;
            let strain = 0.5 * (d11.norm_sqr() + d22.norm_sqr() + d33.norm_sqr())
                + d12.norm_sqr()
                + d13.norm_sqr()
                + d23.norm_sqr();
            d0 += wk * strain;
            let dm = |u: C64, du: C64| (i * mh * u + m3 * du).norm_sqr();
            g0 += wk * (dm(a, da) + dm(b, db) + dm(t, dt));
        }
        let rho = p.rho(layer);
        mass += rho * m0;
        visc += p.mu(layer) * d0;
        elast += p.kappa(layer) * rho * d0;
        mag += g0;
    }
    let th0 = w.interface_trace().norm_sqr();
    let grav = p.g * p.rho_jump() * th0;
    let tension = p.vartheta * xi.xi_sq() * th0;
    let i_val = tension + elast + mag;
    let e = i_val - grav;
    Ok(Functionals {
        e,
        i: i_val,
        f: e + s * visc,
        rho_norm_sq: mass,
        grav_term: grav,
        visc_term: visc,
        elastic_term: elast,
        magnetic_term: mag,
        tension_term: tension,
        horizontal_measure: 4.0 * PI * PI * p.l1 * p.l2,
    })
}
