//! Manufactured two-layer Stokes solution shared by the integration tests.

use rtgrowth::discretize::Grids;
use rtgrowth::model::Layer;
use rtgrowth::stokes::{solve_stokes, StokesData, StokesProblem};
use rtgrowth::{RTParameters, WaveVector, C64};

/// Dense polynomial with real coefficients, lowest order first.
#[derive(Clone)]
struct Poly(Vec<C64>);

impl Poly {
    fn eval(&self, y: f64) -> C64 {
        self.0.iter().rev().fold(C64::new(0.0, 0.0), |a, c| a * y + c)
    }
    fn deriv(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect())
    }
    fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }
}

fn re(v: &[f64]) -> Poly {
    Poly(v.iter().map(|&x| C64::new(x, 0.0)).collect())
}

struct Manufactured {
    u: [[Poly; 3]; 2],
    q: [Poly; 2],
}

/// Velocity vanishing at both walls and continuous at 0, arbitrary pressure.
fn manufactured(l: f64, tau: f64) -> Manufactured {
    let wall = re(&[-l * tau, l - tau, 1.0]); // (y + l)(y - tau)
    let c = |a: f64, b: f64| C64::new(a, b);
    let shape = |v: &[C64]| Poly(v.to_vec());
    let common = [
        shape(&[c(1.0, 0.5), c(0.2, 0.0), c(0.0, -0.3)]),
        shape(&[c(-0.4, 0.1), c(0.0, 0.7)]),
        shape(&[c(0.6, -0.2), c(0.3, 0.3), c(0.1, 0.0), c(0.05, 0.0)]),
    ];
    // the upper layer adds multiples of y^2 so values agree at 0 but
    // derivatives jump
    let upper = [
        shape(&[c(1.0, 0.5), c(-0.7, 0.1), c(0.4, 0.0)]),
        shape(&[c(-0.4, 0.1), c(0.2, -0.1), c(0.0, 0.25)]),
        shape(&[c(0.6, -0.2), c(0.3, 0.3), c(-0.2, 0.4)]),
    ];
    let u = [
        [wall.mul(&common[0]), wall.mul(&common[1]), wall.mul(&common[2])],
        [wall.mul(&upper[0]), wall.mul(&upper[1]), wall.mul(&upper[2])],
    ];
    let q = [
        shape(&[c(0.5, 0.0), c(-1.0, 0.2), c(0.0, 0.3), c(0.25, 0.0)]),
        shape(&[c(-0.3, 0.1), c(0.0, 0.0), c(0.8, 0.0)]),
    ];
    Manufactured { u, q }
}

fn data_for(m: &Manufactured, problem: &StokesProblem) -> StokesData {
    let xi = problem.wavevector;
    let (x1, x2, xs) = (xi.xi1, xi.xi2, xi.xi_sq());
    let i = C64::i();
    let f = |layer: Layer, y: f64| {
        let li = layer.index();
        let nu = problem.viscosity[li];
        let lap = |c: usize| m.u[li][c].deriv().deriv().eval(y) - m.u[li][c].eval(y) * xs;
        let q = m.q[li].eval(y);
        [
            i * x1 * q - lap(0) * nu,
            i * x2 * q - lap(1) * nu,
            m.q[li].deriv().eval(y) - lap(2) * nu,
        ]
    };
    let g = |layer: Layer, y: f64| {
        let li = layer.index();
        i * x1 * m.u[li][0].eval(y) + i * x2 * m.u[li][1].eval(y) + m.u[li][2].deriv().eval(y)
    };
    let trac = |li: usize| {
        let nu = problem.viscosity[li];
        let (d, v) = (|c: usize| m.u[li][c].deriv().eval(0.0), |c: usize| m.u[li][c].eval(0.0));
        [
            -(d(0) + i * x1 * v(2)) * nu,
            -(d(1) + i * x2 * v(2)) * nu,
            m.q[li].eval(0.0) - d(2) * 2.0 * nu,
        ]
    };
    let (up, lo) = (trac(1), trac(0));
    StokesData::sample(problem, f, g, [up[0] - lo[0], up[1] - lo[1], up[2] - lo[2]])
}

pub fn manufactured_error(degree: usize) -> f64 {
    let mut p = RTParameters::reference();
    p.tau = 0.7;
    p.l = 1.3;
    let xi = WaveVector::of(&p, 3, -2);
    let problem = StokesProblem {
        wavevector: xi,
        degree,
        l: p.l,
        tau: p.tau,
        viscosity: [0.8, 2.3],
    };
    let m = manufactured(p.l, p.tau);
    let sol = solve_stokes(&problem, &data_for(&m, &problem)).unwrap();
    let grids = Grids::new(p.l, p.tau, degree);
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for layer in Layer::BOTH {
        let li = layer.index();
        for (j, &y) in grids.get(layer).y.iter().enumerate() {
            for c in 0..3 {
                let e = m.u[li][c].eval(y);
                err = err.max((sol.velocity_profile.layer(layer).component(c)[j] - e).norm());
                scale = scale.max(e.norm());
            }
        }
        for (j, &y) in sol.pressure_profile.nodes[li].iter().enumerate() {
            let e = m.q[li].eval(y);
            err = err.max((sol.pressure_profile.values[li][j] - e).norm());
            scale = scale.max(e.norm());
        }
    }
    assert!(sol.divergence_residual < 1e-10);
    err / scale
}
