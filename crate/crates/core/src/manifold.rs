//! Complex chart of the phase space, the two functions cutting out the
//! invariant set `N`, and membership diagnostics.
//!
//! Chart:
//!
//! ```text
//! x1 = (α1 − β2) + i(α2 + β1),   y1 = (α1 + β2) + i(α2 − β1),
//! z1 = α3 + iβ3,                 w1 = ω1 + iω2,   w3 = ω3,
//! ```
//!
//! and `x2, y2, z2, w2` are the conjugates. On real states `x1 x2 = |x1|²`, so
//! `sqrt(x1 x2)` always means the nonnegative real root.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poisson::{integral_fml, lie_poisson_bracket, PhaseFunction};
use crate::statespace::{BodyParams, PhaseState, Vec3};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexChart {
    pub x1: Complex64,
    pub x2: Complex64,
    pub y1: Complex64,
    pub y2: Complex64,
    pub z1: Complex64,
    pub z2: Complex64,
    pub w1: Complex64,
    pub w2: Complex64,
    pub w3: f64,
}

impl ComplexChart {
    /// `x1 x2` as a real number (its imaginary part vanishes on real states).
    pub fn x_norm_sq(&self) -> f64 {
        (self.x1 * self.x2).re
    }

    pub fn z_norm_sq(&self) -> f64 {
        (self.z1 * self.z2).re
    }

    /// Largest deviation from the conjugate-pair structure.
    pub fn conjugacy_defect(&self) -> f64 {
        [
            (self.x2 - self.x1.conj()).norm(),
            (self.y2 - self.y1.conj()).norm(),
            (self.z2 - self.z1.conj()).norm(),
            (self.w2 - self.w1.conj()).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManifoldTolerance {
    pub eps_f1: f64,
    pub eps_f2: f64,
    /// Bound on `|F| / (1 + (2|G| + p²|H|)² + r⁴K)` for membership.
    pub eps_f: f64,
    pub eps_domain: f64,
}

impl Default for ManifoldTolerance {
    fn default() -> Self {
        ManifoldTolerance { eps_f1: 1e-8, eps_f2: 1e-8, eps_f: 1e-8, eps_domain: 1e-10 }
    }
}

pub fn state_to_chart(s: &PhaseState) -> ComplexChart {
    let [w1, w2, w3] = s.omega.0;
    let [a1, a2, a3] = s.alpha.0;
    let [b1, b2, b3] = s.beta.0;
    let x1 = Complex64::new(a1 - b2, a2 + b1);
    let y1 = Complex64::new(a1 + b2, a2 - b1);
    let z1 = Complex64::new(a3, b3);
    let wc = Complex64::new(w1, w2);
    ComplexChart { x1, x2: x1.conj(), y1, y2: y1.conj(), z1, z2: z1.conj(), w1: wc, w2: wc.conj(), w3 }
}

/// Inverse of [`state_to_chart`]; fails when the chart is not the image of a
/// real state within `eps_domain` (relative to the entry sizes).
pub fn chart_to_state(chart: &ComplexChart, eps_domain: f64) -> Result<PhaseState> {
    let scale = 1.0 + chart.x1.norm() + chart.y1.norm() + chart.z1.norm() + chart.w1.norm();
    let defect = chart.conjugacy_defect();
    if !(defect <= eps_domain * scale) {
        return Err(Error::ConjugacyViolation(format!("conjugate-pair defect {defect:e}")));
    }
    if !chart.w3.is_finite() {
        return Err(Error::NonFinite("w3".into()));
    }
    let sum = chart.x1 + chart.y1;
    let diff = chart.y1 - chart.x1;
    Ok(PhaseState {
        omega: Vec3([chart.w1.re, chart.w1.im, chart.w3]),
        alpha: Vec3([0.5 * sum.re, 0.5 * sum.im, chart.z1.re]),
        beta: Vec3([-0.5 * diff.im, 0.5 * diff.re, chart.z1.im]),
    })
}

/// Single-sign transcription errors of `F2`, for mutation testing of the
/// check suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum F2Mutation {
    #[default]
    None,
    /// `−(i/2)[…]`
    OverallSign,
    /// `w1² − x1` in the first term
    FirstInner,
    /// `+` between the two terms
    MiddleSign,
    /// `w2² − x2` in the second term
    SecondInner,
}

impl F2Mutation {
    pub const ALL: [F2Mutation; 4] =
        [F2Mutation::OverallSign, F2Mutation::FirstInner, F2Mutation::MiddleSign, F2Mutation::SecondInner];
}

fn root_x(chart: &ComplexChart, eps_domain: f64) -> Result<f64> {
    let q = chart.x_norm_sq();
    if !(q.abs() >= eps_domain) {
        return Err(Error::OutsideDomain(q.abs()));
    }
    Ok(q.max(0.0).sqrt())
}

/// `F1 = sqrt(x1x2) w3 − (x2 z1 w1 + x1 z2 w2)/sqrt(x1x2)` and
/// `F2 = (i/2)[(x2/x1)(w1² + x1) − (x1/x2)(w2² + x2)]`.
pub fn f1_f2(chart: &ComplexChart, eps_domain: f64) -> Result<(Complex64, Complex64)> {
    f1_f2_with(chart, eps_domain, F2Mutation::None)
}

pub fn f1_f2_with(chart: &ComplexChart, eps_domain: f64, mutation: F2Mutation) -> Result<(Complex64, Complex64)> {
    let rx = root_x(chart, eps_domain)?;
    let c = chart;
    let f1 = rx * c.w3 - (c.x2 * c.z1 * c.w1 + c.x1 * c.z2 * c.w2) / rx;

    let sign = |m: F2Mutation| if mutation == m { -1.0 } else { 1.0 };
    let first = (c.x2 / c.x1) * (c.w1 * c.w1 + sign(F2Mutation::FirstInner) * c.x1);
    let second = (c.x1 / c.x2) * (c.w2 * c.w2 + sign(F2Mutation::SecondInner) * c.x2);
    let inner = first - sign(F2Mutation::MiddleSign) * second;
    let f2 = sign(F2Mutation::OverallSign) * 0.5 * I * inner;
    Ok((f1, f2))
}

/// Left-minus-right residuals of the chart form of the Casimir constraints:
/// `z1² + x1 y2 − r²`, `z2² + x2 y1 − r²`, `x1x2 + y1y2 + 2 z1z2 − 2p²`.
pub fn constraint_residuals_chart(chart: &ComplexChart, params: &BodyParams) -> (Complex64, Complex64, f64) {
    let c = chart;
    let r2 = params.r2;
    (
        c.z1 * c.z1 + c.x1 * c.y2 - r2,
        c.z2 * c.z2 + c.x2 * c.y1 - r2,
        (c.x1 * c.x2 + c.y1 * c.y2 + 2.0 * c.z1 * c.z2).re - 2.0 * params.p2,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipReport {
    /// Moduli `|F1|`, `|F2|`, `|F|`.
    pub f1: f64,
    pub f2: f64,
    pub f: f64,
    /// Imaginary residue of `F1`, `F2` (zero on real states up to rounding).
    pub f1_imag: f64,
    pub f2_imag: f64,
    pub member: bool,
    pub l: Option<f64>,
    /// `L` vanishes here, where the induced symplectic structure degenerates.
    pub symplectic_degenerate: bool,
}

pub fn on_n(state: &PhaseState, params: &BodyParams, tol: &ManifoldTolerance) -> Result<MembershipReport> {
    let chart = state_to_chart(state);
    let (f1, f2) = f1_f2(&chart, tol.eps_domain)?;
    let vals = integral_fml(state, params);
    // F = (2G − p²H)² − r⁴K cancels large terms, so it is judged relative to them
    let lin = 2.0 * vals.g.abs() + params.p2 * vals.h.abs();
    let f_scale = 1.0 + lin * lin + params.r4() * vals.k;
    let member = f1.norm() <= tol.eps_f1 && f2.norm() <= tol.eps_f2 && vals.f.abs() <= tol.eps_f * f_scale;
    Ok(MembershipReport {
        f1: f1.norm(),
        f2: f2.norm(),
        f: vals.f.abs(),
        f1_imag: f1.im,
        f2_imag: f2.im,
        member,
        l: vals.l,
        symplectic_degenerate: vals.l.is_some_and(|l| l < 1e-6),
    })
}

/// `Re F1` as a phase-space function (NaN outside the chart domain).
#[derive(Debug, Clone, Copy)]
pub struct F1Field;

/// `Re F2`, optionally with a transcription mutation.
#[derive(Debug, Clone, Copy)]
pub struct F2Field(pub F2Mutation);

impl PhaseFunction for F1Field {
    fn value(&self, s: &PhaseState) -> f64 {
        f1_f2(&state_to_chart(s), 0.0).map_or(f64::NAN, |(f1, _)| f1.re)
    }
}

impl PhaseFunction for F2Field {
    fn value(&self, s: &PhaseState) -> f64 {
        f1_f2_with(&state_to_chart(s), 0.0, self.0).map_or(f64::NAN, |(_, f2)| f2.re)
    }
}

/// Lower bound on `|L|` below which the bracket ratio is not evaluated.
pub const RATIO_L_EPS: f64 = 1e-6;

/// `{F2, F1} / (r² L)`. Constant on the invariant set; its value fixes the
/// sign convention of the bracket.
pub fn bracket_ratio(state: &PhaseState, params: &BodyParams) -> Result<f64> {
    bracket_ratio_with(state, params, F2Mutation::None)
}

pub fn bracket_ratio_with(state: &PhaseState, params: &BodyParams, mutation: F2Mutation) -> Result<f64> {
    let chart = state_to_chart(state);
    root_x(&chart, ManifoldTolerance::default().eps_domain)?;
    let vals = integral_fml(state, params);
    let l = match vals.l {
        None => return Err(Error::UndefinedL(crate::poisson::l_radicand(vals.h, vals.m, params))),
        Some(l) if l < RATIO_L_EPS => return Err(Error::UndefinedL(l * l)),
        Some(l) => l,
    };
    let b = lie_poisson_bracket(&F2Field(mutation), &F1Field, state)?;
    Ok(b / (params.r2 * l))
}

/// Smallest singular value of the `2×9` Jacobian of `(Re F1, Re F2)` with
/// respect to `(ω, α, β)`, by central differences.
pub fn local_independence(state: &PhaseState) -> Result<f64> {
    let u = state.to_array();
    let mut jac = [[0.0; 9]; 2];
    for i in 0..9 {
        let h = 1e-6 * u[i].abs().max(1.0);
        let mut up = u;
        let mut dn = u;
        up[i] += h;
        dn[i] -= h;
        let eval = |v: &[f64; 9]| f1_f2(&state_to_chart(&PhaseState::from_array(v)), 1e-10);
        let (f1p, f2p) = eval(&up)?;
        let (f1m, f2m) = eval(&dn)?;
        jac[0][i] = (f1p.re - f1m.re) / (2.0 * h);
        jac[1][i] = (f2p.re - f2m.re) / (2.0 * h);
    }
    let dot = |a: &[f64; 9], b: &[f64; 9]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (g11, g12, g22) = (dot(&jac[0], &jac[0]), dot(&jac[0], &jac[1]), dot(&jac[1], &jac[1]));
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let lam_min = (0.5 * tr - disc).max(0.0);
    Ok(lam_min.sqrt())
}
