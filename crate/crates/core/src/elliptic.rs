//! Periods and time parameterization of the separated oscillations.
//!
//! Each separated coordinate obeys `ds/dt = ±½ sqrt(Q(s))` with `Q` a quartic
//! with four real roots; the motion oscillates between two adjacent roots
//! `[e−, e+]`. Writing `s = c + h sin u` with `c = (e− + e+)/2`,
//! `h = (e+ − e−)/2` removes the square-root turning points:
//!
//! ```text
//! du/dt = ½ sqrt(R(s)),   R(s) = |lead| · |s − r_a| · |s − r_b|,
//! ```
//!
//! where `r_a, r_b` are the two roots outside the interval. The full period
//! has the closed form `T = 8 R_F(0, U², V²) / sqrt(|lead|)` with
//! `U² = |e− − r_a|·|e+ − r_b|` and `V² = |e− − r_b|·|e+ − r_a|`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::ControlFlow;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::separation::Sign;

/// Convergence threshold on the duplication residual of [`carlson_rf`].
const RF_TOL: f64 = 1e-16;

/// Carlson's symmetric integral
/// `R_F(x, y, z) = ½ ∫₀^∞ dt / sqrt((t+x)(t+y)(t+z))` by duplication.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> Result<f64> {
    if [x, y, z].iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::EllipticDomain(format!("R_F({x}, {y}, {z}) needs finite nonnegative arguments")));
    }
    if x + y == 0.0 || x + z == 0.0 || y + z == 0.0 {
        return Err(Error::EllipticDomain(format!("R_F({x}, {y}, {z}) has more than one zero argument")));
    }
    let a0 = (x + y + z) / 3.0;
    let mut q = (3.0 * RF_TOL).powf(-1.0 / 6.0) * (a0 - x).abs().max((a0 - y).abs()).max((a0 - z).abs());
    let (mut xn, mut yn, mut zn, mut an) = (x, y, z, a0);
    let mut pow4 = 1.0;
    for _ in 0..200 {
        if q < an.abs() {
            break;
        }
        let (sx, sy, sz) = (xn.sqrt(), yn.sqrt(), zn.sqrt());
        let lambda = sx * sy + sx * sz + sy * sz;
        xn = 0.25 * (xn + lambda);
        yn = 0.25 * (yn + lambda);
        zn = 0.25 * (zn + lambda);
        an = 0.25 * (an + lambda);
        q *= 0.25;
        pow4 *= 0.25;
    }
    let xd = (a0 - x) * pow4 / an;
    let yd = (a0 - y) * pow4 / an;
    let zd = -(xd + yd);
    let e2 = xd * yd - zd * zd;
    let e3 = xd * yd * zd;
    Ok((1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / an.sqrt())
}

/// A quartic `lead · Π (s − r_i)` (up to sign) with four real roots and the
/// oscillation interval between two adjacent ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticSpec {
    roots: [f64; 4],
    lead: f64,
    lower_index: usize,
}

impl QuarticSpec {
    /// `roots` in any order; `lower`/`upper` must be adjacent entries of the sorted list.
    pub fn new(mut roots: [f64; 4], lead: f64, lower: f64, upper: f64) -> Result<Self> {
        if roots.iter().any(|r| !r.is_finite()) || !lead.is_finite() || lead == 0.0 {
            return Err(Error::EllipticDomain("quartic needs finite roots and a nonzero leading coefficient".into()));
        }
        roots.sort_by(f64::total_cmp);
        let lower_index = (0..3)
            .find(|&i| roots[i] == lower && roots[i + 1] == upper)
            .ok_or_else(|| Error::EllipticDomain(format!("[{lower}, {upper}] is not a pair of adjacent roots of {roots:?}")))?;
        Ok(QuarticSpec { roots, lead: lead.abs(), lower_index })
    }

    pub fn roots(&self) -> [f64; 4] {
        self.roots
    }

    pub fn lead(&self) -> f64 {
        self.lead
    }

    pub fn lower(&self) -> f64 {
        self.roots[self.lower_index]
    }

    pub fn upper(&self) -> f64 {
        self.roots[self.lower_index + 1]
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower() == self.upper()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower() + self.upper())
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper() - self.lower())
    }

    fn outer_roots(&self) -> (f64, f64) {
        let others: Vec<f64> = (0..4).filter(|&i| i != self.lower_index && i != self.lower_index + 1).map(|i| self.roots[i]).collect();
        (others[0], others[1])
    }

    /// `|Q(s)|` at `s`.
    pub fn quartic_abs(&self, s: f64) -> f64 {
        self.lead * self.roots.iter().map(|r| (s - r).abs()).product::<f64>()
    }

    /// Position on the interval at angle `u`.
    pub fn s_at(&self, u: f64) -> f64 {
        self.center() + self.half_width() * u.sin()
    }

    /// `du/dt` of the regularized motion.
    pub fn angle_rate(&self, u: f64) -> f64 {
        let s = self.s_at(u);
        let (ra, rb) = self.outer_roots();
        0.5 * (self.lead * (s - ra).abs() * (s - rb).abs()).sqrt()
    }

    /// Angle of `s` moving in direction `dir`. A point sitting on an endpoint
    /// with `dir` pointing outward is treated as having just turned.
    pub fn angle_of(&self, s: f64, dir: Sign) -> f64 {
        let x = ((s - self.center()) / self.half_width()).clamp(-1.0, 1.0);
        let base = x.asin();
        match dir {
            Sign::Plus if x >= 1.0 => FRAC_PI_2,
            Sign::Plus => base,
            Sign::Minus if x <= -1.0 => -FRAC_PI_2,
            Sign::Minus => PI - base,
        }
    }

    /// Direction of motion at angle `u`; at an exact turning point the
    /// direction after the turn.
    pub fn direction_at(u: f64) -> Sign {
        let c = u.cos();
        if c.abs() > 1e-15 {
            Sign::from_value(c)
        } else {
            Sign::from_value(-u.sin())
        }
    }
}

/// Full period of the oscillation on `spec`'s interval. A single-point
/// interval is an error; an endpoint that is a double root of the quartic
/// gives `f64::INFINITY`.
pub fn period(spec: &QuarticSpec) -> Result<f64> {
    if spec.is_degenerate() {
        return Err(Error::DegenerateInterval(spec.lower()));
    }
    let (e_lo, e_hi) = (spec.lower(), spec.upper());
    let (ra, rb) = spec.outer_roots();
    let u2 = (e_lo - ra).abs() * (e_hi - rb).abs();
    let v2 = (e_lo - rb).abs() * (e_hi - ra).abs();
    if u2 == 0.0 || v2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(8.0 * carlson_rf(0.0, u2, v2)? / spec.lead.sqrt())
}

fn gauss_legendre_20() -> &'static ([f64; 20], [f64; 20]) {
    static RULE: OnceLock<([f64; 20], [f64; 20])> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 20;
        let mut nodes = [0.0; N];
        let mut weights = [0.0; N];
        for i in 0..N {
            let mut x = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Time to move from angle `u_from` to `u_to` (composite 20-point
/// Gauss–Legendre on panels no wider than π/16).
pub fn incomplete_time(spec: &QuarticSpec, u_from: f64, u_to: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_20();
    let span = u_to - u_from;
    if span == 0.0 {
        return 0.0;
    }
    let panels = ((span.abs() / (PI / 16.0)).ceil() as usize).max(1);
    let width = span / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = u_from + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w / spec.angle_rate(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// `s(t)` and its direction of motion, starting from `s0` moving in `sig0`.
///
/// `t` is reduced modulo the closed-form period and the incomplete quadrature
/// is inverted with Newton steps safeguarded by bisection.
pub fn s_of_t(spec: &QuarticSpec, s0: f64, sig0: Sign, t: f64) -> Result<(f64, Sign)> {
    if !(s0 >= spec.lower() - 1e-12 * (1.0 + s0.abs()) && s0 <= spec.upper() + 1e-12 * (1.0 + s0.abs())) {
        return Err(Error::Inadmissible(format!("s0 = {s0} outside [{}, {}]", spec.lower(), spec.upper())));
    }
    if spec.is_degenerate() || t == 0.0 {
        return Ok((s0, sig0));
    }
    let big_t = period(spec)?;
    if !big_t.is_finite() {
        return Err(Error::DegenerateInterval(s0));
    }
    let tau = t.rem_euclid(big_t);
    let u0 = spec.angle_of(s0, sig0);
    if tau == 0.0 {
        return Ok((s0, sig0));
    }
    let (mut lo, mut hi) = (u0, u0 + TAU);
    let mut u = u0 + TAU * tau / big_t;
    for _ in 0..100 {
        let g = incomplete_time(spec, u0, u) - tau;
        if g > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - g * spec.angle_rate(u);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - u).abs() <= 1e-15 * (1.0 + u.abs());
        u = next;
        if done || hi - lo <= 1e-15 * (1.0 + u.abs()) {
            break;
        }
    }
    Ok((spec.s_at(u), QuarticSpec::direction_at(u)))
}

/// Period measured on the regularized ODE: the time for the angle to advance
/// by `2π`, located on the dense output. Independent of [`period`].
pub fn period_by_ode(spec: &QuarticSpec, rtol: f64) -> Result<f64> {
    if spec.is_degenerate() {
        return Err(Error::DegenerateInterval(spec.lower()));
    }
    let target = -FRAC_PI_2 + TAU;
    let opts = OdeOptions { rtol, atol: rtol * 1e-2, ..Default::default() };
    let mut found = None;
    ode::integrate(|_, y: &[f64; 1]| [spec.angle_rate(y[0])], 0.0, [-FRAC_PI_2], 1e9, &opts, |seg| {
        if let Some(t) = ode::locate_event(seg, |_, y| y[0] - target) {
            found = Some(t);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    found.ok_or_else(|| Error::Integrator("angle never completed a revolution".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodComparison {
    pub period_closed_form: f64,
    pub period_ode: f64,
    pub rel_diff: f64,
}

pub fn compare_periods(spec: &QuarticSpec) -> Result<PeriodComparison> {
    let closed = period(spec)?;
    let measured = period_by_ode(spec, 1e-13)?;
    Ok(PeriodComparison { period_closed_form: closed, period_ode: measured, rel_diff: (closed - measured).abs() / measured.abs() })
}
