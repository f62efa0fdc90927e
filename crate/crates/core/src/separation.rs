//! Separated variables `(s1, s2)` on a level `{M = m, L = l}` of the
//! invariant set, the polynomials `Φ`, `Ψ`, the separated equations and the
//! explicit reconstruction of the phase state.
//!
//! ```text
//! s1,2 = (x1x2 + z1z2 ± r²) / (2 sqrt(x1x2))
//! Φ(s) = 4ms² − 4ls + (l² − 1)/m
//! Ψ(s1, s2) = 4m s1 s2 − 2l(s1 + s2) + (l² − 1)/m
//! ds1/dt = ½ sqrt((a² − s1²) Φ(s1)),   ds2/dt = ½ sqrt((b² − s2²) Φ(s2))
//! ```
//!
//! Radicals in the reconstruction use four sign flags:
//! `sqrt(s1² − a²) = ε1 ρ1`, `sqrt(s2² − b²) = i ε2 ρ2`,
//! `sqrt(Φ(s1)) = i σ1 φ1`, `sqrt(Φ(s2)) = σ2 φ2`, with every composite radical
//! the product of these. With that convention the velocity of `s_k` along the
//! Euler–Poisson flow has sign `ε_k σ_k`.

use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Drift, IntegratorConfig};
use crate::elliptic::QuarticSpec;
use crate::error::{Error, Result};
use crate::manifold::{chart_to_state, state_to_chart, ComplexChart, ManifoldTolerance};
use crate::ode::{self, OdeOptions};
use crate::poisson::integral_fml;
use crate::statespace::{BodyParams, PhaseState};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Φ roots closer than this (relative) to one of `±a, ±b` are snapped onto it.
pub const SNAP_TOL: f64 = 1e-12;

/// Slack on the sign conditions of the radicands.
pub const RADICAND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// `Plus` for `v >= 0` (including `+0.0`), `Minus` otherwise.
    pub fn from_value(v: f64) -> Sign {
        if v < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    fn flipped_if(self, cond: bool) -> Sign {
        if cond {
            self.flip()
        } else {
            self
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        self.flipped_if(rhs == Sign::Minus)
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Sign, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConstants {
    pub m: f64,
    pub l: f64,
}

impl SeparationConstants {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !m.is_finite() || !l.is_finite() {
            return Err(Error::NonFinite(format!("(m, l) = ({m}, {l})")));
        }
        if m == 0.0 {
            return Err(Error::ZeroM);
        }
        if l < 0.0 {
            return Err(Error::InvalidParams(format!("l = {l} must be nonnegative")));
        }
        Ok(SeparationConstants { m, l })
    }

    pub fn phi(&self) -> PhiPoly {
        PhiPoly { m: self.m, l: self.l }
    }
}

/// `Φ(s) = 4ms² − 4ls + (l² − 1)/m`. Unlike [`SeparationConstants`] this
/// accepts any `l`, so it can describe points of the plane with `l < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPoly {
    pub m: f64,
    pub l: f64,
}

impl PhiPoly {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !m.is_finite() || !l.is_finite() {
            return Err(Error::NonFinite(format!("(m, l) = ({m}, {l})")));
        }
        if m == 0.0 {
            return Err(Error::ZeroM);
        }
        Ok(PhiPoly { m, l })
    }

    pub fn eval(&self, s: f64) -> f64 {
        4.0 * self.m * s * s - 4.0 * self.l * s + (self.l * self.l - 1.0) / self.m
    }

    /// `(l ∓ 1)/(2m)` in increasing order. The discriminant is the constant 16,
    /// so the roots are always real and distinct.
    pub fn roots(&self) -> (f64, f64) {
        let r1 = (self.l - 1.0) / (2.0 * self.m);
        let r2 = (self.l + 1.0) / (2.0 * self.m);
        (r1.min(r2), r1.max(r2))
    }

    /// Roots snapped onto `±a`, `±b` when they agree to [`SNAP_TOL`].
    pub fn snapped_roots(&self, params: &BodyParams) -> (f64, f64) {
        let (r1, r2) = self.roots();
        (snap(r1, params), snap(r2, params))
    }
}

fn snap(r: f64, params: &BodyParams) -> f64 {
    for c in [-params.a, -params.b, params.b, params.a] {
        if (r - c).abs() <= SNAP_TOL * (1.0 + c.abs()) {
            return c;
        }
    }
    r
}

pub fn phi(s: f64, c: &SeparationConstants) -> f64 {
    c.phi().eval(s)
}

pub fn phi_roots(c: &SeparationConstants) -> (f64, f64) {
    c.phi().roots()
}

pub fn psi(s1: f64, s2: f64, c: &SeparationConstants) -> f64 {
    4.0 * c.m * s1 * s2 - 2.0 * c.l * (s1 + s2) + (c.l * c.l - 1.0) / c.m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatedPoint {
    pub s1: f64,
    pub s2: f64,
    pub eps1: Sign,
    pub eps2: Sign,
    pub sig1: Sign,
    pub sig2: Sign,
}

impl SeparatedPoint {
    pub fn new(s1: f64, s2: f64) -> Self {
        SeparatedPoint { s1, s2, eps1: Sign::Plus, eps2: Sign::Plus, sig1: Sign::Plus, sig2: Sign::Plus }
    }

    /// Flags in the order `[ε1, ε2, σ1, σ2]`.
    pub fn with_signs(s1: f64, s2: f64, signs: [Sign; 4]) -> Self {
        SeparatedPoint { s1, s2, eps1: signs[0], eps2: signs[1], sig1: signs[2], sig2: signs[3] }
    }

    pub fn signs(&self) -> [Sign; 4] {
        [self.eps1, self.eps2, self.sig1, self.sig2]
    }

    /// Sign of `(ds1/dt, ds2/dt)`.
    pub fn direction(&self) -> (Sign, Sign) {
        (self.eps1 * self.sig1, self.eps2 * self.sig2)
    }

    /// Same point with both `σ` flags flipped: the time-reversed motion.
    pub fn reversed(&self) -> Self {
        SeparatedPoint { sig1: self.sig1.flip(), sig2: self.sig2.flip(), ..*self }
    }

    /// All sixteen flag combinations at `(s1, s2)`.
    pub fn all_signs(s1: f64, s2: f64) -> impl Iterator<Item = SeparatedPoint> {
        (0..16u8).map(move |k| {
            let pick = |bit: u8| if k & (1 << bit) == 0 { Sign::Plus } else { Sign::Minus };
            SeparatedPoint::with_signs(s1, s2, [pick(0), pick(1), pick(2), pick(3)])
        })
    }
}

/// `(s1, s2)` of a state. Both are real because `x1x2` and `z1z2` are.
pub fn s_from_state(state: &PhaseState, params: &BodyParams) -> Result<(f64, f64)> {
    s_from_chart(&state_to_chart(state), params, ManifoldTolerance::default().eps_domain)
}

pub fn s_from_chart(chart: &ComplexChart, params: &BodyParams, eps_domain: f64) -> Result<(f64, f64)> {
    let xx = chart.x_norm_sq();
    if !(xx.abs() >= eps_domain) {
        return Err(Error::OutsideDomain(xx.abs()));
    }
    let root = xx.sqrt();
    let base = xx + chart.z_norm_sq();
    Ok(((base + params.r2) / (2.0 * root), (base - params.r2) / (2.0 * root)))
}

/// Level `(m, l)` of a state; fails where `M` or `L` is undefined or `l` is
/// not a valid constant.
pub fn level_of(state: &PhaseState, params: &BodyParams) -> Result<SeparationConstants> {
    let v = integral_fml(state, params);
    let l = v.l.ok_or(Error::UndefinedL(v.h))?;
    SeparationConstants::new(v.m, l)
}

/// `m(x1x2 + z1z2) − l sqrt(x1x2) + sqrt(m²r⁴ − m r²(x1 + x2) + x1x2)`,
/// which vanishes on the level `{M = m, L = l}`.
pub fn relation6_residual(state: &PhaseState, c: &SeparationConstants, params: &BodyParams) -> Result<f64> {
    let chart = state_to_chart(state);
    let xx = chart.x_norm_sq();
    let eps = ManifoldTolerance::default().eps_domain;
    if !(xx.abs() >= eps) {
        return Err(Error::OutsideDomain(xx.abs()));
    }
    let x_sum = (chart.x1 + chart.x2).re;
    let m = c.m;
    let r2 = params.r2;
    let radicand = m * m * params.r4() - m * r2 * x_sum + xx;
    let scale = m * m * params.r4() + (m * r2 * x_sum).abs() + xx;
    if radicand < -RADICAND_TOL * scale {
        return Err(Error::NegativeRadicand { what: "m²r⁴ − mr²(x1 + x2) + x1x2", value: radicand });
    }
    Ok(m * (xx + chart.z_norm_sq()) - c.l * xx.sqrt() + radicand.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointKind {
    /// `±a` for `s1`, `±b` for `s2`: turning flips `ε`.
    Field,
    /// A root of `Φ`: turning flips `σ`.
    PhiRoot,
    /// A root of `Φ` coinciding with `±a`/`±b`.
    Both,
    Infinite,
}

/// Closed interval `[lo, hi]`, possibly a single point or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_kind: EndpointKind,
    pub hi_kind: EndpointKind,
}

impl Interval {
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, s: f64, tol: f64) -> bool {
        s >= self.lo - tol && s <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn intersect(xs: &[Interval], ys: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    for x in xs {
        for y in ys {
            let (lo, lo_kind) = match x.lo.total_cmp(&y.lo) {
                std::cmp::Ordering::Greater => (x.lo, x.lo_kind),
                std::cmp::Ordering::Less => (y.lo, y.lo_kind),
                std::cmp::Ordering::Equal => (x.lo, merge_kind(x.lo_kind, y.lo_kind)),
            };
            let (hi, hi_kind) = match x.hi.total_cmp(&y.hi) {
                std::cmp::Ordering::Less => (x.hi, x.hi_kind),
                std::cmp::Ordering::Greater => (y.hi, y.hi_kind),
                std::cmp::Ordering::Equal => (x.hi, merge_kind(x.hi_kind, y.hi_kind)),
            };
            if lo <= hi {
                out.push(Interval { lo, hi, lo_kind, hi_kind });
            }
        }
    }
    out.sort_by(|p, q| p.lo.total_cmp(&q.lo));
    out
}

fn merge_kind(p: EndpointKind, q: EndpointKind) -> EndpointKind {
    match (p, q) {
        (EndpointKind::Infinite, _) | (_, EndpointKind::Infinite) => EndpointKind::Infinite,
        (a, b) if a == b => a,
        _ => EndpointKind::Both,
    }
}

fn iv(lo: f64, hi: f64, lo_kind: EndpointKind, hi_kind: EndpointKind) -> Interval {
    Interval { lo, hi, lo_kind, hi_kind }
}

/// `{Φ <= 0}` or `{Φ >= 0}` as a union of closed intervals.
fn phi_sign_set(phi: &PhiPoly, params: &BodyParams, nonpositive: bool) -> Vec<Interval> {
    use EndpointKind::{Infinite, PhiRoot};
    let (r1, r2) = phi.snapped_roots(params);
    let inside = (phi.m > 0.0) == nonpositive;
    if inside {
        vec![iv(r1, r2, PhiRoot, PhiRoot)]
    } else {
        vec![iv(f64::NEG_INFINITY, r1, Infinite, PhiRoot), iv(r2, f64::INFINITY, PhiRoot, Infinite)]
    }
}

/// Components of `{|s| >= a} ∩ {Φ <= 0}` and of `{|s| <= b} ∩ {Φ >= 0}`.
pub fn intervals_for(phi: &PhiPoly, params: &BodyParams) -> (Vec<Interval>, Vec<Interval>) {
    use EndpointKind::{Field, Infinite};
    let (a, b) = (params.a, params.b);
    let outer = [iv(f64::NEG_INFINITY, -a, Infinite, Field), iv(a, f64::INFINITY, Field, Infinite)];
    let inner = [iv(-b, b, Field, Field)];
    (intersect(&outer, &phi_sign_set(phi, params, true)), intersect(&inner, &phi_sign_set(phi, params, false)))
}

pub fn admissible_intervals(c: &SeparationConstants, params: &BodyParams) -> (Vec<Interval>, Vec<Interval>) {
    intervals_for(&c.phi(), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    S1,
    S2,
}

/// The oscillation quartic `(c² − s²)Φ(s)` of one coordinate on `interval`.
pub fn quartic_spec(c: &SeparationConstants, params: &BodyParams, which: Coordinate, interval: &Interval) -> Result<QuarticSpec> {
    if !interval.is_bounded() {
        return Err(Error::UnboundedInterval(format!("[{}, {}]", interval.lo, interval.hi)));
    }
    let (r1, r2) = c.phi().snapped_roots(params);
    let field = match which {
        Coordinate::S1 => params.a,
        Coordinate::S2 => params.b,
    };
    QuarticSpec::new([-field, field, r1, r2], 4.0 * c.m, interval.lo, interval.hi)
}

/// Interval of `which` containing the coordinate value of `p`.
pub fn interval_of(p: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams, which: Coordinate) -> Result<Interval> {
    let (s1s, s2s) = admissible_intervals(c, params);
    let (list, s) = match which {
        Coordinate::S1 => (s1s, p.s1),
        Coordinate::S2 => (s2s, p.s2),
    };
    let tol = RADICAND_TOL * (1.0 + s.abs());
    list.into_iter()
        .find(|iv| iv.contains(s, tol))
        .ok_or_else(|| Error::Inadmissible(format!("{which:?} = {s} lies in no admissible interval")))
}

pub fn spec_of(p: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams, which: Coordinate) -> Result<QuarticSpec> {
    quartic_spec(c, params, which, &interval_of(p, c, params, which)?)
}

/// `(ε1σ1 · ½ sqrt((a² − s1²)Φ(s1)), ε2σ2 · ½ sqrt((b² − s2²)Φ(s2)))`.
pub fn separated_rhs(p: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams) -> Result<(f64, f64)> {
    let q1 = (params.a * params.a - p.s1 * p.s1) * phi(p.s1, c);
    let q2 = (params.b * params.b - p.s2 * p.s2) * phi(p.s2, c);
    if q1 < -RADICAND_TOL {
        return Err(Error::NegativeRadicand { what: "(a² − s1²)Φ(s1)", value: q1 });
    }
    if q2 < -RADICAND_TOL {
        return Err(Error::NegativeRadicand { what: "(b² − s2²)Φ(s2)", value: q2 });
    }
    let (d1, d2) = p.direction();
    Ok((d1.value() * 0.5 * q1.max(0.0).sqrt(), d2.value() * 0.5 * q2.max(0.0).sqrt()))
}

/// A single sign flip in the radical convention, for mutation testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RadicalMutation {
    #[default]
    None,
    /// `sqrt(s1² − a²)` everywhere
    FieldS1,
    /// `sqrt(s2² − b²)` everywhere
    FieldS2,
    /// `sqrt(Φ(s1))` everywhere
    PhiS1,
    /// `sqrt(Φ(s2))` everywhere
    PhiS2,
    /// `sqrt(Φ(s1)Φ(s2))`
    PhiPhi,
    /// `sqrt((s1² − a²)(s2² − b²))`
    FieldField,
    /// `sqrt((s2² − b²)Φ(s1))`
    FieldS2PhiS1,
    /// `sqrt((s1² − a²)Φ(s2))`
    FieldS1PhiS2,
}

impl RadicalMutation {
    pub const ALL: [RadicalMutation; 8] = [
        RadicalMutation::FieldS1,
        RadicalMutation::FieldS2,
        RadicalMutation::PhiS1,
        RadicalMutation::PhiS2,
        RadicalMutation::PhiPhi,
        RadicalMutation::FieldField,
        RadicalMutation::FieldS2PhiS1,
        RadicalMutation::FieldS1PhiS2,
    ];
}

/// `(ρ1, ρ2, φ1, φ2)` at an admissible point.
fn radicals(p: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams) -> Result<(f64, f64, f64, f64)> {
    let check = |what: &'static str, v: f64, scale: f64| -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::NonFinite(what.into()));
        }
        if v < -RADICAND_TOL * scale {
            return Err(Error::Inadmissible(format!("{what} = {v} is negative")));
        }
        Ok(v.max(0.0).sqrt())
    };
    let (a2, b2) = (params.a * params.a, params.b * params.b);
    let rho1 = check("s1² − a²", p.s1 * p.s1 - a2, 1.0 + a2)?;
    let rho2 = check("b² − s2²", b2 - p.s2 * p.s2, 1.0 + b2)?;
    let phi_scale = |s: f64| 1.0 + (4.0 * c.m * s * s).abs() + (4.0 * c.l * s).abs() + ((c.l * c.l - 1.0) / c.m).abs();
    let phi1 = check("−Φ(s1)", -phi(p.s1, c), phi_scale(p.s1))?;
    let phi2 = check("Φ(s2)", phi(p.s2, c), phi_scale(p.s2))?;
    Ok((rho1, rho2, phi1, phi2))
}

/// The phase state at `p` on the level `c`.
pub fn reconstruct(p: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams) -> Result<PhaseState> {
    reconstruct_with(p, c, params, RadicalMutation::None)
}

pub fn reconstruct_with(
    p: &SeparatedPoint,
    c: &SeparationConstants,
    params: &BodyParams,
    mutation: RadicalMutation,
) -> Result<PhaseState> {
    chart_to_state(&reconstruct_chart(p, c, params, mutation)?, ManifoldTolerance::default().eps_domain)
}

pub fn reconstruct_chart(
    p: &SeparatedPoint,
    c: &SeparationConstants,
    params: &BodyParams,
    mutation: RadicalMutation,
) -> Result<ComplexChart> {
    use RadicalMutation as R;
    let (rho1, rho2, phi1, phi2) = radicals(p, c, params)?;
    let flip = |k: R| if mutation == k { -1.0 } else { 1.0 };

    let r1 = Complex64::new(flip(R::FieldS1) * p.eps1.value() * rho1, 0.0);
    let r2 = I * (flip(R::FieldS2) * p.eps2.value() * rho2);
    let p1 = I * (flip(R::PhiS1) * p.sig1.value() * phi1);
    let p2 = Complex64::new(flip(R::PhiS2) * p.sig2.value() * phi2, 0.0);
    let pp = flip(R::PhiPhi) * p1 * p2;
    let rr = flip(R::FieldField) * r1 * r2;
    let r2p1 = flip(R::FieldS2PhiS1) * r2 * p1;
    let r1p2 = flip(R::FieldS1PhiS2) * r1 * p2;

    let ps = psi(p.s1, p.s2, c);
    let d = p.s1 - p.s2;
    let den_minus = ps - pp;
    let den_plus = ps + pp;
    let scale = 1.0 + ps.abs() + pp.norm();
    if den_minus.norm() <= 1e-14 * scale {
        return Err(Error::VanishingDenominator("Ψ − sqrt(Φ(s1)Φ(s2))"));
    }
    if den_plus.norm() <= 1e-14 * scale {
        return Err(Error::VanishingDenominator("Ψ + sqrt(Φ(s1)Φ(s2))"));
    }
    let (r, r2sq) = (params.r(), params.r2);
    let k = 2.0 * p.s1 * p.s2 - params.p2;

    let x1 = -r2sq / (2.0 * d * d) * (ps + pp);
    let x2 = -r2sq / (2.0 * d * d) * (ps - pp);
    let y1 = 2.0 * (k - 2.0 * rr) / den_minus;
    let y2 = 2.0 * (k + 2.0 * rr) / den_plus;
    let z1 = r / d * (r1 + r2);
    let z2 = r / d * (r1 - r2);
    let w1 = r * (p2 - p1) / den_minus;
    let w2 = r * (p2 + p1) / den_plus;
    let w3 = (r2p1 - r1p2) / d;
    if w3.im.abs() > 1e-10 * (1.0 + w3.re.abs()) {
        return Err(Error::ConjugacyViolation(format!("w3 has imaginary part {:e}", w3.im)));
    }
    Ok(ComplexChart { x1, x2, y1, y2, z1, z2, w1, w2, w3: w3.re })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedPath {
    pub times: Vec<f64>,
    pub points: Vec<SeparatedPoint>,
}

/// Regularized motion of one coordinate.
struct Oscillator {
    spec: Option<QuarticSpec>,
    interval: Interval,
    u0: f64,
}

impl Oscillator {
    fn new(
        p: &mut SeparatedPoint,
        c: &SeparationConstants,
        params: &BodyParams,
        which: Coordinate,
    ) -> Result<Self> {
        let interval = interval_of(p, c, params, which)?;
        if interval.is_degenerate() {
            return Ok(Oscillator { spec: None, interval, u0: 0.0 });
        }
        let spec = quartic_spec(c, params, which, &interval)?;
        let (s, eps, sig) = match which {
            Coordinate::S1 => (p.s1, &mut p.eps1, &mut p.sig1),
            Coordinate::S2 => (p.s2, &mut p.eps2, &mut p.sig2),
        };
        let x = (s - spec.center()) / spec.half_width();
        let dir = *eps * *sig;
        // starting on an endpoint and heading out of the interval: turn first
        if x >= 1.0 && dir == Sign::Plus {
            flip_for(interval.hi_kind, eps, sig);
        } else if x <= -1.0 && dir == Sign::Minus {
            flip_for(interval.lo_kind, eps, sig);
        }
        let u0 = spec.angle_of(s, *eps * *sig);
        Ok(Oscillator { spec: Some(spec), interval, u0 })
    }

    fn rate(&self, u: f64) -> f64 {
        self.spec.as_ref().map_or(0.0, |s| s.angle_rate(u))
    }

    /// Coordinate value and flags at angle `u`, given the flags at `u0`.
    fn state_at(&self, u: f64, s0: f64, eps0: Sign, sig0: Sign) -> (f64, Sign, Sign) {
        let Some(spec) = &self.spec else {
            return (s0, eps0, sig0);
        };
        let (mut eps, mut sig) = (eps0, sig0);
        for (theta, kind) in [(std::f64::consts::FRAC_PI_2, self.interval.hi_kind), (-std::f64::consts::FRAC_PI_2, self.interval.lo_kind)] {
            let crossings = crossings(self.u0, u, theta);
            if crossings % 2 == 1 {
                flip_for(kind, &mut eps, &mut sig);
            }
        }
        (spec.s_at(u), eps, sig)
    }
}

fn crossings(u0: f64, u: f64, theta: f64) -> u64 {
    let tau = std::f64::consts::TAU;
    (((u - theta) / tau).floor() - ((u0 - theta) / tau).floor()).abs() as u64
}

fn flip_for(kind: EndpointKind, eps: &mut Sign, sig: &mut Sign) {
    match kind {
        EndpointKind::Field => *eps = eps.flip(),
        EndpointKind::PhiRoot | EndpointKind::Both => *sig = sig.flip(),
        EndpointKind::Infinite => {}
    }
}

/// Integrates the separated equations in regularized angle coordinates and
/// samples `(s1, s2)` with their flags every `sample_dt`. Degenerate
/// (single-point) intervals give constant coordinates.
pub fn integrate_separated(
    p0: &SeparatedPoint,
    c: &SeparationConstants,
    params: &BodyParams,
    t_end: f64,
    sample_dt: f64,
) -> Result<SeparatedPath> {
    radicals(p0, c, params)?;
    let mut start = *p0;
    let osc1 = Oscillator::new(&mut start, c, params, Coordinate::S1)?;
    let osc2 = Oscillator::new(&mut start, c, params, Coordinate::S2)?;
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() };
    let (times, us, _) =
        ode::integrate_sampled(|_, y: &[f64; 2]| [osc1.rate(y[0]), osc2.rate(y[1])], 0.0, [osc1.u0, osc2.u0], t_end, sample_dt, &opts)?;
    let points = us
        .iter()
        .map(|y| {
            let (s1, eps1, sig1) = osc1.state_at(y[0], start.s1, start.eps1, start.sig1);
            let (s2, eps2, sig2) = osc2.state_at(y[1], start.s2, start.eps2, start.sig2);
            SeparatedPoint { s1, s2, eps1, eps2, sig1, sig2 }
        })
        .collect();
    Ok(SeparatedPath { times, points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub times: Vec<f64>,
    pub s_full: Vec<(f64, f64)>,
    pub s_sep: Vec<(f64, f64)>,
    pub max_ds1: f64,
    pub max_ds2: f64,
    pub drift: Drift,
}

impl CrosscheckReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_ds1.max(self.max_ds2)
    }
}

/// Reconstructs the start, integrates the full system and the separated one,
/// and compares `(s1, s2)` sample by sample. `cfg.t_end` and `cfg.sample_dt`
/// set the span.
pub fn crosscheck(p0: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams, cfg: &IntegratorConfig) -> Result<CrosscheckReport> {
    crosscheck_with(p0, c, params, cfg, RadicalMutation::None)
}

pub fn crosscheck_with(
    p0: &SeparatedPoint,
    c: &SeparationConstants,
    params: &BodyParams,
    cfg: &IntegratorConfig,
    mutation: RadicalMutation,
) -> Result<CrosscheckReport> {
    let state0 = reconstruct_with(p0, c, params, mutation)?;
    let traj = dynamics::integrate(&state0, cfg, params)?;
    let sep = integrate_separated(p0, c, params, cfg.t_end, cfg.sample_dt)?;
    let mut s_full = Vec::with_capacity(traj.states.len());
    let (mut max_ds1, mut max_ds2) = (0.0f64, 0.0f64);
    for (state, sp) in traj.states.iter().zip(&sep.points) {
        let (s1, s2) = s_from_state(state, params)?;
        max_ds1 = max_ds1.max((s1 - sp.s1).abs());
        max_ds2 = max_ds2.max((s2 - sp.s2).abs());
        s_full.push((s1, s2));
    }
    Ok(CrosscheckReport {
        times: traj.times,
        s_full,
        s_sep: sep.points.iter().map(|p| (p.s1, p.s2)).collect(),
        max_ds1,
        max_ds2,
        drift: traj.drift,
    })
}
