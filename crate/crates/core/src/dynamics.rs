//! Euler–Poisson equations for the inertia tensor `diag(2, 2, 1)` in the
//! potential `-α1 - β2`, and trajectory integration with drift bookkeeping.
//!
//! With `M = (2ω1, 2ω2, ω3)` the torque balance `Ṁ = M × ω + α × e1 + β × e2`
//! gives
//!
//! ```text
//! 2ω̇1 = ω2ω3 + β3,   2ω̇2 = −ω1ω3 − α3,   ω̇3 = α2 − β1,
//! α̇ = α × ω,         β̇ = β × ω.
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::poisson::{integral_fml, IntegralValues};
use crate::statespace::{casimir_residuals, BodyParams, PhaseState, Vec3};

pub fn euler_poisson_rhs(s: &PhaseState) -> PhaseState {
    let [w1, w2, w3] = s.omega.0;
    let omega_dot = Vec3([
        0.5 * (w2 * w3 + s.beta.z()),
        0.5 * (-w1 * w3 - s.alpha.z()),
        s.alpha.y() - s.beta.x(),
    ]);
    PhaseState { omega: omega_dot, alpha: s.alpha.cross(&s.omega), beta: s.beta.cross(&s.omega) }
}

fn rhs_array(u: &[f64; 9]) -> [f64; 9] {
    euler_poisson_rhs(&PhaseState::from_array(u)).to_array()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, max_step: f64::INFINITY, t_end: 10.0, sample_dt: 0.1 }
    }
}

impl IntegratorConfig {
    pub fn with_span(t_end: f64, sample_dt: f64) -> Self {
        IntegratorConfig { t_end, sample_dt, ..Default::default() }
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions { rtol: self.rel_tol, atol: self.abs_tol, max_step: self.max_step, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Integrator("tolerances must be positive".into()));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::Integrator("sample_dt must be positive".into()));
        }
        if !self.t_end.is_finite() {
            return Err(Error::Integrator("t_end must be finite".into()));
        }
        Ok(())
    }
}

/// Maximum deviation of each integral from its initial value over a run.
///
/// Integrals are measured relative to `max(|I(0)|, 1)`; the Casimir entries
/// are absolute. `l` is `None` when `L` was undefined somewhere along the run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Drift {
    pub h: f64,
    pub k: f64,
    pub g: f64,
    pub f: f64,
    pub m: f64,
    pub l: Option<f64>,
    pub casimir: [f64; 3],
}

impl Drift {
    /// Largest of the `H, K, G, F, M` entries.
    pub fn max_integral(&self) -> f64 {
        self.h.max(self.k).max(self.g).max(self.f).max(self.m)
    }

    pub fn max_casimir(&self) -> f64 {
        self.casimir.iter().cloned().fold(0.0, f64::max)
    }
}

fn rel(x: f64, x0: f64) -> f64 {
    (x - x0).abs() / x0.abs().max(1.0)
}

/// Accumulates drift statistics one state at a time.
#[derive(Debug, Clone)]
pub struct DriftTracker {
    params: BodyParams,
    start: IntegralValues,
    start_casimir: [f64; 3],
    drift: Drift,
    l_defined: bool,
}

impl DriftTracker {
    pub fn new(s0: &PhaseState, params: &BodyParams) -> Self {
        let start = integral_fml(s0, params);
        let (c1, c2, c3) = casimir_residuals(s0, params);
        let l_defined = start.l.is_some();
        DriftTracker {
            params: *params,
            start,
            start_casimir: [c1, c2, c3],
            drift: Drift { l: l_defined.then_some(0.0), ..Default::default() },
            l_defined,
        }
    }

    pub fn observe(&mut self, s: &PhaseState) -> IntegralValues {
        let v = integral_fml(s, &self.params);
        let d = &mut self.drift;
        d.h = d.h.max(rel(v.h, self.start.h));
        d.k = d.k.max(rel(v.k, self.start.k));
        d.g = d.g.max(rel(v.g, self.start.g));
        d.f = d.f.max(rel(v.f, self.start.f));
        d.m = d.m.max(rel(v.m, self.start.m));
        match (v.l, self.start.l) {
            (Some(l), Some(l0)) if self.l_defined => d.l = Some(d.l.unwrap_or(0.0).max(rel(l, l0))),
            _ => {
                self.l_defined = false;
                d.l = None;
            }
        }
        let (c1, c2, c3) = casimir_residuals(s, &self.params);
        for (slot, (c, c0)) in d.casimir.iter_mut().zip([c1, c2, c3].into_iter().zip(self.start_casimir)) {
            *slot = slot.max((c - c0).abs());
        }
        v
    }

    pub fn drift(&self) -> Drift {
        self.drift
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub drift: Drift,
    pub stats: OdeStats,
}

/// Integrates the Euler–Poisson system from an admissible state and samples
/// it on the `sample_dt` grid. Negative `t_end` integrates backwards.
pub fn integrate(state0: &PhaseState, cfg: &IntegratorConfig, params: &BodyParams) -> Result<Trajectory> {
    cfg.validate()?;
    state0.check_admissible(params)?;
    let (times, raw, stats) =
        ode::integrate_sampled(|_, u| rhs_array(u), 0.0, state0.to_array(), cfg.t_end, cfg.sample_dt, &cfg.ode_options())?;
    let states: Vec<PhaseState> = raw.iter().map(PhaseState::from_array).collect();

    let mut tracker = DriftTracker::new(state0, params);
    for s in &states {
        tracker.observe(s);
    }
    let drift = tracker.drift();

    // abort threshold: 1e3 x the tolerance accumulated over the span
    let expected = cfg.rel_tol.max(cfg.abs_tol) * cfg.t_end.abs().max(1.0);
    let worst = drift.h.max(drift.k).max(drift.g).max(drift.max_casimir());
    if worst > 1e3 * expected {
        return Err(Error::Integrator(format!(
            "integral drift {worst:e} exceeds 1e3 x expected {expected:e} (H {:e}, K {:e}, G {:e}, Casimir {:e})",
            drift.h,
            drift.k,
            drift.g,
            drift.max_casimir()
        )));
    }
    Ok(Trajectory { times, states, drift, stats })
}

/// `(Ż1 − ω3 Z2, Ż2 + ω3 Z1)` with `Z1 = ω1² − ω2² + α1 − β2`,
/// `Z2 = 2ω1ω2 + α2 + β1` differentiated along the flow. Both vanish
/// identically, which is what makes `K = Z1² + Z2²` conserved.
pub fn time_derivative_identities(s: &PhaseState) -> (f64, f64) {
    let d = euler_poisson_rhs(s);
    let [w1, w2, w3] = s.omega.0;
    let [dw1, dw2, _] = d.omega.0;
    let z1 = w1 * w1 - w2 * w2 + s.alpha.x() - s.beta.y();
    let z2 = 2.0 * w1 * w2 + s.alpha.y() + s.beta.x();
    let z1_dot = 2.0 * w1 * dw1 - 2.0 * w2 * dw2 + d.alpha.x() - d.beta.y();
    let z2_dot = 2.0 * (dw1 * w2 + w1 * dw2) + d.alpha.y() + d.beta.x();
    (z1_dot - w3 * z2, z2_dot + w3 * z1)
}
