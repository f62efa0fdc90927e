//! Seeded invariant suites with worst-residual reporting. The `Mutations`
//! hook injects single sign errors into `F2` or the reconstruction so that
//! the suites' sensitivity can itself be tested.

use serde::Serialize;

use crate::dynamics::{time_derivative_identities, IntegratorConfig};
use crate::elliptic::period;
use crate::error::Result;
use crate::manifold::{
    bracket_ratio_with, chart_to_state, constraint_residuals_chart, f1_f2_with, state_to_chart, F2Mutation, ManifoldTolerance,
};
use crate::poisson::{hamiltonian_field, integral_fml, lie_poisson_bracket, Integral};
use crate::sampling::{random_admissible_state, random_level_sample, seeded_rng, LevelSampling, SampleRng};
use crate::separation::{
    crosscheck_with, level_of, reconstruct_with, relation6_residual, s_from_state, spec_of, Coordinate, RadicalMutation,
    SeparatedPoint, SeparationConstants,
};
use crate::statespace::{casimir_residuals, BodyParams};
use crate::dynamics::euler_poisson_rhs;

/// The sign pinned for `{F2, F1} / (r² L)` on the invariant set.
pub const BRACKET_SIGMA: f64 = -1.0;

pub const TOL_INVOLUTIVITY: f64 = 1e-8;
pub const TOL_SIGMA: f64 = 1e-6;
pub const TOL_ROUNDTRIP: f64 = 1e-12;
pub const TOL_MEMBERSHIP: f64 = 1e-9;
pub const TOL_S_ROUNDTRIP: f64 = 1e-10;
pub const TOL_RELATION6: f64 = 1e-8;
pub const TOL_IDENTITY: f64 = 1e-10;
pub const TOL_CROSSCHECK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Mutations {
    pub f2: F2Mutation,
    pub radical: RadicalMutation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    /// Samples where the quantity is undefined (skipped).
    pub skipped: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &'static str, tolerance: f64) -> Self {
        SuiteResult { name, passed: true, samples: 0, skipped: 0, worst: 0.0, tolerance, detail: String::new() }
    }

    fn record(&mut self, residual: f64) {
        self.samples += 1;
        // NaN counts as a failure
        if !(residual <= self.worst) {
            self.worst = if residual.is_nan() { f64::INFINITY } else { residual.max(self.worst) };
        }
    }

    fn fail(&mut self, why: String) {
        self.samples += 1;
        self.worst = f64::INFINITY;
        if self.detail.is_empty() {
            self.detail = why;
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.passed && self.worst <= self.tolerance;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub n_samples: usize,
    pub passed: bool,
    pub warnings: Vec<String>,
    pub suites: Vec<SuiteResult>,
}

impl CheckReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Number of level samples for the (more expensive) crosscheck suite.
    pub n_crosscheck: usize,
    pub mutations: Mutations,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { seed: 0, n_samples: 100, n_crosscheck: 3, mutations: Mutations::default() }
    }
}

fn level_samples(rng: &mut SampleRng, params: &BodyParams, n: usize) -> Vec<(SeparationConstants, SeparatedPoint)> {
    (0..n).map(|_| random_level_sample(rng, params, &LevelSampling::default())).collect()
}

/// `{H, K}`, `{H, G}`, `{K, G}` on random admissible states.
pub fn involutivity_suite(params: &BodyParams, rng: &mut SampleRng, n: usize) -> SuiteResult {
    let mut res = SuiteResult::new("bracket_involutivity", TOL_INVOLUTIVITY);
    let g = Integral::G(*params);
    for _ in 0..n {
        let s = random_admissible_state(rng, params, 1.5);
        for (f, h) in [(&Integral::H, &Integral::K), (&Integral::H, &g), (&Integral::K, &g)] {
            match lie_poisson_bracket(f, h, &s) {
                Ok(v) => res.record(v.abs()),
                Err(e) => res.fail(e.to_string()),
            }
        }
    }
    res.finish()
}

/// `{F2, F1} / (r² L)` over states on the invariant set: the mean must equal
/// the pinned sign and the spread must be tiny.
pub fn bracket_ratio_suite(params: &BodyParams, samples: &[(SeparationConstants, SeparatedPoint)], m: Mutations) -> SuiteResult {
    let mut res = SuiteResult::new("bracket_ratio", TOL_SIGMA);
    let mut ratios = Vec::new();
    for (c, p) in samples {
        let state = match reconstruct_with(p, c, params, RadicalMutation::None) {
            Ok(s) => s,
            Err(_) => {
                res.skipped += 1;
                continue;
            }
        };
        match bracket_ratio_with(&state, params, m.f2) {
            Ok(r) => ratios.push(r),
            Err(_) => res.skipped += 1,
        }
    }
    res.samples = ratios.len();
    if ratios.is_empty() {
        return res;
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let std = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    res.worst = (mean - BRACKET_SIGMA).abs().max(std);
    if res.worst.is_nan() {
        res.worst = f64::INFINITY;
    }
    res.detail = format!("mean {mean:.12}, std {std:.3e}");
    res.finish()
}

/// Chart and inverse chart compose to the identity.
pub fn chart_roundtrip_suite(params: &BodyParams, rng: &mut SampleRng, n: usize) -> SuiteResult {
    let mut res = SuiteResult::new("chart_roundtrip", TOL_ROUNDTRIP);
    for _ in 0..n {
        let s = random_admissible_state(rng, params, 1.5);
        match chart_to_state(&state_to_chart(&s), ManifoldTolerance::default().eps_domain) {
            Ok(back) => res.record(back.to_array().iter().zip(s.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)),
            Err(e) => res.fail(e.to_string()),
        }
    }
    res.finish()
}

/// Worst of `|F1|`, `|F2|`, the chart constraints, the Casimirs, the level
/// `(m, l)`, `H` on the level and the `(s1, s2)` roundtrip, for one sample.
pub fn membership_residual(params: &BodyParams, c: &SeparationConstants, p: &SeparatedPoint, m: Mutations) -> Result<f64> {
    let state = reconstruct_with(p, c, params, m.radical)?;
    let chart = state_to_chart(&state);
    let (f1, f2) = f1_f2_with(&chart, ManifoldTolerance::default().eps_domain, m.f2)?;
    let (c1, c2, c3) = constraint_residuals_chart(&chart, params);
    let (k1, k2, k3) = casimir_residuals(&state, params);
    let lv = level_of(&state, params)?;
    let h_level = crate::poisson::energy_on_level(c.m, c.l, params)?;
    let h = integral_fml(&state, params).h;
    let (s1, s2) = s_from_state(&state, params)?;
    let s_err = ((s1 - p.s1).abs().max((s2 - p.s2).abs()) / TOL_S_ROUNDTRIP) * TOL_MEMBERSHIP;
    Ok([
        f1.norm(),
        f2.norm(),
        c1.norm(),
        c2.norm(),
        c3.abs(),
        k1.abs(),
        k2.abs(),
        k3.abs(),
        (lv.m - c.m).abs(),
        (lv.l - c.l).abs(),
        (h - h_level).abs(),
        s_err,
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// Reconstructed states lie on the invariant set at the requested level.
pub fn membership_suite(params: &BodyParams, samples: &[(SeparationConstants, SeparatedPoint)], m: Mutations) -> SuiteResult {
    let mut res = SuiteResult::new("reconstruction_membership", TOL_MEMBERSHIP);
    for (c, p) in samples {
        match membership_residual(params, c, p, m) {
            Ok(v) => res.record(v),
            Err(e) => res.fail(format!("{e} at {p:?}")),
        }
    }
    res.finish()
}

pub fn relation6_suite(params: &BodyParams, samples: &[(SeparationConstants, SeparatedPoint)], m: Mutations) -> SuiteResult {
    let mut res = SuiteResult::new("relation6", TOL_RELATION6);
    for (c, p) in samples {
        match reconstruct_with(p, c, params, m.radical).and_then(|s| relation6_residual(&s, c, params)) {
            Ok(v) => res.record(v.abs()),
            Err(e) => res.fail(e.to_string()),
        }
    }
    res.finish()
}

/// Flow identities: `d/dt` of the `K` factors and agreement of the
/// equations of motion with the Hamiltonian vector field.
pub fn identity_suite(params: &BodyParams, rng: &mut SampleRng, n: usize) -> SuiteResult {
    let mut res = SuiteResult::new("identities", TOL_IDENTITY);
    for _ in 0..n {
        let s = random_admissible_state(rng, params, 1.5);
        let (i1, i2) = time_derivative_identities(&s);
        let d = euler_poisson_rhs(&s).to_array();
        let hf = hamiltonian_field(&s).to_array();
        let field = d.iter().zip(hf).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        res.record(i1.abs().max(i2.abs()).max(field));
    }
    res.finish()
}

/// Full Euler–Poisson flow from the reconstructed start against the
/// separated flow, over one `s2` period.
pub fn crosscheck_suite(params: &BodyParams, samples: &[(SeparationConstants, SeparatedPoint)], m: Mutations) -> SuiteResult {
    let mut res = SuiteResult::new("crosscheck", TOL_CROSSCHECK);
    for (c, p) in samples {
        let run = || -> Result<f64> {
            let t2 = period(&spec_of(p, c, params, Coordinate::S2)?)?;
            let cfg = IntegratorConfig::with_span(t2, t2 / 200.0);
            Ok(crosscheck_with(p, c, params, &cfg, m.radical)?.max_deviation())
        };
        match run() {
            Ok(v) => res.record(v),
            Err(e) => res.fail(e.to_string()),
        }
    }
    res.finish()
}

/// Runs every suite. With `n_samples = 0` the report passes trivially and
/// carries a warning.
pub fn run_checks(params: &BodyParams, cfg: &CheckConfig) -> CheckReport {
    let mut warnings = Vec::new();
    if cfg.n_samples == 0 {
        warnings.push("n_samples = 0: every suite is empty".to_string());
    }
    let mut rng = seeded_rng(cfg.seed);
    let n = cfg.n_samples;
    let levels = level_samples(&mut rng, params, n);
    let cross = if n == 0 { Vec::new() } else { levels.iter().take(cfg.n_crosscheck).copied().collect::<Vec<_>>() };
    let suites = vec![
        involutivity_suite(params, &mut rng, n),
        bracket_ratio_suite(params, &levels, cfg.mutations),
        chart_roundtrip_suite(params, &mut rng, n),
        membership_suite(params, &levels, cfg.mutations),
        relation6_suite(params, &levels, cfg.mutations),
        identity_suite(params, &mut rng, n),
        crosscheck_suite(params, &cross, cfg.mutations),
    ];
    for s in &suites {
        if s.skipped > 0 {
            warnings.push(format!("{}: {} samples skipped where undefined", s.name, s.skipped));
        }
    }
    CheckReport { seed: cfg.seed, n_samples: n, passed: suites.iter().all(|s| s.passed), warnings, suites }
}
