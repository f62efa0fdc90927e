use kovtop::bifurcation::{classify, diagram_grid, separating_lines, Classification};
use kovtop::checks::{run_checks, CheckConfig, Mutations};
use kovtop::dynamics::{self, IntegratorConfig};
use kovtop::elliptic::{self, compare_periods};
use kovtop::manifold::{on_n, F2Mutation, ManifoldTolerance};
use kovtop::poisson::{energy_on_level, integral_fml};
use kovtop::separation::{
    admissible_intervals, integrate_separated, interval_of, reconstruct, s_from_state, spec_of, Coordinate, Interval,
    RadicalMutation,
};
use kovtop::statespace::{casimir_residuals, normalize_fields};
use kovtop::{BodyParams, PhaseState, SeparatedPoint, SeparationConstants, Sign, Vec3};
use serde_json::{json, Value};

use crate::output::{Cell, Payload, Table};
use crate::{BifurcationArgs, CheckArgs, CmdError, Common, CrosscheckArgs, LevelArgs, Outcome, ParamsArgs, PeriodArgs, SimulateArgs, Which};

/// Largest Casimir drift tolerated on any simulate row.
pub const CASIMIR_BOUND: f64 = 1e-9;
/// Largest |s_full − s_sep| tolerated by crosscheck.
pub const CROSSCHECK_BOUND: f64 = 1e-6;
/// Largest relative difference between the two period estimates.
pub const PERIOD_BOUND: f64 = 1e-8;

type CmdResult = Result<Outcome, CmdError>;

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn failed(msg: impl Into<String>) -> CmdError {
    CmdError::Failed(msg.into())
}

fn body_params(c: &Common) -> Result<BodyParams, CmdError> {
    Ok(BodyParams::new(c.a, c.b)?)
}

fn vec3(v: &[f64], flag: &str) -> Result<Vec3, CmdError> {
    match v {
        [x, y, z] => Ok(Vec3([*x, *y, *z])),
        _ => Err(usage(format!("--{flag} takes three comma-separated numbers, got {}", v.len()))),
    }
}

fn require_level(level: &LevelArgs) -> Result<SeparationConstants, CmdError> {
    match (level.m, level.l) {
        (Some(m), Some(l)) => Ok(SeparationConstants::new(m, l)?),
        _ => Err(usage("--m and --l are required")),
    }
}

fn verdict(c: &SeparationConstants, params: &BodyParams) -> String {
    match classify(c, params) {
        Ok(cl) if cl.n_s1 == 0 && cl.n_s2 == 0 => "s1 and s2 intervals empty".into(),
        Ok(cl) if cl.n_s1 == 0 => "s1 interval empty".into(),
        Ok(cl) if cl.n_s2 == 0 => "s2 interval empty".into(),
        Ok(_) => "admissible".into(),
        Err(e) => e.to_string(),
    }
}

/// A point in the given interval list: `given` if it lies in one, otherwise
/// the middle of the first bounded interval (one unit inside an unbounded one).
fn pick(intervals: &[Interval], given: Option<f64>, name: &str) -> Result<f64, CmdError> {
    if let Some(s) = given {
        return if intervals.iter().any(|iv| iv.contains(s, 1e-12 * (1.0 + s.abs()))) {
            Ok(s)
        } else {
            Err(failed(format!("{name} = {s} lies outside the admissible {name} set")))
        };
    }
    if let Some(iv) = intervals.iter().find(|iv| iv.is_bounded()) {
        return Ok(0.5 * (iv.lo + iv.hi));
    }
    match intervals.first() {
        Some(iv) if iv.lo.is_finite() => Ok(iv.lo + 1.0),
        Some(iv) if iv.hi.is_finite() => Ok(iv.hi - 1.0),
        Some(_) => Ok(0.0),
        None => Err(failed(format!("{name} interval empty"))),
    }
}

/// Level, admissible separated point and its signs from the level flags.
fn level_point(level: &LevelArgs, params: &BodyParams) -> Result<(SeparationConstants, SeparatedPoint), CmdError> {
    let c = require_level(level)?;
    let (i1, i2) = admissible_intervals(&c, params);
    if i1.is_empty() || i2.is_empty() {
        return Err(failed(format!("non-admissible level (m, l) = ({}, {}): {}", c.m, c.l, verdict(&c, params))));
    }
    let s1 = pick(&i1, level.s1, "s1")?;
    let s2 = pick(&i2, level.s2, "s2")?;
    let signs = [level.eps1, level.eps2, level.sig1, level.sig2].map(|v| Sign::from_value(f64::from(v)));
    Ok((c, SeparatedPoint::with_signs(s1, s2, signs)))
}

fn has_level(level: &LevelArgs) -> bool {
    level.m.is_some() || level.l.is_some()
}

fn state_json(s: &PhaseState) -> Value {
    json!({ "omega": s.omega.0, "alpha": s.alpha.0, "beta": s.beta.0 })
}

fn params_json(p: &BodyParams) -> Value {
    json!({ "a": p.a, "b": p.b, "p2": p.p2, "r2": p.r2, "r": p.r() })
}

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let raw = [&args.omega, &args.alpha, &args.beta];
    let any_raw = raw.iter().any(|v| v.is_some());
    if any_raw && has_level(&args.level) {
        return Err(usage("give either --m/--l or --omega/--alpha/--beta, not both"));
    }
    let (state0, params, theta) = if any_raw {
        let [Some(w), Some(a), Some(b)] = raw else {
            return Err(usage("--omega, --alpha and --beta must be given together"));
        };
        let rep = normalize_fields(vec3(w, "omega")?, vec3(a, "alpha")?, vec3(b, "beta")?)?;
        (rep.state, rep.params()?, Some(rep.theta))
    } else if has_level(&args.level) {
        let params = body_params(&args.common)?;
        let (c, p) = level_point(&args.level, &params)?;
        (reconstruct(&p, &c, &params)?, params, None)
    } else {
        return Err(usage("an initial condition is required: --m/--l [--s1 --s2] or --omega/--alpha/--beta"));
    };

    let cfg = IntegratorConfig {
        rel_tol: args.tol.rel_tol,
        abs_tol: args.tol.abs_tol,
        t_end: args.t_end,
        sample_dt: args.dt,
        ..Default::default()
    };
    let traj = dynamics::integrate(&state0, &cfg, &params)?;

    let mut table = Table::new(&[
        "t", "omega1", "omega2", "omega3", "alpha1", "alpha2", "alpha3", "beta1", "beta2", "beta3", "H", "K", "G", "F", "M",
        "L", "resF1", "resF2",
    ]);
    let tol = ManifoldTolerance::default();
    let c0 = casimir_residuals(&state0, &params);
    let mut worst_casimir = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let v = integral_fml(s, &params);
        let (f1, f2) = on_n(s, &params, &tol).map_or((f64::NAN, f64::NAN), |r| (r.f1, r.f2));
        let c = casimir_residuals(s, &params);
        worst_casimir = worst_casimir.max((c.0 - c0.0).abs()).max((c.1 - c0.1).abs()).max((c.2 - c0.2).abs());
        let mut row: Vec<Cell> = vec![(*t).into()];
        row.extend(s.to_array().iter().map(|&x| Cell::from(x)));
        row.extend([v.h, v.k, v.g, v.f, v.m, or_nan(v.l), f1, f2].map(Cell::from));
        table.push(row);
    }
    let summary = json!({
        "params": params_json(&params),
        "normalization_theta": theta,
        "initial_state": state_json(&state0),
        "rows": table.rows.len(),
        "drift": traj.drift,
        "max_casimir_drift": worst_casimir,
        "casimir_bound": CASIMIR_BOUND,
        "ode_stats": traj.stats,
    });
    let failure = (worst_casimir > CASIMIR_BOUND)
        .then(|| format!("Casimir drift {worst_casimir:e} exceeds {CASIMIR_BOUND:e}; tighten --rel-tol/--abs-tol"));
    Ok(Outcome { payload: Some(Payload::Table(table)), summary, failure })
}

fn f2_mutation(name: Option<&str>) -> F2Mutation {
    match name {
        Some("overall") => F2Mutation::OverallSign,
        Some("first-inner") => F2Mutation::FirstInner,
        Some("middle") => F2Mutation::MiddleSign,
        Some("second-inner") => F2Mutation::SecondInner,
        _ => F2Mutation::None,
    }
}

fn radical_mutation(name: Option<&str>) -> RadicalMutation {
    match name {
        Some("field-s1") => RadicalMutation::FieldS1,
        Some("field-s2") => RadicalMutation::FieldS2,
        Some("phi-s1") => RadicalMutation::PhiS1,
        Some("phi-s2") => RadicalMutation::PhiS2,
        Some("phi-phi") => RadicalMutation::PhiPhi,
        Some("field-field") => RadicalMutation::FieldField,
        Some("field-s2-phi-s1") => RadicalMutation::FieldS2PhiS1,
        Some("field-s1-phi-s2") => RadicalMutation::FieldS1PhiS2,
        _ => RadicalMutation::None,
    }
}

pub fn check(args: &CheckArgs) -> CmdResult {
    let params = body_params(&args.common)?;
    let cfg = CheckConfig {
        seed: args.seed,
        n_samples: args.n_samples,
        n_crosscheck: args.n_crosscheck,
        mutations: Mutations {
            f2: f2_mutation(args.inject_f2.as_deref()),
            radical: radical_mutation(args.inject_radical.as_deref()),
        },
    };
    let report = run_checks(&params, &cfg);
    let failing: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    let summary = json!({ "passed": report.passed, "failing_suites": failing, "warnings": report.warnings });
    let failure = (!report.passed).then(|| format!("suites failed: {}", failing.join(", ")));
    let value = serde_json::to_value(&report).map_err(|e| failed(e.to_string()))?;
    Ok(Outcome { payload: Some(Payload::Json(value)), summary, failure })
}

/// Finite, positive period of one coordinate, or `None` when it is constant
/// or never returns.
fn finite_period(p: &SeparatedPoint, c: &SeparationConstants, params: &BodyParams, which: Coordinate) -> Option<f64> {
    let iv = interval_of(p, c, params, which).ok()?;
    if iv.is_degenerate() {
        return None;
    }
    let t = elliptic::period(&spec_of(p, c, params, which).ok()?).ok()?;
    (t.is_finite() && t > 0.0).then_some(t)
}

pub fn crosscheck(args: &CrosscheckArgs) -> CmdResult {
    let params = body_params(&args.common)?;
    let (c, p0) = level_point(&args.level, &params)?;
    let base = finite_period(&p0, &c, &params, Coordinate::S2).or_else(|| finite_period(&p0, &c, &params, Coordinate::S1));
    let t_end = match (args.t_end, base) {
        (Some(t), _) => t,
        (None, Some(t)) => args.periods * t,
        (None, None) => 10.0,
    };
    let dt = args.dt.unwrap_or_else(|| base.map_or(0.05, |t| t / 200.0));
    let cfg = IntegratorConfig { rel_tol: args.tol.rel_tol, abs_tol: args.tol.abs_tol, t_end, sample_dt: dt, ..Default::default() };

    let state0 = reconstruct(&p0, &c, &params)?;
    let traj = dynamics::integrate(&state0, &cfg, &params)?;
    let sep = integrate_separated(&p0, &c, &params, t_end, dt)?;
    let mut table = Table::new(&["t", "s1_full", "s1_sep", "s2_full", "s2_sep", "abs_delta"]);
    let mut worst = 0.0f64;
    for ((t, s), q) in traj.times.iter().zip(&traj.states).zip(&sep.points) {
        let (s1, s2) = s_from_state(s, &params)?;
        let d = (s1 - q.s1).abs().max((s2 - q.s2).abs());
        worst = worst.max(d);
        table.push([*t, s1, q.s1, s2, q.s2, d].map(Cell::from).to_vec());
    }
    let summary = json!({
        "params": params_json(&params),
        "m": c.m,
        "l": c.l,
        "start": p0,
        "t_end": t_end,
        "dt": dt,
        "reference_period": base,
        "max_abs_delta": worst,
        "bound": CROSSCHECK_BOUND,
        "drift": traj.drift,
    });
    let failure = (!(worst <= CROSSCHECK_BOUND)).then(|| format!("max |delta| {worst:e} exceeds {CROSSCHECK_BOUND:e}"));
    Ok(Outcome { payload: Some(Payload::Table(table)), summary, failure })
}

pub fn bifurcation(args: &BifurcationArgs) -> CmdResult {
    let params = body_params(&args.common)?;
    if args.resolution == 0 {
        return Err(usage("--resolution must be at least 1"));
    }
    let grid = diagram_grid((args.m_min, args.m_max), (args.l_min, args.l_max), args.resolution, &params)?;
    let mut table = Table::new(&[
        "m", "l", "n_s1", "n_s2", "admissible", "on_set", "lines_active", "on_half_line", "degenerate_s1", "degenerate_s2",
    ]);
    for cl in &grid {
        let Classification { m, l, n_s1, n_s2, admissible, on_set, on_half_line, degenerate_s1, degenerate_s2, .. } = *cl;
        table.push(vec![
            m.into(),
            l.into(),
            n_s1.into(),
            n_s2.into(),
            admissible.into(),
            on_set.into(),
            cl.active_lines.len().into(),
            on_half_line.into(),
            degenerate_s1.into(),
            degenerate_s2.into(),
        ]);
    }
    let summary = json!({
        "params": params_json(&params),
        "points": grid.len(),
        "admissible": grid.iter().filter(|c| c.admissible).count(),
        "on_set": grid.iter().filter(|c| c.on_set).count(),
    });
    Ok(Outcome { payload: Some(Payload::Table(table)), summary, failure: None })
}

pub fn period(args: &PeriodArgs) -> CmdResult {
    let params = body_params(&args.common)?;
    let (c, p) = level_point(&args.level, &params)?;
    let (which, name) = match args.which {
        Which::S1 => (Coordinate::S1, "s1"),
        Which::S2 => (Coordinate::S2, "s2"),
    };
    let iv = interval_of(&p, &c, &params, which)?;
    let base = json!({ "which": name, "m": c.m, "l": c.l, "interval": [iv.lo, iv.hi] });
    if iv.is_degenerate() {
        let v = json!({ "which": name, "m": c.m, "l": c.l, "interval": [iv.lo, iv.hi], "degenerate": true });
        return Ok(Outcome {
            payload: Some(Payload::Json(v)),
            summary: base,
            failure: Some(format!("degenerate {name} interval: single point s = {}", iv.lo)),
        });
    }
    let spec = spec_of(&p, &c, &params, which)?;
    let t = elliptic::period(&spec)?;
    if !t.is_finite() {
        let v = json!({ "which": name, "m": c.m, "l": c.l, "interval": [iv.lo, iv.hi], "degenerate": false, "period_closed_form": null });
        return Ok(Outcome {
            payload: Some(Payload::Json(v)),
            summary: base,
            failure: Some(format!("{name} oscillation never returns: an endpoint is a double root")),
        });
    }
    let cmp = compare_periods(&spec)?;
    let v = json!({
        "which": name,
        "m": c.m,
        "l": c.l,
        "interval": [iv.lo, iv.hi],
        "degenerate": false,
        "period_closed_form": cmp.period_closed_form,
        "period_ode": cmp.period_ode,
        "rel_diff": cmp.rel_diff,
    });
    let failure = (!(cmp.rel_diff <= PERIOD_BOUND)).then(|| format!("rel_diff {:e} exceeds {PERIOD_BOUND:e}", cmp.rel_diff));
    Ok(Outcome { payload: Some(Payload::Json(v.clone())), summary: v, failure })
}

fn interval_json(iv: &Interval) -> Value {
    let end = |x: f64| if x.is_finite() { json!(x) } else if x > 0.0 { json!("inf") } else { json!("-inf") };
    json!({ "lo": end(iv.lo), "hi": end(iv.hi), "lo_kind": iv.lo_kind, "hi_kind": iv.hi_kind })
}

pub fn params(args: &ParamsArgs) -> CmdResult {
    let (params, theta) = match (&args.alpha, &args.beta) {
        (Some(a), Some(b)) => {
            let rep = normalize_fields(Vec3::default(), vec3(a, "alpha")?, vec3(b, "beta")?)?;
            (rep.params()?, Some(rep.theta))
        }
        (None, None) => (body_params(&args.common)?, None),
        _ => return Err(usage("--alpha and --beta must be given together")),
    };
    let set = separating_lines(&params);
    let lines: Vec<Value> = set.lines.iter().map(|ln| json!({ "label": ln.label(), "v": ln.v, "delta": ln.delta })).collect();
    let mut v = params_json(&params);
    v["normalization_theta"] = json!(theta);
    v["lines"] = json!(lines);
    v["half_line"] = json!("l = 0, m < 0");
    match (args.m, args.l) {
        (Some(m), Some(l)) => {
            let c = SeparationConstants::new(m, l)?;
            let cl = classify(&c, &params)?;
            let (i1, i2) = admissible_intervals(&c, &params);
            v["level"] = json!({
                "m": m,
                "l": l,
                "H": energy_on_level(m, l, &params)?,
                "classification": cl,
                "active_lines": cl.active_labels(),
                "s1_intervals": i1.iter().map(interval_json).collect::<Vec<_>>(),
                "s2_intervals": i2.iter().map(interval_json).collect::<Vec<_>>(),
            });
        }
        (None, None) => {}
        _ => return Err(usage("--m and --l must be given together")),
    }
    Ok(Outcome { payload: Some(Payload::Json(v.clone())), summary: json!({ "params": params_json(&params) }), failure: None })
}
