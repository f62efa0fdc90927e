//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//! Tolerances are pinned here and never loosened.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::time::{Duration, Instant};

use kovtop::bifurcation::{classify, classify_point, diagram_grid, Line};
use kovtop::checks::{
    bracket_ratio_suite, crosscheck_suite, involutivity_suite, membership_residual, membership_suite, Mutations, BRACKET_SIGMA,
};
use kovtop::dynamics::{self, IntegratorConfig};
use kovtop::elliptic::{compare_periods, period};
use kovtop::manifold::{f1_f2, state_to_chart, F2Mutation};
use kovtop::poisson::{energy_on_level, integral_fml};
use kovtop::sampling::{random_admissible_state, random_level_sample, seeded_rng, LevelSampling};
use kovtop::separation::{
    admissible_intervals, crosscheck, phi_roots, psi, quartic_spec, reconstruct, relation6_residual, s_from_state, spec_of, Coordinate,
    RadicalMutation, SeparatedPoint, SeparationConstants, Sign,
};
use kovtop::{BodyParams, PhaseState, Vec3};

const C1_DRIFT_INTEGRALS: f64 = 1e-6;
const C1_DRIFT_CASIMIR: f64 = 1e-9;
const C1_RUNTIME: Duration = Duration::from_secs(60);
const C2_EXACT: f64 = 1e-12;
const C3_SIGMA_STD: f64 = 1e-6;
const C3_INVOLUTIVITY: f64 = 1e-8;
const C4_DEVIATION: f64 = 1e-6;
const C4_RUNTIME_PER_POINT: Duration = Duration::from_secs(30);
const C5_PERIOD_REL: f64 = 1e-8;
const C6_MEMBERSHIP: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn p21() -> BodyParams {
    BodyParams::new(2.0, 1.0).unwrap()
}

fn conservation() -> Outcome {
    let p = p21();
    let start = Instant::now();
    let mut rng = seeded_rng(2024);
    let cfg = IntegratorConfig { rel_tol: 1e-10, ..IntegratorConfig::with_span(50.0, 0.05) };
    let (mut worst_int, mut worst_cas) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let s0 = random_admissible_state(&mut rng, &p, 1.5);
        match dynamics::integrate(&s0, &cfg, &p) {
            Ok(tr) => {
                worst_int = worst_int.max(tr.drift.max_integral());
                worst_cas = worst_cas.max(tr.drift.max_casimir());
            }
            Err(e) => return outcome(false, format!("integration failed: {e}")),
        }
    }
    let took = start.elapsed();
    outcome(
        worst_int <= C1_DRIFT_INTEGRALS && worst_cas <= C1_DRIFT_CASIMIR && took <= C1_RUNTIME,
        format!("integral drift {worst_int:.2e} (<= {C1_DRIFT_INTEGRALS:e}), Casimir drift {worst_cas:.2e} (<= {C1_DRIFT_CASIMIR:e}), {took:.2?}"),
    )
}

fn equilibrium() -> Outcome {
    let p = p21();
    let s = PhaseState { omega: Vec3([0.0; 3]), alpha: Vec3([2.0, 0.0, 0.0]), beta: Vec3([0.0, 1.0, 0.0]) };
    let v = integral_fml(&s, &p);
    let ch = state_to_chart(&s);
    let (f1, f2) = f1_f2(&ch, 1e-10).unwrap();
    let (s1, s2) = s_from_state(&s, &p).unwrap();
    let c = SeparationConstants::new(1.0 / 3.0, 1.0 / 3.0).unwrap();
    let roots = phi_roots(&c);
    let rec = reconstruct(&SeparatedPoint::new(2.0, -1.0), &c, &p).unwrap();
    let rec_err = rec.to_array().iter().zip(s.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let checks = [
        ("H", v.h, -3.0),
        ("K", v.k, 1.0),
        ("G", integral_fml(&s, &p).g, -6.0),
        ("F", v.f, 0.0),
        ("M", v.m, 1.0 / 3.0),
        ("L", v.l.unwrap_or(f64::NAN), 1.0 / 3.0),
        ("x1", ch.x1.re, 1.0),
        ("x2", ch.x2.re, 1.0),
        ("y1", ch.y1.re, 3.0),
        ("y2", ch.y2.re, 3.0),
        ("|z|+|w|", ch.z1.norm() + ch.w1.norm() + ch.w3.abs(), 0.0),
        ("|F1|", f1.norm(), 0.0),
        ("|F2|", f2.norm(), 0.0),
        ("s1", s1, 2.0),
        ("s2", s2, -1.0),
        ("Φ root 1", roots.0, -1.0),
        ("Φ root 2", roots.1, 2.0),
        ("Ψ(2,−1)", psi(2.0, -1.0, &c), -6.0),
        ("reconstruct", rec_err, 0.0),
        ("relation 6", relation6_residual(&s, &c, &p).unwrap(), 0.0),
        ("H on level", energy_on_level(c.m, c.l, &p).unwrap(), -3.0),
    ];
    let bad: Vec<String> =
        checks.iter().filter(|(_, got, want)| !((got - want).abs() <= C2_EXACT)).map(|(n, got, want)| format!("{n}={got} (want {want})")).collect();
    let imag = ch.x1.im.abs() + ch.y1.im.abs();
    outcome(bad.is_empty() && imag <= C2_EXACT, if bad.is_empty() { format!("{} quantities exact to {C2_EXACT:e}", checks.len()) } else { bad.join(", ") })
}

fn bracket_relation() -> Outcome {
    let p = p21();
    let mut rng = seeded_rng(33);
    let levels: Vec<_> = (0..60).map(|_| random_level_sample(&mut rng, &p, &LevelSampling::default())).collect();
    let ratio = bracket_ratio_suite(&p, &levels, Mutations::default());
    let invol = involutivity_suite(&p, &mut rng, 60);
    outcome(
        ratio.samples >= 50 && ratio.passed && invol.worst <= C3_INVOLUTIVITY,
        format!(
            "{} states, σ pinned {BRACKET_SIGMA}: {} (|mean−σ| and std <= {C3_SIGMA_STD:e}); max |{{H,K}},{{H,G}},{{K,G}}| {:.2e} (<= {C3_INVOLUTIVITY:e})",
            ratio.samples, ratio.detail, invol.worst
        ),
    )
}

/// `(1, 3.5)` plus admissible grid levels with bounded, non-degenerate
/// intervals, each with a start point inside both intervals.
fn crosscheck_points() -> Vec<(SeparationConstants, SeparatedPoint)> {
    let p = p21();
    let mut out = vec![(SeparationConstants::new(1.0, 3.5).unwrap(), SeparatedPoint::new(2.1, 0.3))];
    let flags = [
        [Sign::Plus, Sign::Minus, Sign::Plus, Sign::Plus],
        [Sign::Minus, Sign::Plus, Sign::Minus, Sign::Plus],
        [Sign::Plus, Sign::Plus, Sign::Minus, Sign::Minus],
        [Sign::Minus, Sign::Minus, Sign::Plus, Sign::Minus],
    ];
    for row in diagram_grid((0.4, 2.0), (1.5, 7.5), 5, &p).unwrap() {
        if !row.admissible || row.on_set || row.unbounded_s1 {
            continue;
        }
        let c = SeparationConstants::new(row.m, row.l).unwrap();
        let (i1, i2) = admissible_intervals(&c, &p);
        let (i1, i2) = (i1[0], i2[0]);
        if i1.width() < 1e-2 || i2.width() < 1e-2 {
            continue;
        }
        let k = out.len();
        let pt = SeparatedPoint::with_signs(i1.lo + 0.37 * i1.width(), i2.lo + 0.61 * i2.width(), flags[k % 4]);
        out.push((c, pt));
    }
    out
}

fn separation_crosscheck() -> Outcome {
    let p = p21();
    let pts = crosscheck_points();
    let mut lines = Vec::new();
    let mut ok = pts.len() >= 6;
    for (c, pt) in &pts {
        let start = Instant::now();
        let res = spec_of(pt, c, &p, Coordinate::S2)
            .and_then(|s| period(&s))
            .and_then(|t2| crosscheck(pt, c, &p, &IntegratorConfig::with_span(3.0 * t2, t2 / 200.0)));
        let took = start.elapsed();
        match res {
            Ok(rep) => {
                let dev = rep.max_deviation();
                ok &= dev <= C4_DEVIATION && took <= C4_RUNTIME_PER_POINT;
                lines.push(format!("({:.3},{:.3}) {dev:.1e}", c.m, c.l));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("({:.3},{:.3}) error {e}", c.m, c.l));
            }
        }
    }
    outcome(ok, format!("{} levels over 3 s2-periods, max |Δs| (<= {C4_DEVIATION:e}): {}", pts.len(), lines.join(", ")))
}

fn elliptic_periods() -> Outcome {
    let p = p21();
    let mut worst = 0.0f64;
    let mut n = 0;
    for (c, _) in crosscheck_points() {
        let (i1, i2) = admissible_intervals(&c, &p);
        for (which, iv) in [(Coordinate::S1, i1[0]), (Coordinate::S2, i2[0])] {
            match quartic_spec(&c, &p, which, &iv).and_then(|s| compare_periods(&s)) {
                Ok(cmp) => worst = worst.max(cmp.rel_diff),
                Err(e) => return outcome(false, format!("{c:?} {which:?}: {e}")),
            }
            n += 1;
        }
    }
    outcome(worst <= C5_PERIOD_REL, format!("{n} intervals, max relative difference {worst:.2e} (<= {C5_PERIOD_REL:e})"))
}

fn reconstruction_membership() -> Outcome {
    let p = p21();
    let mut rng = seeded_rng(66);
    let levels: Vec<_> = (0..100).map(|_| random_level_sample(&mut rng, &p, &LevelSampling::default())).collect();
    let res = membership_suite(&p, &levels, Mutations::default());
    let mut worst_each = 0.0f64;
    for (c, pt) in &levels {
        worst_each = worst_each.max(membership_residual(&p, c, pt, Mutations::default()).unwrap_or(f64::INFINITY));
    }
    outcome(
        res.samples == 100 && res.passed && worst_each <= C6_MEMBERSHIP,
        format!("100 samples, worst of |F1|, |F2|, constraint, Casimir, (m, l), H residuals {:.2e} (<= {C6_MEMBERSHIP:e})", res.worst),
    )
}

fn bifurcation_consistency() -> Outcome {
    let p = p21();
    let mut mismatches = 0;
    let mut n = 0;
    for row in diagram_grid((-3.0, 3.0), (0.0, 8.0), 81, &p).unwrap() {
        let c = SeparationConstants::new(row.m, row.l).unwrap();
        let (s1, s2) = admissible_intervals(&c, &p);
        n += 1;
        if (row.n_s1, row.n_s2) != (s1.len(), s2.len()) {
            mismatches += 1;
        }
    }
    let a = classify(&SeparationConstants::new(1.0, 3.5).unwrap(), &p).unwrap();
    let b = classify_point(1.0, 2.5, &p).unwrap();
    let e = classify_point(1.0 / 3.0, 1.0 / 3.0, &p).unwrap();
    let hand_a = (a.n_s1, a.n_s2, a.admissible, a.on_set) == (1, 1, true, false);
    let hand_b = (b.n_s1, b.n_s2, b.admissible) == (0, 1, false);
    let hand_e = e.on_set
        && e.degenerate_s1
        && e.degenerate_s2
        && e.active_lines.len() == 2
        && e.active_lines.contains(&Line { v: 2.0, delta: -1.0 })
        && e.active_lines.contains(&Line { v: -1.0, delta: 1.0 });
    outcome(
        mismatches == 0 && hand_a && hand_b && hand_e,
        format!("{mismatches}/{n} grid mismatches; (1,3.5) {hand_a}, (1,2.5) {hand_b}, (1/3,1/3) {hand_e} [{}]", e.active_labels()),
    )
}

fn mutation_sensitivity() -> Outcome {
    let p = p21();
    let mut rng = seeded_rng(88);
    let levels: Vec<_> = (0..30).map(|_| random_level_sample(&mut rng, &p, &LevelSampling::default())).collect();
    let cross: Vec<_> = levels.iter().take(3).copied().collect();
    let mut all = Vec::new();
    for f2 in F2Mutation::ALL {
        all.push(Mutations { f2, ..Default::default() });
    }
    for radical in RadicalMutation::ALL {
        all.push(Mutations { radical, ..Default::default() });
    }
    let mut missed = Vec::new();
    let mut caught = Vec::new();
    for m in all {
        let mut failing = Vec::new();
        if !bracket_ratio_suite(&p, &levels, m).passed {
            failing.push("3");
        }
        if !membership_suite(&p, &levels, m).passed {
            failing.push("6");
        }
        if failing.is_empty() && !crosscheck_suite(&p, &cross, m).passed {
            failing.push("4");
        }
        let name = if m.f2 != F2Mutation::None { format!("F2:{:?}", m.f2) } else { format!("radical:{:?}", m.radical) };
        if failing.is_empty() {
            missed.push(name);
        } else {
            caught.push(format!("{name}→{}", failing.join("+")));
        }
    }
    // the unmutated code must pass all three suites
    let clean = Mutations::default();
    let baseline = bracket_ratio_suite(&p, &levels, clean).passed
        && membership_suite(&p, &levels, clean).passed
        && crosscheck_suite(&p, &cross, clean).passed;
    outcome(
        missed.is_empty() && baseline,
        if missed.is_empty() { format!("baseline passes: {baseline}; {}", caught.join(", ")) } else { format!("undetected: {}", missed.join(", ")) },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 conservation", conservation),
        ("2 equilibrium example", equilibrium),
        ("3 bracket relation", bracket_relation),
        ("4 separation crosscheck", separation_crosscheck),
        ("5 elliptic periods", elliptic_periods),
        ("6 reconstruction membership", reconstruction_membership),
        ("7 bifurcation consistency", bifurcation_consistency),
        ("8 mutation sensitivity", mutation_sensitivity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("criterion {name}: {} | {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {}/8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
