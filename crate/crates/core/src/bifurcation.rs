//! The separating set in the `(m, l)` plane and classification of levels.
//!
//! A root `(l ∓ 1)/(2m)` of `Φ` meets one of `±a, ±b` exactly on a line
//! `l = 2mv ± 1` with `v ∈ {±a, ±b}`. `Φ` itself never has a double root
//! (its discriminant is 16), so these eight lines are the whole discriminant
//! set of `(a² − s²)(b² − s²)Φ(s)`. The half-line `{l = 0, m < 0}` is carried
//! alongside.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::separation::{PhiPoly, SeparationConstants};
use crate::statespace::BodyParams;

/// Relative distance below which a point counts as lying on a line.
pub const ON_SET_TOL: f64 = 1e-9;

/// Relative gap below which two breakpoints of the classification coincide.
const MERGE_TOL: f64 = 1e-12;

/// The line `l = 2 v m + delta`, on which the root `(l − delta)/(2m)` equals `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub v: f64,
    pub delta: f64,
}

impl Line {
    pub fn slope(&self) -> f64 {
        2.0 * self.v
    }

    pub fn l_at(&self, m: f64) -> f64 {
        self.slope() * m + self.delta
    }

    /// Euclidean distance from `(m, l)`.
    pub fn distance(&self, m: f64, l: f64) -> f64 {
        (l - self.l_at(m)).abs() / (1.0 + self.slope() * self.slope()).sqrt()
    }

    /// Compact label such as `l=+4m-1`.
    pub fn label(&self) -> String {
        format!("l={:+}m{:+}", self.slope(), self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatingSet {
    pub lines: Vec<Line>,
}

impl SeparatingSet {
    /// Whether `(m, l)` lies on the half-line `{l = 0, m < 0}`.
    pub fn on_half_line(&self, m: f64, l: f64) -> bool {
        m < 0.0 && l.abs() <= ON_SET_TOL * (1.0 + m.abs())
    }

    pub fn active_lines(&self, m: f64, l: f64) -> Vec<Line> {
        self.lines.iter().copied().filter(|ln| ln.distance(m, l) <= ON_SET_TOL * (1.0 + m.abs())).collect()
    }
}

pub fn separating_lines(params: &BodyParams) -> SeparatingSet {
    let mut lines = Vec::with_capacity(8);
    for v in [params.a, -params.a, params.b, -params.b] {
        for delta in [1.0, -1.0] {
            lines.push(Line { v, delta });
        }
    }
    SeparatingSet { lines }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub m: f64,
    pub l: f64,
    pub n_s1: usize,
    pub n_s2: usize,
    pub admissible: bool,
    pub on_set: bool,
    pub active_lines: Vec<Line>,
    pub on_half_line: bool,
    /// Some component of the `s1` (resp. `s2`) set is a single point.
    pub degenerate_s1: bool,
    pub degenerate_s2: bool,
    /// Some component of the `s1` set is unbounded.
    pub unbounded_s1: bool,
}

impl Classification {
    pub fn active_labels(&self) -> String {
        self.active_lines.iter().map(Line::label).collect::<Vec<_>>().join(";")
    }
}

/// Components of `{s : cond(s)}` where `cond` can only change at `points`:
/// counts maximal runs in the alternating sequence of open gaps and points.
/// Returns (count, has_point_component, has_unbounded_component).
fn count_components(points: &[f64], cond: impl Fn(f64) -> bool, at_point: impl Fn(usize) -> bool) -> (usize, bool, bool) {
    let n = points.len();
    // element 2k is the gap before points[k]; element 2k+1 is points[k]; element 2n the last gap
    let gap_probe = |k: usize| -> f64 {
        if k == 0 {
            points[0] - 1.0 - points[0].abs()
        } else if k == n {
            points[n - 1] + 1.0 + points[n - 1].abs()
        } else {
            0.5 * (points[k - 1] + points[k])
        }
    };
    let truth: Vec<bool> = (0..=2 * n).map(|e| if e % 2 == 0 { cond(gap_probe(e / 2)) } else { at_point(e / 2) }).collect();
    let mut count = 0;
    let mut single_point = false;
    let mut unbounded = false;
    let mut e = 0;
    while e < truth.len() {
        if !truth[e] {
            e += 1;
            continue;
        }
        let start = e;
        while e < truth.len() && truth[e] {
            e += 1;
        }
        count += 1;
        if e - start == 1 && start % 2 == 1 {
            single_point = true;
        }
        if start == 0 || e == truth.len() {
            unbounded = true;
        }
    }
    (count, single_point, unbounded)
}

fn merged_breakpoints(mut pts: Vec<(f64, bool)>) -> Vec<(f64, bool)> {
    // (value, is a root of Φ)
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, bool)> = Vec::new();
    for (v, root) in pts {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= MERGE_TOL * (1.0 + v.abs()) => last.1 |= root,
            _ => out.push((v, root)),
        }
    }
    out
}

/// Classification of an arbitrary `(m, l)` with `m ≠ 0`; `l < 0` is allowed
/// so that sweeps can cross the `m` axis.
pub fn classify_point(m: f64, l: f64, params: &BodyParams) -> Result<Classification> {
    let phi = PhiPoly::new(m, l)?;
    let (r1, r2) = phi.roots();
    let (a, b) = (params.a, params.b);
    let phi_scale = |s: f64| 1e-12 * (1.0 + (4.0 * m * s * s).abs() + (4.0 * l * s).abs() + ((l * l - 1.0) / m).abs());

    let count = |field: f64, outside: bool| {
        let pts = merged_breakpoints(vec![(-field, false), (field, false), (r1, true), (r2, true)]);
        let values: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let field_ok = |s: f64| if outside { s.abs() >= field * (1.0 - MERGE_TOL) } else { s.abs() <= field * (1.0 + MERGE_TOL) };
        let phi_ok = |s: f64, is_root: bool| {
            let v = if is_root { 0.0 } else { phi.eval(s) };
            if outside {
                v <= phi_scale(s)
            } else {
                v >= -phi_scale(s)
            }
        };
        count_components(&values, |s| field_ok(s) && phi_ok(s, false), |k| field_ok(pts[k].0) && phi_ok(pts[k].0, pts[k].1))
    };
    let (n_s1, degenerate_s1, unbounded_s1) = count(a, true);
    let (n_s2, degenerate_s2, _) = count(b, false);

    let set = separating_lines(params);
    let active_lines = set.active_lines(m, l);
    let on_half_line = set.on_half_line(m, l);
    Ok(Classification {
        m,
        l,
        n_s1,
        n_s2,
        admissible: n_s1 >= 1 && n_s2 >= 1,
        on_set: !active_lines.is_empty() || on_half_line,
        active_lines,
        on_half_line,
        degenerate_s1,
        degenerate_s2,
        unbounded_s1,
    })
}

pub fn classify(c: &SeparationConstants, params: &BodyParams) -> Result<Classification> {
    classify_point(c.m, c.l, params)
}

fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = range;
    if hi < lo || n == 0 {
        return Vec::new();
    }
    if n == 1 || hi == lo {
        return vec![lo];
    }
    (0..n).map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

/// Classifications on an `n × n` grid of evenly spaced points including both
/// ends of each range, row-major with `m` varying fastest. Points with
/// `m = 0` are skipped. An empty range (`hi < lo`) gives no rows; going from
/// `n` to `2n − 1` points keeps every earlier point.
pub fn diagram_grid(m_range: (f64, f64), l_range: (f64, f64), resolution: usize, params: &BodyParams) -> Result<Vec<Classification>> {
    if resolution == 0 {
        return Err(Error::InvalidParams("grid resolution must be positive".into()));
    }
    if ![m_range.0, m_range.1, l_range.0, l_range.1].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("grid range".into()));
    }
    let ms = axis(m_range, resolution);
    let ls = axis(l_range, resolution);
    let mut rows = Vec::with_capacity(ms.len() * ls.len());
    for &l in &ls {
        for &m in &ms {
            if m == 0.0 {
                continue;
            }
            rows.push(classify_point(m, l, params)?);
        }
    }
    Ok(rows)
}
