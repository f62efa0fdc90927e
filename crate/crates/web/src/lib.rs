//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so the
//! logic can be tested natively.

use kovtop::bifurcation::{classify, classify_point};
use kovtop::elliptic::compare_periods;
use kovtop::poisson::energy_on_level;
use kovtop::separation::{admissible_intervals, integrate_separated, spec_of, Coordinate, Interval};
use kovtop::{BodyParams, SeparatedPoint, SeparationConstants};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Region code for points where `m = 0` (no level there).
pub const CODE_UNDEFINED: u8 = 255;
/// Region code for points on one of the separating lines.
pub const CODE_ON_SET: u8 = 254;

fn params(a: f64, b: f64) -> Result<BodyParams, String> {
    BodyParams::new(a, b).map_err(|e| e.to_string())
}

/// Region code of every pixel of a `width x height` raster over the given
/// window, row-major with the top row at `l_max`. Off the set the code is
/// `8 * min(n_s1, 7) + min(n_s2, 7)`.
pub fn region_codes(
    a: f64,
    b: f64,
    m_range: (f64, f64),
    l_range: (f64, f64),
    width: usize,
    height: usize,
) -> Result<Vec<u8>, String> {
    let p = params(a, b)?;
    let step = |lo: f64, hi: f64, n: usize, i: usize| if n > 1 { lo + (hi - lo) * i as f64 / (n - 1) as f64 } else { lo };
    let mut out = Vec::with_capacity(width * height);
    for row in 0..height {
        let l = step(l_range.1, l_range.0, height, row);
        for col in 0..width {
            let m = step(m_range.0, m_range.1, width, col);
            if m == 0.0 {
                out.push(CODE_UNDEFINED);
                continue;
            }
            let c = classify_point(m, l, &p).map_err(|e| e.to_string())?;
            out.push(if c.on_set { CODE_ON_SET } else { (8 * c.n_s1.min(7) + c.n_s2.min(7)) as u8 });
        }
    }
    Ok(out)
}

fn end(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(if x > 0.0 { "inf" } else { "-inf" })
    }
}

fn interval_json(iv: &Interval) -> Value {
    json!({ "lo": end(iv.lo), "hi": end(iv.hi), "lo_kind": iv.lo_kind, "hi_kind": iv.hi_kind })
}

/// First bounded interval of each coordinate, when both exist.
fn oscillation_start(c: &SeparationConstants, p: &BodyParams) -> Option<SeparatedPoint> {
    let (i1, i2) = admissible_intervals(c, p);
    let mid = |ivs: &[Interval]| ivs.iter().find(|iv| iv.is_bounded()).map(|iv| 0.5 * (iv.lo + iv.hi));
    Some(SeparatedPoint::new(mid(&i1)?, mid(&i2)?))
}

/// Classification, intervals, energy and both periods of the level `(m, l)`
/// as a JSON string.
pub fn level_report(a: f64, b: f64, m: f64, l: f64) -> Result<String, String> {
    let p = params(a, b)?;
    let c = SeparationConstants::new(m, l).map_err(|e| e.to_string())?;
    let cl = classify(&c, &p).map_err(|e| e.to_string())?;
    let (i1, i2) = admissible_intervals(&c, &p);
    let mut periods = json!({});
    if let Some(pt) = oscillation_start(&c, &p) {
        for (name, which) in [("s1", Coordinate::S1), ("s2", Coordinate::S2)] {
            let v = match spec_of(&pt, &c, &p, which).and_then(|s| compare_periods(&s)) {
                Ok(cmp) => json!(cmp),
                Err(e) => json!({ "error": e.to_string() }),
            };
            periods[name] = v;
        }
    }
    let v = json!({
        "m": m,
        "l": l,
        "H": energy_on_level(m, l, &p).map_err(|e| e.to_string())?,
        "admissible": cl.admissible,
        "on_set": cl.on_set,
        "active_lines": cl.active_labels(),
        "n_s1": cl.n_s1,
        "n_s2": cl.n_s2,
        "s1_intervals": i1.iter().map(interval_json).collect::<Vec<_>>(),
        "s2_intervals": i2.iter().map(interval_json).collect::<Vec<_>>(),
        "periods": periods,
    });
    Ok(v.to_string())
}

/// `s1(t)`, `s2(t)` of the separated motion from the middle of both
/// intervals, as `{"t": [...], "s1": [...], "s2": [...]}`.
pub fn separated_motion(a: f64, b: f64, m: f64, l: f64, t_end: f64, samples: usize) -> Result<String, String> {
    let p = params(a, b)?;
    let c = SeparationConstants::new(m, l).map_err(|e| e.to_string())?;
    if !(t_end > 0.0 && t_end.is_finite()) || samples < 2 {
        return Err("need t_end > 0 and at least 2 samples".into());
    }
    let start = oscillation_start(&c, &p).ok_or("level has no bounded s1 and s2 intervals")?;
    let dt = t_end / (samples - 1) as f64;
    let path = integrate_separated(&start, &c, &p, t_end, dt).map_err(|e| e.to_string())?;
    let v = json!({
        "t": path.times,
        "s1": path.points.iter().map(|q| q.s1).collect::<Vec<_>>(),
        "s2": path.points.iter().map(|q| q.s2).collect::<Vec<_>>(),
    });
    Ok(v.to_string())
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub fn version() -> String {
    kovtop::VERSION.to_string()
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn diagram(a: f64, b: f64, m_min: f64, m_max: f64, l_min: f64, l_max: f64, width: usize, height: usize) -> Result<Vec<u8>, JsError> {
    region_codes(a, b, (m_min, m_max), (l_min, l_max), width, height).map_err(js)
}

#[wasm_bindgen]
pub fn inspect(a: f64, b: f64, m: f64, l: f64) -> Result<String, JsError> {
    level_report(a, b, m, l).map_err(js)
}

#[wasm_bindgen]
pub fn motion(a: f64, b: f64, m: f64, l: f64, t_end: f64, samples: usize) -> Result<String, JsError> {
    separated_motion(a, b, m, l, t_end, samples).map_err(js)
}
