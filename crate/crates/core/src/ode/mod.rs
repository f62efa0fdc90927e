//! Adaptive explicit Runge–Kutta integration with dense output.
//!
//! The stepper is the Dormand–Prince 8(5,3) pair. Local error is measured in
//! the max norm over components, each scaled by `atol + rtol * max(|y|, |y_new|)`.

mod dop853_tableau;

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use dop853_tableau::{A, C, D, E3, E5, N_STAGES, N_STAGES_EXTENDED};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY, max_steps: 5_000_000 }
    }
}

impl OdeOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Integrator(format!("tolerances must be positive (rtol={}, atol={})", self.rtol, self.atol)));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Integrator(format!("max_step must be positive, got {}", self.max_step)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Seventh-order interpolant over one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<const N: usize> {
    t_old: f64,
    t_new: f64,
    y_old: [f64; N],
    y_new: [f64; N],
    coeffs: [[f64; N]; 7],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t_start(&self) -> f64 {
        self.t_old
    }

    pub fn t_end(&self) -> f64 {
        self.t_new
    }

    pub fn y_start(&self) -> &[f64; N] {
        &self.y_old
    }

    pub fn y_end(&self) -> &[f64; N] {
        &self.y_new
    }

    /// Whether `t` lies in the closed step interval (either direction).
    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_old <= self.t_new { (self.t_old, self.t_new) } else { (self.t_new, self.t_old) };
        t >= lo && t <= hi
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        if t == self.t_new {
            return self.y_new;
        }
        let x = (t - self.t_old) / (self.t_new - self.t_old);
        let mut y = [0.0; N];
        for (i, f) in self.coeffs.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { 1.0 - x };
            for (yk, fk) in y.iter_mut().zip(f) {
                *yk = (*yk + fk) * w;
            }
        }
        for (yk, y0) in y.iter_mut().zip(&self.y_old) {
            *yk += y0;
        }
        y
    }
}

fn select_initial_step<const N: usize, F>(rhs: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], dir: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let scale = |k: usize| opts.atol + opts.rtol * y0[k].abs();
    let d0 = (0..N).map(|k| (y0[k] / scale(k)).abs()).fold(0.0, f64::max);
    let d1 = (0..N).map(|k| (f0[k] / scale(k)).abs()).fold(0.0, f64::max);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.max_step);
    let mut y1 = [0.0; N];
    for k in 0..N {
        y1[k] = y0[k] + dir * h0 * f0[k];
    }
    let f1 = rhs(t0 + dir * h0, &y1);
    let d2 = (0..N).map(|k| ((f1[k] - f0[k]) / scale(k)).abs()).fold(0.0, f64::max) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (1e-6f64).max(h0 * 1e-3)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(opts.max_step)
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (either direction) and
/// hands every accepted step to `on_step` as a dense segment. Returning
/// `ControlFlow::Break` from the callback stops the integration early.
pub fn integrate<const N: usize, F, S>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: S,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(&DenseSegment<N>) -> ControlFlow<()>,
{
    opts.validate()?;
    if !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Integrator("non-finite time bounds".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial condition".into()));
    }
    let mut stats = OdeStats::default();
    if t_end == t0 {
        return Ok(stats);
    }
    let dir = (t_end - t0).signum();

    let mut t = t0;
    let mut y = y0;
    let mut f = rhs(t, &y);
    stats.evaluations += 1;
    let mut h_abs = select_initial_step(&mut rhs, t, &y, &f, dir, opts);
    stats.evaluations += 1;

    let mut k = [[0.0; N]; N_STAGES_EXTENDED];
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integrator(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
        if h_abs < min_step {
            return Err(Error::Integrator(format!("step size underflow at t = {t} (h = {h_abs:e})")));
        }
        h_abs = h_abs.min(opts.max_step);
        let mut h = dir * h_abs;
        let mut t_new = t + h;
        if dir * (t_new - t_end) > 0.0 {
            t_new = t_end;
        }
        h = t_new - t;
        h_abs = h.abs();

        k[0] = f;
        for s in 1..N_STAGES {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..N {
                        ys[c] += h * a * kj[c];
                    }
                }
            }
            k[s] = rhs(t + C[s] * h, &ys);
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(N_STAGES) {
            let b = A[N_STAGES][j];
            if b != 0.0 {
                for c in 0..N {
                    y_new[c] += h * b * kj[c];
                }
            }
        }
        let f_new = rhs(t_new, &y_new);
        k[N_STAGES] = f_new;
        stats.evaluations += N_STAGES;

        let mut err = 0.0f64;
        for c in 0..N {
            let sc = opts.atol + opts.rtol * y[c].abs().max(y_new[c].abs());
            let (mut e5, mut e3) = (0.0, 0.0);
            for j in 0..=N_STAGES {
                e5 += E5[j] * k[j][c];
                e3 += E3[j] * k[j][c];
            }
            let (e5, e3) = (e5 / sc, e3 / sc);
            let denom = e5.hypot(0.1 * e3);
            if denom > 0.0 {
                err = err.max(h_abs * e5 * e5 / denom);
            }
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            stats.rejected += 1;
            h_abs *= MIN_FACTOR;
            continue;
        }

        if err > 1.0 {
            stats.rejected += 1;
            h_abs *= (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR);
            continue;
        }

        for s in N_STAGES + 1..N_STAGES_EXTENDED {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..N {
                        ys[c] += h * a * kj[c];
                    }
                }
            }
            k[s] = rhs(t + C[s] * h, &ys);
        }
        stats.evaluations += N_STAGES_EXTENDED - N_STAGES - 1;

        let mut coeffs = [[0.0; N]; 7];
        for c in 0..N {
            let dy = y_new[c] - y[c];
            coeffs[0][c] = dy;
            coeffs[1][c] = h * f[c] - dy;
            coeffs[2][c] = 2.0 * dy - h * (f_new[c] + f[c]);
            for (r, drow) in D.iter().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += drow[j] * kj[c];
                }
                coeffs[3 + r][c] = h * acc;
            }
        }
        let seg = DenseSegment { t_old: t, t_new, y_old: y, y_new, coeffs };
        stats.accepted += 1;

        t = t_new;
        y = y_new;
        f = f_new;
        let factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(ERROR_EXPONENT)).clamp(MIN_FACTOR, MAX_FACTOR) };
        h_abs *= factor;

        if on_step(&seg).is_break() || t == t_end {
            return Ok(stats);
        }
    }
}

/// Sample times `t0 + k·dt` up to `t_end`, with `t_end` appended when it is
/// not already on the grid. `dt` is taken with the sign of `t_end - t0`.
pub fn sample_times(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Integrator(format!("sample step must be positive, got {dt}")));
    }
    let span = t_end - t0;
    let dir = if span < 0.0 { -1.0 } else { 1.0 };
    let n = (span.abs() / dt + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| t0 + dir * k as f64 * dt).collect();
    let last = *out.last().unwrap();
    if (t_end - last).abs() > 1e-9 * dt {
        out.push(t_end);
    } else {
        *out.last_mut().unwrap() = t_end;
    }
    Ok(out)
}

/// Integrates and returns the solution sampled at [`sample_times`].
pub fn integrate_sampled<const N: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    dt: f64,
    opts: &OdeOptions,
) -> Result<(Vec<f64>, Vec<[f64; N]>, OdeStats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let times = sample_times(t0, t_end, dt)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(y0);
    let mut next = 1;
    let stats = integrate(rhs, t0, y0, t_end, opts, |seg| {
        while next < times.len() && seg.contains(times[next]) {
            states.push(seg.eval(times[next]));
            next += 1;
        }
        ControlFlow::Continue(())
    })?;
    // t_end == t0 leaves only the initial sample
    debug_assert_eq!(states.len(), times.len());
    Ok((times, states, stats))
}

/// Root of `g(t, y(t))` inside one segment when `g` changes sign across it,
/// refined on the dense output with safeguarded secant steps.
pub fn locate_event<const N: usize, G>(seg: &DenseSegment<N>, mut g: G) -> Option<f64>
where
    G: FnMut(f64, &[f64; N]) -> f64,
{
    let (mut a, mut b) = (seg.t_start(), seg.t_end());
    let mut ga = g(a, seg.y_start());
    let gb = g(b, seg.y_end());
    if ga == 0.0 {
        return Some(a);
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    let mut gbv = gb;
    for _ in 0..200 {
        let mut m = b - gbv * (b - a) / (gbv - ga);
        let lo = a.min(b);
        let hi = a.max(b);
        let width = hi - lo;
        if !(m > lo + 0.01 * width && m < hi - 0.01 * width) {
            m = 0.5 * (a + b);
        }
        let gm = g(m, &seg.eval(m));
        if gm == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * m.abs().max(1.0) {
            return Some(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
            gbv = gm;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_accuracy_and_dense_output() {
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let (ts, ys, stats) = integrate_sampled(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 20.0, 0.137, &opts).unwrap();
        assert!(stats.accepted > 0);
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-10, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-10);
        }
        assert_eq!(*ts.last().unwrap(), 20.0);
    }

    #[test]
    fn backward_integration() {
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let (ts, ys, _) = integrate_sampled(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], -3.0, 0.5, &opts).unwrap();
        assert_eq!(ts.len(), 7);
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn sample_grid_shapes() {
        assert_eq!(sample_times(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sample_times(0.0, 1.1, 0.5).unwrap(), vec![0.0, 0.5, 1.0, 1.1]);
        assert_eq!(sample_times(0.0, 0.0, 0.5).unwrap(), vec![0.0]);
        assert!(sample_times(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn event_location_on_dense_output() {
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let mut found = None;
        integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 5.0, &opts, |seg| {
            if let Some(t) = locate_event(seg, |_, y| y[0]) {
                found = Some(t);
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!((found.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn rejects_bad_options() {
        let opts = OdeOptions { rtol: 0.0, ..Default::default() };
        assert!(integrate(|_, y: &[f64; 1]| *y, 0.0, [1.0], 1.0, &opts, |_| ControlFlow::Continue(())).is_err());
    }
}
