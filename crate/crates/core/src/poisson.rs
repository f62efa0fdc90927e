//! First integrals `H`, `K`, `G`, the derived functions `F`, `M`, `L`, and a
//! Lie–Poisson bracket on `(M, α, β)` with `M = (2ω1, 2ω2, ω3)`.
//!
//! The structure tensor is
//!
//! ```text
//! {M_i, M_j} = -ε_ijk M_k,   {M_i, α_j} = -ε_ijk α_k,   {M_i, β_j} = -ε_ijk β_k
//! ```
//!
//! with all other basic brackets zero, and the flow is `u̇ = {u, H}`. With this
//! sign the Hamiltonian vector field of `H` is exactly the Euler–Poisson
//! right-hand side in [`crate::dynamics`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::{BodyParams, PhaseState, Vec3};

/// Gradient with respect to `(ω1, ω2, ω3, α1, α2, α3, β1, β2, β3)`.
pub type Gradient = [f64; 9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralValues {
    pub h: f64,
    pub k: f64,
    pub g: f64,
    pub f: f64,
    pub m: f64,
    /// `None` where the radicand `2p²M² + 2HM + 1` is negative.
    pub l: Option<f64>,
}

/// Angular momentum coordinates for the inertia tensor `diag(2, 2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumChart {
    pub m_vec: Vec3,
    pub alpha: Vec3,
    pub beta: Vec3,
}

impl From<&PhaseState> for MomentumChart {
    fn from(s: &PhaseState) -> Self {
        let w = s.omega.0;
        MomentumChart { m_vec: Vec3([2.0 * w[0], 2.0 * w[1], w[2]]), alpha: s.alpha, beta: s.beta }
    }
}

impl From<&MomentumChart> for PhaseState {
    fn from(c: &MomentumChart) -> Self {
        let m = c.m_vec.0;
        PhaseState { omega: Vec3([0.5 * m[0], 0.5 * m[1], m[2]]), alpha: c.alpha, beta: c.beta }
    }
}

impl MomentumChart {
    pub fn to_array(&self) -> [f64; 9] {
        let mut u = [0.0; 9];
        u[..3].copy_from_slice(&self.m_vec.0);
        u[3..6].copy_from_slice(&self.alpha.0);
        u[6..].copy_from_slice(&self.beta.0);
        u
    }

    pub fn from_array(u: &[f64; 9]) -> Self {
        MomentumChart {
            m_vec: Vec3([u[0], u[1], u[2]]),
            alpha: Vec3([u[3], u[4], u[5]]),
            beta: Vec3([u[6], u[7], u[8]]),
        }
    }
}

pub fn integral_h(s: &PhaseState) -> f64 {
    let [w1, w2, w3] = s.omega.0;
    w1 * w1 + w2 * w2 + 0.5 * w3 * w3 - (s.alpha.x() + s.beta.y())
}

fn k_parts(s: &PhaseState) -> (f64, f64) {
    let [w1, w2, _] = s.omega.0;
    let z1 = w1 * w1 - w2 * w2 + s.alpha.x() - s.beta.y();
    let z2 = 2.0 * w1 * w2 + s.alpha.y() + s.beta.x();
    (z1, z2)
}

pub fn integral_k(s: &PhaseState) -> f64 {
    let (z1, z2) = k_parts(s);
    z1 * z1 + z2 * z2
}

/// `(ω_α, ω_β, ω_γ)`: the projections of `M = Iω` on `α`, `β` and `α × β`.
pub fn aux_omegas(s: &PhaseState) -> (f64, f64, f64) {
    let m = MomentumChart::from(s).m_vec;
    (m.dot(&s.alpha), m.dot(&s.beta), m.dot(&s.alpha.cross(&s.beta)))
}

pub fn integral_g(s: &PhaseState, params: &BodyParams) -> f64 {
    let (wa, wb, wg) = aux_omegas(s);
    let a2 = params.a * params.a;
    let b2 = params.b * params.b;
    0.25 * (wa * wa + wb * wb) + 0.5 * s.omega.z() * wg - b2 * s.alpha.x() - a2 * s.beta.y()
}

pub fn integral_fml(s: &PhaseState, params: &BodyParams) -> IntegralValues {
    let h = integral_h(s);
    let k = integral_k(s);
    let g = integral_g(s, params);
    let lin = 2.0 * g - params.p2 * h;
    let r4 = params.r4();
    let f = lin * lin - r4 * k;
    let m = lin / r4;
    let l = l_from_hm(h, m, params);
    IntegralValues { h, k, g, f, m, l }
}

/// `L = sqrt(2p²M² + 2HM + 1)`, `None` for a negative radicand.
pub fn l_from_hm(h: f64, m: f64, params: &BodyParams) -> Option<f64> {
    let rad = l_radicand(h, m, params);
    (rad >= 0.0).then(|| rad.sqrt())
}

pub fn l_radicand(h: f64, m: f64, params: &BodyParams) -> f64 {
    2.0 * params.p2 * m * m + 2.0 * h * m + 1.0
}

fn grad_h(s: &PhaseState) -> Gradient {
    let [w1, w2, w3] = s.omega.0;
    [2.0 * w1, 2.0 * w2, w3, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0]
}

fn grad_k(s: &PhaseState) -> Gradient {
    let [w1, w2, _] = s.omega.0;
    let (z1, z2) = k_parts(s);
    let mut g = [0.0; 9];
    g[0] = 2.0 * z1 * 2.0 * w1 + 2.0 * z2 * 2.0 * w2;
    g[1] = -2.0 * z1 * 2.0 * w2 + 2.0 * z2 * 2.0 * w1;
    g[3] = 2.0 * z1;
    g[7] = -2.0 * z1;
    g[4] = 2.0 * z2;
    g[6] = 2.0 * z2;
    g
}

fn grad_g(s: &PhaseState, params: &BodyParams) -> Gradient {
    let (wa, wb, wg) = aux_omegas(s);
    let al = s.alpha;
    let be = s.beta;
    let m = MomentumChart::from(s).m_vec;
    let w3 = s.omega.z();
    let gamma = al.cross(&be);
    // ω-derivatives of the three projections share the diag(2, 2, 1) factor
    let dw = |v: &Vec3| [2.0 * v.x(), 2.0 * v.y(), v.z()];
    let (da_w, db_w, dg_w) = (dw(&al), dw(&be), dw(&gamma));
    let mut g = [0.0; 9];
    for i in 0..3 {
        g[i] = 0.5 * wa * da_w[i] + 0.5 * wb * db_w[i] + 0.5 * w3 * dg_w[i];
    }
    g[2] += 0.5 * wg;
    let dg_alpha = be.cross(&m);
    let dg_beta = m.cross(&al);
    for i in 0..3 {
        g[3 + i] = 0.5 * wa * m.0[i] + 0.5 * w3 * dg_alpha.0[i];
        g[6 + i] = 0.5 * wb * m.0[i] + 0.5 * w3 * dg_beta.0[i];
    }
    g[3] -= params.b * params.b;
    g[7] -= params.a * params.a;
    g
}

/// A scalar function on phase space, optionally with an analytic gradient.
pub trait PhaseFunction {
    fn value(&self, s: &PhaseState) -> f64;

    /// Gradient in `(ω, α, β)` coordinates; `None` falls back to central differences.
    fn gradient(&self, _s: &PhaseState) -> Option<Gradient> {
        None
    }
}

/// Wraps a closure as a [`PhaseFunction`] without an analytic gradient.
pub struct FnField<F>(pub F);

impl<F: Fn(&PhaseState) -> f64> PhaseFunction for FnField<F> {
    fn value(&self, s: &PhaseState) -> f64 {
        (self.0)(s)
    }
}

/// Built-in integrals and Casimirs, all with analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integral {
    H,
    K,
    G(BodyParams),
    F(BodyParams),
    M(BodyParams),
    L(BodyParams),
    AlphaSq,
    BetaSq,
    AlphaDotBeta,
}

impl PhaseFunction for Integral {
    fn value(&self, s: &PhaseState) -> f64 {
        match self {
            Integral::H => integral_h(s),
            Integral::K => integral_k(s),
            Integral::G(p) => integral_g(s, p),
            Integral::F(p) => integral_fml(s, p).f,
            Integral::M(p) => integral_fml(s, p).m,
            Integral::L(p) => integral_fml(s, p).l.unwrap_or(f64::NAN),
            Integral::AlphaSq => s.alpha.norm_sq(),
            Integral::BetaSq => s.beta.norm_sq(),
            Integral::AlphaDotBeta => s.alpha.dot(&s.beta),
        }
    }

    fn gradient(&self, s: &PhaseState) -> Option<Gradient> {
        let combine = |p: &BodyParams, kind: u8| -> Gradient {
            let vals = integral_fml(s, p);
            let (gh, gk, gg) = (grad_h(s), grad_k(s), grad_g(s, p));
            let lin = 2.0 * vals.g - p.p2 * vals.h;
            let r4 = p.r4();
            let mut out = [0.0; 9];
            for i in 0..9 {
                let dlin = 2.0 * gg[i] - p.p2 * gh[i];
                out[i] = match kind {
                    0 => 2.0 * lin * dlin - r4 * gk[i],
                    1 => dlin / r4,
                    _ => {
                        let l = vals.l.unwrap_or(f64::NAN);
                        let dm = dlin / r4;
                        (4.0 * p.p2 * vals.m * dm + 2.0 * vals.m * gh[i] + 2.0 * vals.h * dm) / (2.0 * l)
                    }
                };
            }
            out
        };
        let mut g = [0.0; 9];
        match self {
            Integral::H => return Some(grad_h(s)),
            Integral::K => return Some(grad_k(s)),
            Integral::G(p) => return Some(grad_g(s, p)),
            Integral::F(p) => return Some(combine(p, 0)),
            Integral::M(p) => return Some(combine(p, 1)),
            Integral::L(p) => return Some(combine(p, 2)),
            Integral::AlphaSq => g[3..6].copy_from_slice(&(s.alpha * 2.0).0),
            Integral::BetaSq => g[6..9].copy_from_slice(&(s.beta * 2.0).0),
            Integral::AlphaDotBeta => {
                g[3..6].copy_from_slice(&s.beta.0);
                g[6..9].copy_from_slice(&s.alpha.0);
            }
        }
        Some(g)
    }
}

/// Central-difference gradient in momentum coordinates, step
/// `1e-6 * max(1, |u_i|)`.
fn fd_momentum_gradient<F: PhaseFunction + ?Sized>(f: &F, s: &PhaseState) -> [f64; 9] {
    let u = MomentumChart::from(s).to_array();
    let mut g = [0.0; 9];
    for i in 0..9 {
        let h = 1e-6 * u[i].abs().max(1.0);
        let mut up = u;
        let mut dn = u;
        up[i] += h;
        dn[i] -= h;
        let fp = f.value(&PhaseState::from(&MomentumChart::from_array(&up)));
        let fm = f.value(&PhaseState::from(&MomentumChart::from_array(&dn)));
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Gradient of `f` with respect to `(M, α, β)`.
pub fn momentum_gradient<F: PhaseFunction + ?Sized>(f: &F, s: &PhaseState) -> Result<[f64; 9]> {
    let g = match f.gradient(s) {
        Some(mut g) => {
            // ∂/∂M1 = ½ ∂/∂ω1, ∂/∂M2 = ½ ∂/∂ω2, ∂/∂M3 = ∂/∂ω3
            g[0] *= 0.5;
            g[1] *= 0.5;
            g
        }
        None => fd_momentum_gradient(f, s),
    };
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(g)
}

/// `{f, g}` from momentum-coordinate gradients.
pub fn bracket_from_gradients(s: &PhaseState, df: &[f64; 9], dg: &[f64; 9]) -> f64 {
    let m = MomentumChart::from(s).m_vec;
    let v = |d: &[f64; 9], k: usize| Vec3([d[3 * k], d[3 * k + 1], d[3 * k + 2]]);
    let (fm, fa, fb) = (v(df, 0), v(df, 1), v(df, 2));
    let (gm, ga, gb) = (v(dg, 0), v(dg, 1), v(dg, 2));
    -m.dot(&fm.cross(&gm)) - s.alpha.dot(&fm.cross(&ga)) + s.alpha.dot(&gm.cross(&fa))
        - s.beta.dot(&fm.cross(&gb))
        + s.beta.dot(&gm.cross(&fb))
}

pub fn lie_poisson_bracket<F, G>(f: &F, g: &G, s: &PhaseState) -> Result<f64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    let df = momentum_gradient(f, s)?;
    let dg = momentum_gradient(g, s)?;
    Ok(bracket_from_gradients(s, &df, &dg))
}

/// `u̇ = {u, H}` mapped back to `(ω̇, α̇, β̇)`.
pub fn hamiltonian_field(s: &PhaseState) -> PhaseState {
    let mut dh = grad_h(s);
    dh[0] *= 0.5;
    dh[1] *= 0.5;
    let mut du = [0.0; 9];
    for (i, slot) in du.iter_mut().enumerate() {
        let mut e = [0.0; 9];
        e[i] = 1.0;
        *slot = bracket_from_gradients(s, &e, &dh);
    }
    PhaseState::from(&MomentumChart::from_array(&du))
}

/// `H` on a level `{M = m, L = l}` of the invariant set: `(l² − 1 − 2p²m²) / (2m)`.
pub fn energy_on_level(m: f64, l: f64, params: &BodyParams) -> Result<f64> {
    if m == 0.0 {
        return Err(Error::ZeroM);
    }
    Ok((l * l - 1.0 - 2.0 * params.p2 * m * m) / (2.0 * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_admissible_state, seeded_rng as rng};

    fn p21() -> BodyParams {
        BodyParams::new(2.0, 1.0).unwrap()
    }

    fn st(w: [f64; 3], a: [f64; 3], b: [f64; 3]) -> PhaseState {
        PhaseState::new(Vec3(w), Vec3(a), Vec3(b))
    }

    fn running() -> PhaseState {
        st([0.0; 3], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    }

    #[test]
    fn h_examples() {
        assert_eq!(integral_h(&running()), -3.0);
        assert_eq!(integral_h(&st([0.0, 0.0, 2.0], [0.0; 3], [0.0; 3])), 2.0);
        assert_eq!(integral_h(&st([1.0, 1.0, 0.0], [0.0, 2.0, 0.0], [1.0, 0.0, 0.0])), 2.0);
    }

    #[test]
    fn k_examples() {
        assert_eq!(integral_k(&running()), 1.0);
        assert_eq!(integral_k(&st([0.0; 3], [0.0, 0.0, 2.0], [0.0, 0.0, 1.0])), 0.0);
        assert_eq!(integral_k(&st([1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0])), 4.0);
    }

    #[test]
    fn aux_examples() {
        assert_eq!(aux_omegas(&running()), (0.0, 0.0, 0.0));
        assert_eq!(aux_omegas(&st([0.0, 0.0, 1.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0])), (0.0, 0.0, 2.0));
        assert_eq!(aux_omegas(&st([1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0])), (4.0, 0.0, 0.0));
    }

    #[test]
    fn aux_omega_gamma_matches_displayed_minors() {
        let mut r = rng(3);
        for _ in 0..10 {
            let s = random_admissible_state(&mut r, &p21(), 1.5);
            let [w1, w2, w3] = s.omega.0;
            let [a1, a2, a3] = s.alpha.0;
            let [b1, b2, b3] = s.beta.0;
            let wg = 2.0 * w1 * (a2 * b3 - a3 * b2) + 2.0 * w2 * (a3 * b1 - a1 * b3) + w3 * (a1 * b2 - a2 * b1);
            assert!((aux_omegas(&s).2 - wg).abs() < 1e-13);
        }
    }

    #[test]
    fn g_examples() {
        let p = p21();
        assert_eq!(integral_g(&running(), &p), -6.0);
        assert_eq!(integral_g(&st([0.0; 3], [0.0, 2.0, 0.0], [1.0, 0.0, 0.0]), &p), 0.0);
        assert_eq!(integral_g(&st([0.0, 0.0, 1.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]), &p), -5.0);
    }

    #[test]
    fn fml_running_example() {
        let v = integral_fml(&running(), &p21());
        assert_eq!(v.f, 0.0);
        assert!((v.m - 1.0 / 3.0).abs() < 1e-15);
        assert!((v.l.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fml_zero_k_and_balanced_g() {
        // fields along e3: K = 0 and H = G = 0
        let p = p21();
        let s = st([0.0; 3], [0.0, 0.0, 2.0], [0.0, 0.0, 1.0]);
        let v = integral_fml(&s, &p);
        assert_eq!(v.k, 0.0);
        assert_eq!(2.0 * v.g - p.p2 * v.h, 0.0);
        assert_eq!((v.f, v.m), (0.0, 0.0));
    }

    #[test]
    fn undefined_l_is_none_not_nan() {
        let p = p21();
        // radicand 2p²M² + 2HM + 1 < 0 needs H·M sufficiently negative
        let mut r = rng(11);
        let mut seen = false;
        for _ in 0..200 {
            let s = random_admissible_state(&mut r, &p, 2.0);
            let v = integral_fml(&s, &p);
            let rad = l_radicand(v.h, v.m, &p);
            match v.l {
                None => {
                    assert!(rad < 0.0);
                    seen = true;
                }
                Some(l) => assert!(l >= 0.0 && (l * l - rad).abs() < 1e-9 * (1.0 + rad)),
            }
        }
        assert!(seen, "expected at least one state with undefined L");
    }

    #[test]
    fn consistency_from_independent_paths() {
        let p = p21();
        let mut r = rng(5);
        for _ in 0..20 {
            let s = random_admissible_state(&mut r, &p, 1.5);
            let v = integral_fml(&s, &p);
            assert!(v.k >= 0.0);
            let lin = 2.0 * v.g - p.p2 * v.h;
            assert!((v.m * p.r4() - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
            assert!((v.f - (lin * lin - p.r4() * v.k)).abs() <= 1e-12 * (1.0 + v.f.abs()));
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let p = p21();
        let mut r = rng(9);
        let fields = [Integral::H, Integral::K, Integral::G(p), Integral::F(p), Integral::M(p), Integral::AlphaSq, Integral::BetaSq, Integral::AlphaDotBeta];
        for _ in 0..10 {
            let s = random_admissible_state(&mut r, &p, 1.0);
            for f in fields.iter() {
                let an = momentum_gradient(f, &s).unwrap();
                let fd = fd_momentum_gradient(f, &s);
                for i in 0..9 {
                    assert!((an[i] - fd[i]).abs() < 1e-6 * (1.0 + an[i].abs()), "{f:?} component {i}: {} vs {}", an[i], fd[i]);
                }
            }
            if integral_fml(&s, &p).l.is_some_and(|l| l > 0.1) {
                let f = Integral::L(p);
                let an = momentum_gradient(&f, &s).unwrap();
                let fd = fd_momentum_gradient(&f, &s);
                for i in 0..9 {
                    assert!((an[i] - fd[i]).abs() < 1e-6 * (1.0 + an[i].abs()));
                }
            }
        }
    }

    #[test]
    fn bracket_basic_entries() {
        let s = st([0.0, 0.0, 1.0], [0.0; 3], [0.0; 3]);
        // M = (0, 0, 1)
        let m1 = FnField(|s: &PhaseState| 2.0 * s.omega.x());
        let m2 = FnField(|s: &PhaseState| 2.0 * s.omega.y());
        let v = lie_poisson_bracket(&m1, &m2, &s).unwrap();
        assert!((v + 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn casimirs_commute_with_everything() {
        let p = p21();
        let mut r = rng(21);
        for _ in 0..20 {
            let s = random_admissible_state(&mut r, &p, 1.5);
            for c in [Integral::AlphaSq, Integral::BetaSq, Integral::AlphaDotBeta] {
                for f in [Integral::H, Integral::K, Integral::G(p)] {
                    assert!(lie_poisson_bracket(&f, &c, &s).unwrap().abs() < 1e-12);
                }
                let quad = FnField(|s: &PhaseState| s.omega.x() * s.alpha.z() + s.beta.y().powi(2));
                assert!(lie_poisson_bracket(&c, &quad, &s).unwrap().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn involutivity_and_conservation_at_random_states() {
        let p = p21();
        let mut r = rng(33);
        for _ in 0..20 {
            let s = random_admissible_state(&mut r, &p, 1.5);
            let scale = 1.0 + integral_k(&s) + integral_g(&s, &p).abs();
            for (f, g) in [(Integral::H, Integral::K), (Integral::H, Integral::G(p)), (Integral::K, Integral::G(p))] {
                let v = lie_poisson_bracket(&f, &g, &s).unwrap();
                assert!(v.abs() <= 1e-8 * scale * scale, "{f:?},{g:?}: {v}");
            }
            let fv = integral_fml(&s, &p).f.abs();
            assert!(lie_poisson_bracket(&Integral::F(p), &Integral::H, &s).unwrap().abs() <= 1e-8 * (1.0 + fv) * scale);
            assert!(lie_poisson_bracket(&Integral::M(p), &Integral::H, &s).unwrap().abs() <= 1e-10 * scale);
            if integral_fml(&s, &p).l.is_some_and(|l| l > 1e-3) {
                assert!(lie_poisson_bracket(&Integral::L(p), &Integral::H, &s).unwrap().abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn antisymmetry() {
        let p = p21();
        let mut r = rng(44);
        let f = FnField(|s: &PhaseState| s.omega.x() * s.omega.z() + 0.3 * s.alpha.y() * s.beta.z() - s.omega.y());
        let g = FnField(|s: &PhaseState| s.alpha.x().powi(2) - 2.0 * s.omega.z() * s.beta.x());
        for _ in 0..20 {
            let s = random_admissible_state(&mut r, &p, 1.5);
            let a = lie_poisson_bracket(&f, &g, &s).unwrap();
            let b = lie_poisson_bracket(&g, &f, &s).unwrap();
            assert!((a + b).abs() < 1e-12 * (1.0 + a.abs()));
            let hk = lie_poisson_bracket(&Integral::H, &Integral::K, &s).unwrap();
            let kh = lie_poisson_bracket(&Integral::K, &Integral::H, &s).unwrap();
            assert!((hk + kh).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_field_examples() {
        let z = hamiltonian_field(&running());
        assert_eq!(z.to_array(), [0.0; 9]);
        let s = st([0.0; 3], [0.0, 0.0, 2.0], [0.0; 3]);
        let d = hamiltonian_field(&s);
        // 2 ω̇2 = -α3
        assert!((2.0 * d.omega.y() + 2.0).abs() < 1e-15);
        let mut rest = d.to_array();
        rest[1] = 0.0;
        assert!(rest.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn energy_on_level_running_example() {
        let h = energy_on_level(1.0 / 3.0, 1.0 / 3.0, &p21()).unwrap();
        assert!((h + 3.0).abs() < 1e-14);
        assert_eq!(energy_on_level(0.0, 1.0, &p21()), Err(Error::ZeroM));
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let f = FnField(|_: &PhaseState| f64::NAN);
        assert!(lie_poisson_bracket(&f, &Integral::H, &running()).is_err());
    }
}
