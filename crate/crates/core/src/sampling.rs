//! Seeded random sampling. All randomness goes through [`seeded_rng`], a
//! ChaCha8 stream generator seeded from a `u64`, so runs reproduce across
//! platforms.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::separation::{admissible_intervals, reconstruct, SeparatedPoint, SeparationConstants, Sign};
use crate::statespace::{BodyParams, PhaseState, Vec3};

pub type SampleRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_vector(rng: &mut SampleRng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let rho = (1.0 - z * z).max(0.0).sqrt();
    Vec3([rho * phi.cos(), rho * phi.sin(), z])
}

/// `ω` uniform in `[−omega_scale, omega_scale]³`; `(α/a, β/b)` a uniformly
/// random orthonormal pair.
pub fn random_admissible_state(rng: &mut SampleRng, params: &BodyParams, omega_scale: f64) -> PhaseState {
    let omega = Vec3(std::array::from_fn(|_| rng.random_range(-omega_scale..=omega_scale)));
    let e1 = unit_vector(rng);
    let e2 = loop {
        let v = unit_vector(rng);
        let w = v - e1 * v.dot(&e1);
        if w.norm() > 0.1 {
            break w * (1.0 / w.norm());
        }
    };
    PhaseState { omega, alpha: e1 * params.a, beta: e2 * params.b }
}

fn random_sign(rng: &mut SampleRng) -> Sign {
    if rng.random_bool(0.5) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Bounds for [`random_level_sample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSampling {
    pub m: (f64, f64),
    pub l: (f64, f64),
    /// Intervals narrower than this are skipped.
    pub min_width: f64,
}

impl Default for LevelSampling {
    fn default() -> Self {
        LevelSampling { m: (0.1, 2.5), l: (0.0, 8.0), min_width: 1e-3 }
    }
}

/// A random level `(m, l)` whose `s1` and `s2` sets both contain a bounded
/// non-degenerate interval, a point strictly inside one of each, and random
/// flags.
pub fn random_level_sample(rng: &mut SampleRng, params: &BodyParams, cfg: &LevelSampling) -> (SeparationConstants, SeparatedPoint) {
    loop {
        // m < 0 never gives a bounded s1 interval, so only m > 0 is drawn
        let m = rng.random_range(cfg.m.0..=cfg.m.1);
        let l = rng.random_range(cfg.l.0..=cfg.l.1);
        let Ok(c) = SeparationConstants::new(m, l) else { continue };
        let (s1s, s2s) = admissible_intervals(&c, params);
        let usable = |v: &Vec<crate::separation::Interval>| {
            v.iter().filter(|i| i.is_bounded() && i.width() >= cfg.min_width).copied().collect::<Vec<_>>()
        };
        let (u1, u2) = (usable(&s1s), usable(&s2s));
        if u1.is_empty() || u2.is_empty() {
            continue;
        }
        let i1 = u1[rng.random_range(0..u1.len())];
        let i2 = u2[rng.random_range(0..u2.len())];
        let s1 = i1.lo + rng.random_range(0.02..0.98) * i1.width();
        let s2 = i2.lo + rng.random_range(0.02..0.98) * i2.width();
        let signs = std::array::from_fn(|_| random_sign(rng));
        return (c, SeparatedPoint::with_signs(s1, s2, signs));
    }
}

/// A random state on `N` (a reconstructed level sample).
pub fn random_member_state(rng: &mut SampleRng, params: &BodyParams) -> Result<(SeparationConstants, SeparatedPoint, PhaseState)> {
    let (c, p) = random_level_sample(rng, params, &LevelSampling::default());
    let s = reconstruct(&p, &c, params)?;
    Ok((c, p, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn states_are_admissible_and_reproducible() {
        let p = BodyParams::new(2.0, 1.0).unwrap();
        let mut r1 = seeded_rng(5);
        let mut r2 = seeded_rng(5);
        for _ in 0..50 {
            let s = random_admissible_state(&mut r1, &p, 1.0);
            s.check_admissible(&p).unwrap();
            assert_eq!(s, random_admissible_state(&mut r2, &p, 1.0));
        }
    }

    #[test]
    fn level_samples_lie_inside_intervals() {
        let p = BodyParams::new(2.0, 1.0).unwrap();
        let mut r = seeded_rng(9);
        for _ in 0..200 {
            let (c, pt) = random_level_sample(&mut r, &p, &LevelSampling::default());
            let (s1s, s2s) = admissible_intervals(&c, &p);
            assert!(s1s.iter().any(|i| i.is_bounded() && i.lo < pt.s1 && pt.s1 < i.hi));
            assert!(s2s.iter().any(|i| i.is_bounded() && i.lo < pt.s2 && pt.s2 < i.hi));
        }
    }
}
