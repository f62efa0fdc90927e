//! Value types for the phase space of the top, field parameters and the
//! orthogonalizing rotation of the two field vectors.

use std::f64::consts::FRAC_PI_4;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the Casimir residuals for a state to count as admissible.
pub const ADMISSIBLE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = other.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Components in the body frame turned by `theta` about the third axis.
    pub fn rotated_about_e3(&self, theta: f64) -> Vec3 {
        let (s, c) = theta.sin_cos();
        Vec3([c * self.0[0] + s * self.0[1], -s * self.0[0] + c * self.0[1], self.0[2]])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Field magnitudes `a = |alpha|`, `b = |beta|` with `a > b > 0`, and the
/// derived constants `p2 = a^2 + b^2`, `r2 = a^2 - b^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub a: f64,
    pub b: f64,
    pub p2: f64,
    pub r2: f64,
}

impl BodyParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParams(format!("non-finite magnitudes a={a}, b={b}")));
        }
        if b <= 0.0 {
            return Err(Error::InvalidParams(format!("b must be positive, got {b}")));
        }
        if a <= b {
            return Err(Error::InvalidParams(format!("need a > b, got a={a}, b={b}")));
        }
        Ok(BodyParams { a, b, p2: a * a + b * b, r2: a * a - b * b })
    }

    pub fn r(&self) -> f64 {
        self.r2.sqrt()
    }

    /// `r^4`, the scale that appears in `F` and `M`.
    pub fn r4(&self) -> f64 {
        self.r2 * self.r2
    }
}

/// Angular velocity and the two field vectors, all in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub omega: Vec3,
    pub alpha: Vec3,
    pub beta: Vec3,
}

impl PhaseState {
    pub const fn new(omega: Vec3, alpha: Vec3, beta: Vec3) -> Self {
        PhaseState { omega, alpha, beta }
    }

    /// Packs as `[omega1..3, alpha1..3, beta1..3]`.
    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(&self.omega.0);
        out[3..6].copy_from_slice(&self.alpha.0);
        out[6..].copy_from_slice(&self.beta.0);
        out
    }

    pub fn from_array(u: &[f64; 9]) -> Self {
        PhaseState {
            omega: Vec3([u[0], u[1], u[2]]),
            alpha: Vec3([u[3], u[4], u[5]]),
            beta: Vec3([u[6], u[7], u[8]]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.omega.is_finite() && self.alpha.is_finite() && self.beta.is_finite()
    }

    /// Checks the Casimir constraints against `params` at relative tolerance
    /// [`ADMISSIBLE_REL_TOL`].
    pub fn check_admissible(&self, params: &BodyParams) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite("phase state".into()));
        }
        let (da, db, ab) = casimir_residuals(self, params);
        let tol = ADMISSIBLE_REL_TOL;
        if da.abs() > tol * params.a * params.a
            || db.abs() > tol * params.b * params.b
            || ab.abs() > tol * params.a * params.b
        {
            return Err(Error::Inadmissible(format!(
                "Casimir residuals ({da:e}, {db:e}, {ab:e}) exceed relative tolerance {tol:e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub theta: f64,
    pub state: PhaseState,
    pub a: f64,
    pub b: f64,
}

impl NormalizationReport {
    pub fn params(&self) -> Result<BodyParams> {
        BodyParams::new(self.a, self.b)
    }
}

/// Rotates the pair of field vectors and the equatorial body axes by a common
/// angle so that the fields become orthogonal while the potential
/// `-alpha1 - beta2` is unchanged.
///
/// `theta` solves `tan 2θ = 2 α·β / (α² − β²)` on the branch `(−π/4, π/4]`,
/// with `θ = π/4` when the norms are equal. The magnitudes are never swapped:
/// a rotated pair with `|α| <= |β|` or `|β| = 0` is rejected.
pub fn normalize_fields(omega: Vec3, alpha_raw: Vec3, beta_raw: Vec3) -> Result<NormalizationReport> {
    if !omega.is_finite() || !alpha_raw.is_finite() || !beta_raw.is_finite() {
        return Err(Error::NonFinite("raw field vectors".into()));
    }
    let aa = alpha_raw.norm_sq();
    let bb = beta_raw.norm_sq();
    if aa == 0.0 && bb == 0.0 {
        return Err(Error::DegenerateFields("both field vectors vanish".into()));
    }
    let ab = alpha_raw.dot(&beta_raw);
    let diff = aa - bb;
    let theta = if diff == 0.0 { FRAC_PI_4 } else { 0.5 * (2.0 * ab / diff).atan() };
    let (s, c) = theta.sin_cos();

    let alpha_mix = alpha_raw * c + beta_raw * s;
    let beta_mix = beta_raw * c - alpha_raw * s;
    let state = PhaseState {
        omega: omega.rotated_about_e3(theta),
        alpha: alpha_mix.rotated_about_e3(theta),
        beta: beta_mix.rotated_about_e3(theta),
    };
    let a = state.alpha.norm();
    let b = state.beta.norm();

    let scale = aa + bb;
    if b <= 1e-12 * scale.sqrt() {
        return Err(Error::DegenerateFields(format!(
            "rotated beta vanishes (|beta| = {b:e}): parallel fields of equal norm reduce to the classical Kovalevskaya top"
        )));
    }
    if a <= b {
        return Err(Error::DegenerateFields(format!(
            "rotated magnitudes a={a}, b={b} violate a > b; relabel the fields so that |alpha| > |beta|"
        )));
    }
    Ok(NormalizationReport { theta, state, a, b })
}

/// `(|α|² − a², |β|² − b², α·β)`.
pub fn casimir_residuals(state: &PhaseState, params: &BodyParams) -> (f64, f64, f64) {
    (
        state.alpha.norm_sq() - params.a * params.a,
        state.beta.norm_sq() - params.b * params.b,
        state.alpha.dot(&state.beta),
    )
}

/// Body-frame form of the potential `-(e1, α) - (e2, β)`.
pub fn potential(state: &PhaseState) -> f64 {
    -state.alpha.x() - state.beta.y()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn running() -> PhaseState {
        PhaseState::new(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0))
    }

    #[test]
    fn params_arithmetic() {
        let p = BodyParams::new(2.0, 1.0).unwrap();
        assert_eq!((p.a, p.b, p.p2, p.r2), (2.0, 1.0, 5.0, 3.0));
        let q = BodyParams::new(SQRT_2, 1.0).unwrap();
        assert!((q.p2 - 3.0).abs() < 1e-15 && (q.r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn params_rejections() {
        assert!(BodyParams::new(1.0, 1.0).is_err());
        assert!(BodyParams::new(1.0, 2.0).is_err());
        assert!(BodyParams::new(2.0, 0.0).is_err());
        assert!(BodyParams::new(2.0, -1.0).is_err());
        assert!(BodyParams::new(f64::NAN, 1.0).is_err());
        assert!(BodyParams::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn normalize_orthogonal_pair_is_identity() {
        let s = running();
        let rep = normalize_fields(s.omega, s.alpha, s.beta).unwrap();
        assert_eq!(rep.theta, 0.0);
        assert_eq!(rep.state, s);
        assert_eq!((rep.a, rep.b), (2.0, 1.0));
    }

    #[test]
    fn normalize_parallel_equal_fields_is_classical_degeneration() {
        let e1 = Vec3::new(1.0, 0.0, 0.0);
        let err = normalize_fields(Vec3::ZERO, e1, e1).unwrap_err();
        assert!(matches!(err, Error::DegenerateFields(ref msg) if msg.contains("classical")));
        // the rotated alpha before the error is sqrt(2) e1 (rotated about e3 by pi/4)
        let (s, c) = FRAC_PI_4.sin_cos();
        let mix = e1 * c + e1 * s;
        assert!((mix.norm() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn potential_unchanged_by_combined_transform() {
        let alpha = Vec3::new(1.0, 0.0, 0.0);
        let beta = Vec3::new(0.0, -1.0, 0.0);
        let before = potential(&PhaseState::new(Vec3::ZERO, alpha, beta));
        assert_eq!(before, 0.0);
        for k in -7..=7 {
            let theta = 0.1 * k as f64;
            let (s, c) = theta.sin_cos();
            let a2 = (alpha * c + beta * s).rotated_about_e3(theta);
            let b2 = (beta * c - alpha * s).rotated_about_e3(theta);
            let after = potential(&PhaseState::new(Vec3::ZERO, a2, b2));
            assert!((after - before).abs() < 1e-15, "theta={theta}: {after}");
        }
    }

    #[test]
    fn casimir_examples() {
        let p = BodyParams::new(2.0, 1.0).unwrap();
        assert_eq!(casimir_residuals(&running(), &p), (0.0, 0.0, 0.0));
        let s = PhaseState::new(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.1));
        let (x, y, z) = casimir_residuals(&s, &p);
        assert_eq!(x, 0.0);
        assert!((y - 0.01).abs() < 1e-15);
        assert!((z - 0.0).abs() < 1e-15);
        let s = PhaseState::new(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.1), Vec3::new(0.0, 1.0, 1.0));
        assert!((casimir_residuals(&s, &p).2 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential(&running()), -3.0);
        assert_eq!(potential(&PhaseState::default()), 0.0);
        let s = PhaseState::new(Vec3::ZERO, Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(potential(&s), 0.0);
    }

    #[test]
    fn admissibility_check() {
        let p = BodyParams::new(2.0, 1.0).unwrap();
        assert!(running().check_admissible(&p).is_ok());
        let bad = PhaseState::new(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.1));
        assert!(bad.check_admissible(&p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = Vec3> {
            prop::array::uniform3(-3.0f64..3.0).prop_map(Vec3)
        }

        proptest! {
            #[test]
            fn normalization_orthogonalizes_and_is_idempotent(w in vec3(), al in vec3(), be in vec3()) {
                prop_assume!(al.norm() > 0.1 && be.norm() > 0.1);
                if let Ok(rep) = normalize_fields(w, al, be) {
                    let s = rep.state;
                    let scale = al.norm_sq() + be.norm_sq();
                    prop_assert!(s.alpha.dot(&s.beta).abs() <= 1e-12 * scale);
                    let sum = s.alpha.norm_sq() + s.beta.norm_sq();
                    prop_assert!((sum - scale).abs() <= 1e-12 * scale);
                    let before = potential(&PhaseState::new(w, al, be));
                    prop_assert!((potential(&s) - before).abs() <= 1e-12 * (1.0 + scale));
                    prop_assert!((s.omega.norm() - w.norm()).abs() <= 1e-12 * (1.0 + w.norm()));
                    let again = normalize_fields(s.omega, s.alpha, s.beta).unwrap();
                    prop_assert!(again.theta.abs() <= 1e-12);
                    prop_assert!(rep.theta > -FRAC_PI_4 && rep.theta <= FRAC_PI_4);
                }
            }
        }
    }
}
