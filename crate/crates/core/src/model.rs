//! Model parameters and the nonlinear potential `W(s) = s²/2 - R(s)` with
//! the monomial choice `R(s) = λ s^p / p` (and `R ≡ 0` for `s ≤ 0`).

use crate::error::{Result, VortexError};
use serde::{Deserialize, Serialize};

/// Physical and penalty parameters of one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Vorticity (winding number of the matter phase).
    pub k: i32,
    /// Growth exponent of `R`, strictly above 2.
    pub p: f64,
    /// Coupling in front of `s^p / p`.
    pub lambda: f64,
    /// Penalty on `∫|A|²`, in `[0, 1)`.
    pub eps: f64,
}

impl ModelParams {
    /// Parameters for the vortex problem proper; `k = 0` is rejected.
    pub fn new(k: i32, p: f64, lambda: f64, eps: f64) -> Result<Self> {
        if k == 0 {
            return Err(VortexError::Config(
                "vorticity k must be non-zero (k = 0 is reserved for oracle tests)".into(),
            ));
        }
        Self::new_unchecked_k(k, p, lambda, eps)
    }

    /// Same validation as [`ModelParams::new`] but allows `k = 0`, used by
    /// the shooting oracle and by tests of the scalar reduction.
    pub fn oracle_mode(k: i32, p: f64, lambda: f64, eps: f64) -> Result<Self> {
        Self::new_unchecked_k(k, p, lambda, eps)
    }

    fn new_unchecked_k(k: i32, p: f64, lambda: f64, eps: f64) -> Result<Self> {
        if !(p.is_finite() && p > 2.0) {
            return Err(VortexError::Config(format!("p must exceed 2, got {p}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(VortexError::Config(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
            return Err(VortexError::Config(format!(
                "eps must lie in [0, 1), got {eps}"
            )));
        }
        Ok(Self { k, p, lambda, eps })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new_unchecked_k(self.k, self.p, self.lambda, eps)
    }

    pub fn with_k(&self, k: i32) -> Result<Self> {
        Self::new_unchecked_k(k, self.p, self.lambda, self.eps)
    }

    #[inline]
    pub fn kf(&self) -> f64 {
        f64::from(self.k)
    }

    /// `R(s)`, zero for `s ≤ 0`.
    #[inline]
    pub fn r_of(&self, s: f64) -> f64 {
        if s > 0.0 {
            self.lambda * s.powf(self.p) / self.p
        } else {
            0.0
        }
    }

    /// `R'(s)`, zero for `s ≤ 0`.
    #[inline]
    pub fn r_prime(&self, s: f64) -> f64 {
        if s > 0.0 {
            self.lambda * s.powf(self.p - 1.0)
        } else {
            0.0
        }
    }

    // Unchecked kernels used inside the energy loops.
    #[inline]
    pub(crate) fn w(&self, s: f64) -> f64 {
        0.5 * s * s - self.r_of(s)
    }

    #[inline]
    pub(crate) fn w_prime(&self, s: f64) -> f64 {
        s - self.r_prime(s)
    }

    #[inline]
    pub(crate) fn w_second(&self, s: f64) -> f64 {
        if s > 0.0 {
            1.0 - self.lambda * (self.p - 1.0) * s.powf(self.p - 2.0)
        } else {
            1.0
        }
    }
}

/// `W(s) = s²/2 - λ s^p / p` for `s ≥ 0`, `s²/2` for `s < 0`.
pub fn potential_w(s: f64, params: &ModelParams) -> Result<f64> {
    if !s.is_finite() {
        return Err(VortexError::Domain(format!("W evaluated at {s}")));
    }
    Ok(params.w(s))
}

/// `W'(s) = s - λ s^{p-1}` for `s ≥ 0`, `s` for `s < 0`.
pub fn potential_w_prime(s: f64, params: &ModelParams) -> Result<f64> {
    if !s.is_finite() {
        return Err(VortexError::Domain(format!("W' evaluated at {s}")));
    }
    Ok(params.w_prime(s))
}

/// Outcome of [`check_assumptions`]: one flag per structural condition on `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `R(0) = R'(0) = 0`.
    pub vanishes_at_zero: bool,
    /// `|R(s)| ≤ c s^p` with `c = λ/p`.
    pub power_growth: bool,
    /// `s R'(s) ≥ p R(s) > 0` for `s > 0`.
    pub superquadratic: bool,
    /// Smallest observed `s R'(s) - p R(s)`, scaled by `max(1, s^p)`.
    pub min_ar_margin: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.vanishes_at_zero && self.power_growth && self.superquadratic
    }
}

/// Samples `s ∈ (0, 10]` uniformly (`sample_count` points) and checks the
/// three structural conditions on `R`.
pub fn check_assumptions(params: &ModelParams, sample_count: usize) -> AssumptionReport {
    let count = sample_count.max(1);
    let c = params.lambda / params.p;
    let vanishes_at_zero = params.r_of(0.0) == 0.0 && params.r_prime(0.0) == 0.0;

    let mut power_growth = true;
    let mut superquadratic = true;
    let mut min_margin = f64::INFINITY;
    for i in 1..=count {
        let s = 10.0 * i as f64 / count as f64;
        let sp = s.powf(params.p);
        let r = params.r_of(s);
        if r.abs() > c * sp * (1.0 + 1e-14) {
            power_growth = false;
        }
        let scale = sp.max(1.0);
        let margin = (s * params.r_prime(s) - params.p * r) / scale;
        min_margin = min_margin.min(margin);
        if margin < -1e-12 || r <= 0.0 {
            superquadratic = false;
        }
    }
    AssumptionReport {
        vanishes_at_zero,
        power_growth,
        superquadratic,
        min_ar_margin: min_margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p4() -> ModelParams {
        ModelParams::new(1, 4.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn potential_values() {
        let m = p4();
        assert_eq!(potential_w(0.0, &m).unwrap(), 0.0);
        assert!((potential_w(1.0, &m).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(potential_w(-2.0, &m).unwrap(), 2.0);
        assert_eq!(potential_w_prime(0.0, &m).unwrap(), 0.0);
        assert!(potential_w_prime(1.0, &m).unwrap().abs() < 1e-15);
        assert_eq!(potential_w_prime(-0.5, &m).unwrap(), -0.5);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let m = p4();
        assert!(matches!(
            potential_w(f64::NAN, &m),
            Err(VortexError::Domain(_))
        ));
        assert!(matches!(
            potential_w_prime(f64::INFINITY, &m),
            Err(VortexError::Domain(_))
        ));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let m = p4();
        let h = 1e-6;
        let s = 0.7;
        let fd = (m.w(s + h) - m.w(s - h)) / (2.0 * h);
        assert!((fd - m.w_prime(s)).abs() < 1e-9);
        let fd2 = (m.w_prime(s + h) - m.w_prime(s - h)) / (2.0 * h);
        assert!((fd2 - m.w_second(s)).abs() < 1e-8);
    }

    #[test]
    fn w_prime_continuous_at_zero() {
        let m = ModelParams::new(1, 2.5, 3.0, 0.0).unwrap();
        for h in [1e-4, 1e-6] {
            let jump = (m.w_prime(h) - m.w_prime(-h)).abs();
            assert!(jump < 3.0 * h, "jump {jump} at h {h}");
        }
    }

    #[test]
    fn assumptions_hold_for_monomials() {
        let r = check_assumptions(&p4(), 1000);
        assert!(r.all_pass());
        assert!(r.min_ar_margin.abs() < 1e-12);
        let r = check_assumptions(&ModelParams::new(2, 3.0, 2.0, 0.1).unwrap(), 500);
        assert!(r.all_pass());
    }

    #[test]
    fn constructor_rules() {
        assert!(ModelParams::new(1, 1.5, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1, 2.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1, 4.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1, 4.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1, 4.0, 1.0, -0.1).is_err());
        assert!(ModelParams::new(0, 4.0, 1.0, 0.0).is_err());
        assert!(ModelParams::oracle_mode(0, 4.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn potential_pairing_lower_bound() {
        // W(s) - W'(s) s / p >= (p-2)/(2p) s²
        for &(p, lambda) in &[(4.0, 1.0), (3.0, 2.0), (2.2, 0.5), (6.0, 3.0)] {
            let m = ModelParams::new(1, p, lambda, 0.0).unwrap();
            for i in 0..=400 {
                let s = i as f64 * 0.025;
                let lhs = m.w(s) - m.w_prime(s) * s / p;
                let rhs = (p - 2.0) / (2.0 * p) * s * s;
                assert!(lhs >= rhs - 1e-12 * s.powf(p).max(1.0), "p={p} s={s}");
            }
        }
    }
}
