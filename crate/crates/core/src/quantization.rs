//! Finite-level uniform quantizer and the zoom-in-and-hold scaling state.

use crate::error::{Error, Result};

/// Mid-tread uniform quantizer with `2R + 1` integer symbols in `[-R, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformQuantizer {
    levels_r: u64,
}

impl UniformQuantizer {
    pub fn new(levels_r: u64) -> Result<Self> {
        if levels_r == 0 {
            return Err(Error::InvalidParameter { name: "R", reason: "need at least one level".into() });
        }
        Ok(Self { levels_r })
    }

    pub fn levels(&self) -> u64 {
        self.levels_r
    }

    /// `(2R + 1) / 2`, the smallest magnitude that saturates.
    pub fn saturation_threshold(&self) -> f64 {
        self.levels_r as f64 + 0.5
    }

    /// Quantizes `b`, returning the symbol and whether `|b|` reached the
    /// saturation threshold.
    ///
    /// Positive cell boundaries round up; negative inputs are handled by
    /// odd symmetry, so `q(-0.5) = -1`.
    pub fn quantize(&self, b: f64) -> Result<(i64, bool)> {
        if !b.is_finite() {
            return Err(Error::NonFinite("quantizer input"));
        }
        Ok(self.quantize_finite(b))
    }

    #[inline]
    pub(crate) fn quantize_finite(&self, b: f64) -> (i64, bool) {
        if b < 0.0 {
            let (z, sat) = self.quantize_nonneg(-b);
            (-z, sat)
        } else {
            self.quantize_nonneg(b)
        }
    }

    #[inline]
    fn quantize_nonneg(&self, b: f64) -> (i64, bool) {
        if b < 0.5 {
            return (0, false);
        }
        if b >= self.saturation_threshold() {
            return (self.levels_r as i64, true);
        }
        // floor(b + 0.5) can be off by one when the addition rounds; pin the
        // cell so that z - 1/2 <= b < z + 1/2 holds exactly.
        let mut z = (b + 0.5).floor();
        if z - 0.5 > b {
            z -= 1.0;
        } else if b >= z + 0.5 {
            z += 1.0;
        }
        (z as i64, false)
    }

    /// Componentwise quantization; the flag is the OR of per-entry flags.
    pub fn quantize_vec(&self, y: &[f64]) -> Result<(Vec<i64>, bool)> {
        let mut any = false;
        let mut out = Vec::with_capacity(y.len());
        for &b in y {
            let (z, sat) = self.quantize(b)?;
            any |= sat;
            out.push(z);
        }
        Ok((out, any))
    }
}

/// Smallest `theta` considered numerically alive.
pub const THETA_FLOOR: f64 = 1e-300;

/// Shared scaling parameter `theta`: multiplied by `gamma_in` after a
/// successful transmission and held during DoS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingState {
    pub theta: f64,
    pub gamma_in: f64,
    pub gamma_hold: f64,
}

impl ScalingState {
    pub fn new(theta0: f64, gamma_in: f64) -> Result<Self> {
        if !(theta0 > 0.0) || !theta0.is_finite() {
            return Err(Error::InvalidParameter { name: "theta0", reason: format!("must be positive, got {theta0}") });
        }
        if !(gamma_in > 0.0 && gamma_in < 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma1",
                reason: format!("must lie in (0, 1), got {gamma_in}"),
            });
        }
        Ok(Self { theta: theta0, gamma_in, gamma_hold: 1.0 })
    }

    /// One zoom step: in on a DoS-free step, hold on a DoS step.
    #[must_use]
    pub fn scale_step(self, dos_active: bool) -> Self {
        let factor = if dos_active { self.gamma_hold } else { self.gamma_in };
        Self { theta: self.theta * factor, ..self }
    }

    /// [`scale_step`](Self::scale_step) with underflow detection.
    pub fn advance(self, dos_active: bool, step: u64) -> Result<Self> {
        let next = self.scale_step(dos_active);
        if next.theta < THETA_FLOOR {
            return Err(Error::ThetaUnderflow { step, theta: next.theta });
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(r: u64) -> UniformQuantizer {
        UniformQuantizer::new(r).unwrap()
    }

    #[test]
    fn scalar_branches() {
        assert_eq!(q(5).quantize(0.49).unwrap(), (0, false));
        assert_eq!(q(5).quantize(1.0).unwrap(), (1, false));
        assert_eq!(q(3).quantize(100.0).unwrap(), (3, true));
        assert_eq!(q(3).quantize(-1.0).unwrap(), (-1, false));
    }

    #[test]
    fn boundaries() {
        let q5 = q(5);
        assert_eq!(q5.quantize(0.5).unwrap(), (1, false));
        assert_eq!(q5.quantize(-0.5).unwrap(), (-1, false));
        assert_eq!(q5.quantize(1.5).unwrap(), (2, false));
        assert_eq!(q5.quantize(0.499_999_999_999_999_94).unwrap(), (0, false));
        assert_eq!(q5.quantize(1.499_999_999_999_999_8).unwrap(), (1, false));
        assert_eq!(q5.quantize(5.499_999_999_999_999).unwrap(), (5, false));
        assert_eq!(q5.quantize(5.5).unwrap(), (5, true));
        assert_eq!(q5.quantize(-5.5).unwrap(), (-5, true));
        assert_eq!(q5.quantize(-0.0).unwrap(), (0, false));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(UniformQuantizer::new(0).is_err());
        assert!(q(1).quantize(f64::NAN).is_err());
        assert!(q(1).quantize(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn vector_version() {
        assert_eq!(q(4).quantize_vec(&[0.0, 0.0, 0.0]).unwrap(), (vec![0, 0, 0], false));
        assert_eq!(q(2).quantize_vec(&[1.0, -2.4]).unwrap(), (vec![1, -2], false));
        // |-2.6| >= 5/2: clipped to -R and flagged
        assert_eq!(q(2).quantize_vec(&[1.0, -2.6]).unwrap(), (vec![1, -2], true));
        assert_eq!(q(2).quantize_vec(&[3.0, 0.0]).unwrap(), (vec![2, 0], true));
    }

    #[test]
    fn scaling_examples() {
        let s = ScalingState::new(1.0, 0.5).unwrap();
        assert_eq!(s.scale_step(false).theta, 0.5);
        assert_eq!(s.scale_step(true).theta, 1.0);
        let end = [false, true, false].iter().fold(s, |s, &d| s.scale_step(d));
        assert_eq!(end.theta, 0.25);
    }

    #[test]
    fn underflow_is_reported() {
        let s = ScalingState::new(1e-299, 0.01).unwrap();
        assert!(matches!(s.advance(false, 7), Err(Error::ThetaUnderflow { step: 7, .. })));
        assert!(s.advance(true, 7).is_ok());
    }

    #[test]
    fn scaling_rejects_bad_params() {
        assert!(ScalingState::new(0.0, 0.5).is_err());
        assert!(ScalingState::new(1.0, 1.0).is_err());
        assert!(ScalingState::new(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn error_bound_inside_range(r in 1u64..2000, frac in -1.0f64..1.0) {
            let quant = q(r);
            let b = frac * (quant.saturation_threshold() - 1e-9);
            let (z, sat) = quant.quantize(b).unwrap();
            prop_assert!(!sat);
            prop_assert!((b - z as f64).abs() <= 0.5);
        }

        #[test]
        fn monotone(r in 1u64..50, a in -60.0f64..60.0, b in -60.0f64..60.0) {
            let quant = q(r);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quant.quantize(lo).unwrap().0 <= quant.quantize(hi).unwrap().0);
        }

        #[test]
        fn odd_symmetry(r in 1u64..50, b in -60.0f64..60.0) {
            let quant = q(r);
            prop_assert_eq!(quant.quantize(-b).unwrap().0, -quant.quantize(b).unwrap().0);
        }

        #[test]
        fn saturation_flag_exact(r in 1u64..50, b in -60.0f64..60.0) {
            let quant = q(r);
            let (_, sat) = quant.quantize(b).unwrap();
            prop_assert_eq!(sat, b.abs() >= quant.saturation_threshold());
        }

        #[test]
        fn theta_identity(theta0 in 1e-3f64..1e3, g in 0.01f64..0.999, pattern in proptest::collection::vec(any::<bool>(), 0..300)) {
            let mut s = ScalingState::new(theta0, g).unwrap();
            let mut expect = theta0;
            for &d in &pattern {
                s = s.scale_step(d);
                if !d { expect *= g; }
            }
            prop_assert_eq!(s.theta, expect);
        }
    }
}
