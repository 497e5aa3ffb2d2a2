use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest UAV speed the power polynomial is evaluated at.
pub const MAX_UAV_SPEED_MPS: f64 = 20.0;

/// Power draw of both platforms as a function of speed.
///
/// UAV: `c0·q³ + c1·q² + c2·q + c3` watts. UGV: `c0·q + c1` watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModelParams {
    pub uav_power_coeffs: [f64; 4],
    pub ugv_power_coeffs: [f64; 2],
}

impl Default for EnergyModelParams {
    fn default() -> Self {
        Self { uav_power_coeffs: [0.0461, -0.5834, -1.8761, 229.6], ugv_power_coeffs: [464.8, 356.3] }
    }
}

impl EnergyModelParams {
    pub fn uav_power(&self, speed_mps: f64) -> Result<f64> {
        if !(0.0..=MAX_UAV_SPEED_MPS).contains(&speed_mps) {
            return Err(Error::Config(format!("UAV speed {speed_mps} m/s outside [0, {MAX_UAV_SPEED_MPS}]")));
        }
        let [a, b, c, d] = self.uav_power_coeffs;
        let q = speed_mps;
        Ok(a * q * q * q + b * q * q + c * q + d)
    }

    pub fn ugv_power(&self, speed_mps: f64) -> Result<f64> {
        if !(speed_mps >= 0.0 && speed_mps.is_finite()) {
            return Err(Error::Config(format!("UGV speed {speed_mps} m/s must be finite and non-negative")));
        }
        let [a, b] = self.ugv_power_coeffs;
        Ok(a * speed_mps + b)
    }

    /// Positive power over the whole admissible speed range, checked on a fine grid.
    pub fn validate(&self) -> Result<()> {
        for k in 0..=2000 {
            let q = MAX_UAV_SPEED_MPS * k as f64 / 2000.0;
            if !(self.uav_power(q)? > 0.0) {
                return Err(Error::Validation(format!("UAV power is not positive at {q} m/s")));
            }
        }
        let [a, b] = self.ugv_power_coeffs;
        if !(b > 0.0 && a >= 0.0) {
            return Err(Error::Validation("UGV power must be positive for every speed".into()));
        }
        Ok(())
    }
}

/// Power for the module-level API, with the default coefficients.
pub fn uav_power(speed_mps: f64) -> Result<f64> {
    EnergyModelParams::default().uav_power(speed_mps)
}

pub fn ugv_power(speed_mps: f64) -> Result<f64> {
    EnergyModelParams::default().ugv_power(speed_mps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn constant_terms() {
        assert_eq!(uav_power(0.0).unwrap(), 229.6);
        assert_eq!(ugv_power(0.0).unwrap(), 356.3);
    }

    #[test]
    fn cruise_values() {
        // 46.1 - 58.34 - 18.761 + 229.6 and 2091.6 + 356.3
        assert!(rel(uav_power(10.0).unwrap(), 198.599) < 1e-12);
        assert!(rel(ugv_power(4.5).unwrap(), 2447.9) < 1e-12);
    }

    #[test]
    fn endurance_and_range() {
        let endurance = 287_700.0 / uav_power(10.0).unwrap();
        assert!((endurance - 1448.65).abs() < 0.01);
        assert!((endurance * 10.0 - 14_486.5).abs() < 0.1);
        let ugv_endurance = 36_810_000.0 / ugv_power(4.5).unwrap();
        assert!((ugv_endurance - 15_037.3).abs() < 0.1);
    }

    #[test]
    fn negative_speed_rejected() {
        assert!(uav_power(-1.0).is_err());
        assert!(ugv_power(-0.1).is_err());
        assert!(uav_power(20.5).is_err());
    }

    #[test]
    fn default_model_is_valid() {
        EnergyModelParams::default().validate().unwrap();
    }
}
