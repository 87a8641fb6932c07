//! Diffusive scaling experiments: macroscopic profiles, local-equilibrium
//! product measures, the discrete heat equation and estimators of the
//! duality moments after time `N² t`.

mod heat;
mod lep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::measures::{ScaleProfile, LAMBDA_MAX};

pub use heat::{heat_solve_discrete, LatticeField, WalkKernel, KERNEL_TAIL};
pub use lep::{
    direct_sample, dual_moment, lep_check, snap, vee_estimate, HydroExperiment, LepMode, LepRow, VeeMode,
    HYDRO_LAMBDA_MAX,
};

/// Smooth macroscopic profile `π: ℝ → [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MacroProfile {
    Constant {
        lambda: f64,
    },
    /// `left + (right − left) (1 + tanh((y − center) / width)) / 2`
    SmoothedStep {
        left: f64,
        right: f64,
        center: f64,
        width: f64,
    },
    /// `base + amplitude · exp(−(y − center)² / (2 width²))`
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl MacroProfile {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            MacroProfile::Constant { lambda } => lambda,
            MacroProfile::SmoothedStep {
                left,
                right,
                center,
                width,
            } => left + (right - left) * 0.5 * (1.0 + ((y - center) / width).tanh()),
            MacroProfile::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => base + amplitude * (-(y - center).powi(2) / (2.0 * width * width)).exp(),
        }
    }

    /// Values at −∞ and +∞.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            MacroProfile::Constant { lambda } => (lambda, lambda),
            MacroProfile::SmoothedStep { left, right, .. } => (left, right),
            MacroProfile::GaussianBump { base, .. } => (base, base),
        }
    }

    /// Supremum and infimum over ℝ.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            MacroProfile::Constant { lambda } => (lambda, lambda),
            MacroProfile::SmoothedStep { left, right, .. } => (left.min(right), left.max(right)),
            MacroProfile::GaussianBump { base, amplitude, .. } => {
                (base.min(base + amplitude), base.max(base + amplitude))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths_ok = match *self {
            MacroProfile::SmoothedStep { width, .. } | MacroProfile::GaussianBump { width, .. } => width > 0.0,
            MacroProfile::Constant { .. } => true,
        };
        let (lo, hi) = self.bounds();
        if !widths_ok || !(lo >= 0.0 && hi <= LAMBDA_MAX) {
            return Err(Error::InvalidParameter(format!(
                "profile {self:?} must take values in [0, 1) with positive width"
            )));
        }
        Ok(())
    }

    /// `ψ(0, y) = π(y) / (1 − π(y))`.
    pub fn odds(&self, y: f64) -> f64 {
        let l = self.eval(y);
        l / (1.0 - l)
    }
}

/// `λ_N(i) = π(i / N)` tabulated on `window`, with the limits of `π` beyond.
pub fn profile_discretize(pi: &MacroProfile, n: usize, window: (Site, Site)) -> Result<ScaleProfile> {
    pi.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("scale N must be ≥ 1".into()));
    }
    let (left, right) = pi.limits();
    let nf = n as f64;
    ScaleProfile::tabulate(window.0, window.1, left, right, |i| pi.eval(i as f64 / nf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{moment_identity_lhs, SipParams};

    #[test]
    fn discretization_examples() {
        let c = profile_discretize(&MacroProfile::Constant { lambda: 0.3 }, 7, (-10, 10)).unwrap();
        for x in -20..20 {
            assert_eq!(c.at(x), 0.3);
        }
        let bump = MacroProfile::GaussianBump {
            base: 0.1,
            amplitude: 0.5,
            center: 0.5,
            width: 0.2,
        };
        let b = profile_discretize(&bump, 10, (0, 10)).unwrap();
        assert_eq!(b.at(5), bump.eval(0.5));
        assert!((b.at(5) - 0.6).abs() < 1e-15);
        assert!(profile_discretize(&MacroProfile::Constant { lambda: 1.0 }, 3, (0, 1)).is_err());
    }

    #[test]
    fn one_point_moment_equals_odds() {
        let step = MacroProfile::SmoothedStep {
            left: 0.2,
            right: 0.6,
            center: 0.5,
            width: 0.1,
        };
        let n = 25;
        let prof = profile_discretize(&step, n, (0, 25)).unwrap();
        let x = (n as f64 * 0.4) as Site;
        let p = SipParams::new(1.0).unwrap();
        let series = moment_identity_lhs(1, prof.at(x), p, 1e-13).unwrap();
        assert!((series.value - prof.odds(x)).abs() < 1e-10);
    }

    #[test]
    fn profile_config_round_trip() {
        let text = r#"{"family":"smoothed_step","left":0.2,"right":0.6,"center":0.5,"width":0.1}"#;
        let pi: MacroProfile = serde_json::from_str(text).unwrap();
        assert_eq!(
            pi,
            MacroProfile::SmoothedStep {
                left: 0.2,
                right: 0.6,
                center: 0.5,
                width: 0.1
            }
        );
        assert!(serde_json::from_str::<MacroProfile>(r#"{"family":"constant","lambda":0.2,"x":1}"#).is_err());
    }
}
