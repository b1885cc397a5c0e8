use crate::error::{Error, Result};
use crate::msdt::MsdtConfig;

/// A threshold that is either pinned or rescaled every iteration from the
/// current iterate's maximum magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Recompute from the current maximum, scaled by this constant.
    Adaptive(f64),
    /// Use this value as is.
    Fixed(f64),
}

impl Threshold {
    fn validate(&self, name: &str, adaptive_max: f64) -> Result<()> {
        match *self {
            Threshold::Adaptive(c) if !(c >= 0.0 && c <= adaptive_max) => Err(Error::invalid(format!(
                "{name}: adaptive constant must lie in [0, {adaptive_max}], got {c}"
            ))),
            Threshold::Fixed(v) if !(v >= 0.0 && v.is_finite()) => {
                Err(Error::invalid(format!("{name}: fixed value must be >= 0, got {v}")))
            }
            _ => Ok(()),
        }
    }
}

/// All user-facing constants of the decomposition.
///
/// The penalty weights are derived from `beta4` and the ratio constants:
/// `beta3 = theta / (1 - theta) beta4`, `beta1 = c1 beta4`,
/// `beta2 = c2 beta3`, `beta5 = c3 beta4`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    /// Directions of the directional TV term (`L`).
    pub tv_directions: usize,
    /// Directions of the texture generating field (`S`).
    pub texture_directions: usize,
    pub beta4: f64,
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Weight of the `sum ||g_s||_1` term.
    pub mu1: Threshold,
    /// Weight of the `||v||_1` term.
    pub mu2: Threshold,
    /// Multiplier step for `lambda1..lambda4`.
    pub gamma: f64,
    /// Bound on the residual's frame coefficients.
    pub nu: Threshold,
    pub iterations: usize,
    pub frame: MsdtConfig,
}

impl Default for SolverParams {
    /// `L = S = 4`, `beta1 = beta4 = 0.04`, `beta2 = beta3 = 0.3`,
    /// `c_mu1 = c_mu2 = 0.03`, 200 iterations. `c3 = 1` and the adaptive
    /// `c_nu = 0.5` are this crate's defaults.
    fn default() -> Self {
        Self {
            tv_directions: 4,
            texture_directions: 4,
            beta4: 0.04,
            // beta3 / beta4 = theta / (1 - theta) = 7.5
            theta: 7.5 / 8.5,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            mu1: Threshold::Adaptive(0.03),
            mu2: Threshold::Adaptive(0.03),
            gamma: 1.0,
            nu: Threshold::Adaptive(0.5),
            iterations: 200,
            frame: MsdtConfig::default(),
        }
    }
}

impl SolverParams {
    /// Setting used for directional fingerprint texture: `beta4 = 0.03`,
    /// `theta = 0.9`, `L = 100`, `S = 4`, `c1 = 1`, `c2 = 1.3`,
    /// `c_mu1 = c_mu2 = 0.03`, 200 iterations and a fixed `nu = 15`.
    pub fn fingerprint() -> Self {
        Self {
            tv_directions: 100,
            texture_directions: 4,
            beta4: 0.03,
            theta: 0.9,
            c1: 1.0,
            c2: 1.3,
            c3: 1.0,
            mu1: Threshold::Adaptive(0.03),
            mu2: Threshold::Adaptive(0.03),
            gamma: 1.0,
            nu: Threshold::Fixed(15.0),
            iterations: 200,
            frame: MsdtConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tv_directions == 0 || self.texture_directions == 0 {
            return Err(Error::invalid("direction counts L and S must be >= 1"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("beta4", self.beta4)?;
        positive("c2", self.c2)?;
        positive("c3", self.c3)?;
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid(format!("c1 must be >= 0, got {}", self.c1)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        self.mu1.validate("mu1", f64::MAX)?;
        self.mu2.validate("mu2", f64::MAX)?;
        self.nu.validate("nu", 1.0)?;
        if let Threshold::Adaptive(c) = self.nu {
            if c >= 1.0 {
                return Err(Error::invalid("adaptive c_nu must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn penalties(&self) -> Penalties {
        let beta4 = self.beta4;
        let beta3 = self.theta / (1.0 - self.theta) * beta4;
        Penalties {
            beta1: self.c1 * beta4,
            beta2: self.c2 * beta3,
            beta3,
            beta4,
            beta5: self.c3 * beta4,
        }
    }
}

/// Augmented-Lagrangian penalty weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalties {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
}
