//! The four model Hunt processes and their closed-form quantities.
//!
//! | model          | state space | killing density | conservative |
//! |----------------|-------------|-----------------|--------------|
//! | `free_bm`      | (−∞, ∞)     | –               | yes          |
//! | `absorbed_bm`  | (0, ∞)      | –               | no (exits at 0) |
//! | `flip_jump`    | (−∞, ∞)     | –               | yes          |
//! | `killed_static`| (0, 1)      | g(x) = x⁻²      | no (killed)  |
//!
//! The reference measure is Lebesgue measure on the state space for all four.
//! `killed_static` sits still until an exponential clock of rate `g(x)` rings;
//! its semigroup is `P_t u = e^{−g t} u` and its resolvent `R_α u = u / (α + g)`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessModel {
    /// Standard Brownian motion on ℝ.
    FreeBm,
    /// Brownian motion on (0, ∞) killed on reaching 0.
    AbsorbedBm,
    /// Rate-1 flip between `x` and `−x`.
    FlipJump,
    /// Motionless process on (0, 1) killed at rate `x⁻²`.
    KilledStatic,
}

/// Result of checking the no-immediate-killing condition on a compact set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCheck {
    pub holds: bool,
    /// `sup_{x ∈ K} E_x[e^{−ζ}]`.
    pub c_k: f64,
}

impl ProcessModel {
    pub const ALL: [ProcessModel; 4] = [
        ProcessModel::FreeBm,
        ProcessModel::AbsorbedBm,
        ProcessModel::FlipJump,
        ProcessModel::KilledStatic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcessModel::FreeBm => "free_bm",
            ProcessModel::AbsorbedBm => "absorbed_bm",
            ProcessModel::FlipJump => "flip_jump",
            ProcessModel::KilledStatic => "killed_static",
        }
    }

    /// Open state space.
    pub fn state_space(self) -> Interval {
        match self {
            ProcessModel::FreeBm | ProcessModel::FlipJump => Interval::REAL_LINE,
            ProcessModel::AbsorbedBm => Interval::new(0.0, f64::INFINITY),
            ProcessModel::KilledStatic => Interval::new(0.0, 1.0),
        }
    }

    pub fn is_conservative(self) -> bool {
        matches!(self, ProcessModel::FreeBm | ProcessModel::FlipJump)
    }

    pub fn has_killing(self) -> bool {
        matches!(self, ProcessModel::KilledStatic)
    }

    /// Kernel-based models have an explicit Green's function.
    pub fn is_kernel_based(self) -> bool {
        matches!(self, ProcessModel::FreeBm | ProcessModel::AbsorbedBm)
    }

    pub fn check_state(self, x: f64) -> Result<()> {
        if self.state_space().contains_open(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "x = {x} is outside the state space {} of {}",
                self.state_space(),
                self.name()
            )))
        }
    }

    /// Killing density `g`, if the model has one. Does not check the domain.
    pub fn killing_density(self, x: f64) -> Option<f64> {
        match self {
            ProcessModel::KilledStatic => Some(1.0 / (x * x)),
            _ => None,
        }
    }

    /// `κ([a, b]) = ∫_a^b g dx`; zero for models without killing.
    pub fn killing_mass(self, window: &Interval) -> Result<f64> {
        match self {
            ProcessModel::KilledStatic => {
                if !(window.lo > 0.0 && window.hi <= 1.0) {
                    return Err(Error::Domain(format!("killing window {window} must lie in (0, 1]")));
                }
                Ok(1.0 / window.lo - 1.0 / window.hi)
            }
            _ => Ok(0.0),
        }
    }

    /// Inverse CDF of the normalised killing measure on `window`.
    pub fn killing_quantile(self, window: &Interval, u: f64) -> Result<f64> {
        match self {
            ProcessModel::KilledStatic => {
                let (ia, ib) = (1.0 / window.lo, 1.0 / window.hi);
                Ok(1.0 / (ia - u * (ia - ib)))
            }
            _ => Err(Error::Unsupported(format!("{} has no killing measure", self.name()))),
        }
    }

    /// `φ_α(x) = E_x[e^{−αζ}; X_{ζ−} = ∂]`, the Laplace transform of continuous exits.
    pub fn phi(self, alpha: f64, x: f64) -> Result<f64> {
        check_alpha(alpha)?;
        self.check_state(x)?;
        Ok(self.phi_unchecked(alpha, x))
    }

    pub(crate) fn phi_unchecked(self, alpha: f64, x: f64) -> f64 {
        match self {
            ProcessModel::AbsorbedBm => (-(2.0 * alpha).sqrt() * x).exp(),
            // conservative processes never die; static killing is a jump from inside E
            _ => 0.0,
        }
    }

    /// `E_x[e^{−ζ}]`.
    pub fn laplace_lifetime(self, x: f64) -> Result<f64> {
        self.check_state(x)?;
        Ok(match self {
            ProcessModel::FreeBm | ProcessModel::FlipJump => 0.0,
            ProcessModel::AbsorbedBm => (-SQRT_2 * x).exp(),
            ProcessModel::KilledStatic => 1.0 / (1.0 + x * x),
        })
    }

    /// `R_α 1(x)`, closed form for every model.
    pub fn resolvent_one(self, alpha: f64, x: f64) -> f64 {
        match self {
            ProcessModel::FreeBm | ProcessModel::FlipJump => 1.0 / alpha,
            ProcessModel::AbsorbedBm => (1.0 - (-(2.0 * alpha).sqrt() * x).exp()) / alpha,
            ProcessModel::KilledStatic => 1.0 / (alpha + 1.0 / (x * x)),
        }
    }

    /// Checks `sup_K E_x[e^{−ζ}] < 1` on a compact `K` inside the state space.
    pub fn assumption_check(self, k: &Interval) -> Result<AssumptionCheck> {
        if !self.state_space().contains_compact(k) {
            return Err(Error::Domain(format!(
                "K = {k} is not a compact subset of {}",
                self.state_space()
            )));
        }
        // Both non-trivial transforms decrease in x, so the sup sits at the left end.
        let c_k = self.laplace_lifetime(k.lo)?;
        Ok(AssumptionCheck { holds: c_k < 1.0, c_k })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must be positive, got {alpha}")))
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProcessModel::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::Parse(format!(
                "unknown model {s:?}; expected one of free_bm, absorbed_bm, flip_jump, killed_static"
            ))
        })
    }
}
