//! Experiment configuration and its `key = value` text form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::McConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Paths per Monte Carlo cell.
    pub paths: u64,
    pub dt: f64,
    /// Horizon for sup distances.
    pub horizon: f64,
    /// Horizon at which discounted totals are truncated.
    pub discounted_horizon: f64,
    pub ladder: Vec<u32>,
    pub workers: Option<usize>,
    pub quad_tol: f64,
    pub nu0_t0: f64,
    pub bridge_correction: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_917,
            paths: 100_000,
            dt: 1e-3,
            horizon: 1.0,
            discounted_horizon: 20.0,
            ladder: vec![1, 2, 4, 8, 16, 32, 64],
            workers: None,
            quad_tol: 1e-9,
            nu0_t0: 0.01,
            bridge_correction: true,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder.windows(2).any(|w| w[1] <= w[0]) || self.ladder[0] == 0 {
            return Err(Error::Config(
                "ladder must be a strictly increasing list of positive integers".into(),
            ));
        }
        if self.discounted_horizon.is_nan() || self.discounted_horizon <= 0.0 {
            return Err(Error::Config("discounted_horizon must be positive".into()));
        }
        self.mc().validate()
    }

    /// Monte Carlo settings for sup distances (`horizon`) at `α = 1`.
    pub fn mc(&self) -> McConfig {
        McConfig {
            dt: self.dt,
            horizon: self.horizon,
            alpha: 1.0,
            bridge_correction: self.bridge_correction,
            seed: self.seed,
            paths: self.paths,
            workers: self.workers,
            nu0_t0: self.nu0_t0,
            quad_tol: self.quad_tol,
            ..McConfig::default()
        }
    }

    /// Monte Carlo settings for discounted totals.
    pub fn mc_discounted(&self) -> McConfig {
        self.mc().with_horizon(self.discounted_horizon)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "seed" => self.seed = parse_count(value)?,
            "paths" => self.paths = parse_count(value)?,
            "dt" => self.dt = parse_real(value)?,
            "horizon" => self.horizon = parse_real(value)?,
            "discounted_horizon" => self.discounted_horizon = parse_real(value)?,
            "ladder" => self.ladder = parse_ladder(value)?,
            "workers" => {
                self.workers = match value {
                    "auto" | "" => None,
                    v => Some(parse_count(v)? as usize),
                }
            }
            "quad_tol" | "tol" => self.quad_tol = parse_real(value)?,
            "nu0_t0" => self.nu0_t0 = parse_real(value)?,
            "bridge_correction" => {
                self.bridge_correction = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("bridge_correction must be true or false, got {value:?}")))?
            }
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_real(s: &str) -> Result<f64> {
    s.replace('_', "")
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("expected a finite number, got {s:?}")))
}

/// Integers, also in scientific notation such as `1e5`.
pub fn parse_count(s: &str) -> Result<u64> {
    let clean = s.replace('_', "");
    if let Ok(v) = clean.parse::<u64>() {
        return Ok(v);
    }
    let v = parse_real(&clean)?;
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) {
        Ok(v as u64)
    } else {
        Err(Error::Parse(format!("expected a nonnegative integer, got {s:?}")))
    }
}

/// `1,2,4,8` or `1..64` (powers of two from the first to the last).
pub fn parse_ladder(s: &str) -> Result<Vec<u32>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_count(a.trim())?, parse_count(b.trim())?);
        if a == 0 || b < a {
            return Err(Error::Parse(format!("bad ladder range {s:?}")));
        }
        let mut out = Vec::new();
        let mut n = a;
        while n <= b {
            out.push(n as u32);
            n *= 2;
        }
        return Ok(out);
    }
    s.split(',').map(|p| parse_count(p.trim()).map(|v| v as u32)).collect()
}
