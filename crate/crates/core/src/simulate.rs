//! Reproducible path simulation for the model processes.
//!
//! Diffusions are sampled on a uniform grid with exact Gaussian increments.
//! The flip and static models are sampled exactly at their event times, so
//! their laws do not depend on `dt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ProcessModel;

/// State value recorded at and after the lifetime.
pub const CEMETERY: f64 = f64::NAN;

/// Bridge hit probabilities below `e^{-50}` are treated as zero.
const BRIDGE_CUTOFF: f64 = 50.0;

#[inline]
pub fn is_cemetery(x: f64) -> bool {
    x.is_nan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    /// Alive at the horizon.
    Survived,
    /// Reached the boundary of the state space.
    ContinuousExit,
    /// Jumped to the cemetery from inside the state space.
    KilledByKappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub bridge_correction: bool,
    pub seed: u64,
    pub path_index: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            bridge_correction: true,
            seed: 0,
            path_index: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::Config(format!(
                "horizon {} must be finite and at least dt = {}",
                self.horizon, self.dt
            )));
        }
        Ok(())
    }

    /// Number of grid steps; the last one is shortened to land on the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt * (1.0 - 1e-12)).ceil() as usize
    }
}

/// How the grid of a path was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `t_i = i·dt`, states sampled at grid points.
    Uniform { dt: f64 },
    /// Jump times; the state is constant on `[t_i, t_{i+1})`.
    Events,
}

/// A sampled path up to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub model: ProcessModel,
    pub grid: GridKind,
    pub times: Vec<f64>,
    /// Aligned with `times`; [`CEMETERY`] from the lifetime on.
    pub states: Vec<f64>,
    /// Lifetime, `f64::INFINITY` when alive at the horizon.
    pub zeta: f64,
    pub exit: ExitKind,
}

impl Path {
    pub fn empty(model: ProcessModel) -> Self {
        Self {
            model,
            grid: GridKind::Events,
            times: Vec::new(),
            states: Vec::new(),
            zeta: f64::INFINITY,
            exit: ExitKind::Survived,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn start(&self) -> f64 {
        self.states[0]
    }

    /// Final state, [`CEMETERY`] if the path died.
    pub fn end(&self) -> f64 {
        *self.states.last().expect("path has at least one point")
    }

    pub fn is_killed(&self) -> bool {
        self.zeta.is_finite()
    }

    /// State at time `t` (linear interpolation for diffusions).
    pub fn state_at(&self, t: f64) -> f64 {
        if t >= self.zeta {
            return CEMETERY;
        }
        let i = match self.times.partition_point(|&s| s <= t) {
            0 => return self.states[0],
            i => i - 1,
        };
        match self.grid {
            GridKind::Events => self.states[i],
            GridKind::Uniform { .. } => {
                if i + 1 >= self.times.len() {
                    return self.states[i];
                }
                let (a, b) = (self.states[i], self.states[i + 1]);
                if is_cemetery(b) {
                    return a;
                }
                let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                a + (b - a) * w
            }
        }
    }

    /// CSV rows `t,x,alive`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,alive\n");
        for (t, x) in self.times.iter().zip(&self.states) {
            if is_cemetery(*x) {
                s.push_str(&format!("{t},,0\n"));
            } else {
                s.push_str(&format!("{t},{x},1\n"));
            }
        }
        s
    }
}

/// Random stream determined by `(seed, path_index)` alone.
pub fn rng_for(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

pub fn simulate_path<R: Rng + ?Sized>(model: ProcessModel, x0: f64, cfg: &SimConfig, rng: &mut R) -> Result<Path> {
    let mut path = Path::empty(model);
    simulate_into(model, x0, cfg, rng, &mut path)?;
    Ok(path)
}

/// As [`simulate_path`], reusing the buffers of `path`.
pub fn simulate_into<R: Rng + ?Sized>(
    model: ProcessModel,
    x0: f64,
    cfg: &SimConfig,
    rng: &mut R,
    path: &mut Path,
) -> Result<()> {
    cfg.validate()?;
    model.check_state(x0)?;
    path.model = model;
    path.times.clear();
    path.states.clear();
    path.zeta = f64::INFINITY;
    path.exit = ExitKind::Survived;
    match model {
        ProcessModel::FreeBm => diffusion(x0, cfg, rng, path, false),
        ProcessModel::AbsorbedBm => diffusion(x0, cfg, rng, path, true),
        ProcessModel::FlipJump => flips(x0, cfg.horizon, rng, path),
        ProcessModel::KilledStatic => static_killed(x0, cfg.horizon, rng, path),
    }
    Ok(())
}

fn diffusion<R: Rng + ?Sized>(x0: f64, cfg: &SimConfig, rng: &mut R, path: &mut Path, absorbed: bool) {
    let n = cfg.steps();
    path.grid = GridKind::Uniform { dt: cfg.dt };
    path.times.reserve(n + 1);
    path.states.reserve(n + 1);
    path.times.push(0.0);
    path.states.push(x0);
    let mut x = x0;
    for i in 0..n {
        let t0 = i as f64 * cfg.dt;
        let t1 = if i + 1 == n {
            cfg.horizon
        } else {
            (i + 1) as f64 * cfg.dt
        };
        let h = t1 - t0;
        let z: f64 = rng.sample(StandardNormal);
        let y = x + h.sqrt() * z;
        if absorbed {
            let hit = if y <= 0.0 {
                Some(t0 + h * x / (x - y))
            } else if cfg.bridge_correction && 2.0 * x * y < BRIDGE_CUTOFF * h {
                let p = (-2.0 * x * y / h).exp();
                let u: f64 = rng.random();
                (u < p).then(|| t0 + h * rng.random::<f64>())
            } else {
                None
            };
            if let Some(zeta) = hit {
                path.times.push(t1);
                path.states.push(CEMETERY);
                path.zeta = zeta;
                path.exit = ExitKind::ContinuousExit;
                for j in i + 1..n {
                    path.times.push(if j + 1 == n {
                        cfg.horizon
                    } else {
                        (j + 1) as f64 * cfg.dt
                    });
                    path.states.push(CEMETERY);
                }
                return;
            }
        }
        x = y;
        path.times.push(t1);
        path.states.push(x);
    }
}

fn flips<R: Rng + ?Sized>(x0: f64, horizon: f64, rng: &mut R, path: &mut Path) {
    path.grid = GridKind::Events;
    let mut t = 0.0;
    let mut x = x0;
    loop {
        path.times.push(t);
        path.states.push(x);
        let gap: f64 = rng.sample(Exp1);
        t += gap;
        if t >= horizon {
            break;
        }
        x = -x;
    }
    path.times.push(horizon);
    path.states.push(x);
}

fn static_killed<R: Rng + ?Sized>(x0: f64, horizon: f64, rng: &mut R, path: &mut Path) {
    path.grid = GridKind::Events;
    let g = 1.0 / (x0 * x0);
    let e: f64 = rng.sample(Exp1);
    let zeta = e / g;
    path.times.push(0.0);
    path.states.push(x0);
    if zeta < horizon {
        path.times.push(zeta);
        path.states.push(CEMETERY);
        path.times.push(horizon);
        path.states.push(CEMETERY);
        path.zeta = zeta;
        path.exit = ExitKind::KilledByKappa;
    } else {
        path.times.push(horizon);
        path.states.push(x0);
    }
}

/// First passage of free Brownian motion from `x0` to `level`, `∞` if not by the horizon.
///
/// A crossing inside a step is located by linear interpolation; without a
/// crossing the bridge between the endpoints touches the level with probability
/// `exp(−2(y−X_i)(y−X_{i+1})/dt)`, and the hit time is then uniform in the step.
pub fn free_first_passage<R: Rng + ?Sized>(x0: f64, level: f64, cfg: &SimConfig, rng: &mut R) -> Result<f64> {
    cfg.validate()?;
    if !x0.is_finite() || !level.is_finite() {
        return Err(Error::Domain("first passage needs finite points".into()));
    }
    if x0 == level {
        return Ok(0.0);
    }
    let n = cfg.steps();
    let mut d = x0 - level;
    for i in 0..n {
        let t0 = i as f64 * cfg.dt;
        let t1 = if i + 1 == n {
            cfg.horizon
        } else {
            (i + 1) as f64 * cfg.dt
        };
        let h = t1 - t0;
        let z: f64 = rng.sample(StandardNormal);
        let e = d + h.sqrt() * z;
        if e == 0.0 || (e > 0.0) != (d > 0.0) {
            return Ok(t0 + h * d / (d - e));
        }
        if cfg.bridge_correction && 2.0 * d * e < BRIDGE_CUTOFF * h {
            let p = (-2.0 * d * e / h).exp();
            let u: f64 = rng.random();
            if u < p {
                return Ok(t0 + h * rng.random::<f64>());
            }
        }
        d = e;
    }
    Ok(f64::INFINITY)
}
