//! Positive continuous additive functionals evaluated along sampled paths.
//!
//! Diffusion paths use the trapezoid rule on the grid. The step containing
//! the lifetime uses the left-point rate up to `ζ`. Event-driven paths are
//! piecewise constant, so their integrals are exact. Cantor densities on
//! diffusion grids are integrated exactly along the linear interpolant through
//! the level CDF, which avoids sampling an indicator of a fractal set at grid
//! points.

use serde::{Deserialize, Serialize};

use crate::cantor;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measures::{DensityFn, SmoothMeasure};
use crate::simulate::{is_cemetery, GridKind, Path};

/// Recompute the discount factor exactly every this many steps.
const DISCOUNT_RESYNC: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PcafSpec {
    /// `A_t = ∫_0^t f(X_s) 1_support(X_s) ds`
    Density {
        #[serde(rename = "expr")]
        f: DensityFn,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<Interval>,
    },
    /// `(2ε)⁻¹ ∫_0^t 1_{(x−ε, x+ε)}(X_s) ds`
    LocalTime { x: f64, eps: f64 },
    /// Density `(3/2)^n 1_{C_n}`.
    Cantor { n: u32 },
}

impl PcafSpec {
    pub fn density(f: DensityFn, support: Interval) -> Self {
        PcafSpec::Density {
            f,
            support: Some(support),
        }
    }

    /// The zero functional.
    pub fn zero() -> Self {
        PcafSpec::Density {
            f: DensityFn::Const { c: 0.0 },
            support: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PcafSpec::LocalTime { x, eps } if !(eps > 0.0 && x.is_finite()) => Err(Error::Domain(format!(
                "local time needs a finite point and eps > 0, got x = {x}, eps = {eps}"
            ))),
            PcafSpec::Cantor { n } if n > crate::measures::MAX_CANTOR_LEVEL => {
                Err(Error::Domain(format!("Cantor level {n} is too deep")))
            }
            _ => Ok(()),
        }
    }

    /// The PCAF whose Revuz measure is `mu`, with local times of width `eps` for atoms.
    pub fn for_measure(mu: &SmoothMeasure, eps: f64) -> Result<Self> {
        let spec = match *mu {
            SmoothMeasure::Density { f, support } => PcafSpec::density(f, support),
            SmoothMeasure::Dirac { x } => PcafSpec::LocalTime { x, eps },
            SmoothMeasure::CantorLevel { n } => PcafSpec::Cantor { n },
            _ => {
                return Err(Error::Unsupported(
                    "only densities, Dirac masses and Cantor levels have simulated PCAFs".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Revuz measure of the functional as implemented (local times are boxes).
    pub fn revuz_measure(&self) -> SmoothMeasure {
        match *self {
            PcafSpec::Density { f, support } => SmoothMeasure::density(f, support.unwrap_or(Interval::REAL_LINE)),
            PcafSpec::LocalTime { x, eps } => {
                SmoothMeasure::density(DensityFn::Const { c: 0.5 / eps }, Interval::new(x - eps, x + eps))
            }
            PcafSpec::Cantor { n } => SmoothMeasure::CantorLevel { n },
        }
    }

    /// Rate `dA/dt` while the process sits at `x`.
    #[inline]
    pub fn rate(&self, x: f64) -> f64 {
        if is_cemetery(x) {
            return 0.0;
        }
        match *self {
            PcafSpec::Density { f, support } => match support {
                Some(s) if !s.contains_closed(x) => 0.0,
                _ => f.eval(x),
            },
            PcafSpec::LocalTime { x: c, eps } => {
                if (x - c).abs() < eps {
                    0.5 / eps
                } else {
                    0.0
                }
            }
            PcafSpec::Cantor { n } => {
                if cantor::membership(x, n) {
                    1.5f64.powi(n as i32)
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup_x rate(x)`, possibly infinite.
    pub fn rate_sup(&self) -> f64 {
        match *self {
            PcafSpec::Density { f, support } => f.sup_on(&support.unwrap_or(Interval::REAL_LINE)),
            PcafSpec::LocalTime { eps, .. } => 0.5 / eps,
            PcafSpec::Cantor { n } => 1.5f64.powi(n as i32),
        }
    }
}

/// `A` and `Ã` on the grid of one path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PcafTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub discounted: Vec<f64>,
    pub alpha: f64,
    /// Bound on `Ã_∞ − Ã_T`.
    pub tail_bound: f64,
}

impl PcafTrajectory {
    /// Piecewise-linear value of `A` at `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.values, t)
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

fn interpolate(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    match ts.partition_point(|&s| s <= t) {
        0 => vs[0],
        i if i >= ts.len() => vs[ts.len() - 1],
        i => {
            let (t0, t1) = (ts[i - 1], ts[i]);
            let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
            vs[i - 1] + (vs[i] - vs[i - 1]) * w
        }
    }
}

/// `∫_t^{t+τ} e^{−αs} ds / e^{−αt}`
#[inline]
fn discount_integral(alpha: f64, tau: f64) -> f64 {
    if alpha == 0.0 {
        tau
    } else {
        -(-alpha * tau).exp_m1() / alpha
    }
}

/// Calls `visit(i, A_{t_i}, Ã_{t_i})` for every grid point in order.
fn accumulate(spec: &PcafSpec, path: &Path, alpha: f64, visit: impl FnMut(usize, f64, f64)) {
    let cantor_level = match *spec {
        PcafSpec::Cantor { n } => Some(n),
        _ => None,
    };
    accumulate_rate(|x| spec.rate(x), cantor_level, path, alpha, visit);
}

/// `∫_0^T h(X_s) ds` by the same rule as density PCAFs; `h` is zero at the cemetery.
pub fn path_integral(path: &Path, h: impl Fn(f64) -> f64) -> f64 {
    let mut last = 0.0;
    let rate = |x: f64| if is_cemetery(x) { 0.0 } else { h(x) };
    accumulate_rate(rate, None, path, 0.0, |_, a, _| last = a);
    last
}

fn accumulate_rate(
    rate: impl Fn(f64) -> f64,
    cantor_level: Option<u32>,
    path: &Path,
    alpha: f64,
    mut visit: impl FnMut(usize, f64, f64),
) {
    let n = path.times.len();
    if n == 0 {
        return;
    }
    let (mut a, mut d) = (0.0, 0.0);
    visit(0, 0.0, 0.0);
    match path.grid {
        GridKind::Events => {
            let mut disc0 = 1.0;
            for i in 0..n - 1 {
                let (t0, t1) = (path.times[i], path.times[i + 1]);
                let disc1 = (-alpha * t1).exp();
                let r = rate(path.states[i]);
                if r != 0.0 {
                    a += r * (t1 - t0);
                    d += r * disc0 * discount_integral(alpha, t1 - t0);
                }
                disc0 = disc1;
                visit(i + 1, a, d);
            }
        }
        GridKind::Uniform { dt } => {
            let q = (-alpha * dt).exp();
            let mut x0 = path.states[0];
            let mut r0 = rate(x0);
            let mut disc0 = 1.0;
            let mut dead = false;
            for i in 0..n - 1 {
                if dead {
                    visit(i + 1, a, d);
                    continue;
                }
                let (t0, t1) = (path.times[i], path.times[i + 1]);
                let h = t1 - t0;
                let x1 = path.states[i + 1];
                if is_cemetery(x1) {
                    let tau = (path.zeta - t0).clamp(0.0, h);
                    a += r0 * tau;
                    d += r0 * disc0 * discount_integral(alpha, tau);
                    dead = true;
                    visit(i + 1, a, d);
                    continue;
                }
                let disc1 = if (i + 1) % DISCOUNT_RESYNC == 0 || i + 2 == n {
                    (-alpha * t1).exp()
                } else {
                    disc0 * q
                };
                let r1 = rate(x1);
                if let Some(level) = cantor_level {
                    let da = if x1 == x0 {
                        h * r0
                    } else {
                        h * (cantor::level_cdf(x1, level) - cantor::level_cdf(x0, level)) / (x1 - x0)
                    };
                    a += da;
                    d += da * 0.5 * (disc0 + disc1);
                } else if r0 != 0.0 || r1 != 0.0 {
                    a += 0.5 * h * (r0 + r1);
                    d += 0.5 * h * (disc0 * r0 + disc1 * r1);
                }
                x0 = x1;
                r0 = r1;
                disc0 = disc1;
                visit(i + 1, a, d);
            }
        }
    }
}

fn tail_bound(spec: &PcafSpec, path: &Path, alpha: f64) -> f64 {
    if path.is_killed() {
        return 0.0;
    }
    if alpha <= 0.0 {
        return f64::INFINITY;
    }
    let rate = match path.grid {
        // The future of an event-driven path only revisits states it can reach.
        GridKind::Events => {
            let x = path.start();
            let r = spec.rate(x);
            if path.model == crate::ProcessModel::FlipJump {
                r.max(spec.rate(-x))
            } else {
                r
            }
        }
        GridKind::Uniform { .. } => spec.rate_sup(),
    };
    if rate == 0.0 {
        0.0
    } else {
        (-alpha * path.horizon()).exp() * rate / alpha
    }
}

pub fn evaluate(spec: &PcafSpec, path: &Path, alpha: f64) -> PcafTrajectory {
    let mut traj = PcafTrajectory::default();
    evaluate_into(spec, path, alpha, &mut traj);
    traj
}

/// As [`evaluate`], reusing the buffers of `traj`.
pub fn evaluate_into(spec: &PcafSpec, path: &Path, alpha: f64, traj: &mut PcafTrajectory) {
    traj.times.clear();
    traj.times.extend_from_slice(&path.times);
    traj.values.clear();
    traj.discounted.clear();
    traj.values.resize(path.times.len(), 0.0);
    traj.discounted.resize(path.times.len(), 0.0);
    let (values, discounted) = (&mut traj.values, &mut traj.discounted);
    accumulate(spec, path, alpha, |i, a, d| {
        values[i] = a;
        discounted[i] = d;
    });
    traj.alpha = alpha;
    traj.tail_bound = tail_bound(spec, path, alpha);
}

/// `(Ã_T, bound on Ã_∞ − Ã_T)` without storing the trajectory.
pub fn discounted_on_path(spec: &PcafSpec, path: &Path, alpha: f64) -> (f64, f64) {
    let mut last = 0.0;
    accumulate(spec, path, alpha, |_, _, d| last = d);
    (last, tail_bound(spec, path, alpha))
}

/// `A_T` at the end of the path.
pub fn total_on_path(spec: &PcafSpec, path: &Path) -> f64 {
    let mut last = 0.0;
    accumulate(spec, path, 0.0, |_, a, _| last = a);
    last
}

/// `(Ã_T, tail bound)` of a trajectory; exact when the path was killed.
pub fn discounted_total(traj: &PcafTrajectory) -> Result<(f64, f64)> {
    if traj.alpha.is_nan() || traj.alpha <= 0.0 {
        return Err(Error::Domain("discounted totals need alpha > 0".into()));
    }
    Ok((traj.discounted.last().copied().unwrap_or(0.0), traj.tail_bound))
}

/// `sup_{t ≤ T} |A_t − B_t|` over grid points, resampling onto the union grid if needed.
pub fn sup_distance(a: &PcafTrajectory, b: &PcafTrajectory, horizon: f64) -> f64 {
    let mut best: f64 = 0.0;
    if a.times == b.times {
        for (i, &t) in a.times.iter().enumerate() {
            if t > horizon {
                break;
            }
            best = best.max((a.values[i] - b.values[i]).abs());
        }
    } else {
        let mut grid: Vec<f64> = a
            .times
            .iter()
            .chain(&b.times)
            .copied()
            .filter(|&t| t <= horizon)
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for t in grid {
            best = best.max((a.value_at(t) - b.value_at(t)).abs());
        }
    }
    if horizon < a.horizon().min(b.horizon()) {
        best = best.max((a.value_at(horizon) - b.value_at(horizon)).abs());
    }
    best
}
