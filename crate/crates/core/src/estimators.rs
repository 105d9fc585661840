//! Monte Carlo expectations under the weightings `m`, `κ` and `ν₀`, and the
//! identity checks built on them.
//!
//! Every sample index owns the stream `rng_for(seed, index)`. The start point
//! is drawn first, then the path. Moments are merged by a fixed-shape tree, so
//! estimates are bitwise reproducible for any worker count.

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::kernels::{self, Potential, TabulatedPotential};
use crate::measures::{IntegrateOptions, SmoothMeasure};
use crate::models::{check_alpha, ProcessModel};
use crate::pcaf::{self, PcafSpec, PcafTrajectory};
use crate::quad::{self, QuadOptions};
use crate::reduce::{reduce_indexed, Moments};
use crate::simulate::{self, is_cemetery, rng_for, Path, SimConfig};
use crate::special::norm_cdf;
use crate::stats::{kendall_trend, TrendTest};

/// Largest window extension, in units of the kernel decay length.
const MAX_EXTENSION: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dt: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub bridge_correction: bool,
    pub seed: u64,
    pub paths: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Largest time of the finite-difference ladder for `ν₀`.
    pub nu0_t0: f64,
    pub quad_tol: f64,
    /// Target for the neglected exterior of `m`-windows.
    pub exterior_tol: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            alpha: 1.0,
            bridge_correction: true,
            seed: 1,
            paths: 100_000,
            workers: None,
            nu0_t0: 0.01,
            quad_tol: 1e-10,
            exterior_tol: 1e-4,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim(0).validate()?;
        check_alpha(self.alpha)?;
        if self.paths == 0 {
            return Err(Error::Config("paths must be positive".into()));
        }
        if !(self.nu0_t0 > 0.0 && self.quad_tol > 0.0 && self.exterior_tol > 0.0) {
            return Err(Error::Config(
                "nu0_t0, quad_tol and exterior_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn sim(&self, path_index: u64) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            bridge_correction: self.bridge_correction,
            seed: self.seed,
            path_index,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_paths(mut self, paths: u64) -> Self {
        self.paths = paths;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Weighting {
    /// Lebesgue measure on a window, reported with the multiplier `|W|`.
    MWindow {
        window: Interval,
    },
    /// Killing measure restricted to a window.
    Kappa {
        window: Interval,
    },
    /// Continuous-exit energy functional of absorbed Brownian motion.
    Nu0,
    PointMass {
        x: f64,
    },
}

impl Weighting {
    pub fn validate(&self, model: ProcessModel) -> Result<()> {
        match *self {
            Weighting::MWindow { window } => {
                let space = model.state_space();
                if !(window.is_bounded() && window.len() > 0.0) || window.lo < space.lo || window.hi > space.hi {
                    return Err(Error::Domain(format!(
                        "m-window {window} must be a bounded, nonempty subset of {space}"
                    )));
                }
                Ok(())
            }
            Weighting::Kappa { window } => {
                if !model.has_killing() {
                    return Err(Error::Domain(format!("{model} has no killing measure")));
                }
                model.killing_mass(&window).map(|_| ())
            }
            Weighting::Nu0 if model != ProcessModel::AbsorbedBm => Err(Error::Domain(format!(
                "the nu0 weighting needs a continuous exit, {model} has none"
            ))),
            Weighting::Nu0 => Ok(()),
            Weighting::PointMass { x } => model.check_state(x),
        }
    }

    /// Total mass the sample mean is multiplied by.
    pub fn multiplier(&self, model: ProcessModel) -> Result<f64> {
        match *self {
            Weighting::MWindow { window } => Ok(window.len()),
            Weighting::Kappa { window } => model.killing_mass(&window),
            Weighting::PointMass { .. } => Ok(1.0),
            Weighting::Nu0 => Err(Error::Unsupported("nu0 has no sampling multiplier".into())),
        }
    }

    fn sample_start(&self, model: ProcessModel, rng: &mut ChaCha8Rng) -> Result<f64> {
        match *self {
            Weighting::MWindow { window } => Ok(window.lo + window.len() * open_unit(rng)),
            Weighting::Kappa { window } => model.killing_quantile(&window, open_unit(rng)),
            Weighting::PointMass { x } => Ok(x),
            Weighting::Nu0 => unreachable!("nu0 starts are drawn by the ladder"),
        }
    }
}

/// Uniform on the open interval `(0, 1)`.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Path functionals with known tail control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// `A_T`
    AtHorizon { pcaf: PcafSpec },
    /// `Ã_∞`
    Discounted { pcaf: PcafSpec },
    /// `(Ã_∞)²`
    DiscountedSq { pcaf: PcafSpec },
    /// `e^{−α σ_level}` for free Brownian motion.
    Hitting { level: f64 },
    /// `sup_{t ≤ T} |A_t − B_t|²`
    SupSqGap { a: PcafSpec, b: PcafSpec },
    /// `(Ã_∞ − B̃_∞)²`
    DiscountedSqGap { a: PcafSpec, b: PcafSpec },
}

impl Functional {
    fn validate(&self, model: ProcessModel) -> Result<()> {
        match self {
            Functional::AtHorizon { pcaf } | Functional::Discounted { pcaf } | Functional::DiscountedSq { pcaf } => {
                pcaf.validate()
            }
            Functional::SupSqGap { a, b } | Functional::DiscountedSqGap { a, b } => {
                a.validate()?;
                b.validate()
            }
            Functional::Hitting { level } => {
                if model != ProcessModel::FreeBm {
                    return Err(Error::Unsupported(
                        "hitting functionals are for free Brownian motion".into(),
                    ));
                }
                model.check_state(*level)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
    /// Bound on the bias from truncating at the horizon.
    pub tail_bound: f64,
}

impl McEstimate {
    fn from_moments(value: &Moments, tail: &Moments, seed: u64) -> Self {
        Self {
            mean: value.mean,
            std_error: value.std_error(),
            n: value.n,
            seed,
            tail_bound: tail.mean,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            mean: c * self.mean,
            std_error: c.abs() * self.std_error,
            tail_bound: c.abs() * self.tail_bound,
            ..self
        }
    }

    /// `|mean − target| ≤ k·σ + allowance`
    pub fn agrees_with(&self, target: f64, k: f64, allowance: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + allowance
    }

    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }
}

struct Scratch {
    path: Path,
    a: PcafTrajectory,
    b: PcafTrajectory,
}

impl Scratch {
    fn new(model: ProcessModel) -> Self {
        Self {
            path: Path::empty(model),
            a: PcafTrajectory::default(),
            b: PcafTrajectory::default(),
        }
    }
}

/// One sample of `F` from `x0`: `(value, tail bound)`.
fn sample_functional(
    model: ProcessModel,
    f: &Functional,
    x0: f64,
    cfg: &McConfig,
    index: u64,
    rng: &mut ChaCha8Rng,
    s: &mut Scratch,
) -> Result<(f64, f64)> {
    let sim = cfg.sim(index);
    let alpha = cfg.alpha;
    if let Functional::Hitting { level } = *f {
        let sigma = simulate::free_first_passage(x0, level, &sim, rng)?;
        return Ok(if sigma.is_finite() {
            ((-alpha * sigma).exp(), 0.0)
        } else {
            (0.0, (-alpha * cfg.horizon).exp())
        });
    }
    simulate::simulate_into(model, x0, &sim, rng, &mut s.path)?;
    Ok(match *f {
        Functional::AtHorizon { pcaf } => (pcaf::total_on_path(&pcaf, &s.path), 0.0),
        Functional::Discounted { pcaf } => pcaf::discounted_on_path(&pcaf, &s.path, alpha),
        Functional::DiscountedSq { pcaf } => {
            let (v, t) = pcaf::discounted_on_path(&pcaf, &s.path, alpha);
            (v * v, 2.0 * v * t + t * t)
        }
        Functional::SupSqGap { a, b } => {
            pcaf::evaluate_into(&a, &s.path, 0.0, &mut s.a);
            pcaf::evaluate_into(&b, &s.path, 0.0, &mut s.b);
            let d = pcaf::sup_distance(&s.a, &s.b, cfg.horizon);
            (d * d, 0.0)
        }
        Functional::DiscountedSqGap { a, b } => {
            let (va, ta) = pcaf::discounted_on_path(&a, &s.path, alpha);
            let (vb, tb) = pcaf::discounted_on_path(&b, &s.path, alpha);
            let (d, t) = (va - vb, ta.max(tb));
            (d * d, 2.0 * d.abs() * t + t * t)
        }
        Functional::Hitting { .. } => unreachable!(),
    })
}

/// `E_w[F]` by Monte Carlo.
pub fn expect(model: ProcessModel, w: &Weighting, f: &Functional, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    w.validate(model)?;
    f.validate(model)?;
    if *w == Weighting::Nu0 {
        return Ok(nu0_finite_difference(model, f, cfg)?.extrapolated);
    }
    let mult = w.multiplier(model)?;
    let m = reduce_indexed(
        cfg.paths,
        2,
        cfg.workers,
        || Scratch::new(model),
        |i, s, out| {
            let mut rng = rng_for(cfg.seed, i);
            let x0 = w.sample_start(model, &mut rng)?;
            let (v, t) = sample_functional(model, f, x0, cfg, i, &mut rng, s)?;
            out[0] = mult * v;
            out[1] = mult * t;
            Ok(())
        },
    )?;
    Ok(McEstimate::from_moments(&m[0], &m[1], cfg.seed))
}

/// The finite-difference estimates of `E_{ν₀}[F]` at each ladder time and their extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nu0Ladder {
    pub times: [f64; 3],
    pub rungs: [McEstimate; 3],
    /// `2·E(t₀/4) − E(t₀/2)`, first-order Richardson.
    pub extrapolated: McEstimate,
}

/// `(φ_{2α} − e^{−2αt} P_t φ_{2α})(x)` for absorbed Brownian motion, `φ_{2α}(x) = e^{−γx}`.
pub fn nu0_weight(alpha: f64, t: f64, x: f64) -> f64 {
    let g = 2.0 * alpha.sqrt();
    let st = t.sqrt();
    (-g * x).exp() * norm_cdf((g * t - x) / st) + (g * x).exp() * norm_cdf(-(x + g * t) / st)
}

/// Draws `u` with density `4u Φ(−u)` on `(0, ∞)` by rejection from a Rayleigh proposal.
fn sample_entrance_scale<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let e: f64 = rng.sample(Exp1);
        let u = (2.0 * e).sqrt();
        let accept = libm::erfc(u * std::f64::consts::FRAC_1_SQRT_2) * (0.5 * u * u).exp();
        if rng.random::<f64>() < accept {
            return u;
        }
    }
}

/// `E_{ν₀}[F] ≈ t⁻¹ ∫ E_x[F] (φ_{2α} − e^{−2αt}P_tφ_{2α})(x) dx` on the ladder `t₀, t₀/2, t₀/4`.
///
/// Start points are importance-sampled as `x = √t·u`; the same `u` and the same
/// path stream are used on every rung, so the differences between rungs have
/// small variance.
pub fn nu0_finite_difference(model: ProcessModel, f: &Functional, cfg: &McConfig) -> Result<Nu0Ladder> {
    cfg.validate()?;
    Weighting::Nu0.validate(model)?;
    f.validate(model)?;
    let t0 = cfg.nu0_t0;
    let times = [t0, t0 / 2.0, t0 / 4.0];
    let m = reduce_indexed(
        cfg.paths,
        8,
        cfg.workers,
        || Scratch::new(model),
        |i, s, out| {
            let mut rng = rng_for(cfg.seed, i);
            let u = sample_entrance_scale(&mut rng);
            let density_u = 4.0 * u * norm_cdf(-u);
            for (k, &t) in times.iter().enumerate() {
                let st = t.sqrt();
                let x = st * u;
                // q(x) = density_u / √t
                let factor = nu0_weight(cfg.alpha, t, x) * st / (t * density_u);
                let mut r = rng.clone();
                let (v, tail) = sample_functional(model, f, x, cfg, i, &mut r, s)?;
                out[k] = v * factor;
                out[4 + k] = tail * factor;
            }
            out[3] = 2.0 * out[2] - out[1];
            out[7] = 2.0 * out[6] + out[5];
            Ok(())
        },
    )?;
    let est = |k: usize| McEstimate::from_moments(&m[k], &m[4 + k], cfg.seed);
    Ok(Nu0Ladder {
        times,
        rungs: [est(0), est(1), est(2)],
        extrapolated: est(3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentityReport {
    pub window: Interval,
    /// Bound on the `m`-part outside the window.
    pub exterior_bound: f64,
    /// `α E_m[(Ã_∞)²]` over the window.
    pub m_part: McEstimate,
    /// The same term by quadrature.
    pub m_part_quadrature: f64,
    /// `E_κ[(Ã_∞)²]` by Monte Carlo, for models with killing.
    pub kappa_mc: Option<McEstimate>,
    pub kappa_term: f64,
    pub nu0_term: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub z_score: f64,
}

/// Window for `E_m` with a certified bound on what lies outside it.
///
/// Outside the support, `E_x[(Ã_∞)²] ≤ 2‖U_αμ‖_∞ U_αμ(x)` and the potential
/// decays like `e^{−√(2α)·dist}`.
pub fn m_window(
    model: ProcessModel,
    alpha: f64,
    mu: &SmoothMeasure,
    requested: Option<Interval>,
    cfg: &McConfig,
) -> Result<(Interval, f64)> {
    let hull = mu
        .support_hull()
        .ok_or_else(|| Error::Config("the zero measure has no window".into()))?;
    if !hull.is_bounded() {
        return Err(Error::Config(format!("support {hull} is not compact")));
    }
    if !model.is_kernel_based() {
        // These paths never leave the orbit of their start, so A vanishes off it.
        let w = match model {
            ProcessModel::FlipJump => {
                let m = hull.lo.abs().max(hull.hi.abs());
                Interval::new(-m, m)
            }
            _ => hull,
        };
        if let Some(r) = requested {
            if !(r.lo <= w.lo && r.hi >= w.hi) {
                return Err(Error::Config(format!("window {r} does not cover {w}")));
            }
            return Ok((r, 0.0));
        }
        return Ok((w, 0.0));
    }
    let pot = Potential::new(model, alpha, mu, cfg.quad_tol)?;
    let mass = mu.total_mass(cfg.quad_tol)?;
    let k = (2.0 * alpha).sqrt();
    let coef = alpha * 2.0 * pot.sup_bound() * mass / k / k;
    let absorbed = model == ProcessModel::AbsorbedBm;
    let bound = |left: f64, right: f64| {
        let l = if absorbed { 0.0 } else { (-k * left).exp() };
        coef * (l + (-k * right).exp())
    };
    match requested {
        Some(w) => {
            if !(w.lo <= hull.lo && w.hi >= hull.hi) || (absorbed && w.lo < 0.0) {
                return Err(Error::Config(format!("window {w} does not cover the support {hull}")));
            }
            let b = bound(hull.lo - w.lo, w.hi - hull.hi);
            Ok((w, b))
        }
        None => {
            let sides = if absorbed { 1.0 } else { 2.0 };
            let d = ((sides * coef / cfg.exterior_tol).ln() / k).max(0.0);
            if d > MAX_EXTENSION / k {
                return Err(Error::Config(format!(
                    "exterior bound {} needs a window extension of {d}, beyond reach",
                    cfg.exterior_tol
                )));
            }
            let lo = if absorbed { 0.0 } else { hull.lo - d };
            let w = Interval::new(lo, hull.hi + d);
            Ok((w, bound(d, d)))
        }
    }
}

/// Both sides of `E_{αm + κ/2 + ν₀/2}[(Ã_∞)²] = ℰ_α(U_αμ)`.
pub fn energy_identity_check(
    model: ProcessModel,
    alpha: f64,
    mu: &SmoothMeasure,
    window: Option<Interval>,
    cfg: &McConfig,
) -> Result<EnergyIdentityReport> {
    let mut cfg = *cfg;
    cfg.alpha = alpha;
    cfg.validate()?;
    let spec = PcafSpec::for_measure(mu, cfg.dt.sqrt())?;
    let (window, exterior_bound) = m_window(model, alpha, mu, window, &cfg)?;
    let f = Functional::DiscountedSq { pcaf: spec };
    let m_part = expect(model, &Weighting::MWindow { window }, &f, &cfg)?.scaled(alpha);
    let kappa_mc = if model.has_killing() {
        let hull = mu.support_hull().expect("nonzero measure");
        Some(expect(model, &Weighting::Kappa { window: hull }, &f, &cfg)?)
    } else {
        None
    };
    let tol = cfg.quad_tol;
    let kappa_term = kernels::kappa_pairing(model, alpha, mu, tol)?;
    let nu0_term = kernels::nu0_pairing(model, alpha, mu, tol)?;
    let rhs = kernels::energy(model, alpha, mu, mu, tol)?;
    let m_part_quadrature = kernels::m_pairing(model, alpha, mu, tol)?;
    let lhs = m_part.mean + 0.5 * kappa_term + 0.5 * nu0_term;
    Ok(EnergyIdentityReport {
        window,
        exterior_bound,
        m_part,
        m_part_quadrature,
        kappa_mc,
        kappa_term,
        nu0_term,
        lhs,
        rhs,
        z_score: (lhs - rhs) / m_part.std_error,
    })
}

/// Polynomial in `g` with integer coefficients, lowest degree first.
type Poly = Vec<BigInt>;

fn poly(coeffs: &[i64]) -> Poly {
    coeffs.iter().map(|&c| BigInt::from(c)).collect()
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![BigInt::default(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    while out.len() > 1 && out.last().is_some_and(|c| *c == BigInt::default()) {
        out.pop();
    }
    out
}

/// Checks exactly, as rational functions of `g`, that for the static-killing model
/// `(α + g/2) · 2/((α + g)(2α + g)) = 1/(α + g)`.
///
/// The left side is the `αm + κ/2` weight times `E_x[(Ã_∞)²]/f(x)²`, the right
/// side is the integrand of `ℰ_α(U_αμ)` over `f²`.
pub fn killed_static_symbolic_identity(alpha: u32) -> bool {
    let a = alpha as i64;
    // 2(α + g/2) = 2α + g
    let lhs_num = poly(&[2 * a, 1]);
    let lhs_den = poly_mul(&poly(&[a, 1]), &poly(&[2 * a, 1]));
    let (rhs_num, rhs_den) = (poly(&[1]), poly(&[a, 1]));
    poly_mul(&lhs_num, &rhs_den) == poly_mul(&rhs_num, &lhs_den)
}

/// `E_w[sup_{t ≤ T} |A_t − B_t|²]` on shared paths.
pub fn sup_l2_distance(
    model: ProcessModel,
    a: &PcafSpec,
    b: &PcafSpec,
    w: &Weighting,
    horizon: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    expect(
        model,
        w,
        &Functional::SupSqGap { a: *a, b: *b },
        &cfg.with_horizon(horizon),
    )
}

/// `E_w[(Ã_∞ − B̃_∞)²]` on shared paths, truncated at `cfg.horizon`.
pub fn discounted_l2_distance(
    model: ProcessModel,
    a: &PcafSpec,
    b: &PcafSpec,
    w: &Weighting,
    cfg: &McConfig,
) -> Result<McEstimate> {
    expect(model, w, &Functional::DiscountedSqGap { a: *a, b: *b }, cfg)
}

enum PotentialEval {
    Exact(Potential),
    Table(TabulatedPotential),
}

impl PotentialEval {
    fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialEval::Exact(p) => p.eval(x),
            PotentialEval::Table(t) => t.eval(x),
        }
    }
}

/// `E_x[M_T]` for `M_t = U(X_t) − U(X_0) − α∫_0^t U(X_s) ds + A_t`, `U = U_αμ`, `U(∂) = 0`.
pub fn fukushima_residual(
    model: ProcessModel,
    alpha: f64,
    mu: &SmoothMeasure,
    x: f64,
    horizon: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let mut cfg = cfg.with_horizon(horizon);
    cfg.alpha = alpha;
    cfg.validate()?;
    model.check_state(x)?;
    if mu.is_zero() {
        return Ok(McEstimate {
            mean: 0.0,
            std_error: 0.0,
            n: cfg.paths,
            seed: cfg.seed,
            tail_bound: 0.0,
        });
    }
    let spec = PcafSpec::for_measure(mu, cfg.dt.sqrt())?;
    let pot = Potential::new(model, alpha, mu, cfg.quad_tol)?;
    let u = if pot.is_closed_form() || !model.is_kernel_based() {
        PotentialEval::Exact(pot)
    } else {
        let hull = mu.support_hull().expect("nonzero measure");
        let reach = 8.0 * horizon.sqrt() + 1.0;
        let lo = if model == ProcessModel::AbsorbedBm {
            0.0
        } else {
            hull.lo.min(x) - reach
        };
        let w = Interval::new(lo, hull.hi.max(x) + reach);
        PotentialEval::Table(pot.tabulate(w, 40_000))
    };
    let u0 = u.eval(x);
    let m = reduce_indexed(
        cfg.paths,
        1,
        cfg.workers,
        || Path::empty(model),
        |i, path, out| {
            let mut rng = rng_for(cfg.seed, i);
            simulate::simulate_into(model, x, &cfg.sim(i), &mut rng, path)?;
            let a = pcaf::total_on_path(&spec, path);
            let integral = pcaf::path_integral(path, |y| u.eval(y));
            let end = path.end();
            let u_end = if is_cemetery(end) { 0.0 } else { u.eval(end) };
            out[0] = u_end - u0 - alpha * integral + a;
            Ok(())
        },
    )?;
    Ok(McEstimate::from_moments(&m[0], &Moments::default(), cfg.seed))
}

/// `E_x[e^{−α σ_y}]` for free Brownian motion, with its exact value `e^{−√(2α)|x−y|}`.
pub fn hitting_laplace_check(x: f64, y: f64, cfg: &McConfig) -> Result<(McEstimate, f64)> {
    let est = expect(
        ProcessModel::FreeBm,
        &Weighting::PointMass { x },
        &Functional::Hitting { level: y },
        cfg,
    )?;
    let exact =
        kernels::green(ProcessModel::FreeBm, cfg.alpha, x, y)? / kernels::green(ProcessModel::FreeBm, cfg.alpha, y, y)?;
    Ok((est, exact))
}

/// Continuous, compactly supported test functions for vague convergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFn {
    /// `max(0, 1 − |x − c|/w)`
    Tent { center: f64, half_width: f64 },
    /// `x` restricted to `window` (continuous on the supports it is used with).
    Identity { window: Interval },
}

impl TestFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFn::Tent { center, half_width } => (1.0 - (x - center).abs() / half_width).max(0.0),
            TestFn::Identity { window } => {
                if window.contains_closed(x) {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    pub fn support(&self) -> Interval {
        match *self {
            TestFn::Tent { center, half_width } => Interval::new(center - half_width, center + half_width),
            TestFn::Identity { window } => window,
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            TestFn::Tent { half_width, .. } => 1.0 / half_width,
            TestFn::Identity { .. } => 1.0,
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match *self {
            TestFn::Tent { center, half_width } => vec![center - half_width, center, center + half_width],
            TestFn::Identity { window } => vec![window.lo, window.hi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VagueTable {
    /// `values[i][j] = ∫ f_j dμ_i`
    pub values: Vec<Vec<f64>>,
    pub trends: Vec<TrendTest>,
}

/// `∫ f dμ_n` for each measure and test function.
pub fn vague_probe(mus: &[SmoothMeasure], fns: &[TestFn], tol: f64) -> Result<VagueTable> {
    let mut values = Vec::with_capacity(mus.len());
    for mu in mus {
        let mut row = Vec::with_capacity(fns.len());
        for f in fns {
            let mut opts = IntegrateOptions::with_tol(tol);
            opts.lipschitz = Some(f.lipschitz());
            row.push(mu.integrate_with_breaks(&|x| f.eval(x), &f.support(), &f.kinks(), opts)?);
        }
        values.push(row);
    }
    let trends = (0..fns.len())
        .map(|j| kendall_trend(&values.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    Ok(VagueTable { values, trends })
}

/// `E[(T∧ζ)²]` for `ζ ~ Exp(g)`.
pub fn static_sq_stopped_lifetime(g: f64, horizon: f64) -> f64 {
    let gt = g * horizon;
    if gt < 1e-4 {
        // series of 2∫_0^T s e^{−gs} ds
        return horizon * horizon * (1.0 - 2.0 * gt / 3.0 + gt * gt / 4.0);
    }
    2.0 / (g * g) * (1.0 - (-gt).exp() * (1.0 + gt))
}

/// Which weighting a static-killing closed form integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticWeight {
    M,
    Kappa,
}

/// `E_w[sup_{t≤T}|A_t − B_t|²] = ∫_W (f_a − f_b)² E_x[(T∧ζ)²] w(dx)` for the static-killing model,
/// where the two PCAFs are densities.
pub fn static_sup_distance(
    a: &PcafSpec,
    b: &PcafSpec,
    weight: StaticWeight,
    window: Interval,
    horizon: f64,
    tol: f64,
) -> Result<f64> {
    let model = ProcessModel::KilledStatic;
    if !(window.lo >= 0.0 && window.hi <= 1.0) {
        return Err(Error::Domain(format!("window {window} leaves (0, 1)")));
    }
    for s in [a, b] {
        if !matches!(s, PcafSpec::Density { .. }) {
            return Err(Error::Unsupported("static closed forms need density PCAFs".into()));
        }
    }
    let integrand = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let g = model.killing_density(x).expect("static model kills");
        let d = a.rate(x) - b.rate(x);
        let w = match weight {
            StaticWeight::M => 1.0,
            StaticWeight::Kappa => g,
        };
        w * d * d * static_sq_stopped_lifetime(g, horizon)
    };
    let mut breaks = Vec::new();
    for s in [a, b] {
        if let PcafSpec::Density { f, support } = s {
            if let Some(iv) = support {
                breaks.extend([iv.lo, iv.hi]);
            }
            breaks.extend(f.oscillation_breaks(window.lo, window.hi));
        }
    }
    let r = quad::integrate(
        integrand,
        window.lo,
        window.hi,
        &breaks,
        QuadOptions {
            abs_tol: tol,
            rel_tol: 0.0,
            max_panels: 20_000,
        },
    )?;
    Ok(r.value)
}
