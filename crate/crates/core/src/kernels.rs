//! Green's functions, α-potentials, energies and the metric ρ.
//!
//! For the two Brownian models every measure is split into atoms, uniform
//! cells and smooth density pieces. Atoms and cells have closed-form potentials
//! and pair energies against the exponential kernels; only smooth pieces need
//! quadrature. The Cantor limit measure is replaced by its level-`d`
//! approximation, whose energy error decays like `6^{-d}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measures::{DensityFn, IntegrateOptions, SignedCombination, SmoothMeasure};
use crate::models::{check_alpha, ProcessModel};
use crate::quad::{self, QuadOptions};
use crate::reduce::pairwise_sum;
use crate::special::integrated_norm_cdf;
use crate::{cantor, special};

/// Green's function of a kernel-based model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    pub model: ProcessModel,
    pub alpha: f64,
    k: f64,
    c0: f64,
    absorbed: bool,
}

impl GreenKernel {
    pub fn new(model: ProcessModel, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !model.is_kernel_based() {
            return Err(Error::Unsupported(format!(
                "{model} has no Green's function; use resolvent_apply"
            )));
        }
        let k = (2.0 * alpha).sqrt();
        Ok(Self {
            model,
            alpha,
            k,
            c0: 1.0 / k,
            absorbed: model == ProcessModel::AbsorbedBm,
        })
    }

    /// `g_α(x, y)`; symmetric in its arguments by construction.
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let free = (-self.k * (x - y).abs()).exp();
        if self.absorbed {
            self.c0 * (free - (-self.k * (x + y)).exp())
        } else {
            self.c0 * free
        }
    }

    /// `sup |∂_x g_α|`.
    pub fn lipschitz(&self) -> f64 {
        if self.absorbed {
            2.0
        } else {
            1.0
        }
    }

    /// `sup g_α`.
    pub fn sup(&self) -> f64 {
        self.c0
    }

    /// `∫_0^ℓ e^{-k s} ds`
    #[inline]
    fn e(&self, len: f64) -> f64 {
        if len <= 0.0 {
            return 0.0;
        }
        -(-self.k * len).exp_m1() / self.k
    }

    /// Second antiderivative of `e^{-k|u|}` vanishing with its slope at 0.
    #[inline]
    fn h(&self, u: f64) -> f64 {
        let ku = self.k * u.abs();
        (ku + (-ku).exp_m1()) / (self.k * self.k)
    }

    /// `∫_a^b e^{-k|x-y|} dy`
    #[inline]
    fn free_cell(&self, x: f64, a: f64, b: f64) -> f64 {
        if x <= a {
            (-self.k * (a - x)).exp() * self.e(b - a)
        } else if x >= b {
            (-self.k * (x - b)).exp() * self.e(b - a)
        } else {
            self.e(x - a) + self.e(b - x)
        }
    }

    /// `∫_a^b g(x, y) dy`
    #[inline]
    fn cell_potential(&self, x: f64, a: f64, b: f64) -> f64 {
        let mut v = self.free_cell(x, a, b);
        if self.absorbed {
            v -= (-self.k * (x + a)).exp() * self.e(b - a);
        }
        self.c0 * v
    }

    /// `∫_I ∫_J g(x, y) dy dx`
    fn cell_cell(&self, i: (f64, f64), j: (f64, f64)) -> f64 {
        let (a, b) = i;
        let (c, d) = j;
        let free = if b <= c {
            (-self.k * (c - b)).exp() * self.e(b - a) * self.e(d - c)
        } else if d <= a {
            (-self.k * (a - d)).exp() * self.e(b - a) * self.e(d - c)
        } else {
            self.h(b - c) - self.h(a - c) - self.h(b - d) + self.h(a - d)
        };
        let mut v = free;
        if self.absorbed {
            v -= (-self.k * (a + c)).exp() * self.e(b - a) * self.e(d - c);
        }
        self.c0 * v
    }
}

/// `g_α(x, y)` for the kernel-based models.
pub fn green(model: ProcessModel, alpha: f64, x: f64, y: f64) -> Result<f64> {
    let g = GreenKernel::new(model, alpha)?;
    model.check_state(x)?;
    model.check_state(y)?;
    Ok(g.eval(x, y))
}

/// `R_α f(x)`.
pub fn resolvent_apply<F: Fn(f64) -> f64>(model: ProcessModel, alpha: f64, f: F, x: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    model.check_state(x)?;
    let v = match model {
        ProcessModel::KilledStatic => f(x) / (alpha + 1.0 / (x * x)),
        ProcessModel::FlipJump => {
            let (p, m) = (f(x), f(-x));
            0.5 * (p + m) / alpha + 0.5 * (p - m) / (alpha + 2.0)
        }
        ProcessModel::FreeBm | ProcessModel::AbsorbedBm => {
            let g = GreenKernel::new(model, alpha)?;
            let opts = QuadOptions::abs(tol / 2.0);
            let right = quad::integrate_to_infinity(|y| g.eval(x, y) * f(y), x, opts)?.value;
            let left = if model == ProcessModel::AbsorbedBm {
                quad::integrate(|y| g.eval(x, y) * f(y), 0.0, x, &[], opts)?.value
            } else {
                quad::integrate_from_neg_infinity(|y| g.eval(x, y) * f(y), x, opts)?.value
            };
            left + right
        }
    };
    if !v.is_finite() {
        return Err(Error::Numeric(format!("R_α f({x}) is not finite")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Atom {
        x: f64,
        w: f64,
    },
    /// Uniform density `rho` on `[a, b]`.
    Cell {
        a: f64,
        b: f64,
        rho: f64,
    },
    Smooth {
        f: DensityFn,
        a: f64,
        b: f64,
        c: f64,
    },
}

/// Smallest level whose energy error bound `6^{-d}` is below `tol`.
pub fn cantor_energy_depth(tol: f64) -> Result<u32> {
    const MAX: u32 = 14;
    let d = ((1.0 / tol).ln() / 6f64.ln()).ceil().max(4.0) as u32;
    if d > MAX {
        return Err(Error::Quadrature {
            estimate: f64::NAN,
            error: 6f64.powi(-(MAX as i32)),
        });
    }
    Ok(d)
}

fn decompose(mu: &SmoothMeasure, scale: f64, tol: f64, out: &mut Vec<Piece>) -> Result<()> {
    if scale == 0.0 {
        return Ok(());
    }
    match mu {
        SmoothMeasure::Dirac { x } => out.push(Piece::Atom { x: *x, w: scale }),
        SmoothMeasure::Density { f, support } => {
            if !support.is_bounded() {
                return Err(Error::Unsupported(format!(
                    "energies need a bounded support, got {support}"
                )));
            }
            if support.len() == 0.0 {
                return Ok(());
            }
            match f {
                DensityFn::Const { c } => out.push(Piece::Cell {
                    a: support.lo,
                    b: support.hi,
                    rho: scale * c,
                }),
                DensityFn::Spike { .. } => out.push(Piece::Cell {
                    a: support.lo,
                    b: support.hi,
                    rho: scale * f.eval(0.0),
                }),
                _ => out.push(Piece::Smooth {
                    f: *f,
                    a: support.lo,
                    b: support.hi,
                    c: scale,
                }),
            }
        }
        SmoothMeasure::CantorLevel { n } => cantor_cells(*n, scale, out),
        SmoothMeasure::CantorLimit => cantor_cells(cantor_energy_depth(tol)?, scale, out),
        SmoothMeasure::WeightedSum { terms } => {
            for (c, m) in terms {
                decompose(m, scale * c, tol, out)?;
            }
        }
    }
    Ok(())
}

fn cantor_cells(n: u32, scale: f64, out: &mut Vec<Piece>) {
    let rho = scale * 1.5f64.powi(n as i32);
    out.extend(cantor::level_intervals(n).into_iter().map(|iv| Piece::Cell {
        a: iv.lo,
        b: iv.hi,
        rho,
    }));
}

fn piece_breaks(p: &Piece) -> [f64; 2] {
    match *p {
        Piece::Atom { x, .. } => [x, x],
        Piece::Cell { a, b, .. } | Piece::Smooth { a, b, .. } => [a, b],
    }
}

/// `U_α μ` for a fixed measure.
#[derive(Debug, Clone)]
pub struct Potential {
    pub model: ProcessModel,
    pub alpha: f64,
    pub mu: SmoothMeasure,
    kernel: Option<GreenKernel>,
    closed: Vec<Piece>,
    smooth: Vec<Piece>,
    tol: f64,
    mass: f64,
}

impl Potential {
    pub fn new(model: ProcessModel, alpha: f64, mu: &SmoothMeasure, tol: f64) -> Result<Self> {
        check_alpha(alpha)?;
        mu.validate()?;
        check_support(model, mu)?;
        let kernel = GreenKernel::new(model, alpha).ok();
        let mut closed = Vec::new();
        let mut smooth = Vec::new();
        if kernel.is_some() {
            let mut pieces = Vec::new();
            decompose(mu, 1.0, tol, &mut pieces)?;
            for p in pieces {
                match p {
                    Piece::Smooth { .. } => smooth.push(p),
                    _ => closed.push(p),
                }
            }
        } else if !mu.is_absolutely_continuous() {
            return Err(Error::Unsupported(format!(
                "{model} only has potentials of absolutely continuous measures"
            )));
        }
        let mass = mu.total_mass(tol)?;
        Ok(Self {
            model,
            alpha,
            mu: mu.clone(),
            kernel,
            closed,
            smooth,
            tol,
            mass,
        })
    }

    /// `U_α μ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.kernel {
            Some(g) => {
                let mut v = self.closed_part(&g, x);
                for p in &self.smooth {
                    v += smooth_potential(&g, p, x, self.tol).unwrap_or(f64::NAN);
                }
                v
            }
            None => resolvent_density(self.model, self.alpha, &self.mu, x),
        }
    }

    fn closed_part(&self, g: &GreenKernel, x: f64) -> f64 {
        let mut v = 0.0;
        for p in &self.closed {
            v += match *p {
                Piece::Atom { x: y, w } => w * g.eval(x, y),
                Piece::Cell { a, b, rho } => rho * g.cell_potential(x, a, b),
                Piece::Smooth { .. } => unreachable!(),
            };
        }
        v
    }

    /// `sup_x U_α μ(x)`, bounded by the total mass times `sup g_α`.
    pub fn sup_bound(&self) -> f64 {
        match self.kernel {
            Some(g) => self.mass * g.sup(),
            None => match self.mu.support_hull() {
                Some(h) => sup_density(&self.mu, &h) / self.alpha,
                None => 0.0,
            },
        }
    }

    /// Lipschitz bound of `U_α μ` (kernel models only).
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.kernel.map(|g| self.mass * g.lipschitz())
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.mu.breakpoints()
    }

    /// Samples the potential on a uniform grid for fast repeated evaluation.
    pub fn tabulate(&self, window: Interval, cells: usize) -> TabulatedPotential {
        let h = window.len() / cells as f64;
        let values = (0..=cells)
            .into_par_iter()
            .map(|i| self.eval(window.lo + h * i as f64))
            .collect();
        TabulatedPotential {
            window,
            step: h,
            values,
            outside: Box::new(self.clone()),
        }
    }

    /// True when every piece has a closed form (no quadrature per evaluation).
    pub fn is_closed_form(&self) -> bool {
        self.smooth.is_empty()
    }
}

/// Linear interpolation of a potential on a grid, exact evaluation outside it.
#[derive(Debug, Clone)]
pub struct TabulatedPotential {
    window: Interval,
    step: f64,
    values: Vec<f64>,
    outside: Box<Potential>,
}

impl TabulatedPotential {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if !self.window.contains_closed(x) {
            return self.outside.eval(x);
        }
        let s = (x - self.window.lo) / self.step;
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

fn sup_density(mu: &SmoothMeasure, w: &Interval) -> f64 {
    match mu {
        SmoothMeasure::Density { f, support } => match support.intersect(w) {
            Some(iv) => f.sup_on(&iv),
            None => 0.0,
        },
        SmoothMeasure::CantorLevel { n } => 1.5f64.powi(*n as i32),
        SmoothMeasure::WeightedSum { terms } => terms.iter().map(|(c, m)| c * sup_density(m, w)).sum(),
        _ => f64::INFINITY,
    }
}

fn check_support(model: ProcessModel, mu: &SmoothMeasure) -> Result<()> {
    let Some(hull) = mu.support_hull() else {
        return Ok(());
    };
    let space = model.state_space();
    if hull.lo < space.lo || hull.hi > space.hi {
        return Err(Error::Domain(format!(
            "measure supported on {hull} leaves the state space {space} of {model}"
        )));
    }
    Ok(())
}

/// `R_α f_μ(x)` for the non-kernel models, `f_μ` the density of `μ`.
fn resolvent_density(model: ProcessModel, alpha: f64, mu: &SmoothMeasure, x: f64) -> f64 {
    match model {
        ProcessModel::KilledStatic => {
            if x <= 0.0 || x >= 1.0 {
                return 0.0;
            }
            let fx = mu.density_at(x);
            if fx == 0.0 {
                return 0.0;
            }
            // f / (α + x⁻²) written to stay finite as x → 0
            fx * x * x / (alpha * x * x + 1.0)
        }
        ProcessModel::FlipJump => {
            let (p, m) = (mu.density_at(x), mu.density_at(-x));
            0.5 * (p + m) / alpha + 0.5 * (p - m) / (alpha + 2.0)
        }
        _ => unreachable!("kernel models use the Green's function"),
    }
}

fn smooth_potential(g: &GreenKernel, p: &Piece, x: f64, tol: f64) -> Result<f64> {
    let Piece::Smooth { f, a, b, c } = *p else {
        unreachable!()
    };
    let mut bp = f.oscillation_breaks(a, b);
    bp.push(x);
    let r = quad::integrate(|y| f.eval(y) * g.eval(x, y), a, b, &bp, QuadOptions::abs(tol))?;
    Ok(c * r.value)
}

fn pair_energy(g: &GreenKernel, p: &Piece, q: &Piece, tol: f64) -> Result<f64> {
    use Piece::*;
    Ok(match (*p, *q) {
        (Atom { x, w }, Atom { x: y, w: v }) => w * v * g.eval(x, y),
        (Atom { x, w }, Cell { a, b, rho }) | (Cell { a, b, rho }, Atom { x, w }) => {
            w * rho * g.cell_potential(x, a, b)
        }
        (Cell { a, b, rho }, Cell { a: c, b: d, rho: r }) => rho * r * g.cell_cell((a, b), (c, d)),
        (Smooth { f, a, b, c }, other) | (other, Smooth { f, a, b, c }) => {
            let mut bp = f.oscillation_breaks(a, b);
            let inner_tol = tol / (4.0 * (b - a).max(1.0));
            let u = |y: f64| -> f64 {
                match other {
                    Atom { x, w } => w * g.eval(y, x),
                    Cell { a, b, rho } => rho * g.cell_potential(y, a, b),
                    Smooth { .. } => smooth_potential(g, &other, y, inner_tol).unwrap_or(f64::NAN),
                }
            };
            bp.extend(piece_breaks(&other));
            let r = quad::integrate(|y| f.eval(y) * u(y), a, b, &bp, QuadOptions::abs(tol / 2.0))?;
            c * r.value
        }
    })
}

/// `ℰ_α(U_α μ, U_α ν)`.
///
/// Kernel models use `∫∫ g_α dμ dν`. The static and flip models have no kernel,
/// so both measures must have densities and `∫ f_μ R_α f_ν dx` is used.
pub fn energy(model: ProcessModel, alpha: f64, mu: &SmoothMeasure, nu: &SmoothMeasure, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    mu.validate()?;
    nu.validate()?;
    check_support(model, mu)?;
    check_support(model, nu)?;
    if mu.is_zero() || nu.is_zero() {
        return Ok(0.0);
    }
    match GreenKernel::new(model, alpha) {
        Ok(g) => kernel_energy(&g, mu, nu, tol),
        Err(_) => {
            if !(mu.is_absolutely_continuous() && nu.is_absolutely_continuous()) {
                return Err(Error::Unsupported(format!(
                    "{model} energies need absolutely continuous measures"
                )));
            }
            let mut bp = nu.breakpoints();
            if model == ProcessModel::FlipJump {
                bp.extend(nu.breakpoints().iter().map(|b| -b));
            }
            mu.integrate_with_breaks(
                &|x| resolvent_density(model, alpha, nu, x),
                &Interval::REAL_LINE,
                &bp,
                IntegrateOptions::with_tol(tol),
            )
        }
    }
}

fn kernel_energy(g: &GreenKernel, mu: &SmoothMeasure, nu: &SmoothMeasure, tol: f64) -> Result<f64> {
    let mut p = Vec::new();
    let mut q = Vec::new();
    decompose(mu, 1.0, tol, &mut p)?;
    decompose(nu, 1.0, tol, &mut q)?;
    let smooth_pairs = p
        .iter()
        .chain(&q)
        .filter(|x| matches!(x, Piece::Smooth { .. }))
        .count()
        .max(1);
    let pair_tol = tol / (smooth_pairs * q.len().max(p.len())).max(1) as f64;
    let rows: Vec<Result<f64>> = p
        .par_iter()
        .map(|pi| {
            let vals = q
                .iter()
                .map(|qj| pair_energy(g, pi, qj, pair_tol))
                .collect::<Result<Vec<f64>>>()?;
            Ok(pairwise_sum(&vals))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&rows))
}

/// `ℰ_α(U_α μ − U_α ν)` for a signed pair.
///
/// Kernel models expand into the three nonnegative bilinear terms. For the
/// static and flip models the terms can diverge separately (for example
/// `μ = (1 + x⁻²) dx` on the static model), so the quadratic form is applied
/// pointwise to `f_μ − f_ν` under a single integral.
pub fn signed_energy(model: ProcessModel, alpha: f64, pair: &SignedCombination, tol: f64) -> Result<f64> {
    let (mu, nu) = (&pair.pos, &pair.neg);
    if model.is_kernel_based() {
        let a = energy(model, alpha, mu, mu, tol)?;
        let b = energy(model, alpha, mu, nu, tol)?;
        let c = energy(model, alpha, nu, nu, tol)?;
        let v = a - 2.0 * b + c;
        let threshold = 3.0 * tol + 16.0 * f64::EPSILON * (a.abs() + 2.0 * b.abs() + c.abs());
        return clamp_nonnegative(v, threshold);
    }
    check_alpha(alpha)?;
    mu.validate()?;
    nu.validate()?;
    check_support(model, mu)?;
    check_support(model, nu)?;
    if !(mu.is_absolutely_continuous() && nu.is_absolutely_continuous()) {
        return Err(Error::Unsupported(format!(
            "{model} energies need absolutely continuous measures"
        )));
    }
    let hull = match (mu.support_hull(), nu.support_hull()) {
        (Some(a), Some(b)) => a.hull(&b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Ok(0.0),
    };
    let d = |x: f64| mu.density_at(x) - nu.density_at(x);
    let mut bp = mu.breakpoints();
    bp.extend(nu.breakpoints());
    bp.extend(oscillation_breaks(mu, &hull));
    bp.extend(oscillation_breaks(nu, &hull));
    let (dom, integrand): (Interval, Box<dyn Fn(f64) -> f64>) = match model {
        ProcessModel::KilledStatic => (
            hull,
            Box::new(|x: f64| {
                let v = d(x);
                v * v * x * x / (alpha * x * x + 1.0)
            }),
        ),
        _ => {
            let m = hull.lo.abs().max(hull.hi.abs());
            let mirrored: Vec<f64> = bp.iter().map(|b| -b).collect();
            bp.extend(mirrored);
            (
                Interval::new(-m, m),
                Box::new(|x: f64| {
                    let (p, q) = (d(x), d(-x));
                    p * (0.5 * (p + q) / alpha + 0.5 * (p - q) / (alpha + 2.0))
                }),
            )
        }
    };
    let r = quad::integrate(
        integrand,
        dom.lo,
        dom.hi,
        &bp,
        QuadOptions {
            abs_tol: tol,
            rel_tol: 0.0,
            max_panels: 20_000,
        },
    )?;
    clamp_nonnegative(r.value, tol)
}

fn oscillation_breaks(mu: &SmoothMeasure, hull: &Interval) -> Vec<f64> {
    match mu {
        SmoothMeasure::Density { f, support } => match support.intersect(hull) {
            Some(iv) => f.oscillation_breaks(iv.lo, iv.hi),
            None => Vec::new(),
        },
        SmoothMeasure::WeightedSum { terms } => terms.iter().flat_map(|(_, m)| oscillation_breaks(m, hull)).collect(),
        _ => Vec::new(),
    }
}

fn clamp_nonnegative(v: f64, threshold: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if -v <= threshold {
        Ok(0.0)
    } else {
        Err(Error::Numeric(format!(
            "energy of a difference came out {v}, below the clamp threshold -{threshold}"
        )))
    }
}

/// `ρ(μ, ν)²` at `α = 1`.
pub fn rho_squared(model: ProcessModel, mu: &SmoothMeasure, nu: &SmoothMeasure, tol: f64) -> Result<f64> {
    signed_energy(model, 1.0, &SignedCombination::new(mu.clone(), nu.clone()), tol)
}

/// The metric `ρ(μ, ν) = ℰ_1(U_1 μ − U_1 ν)^{1/2}`.
pub fn rho(model: ProcessModel, mu: &SmoothMeasure, nu: &SmoothMeasure, tol: f64) -> Result<f64> {
    Ok(rho_squared(model, mu, nu, tol)?.sqrt())
}

/// `2 ∫ w(x) U_α μ(x) μ(dx)` for a weight `w`.
fn weighted_self_pairing<W: Fn(f64) -> f64>(
    model: ProcessModel,
    alpha: f64,
    mu: &SmoothMeasure,
    w: W,
    tol: f64,
) -> Result<f64> {
    if mu.is_zero() {
        return Ok(0.0);
    }
    let pot = Potential::new(model, alpha, mu, tol / 4.0)?;
    let mut opts = IntegrateOptions::with_tol(tol / 2.0);
    opts.lipschitz = pot.lipschitz_bound().map(|l| 2.0 * l + 1.0);
    let v = mu.integrate_with_breaks(&|x| w(x) * pot.eval(x), &Interval::REAL_LINE, &pot.breakpoints(), opts)?;
    Ok(2.0 * v)
}

/// `E_{ν₀}[(Ã_∞)²] = 2 ∫ φ_{2α} U_α μ dμ`; zero unless the model exits continuously.
pub fn nu0_pairing(model: ProcessModel, alpha: f64, mu: &SmoothMeasure, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if model != ProcessModel::AbsorbedBm {
        return Ok(0.0);
    }
    let k = (4.0 * alpha).sqrt();
    weighted_self_pairing(model, alpha, mu, |x| (-k * x).exp(), tol)
}

/// `E_κ[(Ã_∞)²] = 2 ∫ (1 − 2α R_{2α}1 − φ_{2α}) U_α μ dμ`; zero without killing.
pub fn kappa_pairing(model: ProcessModel, alpha: f64, mu: &SmoothMeasure, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !model.has_killing() {
        return Ok(0.0);
    }
    // 1 − 2α/(2α + g) = g/(2α + g) = 1/(2α x² + 1) for g = x⁻²
    weighted_self_pairing(model, alpha, mu, |x| 1.0 / (2.0 * alpha * x * x + 1.0), tol)
}

/// `α E_m[(Ã_∞)²] = 2α ∫ R_{2α}1 · U_α μ dμ`.
pub fn m_pairing(model: ProcessModel, alpha: f64, mu: &SmoothMeasure, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    weighted_self_pairing(model, alpha, mu, |x| alpha * model.resolvent_one(2.0 * alpha, x), tol)
}

/// `E_m[(A_T)²]` for absorbed Brownian motion and `A_t = ∫_0^t c 1_{(a,b)}(X_s) ds`.
///
/// Uses `m P_s(dy) = P_y(ζ > s) dy` and the closed form of the expected
/// occupation time, leaving a two-dimensional quadrature.
pub fn absorbed_occupation_second_moment(c: f64, support: Interval, horizon: f64, tol: f64) -> Result<f64> {
    if !(support.lo >= 0.0 && support.is_bounded()) {
        return Err(Error::Domain(format!(
            "support {support} must be a bounded subset of [0, ∞)"
        )));
    }
    let (a, b) = (support.lo, support.hi);
    let occupation = |y: f64, tau: f64| {
        c * (integrated_norm_cdf(b - y, tau) - integrated_norm_cdf(a - y, tau) - integrated_norm_cdf(b + y, tau)
            + integrated_norm_cdf(a + y, tau))
    };
    let inner_tol = tol / (4.0 * (b - a).max(1e-300) * c.max(1.0));
    let inner = |y: f64| -> f64 {
        quad::integrate(
            |s| (2.0 * special::norm_cdf(y / s.sqrt()) - 1.0) * occupation(y, horizon - s),
            0.0,
            horizon,
            &[],
            QuadOptions::abs(inner_tol),
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    };
    let r = quad::integrate(|y| c * inner(y), a, b, &[], QuadOptions::abs(tol / 2.0))?;
    Ok(2.0 * r.value)
}

/// `E_m[A_T] = ∫ c 1_{(a,b)}(y) E_y[T ∧ ζ] dy` for absorbed Brownian motion.
pub fn absorbed_occupation_mean(c: f64, support: Interval, horizon: f64, tol: f64) -> Result<f64> {
    if !(support.lo >= 0.0 && support.is_bounded()) {
        return Err(Error::Domain(format!(
            "support {support} must be a bounded subset of [0, ∞)"
        )));
    }
    // E_y[T ∧ ζ] = ∫_0^T (2Φ(y/√s) − 1) ds
    let r = quad::integrate(
        |y| 2.0 * integrated_norm_cdf(y, horizon) - horizon,
        support.lo,
        support.hi,
        &[],
        QuadOptions::abs(tol / c.abs().max(1.0)),
    )?;
    Ok(c * r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    const FREE: ProcessModel = ProcessModel::FreeBm;
    const ABS: ProcessModel = ProcessModel::AbsorbedBm;
    const KS: ProcessModel = ProcessModel::KilledStatic;
    const FLIP: ProcessModel = ProcessModel::FlipJump;

    /// `g_1` from its defining time integral.
    fn g1_time_integral(r: f64) -> f64 {
        // t = s² removes the 1/√t endpoint singularity
        quad::integrate_to_infinity(
            |s| {
                if s == 0.0 {
                    return if r == 0.0 { 2.0 / (2.0 * PI).sqrt() } else { 0.0 };
                }
                let t = s * s;
                2.0 * (-t - r * r / (2.0 * t)).exp() / (2.0 * PI).sqrt()
            },
            0.0,
            QuadOptions::abs(1e-13),
        )
        .unwrap()
        .value
    }

    #[test]
    fn free_closed_form_matches_time_integral() {
        for r in [0.0, 0.3, 1.0, 2.5] {
            let closed = green(FREE, 1.0, 0.0, r).unwrap();
            assert!((closed - g1_time_integral(r)).abs() < 1e-10, "r = {r}");
        }
        assert!((green(FREE, 1.0, 0.0, 0.0).unwrap() - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert!((green(FREE, 1.0, 0.0, 1.0).unwrap() - 0.171_909_491_538_361_88).abs() < 1e-15);
    }

    #[test]
    fn absorbed_vanishes_at_boundary() {
        assert!(green(ABS, 1.0, 1e-300, 1.0).unwrap().abs() < 1e-290);
        assert!(matches!(green(ABS, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn non_kernel_models_have_no_green() {
        assert!(matches!(green(KS, 1.0, 0.5, 0.5), Err(Error::Unsupported(_))));
        assert!(matches!(green(FLIP, 1.0, 0.5, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn kernel_symmetry_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [FREE, ABS] {
            let g = GreenKernel::new(model, 1.7).unwrap();
            for _ in 0..1000 {
                let x: f64 = rng.random_range(0.001..5.0);
                let y: f64 = rng.random_range(0.001..5.0);
                assert_eq!(g.eval(x, y).to_bits(), g.eval(y, x).to_bits());
            }
        }
    }

    #[test]
    fn resolvent_examples() {
        let v = resolvent_apply(KS, 1.0, |x| 1.0 + 1.0 / (x * x), 0.5, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = resolvent_apply(FLIP, 1.0, |x| x.cos(), 0.4, 1e-12).unwrap();
        assert!((v - 0.4f64.cos()).abs() < 1e-15);
        let v = resolvent_apply(FLIP, 1.0, |x| x.sin(), 0.3, 1e-12).unwrap();
        assert!((v - 0.3f64.sin() / 3.0).abs() < 1e-15);
        // R_α 1 = 1/α on the free line, (1 − e^{−√(2α)x})/α when absorbed.
        let v = resolvent_apply(FREE, 2.0, |_| 1.0, 0.7, 1e-11).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
        let v = resolvent_apply(ABS, 1.0, |_| 1.0, 0.7, 1e-11).unwrap();
        assert!((v - ABS.resolvent_one(1.0, 0.7)).abs() < 1e-10);
    }

    #[test]
    fn unbounded_function_is_a_numeric_error() {
        let r = resolvent_apply(FREE, 1.0, |y| 1.0 / (y - 0.5), 0.5, 1e-10);
        assert!(r.is_err());
    }

    #[test]
    fn energy_of_diracs_is_the_kernel() {
        let (x, y) = (0.2, 1.3);
        let e = energy(FREE, 1.0, &SmoothMeasure::dirac(x), &SmoothMeasure::dirac(y), 1e-12).unwrap();
        assert_eq!(e, green(FREE, 1.0, x, y).unwrap());
        let e = energy(FREE, 1.0, &SmoothMeasure::dirac(x), &SmoothMeasure::dirac(x), 1e-12).unwrap();
        assert!((e - FRAC_1_SQRT_2).abs() < 1e-15);
        let e = energy(FREE, 1.0, &SmoothMeasure::zero(), &SmoothMeasure::dirac(x), 1e-12).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn rho_examples() {
        let d0 = SmoothMeasure::dirac(0.0);
        let d1 = SmoothMeasure::dirac(1.0);
        assert_eq!(rho(FREE, &d0, &d0, 1e-10).unwrap(), 0.0);
        let expect = (SQRT_2 * (1.0 - (-SQRT_2).exp())).sqrt();
        let r = rho(FREE, &d0, &d1, 1e-10).unwrap();
        assert!((r - expect).abs() < 1e-12);
        assert!((r - 1.034_598_752_800_510_3).abs() < 1e-12);
    }

    #[test]
    fn closed_form_cells_match_quadrature() {
        // A constant density treated as a cell vs the same density as a smooth piece.
        let cell = SmoothMeasure::indicator(0.0, 1.0);
        let e = energy(FREE, 1.0, &cell, &cell, 1e-12).unwrap();
        assert!((e - 0.464_802_710_351_814_4).abs() < 1e-12);
        let g = GreenKernel::new(FREE, 1.0).unwrap();
        let brute = quad::integrate(
            |x| {
                quad::integrate(|y| g.eval(x, y), 0.0, 1.0, &[x], QuadOptions::abs(1e-13))
                    .unwrap()
                    .value
            },
            0.0,
            1.0,
            &[],
            QuadOptions::abs(1e-12),
        )
        .unwrap()
        .value;
        assert!((e - brute).abs() < 1e-11);
    }

    #[test]
    fn absorbed_indicator_energy_and_pairings() {
        let mu = SmoothMeasure::indicator(1.0, 2.0);
        let e = energy(ABS, 1.0, &mu, &mu, 1e-12).unwrap();
        assert!((e - 0.452_831_377_110_989_7).abs() < 1e-11);
        let nu0 = nu0_pairing(ABS, 1.0, &mu, 1e-12).unwrap();
        assert!((nu0 - 0.052_069_181_709_873_43).abs() < 1e-11);
        let m = m_pairing(ABS, 1.0, &mu, 1e-12).unwrap();
        assert!((m - 0.426_796_786_256_052_96).abs() < 1e-11);
        assert!((m + 0.5 * nu0 - e).abs() < 1e-11);
        assert_eq!(kappa_pairing(ABS, 1.0, &mu, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn nu0_pairing_of_a_dirac() {
        let x = 0.4;
        let v = nu0_pairing(ABS, 1.0, &SmoothMeasure::dirac(x), 1e-12).unwrap();
        let expect = 2.0 * (-2.0 * x).exp() * green(ABS, 1.0, x, x).unwrap();
        assert!((v - expect).abs() < 1e-14);
        assert_eq!(nu0_pairing(FREE, 1.0, &SmoothMeasure::dirac(x), 1e-12).unwrap(), 0.0);
        assert_eq!(
            nu0_pairing(KS, 1.0, &SmoothMeasure::indicator(0.2, 0.5), 1e-12).unwrap(),
            0.0
        );
    }

    #[test]
    fn killed_static_identity_closes() {
        let mu = SmoothMeasure::indicator(0.2, 0.9);
        let e = energy(KS, 1.0, &mu, &mu, 1e-13).unwrap();
        let expect = 0.7 - (0.9f64.atan() - 0.2f64.atan());
        assert!((e - expect).abs() < 1e-12);
        assert!((e - 0.164_580_458_063_374_18).abs() < 1e-12);
        let m = m_pairing(KS, 1.0, &mu, 1e-13).unwrap();
        let k = kappa_pairing(KS, 1.0, &mu, 1e-13).unwrap();
        assert!((m - 0.074_078_919_648_937_45).abs() < 1e-12);
        assert!((k - 0.181_003_076_828_873_45).abs() < 1e-12);
        assert!((m + 0.5 * k - e).abs() < 1e-12);
        // per-point lifetime oracle: 2 f² g / ((1+g)(2+g))
        let oracle = quad::integrate(
            |x| {
                let g = 1.0 / (x * x);
                2.0 * g / ((1.0 + g) * (2.0 + g))
            },
            0.2,
            0.9,
            &[],
            QuadOptions::abs(1e-14),
        )
        .unwrap()
        .value;
        assert!((k - oracle).abs() < 1e-12);
    }

    #[test]
    fn flip_energy_identity_closes() {
        let mu = SmoothMeasure::density(DensityFn::SinShift { n: 2 }, Interval::new(-0.5, 1.5));
        let e = energy(FLIP, 1.0, &mu, &mu, 1e-12).unwrap();
        let m = m_pairing(FLIP, 1.0, &mu, 1e-12).unwrap();
        assert!((m - e).abs() < 1e-10);
    }

    #[test]
    fn killed_static_counterexample_rho_tends_to_half_pi() {
        let limit = SmoothMeasure::family(DensityFn::PerturbedLimit, Interval::new(0.0, 1.0));
        let r2 = |n: u32| {
            let mu = SmoothMeasure::family(DensityFn::Perturbed { n }, Interval::new(0.0, 1.0));
            rho_squared(KS, &mu, &limit, 1e-10).unwrap()
        };
        let oracle = |n: u32| {
            let nf = n as f64;
            quad::integrate(
                |x| (1.0 + 1.0 / (x * x)) * (nf * x).sin().powi(2) / nf,
                0.0,
                1.0,
                &DensityFn::SinShift { n }.oscillation_breaks(0.0, 1.0),
                QuadOptions::abs(1e-12),
            )
            .unwrap()
            .value
        };
        // ρ² applies R_1 = 1/(1+g) to a (1+g)-weighted gap, so the oracle weight is 1+g.
        for n in [1, 2, 8, 64] {
            assert!((r2(n) - oracle(n)).abs() < 1e-8, "n = {n}");
        }
        assert!((r2(1) - 1.1700).abs() < 1e-4);
        assert!((r2(64) - PI / 2.0).abs() < 1e-3);
        assert!((r2(256) - PI / 2.0).abs() < 5e-3);
    }

    #[test]
    fn spike_family_rho_approaches_two_thirds() {
        let r2 = |n: u32| {
            let mu = SmoothMeasure::family(DensityFn::Spike { n }, Interval::new(0.0, 1.0));
            rho_squared(ABS, &mu, &SmoothMeasure::zero(), 1e-11).unwrap()
        };
        let expect = [(1, 0.26226), (2, 0.40552), (16, 0.62424), (128, 0.66117)];
        for (n, v) in expect {
            assert!((r2(n) - v).abs() < 2e-5, "n = {n}: {}", r2(n));
        }
    }

    #[test]
    fn spike_family_nu0_pairing() {
        let v = |n: u32| {
            let mu = SmoothMeasure::family(DensityFn::Spike { n }, Interval::new(0.0, 1.0));
            nu0_pairing(ABS, 1.0, &mu, 1e-11).unwrap()
        };
        let expect = [(1, 0.18302), (4, 0.76440), (64, 1.28616), (128, 1.30951)];
        for (n, e) in expect {
            assert!((v(n) - e).abs() < 2e-5, "n = {n}: {}", v(n));
        }
    }

    #[test]
    fn cantor_energies_converge() {
        let lim = SmoothMeasure::CantorLimit;
        let mut prev = f64::INFINITY;
        for n in 1..=6 {
            let r = rho_squared(FREE, &SmoothMeasure::CantorLevel { n }, &lim, 1e-10).unwrap();
            assert!(r < prev, "n = {n}: {r} vs {prev}");
            prev = r;
        }
        assert!(prev < 1e-4);
        // ∫∫ g dμ dμ ≤ g(0,0) for the Cantor measure
        let e = energy(FREE, 1.0, &lim, &lim, 1e-10).unwrap();
        assert!(e > 0.0 && e <= FRAC_1_SQRT_2);
    }

    #[test]
    fn smooth_densities_obey_the_l2_bound() {
        let f = SmoothMeasure::indicator(0.0, 1.0);
        for n in [1, 4, 16, 64] {
            let fnm = SmoothMeasure::density(DensityFn::SinDecay { n }, Interval::new(0.0, 1.0));
            let r2 = rho_squared(FREE, &fnm, &f, 1e-11).unwrap();
            let nf = n as f64;
            let l2 = 0.5 / nf - (2.0 * nf).sin() / (4.0 * nf * nf);
            assert!(r2 <= l2 + 1e-10, "n = {n}: {r2} > {l2}");
        }
    }

    #[test]
    fn potential_closed_form_and_tabulation() {
        let mu = SmoothMeasure::indicator(0.0, 1.0);
        let pot = Potential::new(FREE, 1.0, &mu, 1e-12).unwrap();
        assert!(pot.is_closed_form());
        let direct = resolvent_apply(
            FREE,
            1.0,
            |y| if (0.0..=1.0).contains(&y) { 1.0 } else { 0.0 },
            0.3,
            1e-10,
        );
        // the indicator kink makes the generic path less precise; the closed form is exact
        assert!((pot.eval(0.3) - direct.unwrap()).abs() < 1e-7);
        let tab = pot.tabulate(Interval::new(-2.0, 3.0), 5000);
        for x in [-1.5, 0.0, 0.31, 0.999, 2.7, 5.0] {
            assert!((tab.eval(x) - pot.eval(x)).abs() < 1e-6);
        }
        assert!(pot.sup_bound() >= pot.eval(0.5));
    }

    #[test]
    fn occupation_second_moment_matches_reference() {
        let v = absorbed_occupation_second_moment(1.0, Interval::new(0.0, 1.0), 1.0, 1e-9).unwrap();
        assert!((v - 0.27714).abs() < 2e-5, "{v}");
        let n = 8.0f64;
        let v = absorbed_occupation_second_moment(n.powf(1.5), Interval::new(0.0, 1.0 / n), 1.0, 1e-9).unwrap();
        assert!((v - 0.13805).abs() < 2e-5, "{v}");
    }

    #[test]
    fn occupation_mean_matches_reference() {
        // nested quadrature of erf(y/√(2s)) at 20 digits
        let v = absorbed_occupation_mean(1.0, Interval::new(0.0, 1.0), 1.0, 1e-12).unwrap();
        assert!((v - 0.528_937_731_352_490_9).abs() < 1e-10, "{v}");
        let v = absorbed_occupation_mean(512.0, Interval::new(0.0, 1.0 / 64.0), 1.0, 1e-12).unwrap();
        assert!((v - 0.099_086_557_542_546_9).abs() < 1e-10, "{v}");
    }

    #[test]
    fn measures_outside_the_state_space_are_rejected() {
        let mu = SmoothMeasure::indicator(-1.0, 1.0);
        assert!(matches!(energy(ABS, 1.0, &mu, &mu, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(
            energy(KS, 1.0, &SmoothMeasure::dirac(0.5), &SmoothMeasure::dirac(0.5), 1e-8),
            Err(Error::Unsupported(_))
        ));
    }

    fn test_measures() -> Vec<SmoothMeasure> {
        vec![
            SmoothMeasure::dirac(0.1),
            SmoothMeasure::dirac(0.9),
            SmoothMeasure::indicator(0.0, 0.5),
            SmoothMeasure::CantorLevel { n: 2 },
            SmoothMeasure::density(DensityFn::SinShift { n: 3 }, Interval::new(0.2, 1.2)),
        ]
    }

    #[test]
    fn metric_axioms() {
        let ms = test_measures();
        let tol = 1e-10;
        let mut d = vec![vec![0.0; ms.len()]; ms.len()];
        for i in 0..ms.len() {
            for j in 0..ms.len() {
                d[i][j] = rho(FREE, &ms[i], &ms[j], tol).unwrap();
            }
        }
        for i in 0..ms.len() {
            assert!(d[i][i] < 1e-4, "ρ(μ,μ) = {}", d[i][i]);
            for j in 0..ms.len() {
                assert!((d[i][j] - d[j][i]).abs() < 1e-9);
                for k in 0..ms.len() {
                    assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-4);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn energy_is_bilinear_in_weights(a in 0.0f64..3.0, b in 0.0f64..3.0, x in -2.0f64..2.0) {
            let p = SmoothMeasure::dirac(x);
            let q = SmoothMeasure::indicator(0.0, 1.0);
            let sum = SmoothMeasure::WeightedSum { terms: vec![(a, p.clone()), (b, q.clone())] };
            let lhs = energy(FREE, 1.0, &sum, &q, 1e-12).unwrap();
            let rhs = a * energy(FREE, 1.0, &p, &q, 1e-12).unwrap() + b * energy(FREE, 1.0, &q, &q, 1e-12).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn green_is_nonnegative(x in 1e-6f64..6.0, y in 1e-6f64..6.0, alpha in 0.1f64..5.0) {
            prop_assert!(green(ABS, alpha, x, y).unwrap() >= 0.0);
            prop_assert!(green(FREE, alpha, x, y).unwrap() > 0.0);
        }
    }
}
