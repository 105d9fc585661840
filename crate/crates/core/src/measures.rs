//! Smooth measures of finite energy integrals and integration against them.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cantor;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::quad::{self, QuadOptions};

/// Named density families. `n` indexes the sequence member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DensityFn {
    /// `c`
    Const { c: f64 },
    /// `1 + sin(nx)`
    SinShift { n: u32 },
    /// `1 + n^{-1/2} sin(nx)`
    SinDecay { n: u32 },
    /// `(1 + x⁻²)(1 + n^{-1/2} sin(nx))`
    Perturbed { n: u32 },
    /// `1 + x⁻²`
    PerturbedLimit,
    /// `n^{3/2}`, meant for the support `(0, 1/n)`
    Spike { n: u32 },
}

impl DensityFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            DensityFn::Const { c } => c,
            DensityFn::SinShift { n } => 1.0 + (n as f64 * x).sin(),
            DensityFn::SinDecay { n } => 1.0 + (n as f64 * x).sin() / (n as f64).sqrt(),
            DensityFn::Perturbed { n } => (1.0 + 1.0 / (x * x)) * (1.0 + (n as f64 * x).sin() / (n as f64).sqrt()),
            DensityFn::PerturbedLimit => 1.0 + 1.0 / (x * x),
            DensityFn::Spike { n } => (n as f64).powf(1.5),
        }
    }

    /// Support the family is defined on, where it has a canonical one.
    pub fn natural_support(&self) -> Option<Interval> {
        match *self {
            DensityFn::Perturbed { .. } | DensityFn::PerturbedLimit => Some(Interval::new(0.0, 1.0)),
            DensityFn::Spike { n } => Some(Interval::new(0.0, 1.0 / n.max(1) as f64)),
            _ => None,
        }
    }

    /// True when the density blows up at `x = 0`.
    pub fn singular_at_zero(&self) -> bool {
        matches!(self, DensityFn::Perturbed { .. } | DensityFn::PerturbedLimit)
    }

    /// Upper bound of the density on `w` (infinite if unbounded there).
    pub fn sup_on(&self, w: &Interval) -> f64 {
        match *self {
            DensityFn::Const { c } => c.abs(),
            DensityFn::SinShift { .. } => 2.0,
            DensityFn::SinDecay { n } => 1.0 + 1.0 / (n.max(1) as f64).sqrt(),
            DensityFn::Spike { n } => (n as f64).powf(1.5),
            DensityFn::Perturbed { n } => {
                let near = w.lo.abs().min(w.hi.abs());
                if w.contains_closed(0.0) || near == 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 + 1.0 / (near * near)) * (1.0 + 1.0 / (n.max(1) as f64).sqrt())
                }
            }
            DensityFn::PerturbedLimit => {
                let near = w.lo.abs().min(w.hi.abs());
                if w.contains_closed(0.0) || near == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 + 1.0 / (near * near)
                }
            }
        }
    }

    /// Number of oscillations per unit length, used to size quadrature panels.
    fn frequency(&self) -> f64 {
        match *self {
            DensityFn::SinShift { n } | DensityFn::SinDecay { n } | DensityFn::Perturbed { n } => n as f64 / (2.0 * PI),
            _ => 0.0,
        }
    }

    /// Breakpoints that split `[a, b]` into panels of about one period each.
    pub(crate) fn oscillation_breaks(&self, a: f64, b: f64) -> Vec<f64> {
        let freq = self.frequency();
        if freq == 0.0 || !(a.is_finite() && b.is_finite()) {
            return Vec::new();
        }
        let k = ((b - a) * freq).ceil().min(4096.0) as usize;
        (1..k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
    }
}

/// A measure in the finite-energy class, as a tagged union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SmoothMeasure {
    /// `f · 1_support · dx`
    Density {
        #[serde(rename = "expr")]
        f: DensityFn,
        support: Interval,
    },
    Dirac {
        x: f64,
    },
    /// Normalised Lebesgue measure on the level-`n` Cantor set.
    #[serde(rename = "cantor")]
    CantorLevel {
        n: u32,
    },
    /// The Cantor measure itself.
    CantorLimit,
    #[serde(rename = "sum")]
    WeightedSum {
        terms: Vec<(f64, SmoothMeasure)>,
    },
}

/// Options for [`SmoothMeasure::integrate`].
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub tol: f64,
    /// Lipschitz bound of the integrand; drives the Cantor-limit recursion depth.
    pub lipschitz: Option<f64>,
    pub max_panels: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            lipschitz: None,
            max_panels: 20_000,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn quad(&self, tol: f64) -> QuadOptions {
        QuadOptions {
            abs_tol: tol,
            rel_tol: 0.0,
            max_panels: self.max_panels,
        }
    }
}

/// Deepest recursion used for the Cantor limit measure.
pub const MAX_CANTOR_DEPTH: u32 = 22;
/// Largest Cantor level that is expanded into its intervals.
pub const MAX_CANTOR_LEVEL: u32 = 24;

impl SmoothMeasure {
    pub fn zero() -> Self {
        SmoothMeasure::WeightedSum { terms: Vec::new() }
    }

    pub fn density(f: DensityFn, support: Interval) -> Self {
        SmoothMeasure::Density { f, support }
    }

    /// Density on its family's natural support, or `support` otherwise.
    pub fn family(f: DensityFn, fallback: Interval) -> Self {
        let support = f.natural_support().unwrap_or(fallback);
        SmoothMeasure::Density { f, support }
    }

    pub fn indicator(lo: f64, hi: f64) -> Self {
        SmoothMeasure::density(DensityFn::Const { c: 1.0 }, Interval::new(lo, hi))
    }

    pub fn dirac(x: f64) -> Self {
        SmoothMeasure::Dirac { x }
    }

    pub fn scaled(self, c: f64) -> Self {
        SmoothMeasure::WeightedSum { terms: vec![(c, self)] }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SmoothMeasure::WeightedSum { terms } => terms.iter().all(|(c, m)| *c == 0.0 || m.is_zero()),
            SmoothMeasure::Density {
                f: DensityFn::Const { c },
                ..
            } => *c == 0.0,
            _ => false,
        }
    }

    /// Checks the structural invariants (nonnegative weights and densities).
    pub fn validate(&self) -> Result<()> {
        match self {
            SmoothMeasure::Density { f, support } => {
                if support.lo > support.hi || support.lo.is_nan() || support.hi.is_nan() {
                    return Err(Error::Domain(format!("bad support {support}")));
                }
                match *f {
                    DensityFn::Const { c } if c < 0.0 || !c.is_finite() => {
                        Err(Error::Domain(format!("density constant {c} must be finite and >= 0")))
                    }
                    DensityFn::Perturbed { .. } | DensityFn::PerturbedLimit if support.lo < 0.0 => {
                        Err(Error::Domain("perturbed densities live on (0, 1)".into()))
                    }
                    _ => Ok(()),
                }
            }
            SmoothMeasure::Dirac { x } if !x.is_finite() => {
                Err(Error::Domain(format!("Dirac location {x} is not finite")))
            }
            SmoothMeasure::CantorLevel { n } if *n == 0 || *n > MAX_CANTOR_LEVEL => Err(Error::Domain(format!(
                "Cantor level must be in 1..={MAX_CANTOR_LEVEL}, got {n}"
            ))),
            SmoothMeasure::WeightedSum { terms } => {
                for (c, m) in terms {
                    if !(*c >= 0.0 && c.is_finite()) {
                        return Err(Error::Domain(format!("weight {c} must be finite and >= 0")));
                    }
                    m.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Smallest closed interval carrying the measure (`None` for the zero measure).
    pub fn support_hull(&self) -> Option<Interval> {
        match self {
            SmoothMeasure::Density { support, .. } => Some(*support),
            SmoothMeasure::Dirac { x } => Some(Interval::new(*x, *x)),
            SmoothMeasure::CantorLevel { .. } | SmoothMeasure::CantorLimit => Some(Interval::new(0.0, 1.0)),
            SmoothMeasure::WeightedSum { terms } => terms
                .iter()
                .filter(|(c, _)| *c != 0.0)
                .filter_map(|(_, m)| m.support_hull())
                .reduce(|a, b| a.hull(&b)),
        }
    }

    /// Density with respect to Lebesgue measure, when the measure has one.
    pub fn is_absolutely_continuous(&self) -> bool {
        match self {
            SmoothMeasure::Density { .. } | SmoothMeasure::CantorLevel { .. } => true,
            SmoothMeasure::Dirac { .. } | SmoothMeasure::CantorLimit => false,
            SmoothMeasure::WeightedSum { terms } => {
                terms.iter().all(|(c, m)| *c == 0.0 || m.is_absolutely_continuous())
            }
        }
    }

    /// Value of the Lebesgue density at `x` (caller checks absolute continuity).
    pub fn density_at(&self, x: f64) -> f64 {
        match self {
            SmoothMeasure::Density { f, support } => {
                if support.contains_closed(x) {
                    f.eval(x)
                } else {
                    0.0
                }
            }
            SmoothMeasure::CantorLevel { n } => {
                if cantor::membership(x, *n) {
                    1.5f64.powi(*n as i32)
                } else {
                    0.0
                }
            }
            SmoothMeasure::WeightedSum { terms } => terms
                .iter()
                .filter(|(c, _)| *c != 0.0)
                .map(|(c, m)| c * m.density_at(x))
                .sum(),
            SmoothMeasure::Dirac { .. } | SmoothMeasure::CantorLimit => f64::NAN,
        }
    }

    /// Points where the measure (or its density) is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match self {
            SmoothMeasure::Density { support, .. } => {
                out.extend([support.lo, support.hi].into_iter().filter(|v| v.is_finite()));
            }
            SmoothMeasure::Dirac { x } => out.push(*x),
            SmoothMeasure::CantorLevel { n } if *n <= 12 => {
                for iv in cantor::level_intervals(*n) {
                    out.push(iv.lo);
                    out.push(iv.hi);
                }
            }
            SmoothMeasure::CantorLevel { .. } | SmoothMeasure::CantorLimit => {
                out.extend([0.0, 1.0]);
            }
            SmoothMeasure::WeightedSum { terms } => {
                terms.iter().for_each(|(_, m)| m.collect_breaks(out));
            }
        }
    }

    /// Total mass (may be infinite).
    pub fn total_mass(&self, tol: f64) -> Result<f64> {
        match self {
            SmoothMeasure::Density { f, support } => {
                if !support.is_bounded() {
                    return Ok(
                        if f.eval(support.midpoint()) == 0.0 && matches!(f, DensityFn::Const { .. }) {
                            0.0
                        } else {
                            f64::INFINITY
                        },
                    );
                }
                match f {
                    DensityFn::Const { c } => Ok(c * support.len()),
                    DensityFn::Spike { .. } => Ok(f.eval(0.0) * support.len()),
                    f if f.singular_at_zero() && support.lo <= 0.0 => Ok(f64::INFINITY),
                    _ => self.integrate(|_| 1.0, &Interval::REAL_LINE, IntegrateOptions::with_tol(tol)),
                }
            }
            SmoothMeasure::WeightedSum { terms } => {
                let mut total = 0.0;
                for (c, m) in terms {
                    if *c != 0.0 {
                        total += c * m.total_mass(tol)?;
                    }
                }
                Ok(total)
            }
            _ => Ok(1.0),
        }
    }

    /// `∫_window h dμ` with absolute error target `opts.tol`.
    pub fn integrate<H: Fn(f64) -> f64>(&self, h: H, window: &Interval, opts: IntegrateOptions) -> Result<f64> {
        self.integrate_with_breaks(&h, window, &[], opts)
    }

    /// As [`integrate`](Self::integrate), with extra kinks of `h` to split at.
    pub fn integrate_with_breaks<H: Fn(f64) -> f64>(
        &self,
        h: &H,
        window: &Interval,
        breaks: &[f64],
        opts: IntegrateOptions,
    ) -> Result<f64> {
        match self {
            SmoothMeasure::Density { f, support } => {
                let Some(dom) = support.intersect(window) else {
                    return Ok(0.0);
                };
                if dom.len() == 0.0 {
                    return Ok(0.0);
                }
                if !dom.is_bounded() {
                    return integrate_unbounded(&|x| h(x) * f.eval(x), &dom, opts);
                }
                let mut bp: Vec<f64> = breaks.to_vec();
                bp.extend(f.oscillation_breaks(dom.lo, dom.hi));
                let r = quad::integrate(|x| h(x) * f.eval(x), dom.lo, dom.hi, &bp, opts.quad(opts.tol))?;
                Ok(r.value)
            }
            SmoothMeasure::Dirac { x } => Ok(if window.contains_closed(*x) { h(*x) } else { 0.0 }),
            SmoothMeasure::CantorLevel { n } => {
                let cells = cantor::level_intervals(*n);
                let w = 0.5f64.powi(*n as i32);
                let mut parts = Vec::with_capacity(cells.len());
                for iv in cells {
                    let Some(dom) = iv.intersect(window) else {
                        parts.push(0.0);
                        continue;
                    };
                    if dom.len() == 0.0 {
                        parts.push(0.0);
                        continue;
                    }
                    // Average of h over the cell, so constants come out exact.
                    let r = quad::integrate(h, dom.lo, dom.hi, breaks, opts.quad(opts.tol * iv.len()))?;
                    parts.push(w * r.value / iv.len());
                }
                Ok(crate::reduce::pairwise_sum(&parts))
            }
            SmoothMeasure::CantorLimit => {
                let lip = match opts.lipschitz {
                    Some(l) => l,
                    None => estimate_lipschitz(h, &Interval::new(0.0, 1.0)),
                };
                let depth = cantor_depth(lip, opts.tol)?;
                let mids = cantor::cell_midpoints(depth);
                let w = 0.5f64.powi(depth as i32);
                let vals: Vec<f64> = mids
                    .iter()
                    .map(|&m| if window.contains_closed(m) { w * h(m) } else { 0.0 })
                    .collect();
                Ok(crate::reduce::pairwise_sum(&vals))
            }
            SmoothMeasure::WeightedSum { terms } => {
                let active: Vec<_> = terms.iter().filter(|(c, _)| *c != 0.0).collect();
                if active.is_empty() {
                    return Ok(0.0);
                }
                let scale: f64 = active.iter().map(|(c, _)| c.abs()).sum();
                let sub = IntegrateOptions {
                    tol: opts.tol / scale,
                    lipschitz: opts.lipschitz,
                    ..opts
                };
                let mut total = 0.0;
                for (c, m) in active {
                    total += c * m.integrate_with_breaks(h, window, breaks, sub)?;
                }
                Ok(total)
            }
        }
    }

    /// Cumulative distribution `μ([lo, x])` for finite measures on a bounded hull.
    pub fn cdf(&self, x: f64, tol: f64) -> Result<f64> {
        match self {
            SmoothMeasure::CantorLevel { n } => Ok(cantor::level_cdf(x, *n)),
            SmoothMeasure::CantorLimit => Ok(cantor::limit_cdf(x)),
            _ => {
                let lo = self.support_hull().map_or(0.0, |h| h.lo);
                if x < lo {
                    return Ok(0.0);
                }
                self.integrate(|_| 1.0, &Interval::new(lo, x), IntegrateOptions::with_tol(tol))
            }
        }
    }

    /// Builds a sampler for the normalised measure.
    pub fn sampler(&self) -> Result<MeasureSampler> {
        MeasureSampler::new(self)
    }

    /// One draw from the normalised measure. Builds tables on every call; use
    /// [`sampler`](Self::sampler) in loops.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler()?.sample(rng))
    }
}

fn integrate_unbounded<H: Fn(f64) -> f64>(h: &H, dom: &Interval, opts: IntegrateOptions) -> Result<f64> {
    let q = opts.quad(opts.tol / 2.0);
    let v = match (dom.lo.is_finite(), dom.hi.is_finite()) {
        (true, false) => quad::integrate_to_infinity(h, dom.lo, q)?.value,
        (false, true) => quad::integrate_from_neg_infinity(h, dom.hi, q)?.value,
        _ => quad::integrate_to_infinity(h, 0.0, q)?.value + quad::integrate_from_neg_infinity(h, 0.0, q)?.value,
    };
    Ok(v)
}

fn estimate_lipschitz<H: Fn(f64) -> f64>(h: &H, w: &Interval) -> f64 {
    const N: usize = 1024;
    let step = w.len() / N as f64;
    let mut prev = h(w.lo);
    let mut best = 0.0f64;
    for i in 1..=N {
        let v = h(w.lo + step * i as f64);
        best = best.max((v - prev).abs() / step);
        prev = v;
    }
    // Sampling only sees chords; pad for curvature between nodes.
    2.0 * best + 1e-12
}

/// Depth with `L · 3^{-d} / 2 <= tol`.
fn cantor_depth(lip: f64, tol: f64) -> Result<u32> {
    if lip <= 0.0 {
        return Ok(1);
    }
    let d = ((lip / (2.0 * tol)).ln() / 3f64.ln()).ceil().max(1.0);
    if d > MAX_CANTOR_DEPTH as f64 {
        return Err(Error::Quadrature {
            estimate: f64::NAN,
            error: lip * 3f64.powi(-(MAX_CANTOR_DEPTH as i32)) / 2.0,
        });
    }
    Ok(d as u32)
}

/// Positive combination `μ − ν` kept as its two parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedCombination {
    pub pos: SmoothMeasure,
    pub neg: SmoothMeasure,
}

impl SignedCombination {
    pub fn new(pos: SmoothMeasure, neg: SmoothMeasure) -> Self {
        Self { pos, neg }
    }
}

/// Pre-tabulated sampler for the normalised version of a finite measure.
#[derive(Debug, Clone)]
pub enum MeasureSampler {
    Point(f64),
    Uniform(Interval),
    /// Piecewise-linear CDF on a grid.
    Table {
        grid: Vec<f64>,
        cdf: Vec<f64>,
    },
    CantorLevel(u32),
    CantorLimit,
    Mixture {
        cum: Vec<f64>,
        parts: Vec<MeasureSampler>,
    },
}

const TABLE_CELLS: usize = 4096;

impl MeasureSampler {
    pub fn new(mu: &SmoothMeasure) -> Result<Self> {
        mu.validate()?;
        match mu {
            SmoothMeasure::Dirac { x } => Ok(MeasureSampler::Point(*x)),
            SmoothMeasure::CantorLevel { n } => Ok(MeasureSampler::CantorLevel(*n)),
            SmoothMeasure::CantorLimit => Ok(MeasureSampler::CantorLimit),
            SmoothMeasure::Density { f, support } => {
                let mass = mu.total_mass(1e-10)?;
                if !mass.is_finite() {
                    return Err(Error::Unsupported(format!(
                        "cannot sample a measure of infinite mass on {support}; restrict it to a window first"
                    )));
                }
                if mass <= 0.0 {
                    return Err(Error::Domain("cannot sample the zero measure".into()));
                }
                if matches!(f, DensityFn::Const { .. } | DensityFn::Spike { .. }) {
                    return Ok(MeasureSampler::Uniform(*support));
                }
                let h = support.len() / TABLE_CELLS as f64;
                let grid: Vec<f64> = (0..=TABLE_CELLS).map(|i| support.lo + h * i as f64).collect();
                let mut cdf = Vec::with_capacity(grid.len());
                cdf.push(0.0);
                let mut acc = 0.0;
                for w in grid.windows(2) {
                    let r = quad::gk21(&|x| f.eval(x), w[0], w[1]).0;
                    acc += r.max(0.0);
                    cdf.push(acc);
                }
                let total = *cdf.last().unwrap();
                cdf.iter_mut().for_each(|c| *c /= total);
                Ok(MeasureSampler::Table { grid, cdf })
            }
            SmoothMeasure::WeightedSum { terms } => {
                let mut cum = Vec::new();
                let mut parts = Vec::new();
                let mut acc = 0.0;
                for (c, m) in terms.iter().filter(|(c, m)| *c > 0.0 && !m.is_zero()) {
                    let mass = c * m.total_mass(1e-10)?;
                    if !mass.is_finite() {
                        return Err(Error::Unsupported("cannot sample a measure of infinite mass".into()));
                    }
                    acc += mass;
                    cum.push(acc);
                    parts.push(MeasureSampler::new(m)?);
                }
                if parts.is_empty() {
                    return Err(Error::Domain("cannot sample the zero measure".into()));
                }
                cum.iter_mut().for_each(|c| *c /= acc);
                Ok(MeasureSampler::Mixture { cum, parts })
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MeasureSampler::Point(x) => *x,
            MeasureSampler::Uniform(iv) => iv.lo + iv.len() * rng.random::<f64>(),
            MeasureSampler::Table { grid, cdf } => {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                grid[i - 1] + t * (grid[i] - grid[i - 1])
            }
            MeasureSampler::CantorLevel(n) => {
                let bits: u64 = rng.random();
                let mut left = 0.0;
                let mut scale = 1.0;
                for k in 0..*n {
                    scale /= 3.0;
                    if (bits >> (k % 64)) & 1 == 1 {
                        left += 2.0 * scale;
                    }
                }
                left + scale * rng.random::<f64>()
            }
            MeasureSampler::CantorLimit => {
                let bits: u64 = rng.random();
                let mut x = 0.0;
                let mut scale = 1.0;
                for k in 0..40 {
                    scale /= 3.0;
                    if (bits >> k) & 1 == 1 {
                        x += 2.0 * scale;
                    }
                }
                x
            }
            MeasureSampler::Mixture { cum, parts } => {
                let u: f64 = rng.random();
                let i = cum.partition_point(|&c| c <= u).min(parts.len() - 1);
                parts[i].sample(rng)
            }
        }
    }
}
