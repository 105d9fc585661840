//! Literals for measures, PCAFs, weightings and functionals.
//!
//! Every literal is either JSON (starting with `{`) or a shorthand:
//!
//! | kind       | shorthand examples |
//! |------------|--------------------|
//! | measure    | `indicator(0,1)`, `sin_shift(3)`, `perturbed(8)`, `perturbed_limit`, `spike(16)`, `dirac(0.5)`, `cantor(4)`, `cantor_limit`, `const(2)@[0,1]` |
//! | PCAF       | any measure shorthand, `local_time(0,0.03)` |
//! | weighting  | `m[-8,9]`, `kappa[0.2,0.9]`, `nu0`, `point(0.5)` |
//! | functional | `at_horizon:<pcaf>`, `discounted:<pcaf>`, `discounted_sq:<pcaf>`, `hitting(1)`, `sup_sq_gap:<pcaf>|<pcaf>`, `discounted_sq_gap:<pcaf>|<pcaf>` |
//!
//! Density shorthands use the family's natural support, else `[0, 1]`;
//! `@[a,b]` overrides it.

use crate::error::{Error, Result};
use crate::estimators::{Functional, Weighting};
use crate::harness::config::parse_real;
use crate::interval::Interval;
use crate::measures::{DensityFn, SmoothMeasure};
use crate::pcaf::PcafSpec;

fn bad(kind: &str, s: &str) -> Error {
    Error::Parse(format!("cannot read {s:?} as a {kind} literal"))
}

/// Splits `name(a,b)` into `("name", [a, b])`; a bare name has no arguments.
fn call(s: &str) -> Option<(&str, Vec<f64>)> {
    let s = s.trim();
    match s.find('(') {
        None => Some((s, Vec::new())),
        Some(i) => {
            let inner = s[i + 1..].strip_suffix(')')?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|a| parse_real(a.trim()))
                    .collect::<Result<_>>()
                    .ok()?
            };
            Some((s[..i].trim(), args))
        }
    }
}

fn interval(s: &str) -> Option<Interval> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    let (a, b) = inner.split_once(',')?;
    let (a, b) = (parse_real(a.trim()).ok()?, parse_real(b.trim()).ok()?);
    (a <= b).then(|| Interval::new(a, b))
}

fn index(args: &[f64]) -> Option<u32> {
    match args {
        [n] if *n >= 1.0 && n.fract() == 0.0 && *n <= u32::MAX as f64 => Some(*n as u32),
        _ => None,
    }
}

fn density_fn(name: &str, args: &[f64]) -> Option<DensityFn> {
    Some(match name {
        "const" => match args {
            [c] => DensityFn::Const { c: *c },
            _ => return None,
        },
        "sin_shift" => DensityFn::SinShift { n: index(args)? },
        "sin_decay" => DensityFn::SinDecay { n: index(args)? },
        "perturbed" => DensityFn::Perturbed { n: index(args)? },
        "perturbed_limit" if args.is_empty() => DensityFn::PerturbedLimit,
        "spike" => DensityFn::Spike { n: index(args)? },
        _ => return None,
    })
}

pub fn parse_measure(s: &str) -> Result<SmoothMeasure> {
    let s = s.trim();
    if s.starts_with('{') {
        let mu: SmoothMeasure = serde_json::from_str(s)?;
        mu.validate()?;
        return Ok(mu);
    }
    let (head, support) = match s.split_once('@') {
        Some((h, w)) => (h, Some(interval(w).ok_or_else(|| bad("measure", s))?)),
        None => (s, None),
    };
    let (name, args) = call(head).ok_or_else(|| bad("measure", s))?;
    let mu = match (name, args.as_slice()) {
        ("indicator", [a, b]) if a <= b => SmoothMeasure::indicator(*a, *b),
        ("dirac", [x]) => SmoothMeasure::dirac(*x),
        ("cantor", _) => SmoothMeasure::CantorLevel {
            n: index(&args).ok_or_else(|| bad("measure", s))?,
        },
        ("cantor_limit", []) => SmoothMeasure::CantorLimit,
        ("zero", []) => SmoothMeasure::zero(),
        _ => {
            let f = density_fn(name, &args).ok_or_else(|| bad("measure", s))?;
            match support {
                Some(w) => SmoothMeasure::density(f, w),
                None => SmoothMeasure::family(f, Interval::new(0.0, 1.0)),
            }
        }
    };
    if support.is_some() && !matches!(mu, SmoothMeasure::Density { .. }) {
        return Err(bad("measure", s));
    }
    if let (Some(w), SmoothMeasure::Density { support, .. }) = (support, &mu) {
        if *support != w {
            return Err(bad("measure", s));
        }
    }
    mu.validate()?;
    Ok(mu)
}

/// PCAF literal; Dirac shorthands become local times of width `eps`.
pub fn parse_pcaf(s: &str, eps: f64) -> Result<PcafSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        let spec: PcafSpec = serde_json::from_str(s)?;
        spec.validate()?;
        return Ok(spec);
    }
    if let Some((name, args)) = call(s) {
        if name == "local_time" {
            let spec = match args.as_slice() {
                [x] => PcafSpec::LocalTime { x: *x, eps },
                [x, e] => PcafSpec::LocalTime { x: *x, eps: *e },
                _ => return Err(bad("PCAF", s)),
            };
            spec.validate()?;
            return Ok(spec);
        }
        if name == "zero" && args.is_empty() {
            return Ok(PcafSpec::zero());
        }
    }
    PcafSpec::for_measure(&parse_measure(s)?, eps)
}

pub fn parse_weighting(s: &str) -> Result<Weighting> {
    let s = s.trim();
    if s.starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    if s == "nu0" {
        return Ok(Weighting::Nu0);
    }
    if let Some(w) = s.strip_prefix("kappa").and_then(interval) {
        return Ok(Weighting::Kappa { window: w });
    }
    if let Some(w) = s.strip_prefix('m').and_then(interval) {
        return Ok(Weighting::MWindow { window: w });
    }
    match call(s) {
        Some(("point", args)) if args.len() == 1 => Ok(Weighting::PointMass { x: args[0] }),
        _ => Err(bad("weighting", s)),
    }
}

pub fn parse_functional(s: &str, eps: f64) -> Result<Functional> {
    let s = s.trim();
    if s.starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    if let Some((kind, rest)) = s.split_once(':') {
        let one = || parse_pcaf(rest, eps);
        let two = || -> Result<(PcafSpec, PcafSpec)> {
            let (a, b) = rest.split_once('|').ok_or_else(|| bad("functional", s))?;
            Ok((parse_pcaf(a, eps)?, parse_pcaf(b, eps)?))
        };
        return match kind.trim() {
            "at_horizon" => Ok(Functional::AtHorizon { pcaf: one()? }),
            "discounted" => Ok(Functional::Discounted { pcaf: one()? }),
            "discounted_sq" => Ok(Functional::DiscountedSq { pcaf: one()? }),
            "sup_sq_gap" => two().map(|(a, b)| Functional::SupSqGap { a, b }),
            "discounted_sq_gap" => two().map(|(a, b)| Functional::DiscountedSqGap { a, b }),
            _ => Err(bad("functional", s)),
        };
    }
    match call(s) {
        Some(("hitting", args)) if args.len() == 1 => Ok(Functional::Hitting { level: args[0] }),
        _ => Err(bad("functional", s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures() {
        assert_eq!(
            parse_measure("indicator(0, 1)").unwrap(),
            SmoothMeasure::indicator(0.0, 1.0)
        );
        assert_eq!(
            parse_measure("spike(8)").unwrap(),
            SmoothMeasure::density(DensityFn::Spike { n: 8 }, Interval::new(0.0, 0.125))
        );
        assert_eq!(
            parse_measure("sin_shift(3)@[-1,2]").unwrap(),
            SmoothMeasure::density(DensityFn::SinShift { n: 3 }, Interval::new(-1.0, 2.0))
        );
        assert_eq!(parse_measure("cantor(4)").unwrap(), SmoothMeasure::CantorLevel { n: 4 });
        let json = r#"{"type":"density","expr":{"name":"sin_shift","n":2},"support":{"lo":0,"hi":1}}"#;
        assert_eq!(
            parse_measure(json).unwrap(),
            SmoothMeasure::density(DensityFn::SinShift { n: 2 }, Interval::new(0.0, 1.0))
        );
        for bad in [
            "sin_shift",
            "sin_shift(1.5)",
            "dirac(0)@[0,1]",
            "indicator(2,1)",
            "wat(1)",
            "cantor(0)",
        ] {
            assert!(parse_measure(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn pcafs_and_weightings() {
        assert_eq!(
            parse_pcaf("dirac(0)", 0.1).unwrap(),
            PcafSpec::LocalTime { x: 0.0, eps: 0.1 }
        );
        assert_eq!(
            parse_pcaf("local_time(1, 0.02)", 0.1).unwrap(),
            PcafSpec::LocalTime { x: 1.0, eps: 0.02 }
        );
        assert_eq!(
            parse_pcaf(r#"{"type":"cantor","n":3}"#, 0.1).unwrap(),
            PcafSpec::Cantor { n: 3 }
        );
        assert_eq!(
            parse_weighting("m[-8,9]").unwrap(),
            Weighting::MWindow {
                window: Interval::new(-8.0, 9.0)
            }
        );
        assert_eq!(
            parse_weighting("kappa[0.2,0.9]").unwrap(),
            Weighting::Kappa {
                window: Interval::new(0.2, 0.9)
            }
        );
        assert_eq!(parse_weighting("nu0").unwrap(), Weighting::Nu0);
        assert_eq!(parse_weighting("point(0.5)").unwrap(), Weighting::PointMass { x: 0.5 });
        assert!(parse_weighting("m[1]").is_err());
    }

    #[test]
    fn functionals() {
        let f = parse_functional("sup_sq_gap:perturbed(4)|perturbed_limit", 0.1).unwrap();
        assert!(matches!(f, Functional::SupSqGap { .. }));
        assert_eq!(
            parse_functional("hitting(1)", 0.1).unwrap(),
            Functional::Hitting { level: 1.0 }
        );
        assert!(matches!(
            parse_functional("discounted_sq:indicator(0,1)", 0.1).unwrap(),
            Functional::DiscountedSq { .. }
        ));
        assert!(parse_functional("sup_sq_gap:indicator(0,1)", 0.1).is_err());
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(parse_functional(&json, 0.1).unwrap(), f);
    }
}
