//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Reference values are frozen from independent high-precision evaluations
//! (mpmath at 30 digits) rather than from this crate.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use revuz_core::estimators::{
    energy_identity_check, expect, fukushima_residual, hitting_laplace_check, killed_static_symbolic_identity,
    nu0_finite_difference, Functional, McConfig, McEstimate, Weighting,
};
use revuz_core::harness::report::column;
use revuz_core::harness::{self, Cell, ExperimentReport, HarnessConfig};
use revuz_core::pcaf::PcafSpec;
use revuz_core::{DensityFn, Interval, ProcessModel, SmoothMeasure};

const SEED: u64 = 20_240_917;
const PATHS: u64 = 100_000;
const DT: f64 = 1e-3;
const DISCOUNT_HORIZON: f64 = 20.0;
const QUAD_TOL: f64 = 1e-10;

/// `1 + sin(n/2)·sinh(1)/e` for n = 1, 3, 5.
const FLIP_MEANS: [(u32, f64); 3] = [
    (1, 1.207_271_173_773_168_8),
    (3, 1.431_249_360_032_446_8),
    (5, 1.258_738_873_486_212_3),
];
/// `ℰ₁(U₁μ)` for `μ = 1_{[0,1]}dx` under free Brownian motion.
const FREE_ENERGY: f64 = 0.464_802_710_351_814_4;
/// Static killing `g = x⁻²`, `μ = 1_{[0.2,0.9]}dx`: energy, `m`-part and `κ`-pairing.
const STATIC_ENERGY: f64 = 0.164_580_458_063_374_18;
const STATIC_M_PART: f64 = 0.074_078_919_648_937_45;
const STATIC_KAPPA: f64 = 0.181_003_076_828_873_45;
/// Absorbed Brownian motion, `μ = 1_{[1,2]}dx`.
const ABSORBED_ENERGY: f64 = 0.452_831_377_110_989_7;
const ABSORBED_NU0: f64 = 0.052_069_181_709_873_43;
const ABSORBED_M_PART: f64 = 0.426_796_786_256_052_96;
const LOCAL_TIME_MEAN: f64 = std::f64::consts::FRAC_1_SQRT_2;
const HITTING_MEAN: f64 = 0.243_116_734_434_214_2;
/// Agreement of frozen values with the crate's quadrature.
const ORACLE_TOL: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
    /// Every Monte Carlo number behind the verdict, for the determinism rerun.
    fingerprint: Vec<u64>,
}

fn bits(e: &McEstimate) -> [u64; 2] {
    [e.mean.to_bits(), e.std_error.to_bits()]
}

fn report_bits(r: &ExperimentReport) -> Vec<u64> {
    r.rows
        .iter()
        .flat_map(|row| row.cells.iter())
        .filter_map(|(_, c)| match c {
            Cell::Mc { mean, std_error, .. } => Some([mean.to_bits(), std_error.to_bits()]),
            _ => None,
        })
        .flatten()
        .collect()
}

fn fmt(e: &McEstimate) -> String {
    format!("{:.5} ± {:.5}", e.mean, e.std_error)
}

fn mc(workers: usize) -> McConfig {
    McConfig {
        dt: DT,
        seed: SEED,
        paths: PATHS,
        workers: Some(workers),
        quad_tol: QUAD_TOL,
        ..McConfig::default()
    }
}

fn harness_cfg(workers: usize) -> HarnessConfig {
    HarnessConfig {
        seed: SEED,
        paths: PATHS,
        dt: DT,
        workers: Some(workers),
        ..HarnessConfig::default()
    }
}

fn flip_point_means(workers: usize) -> Outcome {
    let cfg = mc(workers);
    let start = Instant::now();
    let mut pass = true;
    let mut fingerprint = Vec::new();
    let mut parts = Vec::new();
    for (n, exact) in FLIP_MEANS {
        let pcaf = PcafSpec::Density {
            f: DensityFn::SinShift { n },
            support: None,
        };
        let e = expect(
            ProcessModel::FlipJump,
            &Weighting::PointMass { x: 0.5 },
            &Functional::AtHorizon { pcaf },
            &cfg,
        )
        .expect("flip estimate");
        pass &= e.agrees_with(exact, 3.0, 0.0);
        fingerprint.extend(bits(&e));
        parts.push(format!("n={n}: {} vs {exact:.5}", fmt(&e)));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    Outcome {
        pass,
        detail: format!("{}; {:.1} s (limit 30 s)", parts.join(", "), elapsed.as_secs_f64()),
        fingerprint,
    }
}

fn free_energy_identity(workers: usize) -> Outcome {
    let cfg = mc(workers).with_horizon(DISCOUNT_HORIZON);
    let start = Instant::now();
    let r = energy_identity_check(
        ProcessModel::FreeBm,
        1.0,
        &SmoothMeasure::indicator(0.0, 1.0),
        Some(Interval::new(-8.0, 9.0)),
        &cfg,
    )
    .expect("free identity");
    let elapsed = start.elapsed();
    let pass =
        r.z_score.abs() <= 3.0 && (r.rhs - FREE_ENERGY).abs() <= ORACLE_TOL && elapsed < Duration::from_secs(120);
    Outcome {
        pass,
        detail: format!(
            "m-part {} vs energy {:.5}; z = {:.2}; window exterior ≤ {:.1e}; {:.1} s (limit 120 s)",
            fmt(&r.m_part),
            r.rhs,
            r.z_score,
            r.exterior_bound,
            elapsed.as_secs_f64()
        ),
        fingerprint: bits(&r.m_part).to_vec(),
    }
}

fn static_killing_identity(workers: usize) -> Outcome {
    let cfg = mc(workers).with_horizon(DISCOUNT_HORIZON);
    let symbolic = (1..=5).all(killed_static_symbolic_identity);
    let r = energy_identity_check(
        ProcessModel::KilledStatic,
        1.0,
        &SmoothMeasure::indicator(0.2, 0.9),
        None,
        &cfg,
    )
    .expect("static identity");
    let kappa = r.kappa_mc.expect("static model has killing");
    let oracles = (r.rhs - STATIC_ENERGY).abs() <= ORACLE_TOL
        && (r.m_part_quadrature - STATIC_M_PART).abs() <= ORACLE_TOL
        && (r.kappa_term - STATIC_KAPPA).abs() <= ORACLE_TOL;
    let m_ok = r.m_part.agrees_with(STATIC_M_PART, 3.0, r.m_part.tail_bound);
    let k_ok = kappa.agrees_with(STATIC_KAPPA, 3.0, kappa.tail_bound);
    Outcome {
        pass: symbolic && oracles && m_ok && k_ok,
        detail: format!(
            "symbolic identity {symbolic}; m-part {} vs {STATIC_M_PART:.5}; kappa {} vs {STATIC_KAPPA:.5}; quadrature oracles {oracles}",
            fmt(&r.m_part),
            fmt(&kappa)
        ),
        fingerprint: [bits(&r.m_part), bits(&kappa)].concat(),
    }
}

fn absorbed_identity(workers: usize) -> Outcome {
    let cfg = mc(workers).with_horizon(DISCOUNT_HORIZON);
    let mu = SmoothMeasure::indicator(1.0, 2.0);
    let r = energy_identity_check(ProcessModel::AbsorbedBm, 1.0, &mu, None, &cfg).expect("absorbed identity");
    let oracles = (r.rhs - ABSORBED_ENERGY).abs() <= ORACLE_TOL && (r.nu0_term - ABSORBED_NU0).abs() <= ORACLE_TOL;
    let m_ok = r
        .m_part
        .agrees_with(ABSORBED_M_PART, 3.0, r.exterior_bound + r.m_part.tail_bound);
    let spec = PcafSpec::for_measure(&mu, DT.sqrt()).expect("pcaf");
    let ladder = nu0_finite_difference(ProcessModel::AbsorbedBm, &Functional::DiscountedSq { pcaf: spec }, &cfg)
        .expect("entrance ladder");
    let nu0 = ladder.extrapolated;
    let nu0_ok = (nu0.mean - ABSORBED_NU0).abs() <= 0.1 * ABSORBED_NU0;
    Outcome {
        pass: oracles && m_ok && nu0_ok,
        detail: format!(
            "m-part {} vs {ABSORBED_M_PART:.5} (window exterior ≤ {:.1e}); nu0 finite difference {} vs {ABSORBED_NU0:.5} ({:+.1}%); quadrature oracles {oracles}",
            fmt(&r.m_part),
            r.exterior_bound,
            fmt(&nu0),
            100.0 * (nu0.mean / ABSORBED_NU0 - 1.0)
        ),
        fingerprint: [bits(&r.m_part), bits(&nu0)].concat(),
    }
}

fn local_time_mean(workers: usize) -> Outcome {
    let cfg = mc(workers).with_horizon(DISCOUNT_HORIZON);
    let pcaf = PcafSpec::LocalTime { x: 0.0, eps: DT.sqrt() };
    let e = expect(
        ProcessModel::FreeBm,
        &Weighting::PointMass { x: 0.0 },
        &Functional::Discounted { pcaf },
        &cfg,
    )
    .expect("local time");
    Outcome {
        pass: e.agrees_with(LOCAL_TIME_MEAN, 3.0, 0.01 + e.tail_bound),
        detail: format!(
            "{} vs {LOCAL_TIME_MEAN:.5}; gap {:+.5}, allowed 3σ + 0.01 = {:.5}",
            fmt(&e),
            e.mean - LOCAL_TIME_MEAN,
            3.0 * e.std_error + 0.01
        ),
        fingerprint: bits(&e).to_vec(),
    }
}

fn hitting_transform(workers: usize) -> Outcome {
    let cfg = mc(workers).with_horizon(DISCOUNT_HORIZON);
    let (e, exact) = hitting_laplace_check(0.0, 1.0, &cfg).expect("hitting");
    let pass = (exact - HITTING_MEAN).abs() <= 1e-12 && e.agrees_with(HITTING_MEAN, 3.0, 0.005 + e.tail_bound);
    Outcome {
        pass,
        detail: format!("{} vs {HITTING_MEAN:.5}; allowed 3σ + 0.005", fmt(&e)),
        fingerprint: bits(&e).to_vec(),
    }
}

fn values_of(report: &ExperimentReport, label: &str, name: &str) -> Vec<(u32, f64)> {
    column(&report.rows, label, name)
        .iter()
        .filter_map(|(n, c)| n.map(|n| (n, c.value())))
        .collect()
}

/// Values in the upper half of the ladder stay at least half of the last one.
fn plateaus(v: &[(u32, f64)]) -> bool {
    let last = v.last().map_or(0.0, |p| p.1);
    last > 0.0 && v[v.len() / 2..].iter().all(|p| p.1 >= 0.5 * last)
}

fn last_at(v: &[(u32, f64)], n: u32) -> Option<f64> {
    v.iter().find(|p| p.0 == n).map(|p| p.1)
}

fn perturbed_family(workers: usize) -> Outcome {
    let r = harness::run("ex5", &harness_cfg(workers)).expect("ex5");
    let m = values_of(&r, "perturbed", "E_m_dist");
    let rho = values_of(&r, "perturbed", "rho_sq");
    let kappa = values_of(&r, "perturbed", "E_kappa_dist");
    let strict = m.windows(2).all(|w| w[1].1 < w[0].1);
    let small = last_at(&m, 64).is_some_and(|v| v < 0.05);
    let rho_large: Vec<f64> = rho.iter().filter(|p| p.0 >= 32).map(|p| p.1).collect();
    let rho_ok = !rho_large.is_empty() && rho_large.iter().all(|v| (1.3..=1.8).contains(v));
    let kappa_ok = plateaus(&kappa);
    let m_vals: Vec<f64> = m.iter().map(|p| p.1).collect();
    let k_vals: Vec<f64> = kappa.iter().map(|p| p.1).collect();
    Outcome {
        pass: strict && small && rho_ok && kappa_ok,
        detail: format!(
            "E_m distance {m_vals:.4?} strictly decreasing {strict}, < 0.05 at n=64 {small}; rho^2 (n ≥ 32) {rho_large:.4?} in [1.3, 1.8] {rho_ok}; E_kappa {k_vals:.4?} plateau {kappa_ok}"
        ),
        fingerprint: report_bits(&r),
    }
}

fn spike_family(workers: usize) -> Outcome {
    let r = harness::run("ex6", &harness_cfg(workers)).expect("ex6");
    let m = values_of(&r, "spike", "E_m_dist");
    let rho = values_of(&r, "spike", "rho_sq");
    let nu0 = values_of(&r, "spike", "nu0");
    let limit = 2.0 / 3.0;
    let small = last_at(&m, 64).is_some_and(|v| v < 0.05);
    let rho_large: Vec<f64> = rho.iter().filter(|p| p.0 >= 64).map(|p| p.1).collect();
    let rho_ok = !rho_large.is_empty() && rho_large.iter().all(|v| (v - limit).abs() <= 0.15 * limit);
    let nu0_ok = plateaus(&nu0);
    let m_vals: Vec<f64> = m.iter().map(|p| p.1).collect();
    let nu_vals: Vec<f64> = nu0.iter().map(|p| p.1).collect();
    Outcome {
        pass: small && rho_ok && nu0_ok,
        detail: format!(
            "E_m distance {m_vals:.4?} < 0.05 at n=64 {small}; rho^2 (n ≥ 64) {rho_large:.4?} within 15% of 2/3 {rho_ok}; nu0 {nu_vals:.4?} plateau {nu0_ok}"
        ),
        fingerprint: report_bits(&r),
    }
}

fn fukushima_martingale(workers: usize) -> Outcome {
    let cfg = mc(workers);
    let horizon = 1.0;
    let free = fukushima_residual(
        ProcessModel::FreeBm,
        1.0,
        &SmoothMeasure::indicator(0.0, 1.0),
        0.5,
        horizon,
        &cfg,
    )
    .expect("free residual");
    // One step of each time integral per unit time; ‖U₁f‖∞ ≤ ‖f‖∞ = 1.
    let allowance = DT * horizon * 2.0;
    let stat = fukushima_residual(
        ProcessModel::KilledStatic,
        1.0,
        &SmoothMeasure::indicator(0.2, 0.9),
        0.5,
        horizon,
        &cfg,
    )
    .expect("static residual");
    Outcome {
        pass: free.agrees_with(0.0, 3.0, allowance) && stat.agrees_with(0.0, 3.0, 0.0),
        detail: format!(
            "free {} (allowed 3σ + {allowance:.0e}); static killing {} (allowed 3σ)",
            fmt(&free),
            fmt(&stat)
        ),
        fingerprint: [bits(&free), bits(&stat)].concat(),
    }
}

type Criterion = fn(usize) -> Outcome;

const CRITERIA: [(&str, Criterion); 9] = [
    ("flip semigroup point means", flip_point_means),
    ("energy identity, free Brownian motion", free_energy_identity),
    ("energy identity, static killing", static_killing_identity),
    ("energy identity, absorbed Brownian motion", absorbed_identity),
    ("local time discounted mean", local_time_mean),
    ("hitting-time Laplace transform", hitting_transform),
    ("perturbed static family", perturbed_family),
    ("spike family", spike_family),
    ("Fukushima martingale residual", fukushima_martingale),
];

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut reference = Vec::new();
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let out = run(1);
        println!(
            "criterion {:>2} {}: {name}: {} [{:.1} s]",
            i + 1,
            verdict(out.pass),
            out.detail,
            start.elapsed().as_secs_f64()
        );
        if !out.pass {
            failed.push(i + 1);
        }
        reference.push(out.fingerprint);
    }

    let start = Instant::now();
    let mut mismatches = Vec::new();
    for workers in [4, 16] {
        for (i, (_, run)) in CRITERIA.iter().enumerate() {
            if run(workers).fingerprint != reference[i] {
                mismatches.push(format!("criterion {} with {workers} workers", i + 1));
            }
        }
    }
    let same = mismatches.is_empty();
    let compared: usize = reference.iter().map(Vec::len).sum::<usize>() / 2;
    println!(
        "criterion 10 {}: bitwise determinism across 1, 4 and 16 workers: {compared} estimates compared, mismatches {mismatches:?} [{:.1} s]",
        verdict(same),
        start.elapsed().as_secs_f64()
    );
    if !same {
        failed.push(10);
    }

    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
