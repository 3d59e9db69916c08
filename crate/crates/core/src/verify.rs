//! One-shot self-check: reruns the headline comparisons between simulation,
//! numerics and closed forms, and reports pass/fail per check.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::analysis::{
    self, eavesdrop_success, eavesdrop_success_info, info_gain_dpp, probe_density_matrix,
    probe_eigenvalues_closed, solve_detection_for_info, von_neumann_info, DomainError,
    EncodingDistribution, Protocol,
};
use crate::channel::AttackParams;
use crate::exec::{stream, Execution};
use crate::protocol::{
    decode_fpp, estimate_detection_rate_with, random_message, run_dpp, run_fpp, ProtocolConfig,
};
use crate::qstate::{make_bell, BellKind, LocalUnitary, Symbol};

/// Closed forms the checks compare against. Swappable so that a deliberately
/// broken formula can be shown to fail.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub detect_fpp: fn(f64, f64) -> Result<f64, DomainError>,
}

impl Default for Formulas {
    fn default() -> Self {
        Self {
            detect_fpp: analysis::detect_prob_fpp,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 2024,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Acceptance band for a Monte Carlo frequency: within three binomial
/// standard errors of `p`, or exact when `p` is 0 or 1.
pub fn within_three_sigma(empirical: f64, p: f64, trials: u64) -> bool {
    if !(0.0..=1.0).contains(&p) {
        return false;
    }
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    if sigma == 0.0 {
        empirical == p
    } else {
        (empirical - p).abs() <= 3.0 * sigma
    }
}

pub const MOD_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn headline() -> (bool, String) {
    let dpp = solve_detection_for_info(2.0, Protocol::Dpp);
    let fpp = solve_detection_for_info(2.0, Protocol::Fpp);
    match (dpp, fpp) {
        (Ok(d), Ok(f)) => (
            (d - 0.5).abs() < 1e-6 && (f - 0.875).abs() < 1e-6,
            format!("d_DPP(I=2)={d:.6}, d_FPP(I=2)={f:.6}"),
        ),
        (d, f) => (false, format!("{d:?} {f:?}")),
    }
}

fn fpp_grid(opts: &VerifyOptions, formulas: &Formulas) -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, &a) in MOD_GRID.iter().enumerate() {
        for (j, &t) in MOD_GRID.iter().enumerate() {
            let attack = AttackParams::from_moduli(a, t).expect("grid in range");
            let seed = opts.seed ^ (((i * 5 + j) as u64) << 32);
            let est = estimate_detection_rate_with(Protocol::Fpp, &attack, opts.trials, seed, opts.exec)
                .expect("valid attack");
            let p = (formulas.detect_fpp)(a, t).unwrap_or(f64::NAN);
            let sigma = (p * (1.0 - p) / opts.trials as f64).sqrt().max(f64::MIN_POSITIVE);
            worst = worst.max((est.rate - p).abs() / sigma);
            if !within_three_sigma(est.rate, p, opts.trials) {
                failures.push(format!("(a={a}, t={t}): {:.5} vs {p:.5}", est.rate));
            }
        }
    }
    if failures.is_empty() {
        (true, format!("25 points within 3σ (max |z| = {worst:.2})"))
    } else {
        (false, failures.join("; "))
    }
}

fn dpp_symmetric(opts: &VerifyOptions) -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, b) in [0.0, 0.25, 0.5].into_iter().enumerate() {
        let attack = AttackParams::symmetric(b).expect("in range");
        let est = estimate_detection_rate_with(
            Protocol::Dpp,
            &attack,
            opts.trials,
            opts.seed.wrapping_add(1000 + k as u64),
            opts.exec,
        )
        .expect("valid attack");
        ok &= within_three_sigma(est.rate, b, opts.trials);
        parts.push(format!("|β|²={b}: {:.5}", est.rate));
    }
    (ok, parts.join(", "))
}

/// Random distribution on the simplex from normalized exponentials.
fn random_distribution<R: Rng + ?Sized>(rng: &mut R) -> EncodingDistribution {
    let mut w = [0.0; 4];
    for x in &mut w {
        *x = -(1.0 - rng.random::<f64>()).ln();
    }
    let sum: f64 = w.iter().sum();
    let mut p = w.map(|x| x / sum);
    p[3] = 1.0 - p[0] - p[1] - p[2];
    EncodingDistribution::new(p).expect("normalized")
}

/// Largest deviation between closed-form and numerical spectra over a
/// `side × side` grid of random (distribution, d), plus the largest
/// violation of Hermiticity, unit trace and positivity.
pub fn spectrum_deviation(side: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, 404);
    let dists: Vec<EncodingDistribution> = (0..side).map(|_| random_distribution(&mut rng)).collect();
    let ds: Vec<f64> = (0..side).map(|_| rng.random::<f64>()).collect();
    let (mut spec_dev, mut state_dev): (f64, f64) = (0.0, 0.0);
    for dist in &dists {
        for &d in &ds {
            let rho = probe_density_matrix(dist, 1.0 - d).expect("in range");
            let numeric = rho.eigenvalues();
            let mut closed = probe_eigenvalues_closed(dist, d).expect("in range").to_vec();
            closed.sort_by(f64::total_cmp);
            for (x, y) in numeric.iter().zip(&closed) {
                spec_dev = spec_dev.max((x - y).abs());
            }
            state_dev = state_dev
                .max(rho.hermiticity_deviation())
                .max((rho.trace().re - 1.0).abs())
                .max(rho.trace().im.abs())
                .max(-numeric[0]);
        }
    }
    (spec_dev, state_dev)
}

fn spectrum(seed: u64) -> (bool, String) {
    let (spec, state) = spectrum_deviation(20, seed);
    (
        spec <= 1e-10 && state <= 1e-12,
        format!("max eigenvalue deviation {spec:.2e}, max state-property deviation {state:.2e}"),
    )
}

fn entropy_identity() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for k in 0..=100 {
        let d = k as f64 / 100.0;
        let ev = probe_eigenvalues_closed(&EncodingDistribution::uniform(), d).expect("in range");
        let lhs = von_neumann_info(&ev).expect("valid spectrum");
        worst = worst.max((lhs - info_gain_dpp(d).expect("in range")).abs());
    }
    (worst <= 1e-9, format!("101 points, max deviation {worst:.2e}"))
}

fn dominance() -> (bool, String) {
    let mut ok = true;
    for k in 1..=50 {
        let target = 1.0 + k as f64 / 50.0;
        let f = solve_detection_for_info(target, Protocol::Fpp).expect("in range");
        let d = solve_detection_for_info(target, Protocol::Dpp).expect("in range");
        ok &= f >= d;
        if k == 50 {
            ok &= f > d;
        }
    }
    (ok, "50 targets in (1, 2]".into())
}

/// `(1 − c) Σ_{k<terms} (c(1 − d))^k`.
pub fn partial_success_sum(c: f64, d: f64, terms: usize) -> f64 {
    let r = c * (1.0 - d);
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..terms {
        sum += term;
        term *= r;
    }
    (1.0 - c) * sum
}

fn geometric() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for i in 1..=9 {
        for j in 1..=9 {
            let (c, d) = (i as f64 / 10.0, j as f64 / 10.0);
            let closed = eavesdrop_success(c, d).expect("in range");
            worst = worst.max((closed - partial_success_sum(c, d, 1000)).abs());
        }
    }
    let tail = eavesdrop_success_info(1e4, 0.5, 0.5).expect("in range");
    (
        worst <= 1e-12 && tail < 1e-6,
        format!("max series deviation {worst:.2e}, s(1e4, 0.5, 0.5) = {tail:.3e}"),
    )
}

fn protocol_correctness(seed: u64) -> (bool, String) {
    let msg = random_message(2000, &mut stream(seed, 8));
    let fpp_cfg = ProtocolConfig::new(1000, 0.2, seed).with_message(msg.clone());
    let dpp_cfg = ProtocolConfig::new(1250, 0.1, seed).with_message(msg.clone());
    let fpp = run_fpp(&fpp_cfg).expect("valid config");
    let dpp = run_dpp(&dpp_cfg).expect("valid config");
    let fpp_ok = fpp.recovered_bits == msg && !fpp.aborted;
    let dpp_ok = dpp.recovered_bits == msg && !dpp.aborted;
    let mut rng = stream(seed, 9);
    let round_trip = Symbol::ALL.iter().all(|&s| {
        let mut st = make_bell(BellKind::PhiPlus)
            .apply_local(0, &LocalUnitary::encoding(s))
            .expect("qubit in range");
        decode_fpp(st.measure_bell_pair_mut(0, 1, &mut rng).expect("pair")) == s
    });
    let repeat = run_fpp(&fpp_cfg).expect("valid config") == fpp
        && run_dpp(&dpp_cfg).expect("valid config") == dpp;
    (
        fpp_ok && dpp_ok && round_trip && repeat,
        format!("fpp={fpp_ok} dpp={dpp_ok} round_trip={round_trip} deterministic={repeat}"),
    )
}

pub fn run_checks(opts: &VerifyOptions, formulas: &Formulas) -> Vec<CheckOutcome> {
    vec![
        timed(1, "headline detection at I=2", headline),
        timed(2, "GHZ-decoy Monte Carlo vs closed form", || fpp_grid(opts, formulas)),
        timed(3, "EPR-check Monte Carlo vs |β|²", || dpp_symmetric(opts)),
        timed(4, "probe spectrum closed form vs eigensolver", || spectrum(opts.seed)),
        timed(5, "von Neumann entropy equals 1+H(d)", entropy_identity),
        timed(6, "GHZ decoys force higher detection", dominance),
        timed(7, "geometric series and asymptotic security", geometric),
        timed(8, "noiseless protocol correctness", || protocol_correctness(opts.seed)),
    ]
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}
