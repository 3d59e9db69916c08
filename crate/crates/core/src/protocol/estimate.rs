//! Single-check Monte Carlo estimator. Each trial prepares one check state,
//! lets Eve's probe act on the travelling particles and performs the honest
//! parties' comparison.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ProtocolError;
use crate::analysis::Protocol;
use crate::channel::{attack_qubit_mut, AttackParams};
use crate::exec::{count_successes, Execution};
use crate::qstate::{make_bell, make_ghz4, Amplitude, Basis, BellKind};

/// Empirical detection frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEstimate {
    pub trials: u64,
    pub detections: u64,
    pub rate: f64,
    pub stderr: f64,
}

impl DetectionEstimate {
    fn new(trials: u64, detections: u64) -> Self {
        let rate = detections as f64 / trials as f64;
        Self {
            trials,
            detections,
            rate,
            stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
        }
    }
}

type Probe = [[Amplitude; 4]; 4];

/// One GHZ decoy group: particle 1 measured by its owner, particles 2–4
/// attacked then measured by the receiver.
fn ghz_trial(u: &Probe, rng: &mut ChaCha8Rng) -> bool {
    let mut g = make_ghz4();
    let owner = g.measure_z_mut(0, rng).expect("valid qubit");
    for q in 1..4 {
        attack_qubit_mut(&mut g, q, u).expect("valid qubit");
    }
    (1..4).any(|q| g.measure_z_mut(q, rng).expect("normalized") != owner)
}

/// One EPR check photon: the travelling half of `|ψ−>` is attacked, then both
/// halves are measured in `basis` (random when `None`).
fn epr_trial(u: &Probe, basis: Option<Basis>, rng: &mut ChaCha8Rng) -> bool {
    let basis = basis.unwrap_or_else(|| if rng.random::<bool>() { Basis::X } else { Basis::Z });
    let mut s = make_bell(BellKind::PsiMinus);
    attack_qubit_mut(&mut s, 0, u).expect("valid qubit");
    let receiver = s.measure_mut(0, basis, rng).expect("normalized");
    let sender = s.measure_mut(1, basis, rng).expect("normalized");
    receiver == sender
}

fn prepare(attack: &AttackParams, trials: u64) -> Result<Probe, ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::NoTrials);
    }
    Ok(attack.full_unitary()?)
}

/// Per-check detection frequency over `trials` independent checks.
/// Deterministic for a fixed seed under either execution mode.
pub fn estimate_detection_rate(
    protocol: Protocol,
    attack: &AttackParams,
    trials: u64,
    seed: u64,
) -> Result<DetectionEstimate, ProtocolError> {
    estimate_detection_rate_with(protocol, attack, trials, seed, Execution::default())
}

pub fn estimate_detection_rate_with(
    protocol: Protocol,
    attack: &AttackParams,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<DetectionEstimate, ProtocolError> {
    let u = prepare(attack, trials)?;
    let detections = match protocol {
        Protocol::Fpp => count_successes(trials, seed, exec, |rng| ghz_trial(&u, rng)),
        Protocol::Dpp => count_successes(trials, seed, exec, |rng| epr_trial(&u, None, rng)),
    };
    Ok(DetectionEstimate::new(trials, detections))
}

/// EPR-pair check restricted to one measurement basis.
pub fn estimate_dpp_basis(
    attack: &AttackParams,
    basis: Basis,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<DetectionEstimate, ProtocolError> {
    let u = prepare(attack, trials)?;
    let detections = count_successes(trials, seed, exec, |rng| epr_trial(&u, Some(basis), rng));
    Ok(DetectionEstimate::new(trials, detections))
}
