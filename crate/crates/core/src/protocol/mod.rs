//! Executable protocol runs and the Monte Carlo detection estimator.
//!
//! - [`run_dpp`]: Alice sends `|ψ−>` halves in two blocks; the first block is
//!   checked with random Z/X measurements, the second with sampling pairs.
//! - [`run_fpp`]: Bob's `|φ+>` travel qubits carry four-particle GHZ decoys in
//!   both directions; Alice dense-codes on the travel qubits.
//!
//! Every run is driven by three independent random streams derived from the
//! configured seed (measurement outcomes, Bob's choices, Alice's choices), so
//! equal configs give equal reports.

mod dpp;
mod estimate;
mod fpp;
mod wire;

pub use dpp::{run_dpp, run_dpp_with};
pub use estimate::{
    estimate_detection_rate, estimate_detection_rate_with, estimate_dpp_basis, DetectionEstimate,
};
pub use fpp::{run_fpp, run_fpp_with};
pub use wire::{Eavesdropper, IndependentAttack, Wire};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::Protocol;
use crate::channel::{validate_attack, AttackError, AttackParams, AttackSummary};
use crate::qstate::{BellKind, StateError, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("n_pairs must be at least 1")]
    NoPairs,
    #[error("control probability {0} outside [0, 1)")]
    ControlProb(f64),
    #[error("abort threshold {0} outside [0, 1]")]
    AbortThreshold(f64),
    #[error("message has odd length {0}")]
    OddMessage(usize),
    #[error("message needs {needed} carrier pairs, only {available} available")]
    MessageTooLong { needed: usize, available: usize },
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Inputs of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Number of message EPR pairs `N`.
    pub n_pairs: usize,
    /// Control-mode probability `c`.
    pub control_prob: f64,
    /// Eve's probe; `None` means no eavesdropper.
    pub attack: Option<AttackParams>,
    pub eve_on_first_transmission: bool,
    pub eve_on_second_transmission: bool,
    pub seed: u64,
    /// Two bits per carrier pair, high bit first.
    pub message_bits: Vec<bool>,
    /// A check aborts the run when its detection rate exceeds this.
    pub abort_threshold: f64,
}

impl ProtocolConfig {
    pub fn new(n_pairs: usize, control_prob: f64, seed: u64) -> Self {
        Self {
            n_pairs,
            control_prob,
            attack: None,
            eve_on_first_transmission: false,
            eve_on_second_transmission: false,
            seed,
            message_bits: Vec::new(),
            abort_threshold: 0.0,
        }
    }

    pub fn with_message(mut self, bits: Vec<bool>) -> Self {
        self.message_bits = bits;
        self
    }

    pub fn with_attack(mut self, attack: AttackParams, first: bool, second: bool) -> Self {
        self.attack = Some(attack);
        self.eve_on_first_transmission = first;
        self.eve_on_second_transmission = second;
        self
    }

    pub fn with_abort_threshold(mut self, threshold: f64) -> Self {
        self.abort_threshold = threshold;
        self
    }

    /// Pairs that can carry message symbols.
    pub fn message_capacity(&self, protocol: Protocol) -> usize {
        match protocol {
            Protocol::Fpp => self.n_pairs,
            Protocol::Dpp => dpp::Layout::new(self.n_pairs, self.control_prob).carriers,
        }
    }

    pub fn validate(&self, protocol: Protocol) -> Result<(), ProtocolError> {
        if self.n_pairs == 0 {
            return Err(ProtocolError::NoPairs);
        }
        if !(0.0..1.0).contains(&self.control_prob) {
            return Err(ProtocolError::ControlProb(self.control_prob));
        }
        if !(0.0..=1.0).contains(&self.abort_threshold) {
            return Err(ProtocolError::AbortThreshold(self.abort_threshold));
        }
        if !self.message_bits.len().is_multiple_of(2) {
            return Err(ProtocolError::OddMessage(self.message_bits.len()));
        }
        let needed = self.message_bits.len() / 2;
        let available = self.message_capacity(protocol);
        if needed > available {
            return Err(ProtocolError::MessageTooLong { needed, available });
        }
        if let Some(p) = &self.attack {
            if !validate_attack(p) {
                return Err(AttackError::Invalid.into());
            }
        }
        Ok(())
    }

    fn symbols(&self) -> Vec<Symbol> {
        self.message_bits
            .chunks_exact(2)
            .map(|b| Symbol::from_bits(b[0], b[1]))
            .collect()
    }

    fn eve(&self, transmission: Transmission) -> Option<&AttackParams> {
        let on = match transmission {
            Transmission::First => self.eve_on_first_transmission,
            Transmission::Second => self.eve_on_second_transmission,
        };
        self.attack.as_ref().filter(|_| on)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transmission {
    First,
    Second,
}

/// Decoy GHZ groups accompanying `n_pairs` pairs: `round(c·N/(1−c))`, at
/// least one whenever `c > 0`.
pub fn decoy_count(control_prob: f64, n_pairs: usize) -> usize {
    if control_prob <= 0.0 {
        return 0;
    }
    let raw = (control_prob * n_pairs as f64 / (1.0 - control_prob)).round();
    (raw as usize).max(1)
}

/// Outcome tally of one eavesdropping check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CheckCounts {
    pub checked: u64,
    pub detected: u64,
}

impl CheckCounts {
    pub fn rate(&self) -> f64 {
        self.detected as f64 / self.checked.max(1) as f64
    }

    fn record(&mut self, detected: bool) {
        self.checked += 1;
        self.detected += detected as u64;
    }

    fn merge(self, other: Self) -> Self {
        Self {
            checked: self.checked + other.checked,
            detected: self.detected + other.detected,
        }
    }
}

/// Per-basis tally of the EPR-pair check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BasisCounts {
    pub z: CheckCounts,
    pub x: CheckCounts,
}

/// Outputs of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub decoys_checked: u64,
    pub detections: u64,
    pub empirical_detection_rate: f64,
    /// Expected detection rate over the checks actually performed, from the
    /// closed-form per-check probability of the configured attack.
    pub analytic_detection_rate: f64,
    pub aborted: bool,
    pub recovered_bits: Vec<bool>,
    pub bit_error_count: u64,
    pub first_check: CheckCounts,
    /// Absent when the run aborted after the first check.
    pub second_check: Option<CheckCounts>,
    /// EPR-pair runs only: the first check split by measurement basis.
    pub first_check_bases: Option<BasisCounts>,
    pub attack: Option<AttackSummary>,
}

struct Stages {
    first: CheckCounts,
    first_rate: f64,
    second: Option<(CheckCounts, f64)>,
}

fn assemble(
    protocol: Protocol,
    config: &ProtocolConfig,
    stages: Stages,
    recovered: Option<Vec<bool>>,
    first_check_bases: Option<BasisCounts>,
) -> RunReport {
    let total = match &stages.second {
        Some((c, _)) => stages.first.merge(*c),
        None => stages.first,
    };
    let expected = stages.first.checked as f64 * stages.first_rate
        + stages
            .second
            .map_or(0.0, |(c, rate)| c.checked as f64 * rate);
    let aborted = recovered.is_none();
    let recovered_bits = recovered.unwrap_or_default();
    let bit_error_count = recovered_bits
        .iter()
        .zip(&config.message_bits)
        .filter(|(a, b)| a != b)
        .count() as u64;
    RunReport {
        protocol,
        decoys_checked: total.checked,
        detections: total.detected,
        empirical_detection_rate: total.rate(),
        analytic_detection_rate: expected / total.checked.max(1) as f64,
        aborted,
        recovered_bits,
        bit_error_count,
        first_check: stages.first,
        second_check: stages.second.map(|(c, _)| c),
        first_check_bases,
        attack: config.attack.as_ref().map(AttackSummary::from),
    }
}

/// Symbol decoded from the Bell state of an EPR-block pair.
pub fn decode_dpp(kind: BellKind) -> Symbol {
    let v = match kind {
        BellKind::PsiMinus => 0,
        BellKind::PsiPlus => 1,
        BellKind::PhiMinus => 2,
        BellKind::PhiPlus => 3,
    };
    Symbol::new(v).expect("symbol in range")
}

/// Symbol decoded from the Bell state of a GHZ-decoy protocol pair.
pub fn decode_fpp(kind: BellKind) -> Symbol {
    let v = match kind {
        BellKind::PhiPlus => 0,
        BellKind::PhiMinus => 1,
        BellKind::PsiPlus => 2,
        BellKind::PsiMinus => 3,
    };
    Symbol::new(v).expect("symbol in range")
}

fn symbols_to_bits(symbols: impl IntoIterator<Item = Symbol>) -> Vec<bool> {
    symbols.into_iter().flat_map(Symbol::bits).collect()
}

/// Seeded slot pattern for merging `decoys` decoy particles into `own`
/// message particles.
fn decoy_slots<R: Rng + ?Sized>(own: usize, decoys: usize, rng: &mut R) -> Vec<bool> {
    let mut slots: Vec<bool> = std::iter::repeat_n(false, own)
        .chain(std::iter::repeat_n(true, decoys))
        .collect();
    slots.shuffle(rng);
    slots
}

/// Random message suitable for tests and the CLI.
pub fn random_message<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> Vec<bool> {
    (0..bits).map(|_| rng.random()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoy_count_rounding() {
        assert_eq!(decoy_count(0.0, 100), 0);
        assert_eq!(decoy_count(0.5, 100), 100);
        assert_eq!(decoy_count(0.2, 10), 3); // 2.5 rounds away from zero
        assert_eq!(decoy_count(0.01, 1), 1);
        assert_eq!(decoy_count(0.75, 4), 12);
    }

    #[test]
    fn decoding_tables_invert_encoding() {
        use crate::qstate::{make_bell, LocalUnitary, EXACT_TOL};
        for sym in Symbol::ALL {
            let u = LocalUnitary::encoding(sym);
            let fpp = make_bell(BellKind::PhiPlus).apply_local(0, &u).unwrap();
            let dpp = make_bell(BellKind::PsiMinus).apply_local(1, &u).unwrap();
            let find = |s: &crate::qstate::StateVector| {
                *BellKind::ALL
                    .iter()
                    .find(|k| s.equals_up_to_phase(&make_bell(**k), EXACT_TOL))
                    .unwrap()
            };
            assert_eq!(decode_fpp(find(&fpp)), sym);
            assert_eq!(decode_dpp(find(&dpp)), sym);
        }
    }

    #[test]
    fn config_validation() {
        let ok = ProtocolConfig::new(10, 0.2, 1).with_message(vec![true; 20]);
        assert!(ok.validate(Protocol::Fpp).is_ok());
        assert_eq!(
            ok.validate(Protocol::Dpp),
            Err(ProtocolError::MessageTooLong {
                needed: 10,
                available: ok.message_capacity(Protocol::Dpp)
            })
        );
        assert_eq!(
            ProtocolConfig::new(0, 0.2, 1).validate(Protocol::Fpp),
            Err(ProtocolError::NoPairs)
        );
        assert_eq!(
            ProtocolConfig::new(4, 1.0, 1).validate(Protocol::Fpp),
            Err(ProtocolError::ControlProb(1.0))
        );
        assert_eq!(
            ProtocolConfig::new(4, 0.1, 1)
                .with_message(vec![true; 3])
                .validate(Protocol::Fpp),
            Err(ProtocolError::OddMessage(3))
        );
        let mut bad = AttackParams::identity();
        bad.alpha = num_complex::Complex64::new(2.0, 0.0);
        assert!(ProtocolConfig::new(4, 0.1, 1)
            .with_attack(bad, true, false)
            .validate(Protocol::Fpp)
            .is_err());
    }

    #[test]
    fn slots_have_requested_counts() {
        let mut rng = crate::exec::stream(3, 0);
        let slots = decoy_slots(10, 6, &mut rng);
        assert_eq!(slots.len(), 16);
        assert_eq!(slots.iter().filter(|&&d| d).count(), 6);
    }
}
