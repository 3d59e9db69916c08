use rand::seq::index;
use rand::Rng;

use super::wire::{Eavesdropper, IndependentAttack, Lab, Particle, QubitSequence, Tag};
use super::{
    assemble, decode_dpp, symbols_to_bits, BasisCounts, CheckCounts, ProtocolConfig,
    ProtocolError, RunReport, Stages, Transmission,
};
use crate::analysis::{detect_prob_dpp, Protocol};
use crate::exec::stream;
use crate::qstate::{make_bell, Basis, BellKind, LocalUnitary, Symbol};

const NATURE: u64 = 0;
const BOB: u64 = 1;
const ALICE: u64 = 2;

/// `round(c·n)`, at least one when `c > 0` and `n > 0`.
fn check_count(control_prob: f64, n: usize) -> usize {
    if control_prob <= 0.0 || n == 0 {
        return 0;
    }
    ((control_prob * n as f64).round() as usize).clamp(1, n)
}

/// How the `N` pairs are split between the two checks and the message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct Layout {
    pub check_photons: usize,
    pub sampling_pairs: usize,
    pub carriers: usize,
}

impl Layout {
    pub fn new(n_pairs: usize, control_prob: f64) -> Self {
        let check_photons = check_count(control_prob, n_pairs);
        let remaining = n_pairs - check_photons;
        let sampling_pairs = check_count(control_prob, remaining);
        Self {
            check_photons,
            sampling_pairs,
            carriers: remaining - sampling_pairs,
        }
    }
}

fn analytic_rate(config: &ProtocolConfig, t: Transmission) -> f64 {
    config
        .eve(t)
        .map_or(0.0, |p| detect_prob_dpp(p.b()).unwrap_or(0.0))
}

fn sorted_sample<R: Rng + ?Sized>(rng: &mut R, len: usize, amount: usize) -> Vec<usize> {
    let mut picks = index::sample(rng, len, amount).into_vec();
    picks.sort_unstable();
    picks
}

/// Runs the two-step EPR-block protocol with an independent attack from
/// `config.attack` on the configured transmissions.
pub fn run_dpp(config: &ProtocolConfig) -> Result<RunReport, ProtocolError> {
    config.validate(Protocol::Dpp)?;
    match &config.attack {
        Some(p) => run_dpp_inner(config, Some(&mut IndependentAttack::new(p)?)),
        None => run_dpp_inner(config, None),
    }
}

/// Runs the two-step EPR-block protocol with a custom eavesdropper on the
/// transmissions enabled in `config`.
pub fn run_dpp_with(
    config: &ProtocolConfig,
    eve: &mut dyn Eavesdropper,
) -> Result<RunReport, ProtocolError> {
    config.validate(Protocol::Dpp)?;
    run_dpp_inner(config, Some(eve))
}

fn run_dpp_inner(
    config: &ProtocolConfig,
    mut eve: Option<&mut dyn Eavesdropper>,
) -> Result<RunReport, ProtocolError> {
    let mut nature = stream(config.seed, NATURE);
    let mut bob = stream(config.seed, BOB);
    let mut alice = stream(config.seed, ALICE);
    let mut lab = Lab::default();
    let layout = Layout::new(config.n_pairs, config.control_prob);

    // S1: ψ− pairs; first particles form S1, second particles S2.
    let pairs: Vec<usize> = (0..config.n_pairs)
        .map(|_| lab.add(make_bell(BellKind::PsiMinus)))
        .collect();
    let s1 = QubitSequence::from_particles(
        pairs.iter().map(|&r| Particle { register: r, qubit: 0 }),
        Tag::Message,
    );

    // S2: S1 goes to Bob, who checks a random subset in a random basis each.
    if config.eve_on_first_transmission {
        if let Some(e) = eve.as_deref_mut() {
            e.intercept(&mut s1.wire(&mut lab))?;
        }
    }
    let checked = sorted_sample(&mut bob, config.n_pairs, layout.check_photons);
    let mut first = CheckCounts::default();
    let mut bases = BasisCounts::default();
    for &i in &checked {
        let basis = if bob.random::<bool>() { Basis::X } else { Basis::Z };
        let reg = lab.get_mut(pairs[i]);
        let bob_bit = reg.measure_mut(0, basis, &mut nature)?;
        let alice_bit = reg.measure_mut(1, basis, &mut nature)?;
        // without Eve the outcomes are always opposite
        let detected = bob_bit == alice_bit;
        first.record(detected);
        match basis {
            Basis::Z => bases.z.record(detected),
            Basis::X => bases.x.record(detected),
        }
    }
    let first_rate = analytic_rate(config, Transmission::First);
    if first.rate() > config.abort_threshold {
        let stages = Stages {
            first,
            first_rate,
            second: None,
        };
        return Ok(assemble(Protocol::Dpp, config, stages, None, Some(bases)));
    }

    // S3: Alice hides sampling pairs among the rest and dense-codes on S2.
    let mut is_checked = vec![false; config.n_pairs];
    checked.iter().for_each(|&i| is_checked[i] = true);
    let remaining: Vec<usize> = (0..config.n_pairs).filter(|&i| !is_checked[i]).collect();
    let mut sample_symbol: Vec<Option<Symbol>> = vec![None; remaining.len()];
    for j in sorted_sample(&mut alice, remaining.len(), layout.sampling_pairs) {
        sample_symbol[j] = Symbol::new(alice.random_range(0..4));
    }
    let symbols = config.symbols();
    let mut carrier = 0;
    for (j, &i) in remaining.iter().enumerate() {
        let sym = match sample_symbol[j] {
            Some(s) => s,
            None => {
                carrier += 1;
                symbols.get(carrier - 1).copied().unwrap_or(Symbol::ALL[0])
            }
        };
        lab.get_mut(pairs[i])
            .apply_local_mut(1, &LocalUnitary::encoding(sym))?;
    }
    let s2 = QubitSequence::from_particles(
        remaining.iter().map(|&i| Particle { register: pairs[i], qubit: 1 }),
        Tag::Message,
    );
    if config.eve_on_second_transmission {
        if let Some(e) = eve {
            e.intercept(&mut s2.wire(&mut lab))?;
        }
    }

    // S4: Bob Bell-measures every pair and checks the announced samples.
    let mut second = CheckCounts::default();
    let mut decoded = Vec::with_capacity(symbols.len());
    for (j, &i) in remaining.iter().enumerate() {
        let sym = decode_dpp(lab.get_mut(pairs[i]).measure_bell_pair_mut(0, 1, &mut nature)?);
        match sample_symbol[j] {
            Some(announced) => second.record(sym != announced),
            None if decoded.len() < symbols.len() => decoded.push(sym),
            None => {}
        }
    }
    let stages = Stages {
        first,
        first_rate,
        second: Some((second, analytic_rate(config, Transmission::Second))),
    };
    // S5: abandon on a noisy second check
    let recovered = (second.rate() <= config.abort_threshold).then(|| symbols_to_bits(decoded));
    Ok(assemble(Protocol::Dpp, config, stages, recovered, Some(bases)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::AttackParams;
    use crate::protocol::random_message;

    fn message(bits: usize, seed: u64) -> Vec<bool> {
        random_message(bits, &mut stream(seed, 99))
    }

    #[test]
    fn layout_counts() {
        let l = Layout::new(1250, 0.1);
        assert_eq!(l.check_photons, 125);
        assert_eq!(l.sampling_pairs, 113);
        assert_eq!(l.carriers, 1012);
        assert_eq!(Layout::new(10, 0.0).carriers, 10);
        let tiny = Layout::new(1, 0.3);
        assert_eq!((tiny.check_photons, tiny.sampling_pairs, tiny.carriers), (1, 0, 0));
    }

    #[test]
    fn noiseless_run_recovers_message() {
        let cfg = ProtocolConfig::new(300, 0.2, 9).with_message(message(300, 1));
        let r = run_dpp(&cfg).unwrap();
        assert!(!r.aborted);
        assert_eq!(r.detections, 0);
        assert_eq!(r.recovered_bits, cfg.message_bits);
        let bases = r.first_check_bases.unwrap();
        assert_eq!(bases.z.checked + bases.x.checked, r.first_check.checked);
        assert!(bases.z.checked > 0 && bases.x.checked > 0);
    }

    #[test]
    fn first_transmission_attack_aborts() {
        let cfg = ProtocolConfig::new(400, 0.5, 2)
            .with_message(message(20, 2))
            .with_attack(AttackParams::symmetric(0.5).unwrap(), true, false);
        let r = run_dpp(&cfg).unwrap();
        assert!(r.aborted && r.recovered_bits.is_empty() && r.second_check.is_none());
        assert!((r.analytic_detection_rate - 0.5).abs() < 1e-12);
        assert_eq!(r.decoys_checked, 200);
    }

    #[test]
    fn second_transmission_attack_corrupts_message() {
        let cfg = ProtocolConfig::new(400, 0.25, 3)
            .with_message(message(200, 3))
            .with_attack(AttackParams::symmetric(0.5).unwrap(), false, true)
            .with_abort_threshold(1.0);
        let r = run_dpp(&cfg).unwrap();
        assert_eq!(r.first_check.detected, 0);
        assert!(r.second_check.unwrap().detected > 0);
        assert!(r.bit_error_count > 0);
        assert_eq!(r.recovered_bits.len(), 200);
    }

    #[test]
    fn default_abort_threshold_stops_noisy_second_check() {
        let cfg = ProtocolConfig::new(400, 0.25, 3)
            .with_message(message(200, 3))
            .with_attack(AttackParams::symmetric(0.5).unwrap(), false, true);
        let r = run_dpp(&cfg).unwrap();
        assert!(r.aborted && r.recovered_bits.is_empty());
        assert!(r.second_check.is_some());
    }

    #[test]
    fn deterministic() {
        let cfg = ProtocolConfig::new(120, 0.3, 21)
            .with_message(message(100, 4))
            .with_attack(AttackParams::from_moduli(0.8, 0.7).unwrap(), true, true)
            .with_abort_threshold(1.0);
        assert_eq!(run_dpp(&cfg).unwrap(), run_dpp(&cfg).unwrap());
    }
}
