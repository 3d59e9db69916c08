use rand::Rng;

use super::wire::{Eavesdropper, IndependentAttack, Lab, Particle, QubitSequence, Tag};
use super::{
    assemble, decode_fpp, decoy_count, decoy_slots, symbols_to_bits, CheckCounts, ProtocolConfig,
    ProtocolError, RunReport, Stages, Transmission,
};
use crate::analysis::{detect_prob_fpp, Protocol};
use crate::exec::stream;
use crate::qstate::{make_bell, make_ghz4, BellKind, LocalUnitary, Symbol};

const NATURE: u64 = 0;
const BOB: u64 = 1;
const ALICE: u64 = 2;

/// What the decoy owner announces once the sequence has arrived: where each
/// group's three particles sit and the Z outcome of its retained particle.
struct DecoyAnnouncement {
    groups: Vec<([usize; 3], bool)>,
    registers: Vec<usize>,
}

/// Prepares `count` GHZ groups, measures particle 1 of each in Z and merges
/// particles 2–4 into `own` at seeded random slots.
fn insert_decoys<R: Rng + ?Sized, N: Rng + ?Sized>(
    lab: &mut Lab,
    own: &QubitSequence,
    count: usize,
    inserter: &mut R,
    nature: &mut N,
) -> Result<(QubitSequence, DecoyAnnouncement), ProtocolError> {
    let mut bits = Vec::with_capacity(count);
    let mut registers = Vec::with_capacity(count);
    let mut particles = Vec::with_capacity(3 * count);
    for _ in 0..count {
        let reg = lab.add(make_ghz4());
        bits.push(lab.measure_z(Particle { register: reg, qubit: 0 }, nature)?);
        registers.push(reg);
        particles.extend((1..4).map(|qubit| Particle { register: reg, qubit }));
    }
    let slots = decoy_slots(own.len(), particles.len(), inserter);
    let merged = own.interleave(&particles, &slots);
    let positions: Vec<usize> = (0..merged.len())
        .filter(|&i| merged.tag(i) == Tag::Decoy)
        .collect();
    let groups = positions
        .chunks_exact(3)
        .zip(bits)
        .map(|(p, bit)| ([p[0], p[1], p[2]], bit))
        .collect();
    Ok((merged, DecoyAnnouncement { groups, registers }))
}

/// Receiver side of a decoy check: a group counts as detected when any of its
/// three Z outcomes differs from the announced bit.
fn check_decoys<N: Rng + ?Sized>(
    lab: &mut Lab,
    received: &QubitSequence,
    announcement: &DecoyAnnouncement,
    nature: &mut N,
) -> Result<CheckCounts, ProtocolError> {
    let mut counts = CheckCounts::default();
    for (positions, bit) in &announcement.groups {
        let mut mismatch = false;
        for &pos in positions {
            mismatch |= lab.measure_z(received.particle(pos), nature)? != *bit;
        }
        counts.record(mismatch);
    }
    for &reg in &announcement.registers {
        lab.discard(reg);
    }
    Ok(counts)
}

fn analytic_rate(config: &ProtocolConfig, t: Transmission) -> f64 {
    config
        .eve(t)
        .map_or(0.0, |p| detect_prob_fpp(p.a(), p.t()).unwrap_or(0.0))
}

/// Runs the GHZ-decoy protocol with an independent attack from
/// `config.attack` on the configured transmissions.
pub fn run_fpp(config: &ProtocolConfig) -> Result<RunReport, ProtocolError> {
    config.validate(Protocol::Fpp)?;
    match &config.attack {
        Some(p) => run_fpp_inner(config, Some(&mut IndependentAttack::new(p)?)),
        None => run_fpp_inner(config, None),
    }
}

/// Runs the GHZ-decoy protocol with a custom eavesdropper, who intercepts the
/// transmissions enabled in `config`. `config.attack`, if set, only feeds the
/// analytic rate.
pub fn run_fpp_with(
    config: &ProtocolConfig,
    eve: &mut dyn Eavesdropper,
) -> Result<RunReport, ProtocolError> {
    config.validate(Protocol::Fpp)?;
    run_fpp_inner(config, Some(eve))
}

fn run_fpp_inner(
    config: &ProtocolConfig,
    mut eve: Option<&mut dyn Eavesdropper>,
) -> Result<RunReport, ProtocolError> {
    let mut nature = stream(config.seed, NATURE);
    let mut bob = stream(config.seed, BOB);
    let mut alice = stream(config.seed, ALICE);
    let mut lab = Lab::default();
    let decoys = decoy_count(config.control_prob, config.n_pairs);

    // S1: Bob's φ+ pairs; particle 1 travels (A), particle 2 stays home (B).
    let pairs: Vec<usize> = (0..config.n_pairs)
        .map(|_| lab.add(make_bell(BellKind::PhiPlus)))
        .collect();
    let travel = QubitSequence::from_particles(
        pairs.iter().map(|&r| Particle { register: r, qubit: 0 }),
        Tag::Message,
    );

    // S2–S3: decoys into A forming D, D goes to Alice.
    let (d_seq, bob_decoys) = insert_decoys(&mut lab, &travel, decoys, &mut bob, &mut nature)?;
    if config.eve_on_first_transmission {
        if let Some(e) = eve.as_deref_mut() {
            e.intercept(&mut d_seq.wire(&mut lab))?;
        }
    }

    // S4: first check by Alice against Bob's announcement.
    let first = check_decoys(&mut lab, &d_seq, &bob_decoys, &mut nature)?;
    let first_rate = analytic_rate(config, Transmission::First);
    if first.rate() > config.abort_threshold {
        let stages = Stages {
            first,
            first_rate,
            second: None,
        };
        return Ok(assemble(Protocol::Fpp, config, stages, None, None));
    }

    // S5: Alice encodes on A, adds her own decoys and sends back.
    let a_seq = d_seq.without_decoys();
    let symbols = config.symbols();
    for (i, p) in a_seq.particles().enumerate() {
        let sym = symbols.get(i).copied().unwrap_or(Symbol::ALL[0]);
        lab.get_mut(p.register)
            .apply_local_mut(p.qubit, &LocalUnitary::encoding(sym))?;
    }
    let (back_seq, alice_decoys) = insert_decoys(&mut lab, &a_seq, decoys, &mut alice, &mut nature)?;
    if config.eve_on_second_transmission {
        if let Some(e) = eve {
            e.intercept(&mut back_seq.wire(&mut lab))?;
        }
    }

    // S6: Bob checks Alice's decoys and Bell-measures (A, B).
    let second = check_decoys(&mut lab, &back_seq, &alice_decoys, &mut nature)?;
    let second_rate = analytic_rate(config, Transmission::Second);
    let stages = Stages {
        first,
        first_rate,
        second: Some((second, second_rate)),
    };
    if second.rate() > config.abort_threshold {
        return Ok(assemble(Protocol::Fpp, config, stages, None, None));
    }
    let mut decoded = Vec::with_capacity(symbols.len());
    for &reg in pairs.iter().take(symbols.len()) {
        let kind = lab.get_mut(reg).measure_bell_pair_mut(0, 1, &mut nature)?;
        decoded.push(decode_fpp(kind));
    }
    Ok(assemble(
        Protocol::Fpp,
        config,
        stages,
        Some(symbols_to_bits(decoded)),
        None,
    ))
}
