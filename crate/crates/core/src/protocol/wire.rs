//! Particle bookkeeping and the quantum channel as seen by an eavesdropper.
//!
//! Every entangled group lives in its own register inside a [`Lab`]. A
//! [`QubitSequence`] is an ordered list of particles with their role tags and
//! belongs to whoever assembled it. Transmission hands an eavesdropper a
//! [`Wire`]: positions only, with no tags and no register identities, so
//! decoy positions cannot be read before they are announced.

use rand::Rng;

use crate::channel::{attack_qubit_mut, AttackError, AttackParams};
use crate::qstate::{Amplitude, StateError, StateVector};

/// Reference to one qubit of one register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Particle {
    pub register: usize,
    pub qubit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tag {
    Message,
    Decoy,
}

#[derive(Debug, Default)]
pub(crate) struct Lab {
    registers: Vec<StateVector>,
}

impl Lab {
    pub fn add(&mut self, state: StateVector) -> usize {
        self.registers.push(state);
        self.registers.len() - 1
    }

    pub fn get_mut(&mut self, register: usize) -> &mut StateVector {
        &mut self.registers[register]
    }

    #[cfg(test)]
    pub fn get(&self, register: usize) -> &StateVector {
        &self.registers[register]
    }

    /// Frees a register whose contents are no longer needed.
    pub fn discard(&mut self, register: usize) {
        self.registers[register] = StateVector::zero(1);
    }

    pub fn measure_z<R: Rng + ?Sized>(&mut self, p: Particle, rng: &mut R) -> Result<bool, StateError> {
        self.registers[p.register].measure_z_mut(p.qubit, rng)
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct QubitSequence {
    entries: Vec<(Particle, Tag)>,
}

impl QubitSequence {
    pub fn from_particles(particles: impl IntoIterator<Item = Particle>, tag: Tag) -> Self {
        Self {
            entries: particles.into_iter().map(|p| (p, tag)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn particles(&self) -> impl Iterator<Item = Particle> + '_ {
        self.entries.iter().map(|(p, _)| *p)
    }

    pub fn particle(&self, position: usize) -> Particle {
        self.entries[position].0
    }

    pub fn tag(&self, position: usize) -> Tag {
        self.entries[position].1
    }

    /// Merges `decoys` into `self` at the slots marked `true` in `decoy_slots`,
    /// keeping the relative order of both inputs.
    pub fn interleave(&self, decoys: &[Particle], decoy_slots: &[bool]) -> Self {
        debug_assert_eq!(decoy_slots.len(), self.len() + decoys.len());
        let mut own = self.entries.iter();
        let mut extra = decoys.iter();
        let entries = decoy_slots
            .iter()
            .map(|&is_decoy| {
                if is_decoy {
                    (*extra.next().expect("slot count"), Tag::Decoy)
                } else {
                    *own.next().expect("slot count")
                }
            })
            .collect();
        Self { entries }
    }

    /// The sequence with every decoy entry removed.
    pub fn without_decoys(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|(_, t)| *t == Tag::Message)
                .collect(),
        }
    }

    pub fn wire<'a>(&self, lab: &'a mut Lab) -> Wire<'a> {
        Wire {
            particles: self.particles().collect(),
            lab,
        }
    }
}

/// The particles in flight, in transmission order.
pub struct Wire<'a> {
    particles: Vec<Particle>,
    lab: &'a mut Lab,
}

impl Wire<'_> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Couples the particle at `position` to a fresh ancilla via `unitary`
    /// (see [`AttackParams::full_unitary`]). The ancilla stays with the
    /// particle's register and is never touched by the honest parties.
    pub fn entangle(
        &mut self,
        position: usize,
        unitary: &[[Amplitude; 4]; 4],
    ) -> Result<(), AttackError> {
        let p = self.particles[position];
        attack_qubit_mut(self.lab.get_mut(p.register), p.qubit, unitary)
    }

    /// Measures the particle at `position` in the Z basis and forwards it.
    pub fn measure_z<R: Rng + ?Sized>(
        &mut self,
        position: usize,
        rng: &mut R,
    ) -> Result<bool, StateError> {
        let p = self.particles[position];
        self.lab.measure_z(p, rng)
    }
}

/// An eavesdropping strategy. It sees each transmission only as a [`Wire`].
pub trait Eavesdropper {
    fn intercept(&mut self, wire: &mut Wire<'_>) -> Result<(), AttackError>;
}

/// Applies the same probe to every particle on the wire.
#[derive(Debug, Clone)]
pub struct IndependentAttack {
    unitary: [[Amplitude; 4]; 4],
    intercepted: usize,
}

impl IndependentAttack {
    pub fn new(params: &AttackParams) -> Result<Self, AttackError> {
        Ok(Self {
            unitary: params.full_unitary()?,
            intercepted: 0,
        })
    }

    /// Particles attacked so far.
    pub fn intercepted(&self) -> usize {
        self.intercepted
    }
}

impl Eavesdropper for IndependentAttack {
    fn intercept(&mut self, wire: &mut Wire<'_>) -> Result<(), AttackError> {
        for pos in 0..wire.len() {
            wire.entangle(pos, &self.unitary)?;
        }
        self.intercepted += wire.len();
        Ok(())
    }
}
