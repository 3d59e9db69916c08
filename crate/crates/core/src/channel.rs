//! Eve's entangling probe.
//!
//! Each intercepted particle is coupled to one fresh ancilla qubit prepared
//! in `|0>`, and the pair evolves as
//!
//! ```text
//! E|0>|0> = α|0>|x0> + β|1>|x1>
//! E|1>|0> = m|0>|y0> + n|1>|y1>
//! ```
//!
//! The two image vectors must be orthonormal for `E` to extend to a unitary
//! on the particle–ancilla pair; [`AttackParams::full_unitary`] performs that
//! extension by Gram–Schmidt over the computational basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{Amplitude, StateError, StateVector};

/// Tolerance on the isometry conditions of an attack.
pub const ATTACK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("attack parameters do not define a unitary probe")]
    Invalid,
    #[error("probability {name}={value} outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error("expected a {expected}-qubit register, got {got}")]
    WrongRegisterSize { expected: usize, got: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Amplitudes and post-attack ancilla states of the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackParams {
    pub alpha: Amplitude,
    pub beta: Amplitude,
    pub m: Amplitude,
    pub n: Amplitude,
    pub ancilla_x0: StateVector,
    pub ancilla_x1: StateVector,
    pub ancilla_y0: StateVector,
    pub ancilla_y1: StateVector,
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_prob(name: &'static str, value: f64) -> Result<(), AttackError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AttackError::Domain { name, value })
    }
}

impl AttackParams {
    /// The probe that does nothing: every ancilla stays in `|0>`.
    pub fn identity() -> Self {
        let zero = StateVector::zero(1);
        Self {
            alpha: real(1.0),
            beta: real(0.0),
            m: real(0.0),
            n: real(1.0),
            ancilla_x0: zero.clone(),
            ancilla_x1: zero.clone(),
            ancilla_y0: zero.clone(),
            ancilla_y1: zero,
        }
    }

    /// Real amplitudes `α = √a`, `β = √(1−a)`, `m = √(1−t)`, `n = √t` with the
    /// default ancillas `x0 = x1 = |0>`, `y0 = y1 = |1>`.
    ///
    /// The ancilla records which input the particle carried, so this probe is
    /// valid for every `(a, t)`; it fully dephases the particle in the X basis.
    pub fn from_moduli(a: f64, t: f64) -> Result<Self, AttackError> {
        check_prob("a", a)?;
        check_prob("t", t)?;
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        Ok(Self {
            alpha: real(a.sqrt()),
            beta: real((1.0 - a).sqrt()),
            m: real((1.0 - t).sqrt()),
            n: real(t.sqrt()),
            ancilla_x0: zero.clone(),
            ancilla_x1: zero,
            ancilla_y0: one.clone(),
            ancilla_y1: one,
        })
    }

    /// Probe that applies `−iσ_y` to the particle with probability `beta_sq`
    /// and records the choice in its ancilla. It flips Z- and X-basis outcomes
    /// alike, so both bases see disturbance `beta_sq`; `a = t = 1 − beta_sq`.
    pub fn symmetric(beta_sq: f64) -> Result<Self, AttackError> {
        check_prob("beta_sq", beta_sq)?;
        let keep = (1.0 - beta_sq).sqrt();
        let flip = beta_sq.sqrt();
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        Ok(Self {
            alpha: real(keep),
            beta: real(flip),
            m: real(-flip),
            n: real(keep),
            ancilla_x0: zero.clone(),
            ancilla_x1: one.clone(),
            ancilla_y0: one,
            ancilla_y1: zero,
        })
    }

    /// `|α|²`
    pub fn a(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `|β|²`
    pub fn b(&self) -> f64 {
        self.beta.norm_sqr()
    }

    /// `|m|²`
    pub fn s(&self) -> f64 {
        self.m.norm_sqr()
    }

    /// `|n|²`
    pub fn t(&self) -> f64 {
        self.n.norm_sqr()
    }

    /// Image of `|bit>|0>` as a 4-vector indexed by `2·particle + ancilla`.
    pub fn image(&self, bit: bool) -> [Amplitude; 4] {
        let (c0, anc0, c1, anc1) = if bit {
            (self.m, &self.ancilla_y0, self.n, &self.ancilla_y1)
        } else {
            (self.alpha, &self.ancilla_x0, self.beta, &self.ancilla_x1)
        };
        let a0 = anc0.amplitudes();
        let a1 = anc1.amplitudes();
        [c0 * a0[0], c0 * a0[1], c1 * a1[0], c1 * a1[1]]
    }

    /// Cross term `⟨φ0'|φ1'⟩ = α*m⟨x0|y0⟩ + β*n⟨x1|y1⟩`.
    pub fn cross_term(&self) -> Amplitude {
        self.alpha.conj() * self.m * self.ancilla_x0.inner(&self.ancilla_y0)
            + self.beta.conj() * self.n * self.ancilla_x1.inner(&self.ancilla_y1)
    }

    /// Completes the probe to a 4×4 unitary (`matrix[row][col]`, index
    /// `2·particle + ancilla`). Columns 0 and 2 are the two images.
    pub fn full_unitary(&self) -> Result<[[Amplitude; 4]; 4], AttackError> {
        if !validate_attack(self) {
            return Err(AttackError::Invalid);
        }
        let mut basis: Vec<[Amplitude; 4]> = vec![self.image(false), self.image(true)];
        for e in 0..4 {
            if basis.len() == 4 {
                break;
            }
            let mut v = [real(0.0); 4];
            v[e] = real(1.0);
            for b in &basis {
                let proj: Complex64 = (0..4).map(|k| b[k].conj() * v[k]).sum();
                for k in 0..4 {
                    v[k] -= proj * b[k];
                }
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                basis.push(v.map(|x| x / norm));
            }
        }
        let columns = [&basis[0], &basis[2], &basis[1], &basis[3]];
        let mut u = [[real(0.0); 4]; 4];
        for (col, vec) in columns.iter().enumerate() {
            for row in 0..4 {
                u[row][col] = vec[row];
            }
        }
        Ok(u)
    }
}

/// True iff the two images are normalized and orthogonal within
/// [`ATTACK_TOL`], so that the probe extends to a unitary.
pub fn validate_attack(p: &AttackParams) -> bool {
    let amps = [p.alpha, p.beta, p.m, p.n];
    if amps.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return false;
    }
    let ancillas = [&p.ancilla_x0, &p.ancilla_x1, &p.ancilla_y0, &p.ancilla_y1];
    if ancillas
        .iter()
        .any(|s| s.num_qubits() != 1 || (s.norm_sqr() - 1.0).abs() > ATTACK_TOL)
    {
        return false;
    }
    let norm = |v: [Amplitude; 4]| v.iter().map(|x| x.norm_sqr()).sum::<f64>();
    (norm(p.image(false)) - 1.0).abs() <= ATTACK_TOL
        && (norm(p.image(true)) - 1.0).abs() <= ATTACK_TOL
        && p.cross_term().norm() <= ATTACK_TOL
}

/// Appends a fresh ancilla in `|0>` after the last qubit and applies the
/// probe to `(qubit, ancilla)`.
pub fn attack_qubit(
    state: &StateVector,
    qubit: usize,
    p: &AttackParams,
) -> Result<StateVector, AttackError> {
    let mut out = state.clone();
    attack_qubit_mut(&mut out, qubit, &p.full_unitary()?)?;
    Ok(out)
}

/// In-place variant taking a precomputed [`AttackParams::full_unitary`].
pub fn attack_qubit_mut(
    state: &mut StateVector,
    qubit: usize,
    unitary: &[[Amplitude; 4]; 4],
) -> Result<(), AttackError> {
    if qubit >= state.num_qubits() {
        return Err(StateError::QubitOutOfRange {
            index: qubit,
            num_qubits: state.num_qubits(),
        }
        .into());
    }
    let mut extended = state.tensor(&StateVector::zero(1));
    let ancilla = extended.num_qubits() - 1;
    extended.apply_two_qubit_mut(qubit, ancilla, unitary)?;
    *state = extended;
    Ok(())
}

/// `I ⊗ E ⊗ E ⊗ E` on a four-particle GHZ group: particles 2–4 (indices
/// 1..=3) each get their own ancilla, appended as qubits 4, 5, 6.
pub fn attack_ghz_travel(ghz: &StateVector, p: &AttackParams) -> Result<StateVector, AttackError> {
    if ghz.num_qubits() != 4 {
        return Err(AttackError::WrongRegisterSize {
            expected: 4,
            got: ghz.num_qubits(),
        });
    }
    let u = p.full_unitary()?;
    let mut out = ghz.clone();
    for q in 1..4 {
        attack_qubit_mut(&mut out, q, &u)?;
    }
    Ok(out)
}

/// Serializable summary of an attack for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub t: f64,
}

impl From<&AttackParams> for AttackSummary {
    fn from(p: &AttackParams) -> Self {
        Self {
            a: p.a(),
            b: p.b(),
            s: p.s(),
            t: p.t(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{make_bell, make_ghz4, BellKind, EXACT_TOL};

    fn assert_unitary(u: &[[Amplitude; 4]; 4]) {
        for i in 0..4 {
            for j in 0..4 {
                let v: Complex64 = (0..4).map(|k| u[k][i].conj() * u[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - real(want)).norm() < 1e-10, "U†U[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn identity_is_valid_and_trivial() {
        let p = AttackParams::identity();
        assert!(validate_attack(&p));
        let s = make_bell(BellKind::PsiMinus);
        let out = attack_qubit(&s, 0, &p).unwrap();
        assert!(out.equals_up_to_phase(&s.tensor(&StateVector::zero(1)), EXACT_TOL));
    }

    #[test]
    fn coinciding_images_are_invalid() {
        let zero = StateVector::zero(1);
        let p = AttackParams {
            alpha: real(1.0),
            beta: real(0.0),
            m: real(1.0),
            n: real(0.0),
            ancilla_x0: zero.clone(),
            ancilla_x1: zero.clone(),
            ancilla_y0: zero.clone(),
            ancilla_y1: zero,
        };
        assert!(!validate_attack(&p));
        assert_eq!(p.full_unitary(), Err(AttackError::Invalid));
        assert!(matches!(
            attack_qubit(&StateVector::zero(1), 0, &p),
            Err(AttackError::Invalid)
        ));
    }

    #[test]
    fn unnormalized_amplitudes_are_invalid() {
        let mut p = AttackParams::identity();
        p.alpha = real(0.9);
        assert!(!validate_attack(&p));
    }

    #[test]
    fn default_ancillas_valid_on_whole_circle() {
        for i in 0..=10 {
            for j in 0..=10 {
                let mut p = AttackParams::from_moduli(i as f64 / 10.0, j as f64 / 10.0).unwrap();
                // arbitrary phases keep the cross term at zero
                p.beta *= Complex64::from_polar(1.0, 0.3 * i as f64);
                p.m *= Complex64::from_polar(1.0, -0.7 * j as f64);
                assert!(validate_attack(&p));
                assert_eq!(p.cross_term(), real(0.0));
                assert_unitary(&p.full_unitary().unwrap());
            }
        }
    }

    #[test]
    fn symmetric_probe_is_valid() {
        for b in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let p = AttackParams::symmetric(b).unwrap();
            assert!(validate_attack(&p));
            assert!((p.b() - b).abs() < EXACT_TOL && (p.s() - b).abs() < EXACT_TOL);
            assert_unitary(&p.full_unitary().unwrap());
        }
    }

    #[test]
    fn moduli_domain_errors() {
        assert!(matches!(
            AttackParams::from_moduli(1.5, 0.5),
            Err(AttackError::Domain { name: "a", .. })
        ));
        assert!(AttackParams::symmetric(-0.1).is_err());
    }

    #[test]
    fn attack_maps_basis_states_per_definition() {
        let p = AttackParams::from_moduli(0.3, 0.6).unwrap();
        let on_zero = attack_qubit(&StateVector::zero(1), 0, &p).unwrap();
        let want = p.image(false);
        for i in 0..4 {
            assert!((on_zero.amplitude(i) - want[i]).norm() < EXACT_TOL);
        }
        let on_one = attack_qubit(&StateVector::basis(1, 1), 0, &p).unwrap();
        let want = p.image(true);
        for i in 0..4 {
            assert!((on_one.amplitude(i) - want[i]).norm() < EXACT_TOL);
        }
    }

    #[test]
    fn attack_preserves_norm() {
        let p = AttackParams::symmetric(0.37).unwrap();
        let out = attack_ghz_travel(&make_ghz4(), &p).unwrap();
        assert_eq!(out.num_qubits(), 7);
        assert!((out.norm_sqr() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn ghz_attack_requires_four_qubits() {
        let err = attack_ghz_travel(&make_bell(BellKind::PhiPlus), &AttackParams::identity());
        assert!(matches!(
            err,
            Err(AttackError::WrongRegisterSize { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn bit_flip_attack_always_yields_ones_on_zero_branch() {
        // α = 0: each |0> particle becomes |1>
        let p = AttackParams::from_moduli(0.0, 0.5).unwrap();
        let out = attack_ghz_travel(&make_ghz4(), &p).unwrap();
        // amplitude with particle 1 = 0 and any particle 2..4 = 0 must vanish
        for idx in 0..128usize {
            let particles = idx >> 3;
            if particles & 0b1000 == 0 && particles & 0b0111 != 0b0111 {
                assert!(out.amplitude(idx).norm() < EXACT_TOL);
            }
        }
    }
}
