//! Exact state-vector mechanics for small qubit registers.
//!
//! Basis ordering: qubit 0 is the most significant bit of the basis index, so
//! `|q0 q1 ... q_{n-1}>` lives at index `q0·2^{n-1} + ... + q_{n-1}`. Appending
//! a qubit (tensoring on the right) never renumbers existing qubits.
//!
//! Registers here stay small (a GHZ group plus its ancillas is seven qubits),
//! so amplitudes are stored densely.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex amplitude.
pub type Amplitude = Complex64;

/// Tolerance for exact-math checks (normalization, unitarity).
pub const EXACT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("qubit {0} used twice in a joint operation")]
    RepeatedQubit(usize),
    #[error("amplitude array length {0} is not a power of two >= 2")]
    BadLength(usize),
    #[error("amplitude {0} is not finite")]
    NonFinite(usize),
    #[error("state norm squared {0} deviates from 1")]
    NotNormalized(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
}

/// Normalized pure state of `num_qubits` qubits.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Amplitude>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector[{}](", self.num_qubits)?;
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() < 1e-24 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{:0w$b}>", a.re, a.im, i, w = self.num_qubits)?;
        }
        write!(f, ")")
    }
}

impl StateVector {
    /// Computational basis state `|index>` on `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        assert!(num_qubits >= 1, "register needs at least one qubit");
        let dim = 1usize << num_qubits;
        assert!(index < dim, "basis index {index} out of range");
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self { num_qubits, amps }
    }

    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    /// Single-qubit `|+>`.
    pub fn plus() -> Self {
        Self {
            num_qubits: 1,
            amps: vec![Complex64::new(FRAC_1_SQRT_2, 0.0); 2],
        }
    }

    /// Single-qubit `|->`.
    pub fn minus() -> Self {
        Self {
            num_qubits: 1,
            amps: vec![
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(-FRAC_1_SQRT_2, 0.0),
            ],
        }
    }

    /// Validates length, finiteness and normalization.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self, StateError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(StateError::BadLength(len));
        }
        if let Some(i) = amps.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(StateError::NonFinite(i));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) but rescales to unit norm first.
    pub fn normalized(mut amps: Vec<Amplitude>) -> Result<Self, StateError> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(StateError::NotNormalized(norm * norm));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Amplitude {
        assert_eq!(self.dim(), other.dim(), "inner product of mismatched registers");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Phase-insensitive equality: `|<self|other>| = 1` within `tol`.
    pub fn equals_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && (self.inner(other).norm() - 1.0).abs() <= tol
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), StateError> {
        if qubit < self.num_qubits {
            Ok(())
        } else {
            Err(StateError::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            })
        }
    }

    fn bit_mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Returns `(I ⊗ … ⊗ u ⊗ … ⊗ I)|self>`.
    pub fn apply_local(&self, qubit: usize, u: &LocalUnitary) -> Result<Self, StateError> {
        let mut out = self.clone();
        out.apply_local_mut(qubit, u)?;
        Ok(out)
    }

    pub fn apply_local_mut(&mut self, qubit: usize, u: &LocalUnitary) -> Result<(), StateError> {
        self.check_qubit(qubit)?;
        let mask = self.bit_mask(qubit);
        let m = &u.entries;
        for i in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amps[i], self.amps[i | mask]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    /// Applies a 4×4 unitary to the ordered pair `(first, second)`, where the
    /// matrix row/column index is `2·bit(first) + bit(second)`.
    pub fn apply_two_qubit_mut(
        &mut self,
        first: usize,
        second: usize,
        matrix: &[[Amplitude; 4]; 4],
    ) -> Result<(), StateError> {
        self.check_qubit(first)?;
        self.check_qubit(second)?;
        if first == second {
            return Err(StateError::RepeatedQubit(first));
        }
        let (m1, m2) = (self.bit_mask(first), self.bit_mask(second));
        let offsets = [0, m2, m1, m1 | m2];
        for base in (0..self.amps.len()).filter(|i| i & (m1 | m2) == 0) {
            let input = offsets.map(|o| self.amps[base | o]);
            for (row, &o) in offsets.iter().enumerate() {
                self.amps[base | o] = (0..4).map(|col| matrix[row][col] * input[col]).sum();
            }
        }
        Ok(())
    }

    /// Kronecker product `|self> ⊗ |other>`; `other`'s qubits follow `self`'s.
    pub fn tensor(&self, other: &Self) -> Self {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Self {
            num_qubits: self.num_qubits + other.num_qubits,
            amps,
        }
    }

    /// Born probability that `qubit` reads 1 in the Z basis.
    pub fn prob_one(&self, qubit: usize) -> Result<f64, StateError> {
        self.check_qubit(qubit)?;
        let mask = self.bit_mask(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Z-basis measurement in place; the register keeps all qubits with the
    /// measured one pinned to the outcome.
    pub fn measure_z_mut<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<bool, StateError> {
        self.check_qubit(qubit)?;
        let mask = self.bit_mask(qubit);
        let (mut p0, mut p1) = (0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            if i & mask == 0 {
                p0 += a.norm_sqr();
            } else {
                p1 += a.norm_sqr();
            }
        }
        let total = p0 + p1;
        if !total.is_finite() || (total - 1.0).abs() > 1e-9 {
            return Err(StateError::NotNormalized(total));
        }
        let outcome = rng.random::<f64>() * total >= p0;
        let keep = if outcome { p1 } else { p0 };
        let scale = 1.0 / keep.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(outcome)
    }

    /// Z-basis projective measurement of `qubit`.
    pub fn measure_z<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<(bool, Self), StateError> {
        let mut out = self.clone();
        let bit = out.measure_z_mut(qubit, rng)?;
        Ok((bit, out))
    }

    /// X-basis measurement in place (`false` ↦ `|+>`, `true` ↦ `|->`).
    pub fn measure_x_mut<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<bool, StateError> {
        let h = LocalUnitary::hadamard();
        self.apply_local_mut(qubit, &h)?;
        let bit = self.measure_z_mut(qubit, rng)?;
        self.apply_local_mut(qubit, &h)?;
        Ok(bit)
    }

    pub fn measure_x<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<(bool, Self), StateError> {
        let mut out = self.clone();
        let bit = out.measure_x_mut(qubit, rng)?;
        Ok((bit, out))
    }

    pub fn measure_mut<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<bool, StateError> {
        match basis {
            Basis::Z => self.measure_z_mut(qubit, rng),
            Basis::X => self.measure_x_mut(qubit, rng),
        }
    }

    fn check_pair(&self, q1: usize, q2: usize) -> Result<(usize, usize), StateError> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(StateError::RepeatedQubit(q1));
        }
        Ok((self.bit_mask(q1), self.bit_mask(q2)))
    }

    /// Born probabilities for projecting `(q1, q2)` onto each Bell state, in
    /// [`BellKind::ALL`] order.
    pub fn bell_probabilities(&self, q1: usize, q2: usize) -> Result<[f64; 4], StateError> {
        let (m1, m2) = self.check_pair(q1, q2)?;
        let offsets = [0, m2, m1, m1 | m2];
        let kets = BellKind::ALL.map(|k| k.coefficients());
        let mut probs = [0.0; 4];
        for base in (0..self.amps.len()).filter(|i| i & (m1 | m2) == 0) {
            for (p, ket) in probs.iter_mut().zip(&kets) {
                let overlap: Complex64 = (0..4)
                    .map(|j| ket[j].conj() * self.amps[base | offsets[j]])
                    .sum();
                *p += overlap.norm_sqr();
            }
        }
        Ok(probs)
    }

    /// Bell-basis measurement of `(q1, q2)` in place. The pair is left in the
    /// observed Bell state, the rest of the register conditioned on it.
    pub fn measure_bell_pair_mut<R: Rng + ?Sized>(
        &mut self,
        q1: usize,
        q2: usize,
        rng: &mut R,
    ) -> Result<BellKind, StateError> {
        let probs = self.bell_probabilities(q1, q2)?;
        let total: f64 = probs.iter().sum();
        if !total.is_finite() || (total - 1.0).abs() > 1e-9 {
            return Err(StateError::NotNormalized(total));
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = 3;
        for (k, &p) in probs.iter().enumerate() {
            if r < p {
                pick = k;
                break;
            }
            r -= p;
        }
        // guard against landing on a zero-probability tail through rounding
        if probs[pick] == 0.0 {
            pick = (0..4).rev().find(|&k| probs[k] > 0.0).unwrap_or(pick);
        }
        let kind = BellKind::ALL[pick];
        let ket = kind.coefficients();
        let scale = 1.0 / probs[pick].sqrt();
        let (m1, m2) = (self.bit_mask(q1), self.bit_mask(q2));
        let offsets = [0, m2, m1, m1 | m2];
        for base in (0..self.amps.len()).filter(|i| i & (m1 | m2) == 0) {
            let overlap: Complex64 = (0..4)
                .map(|j| ket[j].conj() * self.amps[base | offsets[j]])
                .sum();
            for j in 0..4 {
                self.amps[base | offsets[j]] = ket[j] * overlap * scale;
            }
        }
        Ok(kind)
    }

    pub fn measure_bell_pair<R: Rng + ?Sized>(
        &self,
        q1: usize,
        q2: usize,
        rng: &mut R,
    ) -> Result<(BellKind, Self), StateError> {
        let mut out = self.clone();
        let kind = out.measure_bell_pair_mut(q1, q2, rng)?;
        Ok((kind, out))
    }
}

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// 2×2 unitary acting on one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalUnitary {
    entries: [[Amplitude; 2]; 2],
}

impl LocalUnitary {
    /// Rejects matrices with `‖U†U − I‖_max > 1e-12`.
    pub fn new(entries: [[Amplitude; 2]; 2]) -> Result<Self, StateError> {
        let u = Self { entries };
        let dev = u.unitarity_deviation();
        if dev > EXACT_TOL {
            return Err(StateError::NotUnitary(dev));
        }
        Ok(u)
    }

    fn real(m: [[f64; 2]; 2]) -> Self {
        Self {
            entries: m.map(|row| row.map(|x| Complex64::new(x, 0.0))),
        }
    }

    pub fn entries(&self) -> &[[Amplitude; 2]; 2] {
        &self.entries
    }

    /// Largest elementwise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let m = &self.entries;
        let mut dev: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let v: Complex64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let target = if i == j { ONE } else { ZERO };
                dev = dev.max((v - target).norm());
            }
        }
        dev
    }

    pub fn identity() -> Self {
        Self::real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn pauli_z() -> Self {
        Self::real([[1.0, 0.0], [0.0, -1.0]])
    }

    pub fn pauli_x() -> Self {
        Self::real([[0.0, 1.0], [1.0, 0.0]])
    }

    /// `−iσ_y = |1><0| − |0><1|`.
    pub fn minus_i_pauli_y() -> Self {
        Self::real([[0.0, -1.0], [1.0, 0.0]])
    }

    pub fn hadamard() -> Self {
        Self::real([[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
    }

    /// Dense-coding operation for a 2-bit symbol: `U0 = I`, `U1 = σ_z`,
    /// `U2 = σ_x`, `U3 = −iσ_y`.
    pub fn encoding(symbol: Symbol) -> Self {
        match symbol.value() {
            0 => Self::identity(),
            1 => Self::pauli_z(),
            2 => Self::pauli_x(),
            _ => Self::minus_i_pauli_y(),
        }
    }
}

/// Two classical bits, `(high, low)` packed as 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol(u8);

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol(0), Symbol(1), Symbol(2), Symbol(3)];

    pub fn new(value: u8) -> Option<Self> {
        (value < 4).then_some(Self(value))
    }

    pub fn from_bits(high: bool, low: bool) -> Self {
        Self(((high as u8) << 1) | low as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn bits(self) -> [bool; 2] {
        [self.0 & 2 != 0, self.0 & 1 != 0]
    }
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    /// `(|01> − |10>)/√2`
    PsiMinus,
    /// `(|01> + |10>)/√2`
    PsiPlus,
    /// `(|00> − |11>)/√2`
    PhiMinus,
    /// `(|00> + |11>)/√2`
    PhiPlus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PsiMinus,
        BellKind::PsiPlus,
        BellKind::PhiMinus,
        BellKind::PhiPlus,
    ];

    /// Amplitudes over `(00, 01, 10, 11)`.
    pub fn coefficients(self) -> [Amplitude; 4] {
        let h = FRAC_1_SQRT_2;
        let c = |x: f64| Complex64::new(x, 0.0);
        match self {
            BellKind::PsiMinus => [c(0.0), c(h), c(-h), c(0.0)],
            BellKind::PsiPlus => [c(0.0), c(h), c(h), c(0.0)],
            BellKind::PhiMinus => [c(h), c(0.0), c(0.0), c(-h)],
            BellKind::PhiPlus => [c(h), c(0.0), c(0.0), c(h)],
        }
    }
}

pub fn make_bell(kind: BellKind) -> StateVector {
    StateVector {
        num_qubits: 2,
        amps: kind.coefficients().to_vec(),
    }
}

/// `(|0000> + |1111>)/√2`.
pub fn make_ghz4() -> StateVector {
    let mut amps = vec![ZERO; 16];
    amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[15] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    StateVector { num_qubits: 4, amps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn assert_amps(s: &StateVector, expected: &[f64]) {
        assert_eq!(s.dim(), expected.len());
        for (a, &e) in s.amplitudes().iter().zip(expected) {
            assert!((a.re - e).abs() < EXACT_TOL && a.im.abs() < EXACT_TOL, "{s:?}");
        }
    }

    #[test]
    fn bell_amplitudes() {
        let h = FRAC_1_SQRT_2;
        assert_amps(&make_bell(BellKind::PhiPlus), &[h, 0.0, 0.0, h]);
        assert_amps(&make_bell(BellKind::PsiMinus), &[0.0, h, -h, 0.0]);
        for k in BellKind::ALL {
            assert!((make_bell(k).norm_sqr() - 1.0).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn bell_states_are_orthonormal() {
        for a in BellKind::ALL {
            for b in BellKind::ALL {
                let ip = make_bell(a).inner(&make_bell(b)).norm();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < EXACT_TOL);
            }
        }
    }

    #[test]
    fn ghz_amplitudes() {
        let g = make_ghz4();
        for (i, a) in g.amplitudes().iter().enumerate() {
            let want = if i == 0 || i == 15 { FRAC_1_SQRT_2 } else { 0.0 };
            assert!((a.re - want).abs() < EXACT_TOL && a.im == 0.0);
        }
        assert!((g.prob_one(2).unwrap() - 0.5).abs() < EXACT_TOL);
    }

    #[test]
    fn ghz_z_outcomes_agree() {
        let mut r = rng(5);
        for _ in 0..200 {
            let mut g = make_ghz4();
            let first = g.measure_z_mut(0, &mut r).unwrap();
            for q in 1..4 {
                assert_eq!(g.measure_z_mut(q, &mut r).unwrap(), first);
            }
        }
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let s = StateVector::zero(3)
            .apply_local(0, &LocalUnitary::pauli_x())
            .unwrap();
        assert_eq!(s.amplitude(0b100), ONE);
        let t = StateVector::basis(1, 0).tensor(&StateVector::basis(1, 1));
        assert_eq!(t.amplitude(0b01), ONE);
    }

    #[test]
    fn apply_local_identity_and_involution() {
        let zero = StateVector::zero(1);
        assert_eq!(zero.apply_local(0, &LocalUnitary::identity()).unwrap(), zero);
        let s = make_ghz4().apply_local(2, &LocalUnitary::hadamard()).unwrap();
        let back = s
            .apply_local(2, &LocalUnitary::pauli_z())
            .unwrap()
            .apply_local(2, &LocalUnitary::pauli_z())
            .unwrap();
        assert!(back.equals_up_to_phase(&s, EXACT_TOL));
    }

    #[test]
    fn apply_local_rejects_bad_index() {
        let err = StateVector::zero(2).apply_local(2, &LocalUnitary::identity());
        assert!(matches!(err, Err(StateError::QubitOutOfRange { index: 2, num_qubits: 2 })));
    }

    #[test]
    fn unitary_validation() {
        assert!(LocalUnitary::new(*LocalUnitary::hadamard().entries()).is_ok());
        let bad = [[ONE, ONE], [ZERO, ONE]];
        assert!(matches!(LocalUnitary::new(bad), Err(StateError::NotUnitary(_))));
    }

    #[test]
    fn dense_coding_on_phi_plus() {
        let targets = [
            BellKind::PhiPlus,
            BellKind::PhiMinus,
            BellKind::PsiPlus,
            BellKind::PsiMinus,
        ];
        for (sym, target) in Symbol::ALL.into_iter().zip(targets) {
            for qubit in [0, 1] {
                let s = make_bell(BellKind::PhiPlus)
                    .apply_local(qubit, &LocalUnitary::encoding(sym))
                    .unwrap();
                assert!(s.equals_up_to_phase(&make_bell(target), EXACT_TOL), "{sym:?} on {qubit}");
            }
        }
    }

    #[test]
    fn dense_coding_on_psi_minus() {
        let targets = [
            BellKind::PsiMinus,
            BellKind::PsiPlus,
            BellKind::PhiMinus,
            BellKind::PhiPlus,
        ];
        for (sym, target) in Symbol::ALL.into_iter().zip(targets) {
            let s = make_bell(BellKind::PsiMinus)
                .apply_local(1, &LocalUnitary::encoding(sym))
                .unwrap();
            assert!(s.equals_up_to_phase(&make_bell(target), EXACT_TOL));
        }
    }

    #[test]
    fn tensor_products() {
        let t = make_bell(BellKind::PhiPlus).tensor(&StateVector::zero(1));
        assert_eq!(t.num_qubits(), 3);
        let nz: Vec<usize> = (0..8).filter(|&i| t.amplitude(i).norm() > 0.0).collect();
        assert_eq!(nz, vec![0b000, 0b110]);
        assert!((t.norm_sqr() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn measure_basis_states_is_deterministic() {
        let mut r = rng(1);
        let (bit, post) = StateVector::zero(1).measure_z(0, &mut r).unwrap();
        assert!(!bit);
        assert_eq!(post, StateVector::zero(1));
        let (bit, post) = StateVector::plus().measure_x(0, &mut r).unwrap();
        assert!(!bit);
        assert!(post.equals_up_to_phase(&StateVector::plus(), EXACT_TOL));
        let (bit, _) = StateVector::minus().measure_x(0, &mut r).unwrap();
        assert!(bit);
    }

    #[test]
    fn repeated_measurement_is_stable() {
        let mut r = rng(2);
        for _ in 0..100 {
            let mut s = StateVector::plus();
            let first = s.measure_z_mut(0, &mut r).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < EXACT_TOL);
            assert_eq!(s.measure_z_mut(0, &mut r).unwrap(), first);
        }
    }

    #[test]
    fn ghz_collapse_to_one_pins_rest() {
        let mut r = rng(9);
        let mut seen = false;
        for _ in 0..50 {
            let (b, post) = make_ghz4().measure_z(0, &mut r).unwrap();
            if b {
                seen = true;
                for q in 1..4 {
                    assert!((post.prob_one(q).unwrap() - 1.0).abs() < EXACT_TOL);
                }
            }
        }
        assert!(seen);
    }

    #[test]
    fn psi_minus_same_basis_anticorrelated() {
        let mut r = rng(3);
        for basis in [Basis::Z, Basis::X] {
            for _ in 0..200 {
                let mut s = make_bell(BellKind::PsiMinus);
                let a = s.measure_mut(0, basis, &mut r).unwrap();
                let b = s.measure_mut(1, basis, &mut r).unwrap();
                assert_ne!(a, b, "{basis:?}");
            }
        }
    }

    #[test]
    fn unnormalized_measurement_errors() {
        let mut s = StateVector::zero(1);
        s.amps[0] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            s.measure_z_mut(0, &mut rng(0)),
            Err(StateError::NotNormalized(_))
        ));
        assert!(StateVector::from_amplitudes(vec![ONE, ONE]).is_err());
        assert!(StateVector::from_amplitudes(vec![ONE; 3]).is_err());
    }

    #[test]
    fn bell_measurement_on_eigenstates() {
        let mut r = rng(4);
        for k in BellKind::ALL {
            let (got, post) = make_bell(k).measure_bell_pair(0, 1, &mut r).unwrap();
            assert_eq!(got, k);
            assert!(post.equals_up_to_phase(&make_bell(k), EXACT_TOL));
        }
        let encoded = make_bell(BellKind::PhiPlus)
            .apply_local(1, &LocalUnitary::pauli_z())
            .unwrap();
        assert_eq!(
            encoded.measure_bell_pair(0, 1, &mut r).unwrap().0,
            BellKind::PhiMinus
        );
    }

    #[test]
    fn bell_measurement_errors() {
        let s = make_bell(BellKind::PhiPlus);
        assert!(matches!(
            s.bell_probabilities(1, 1),
            Err(StateError::RepeatedQubit(1))
        ));
        assert!(s.bell_probabilities(0, 3).is_err());
    }

    #[test]
    fn bell_measurement_of_subregister() {
        // |0> ⊗ φ− with the pair on qubits (2, 1), reversed order
        let s = StateVector::zero(1).tensor(&make_bell(BellKind::PhiMinus));
        let probs = s.bell_probabilities(2, 1).unwrap();
        assert!((probs[2] - 1.0).abs() < EXACT_TOL);
        // ψ− is antisymmetric; swapping the pair order flips only its sign
        let s = make_bell(BellKind::PsiMinus).tensor(&StateVector::plus());
        let probs = s.bell_probabilities(1, 0).unwrap();
        assert!((probs[0] - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn two_qubit_gate_cnot() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let cnot = [
            [c(1.0), c(0.0), c(0.0), c(0.0)],
            [c(0.0), c(1.0), c(0.0), c(0.0)],
            [c(0.0), c(0.0), c(0.0), c(1.0)],
            [c(0.0), c(0.0), c(1.0), c(0.0)],
        ];
        // control on qubit 2, target qubit 0 in a 3-qubit register
        let mut s = StateVector::basis(3, 0b001);
        s.apply_two_qubit_mut(2, 0, &cnot).unwrap();
        assert_eq!(s.amplitude(0b101), ONE);
        let mut bell = StateVector::zero(2).apply_local(0, &LocalUnitary::hadamard()).unwrap();
        bell.apply_two_qubit_mut(0, 1, &cnot).unwrap();
        assert!(bell.equals_up_to_phase(&make_bell(BellKind::PhiPlus), EXACT_TOL));
    }
}
