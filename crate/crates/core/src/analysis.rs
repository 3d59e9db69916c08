//! Closed-form security analysis: detection probabilities, Eve's probe
//! density matrix and its spectrum, information gain curves, and the
//! probability of eavesdropping undetected.
//!
//! Throughout, `d` for the EPR-block protocol is identified with `|β|²`, so
//! `|α|²|β|² = d − d²` in the eigenvalue expressions.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name}={value} outside its domain {domain}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("encoding probabilities must be in [0,1] and sum to 1 (sum = {0})")]
    BadDistribution(f64),
    #[error("eigenvalues must be non-negative and sum to 1")]
    BadSpectrum,
    #[error("closed-form radicand {0:e} is negative")]
    NegativeRadicand(f64),
    #[error("grid needs at least 2 points")]
    GridTooSmall,
}

fn unit_interval(name: &'static str, x: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(DomainError::OutOfRange {
            name,
            value: x,
            domain: "[0, 1]",
        })
    }
}

fn control_prob(c: f64) -> Result<(), DomainError> {
    if (0.0..1.0).contains(&c) {
        Ok(())
    } else {
        Err(DomainError::OutOfRange {
            name: "c",
            value: c,
            domain: "[0, 1)",
        })
    }
}

/// Which protocol a detection or information figure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Two-step protocol checking with EPR-pair photons.
    Dpp,
    /// Four-particle GHZ decoy protocol.
    Fpp,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Dpp => "dpp",
            Protocol::Fpp => "fpp",
        }
    }
}

/// `x log2 x` with `0 log 0 = 0`.
fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64, DomainError> {
    unit_interval("x", x)?;
    Ok(-xlog2x(x) - xlog2x(1.0 - x))
}

/// Probability a GHZ decoy group passes Alice's Z check: `½(a³ + t³)`.
pub fn no_detection_prob_fpp(a: f64, t: f64) -> Result<f64, DomainError> {
    unit_interval("a", a)?;
    unit_interval("t", t)?;
    Ok(0.5 * (a.powi(3) + t.powi(3)))
}

/// Per-group detection probability `1 − ½(a³ + t³)`.
pub fn detect_prob_fpp(a: f64, t: f64) -> Result<f64, DomainError> {
    Ok(1.0 - no_detection_prob_fpp(a, t)?)
}

/// Per-photon detection probability of the EPR-pair check, `|β|²`.
pub fn detect_prob_dpp(beta_sq: f64) -> Result<f64, DomainError> {
    unit_interval("beta_sq", beta_sq)?;
    Ok(beta_sq)
}

/// Alice's encoding probabilities for `U0..U3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingDistribution {
    pub p: [f64; 4],
}

impl EncodingDistribution {
    pub fn new(p: [f64; 4]) -> Result<Self, DomainError> {
        let sum: f64 = p.iter().sum();
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) || (sum - 1.0).abs() > 1e-12 {
            return Err(DomainError::BadDistribution(sum));
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: [0.25; 4] }
    }
}

/// Small dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Largest `|ρ_ij − ρ_ji*|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                dev = dev.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Eigenvalues from a numerical Hermitian eigensolver, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Eve's probe state after encoding, in the basis
/// `{|0,ε00>, |1,ε01>, |1,ε00>, |0,ε01>}`.
///
/// `αβ*` is taken real and non-negative; the spectrum depends only on its
/// modulus.
pub fn probe_density_matrix(
    dist: &EncodingDistribution,
    alpha_sq: f64,
) -> Result<DensityMatrix, DomainError> {
    unit_interval("alpha_sq", alpha_sq)?;
    let [p0, p1, p2, p3] = dist.p;
    let a = alpha_sq;
    let b = 1.0 - alpha_sq;
    let ab = (a * b).sqrt();
    let c = |x: f64| Complex64::new(x, 0.0);
    #[rustfmt::skip]
    let entries = DMatrix::from_row_slice(4, 4, &[
        c((p0 + p3) * a), c((p0 - p3) * ab), c(0.0),            c(0.0),
        c((p0 - p3) * ab), c((p0 + p3) * b), c(0.0),            c(0.0),
        c(0.0),            c(0.0),           c((p1 + p2) * a),  c((p1 - p2) * ab),
        c(0.0),            c(0.0),           c((p1 - p2) * ab), c((p1 + p2) * b),
    ]);
    Ok(DensityMatrix { entries })
}

fn block_eigenvalues(sum: f64, prod: f64, d: f64) -> Result<(f64, f64), DomainError> {
    let radicand = sum * sum - 16.0 * prod * (d - d * d);
    if radicand < -1e-12 {
        return Err(DomainError::NegativeRadicand(radicand));
    }
    let root = radicand.max(0.0).sqrt();
    Ok((0.5 * sum + 0.5 * root, 0.5 * sum - 0.5 * root))
}

/// Closed-form spectrum `(λ0, λ1, λ2, λ3)` of the probe density matrix.
pub fn probe_eigenvalues_closed(
    dist: &EncodingDistribution,
    d: f64,
) -> Result<[f64; 4], DomainError> {
    unit_interval("d", d)?;
    let [p0, p1, p2, p3] = dist.p;
    let (l0, l1) = block_eigenvalues(p0 + p3, p0 * p3, d)?;
    let (l2, l3) = block_eigenvalues(p1 + p2, p1 * p2, d)?;
    Ok([l0, l1, l2, l3])
}

/// Von Neumann entropy (bits) of a spectrum. Eigenvalues in `[−1e-10, 0)`
/// are clamped to zero.
pub fn von_neumann_info(eigenvalues: &[f64]) -> Result<f64, DomainError> {
    let sum: f64 = eigenvalues.iter().sum();
    if eigenvalues.iter().any(|&l| l.is_nan() || l < -1e-10) || (sum - 1.0).abs() > 1e-9 {
        return Err(DomainError::BadSpectrum);
    }
    Ok(-eigenvalues.iter().map(|&l| xlog2x(l.max(0.0))).sum::<f64>())
}

/// Eve's information gain against the EPR-block protocol, `1 + H(d)`.
pub fn info_gain_dpp(d: f64) -> Result<f64, DomainError> {
    unit_interval("d", d)?;
    Ok(1.0 + binary_entropy(d)?)
}

/// Eve's information gain against the GHZ-decoy protocol on the `a = t`
/// slice, `1 + H(∛(1 − d))`.
pub fn info_gain_fpp(d: f64) -> Result<f64, DomainError> {
    unit_interval("d", d)?;
    Ok(1.0 + binary_entropy((1.0 - d).cbrt().clamp(0.0, 1.0))?)
}

/// Reference curve of the original ping-pong protocol, `H(d)`.
pub fn ping_pong_info(d: f64) -> Result<f64, DomainError> {
    unit_interval("d", d)?;
    binary_entropy(d)
}

pub fn info_gain(protocol: Protocol, d: f64) -> Result<f64, DomainError> {
    match protocol {
        Protocol::Dpp => info_gain_dpp(d),
        Protocol::Fpp => info_gain_fpp(d),
    }
}

/// Upper end of the increasing branch of `info_gain`, where it reaches 2.
pub fn full_information_detection(protocol: Protocol) -> f64 {
    match protocol {
        Protocol::Dpp => 0.5,
        Protocol::Fpp => 0.875,
    }
}

pub const ROOT_TOL: f64 = 1e-9;
const ROOT_MAX_ITER: usize = 200;

/// Detection probability `d` on the increasing branch at which Eve's
/// information gain equals `target_info`, found by bisection.
pub fn solve_detection_for_info(target_info: f64, protocol: Protocol) -> Result<f64, DomainError> {
    if !(target_info > 1.0 && target_info <= 2.0) {
        return Err(DomainError::OutOfRange {
            name: "target_info",
            value: target_info,
            domain: "(1, 2]",
        });
    }
    let (mut lo, mut hi) = (0.0, full_information_detection(protocol));
    for _ in 0..ROOT_MAX_ITER {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        // strict comparison: at the flat maximum rounding can make f(mid) == 0
        // well before the true root, so only a clear overshoot moves `hi`
        if info_gain(protocol, mid)? > target_info {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Probability Eve eavesdrops one message transfer undetected,
/// `(1 − c) / (1 − c(1 − d))`.
pub fn eavesdrop_success(c: f64, d: f64) -> Result<f64, DomainError> {
    control_prob(c)?;
    unit_interval("d", d)?;
    Ok((1.0 - c) / (1.0 - c * (1.0 - d)))
}

/// Probability of gaining `info` bits undetected:
/// `s(c, d)^(info / I(d))` with the GHZ-decoy `I(d)`.
pub fn eavesdrop_success_info(info: f64, c: f64, d: f64) -> Result<f64, DomainError> {
    if info.is_nan() || info < 0.0 {
        return Err(DomainError::OutOfRange {
            name: "info",
            value: info,
            domain: "[0, ∞)",
        });
    }
    let base = eavesdrop_success(c, d)?;
    if info == 0.0 || base == 1.0 {
        return Ok(1.0);
    }
    Ok(base.powf(info / info_gain_fpp(d)?))
}

/// Evenly spaced sample points over `[start, stop]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self, DomainError> {
        if points < 2 {
            return Err(DomainError::GridTooSmall);
        }
        Ok(Self {
            start,
            stop,
            points,
        })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(move |i| {
            if i == self.points - 1 {
                self.stop
            } else {
                self.start + step * i as f64
            }
        })
    }
}

/// Which figure's data to tabulate.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    /// `(d, I_dpp(d), I_fpp(d))` over a grid of `d`.
    InfoVsDetection,
    /// `(I, s(I, c, d_1), s(I, c, d_2), ...)` over a grid of `I`.
    SuccessVsInfo { c: f64, detections: Vec<f64> },
}

/// A column-labelled numeric table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn emit_curves(kind: &CurveKind, grid: &Grid) -> Result<CurveTable, DomainError> {
    if grid.points < 2 {
        return Err(DomainError::GridTooSmall);
    }
    match kind {
        CurveKind::InfoVsDetection => {
            let rows = grid
                .values()
                .map(|d| Ok(vec![d, info_gain_dpp(d)?, info_gain_fpp(d)?]))
                .collect::<Result<_, DomainError>>()?;
            Ok(CurveTable {
                columns: vec!["d".into(), "info_dpp".into(), "info_fpp".into()],
                rows,
            })
        }
        CurveKind::SuccessVsInfo { c, detections } => {
            let mut columns = vec!["info".to_string()];
            columns.extend(detections.iter().map(|d| format!("s_d{d}")));
            let rows = grid
                .values()
                .map(|info| {
                    let mut row = vec![info];
                    for &d in detections {
                        row.push(eavesdrop_success_info(info, *c, d)?);
                    }
                    Ok(row)
                })
                .collect::<Result<_, DomainError>>()?;
            Ok(CurveTable { columns, rows })
        }
    }
}
