//! Exact small-register quantum-state oracle.
//!
//! States are dense complex amplitude vectors over the spin basis with qubit
//! `q` stored in bit `q` of the index (party 0 = least significant bit; ket
//! strings print party 0 leftmost). Mixed states are weighted lists of pure
//! states, which is all the protocols here ever need: every input is
//! GHZ-diagonal, so a full density matrix would buy nothing.
//!
//! Everything is a pure function of its inputs. Measurements return *all*
//! branches with their exact probabilities; `sample_*` variants pick one
//! branch at random for trajectory work. A zero-probability branch carries
//! `None` instead of a normalized junk state so NaNs cannot propagate
//! silently.

use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::ghz::{GhzError, GhzLabel, Sign};
use crate::Scalar;

mod circuits;

pub use circuits::{
    distill_circuit, link_circuit, normal_round_circuit, pair_round_circuit, DistillHarvest,
    DistillOutcome, LinkOutcome, NormalRound,
};

/// Register width cap: `2^14` amplitudes is the largest state the oracle will
/// allocate.
pub const MAX_QUBITS: usize = 14;

/// Amplitudes below this magnitude are omitted from debug dumps.
pub const DUMP_CUTOFF: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("{n_qubits} qubits exceeds the {MAX_QUBITS}-qubit capacity")]
    CapacityExceeded { n_qubits: usize },
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("parity check needs two distinct qubits, got {qubit} twice")]
    DuplicateQubit { qubit: usize },
    #[error("register has {got} qubits where {expected} are required")]
    ArityMismatch { expected: usize, got: usize },
    #[error("mixture term is not a product across the two-system cut")]
    NotAProductInput,
    #[error("mixture carries weight outside the plus-sector GHZ diagonal")]
    NotGhzDiagonal,
    #[error("input carries no cross-combination weight")]
    NotACrossItem,
    #[error("mixture has no terms or zero total weight")]
    EmptyMixture,
    #[error("weights must be non-negative, got {weight}")]
    NegativeWeight { weight: f64 },
    #[error(transparent)]
    Label(#[from] GhzError),
}

/// Parity-check outcome classes: even means the pair of spins agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Charge-detector reading associated with the parity class: occupation
    /// 1 for even, the merged 0/2 reading (reported as 0) for odd.
    pub fn charge_reading(self) -> u8 {
        match self {
            Parity::Even => 1,
            Parity::Odd => 0,
        }
    }
}

/// Spin-z measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn bit(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// One branch of a parity-check detection.
#[derive(Debug, Clone)]
pub struct PcdOutcome<T: Scalar> {
    pub parity: Parity,
    pub probability: T,
    /// `None` exactly when the branch has zero probability.
    pub post_state: Option<PureState<T>>,
}

impl<T: Scalar> PcdOutcome<T> {
    pub fn charge_reading(&self) -> u8 {
        self.parity.charge_reading()
    }
}

/// One branch of a single-qubit z measurement.
#[derive(Debug, Clone)]
pub struct ZOutcome<T: Scalar> {
    pub spin: Spin,
    pub probability: T,
    pub post_state: Option<PureState<T>>,
}

/// Dense amplitude vector over the computational spin basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T: Scalar> {
    n_qubits: usize,
    amps: Vec<Complex<T>>,
}

fn check_capacity(n_qubits: usize) -> Result<(), ExactError> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(ExactError::CapacityExceeded { n_qubits });
    }
    Ok(())
}

impl<T: Scalar> PureState<T> {
    /// Computational basis state `|bits⟩`.
    pub fn basis(n_qubits: usize, bits: usize) -> Result<Self, ExactError> {
        check_capacity(n_qubits)?;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[bits & ((1 << n_qubits) - 1)] = Complex::new(T::one(), T::zero());
        Ok(PureState { n_qubits, amps })
    }

    /// GHZ basis state `(|mask⟩ ± |complement⟩)/√2` with the canonical-pattern
    /// amplitude fixed positive.
    pub fn ghz(n_qubits: usize, label: &GhzLabel) -> Result<Self, ExactError> {
        check_capacity(n_qubits)?;
        if label.n_parties() != n_qubits {
            return Err(ExactError::ArityMismatch {
                expected: label.n_parties(),
                got: n_qubits,
            });
        }
        let inv_sqrt2 = T::from_f(0.5).sqrt();
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[label.mask() as usize] = Complex::new(inv_sqrt2, T::zero());
        let signed = match label.sign() {
            Sign::Plus => inv_sqrt2,
            Sign::Minus => -inv_sqrt2,
        };
        amps[label.complement_mask() as usize] = Complex::new(signed, T::zero());
        Ok(PureState { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex<T>>) -> Result<Self, ExactError> {
        check_capacity(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(ExactError::ArityMismatch {
                expected: 1 << n_qubits,
                got: amps.len(),
            });
        }
        Ok(PureState { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let norm = self.norm_sqr().sqrt();
        if norm > T::zero() {
            for a in &mut self.amps {
                *a = Complex::new(a.re / norm, a.im / norm);
            }
        }
        self
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                acc + a.conj() * *b
            })
    }

    /// Overlap with a GHZ basis state, `⟨GHZ(label)|self⟩`.
    pub fn ghz_overlap(&self, label: &GhzLabel) -> Result<Complex<T>, ExactError> {
        if label.n_parties() != self.n_qubits {
            return Err(ExactError::ArityMismatch {
                expected: label.n_parties(),
                got: self.n_qubits,
            });
        }
        let inv_sqrt2 = T::from_f(0.5).sqrt();
        let a = self.amps[label.mask() as usize];
        let b = self.amps[label.complement_mask() as usize];
        let signed = match label.sign() {
            Sign::Plus => a + b,
            Sign::Minus => a - b,
        };
        Ok(signed * inv_sqrt2)
    }

    /// Tensor product with `other` appended as the higher qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self, ExactError> {
        let n = self.n_qubits + other.n_qubits;
        check_capacity(n)?;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        for (hi, b) in other.amps.iter().enumerate() {
            if b.norm_sqr() == T::zero() {
                continue;
            }
            let base = hi << self.n_qubits;
            for (lo, a) in self.amps.iter().enumerate() {
                amps[base | lo] = *a * *b;
            }
        }
        Ok(PureState { n_qubits: n, amps })
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), ExactError> {
        if qubit >= self.n_qubits {
            return Err(ExactError::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Hadamard on one qubit.
    pub fn apply_h(&self, qubit: usize) -> Result<Self, ExactError> {
        self.check_qubit(qubit)?;
        let inv_sqrt2 = T::from_f(0.5).sqrt();
        let step = 1 << qubit;
        let mut amps = self.amps.clone();
        for base in (0..amps.len()).step_by(2 * step) {
            for offset in 0..step {
                let i = base + offset;
                let j = i + step;
                let a = amps[i];
                let b = amps[j];
                amps[i] = (a + b) * inv_sqrt2;
                amps[j] = (a - b) * inv_sqrt2;
            }
        }
        Ok(PureState {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    /// Bit flip (σ_x) on one qubit.
    pub fn apply_x(&self, qubit: usize) -> Result<Self, ExactError> {
        self.check_qubit(qubit)?;
        let step = 1 << qubit;
        let mut amps = self.amps.clone();
        for base in (0..amps.len()).step_by(2 * step) {
            for offset in 0..step {
                amps.swap(base + offset, base + offset + step);
            }
        }
        Ok(PureState {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    /// Phase flip (σ_z) on one qubit.
    pub fn apply_z(&self, qubit: usize) -> Result<Self, ExactError> {
        self.check_qubit(qubit)?;
        let mut amps = self.amps.clone();
        for (i, a) in amps.iter_mut().enumerate() {
            if (i >> qubit) & 1 == 1 {
                *a = -*a;
            }
        }
        Ok(PureState {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    /// Parity-check detection on qubits `(qa, qb)`: projects onto the
    /// even span `{|↑↑⟩, |↓↓⟩}` or the odd span `{|↑↓⟩, |↓↑⟩}` without
    /// disturbing spin coherence inside either subspace. Returns the even
    /// branch first; branch probabilities sum to 1.
    pub fn pcd(&self, qa: usize, qb: usize) -> Result<(PcdOutcome<T>, PcdOutcome<T>), ExactError> {
        self.check_qubit(qa)?;
        self.check_qubit(qb)?;
        if qa == qb {
            return Err(ExactError::DuplicateQubit { qubit: qa });
        }
        let branch = |parity: Parity| {
            let keep_odd = parity == Parity::Odd;
            let mut amps = self.amps.clone();
            let mut prob = T::zero();
            for (i, a) in amps.iter_mut().enumerate() {
                let odd = ((i >> qa) ^ (i >> qb)) & 1 == 1;
                if odd == keep_odd {
                    prob += a.norm_sqr();
                } else {
                    *a = Complex::new(T::zero(), T::zero());
                }
            }
            let post_state = if prob > T::zero() {
                Some(
                    PureState {
                        n_qubits: self.n_qubits,
                        amps,
                    }
                    .normalized(),
                )
            } else {
                None
            };
            PcdOutcome {
                parity,
                probability: prob,
                post_state,
            }
        };
        Ok((branch(Parity::Even), branch(Parity::Odd)))
    }

    /// Projective z measurement of one qubit; spin-up branch first.
    pub fn measure_z(&self, qubit: usize) -> Result<[ZOutcome<T>; 2], ExactError> {
        self.check_qubit(qubit)?;
        let branch = |spin: Spin| {
            let mut amps = self.amps.clone();
            let mut prob = T::zero();
            for (i, a) in amps.iter_mut().enumerate() {
                if (i >> qubit) & 1 == spin.bit() {
                    prob += a.norm_sqr();
                } else {
                    *a = Complex::new(T::zero(), T::zero());
                }
            }
            let post_state = if prob > T::zero() {
                Some(
                    PureState {
                        n_qubits: self.n_qubits,
                        amps,
                    }
                    .normalized(),
                )
            } else {
                None
            };
            ZOutcome {
                spin,
                probability: prob,
                post_state,
            }
        };
        Ok([branch(Spin::Up), branch(Spin::Down)])
    }

    /// Measures every qubit in `qubits` in the z basis and removes them from
    /// the register. Returns each outcome with nonzero probability as
    /// `(outcome_bits, probability, reduced_state)`, where bit `k` of
    /// `outcome_bits` is the outcome of `qubits[k]` (1 = spin-down) and the
    /// reduced state keeps the remaining qubits in their original order.
    pub fn project_qubits(
        &self,
        qubits: &[usize],
    ) -> Result<Vec<(usize, T, PureState<T>)>, ExactError> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        let mut seen = 0usize;
        for &q in qubits {
            if seen & (1 << q) != 0 {
                return Err(ExactError::DuplicateQubit { qubit: q });
            }
            seen |= 1 << q;
        }
        let remaining: Vec<usize> = (0..self.n_qubits).filter(|q| seen & (1 << q) == 0).collect();
        let n_rem = remaining.len();
        let mut outcomes = Vec::new();
        for bits in 0..1usize << qubits.len() {
            let mut amps = Vec::with_capacity(1 << n_rem);
            let mut prob = T::zero();
            for rem_bits in 0..1usize << n_rem {
                let mut index = 0usize;
                for (k, &q) in qubits.iter().enumerate() {
                    index |= ((bits >> k) & 1) << q;
                }
                for (k, &q) in remaining.iter().enumerate() {
                    index |= ((rem_bits >> k) & 1) << q;
                }
                let a = self.amps[index];
                prob += a.norm_sqr();
                amps.push(a);
            }
            if prob <= T::zero() {
                continue;
            }
            let state = PureState {
                n_qubits: n_rem,
                amps,
            }
            .normalized();
            outcomes.push((bits, prob, state));
        }
        Ok(outcomes)
    }

    /// Samples one parity-check branch with its exact probability.
    pub fn sample_pcd<R: Rng + ?Sized>(
        &self,
        qa: usize,
        qb: usize,
        rng: &mut R,
    ) -> Result<(Parity, PureState<T>), ExactError> {
        let (even, odd) = self.pcd(qa, qb)?;
        let pick_even = rng.random::<f64>() < even.probability.to_f();
        let chosen = if pick_even { even } else { odd };
        match chosen.post_state {
            Some(state) => Ok((chosen.parity, state)),
            // The unpicked side must have probability ~1; fall back to it.
            None => {
                let (even, odd) = self.pcd(qa, qb)?;
                let fallback = if pick_even { odd } else { even };
                Ok((fallback.parity, fallback.post_state.expect("one branch has weight")))
            }
        }
    }

    /// Samples one z-measurement branch with its exact probability.
    pub fn sample_measure_z<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<(Spin, PureState<T>), ExactError> {
        let [up, down] = self.measure_z(qubit)?;
        let pick_up = rng.random::<f64>() < up.probability.to_f();
        let chosen = if pick_up { up } else { down };
        match chosen.post_state {
            Some(state) => Ok((chosen.spin, state)),
            None => {
                let [up, down] = self.measure_z(qubit)?;
                let fallback = if pick_up { down } else { up };
                Ok((fallback.spin, fallback.post_state.expect("one branch has weight")))
            }
        }
    }

    /// Debug dump: one `bitstring TAB re TAB im` line per amplitude at least
    /// [`DUMP_CUTOFF`] in magnitude, party 0 leftmost in the bitstring.
    pub fn dump_lines(&self) -> String {
        let cutoff = T::from_f(DUMP_CUTOFF);
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr().sqrt() < cutoff {
                continue;
            }
            let mut bits = String::with_capacity(self.n_qubits);
            for q in 0..self.n_qubits {
                bits.push(if (i >> q) & 1 == 1 { '1' } else { '0' });
            }
            let _ = writeln!(out, "{bits}\t{}\t{}", a.re.to_f(), a.im.to_f());
        }
        out
    }
}

/// Weighted list of pure states over a common register.
#[derive(Debug, Clone)]
pub struct WeightedMixture<T: Scalar> {
    terms: Vec<(T, PureState<T>)>,
}

impl<T: Scalar> WeightedMixture<T> {
    pub fn pure(state: PureState<T>) -> Self {
        WeightedMixture {
            terms: vec![(T::one(), state)],
        }
    }

    pub fn new(terms: Vec<(T, PureState<T>)>) -> Result<Self, ExactError> {
        if terms.is_empty() {
            return Err(ExactError::EmptyMixture);
        }
        let n = terms[0].1.n_qubits();
        for (w, state) in &terms {
            if *w < T::zero() {
                return Err(ExactError::NegativeWeight { weight: w.to_f() });
            }
            if state.n_qubits() != n {
                return Err(ExactError::ArityMismatch {
                    expected: n,
                    got: state.n_qubits(),
                });
            }
        }
        Ok(WeightedMixture { terms })
    }

    /// GHZ-diagonal mixture from weighted labels, dropping zero weights.
    pub fn ghz_mixture(
        n_qubits: usize,
        weighted_labels: &[(GhzLabel, T)],
    ) -> Result<Self, ExactError> {
        let mut terms = Vec::new();
        for (label, w) in weighted_labels {
            if *w < T::zero() {
                return Err(ExactError::NegativeWeight { weight: w.to_f() });
            }
            if *w == T::zero() {
                continue;
            }
            terms.push((*w, PureState::ghz(n_qubits, label)?));
        }
        Self::new(terms)
    }

    /// Mixture of pairwise tensor products, weights multiplied.
    pub fn product(&self, other: &Self) -> Result<Self, ExactError> {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (wa, a) in &self.terms {
            for (wb, b) in &other.terms {
                terms.push((*wa * *wb, a.tensor(b)?));
            }
        }
        Self::new(terms)
    }

    pub fn terms(&self) -> &[(T, PureState<T>)] {
        &self.terms
    }

    pub fn n_qubits(&self) -> usize {
        self.terms[0].1.n_qubits()
    }

    pub fn total_weight(&self) -> T {
        self.terms.iter().map(|(w, _)| *w).sum()
    }

    pub fn normalized(mut self) -> Result<Self, ExactError> {
        let total = self.total_weight();
        if total <= T::zero() {
            return Err(ExactError::EmptyMixture);
        }
        for (w, _) in &mut self.terms {
            *w /= total;
        }
        Ok(self)
    }

    /// Projects the mixture onto the full GHZ basis (both signs), returning
    /// each basis state's diagonal weight. Their sum equals the mixture
    /// weight exactly when the mixture is GHZ-diagonal.
    pub fn ghz_diagonal(&self) -> Result<Vec<(GhzLabel, T)>, ExactError> {
        let n = self.n_qubits();
        let mut out = Vec::with_capacity(crate::ghz::class_count(n) * 2);
        for sign in [Sign::Plus, Sign::Minus] {
            for label in crate::ghz::enumerate_classes(n)? {
                let label = label.with_sign(sign);
                let mut weight = T::zero();
                for (w, state) in &self.terms {
                    weight += *w * state.ghz_overlap(&label)?.norm_sqr();
                }
                out.push((label, weight));
            }
        }
        Ok(out)
    }

    /// Plus-sector diagonal in class-enumeration order, checking that minus
    /// and off-diagonal residues stay below `tol` (relative to the mixture
    /// weight).
    pub fn plus_sector_distribution(&self, tol: T) -> Result<Vec<T>, ExactError> {
        let n = self.n_qubits();
        let classes = crate::ghz::class_count(n);
        let diag = self.ghz_diagonal()?;
        let total = self.total_weight();
        let mut plus = vec![T::zero(); classes];
        let mut captured = T::zero();
        let mut minus = T::zero();
        for (k, (label, w)) in diag.iter().enumerate() {
            captured += *w;
            if label.sign() == Sign::Minus {
                minus += *w;
            } else {
                plus[k] = *w;
            }
        }
        if minus > tol * total.max(T::one()) || (total - captured).abs() > tol * total.max(T::one())
        {
            return Err(ExactError::NotGhzDiagonal);
        }
        Ok(plus)
    }
}
