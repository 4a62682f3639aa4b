//! Closed-form transformations of GHZ-diagonal ensembles.
//!
//! An ensemble is a probability vector over the plus-sector GHZ classes in
//! the enumeration order of [`crate::ghz`]. Minus-sector weight produced
//! mid-circuit is always corrected away by the protocols' phase fixes, so the
//! calculus never stores it. Everything here is plain probability arithmetic;
//! the exact circuit oracle in [`crate::exact`] computes the same quantities
//! from amplitudes and the test suites hold the two routes together.

use thiserror::Error;

use crate::ghz::{self, GhzLabel, Sign};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("probability vector has length {got}, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("operation requires {expected} parties, ensemble has {got}")]
    WrongParties { expected: usize, got: usize },
    #[error("probability {value} outside [0, 1]")]
    InvalidProbability { value: f64 },
    #[error("probabilities are all zero; nothing to normalize")]
    DegenerateInput,
    #[error("pairs labelled {0} share both parties and cannot be linked")]
    NotLinkable(PairId),
    #[error("gain condition undefined: reference error class has zero weight")]
    UndefinedCondition,
    #[error("no gain threshold: discriminant {discriminant} is negative")]
    NoThreshold { discriminant: f64 },
    #[error(transparent)]
    Label(#[from] ghz::GhzError),
}

fn check_prob<T: Scalar>(value: T) -> Result<(), EnsembleError> {
    if value < T::zero() || value > T::one() + T::norm_tolerance() {
        return Err(EnsembleError::InvalidProbability {
            value: value.to_f(),
        });
    }
    Ok(())
}

/// Probability vector over the plus-sector GHZ classes of an N-party system.
#[derive(Debug, Clone, PartialEq)]
pub struct GhzEnsemble<T: Scalar> {
    n_parties: usize,
    probs: Vec<T>,
}

/// One purification round at the ensemble level.
#[derive(Debug, Clone)]
pub struct RoundStep<T: Scalar> {
    /// Probability that a pair of systems survives the parity post-selection.
    pub kept_prob: T,
    pub output: GhzEnsemble<T>,
}

impl<T: Scalar> GhzEnsemble<T> {
    /// Validates and normalizes a probability vector of length `2^(N-1)`.
    pub fn new(n_parties: usize, probs: Vec<T>) -> Result<Self, EnsembleError> {
        let expected = ghz::class_count(n_parties);
        ghz::enumerate_classes(n_parties)?;
        if probs.len() != expected {
            return Err(EnsembleError::WrongLength {
                expected,
                got: probs.len(),
            });
        }
        for &p in &probs {
            if p < -T::norm_tolerance() {
                return Err(EnsembleError::InvalidProbability { value: p.to_f() });
            }
        }
        let total: T = probs.iter().copied().sum();
        if total <= T::zero() {
            return Err(EnsembleError::DegenerateInput);
        }
        let probs = probs
            .into_iter()
            .map(|p| p.max(T::zero()) / total)
            .collect();
        Ok(GhzEnsemble { n_parties, probs })
    }

    /// Symmetric noise model: weight `f0` on the ideal class, the remainder
    /// spread evenly over every other class.
    pub fn symmetric(f0: T, n_parties: usize) -> Result<Self, EnsembleError> {
        check_prob(f0)?;
        let classes = ghz::class_count(n_parties);
        let rest = (T::one() - f0) / T::from_f((classes - 1) as f64);
        let mut probs = vec![rest; classes];
        probs[0] = f0;
        Self::new(n_parties, probs)
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Weight of the ideal (no-flip) class.
    pub fn fidelity(&self) -> T {
        self.probs[0]
    }

    /// Plus-sector labels paired with their weights, for building exact
    /// mixtures.
    pub fn weighted_labels(&self) -> Vec<(GhzLabel, T)> {
        ghz::enumerate_classes(self.n_parties)
            .expect("validated on construction")
            .into_iter()
            .map(|l| l.with_sign(Sign::Plus))
            .zip(self.probs.iter().copied())
            .collect()
    }

    /// One purification round: a pair of identical ensembles passes the
    /// per-party parity checks; each class survives with the square of its
    /// weight. Valid for any party count.
    pub fn normal_round(&self) -> Result<RoundStep<T>, EnsembleError> {
        let kept: T = self.probs.iter().map(|&p| p * p).sum();
        if kept <= T::zero() {
            return Err(EnsembleError::DegenerateInput);
        }
        let probs = self.probs.iter().map(|&p| p * p / kept).collect();
        Ok(RoundStep {
            kept_prob: kept,
            output: GhzEnsemble {
                n_parties: self.n_parties,
                probs,
            },
        })
    }
}

/// Minimum ideal-class weight above which a purification round strictly
/// improves it, given the weights of the first two single-flip classes of a
/// three-party ensemble (the fourth is whatever remains).
pub fn gain_threshold<T: Scalar>(f1: T, f2: T) -> Result<T, EnsembleError> {
    check_prob(f1)?;
    check_prob(f2)?;
    if f1 + f2 > T::one() + T::norm_tolerance() {
        return Err(EnsembleError::InvalidProbability {
            value: (f1 + f2).to_f(),
        });
    }
    let four = T::from_f(4.0);
    let discriminant = T::one() + four * (f1 + f2)
        - T::from_f(12.0) * (f1 * f1 + f2 * f2)
        - T::from_f(8.0) * f1 * f2;
    if discriminant < T::zero() {
        return Err(EnsembleError::NoThreshold {
            discriminant: discriminant.to_f(),
        });
    }
    let two = T::from_f(2.0);
    Ok((T::from_f(3.0) - two * f1 - two * f2 - discriminant.sqrt()) / four)
}

/// Whether the pair distilled from a cross item beats the source fidelity:
/// `f0·fi/(f0·fi + fj·fk) > f0`, i.e. `f0 < 1 - fj·fk/fi`.
pub fn subsystem_gain_ok<T: Scalar>(f0: T, fi: T, fj: T, fk: T) -> Result<bool, EnsembleError> {
    for v in [f0, fi, fj, fk] {
        check_prob(v)?;
    }
    if fi <= T::zero() {
        return Err(EnsembleError::UndefinedCondition);
    }
    Ok(f0 < T::one() - fj * fk / fi)
}

/// The two-party subsystem labels of a three-party protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairId {
    AB,
    AC,
    BC,
}

impl PairId {
    pub const ALL: [PairId; 3] = [PairId::AB, PairId::AC, PairId::BC];

    pub fn parties(self) -> (usize, usize) {
        match self {
            PairId::AB => (0, 1),
            PairId::AC => (0, 2),
            PairId::BC => (1, 2),
        }
    }

    /// The pair formed by everyone except `party`.
    pub fn excluding(party: usize) -> Option<PairId> {
        match party {
            0 => Some(PairId::BC),
            1 => Some(PairId::AC),
            2 => Some(PairId::AB),
            _ => None,
        }
    }

    pub fn excluded_party(self) -> usize {
        match self {
            PairId::BC => 0,
            PairId::AC => 1,
            PairId::AB => 2,
        }
    }

    /// The party shared with `other`, if the pairs differ.
    pub fn shared_party(self, other: PairId) -> Option<usize> {
        if self == other {
            return None;
        }
        let (a, b) = self.parties();
        let (c, d) = other.parties();
        if a == c || a == d {
            Some(a)
        } else if b == c || b == d {
            Some(b)
        } else {
            None
        }
    }

    fn outer_party(self, shared: usize) -> usize {
        let (a, b) = self.parties();
        if a == shared {
            b
        } else {
            a
        }
    }
}

impl std::fmt::Display for PairId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairId::AB => write!(f, "AB"),
            PairId::AC => write!(f, "AC"),
            PairId::BC => write!(f, "BC"),
        }
    }
}

/// Rank-2 two-party mixture: weight `f0` on the aligned pair state and `f1`
/// on the anti-aligned one, tagged with the parties holding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEnsemble<T: Scalar> {
    pub pair: PairId,
    f0: T,
    f1: T,
}

/// One pairwise purification round at the ensemble level.
#[derive(Debug, Clone)]
pub struct PairRoundStep<T: Scalar> {
    pub success_prob: T,
    pub output: PairEnsemble<T>,
}

impl<T: Scalar> PairEnsemble<T> {
    pub fn new(pair: PairId, f0: T, f1: T) -> Result<Self, EnsembleError> {
        if f0 < T::zero() || f1 < T::zero() {
            return Err(EnsembleError::InvalidProbability {
                value: f0.min(f1).to_f(),
            });
        }
        let total = f0 + f1;
        if total <= T::zero() {
            return Err(EnsembleError::DegenerateInput);
        }
        Ok(PairEnsemble {
            pair,
            f0: f0 / total,
            f1: f1 / total,
        })
    }

    pub fn f0(&self) -> T {
        self.f0
    }

    pub fn f1(&self) -> T {
        self.f1
    }

    /// One recurrence round: both weights square, success probability
    /// `f0² + f1²` (both kept parity classes counted).
    pub fn round(&self) -> Result<PairRoundStep<T>, EnsembleError> {
        let success = self.f0 * self.f0 + self.f1 * self.f1;
        if success <= T::zero() {
            return Err(EnsembleError::DegenerateInput);
        }
        Ok(PairRoundStep {
            success_prob: success,
            output: PairEnsemble {
                pair: self.pair,
                f0: self.f0 * self.f0 / success,
                f1: self.f1 * self.f1 / success,
            },
        })
    }

    /// Closed form for `n` rounds: weights raised to the `2^n` and
    /// renormalized. Equals `n`-fold composition of [`PairEnsemble::round`].
    pub fn round_n(&self, n: u32) -> PairEnsemble<T> {
        if n == 0 {
            return *self;
        }
        // Divide through by the larger weight first so the powers cannot
        // underflow both terms at once.
        let big = self.f0.max(self.f1);
        let power = |x: T| {
            // x^(2^n) by repeated squaring.
            let mut acc = x;
            for _ in 0..n {
                acc = acc * acc;
            }
            acc
        };
        let a = power(self.f0 / big);
        let b = power(self.f1 / big);
        let total = a + b;
        PairEnsemble {
            pair: self.pair,
            f0: a / total,
            f1: b / total,
        }
    }
}

/// The harvested two-party ensembles of one cross-combination distillation,
/// with their unconditional weights.
#[derive(Debug, Clone)]
pub struct HarvestSet<T: Scalar> {
    entries: Vec<(PairEnsemble<T>, T)>,
}

impl<T: Scalar> HarvestSet<T> {
    pub fn entries(&self) -> &[(PairEnsemble<T>, T)] {
        &self.entries
    }

    pub fn get(&self, pair: PairId) -> Option<&(PairEnsemble<T>, T)> {
        self.entries.iter().find(|(pe, _)| pe.pair == pair)
    }

    /// Total harvest probability, the cross-combination weight `1 - Σ Fi²`.
    pub fn total_weight(&self) -> T {
        self.entries.iter().map(|(_, w)| *w).sum()
    }
}

/// Distills the cross-combination items of a pair of three-party ensembles
/// into two-party subsystems. Pair `{q, r}` (excluding party `p`) collects
/// aligned-pair weight `2·F0·F(p)` and anti-aligned weight `2·F(q)·F(r)`,
/// where `F(x)` is the single-flip class of party `x`.
pub fn cross_distill<T: Scalar>(e: &GhzEnsemble<T>) -> Result<HarvestSet<T>, EnsembleError> {
    if e.n_parties() != 3 {
        return Err(EnsembleError::WrongParties {
            expected: 3,
            got: e.n_parties(),
        });
    }
    let f = e.probs();
    let two = T::from_f(2.0);
    let mut entries = Vec::with_capacity(3);
    for p in 0..3 {
        let pair = PairId::excluding(p).expect("party index in range");
        let (q, r) = pair.parties();
        let aligned = two * f[0] * f[p + 1];
        let anti = two * f[q + 1] * f[r + 1];
        let weight = aligned + anti;
        if weight > T::zero() {
            entries.push((PairEnsemble::new(pair, aligned, anti)?, weight));
        }
    }
    entries.sort_by_key(|(pe, _)| pe.pair);
    Ok(HarvestSet { entries })
}

/// Produces a three-party ensemble from two purified pairs sharing exactly
/// one party. With pair weights `(f0, f1)` and `(g0, g1)`, the output puts
/// `f0·g0` on the ideal class, `f1·g0` on the flip at the first pair's outer
/// party, `f0·g1` on the flip at the second pair's outer party, and `f1·g1`
/// on the class flipping both outer parties. Deterministic: total weight 1.
pub fn link<T: Scalar>(
    first: &PairEnsemble<T>,
    second: &PairEnsemble<T>,
) -> Result<GhzEnsemble<T>, EnsembleError> {
    let shared = first
        .pair
        .shared_party(second.pair)
        .ok_or(EnsembleError::NotLinkable(first.pair))?;
    let outer_first = first.pair.outer_party(shared);
    let outer_second = second.pair.outer_party(shared);
    let mut probs = vec![T::zero(); 4];
    probs[0] = first.f0 * second.f0;
    probs[outer_first + 1] = first.f1 * second.f0;
    probs[outer_second + 1] = first.f0 * second.f1;
    // Flips at both outer parties form the class of a flip at the shared one.
    probs[shared + 1] = first.f1 * second.f1;
    GhzEnsemble::new(3, probs)
}

/// Closed form for the linked three-party fidelity under symmetric noise
/// after `n` pairwise purification rounds of both input pairs:
/// `F0^(2^(n+1)) / (F0^(2^n) + F1^(2^n))²` with `F1 = (1-F0)/3`.
pub fn link_fidelity_closed<T: Scalar>(f0: T, n: u32) -> T {
    let f1 = (T::one() - f0) / T::from_f(3.0);
    let big = f0.max(f1);
    let power = |x: T| {
        let mut acc = x;
        for _ in 0..n {
            acc = acc * acc;
        }
        acc
    };
    let a = power(f0 / big);
    let b = power(f1 / big);
    let num = a * a;
    let den = (a + b) * (a + b);
    num / den
}

/// The symmetric-noise closed forms for one protocol round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricCurves<T: Scalar> {
    /// Efficiency of the plain purification round (identity-combination
    /// weight).
    pub e_n: T,
    /// Probability of harvesting a two-party subsystem from a system pair.
    pub p_3to2: T,
    /// Efficiency of producing a three-party system from harvested pairs.
    pub e_2to3: T,
    /// Combined efficiency `e_n + e_2to3`.
    pub e_o: T,
    /// Fidelity after the plain round.
    pub f_n: T,
    /// Fidelity of harvested pairs before pairwise purification.
    pub f_2: T,
    /// Fidelity of the linked three-party system built from unpurified pairs.
    pub f_2to3: T,
}

/// Evaluates the symmetric-noise efficiency and fidelity curves at `f0`.
pub fn symmetric_curves<T: Scalar>(f0: T) -> Result<SymmetricCurves<T>, EnsembleError> {
    check_prob(f0)?;
    let one = T::one();
    let two = T::from_f(2.0);
    let three = T::from_f(3.0);
    let four = T::from_f(4.0);
    let nine = T::from_f(9.0);
    let sq = f0 * f0;
    let e_n = (one - two * f0 + four * sq) / three;
    let f_n = three * sq / (one - two * f0 + four * sq);
    let p_3to2 = (two + two * f0 - four * sq) / three;
    let e_2to3 = (one + f0 - two * sq) / three;
    let e_o = (two - f0 + two * sq) / three;
    let f_2 = three * f0 / (one + two * f0);
    let f_2to3 = nine * sq / (one + four * f0 + four * sq);
    Ok(SymmetricCurves {
        e_n,
        p_3to2,
        e_2to3,
        e_o,
        f_n,
        f_2,
        f_2to3,
    })
}
