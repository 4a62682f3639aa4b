//! Canonical indexing and algebra for N-party GHZ basis states.
//!
//! A GHZ basis state of an N-party spin register is `(|s⟩ ± |s̄⟩)/√2` where
//! `s` is a bit pattern over the parties (bit set = that party's spin is
//! flipped relative to all-up) and `s̄` is its complement. Since `s` and `s̄`
//! describe the same state up to the sign bookkeeping handled here, each
//! state is named by the canonical pattern whose party-0 bit is zero. That
//! leaves `2^(N-1)` patterns per sign, `2^N` states in total.
//!
//! The plus-sector classes carry a fixed enumeration order (see
//! [`GhzLabel::class_index`]) used by the ensemble probability vectors: the
//! no-flip class first, then classes sorted by the weight of their smallest
//! error pattern and by the pattern value. For three parties this puts the
//! single flips in party order, i.e. index `i` (1..=3) is "flip on party
//! `i-1`".

use std::fmt;

use thiserror::Error;

/// Hard cap on register width; masks are stored in `u32` and the exact
/// simulator tops out well below this anyway.
pub const MAX_PARTIES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GhzError {
    #[error("party index {party} out of range for {n_parties} parties")]
    InvalidParty { party: usize, n_parties: usize },
    #[error("{n_parties} parties outside supported range 2..={MAX_PARTIES}")]
    InvalidPartyCount { n_parties: usize },
    #[error("mask {mask:#b} does not fit {n_parties} parties")]
    MaskOutOfRange { mask: u32, n_parties: usize },
    #[error("class index {index} out of range for {n_parties} parties")]
    ClassIndexOutOfRange { index: usize, n_parties: usize },
    #[error("party count mismatch: {left} vs {right}")]
    PartyCountMismatch { left: usize, right: usize },
}

/// Relative sign between the pattern ket and its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

fn check_party_count(n_parties: usize) -> Result<(), GhzError> {
    if (2..=MAX_PARTIES).contains(&n_parties) {
        return Ok(());
    }
    Err(GhzError::InvalidPartyCount { n_parties })
}

fn full_mask(n_parties: usize) -> u32 {
    (1u32 << n_parties) - 1
}

/// A set of parties carrying a bit-flip error, bit `p` = party `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ErrorPattern {
    n_parties: usize,
    flipped: u32,
}

impl ErrorPattern {
    pub fn new<I: IntoIterator<Item = usize>>(
        n_parties: usize,
        flipped: I,
    ) -> Result<Self, GhzError> {
        check_party_count(n_parties)?;
        let mut mask = 0u32;
        for party in flipped {
            if party >= n_parties {
                return Err(GhzError::InvalidParty { party, n_parties });
            }
            mask |= 1 << party;
        }
        Ok(ErrorPattern {
            n_parties,
            flipped: mask,
        })
    }

    pub fn from_mask(n_parties: usize, mask: u32) -> Result<Self, GhzError> {
        check_party_count(n_parties)?;
        if mask > full_mask(n_parties) {
            return Err(GhzError::MaskOutOfRange { mask, n_parties });
        }
        Ok(ErrorPattern {
            n_parties,
            flipped: mask,
        })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn mask(&self) -> u32 {
        self.flipped
    }

    pub fn weight(&self) -> u32 {
        self.flipped.count_ones()
    }
}

/// Canonical name of one GHZ basis state: flip pattern (party-0 bit zero)
/// plus the relative sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GhzLabel {
    n_parties: usize,
    mask: u32,
    sign: Sign,
}

impl GhzLabel {
    /// Canonicalizes an arbitrary flip mask. The returned flag is `true` when
    /// the represented ket picked up an overall `-1`: complementing the
    /// pattern of a minus-sign state negates it, `|s̄⟩ - |s⟩ = -(|s⟩ - |s̄⟩)`.
    pub fn canonicalize(
        n_parties: usize,
        mask: u32,
        sign: Sign,
    ) -> Result<(GhzLabel, bool), GhzError> {
        check_party_count(n_parties)?;
        if mask > full_mask(n_parties) {
            return Err(GhzError::MaskOutOfRange { mask, n_parties });
        }
        let (mask, negated) = if mask & 1 == 0 {
            (mask, false)
        } else {
            (mask ^ full_mask(n_parties), sign == Sign::Minus)
        };
        Ok((
            GhzLabel {
                n_parties,
                mask,
                sign,
            },
            negated,
        ))
    }

    /// The no-flip plus state `(|↑…↑⟩ + |↓…↓⟩)/√2`.
    pub fn ideal(n_parties: usize) -> Result<GhzLabel, GhzError> {
        check_party_count(n_parties)?;
        Ok(GhzLabel {
            n_parties,
            mask: 0,
            sign: Sign::Plus,
        })
    }

    /// Label reached from the ideal plus state by the given bit-flip pattern.
    pub fn from_error(pattern: &ErrorPattern, sign: Sign) -> GhzLabel {
        Self::canonicalize(pattern.n_parties, pattern.flipped, sign)
            .expect("pattern is validated on construction")
            .0
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    /// Canonical flip mask; bit `p` set means party `p` is flipped. Bit 0 is
    /// always clear.
    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn with_sign(&self, sign: Sign) -> GhzLabel {
        GhzLabel { sign, ..*self }
    }

    /// Complement of the canonical mask (the second ket of the superposition).
    pub fn complement_mask(&self) -> u32 {
        self.mask ^ full_mask(self.n_parties)
    }

    /// Applies one bit flip on `party` and re-canonicalizes. Involutive.
    pub fn apply_flip(&self, party: usize) -> Result<GhzLabel, GhzError> {
        if party >= self.n_parties {
            return Err(GhzError::InvalidParty {
                party,
                n_parties: self.n_parties,
            });
        }
        Ok(Self::canonicalize(self.n_parties, self.mask ^ (1 << party), self.sign)?.0)
    }

    /// Applies a whole error pattern (XOR of masks) and re-canonicalizes.
    pub fn apply_pattern(&self, pattern: &ErrorPattern) -> Result<GhzLabel, GhzError> {
        if pattern.n_parties != self.n_parties {
            return Err(GhzError::PartyCountMismatch {
                left: self.n_parties,
                right: pattern.n_parties,
            });
        }
        Ok(Self::canonicalize(self.n_parties, self.mask ^ pattern.flipped, self.sign)?.0)
    }

    /// Sort key for the class enumeration: (weight of the lightest pattern in
    /// the class, value of that pattern).
    fn class_key(&self) -> (u32, u32) {
        let comp = self.complement_mask();
        let (w, c) = (self.mask.count_ones(), comp.count_ones());
        if (w, self.mask) <= (c, comp) {
            (w, self.mask)
        } else {
            (c, comp)
        }
    }

    /// Position of this label's flip class in the fixed enumeration used by
    /// ensemble probability vectors (sign is ignored).
    pub fn class_index(&self) -> usize {
        let key = self.class_key();
        let mut index = 0;
        for mask in canonical_masks(self.n_parties) {
            let other = GhzLabel {
                n_parties: self.n_parties,
                mask,
                sign: Sign::Plus,
            };
            if other.class_key() < key {
                index += 1;
            }
        }
        index
    }

    /// Inverse of [`GhzLabel::class_index`].
    pub fn from_class_index(
        n_parties: usize,
        index: usize,
        sign: Sign,
    ) -> Result<GhzLabel, GhzError> {
        check_party_count(n_parties)?;
        let labels = enumerate_classes(n_parties)?;
        let label = labels
            .get(index)
            .ok_or(GhzError::ClassIndexOutOfRange { index, n_parties })?;
        Ok(label.with_sign(sign))
    }
}

impl fmt::Display for GhzLabel {
    /// Text form `GHZ[N;bits;+|-]` with party 0 leftmost, e.g. `GHZ[3;011;+]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GHZ[{};", self.n_parties)?;
        for party in 0..self.n_parties {
            write!(f, "{}", (self.mask >> party) & 1)?;
        }
        write!(f, ";{}]", self.sign)
    }
}

fn canonical_masks(n_parties: usize) -> impl Iterator<Item = u32> {
    // Canonical masks have bit 0 clear: the remaining n-1 bits are free.
    (0..1u32 << (n_parties - 1)).map(|bits| bits << 1)
}

/// All `2^(N-1)` plus-sector labels in ensemble order.
pub fn enumerate_classes(n_parties: usize) -> Result<Vec<GhzLabel>, GhzError> {
    check_party_count(n_parties)?;
    let mut labels: Vec<GhzLabel> = canonical_masks(n_parties)
        .map(|mask| GhzLabel {
            n_parties,
            mask,
            sign: Sign::Plus,
        })
        .collect();
    labels.sort_by_key(|label| label.class_key());
    Ok(labels)
}

/// Number of plus-sector classes, `2^(N-1)`.
pub fn class_count(n_parties: usize) -> usize {
    1 << (n_parties - 1)
}
