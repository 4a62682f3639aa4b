//! The protocol circuits, built from gates, parity checks, and projective
//! measurements by exhaustive branch enumeration.
//!
//! Register layout is party-major: a two-system round over N parties uses
//! qubits `0..N` for the first system and `N..2N` for the second, so party
//! `p` compares qubits `(p, N+p)`. The link circuit uses the four-qubit
//! register `[A, B, B', C]` with the shared party holding qubits 1 and 2.
//!
//! These functions enumerate every measurement branch with its exact
//! probability; nothing here is sampled and nothing here consults the
//! closed-form ensemble calculus, so the two sides can be checked against
//! each other.

use std::collections::BTreeMap;

use super::{ExactError, Parity, PureState, WeightedMixture};
use crate::Scalar;

/// Result of one two-system purification round.
#[derive(Debug, Clone)]
pub struct NormalRound<T: Scalar> {
    /// Probability that the parity pattern was kept (all even or all odd).
    pub kept_probability: T,
    pub kept_even: T,
    pub kept_odd: T,
    /// Post-selected single-system mixture, `None` when nothing was kept.
    pub output: Option<WeightedMixture<T>>,
    /// Discarded parity patterns (bit `p` set = party `p` saw odd) with the
    /// probability mass that fell on each.
    pub discards: Vec<(u32, T)>,
}

/// One harvested two-party subsystem from the cross-combination branches.
#[derive(Debug, Clone)]
pub struct DistillHarvest<T: Scalar> {
    /// Party whose electrons were measured out.
    pub excluded_party: usize,
    /// The two parties keeping the subsystem, ascending.
    pub parties: (usize, usize),
    /// Unconditional probability of harvesting this subsystem.
    pub probability: T,
    /// Normalized two-qubit mixture held by `parties`.
    pub state: WeightedMixture<T>,
}

#[derive(Debug, Clone)]
pub struct DistillOutcome<T: Scalar> {
    /// Harvests with nonzero probability, ordered by excluded party.
    pub harvests: Vec<DistillHarvest<T>>,
    /// Probability mass on matching parity patterns (not cross items).
    pub matched_weight: T,
}

/// Result of the entanglement-link circuit.
#[derive(Debug, Clone)]
pub struct LinkOutcome<T: Scalar> {
    /// Normalized three-party output mixture over `[A, B, C]`.
    pub output: WeightedMixture<T>,
    /// Total branch probability; the corrections recover every branch, so
    /// this is 1 up to rounding.
    pub total_probability: T,
}

/// Rank-1 test of the amplitude matrix across the cut after `low` qubits.
fn is_product_across<T: Scalar>(state: &PureState<T>, low: usize) -> bool {
    let n = state.n_qubits();
    debug_assert!(low < n);
    let cols = 1usize << low;
    let rows = 1usize << (n - low);
    let amp = |r: usize, c: usize| state.amplitudes()[(r << low) | c];
    let mut pivot = (0usize, 0usize);
    let mut best = T::zero();
    for r in 0..rows {
        for c in 0..cols {
            let m = amp(r, c).norm_sqr();
            if m > best {
                best = m;
                pivot = (r, c);
            }
        }
    }
    if best == T::zero() {
        return false;
    }
    let (pr, pc) = pivot;
    let tol = T::norm_tolerance();
    for r in 0..rows {
        for c in 0..cols {
            let minor = amp(r, c) * amp(pr, pc) - amp(pr, c) * amp(r, pc);
            if minor.norm_sqr().sqrt() > tol {
                return false;
            }
        }
    }
    true
}

/// Runs the per-party parity checks, returning every branch as
/// `(pattern, probability, post_state)` where bit `p` of `pattern` records an
/// odd parity at party `p`.
fn pcd_cascade<T: Scalar>(
    state: &PureState<T>,
    n_parties: usize,
) -> Result<Vec<(u32, T, PureState<T>)>, ExactError> {
    let mut branches = vec![(0u32, T::one(), state.clone())];
    for p in 0..n_parties {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for (pattern, prob, st) in branches {
            let (even, odd) = st.pcd(p, n_parties + p)?;
            if let Some(post) = even.post_state {
                next.push((pattern, prob * even.probability, post));
            }
            if let Some(post) = odd.post_state {
                next.push((pattern | (1 << p), prob * odd.probability, post));
            }
        }
        branches = next;
    }
    Ok(branches)
}

/// Accumulates a weighted state, merging with an existing identical term.
fn merge_term<T: Scalar>(terms: &mut Vec<(T, PureState<T>)>, weight: T, state: PureState<T>) {
    let tol = T::norm_tolerance();
    for (w, existing) in terms.iter_mut() {
        let mut worst = T::zero();
        for (a, b) in existing.amplitudes().iter().zip(state.amplitudes()) {
            worst = worst.max((*a - *b).norm_sqr());
        }
        if worst.sqrt() <= tol {
            *w += weight;
            return;
        }
    }
    terms.push((weight, state));
}

/// Full two-system purification round for bit-flip errors: per-party parity
/// checks, post-selection on an all-even or all-odd pattern, bit-flip
/// correction of the odd branch, Hadamards and z measurements on the second
/// system, and the phase fix conditioned on the parity of the spin-down
/// count. Works for any party count `N ≥ 2` with `2N` qubits in the register.
pub fn normal_round_circuit<T: Scalar>(
    input: &WeightedMixture<T>,
) -> Result<NormalRound<T>, ExactError> {
    let n_total = input.n_qubits();
    if n_total < 4 || !n_total.is_multiple_of(2) {
        return Err(ExactError::ArityMismatch {
            expected: 6,
            got: n_total,
        });
    }
    let n = n_total / 2;
    let full = (1u32 << n) - 1;
    let measured: Vec<usize> = (n..2 * n).collect();

    let mut kept_even = T::zero();
    let mut kept_odd = T::zero();
    let mut discards: BTreeMap<u32, T> = BTreeMap::new();
    let mut out_terms: Vec<(T, PureState<T>)> = Vec::new();

    for (w, term) in input.terms() {
        if !is_product_across(term, n) {
            return Err(ExactError::NotAProductInput);
        }
        for (pattern, p_branch, state) in pcd_cascade(term, n)? {
            if pattern != 0 && pattern != full {
                *discards.entry(pattern).or_insert_with(T::zero) += *w * p_branch;
                continue;
            }
            let odd = pattern == full;
            let mut state = state;
            if odd {
                for q in n..2 * n {
                    state = state.apply_x(q)?;
                }
            }
            for q in n..2 * n {
                state = state.apply_h(q)?;
            }
            for (bits, p_meas, reduced) in state.project_qubits(&measured)? {
                let fixed = if bits.count_ones() % 2 == 1 {
                    reduced.apply_z(0)?
                } else {
                    reduced
                };
                let weight = *w * p_branch * p_meas;
                if odd {
                    kept_odd += weight;
                } else {
                    kept_even += weight;
                }
                merge_term(&mut out_terms, weight, fixed);
            }
        }
    }

    let kept = kept_even + kept_odd;
    let output = if out_terms.is_empty() || kept <= T::zero() {
        None
    } else {
        Some(WeightedMixture::new(out_terms)?.normalized()?)
    };
    Ok(NormalRound {
        kept_probability: kept,
        kept_even,
        kept_odd,
        output,
        discards: discards.into_iter().collect(),
    })
}

/// Party identified by a mismatched three-party parity pattern: the single
/// member of the lightest error pattern in the class.
fn identified_party(pattern: u32) -> usize {
    let comp = pattern ^ 0b111;
    let rep = if pattern.count_ones() <= comp.count_ones() {
        pattern
    } else {
        comp
    };
    debug_assert_eq!(rep.count_ones(), 1);
    rep.trailing_zeros() as usize
}

/// Two-party distillation from the cross-combination branches of a pair of
/// three-party systems. The parity checks are run, matching patterns are set
/// aside, and each mismatched pattern identifies the party carrying the
/// potential flip; that party's two electrons and the other parties' second
/// electrons get a Hadamard and are measured out, with the phase fix keyed to
/// the parity of the spin-down count.
pub fn distill_circuit<T: Scalar>(
    input: &WeightedMixture<T>,
) -> Result<DistillOutcome<T>, ExactError> {
    let n_total = input.n_qubits();
    if n_total != 6 {
        return Err(ExactError::ArityMismatch {
            expected: 6,
            got: n_total,
        });
    }
    let mut matched_weight = T::zero();
    let mut probs = [T::zero(), T::zero(), T::zero()];
    let mut terms: [Vec<(T, PureState<T>)>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for (w, term) in input.terms() {
        if !is_product_across(term, 3) {
            return Err(ExactError::NotAProductInput);
        }
        for (pattern, p_branch, state) in pcd_cascade(term, 3)? {
            if pattern == 0 || pattern == 0b111 {
                matched_weight += *w * p_branch;
                continue;
            }
            let p = identified_party(pattern);
            let mut state = state.apply_h(p)?;
            for q in 3..6 {
                state = state.apply_h(q)?;
            }
            let measured = [p, 3, 4, 5];
            for (bits, p_meas, reduced) in state.project_qubits(&measured)? {
                let fixed = if bits.count_ones() % 2 == 1 {
                    reduced.apply_z(0)?
                } else {
                    reduced
                };
                probs[p] += *w * p_branch * p_meas;
                merge_term(&mut terms[p], *w * p_branch * p_meas, fixed);
            }
        }
    }

    let mut harvests = Vec::new();
    for (p, term_list) in terms.into_iter().enumerate() {
        if term_list.is_empty() || probs[p] <= T::zero() {
            continue;
        }
        let keepers: Vec<usize> = (0..3).filter(|&q| q != p).collect();
        harvests.push(DistillHarvest {
            excluded_party: p,
            parties: (keepers[0], keepers[1]),
            probability: probs[p],
            state: WeightedMixture::new(term_list)?.normalized()?,
        });
    }
    if harvests.is_empty() {
        return Err(ExactError::NotACrossItem);
    }
    Ok(DistillOutcome {
        harvests,
        matched_weight,
    })
}

/// Pairwise recurrence purification round: the two-party case of
/// [`normal_round_circuit`] over the register `[A1, B1, A2, B2]`.
pub fn pair_round_circuit<T: Scalar>(
    input: &WeightedMixture<T>,
) -> Result<NormalRound<T>, ExactError> {
    if input.n_qubits() != 4 {
        return Err(ExactError::ArityMismatch {
            expected: 4,
            got: input.n_qubits(),
        });
    }
    normal_round_circuit(input)
}

/// Entanglement link over the register `[A, B, B', C]`: a parity check on the
/// shared party's electrons `(B, B')`, Hadamard and z measurement of `B'`,
/// and the branch corrections (a bit flip on `C` for the odd parity, a phase
/// flip on `A` for the spin-down reading). All four branches are recovered,
/// so the map is trace preserving.
pub fn link_circuit<T: Scalar>(input: &WeightedMixture<T>) -> Result<LinkOutcome<T>, ExactError> {
    if input.n_qubits() != 4 {
        return Err(ExactError::ArityMismatch {
            expected: 4,
            got: input.n_qubits(),
        });
    }
    let mut total = T::zero();
    let mut out_terms: Vec<(T, PureState<T>)> = Vec::new();
    for (w, term) in input.terms() {
        if !is_product_across(term, 2) {
            return Err(ExactError::NotAProductInput);
        }
        let (even, odd) = term.pcd(1, 2)?;
        for outcome in [even, odd] {
            let Some(state) = outcome.post_state else {
                continue;
            };
            let p_branch = outcome.probability;
            let mut state = state;
            if outcome.parity == Parity::Odd {
                state = state.apply_x(3)?;
            }
            state = state.apply_h(2)?;
            for (bits, p_meas, reduced) in state.project_qubits(&[2])? {
                let fixed = if bits == 1 { reduced.apply_z(0)? } else { reduced };
                let weight = *w * p_branch * p_meas;
                total += weight;
                merge_term(&mut out_terms, weight, fixed);
            }
        }
    }
    Ok(LinkOutcome {
        output: WeightedMixture::new(out_terms)?.normalized()?,
        total_probability: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ghz::{enumerate_classes, GhzLabel, Sign};
    use approx::assert_relative_eq;

    fn ghz_label(n: usize, index: usize) -> GhzLabel {
        GhzLabel::from_class_index(n, index, Sign::Plus).unwrap()
    }

    fn pure_product(n: usize, i: usize, j: usize) -> WeightedMixture<f64> {
        let a = PureState::ghz(n, &ghz_label(n, i)).unwrap();
        let b = PureState::ghz(n, &ghz_label(n, j)).unwrap();
        WeightedMixture::pure(a.tensor(&b).unwrap())
    }

    fn ensemble_product(n: usize, probs: &[f64]) -> WeightedMixture<f64> {
        let labels: Vec<(GhzLabel, f64)> = enumerate_classes(n)
            .unwrap()
            .into_iter()
            .zip(probs.iter().copied())
            .collect();
        let single = WeightedMixture::ghz_mixture(n, &labels).unwrap();
        single.product(&single).unwrap()
    }

    #[test]
    fn identity_input_survives_both_parity_classes() {
        let round = normal_round_circuit(&pure_product(3, 0, 0)).unwrap();
        assert_relative_eq!(round.kept_even, 0.5, epsilon = 1e-12);
        assert_relative_eq!(round.kept_odd, 0.5, epsilon = 1e-12);
        assert_relative_eq!(round.kept_probability, 1.0, epsilon = 1e-12);
        assert!(round.discards.is_empty());

        let out = round.output.unwrap();
        let dist = out.plus_sector_distribution(1e-10).unwrap();
        assert_relative_eq!(dist[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_input_is_never_kept() {
        let round = normal_round_circuit(&pure_product(3, 0, 1)).unwrap();
        assert_relative_eq!(round.kept_probability, 0.0, epsilon = 1e-15);
        assert!(round.output.is_none());
        // The mismatch is at party 0, so the pattern is odd there or at the
        // other two parties, each with probability 1/2.
        let total: f64 = round.discards.iter().map(|(_, p)| *p).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        for (pattern, p) in round.discards {
            assert!(pattern == 0b001 || pattern == 0b110);
            assert_relative_eq!(p, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_half_mixture_keeps_a_third_at_fidelity_three_quarters() {
        let input = ensemble_product(3, &[0.5, 0.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0]);
        let round = normal_round_circuit(&input).unwrap();
        assert_relative_eq!(round.kept_probability, 1.0 / 3.0, epsilon = 1e-12);
        let dist = round
            .output
            .unwrap()
            .plus_sector_distribution(1e-10)
            .unwrap();
        assert_relative_eq!(dist[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn outputs_stay_ghz_diagonal() {
        let input = ensemble_product(3, &[0.4, 0.3, 0.2, 0.1]);
        let round = normal_round_circuit(&input).unwrap();
        let dist = round
            .output
            .unwrap()
            .plus_sector_distribution(1e-12)
            .unwrap();
        let sum: f64 = dist.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn four_party_round_works_on_eight_qubits() {
        let round = normal_round_circuit(&pure_product(4, 3, 3)).unwrap();
        assert_relative_eq!(round.kept_probability, 1.0, epsilon = 1e-12);
        let dist = round
            .output
            .unwrap()
            .plus_sector_distribution(1e-10)
            .unwrap();
        assert_relative_eq!(dist[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_product_input_is_rejected() {
        // A GHZ state across the cut is maximally non-product.
        let state = PureState::<f64>::ghz(6, &GhzLabel::ideal(6).unwrap()).unwrap();
        let err = normal_round_circuit(&WeightedMixture::pure(state)).unwrap_err();
        assert!(matches!(err, ExactError::NotAProductInput));
    }

    #[test]
    fn distill_pure_cross_item_yields_the_flagged_pair() {
        // Labels 0 and 3 differ by a flip on party 2, so parties 0 and 1 keep
        // an aligned-pair state with certainty.
        let out = distill_circuit(&pure_product(3, 0, 3)).unwrap();
        assert_relative_eq!(out.matched_weight, 0.0, epsilon = 1e-15);
        assert_eq!(out.harvests.len(), 1);
        let h = &out.harvests[0];
        assert_eq!(h.excluded_party, 2);
        assert_eq!(h.parties, (0, 1));
        assert_relative_eq!(h.probability, 1.0, epsilon = 1e-12);
        let dist = h.state.plus_sector_distribution(1e-10).unwrap();
        assert_relative_eq!(dist[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distill_double_error_item_yields_antialigned_pair() {
        let out = distill_circuit(&pure_product(3, 1, 2)).unwrap();
        let h = &out.harvests[0];
        assert_eq!(h.excluded_party, 2);
        assert_eq!(h.parties, (0, 1));
        assert_relative_eq!(h.probability, 1.0, epsilon = 1e-12);
        let dist = h.state.plus_sector_distribution(1e-10).unwrap();
        assert_relative_eq!(dist[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distill_symmetric_cross_pair_lands_on_remaining_parties() {
        // Equal mixture of the two orderings of labels 0 and 1: party 0 is
        // measured out, parties 1 and 2 keep an aligned pair.
        let a = pure_product(3, 0, 1);
        let b = pure_product(3, 1, 0);
        let mut terms = Vec::new();
        for (w, s) in a.terms() {
            terms.push((w * 0.5, s.clone()));
        }
        for (w, s) in b.terms() {
            terms.push((w * 0.5, s.clone()));
        }
        let out = distill_circuit(&WeightedMixture::new(terms).unwrap()).unwrap();
        assert_eq!(out.harvests.len(), 1);
        let h = &out.harvests[0];
        assert_eq!(h.excluded_party, 0);
        assert_eq!(h.parties, (1, 2));
        assert_relative_eq!(h.probability, 1.0, epsilon = 1e-12);
        let dist = h.state.plus_sector_distribution(1e-10).unwrap();
        assert_relative_eq!(dist[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distill_rejects_identity_only_input() {
        let err = distill_circuit(&pure_product(3, 2, 2)).unwrap_err();
        assert!(matches!(err, ExactError::NotACrossItem));
    }

    #[test]
    fn pair_round_pure_case() {
        let round = pair_round_circuit(&pure_product(2, 0, 0)).unwrap();
        assert_relative_eq!(round.kept_even, 0.5, epsilon = 1e-12);
        assert_relative_eq!(round.kept_odd, 0.5, epsilon = 1e-12);
        let dist = round
            .output
            .unwrap()
            .plus_sector_distribution(1e-10)
            .unwrap();
        assert_relative_eq!(dist[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pair_round_mixed_case() {
        let labels: Vec<(GhzLabel, f64)> = enumerate_classes(2)
            .unwrap()
            .into_iter()
            .zip([0.6, 0.4])
            .collect();
        let single = WeightedMixture::ghz_mixture(2, &labels).unwrap();
        let round = pair_round_circuit(&single.product(&single).unwrap()).unwrap();
        assert_relative_eq!(round.kept_probability, 0.52, epsilon = 1e-12);
        let dist = round
            .output
            .unwrap()
            .plus_sector_distribution(1e-10)
            .unwrap();
        assert_relative_eq!(dist[0], 0.36 / 0.52, epsilon = 1e-12);
        assert_relative_eq!(dist[1], 0.16 / 0.52, epsilon = 1e-12);
    }

    #[test]
    fn pair_round_mismatched_pair_is_discarded() {
        let round = pair_round_circuit(&pure_product(2, 0, 1)).unwrap();
        assert_relative_eq!(round.kept_probability, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn link_maps_pure_pairs_to_the_expected_labels() {
        // (first pair label, second pair label) -> three-party class index.
        for (i, j, expected) in [(0, 0, 0), (1, 0, 1), (1, 1, 2), (0, 1, 3)] {
            let out = link_circuit(&pure_product(2, i, j)).unwrap();
            assert_relative_eq!(out.total_probability, 1.0, epsilon = 1e-12);
            let dist = out.output.plus_sector_distribution(1e-10).unwrap();
            assert_relative_eq!(dist[expected], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn link_of_mixed_pairs_multiplies_weights() {
        let first = WeightedMixture::ghz_mixture(
            2,
            &[(ghz_label(2, 0), 0.9), (ghz_label(2, 1), 0.1)],
        )
        .unwrap();
        let second = WeightedMixture::ghz_mixture(
            2,
            &[(ghz_label(2, 0), 0.8), (ghz_label(2, 1), 0.2)],
        )
        .unwrap();
        let out = link_circuit(&first.product(&second).unwrap()).unwrap();
        assert_relative_eq!(out.total_probability, 1.0, epsilon = 1e-12);
        let dist = out.output.plus_sector_distribution(1e-10).unwrap();
        assert_relative_eq!(dist[0], 0.72, epsilon = 1e-12);
        assert_relative_eq!(dist[1], 0.08, epsilon = 1e-12);
        assert_relative_eq!(dist[2], 0.02, epsilon = 1e-12);
        assert_relative_eq!(dist[3], 0.18, epsilon = 1e-12);
    }
}
