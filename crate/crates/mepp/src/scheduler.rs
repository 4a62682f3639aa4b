//! Threshold-driven protocol pipelines and yield accounting.
//!
//! Yield is counted per initial noisy system under the symmetric noise
//! model. Each purification round maps `m` systems to `m·q/2` expected
//! survivors (`q` the round's kept probability, two systems consumed per
//! attempt). The recycling stream harvests two-party subsystems from the
//! first round's cross-combination items only, purifies them pairwise to the
//! minimal depth that makes the linked output clear the fidelity threshold,
//! and matches purified pairs across distinct party-pair labels (a link
//! consumes two pairs sharing one party and produces one three-party
//! system). Unreachable thresholds are flagged explicitly instead of
//! reporting a silent zero.

use crate::ensemble::{link_fidelity_closed, GhzEnsemble, PairEnsemble, PairId};
use crate::Scalar;

/// How purified pairs are matched into links. Same-label pairs are never
/// matched; under symmetric noise all labels run at equal rates, so greedy
/// cross-label matching links `total/2` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkMatching {
    #[default]
    CrossLabelGreedy,
}

/// Stopping policy for the iterated protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldPolicy<T: Scalar> {
    /// Target fidelity; iteration stops at the first round that reaches it.
    pub f_thr: T,
    /// Cap on purification rounds before declaring the threshold unreachable.
    pub max_rounds: u32,
    pub link_matching: LinkMatching,
}

impl<T: Scalar> Default for YieldPolicy<T> {
    fn default() -> Self {
        YieldPolicy {
            f_thr: T::from_f(0.95),
            max_rounds: 32,
            link_matching: LinkMatching::CrossLabelGreedy,
        }
    }
}

impl<T: Scalar> YieldPolicy<T> {
    pub fn with_threshold(f_thr: T) -> Self {
        YieldPolicy {
            f_thr,
            ..Self::default()
        }
    }
}

/// Yield of the plain iterated purification path.
#[derive(Debug, Clone)]
pub struct NormalYield<T: Scalar> {
    /// Expected threshold-clearing systems per initial system (0 if flagged).
    pub yield_per_system: T,
    pub rounds: u32,
    /// Fidelity before each round and after the last, starting at `f0`.
    pub fidelity_trace: Vec<T>,
    /// Kept probability of each executed round.
    pub kept_trace: Vec<T>,
    pub unreachable: bool,
}

/// Expected-count bookkeeping for the recycling stream, per initial system.
#[derive(Debug, Clone)]
pub struct RecycleLedger<T: Scalar> {
    /// Two-party subsystems harvested from first-round cross items.
    pub pairs_harvested: T,
    /// Surviving pairs after each pairwise purification round.
    pub pairs_after_round: Vec<T>,
    /// Three-party systems produced by linking.
    pub links_formed: T,
}

/// Yield of the recycling path.
#[derive(Debug, Clone)]
pub struct RecyclingYield<T: Scalar> {
    /// Expected threshold-clearing systems per initial system (0 if flagged).
    pub yield_per_system: T,
    /// Pairwise purification depth used before linking.
    pub pair_rounds: u32,
    /// Pair fidelity before each round and after the last.
    pub pair_fidelity_trace: Vec<T>,
    /// Fidelity of the linked output at that depth.
    pub link_fidelity: T,
    pub ledger: RecycleLedger<T>,
    pub unreachable: bool,
}

/// One grid point of the yield comparison.
#[derive(Debug, Clone)]
pub struct YieldReport<T: Scalar> {
    pub f0: T,
    pub y_normal: T,
    pub y_recycle: T,
    /// `y_recycle / y_normal`; NaN when the normal path is flagged.
    pub ratio: T,
    pub rounds_normal: u32,
    pub rounds_pair: u32,
    pub normal_unreachable: bool,
    pub recycle_unreachable: bool,
    pub final_fidelity_normal: T,
    pub final_fidelity_recycle: T,
}

/// Iterates the purification round from a symmetric ensemble at `f0` until
/// the fidelity clears the policy threshold.
pub fn yield_normal<T: Scalar>(f0: T, policy: &YieldPolicy<T>) -> NormalYield<T> {
    let mut trace = vec![f0];
    let mut kept_trace = Vec::new();
    if f0 >= policy.f_thr {
        return NormalYield {
            yield_per_system: T::one(),
            rounds: 0,
            fidelity_trace: trace,
            kept_trace,
            unreachable: false,
        };
    }
    let Ok(mut ensemble) = GhzEnsemble::symmetric(f0, 3) else {
        return NormalYield {
            yield_per_system: T::zero(),
            rounds: 0,
            fidelity_trace: trace,
            kept_trace,
            unreachable: true,
        };
    };
    let half = T::from_f(0.5);
    let mut survivors = T::one();
    for round in 1..=policy.max_rounds {
        let Ok(step) = ensemble.normal_round() else {
            break;
        };
        survivors = survivors * step.kept_prob * half;
        kept_trace.push(step.kept_prob);
        ensemble = step.output;
        trace.push(ensemble.fidelity());
        if ensemble.fidelity() >= policy.f_thr {
            return NormalYield {
                yield_per_system: survivors,
                rounds: round,
                fidelity_trace: trace,
                kept_trace,
                unreachable: false,
            };
        }
    }
    NormalYield {
        yield_per_system: T::zero(),
        rounds: policy.max_rounds,
        fidelity_trace: trace,
        kept_trace,
        unreachable: true,
    }
}

/// Minimal pairwise purification depth whose linked output clears `f_thr`
/// under symmetric noise, if any depth within `max_rounds` does.
pub fn min_pair_depth<T: Scalar>(f0: T, f_thr: T, max_rounds: u32) -> Option<u32> {
    (0..=max_rounds).find(|&n| link_fidelity_closed(f0, n) >= f_thr)
}

/// Closed-form boundary fidelity above which depth `n` suffices for the
/// linked output to clear `f_thr`: solves
/// `((1-F0)/(3 F0))^(2^n) = 1/√f_thr - 1`.
pub fn depth_boundary<T: Scalar>(f_thr: T, n: u32) -> T {
    let ratio = (T::one() / f_thr.sqrt() - T::one())
        .powf(T::one() / T::from_f(f64::from(1u32 << n.min(30))));
    T::one() / (T::one() + T::from_f(3.0) * ratio)
}

/// Runs the recycling stream: harvest pairs from first-round cross items,
/// purify to the minimal sufficient depth, link across labels.
pub fn yield_recycling<T: Scalar>(f0: T, policy: &YieldPolicy<T>) -> RecyclingYield<T> {
    let half = T::from_f(0.5);
    let two = T::from_f(2.0);
    let three = T::from_f(3.0);
    let f1 = (T::one() - f0) / three;
    // Cross-combination probability per system pair; each cross item yields
    // one two-party subsystem, so per initial system the rate halves.
    let p_cross = (two + two * f0 - T::from_f(4.0) * f0 * f0) / three;
    let pairs_harvested = p_cross * half;

    let empty_ledger = |pairs: T| RecycleLedger {
        pairs_harvested: pairs,
        pairs_after_round: Vec::new(),
        links_formed: T::zero(),
    };

    if pairs_harvested <= T::zero() {
        // Pure input: nothing to recycle, threshold status irrelevant.
        return RecyclingYield {
            yield_per_system: T::zero(),
            pair_rounds: 0,
            pair_fidelity_trace: Vec::new(),
            link_fidelity: link_fidelity_closed(f0, 0),
            ledger: empty_ledger(T::zero()),
            unreachable: false,
        };
    }

    let Some(depth) = min_pair_depth(f0, policy.f_thr, policy.max_rounds) else {
        return RecyclingYield {
            yield_per_system: T::zero(),
            pair_rounds: policy.max_rounds,
            pair_fidelity_trace: Vec::new(),
            link_fidelity: link_fidelity_closed(f0, policy.max_rounds),
            ledger: empty_ledger(pairs_harvested),
            unreachable: true,
        };
    };

    // Pair fidelity of the symmetric harvest and its purification schedule.
    let mut pair = PairEnsemble::new(PairId::AB, two * f0 * f1, two * f1 * f1)
        .expect("harvest weights are positive for f0 in (0,1)");
    let mut trace = vec![pair.f0()];
    let mut pairs = pairs_harvested;
    let mut after = Vec::with_capacity(depth as usize);
    for _ in 0..depth {
        let step = pair.round().expect("pair weights stay positive");
        pairs = pairs * step.success_prob * half;
        pair = step.output;
        trace.push(pair.f0());
        after.push(pairs);
    }
    // Equal label rates: greedy cross-label matching links half the pairs.
    let links = pairs * half;
    RecyclingYield {
        yield_per_system: links,
        pair_rounds: depth,
        pair_fidelity_trace: trace,
        link_fidelity: link_fidelity_closed(f0, depth),
        ledger: RecycleLedger {
            pairs_harvested,
            pairs_after_round: after,
            links_formed: links,
        },
        unreachable: false,
    }
}

/// Evaluates both paths at one grid point.
pub fn yield_report<T: Scalar>(f0: T, policy: &YieldPolicy<T>) -> YieldReport<T> {
    let normal = yield_normal(f0, policy);
    let recycle = yield_recycling(f0, policy);
    let ratio = if normal.unreachable || normal.yield_per_system <= T::zero() {
        T::nan()
    } else {
        recycle.yield_per_system / normal.yield_per_system
    };
    YieldReport {
        f0,
        y_normal: normal.yield_per_system,
        y_recycle: recycle.yield_per_system,
        ratio,
        rounds_normal: normal.rounds,
        rounds_pair: recycle.pair_rounds,
        normal_unreachable: normal.unreachable,
        recycle_unreachable: recycle.unreachable,
        final_fidelity_normal: *normal
            .fidelity_trace
            .last()
            .expect("trace starts with f0"),
        final_fidelity_recycle: recycle.link_fidelity,
    }
}

/// Pointwise evaluation over a fidelity grid.
pub fn yield_ratio_curve<T: Scalar>(grid: &[T], policy: &YieldPolicy<T>) -> Vec<YieldReport<T>> {
    grid.iter().map(|&f0| yield_report(f0, policy)).collect()
}

/// Locates a crossing of `ratio = 1` by scanning `[lo, hi]` for a bracketing
/// step and bisecting it to `tol`. Returns `None` when the scan finds no sign
/// change.
pub fn ratio_crossover<T: Scalar>(
    lo: T,
    hi: T,
    policy: &YieldPolicy<T>,
    tol: T,
) -> Option<T> {
    let ratio_at = |f0: T| {
        let report = yield_report(f0, policy);
        if report.ratio.is_nan() {
            None
        } else {
            Some(report.ratio - T::one())
        }
    };
    let steps = 200;
    let dx = (hi - lo) / T::from_f(f64::from(steps));
    let mut prev: Option<(T, T)> = None;
    let mut bracket = None;
    for k in 0..=steps {
        let x = lo + dx * T::from_f(f64::from(k));
        let Some(v) = ratio_at(x) else {
            prev = None;
            continue;
        };
        if let Some((px, pv)) = prev {
            if (pv > T::zero()) != (v > T::zero()) {
                bracket = Some((px, x));
                break;
            }
        }
        prev = Some((x, v));
    }
    let (mut a, mut b) = bracket?;
    let va = ratio_at(a)?;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = (a + b) * T::from_f(0.5);
        let vm = ratio_at(mid)?;
        if (vm > T::zero()) == (va > T::zero()) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some((a + b) * T::from_f(0.5))
}
