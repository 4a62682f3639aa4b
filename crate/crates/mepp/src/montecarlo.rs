//! Stochastic trajectory sampling of the exact circuits.
//!
//! Every trial draws input labels, then walks the corresponding circuit in
//! [`crate::exact`] sampling each measurement branch with its exact
//! probability. The tallies are compared against the closed-form calculus
//! with binomial standard errors, so this module is the statistical check on
//! both the protocol logic and the ensemble formulas.
//!
//! Randomness contract: trial `k` of a run with seed `s` uses a ChaCha8
//! stream seeded with a SplitMix64 mix of `(s, k)`. Any parallel or serial
//! schedule therefore produces the same aggregate summary, and identical
//! `(seed, config)` reproduce results bit for bit. The generator choice is
//! fixed; changing it would invalidate every frozen statistical expectation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ensemble::{
    cross_distill, link, EnsembleError, GhzEnsemble, PairEnsemble, PairId,
};
use crate::exact::{ExactError, Parity, PureState};
use crate::ghz::{self, Sign};
use crate::scheduler::{min_pair_depth, yield_recycling, YieldPolicy};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum McError {
    #[error("configuration requests zero trials")]
    ZeroTrials,
    #[error("summary statistic {0} has no calculus prediction")]
    StatMismatch(String),
    #[error("trajectory left the GHZ-diagonal support")]
    OffDiagonalTrajectory,
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Label(#[from] ghz::GhzError),
}

/// What to sample.
#[derive(Debug, Clone)]
pub enum Scenario<T: Scalar> {
    NormalRound { ensemble: GhzEnsemble<T> },
    Distill { ensemble: GhzEnsemble<T> },
    PairRound { pair: PairEnsemble<T> },
    Link { first: PairEnsemble<T>, second: PairEnsemble<T> },
    FullPipeline { f0: T, policy: YieldPolicy<T> },
}

impl<T: Scalar> Scenario<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::NormalRound { .. } => "normal_round",
            Scenario::Distill { .. } => "distill",
            Scenario::PairRound { .. } => "pair_round",
            Scenario::Link { .. } => "link",
            Scenario::FullPipeline { .. } => "full_pipeline",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialConfig<T: Scalar> {
    pub trials: u64,
    pub seed: u64,
    pub scenario: Scenario<T>,
}

/// One tallied statistic: an empirical proportion over `samples` draws, with
/// an optional externally computed standard error (used where the draws are
/// not simple Bernoulli trials).
#[derive(Debug, Clone, PartialEq)]
pub struct Stat {
    pub name: String,
    pub observed: f64,
    pub samples: u64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub scenario: String,
    pub trials: u64,
    pub stats: Vec<Stat>,
}

/// Closed-form expectations keyed by statistic name.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub expected: Vec<(String, f64)>,
}

impl Prediction {
    fn get(&self, name: &str) -> Option<f64> {
        self.expected
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone)]
pub struct StatCheck {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub pass: bool,
    pub worst_z: f64,
    pub worst_stat: String,
    pub checks: Vec<StatCheck>,
}

/// Pass gate: every tallied statistic within 4 standard errors.
pub const Z_LIMIT: f64 = 4.0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// The documented per-trial stream: ChaCha8 seeded from SplitMix64(seed, k).
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial_index)))
}

fn cumulative<T: Scalar>(probs: &[T]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p.to_f();
            acc
        })
        .collect()
}

fn draw(cum: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rand::Rng::random(rng);
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

/// Finds the plus-sector class a trajectory output collapsed to.
fn identify_plus_class<T: Scalar>(state: &PureState<T>) -> Result<usize, McError> {
    let n = state.n_qubits();
    for (idx, label) in ghz::enumerate_classes(n)?.into_iter().enumerate() {
        let overlap = state
            .ghz_overlap(&label.with_sign(Sign::Plus))?
            .norm_sqr()
            .to_f();
        if overlap > 0.5 {
            if overlap < 1.0 - 1e-6 {
                return Err(McError::OffDiagonalTrajectory);
            }
            return Ok(idx);
        }
    }
    Err(McError::OffDiagonalTrajectory)
}

/// Samples the per-party parity checks of a two-system register, returning
/// the parity pattern and the post state.
fn sample_pcd_cascade<T: Scalar>(
    mut state: PureState<T>,
    n_parties: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(u32, PureState<T>), McError> {
    let mut pattern = 0u32;
    for p in 0..n_parties {
        let (parity, post) = state.sample_pcd(p, n_parties + p, rng)?;
        if parity == Parity::Odd {
            pattern |= 1 << p;
        }
        state = post;
    }
    Ok((pattern, state))
}

/// One sampled purification-round trajectory; `None` when the parity pattern
/// is discarded, otherwise the output class index.
fn sample_round_trajectory<T: Scalar>(
    inputs: (&PureState<T>, &PureState<T>),
    n_parties: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<usize>, McError> {
    let state = inputs.0.tensor(inputs.1)?;
    let full = (1u32 << n_parties) - 1;
    let (pattern, mut state) = sample_pcd_cascade(state, n_parties, rng)?;
    if pattern != 0 && pattern != full {
        return Ok(None);
    }
    if pattern == full {
        for q in n_parties..2 * n_parties {
            state = state.apply_x(q)?;
        }
    }
    for q in n_parties..2 * n_parties {
        state = state.apply_h(q)?;
    }
    let mut downs = 0u32;
    for q in n_parties..2 * n_parties {
        let (spin, post) = state.sample_measure_z(q, rng)?;
        downs += spin.bit() as u32;
        state = post;
    }
    let measured: Vec<usize> = (n_parties..2 * n_parties).collect();
    let collapsed = state.project_qubits(&measured)?;
    let (_, _, reduced) = collapsed.into_iter().next().ok_or(McError::OffDiagonalTrajectory)?;
    let fixed = if downs % 2 == 1 {
        reduced.apply_z(0)?
    } else {
        reduced
    };
    Ok(Some(identify_plus_class(&fixed)?))
}

/// One sampled distillation trajectory; `None` when the parities match (an
/// identity-combination item), otherwise the harvested pair and whether it
/// came out aligned.
fn sample_distill_trajectory<T: Scalar>(
    inputs: (&PureState<T>, &PureState<T>),
    rng: &mut ChaCha8Rng,
) -> Result<Option<(PairId, bool)>, McError> {
    let state = inputs.0.tensor(inputs.1)?;
    let (pattern, state) = sample_pcd_cascade(state, 3, rng)?;
    if pattern == 0 || pattern == 0b111 {
        return Ok(None);
    }
    let comp = pattern ^ 0b111;
    let rep = if pattern.count_ones() <= comp.count_ones() {
        pattern
    } else {
        comp
    };
    let party = rep.trailing_zeros() as usize;
    let mut state = state.apply_h(party)?;
    for q in 3..6 {
        state = state.apply_h(q)?;
    }
    let mut downs = 0u32;
    for q in [party, 3, 4, 5] {
        let (spin, post) = state.sample_measure_z(q, rng)?;
        downs += spin.bit() as u32;
        state = post;
    }
    let collapsed = state.project_qubits(&[party, 3, 4, 5])?;
    let (_, _, reduced) = collapsed.into_iter().next().ok_or(McError::OffDiagonalTrajectory)?;
    let fixed = if downs % 2 == 1 {
        reduced.apply_z(0)?
    } else {
        reduced
    };
    let class = identify_plus_class(&fixed)?;
    let pair = PairId::excluding(party).expect("party from a 3-bit pattern");
    Ok(Some((pair, class == 0)))
}

/// One sampled link trajectory over `[outer1, shared, shared', outer2]`,
/// returning the register-order class index of the produced system.
fn sample_link_trajectory<T: Scalar>(
    inputs: (&PureState<T>, &PureState<T>),
    rng: &mut ChaCha8Rng,
) -> Result<usize, McError> {
    let state = inputs.0.tensor(inputs.1)?;
    let (parity, mut state) = state.sample_pcd(1, 2, rng)?;
    if parity == Parity::Odd {
        state = state.apply_x(3)?;
    }
    state = state.apply_h(2)?;
    let (spin, state) = state.sample_measure_z(2, rng)?;
    let collapsed = state.project_qubits(&[2])?;
    let (_, _, reduced) = collapsed.into_iter().next().ok_or(McError::OffDiagonalTrajectory)?;
    let fixed = if spin.bit() == 1 {
        reduced.apply_z(0)?
    } else {
        reduced
    };
    identify_plus_class(&fixed)
}

fn ghz_states<T: Scalar>(n: usize) -> Result<Vec<PureState<T>>, McError> {
    Ok(ghz::enumerate_classes(n)?
        .into_iter()
        .map(|l| PureState::ghz(n, &l))
        .collect::<Result<_, _>>()?)
}

fn bell_states<T: Scalar>() -> Result<Vec<PureState<T>>, McError> {
    ghz_states(2)
}

/// Runs the configured scenario. Deterministic in `(seed, scenario, trials)`.
pub fn sample_scenario<T: Scalar>(cfg: &TrialConfig<T>) -> Result<TrialSummary, McError> {
    if cfg.trials == 0 {
        return Err(McError::ZeroTrials);
    }
    match &cfg.scenario {
        Scenario::NormalRound { ensemble } => sample_normal_round(cfg, ensemble),
        Scenario::Distill { ensemble } => sample_distill(cfg, ensemble),
        Scenario::PairRound { pair } => sample_pair_round(cfg, pair),
        Scenario::Link { first, second } => sample_link(cfg, first, second),
        Scenario::FullPipeline { f0, policy } => sample_full_pipeline(cfg, *f0, policy),
    }
}

fn sample_normal_round<T: Scalar>(
    cfg: &TrialConfig<T>,
    ensemble: &GhzEnsemble<T>,
) -> Result<TrialSummary, McError> {
    let n = ensemble.n_parties();
    let states = ghz_states::<T>(n)?;
    let cum = cumulative(ensemble.probs());
    let classes = states.len();
    let mut kept = 0u64;
    let mut counts = vec![0u64; classes];
    for k in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, k);
        let i = draw(&cum, &mut rng);
        let j = draw(&cum, &mut rng);
        if let Some(out) = sample_round_trajectory((&states[i], &states[j]), n, &mut rng)? {
            kept += 1;
            counts[out] += 1;
        }
    }
    let mut stats = vec![Stat {
        name: "kept_rate".into(),
        observed: kept as f64 / cfg.trials as f64,
        samples: cfg.trials,
        std_error: None,
    }];
    if kept > 0 {
        let labels = ghz::enumerate_classes(n)?;
        for (idx, count) in counts.iter().enumerate() {
            stats.push(Stat {
                name: format!("out[{}]", labels[idx]),
                observed: *count as f64 / kept as f64,
                samples: kept,
                std_error: None,
            });
        }
    }
    Ok(TrialSummary {
        scenario: cfg.scenario.name().into(),
        trials: cfg.trials,
        stats,
    })
}

fn sample_distill<T: Scalar>(
    cfg: &TrialConfig<T>,
    ensemble: &GhzEnsemble<T>,
) -> Result<TrialSummary, McError> {
    if ensemble.n_parties() != 3 {
        return Err(McError::Ensemble(EnsembleError::WrongParties {
            expected: 3,
            got: ensemble.n_parties(),
        }));
    }
    let states = ghz_states::<T>(3)?;
    let cum = cumulative(ensemble.probs());
    let mut harvested = [0u64; 3];
    let mut aligned = [0u64; 3];
    for k in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, k);
        let i = draw(&cum, &mut rng);
        let j = draw(&cum, &mut rng);
        if let Some((pair, is_aligned)) =
            sample_distill_trajectory((&states[i], &states[j]), &mut rng)?
        {
            let slot = PairId::ALL.iter().position(|&p| p == pair).unwrap();
            harvested[slot] += 1;
            if is_aligned {
                aligned[slot] += 1;
            }
        }
    }
    let mut stats = Vec::new();
    for (slot, pair) in PairId::ALL.iter().enumerate() {
        stats.push(Stat {
            name: format!("harvest[{pair}]"),
            observed: harvested[slot] as f64 / cfg.trials as f64,
            samples: cfg.trials,
            std_error: None,
        });
        if harvested[slot] > 0 {
            stats.push(Stat {
                name: format!("f0[{pair}]"),
                observed: aligned[slot] as f64 / harvested[slot] as f64,
                samples: harvested[slot],
                std_error: None,
            });
        }
    }
    Ok(TrialSummary {
        scenario: cfg.scenario.name().into(),
        trials: cfg.trials,
        stats,
    })
}

fn sample_pair_round<T: Scalar>(
    cfg: &TrialConfig<T>,
    pair: &PairEnsemble<T>,
) -> Result<TrialSummary, McError> {
    let states = bell_states::<T>()?;
    let cum = cumulative(&[pair.f0(), pair.f1()]);
    let mut kept = 0u64;
    let mut counts = [0u64; 2];
    for k in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, k);
        let i = draw(&cum, &mut rng);
        let j = draw(&cum, &mut rng);
        if let Some(out) = sample_round_trajectory((&states[i], &states[j]), 2, &mut rng)? {
            kept += 1;
            counts[out] += 1;
        }
    }
    let mut stats = vec![Stat {
        name: "kept_rate".into(),
        observed: kept as f64 / cfg.trials as f64,
        samples: cfg.trials,
        std_error: None,
    }];
    if kept > 0 {
        for (idx, name) in ["out_aligned", "out_antialigned"].iter().enumerate() {
            stats.push(Stat {
                name: (*name).into(),
                observed: counts[idx] as f64 / kept as f64,
                samples: kept,
                std_error: None,
            });
        }
    }
    Ok(TrialSummary {
        scenario: cfg.scenario.name().into(),
        trials: cfg.trials,
        stats,
    })
}

fn sample_link<T: Scalar>(
    cfg: &TrialConfig<T>,
    first: &PairEnsemble<T>,
    second: &PairEnsemble<T>,
) -> Result<TrialSummary, McError> {
    // Validate linkability and fix the register-to-party class mapping.
    let shared = first
        .pair
        .shared_party(second.pair)
        .ok_or(McError::Ensemble(EnsembleError::NotLinkable(first.pair)))?;
    let outer_first = {
        let (a, b) = first.pair.parties();
        if a == shared {
            b
        } else {
            a
        }
    };
    let outer_second = {
        let (a, b) = second.pair.parties();
        if a == shared {
            b
        } else {
            a
        }
    };
    // Register class r -> party class: flips at register qubits 0/1/2 are
    // flips at outer_first/shared/outer_second.
    let to_party_class = [0usize, outer_first + 1, shared + 1, outer_second + 1];

    let states = bell_states::<T>()?;
    let cum_first = cumulative(&[first.f0(), first.f1()]);
    let cum_second = cumulative(&[second.f0(), second.f1()]);
    let mut counts = [0u64; 4];
    for k in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, k);
        let i = draw(&cum_first, &mut rng);
        let j = draw(&cum_second, &mut rng);
        let register_class = sample_link_trajectory((&states[i], &states[j]), &mut rng)?;
        counts[to_party_class[register_class]] += 1;
    }
    let labels = ghz::enumerate_classes(3)?;
    let stats = counts
        .iter()
        .enumerate()
        .map(|(idx, count)| Stat {
            name: format!("out[{}]", labels[idx]),
            observed: *count as f64 / cfg.trials as f64,
            samples: cfg.trials,
            std_error: None,
        })
        .collect();
    Ok(TrialSummary {
        scenario: cfg.scenario.name().into(),
        trials: cfg.trials,
        stats,
    })
}

/// Batch count for the pipeline scenario. Batch spread provides the standard
/// error of the yield estimate where more than one batch exists; below that
/// the Poisson floor in the summary carries the error bar. Batches are kept
/// at a thousand pairs or more because the integer simulation pays a floor
/// cost (odd leftovers at each pairing stage) of order one pair per stage
/// per batch, which must stay small against the expected counts for the
/// comparison with the divisible accounting to be fair.
fn pipeline_batches(trials: u64) -> u64 {
    (trials / 1000).clamp(1, 16)
}

fn sample_full_pipeline<T: Scalar>(
    cfg: &TrialConfig<T>,
    f0: T,
    policy: &YieldPolicy<T>,
) -> Result<TrialSummary, McError> {
    let ensemble = GhzEnsemble::symmetric(f0, 3)?;
    let states = ghz_states::<T>(3)?;
    let bells = bell_states::<T>()?;
    let cum = cumulative(ensemble.probs());
    let depth = min_pair_depth(f0, policy.f_thr, policy.max_rounds);

    let batches = pipeline_batches(cfg.trials);
    let pairs_per_batch = cfg.trials / batches;
    let mut batch_yields = Vec::with_capacity(batches as usize);
    let mut produced_total = 0u64;
    let mut ideal_total = 0u64;
    let mut initial_total = 0u64;

    for b in 0..batches {
        let mut rng = trial_rng(cfg.seed, b);
        let initial_systems = 2 * pairs_per_batch;
        // Harvest stage: each system pair either matches (normal stream, not
        // recycled) or yields one two-party subsystem.
        let mut buckets: [Vec<bool>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for _ in 0..pairs_per_batch {
            let i = draw(&cum, &mut rng);
            let j = draw(&cum, &mut rng);
            if let Some((pair, is_aligned)) =
                sample_distill_trajectory((&states[i], &states[j]), &mut rng)?
            {
                let slot = PairId::ALL.iter().position(|&p| p == pair).unwrap();
                buckets[slot].push(is_aligned);
            }
        }
        // Pairwise purification to the scheduled depth.
        if let Some(depth) = depth {
            for _ in 0..depth {
                for bucket in &mut buckets {
                    let mut survivors = Vec::with_capacity(bucket.len() / 2);
                    for chunk in bucket.chunks(2) {
                        if chunk.len() < 2 {
                            continue;
                        }
                        let a = &bells[usize::from(!chunk[0])];
                        let b = &bells[usize::from(!chunk[1])];
                        if let Some(out) = sample_round_trajectory((a, b), 2, &mut rng)? {
                            survivors.push(out == 0);
                        }
                    }
                    *bucket = survivors;
                }
            }
        }
        // Link stage: greedy matching across distinct labels.
        let mut produced = 0u64;
        let mut ideal = 0u64;
        if depth.is_some() {
            loop {
                let mut order: Vec<usize> = (0..3).collect();
                order.sort_by_key(|&s| std::cmp::Reverse(buckets[s].len()));
                let (first, second) = (order[0], order[1]);
                if buckets[first].is_empty() || buckets[second].is_empty() {
                    break;
                }
                let a = buckets[first].pop().unwrap();
                let b = buckets[second].pop().unwrap();
                let class = sample_link_trajectory(
                    (&bells[usize::from(!a)], &bells[usize::from(!b)]),
                    &mut rng,
                )?;
                produced += 1;
                if class == 0 {
                    ideal += 1;
                }
            }
        }
        produced_total += produced;
        ideal_total += ideal;
        initial_total += initial_systems;
        batch_yields.push(produced as f64 / initial_systems as f64);
    }

    let yield_obs = produced_total as f64 / initial_total as f64;
    let mean = batch_yields.iter().sum::<f64>() / batch_yields.len() as f64;
    let variance = if batch_yields.len() > 1 {
        batch_yields
            .iter()
            .map(|y| (y - mean) * (y - mean))
            .sum::<f64>()
            / (batch_yields.len() - 1) as f64
    } else {
        0.0
    };
    let batch_se = (variance / batch_yields.len() as f64).sqrt();
    // Guard against an unluckily tight batch spread with a Poisson-scale
    // floor on the error of the produced count.
    let poisson_se = (produced_total.max(1) as f64).sqrt() / initial_total as f64;
    let se = batch_se.max(poisson_se);

    let mut stats = vec![Stat {
        name: "yield_per_system".into(),
        observed: yield_obs,
        samples: initial_total,
        std_error: Some(se),
    }];
    if produced_total > 0 {
        stats.push(Stat {
            name: "link_fidelity".into(),
            observed: ideal_total as f64 / produced_total as f64,
            samples: produced_total,
            std_error: None,
        });
    }
    Ok(TrialSummary {
        scenario: cfg.scenario.name().into(),
        trials: cfg.trials,
        stats,
    })
}

/// Closed-form expectations for each statistic a scenario tallies.
pub fn prediction_for<T: Scalar>(scenario: &Scenario<T>) -> Result<Prediction, McError> {
    let mut expected = Vec::new();
    match scenario {
        Scenario::NormalRound { ensemble } => {
            let step = ensemble.normal_round()?;
            expected.push(("kept_rate".into(), step.kept_prob.to_f()));
            let labels = ghz::enumerate_classes(ensemble.n_parties())?;
            for (label, p) in labels.iter().zip(step.output.probs()) {
                expected.push((format!("out[{label}]"), p.to_f()));
            }
        }
        Scenario::Distill { ensemble } => {
            let set = cross_distill(ensemble)?;
            for pair in PairId::ALL {
                let (weight, f0) = set
                    .get(pair)
                    .map(|(pe, w)| (w.to_f(), pe.f0().to_f()))
                    .unwrap_or((0.0, 0.0));
                expected.push((format!("harvest[{pair}]"), weight));
                if weight > 0.0 {
                    expected.push((format!("f0[{pair}]"), f0));
                }
            }
        }
        Scenario::PairRound { pair } => {
            let step = pair.round()?;
            expected.push(("kept_rate".into(), step.success_prob.to_f()));
            expected.push(("out_aligned".into(), step.output.f0().to_f()));
            expected.push(("out_antialigned".into(), step.output.f1().to_f()));
        }
        Scenario::Link { first, second } => {
            let out = link(first, second)?;
            let labels = ghz::enumerate_classes(3)?;
            for (label, p) in labels.iter().zip(out.probs()) {
                expected.push((format!("out[{label}]"), p.to_f()));
            }
        }
        Scenario::FullPipeline { f0, policy } => {
            let recycle = yield_recycling(*f0, policy);
            expected.push((
                "yield_per_system".into(),
                recycle.yield_per_system.to_f(),
            ));
            expected.push(("link_fidelity".into(), recycle.link_fidelity.to_f()));
        }
    }
    Ok(Prediction { expected })
}

/// Compares a summary against its calculus prediction; passes when every
/// statistic is within [`Z_LIMIT`] standard errors.
pub fn compare_to_calculus(
    summary: &TrialSummary,
    prediction: &Prediction,
) -> Result<Comparison, McError> {
    if summary.trials == 0 || summary.stats.is_empty() {
        return Err(McError::ZeroTrials);
    }
    let mut checks = Vec::with_capacity(summary.stats.len());
    let mut worst_z = 0.0f64;
    let mut worst_stat = String::new();
    for stat in &summary.stats {
        let expected = prediction
            .get(&stat.name)
            .ok_or_else(|| McError::StatMismatch(stat.name.clone()))?;
        let se = stat
            .std_error
            .unwrap_or_else(|| (expected * (1.0 - expected) / stat.samples as f64).sqrt());
        let diff = (stat.observed - expected).abs();
        let z = if se > 0.0 {
            diff / se
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        if z > worst_z {
            worst_z = z;
            worst_stat = stat.name.clone();
        }
        checks.push(StatCheck {
            name: stat.name.clone(),
            observed: stat.observed,
            expected,
            z,
        });
    }
    Ok(Comparison {
        pass: worst_z <= Z_LIMIT,
        worst_z,
        worst_stat,
        checks,
    })
}
