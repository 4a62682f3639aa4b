//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mepp::ensemble::{
    cross_distill, gain_threshold, link, symmetric_curves, EnsembleError, GhzEnsemble,
    PairEnsemble, PairId,
};
use mepp::exact::{
    distill_circuit, link_circuit, normal_round_circuit, pair_round_circuit, WeightedMixture,
};
use mepp::montecarlo::{compare_to_calculus, prediction_for, sample_scenario, Scenario,
    TrialConfig, Z_LIMIT};
use mepp::scheduler::{depth_boundary, ratio_crossover, yield_report, YieldPolicy};
use mepp::Sign;

use crate::numfmt::sig6;
use crate::stateparse::parse_product;
use crate::{CliError, Resolved};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_output(out: &Option<String>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {path}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Inclusive grid `f0_min, f0_min+step, ...` up to `f0_max`, clamped into the
/// valid probability range.
fn f0_grid(opts: &Resolved) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let f0 = opts.f0_min + opts.step * k as f64;
        if f0 > opts.f0_max + opts.step * 1e-9 {
            break;
        }
        grid.push(f0.min(opts.f0_max).min(1.0));
        k += 1;
    }
    grid
}

pub fn sweep(opts: &Resolved) -> Result<(), CliError> {
    let mut csv = String::from("f0,e_n,e_2to3,e_o,f_n,f_2,f_2to3\n");
    for f0 in f0_grid(opts) {
        let c = symmetric_curves(f0).map_err(|e| usage(e.to_string()))?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            sig6(f0),
            sig6(c.e_n),
            sig6(c.e_2to3),
            sig6(c.e_o),
            sig6(c.f_n),
            sig6(c.f_2),
            sig6(c.f_2to3)
        );
    }
    write_output(&opts.out, &csv)
}

pub fn yield_curve(opts: &Resolved) -> Result<(), CliError> {
    let policy = YieldPolicy::with_threshold(opts.f_thr);
    let mut csv = String::from("f0,y_n,y_r,ratio,rounds_normal,rounds_pair,flags\n");
    for f0 in f0_grid(opts) {
        let report = yield_report(f0, &policy);
        let flags = match (report.normal_unreachable, report.recycle_unreachable) {
            (false, false) => "ok".to_string(),
            (true, false) => "n_unreachable".to_string(),
            (false, true) => "r_unreachable".to_string(),
            (true, true) => "n_unreachable+r_unreachable".to_string(),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            sig6(f0),
            sig6(report.y_normal),
            sig6(report.y_recycle),
            sig6(report.ratio),
            report.rounds_normal,
            report.rounds_pair,
            flags
        );
    }
    write_output(&opts.out, &csv)?;

    // Summary lines: the ratio=1 crossover and the boundary where a single
    // pairwise round suffices. Sent to stderr when the CSV occupies stdout.
    let crossing = ratio_crossover(opts.f0_min.max(1e-6), opts.f0_max.min(1.0), &policy, 1e-4);
    let crossing_text = crossing.map_or("none".to_string(), sig6);
    let boundary = sig6(depth_boundary(opts.f_thr, 1));
    let summary =
        format!("crossover_ratio_1\t{crossing_text}\npair_depth_1_boundary\t{boundary}\n");
    if opts.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

pub fn thresholds(opts: &Resolved) -> Result<(), CliError> {
    let mut csv = String::from("f1,f2,f0_min\n");
    let steps = (1.0 / opts.step).round() as u64;
    for i in 0..=steps {
        let f1 = (i as f64 * opts.step).min(1.0);
        for j in 0..=steps {
            let f2 = (j as f64 * opts.step).min(1.0);
            if f1 + f2 > 1.0 + 1e-12 {
                continue;
            }
            let cell = match gain_threshold(f1, f2) {
                Ok(v) => sig6(v),
                Err(EnsembleError::NoThreshold { .. }) => "nan".to_string(),
                Err(e) => return Err(usage(e.to_string())),
            };
            let _ = writeln!(csv, "{},{},{}", sig6(f1), sig6(f2), cell);
        }
    }
    write_output(&opts.out, &csv)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

const EQUIV_TOL: f64 = 1e-10;

struct ReportRow {
    kind: &'static str,
    name: String,
    metric: &'static str,
    value: f64,
    limit: f64,
    pass: bool,
}

fn random_ensemble(n: usize, rng: &mut ChaCha8Rng) -> GhzEnsemble<f64> {
    let classes = 1usize << (n - 1);
    let probs: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 1e-3).collect();
    GhzEnsemble::new(n, probs).expect("positive weights form an ensemble")
}

fn ensemble_mixture(e: &GhzEnsemble<f64>) -> WeightedMixture<f64> {
    WeightedMixture::ghz_mixture(e.n_parties(), &e.weighted_labels())
        .expect("ensemble weights are valid")
}

fn pair_mixture(pe: &PairEnsemble<f64>) -> WeightedMixture<f64> {
    let labels = mepp::ghz::enumerate_classes(2).expect("two-party classes");
    WeightedMixture::ghz_mixture(
        2,
        &[
            (labels[0].with_sign(Sign::Plus), pe.f0()),
            (labels[1].with_sign(Sign::Plus), pe.f1()),
        ],
    )
    .expect("pair weights are valid")
}

fn equiv_normal_round(e: &GhzEnsemble<f64>) -> Result<f64, CliError> {
    let calculus = e.normal_round().map_err(|e| usage(e.to_string()))?;
    let single = ensemble_mixture(e);
    let product = single.product(&single).map_err(|e| usage(e.to_string()))?;
    let circuit = normal_round_circuit(&product).map_err(|e| usage(e.to_string()))?;
    let mut dev: f64 = (calculus.kept_prob - circuit.kept_probability).abs();
    let dist = circuit
        .output
        .ok_or_else(|| usage("round kept nothing on a full-support ensemble"))?
        .plus_sector_distribution(EQUIV_TOL)
        .map_err(|e| usage(e.to_string()))?;
    for (a, b) in calculus.output.probs().iter().zip(&dist) {
        dev = dev.max((a - b).abs());
    }
    Ok(dev)
}

fn equiv_cross_distill(e: &GhzEnsemble<f64>) -> Result<f64, CliError> {
    let calculus = cross_distill(e).map_err(|e| usage(e.to_string()))?;
    let single = ensemble_mixture(e);
    let product = single.product(&single).map_err(|e| usage(e.to_string()))?;
    let circuit = distill_circuit(&product).map_err(|e| usage(e.to_string()))?;
    let identity: f64 = e.probs().iter().map(|p| p * p).sum();
    let mut dev: f64 = (circuit.matched_weight - identity).abs();
    for harvest in &circuit.harvests {
        let pair = PairId::excluding(harvest.excluded_party).expect("three-party register");
        let (expected_pair, expected_weight) = calculus
            .get(pair)
            .ok_or_else(|| usage(format!("calculus lost pair {pair}")))?;
        dev = dev.max((harvest.probability - expected_weight).abs());
        let dist = harvest
            .state
            .plus_sector_distribution(EQUIV_TOL)
            .map_err(|e| usage(e.to_string()))?;
        dev = dev.max((dist[0] - expected_pair.f0()).abs());
        dev = dev.max((dist[1] - expected_pair.f1()).abs());
    }
    Ok(dev)
}

fn equiv_pair_round(pe: &PairEnsemble<f64>) -> Result<f64, CliError> {
    let calculus = pe.round().map_err(|e| usage(e.to_string()))?;
    let single = pair_mixture(pe);
    let product = single.product(&single).map_err(|e| usage(e.to_string()))?;
    let circuit = pair_round_circuit(&product).map_err(|e| usage(e.to_string()))?;
    let mut dev: f64 = (calculus.success_prob - circuit.kept_probability).abs();
    let dist = circuit
        .output
        .ok_or_else(|| usage("pair round kept nothing on a full-support pair"))?
        .plus_sector_distribution(EQUIV_TOL)
        .map_err(|e| usage(e.to_string()))?;
    dev = dev.max((dist[0] - calculus.output.f0()).abs());
    dev = dev.max((dist[1] - calculus.output.f1()).abs());
    Ok(dev)
}

fn equiv_link(first: &PairEnsemble<f64>, second: &PairEnsemble<f64>) -> Result<f64, CliError> {
    let calculus = link(first, second).map_err(|e| usage(e.to_string()))?;
    let product = pair_mixture(first)
        .product(&pair_mixture(second))
        .map_err(|e| usage(e.to_string()))?;
    let circuit = link_circuit(&product).map_err(|e| usage(e.to_string()))?;
    let mut dev: f64 = (circuit.total_probability - 1.0).abs();
    let shared = first
        .pair
        .shared_party(second.pair)
        .expect("pairs share a party");
    let outer = |p: PairId| {
        let (a, b) = p.parties();
        if a == shared {
            b
        } else {
            a
        }
    };
    let to_party = [0usize, outer(first.pair) + 1, shared + 1, outer(second.pair) + 1];
    let register_dist = circuit
        .output
        .plus_sector_distribution(EQUIV_TOL)
        .map_err(|e| usage(e.to_string()))?;
    for (r, &class) in to_party.iter().enumerate() {
        dev = dev.max((register_dist[r] - calculus.probs()[class]).abs());
    }
    Ok(dev)
}

pub fn verify(opts: &Resolved, perturb: Option<f64>) -> Result<(), CliError> {
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut report = String::new();

    // Deterministic oracle-equivalence matrix: closed forms vs circuits.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4551_5549);
    let equiv = |name: String, dev: f64, rows: &mut Vec<ReportRow>| {
        rows.push(ReportRow {
            kind: "equiv",
            name,
            metric: "max_abs_dev",
            value: dev,
            limit: EQUIV_TOL,
            pass: dev <= EQUIV_TOL,
        });
    };

    let mut dev_normal3: f64 = 0.0;
    let mut dev_distill: f64 = 0.0;
    let mut dev_pair: f64 = 0.0;
    let mut dev_link: f64 = 0.0;
    let link_patterns = [
        (PairId::AB, PairId::BC),
        (PairId::AB, PairId::AC),
        (PairId::AC, PairId::BC),
    ];
    for case in 0..100 {
        let e = random_ensemble(3, &mut rng);
        dev_normal3 = dev_normal3.max(equiv_normal_round(&e)?);
        dev_distill = dev_distill.max(equiv_cross_distill(&e)?);
        let pe = PairEnsemble::new(PairId::AB, rng.random::<f64>() + 1e-3, rng.random::<f64>() + 1e-3)
            .expect("positive weights");
        dev_pair = dev_pair.max(equiv_pair_round(&pe)?);
        let (p1, p2) = link_patterns[case % link_patterns.len()];
        let first = PairEnsemble::new(p1, rng.random::<f64>() + 1e-3, rng.random::<f64>() + 1e-3)
            .expect("positive weights");
        let second = PairEnsemble::new(p2, rng.random::<f64>() + 1e-3, rng.random::<f64>() + 1e-3)
            .expect("positive weights");
        dev_link = dev_link.max(equiv_link(&first, &second)?);
    }
    let mut dev_normal4: f64 = 0.0;
    for _ in 0..25 {
        let e = random_ensemble(4, &mut rng);
        dev_normal4 = dev_normal4.max(equiv_normal_round(&e)?);
    }
    equiv("normal_round_n3".into(), dev_normal3, &mut rows);
    equiv("normal_round_n4".into(), dev_normal4, &mut rows);
    equiv("cross_distill".into(), dev_distill, &mut rows);
    equiv("pair_round".into(), dev_pair, &mut rows);
    equiv("link".into(), dev_link, &mut rows);

    // Monte Carlo matrix: sampled trajectories vs the calculus at 4 sigma.
    let mut asym_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4d43_5345);
    let scenarios: Vec<(&'static str, Scenario<f64>)> = vec![
        (
            "normal_round",
            Scenario::NormalRound {
                ensemble: GhzEnsemble::symmetric(0.5, 3).expect("valid"),
            },
        ),
        (
            "normal_round_asymmetric",
            Scenario::NormalRound {
                ensemble: random_ensemble(3, &mut asym_rng),
            },
        ),
        (
            "distill",
            Scenario::Distill {
                ensemble: GhzEnsemble::new(3, vec![0.4, 0.3, 0.2, 0.1]).expect("valid"),
            },
        ),
        (
            "pair_round",
            Scenario::PairRound {
                pair: PairEnsemble::new(PairId::AB, 0.6, 0.4).expect("valid"),
            },
        ),
        (
            "link",
            Scenario::Link {
                first: PairEnsemble::new(PairId::AB, 0.9, 0.1).expect("valid"),
                second: PairEnsemble::new(PairId::BC, 0.8, 0.2).expect("valid"),
            },
        ),
        (
            "full_pipeline",
            Scenario::FullPipeline {
                f0: 0.5,
                policy: YieldPolicy::with_threshold(opts.f_thr),
            },
        ),
    ];
    for (index, (name, scenario)) in scenarios.into_iter().enumerate() {
        let cfg = TrialConfig {
            trials: opts.trials,
            seed: opts.seed.wrapping_add(index as u64),
            scenario,
        };
        let summary = sample_scenario(&cfg).map_err(|e| usage(e.to_string()))?;
        let mut prediction = prediction_for(&cfg.scenario).map_err(|e| usage(e.to_string()))?;
        if let Some(delta) = perturb {
            for entry in &mut prediction.expected {
                entry.1 = (entry.1 + delta).clamp(0.0, 0.999_999);
            }
        }
        let comparison =
            compare_to_calculus(&summary, &prediction).map_err(|e| usage(e.to_string()))?;
        let _ = writeln!(
            report,
            "MC {name} trials={} worst_z={} ({}) {}",
            opts.trials,
            sig6(comparison.worst_z),
            comparison.worst_stat,
            if comparison.pass { "PASS" } else { "FAIL" }
        );
        rows.push(ReportRow {
            kind: "mc",
            name: name.to_string(),
            metric: "worst_z",
            value: comparison.worst_z,
            limit: Z_LIMIT,
            pass: comparison.pass,
        });
    }

    // Human-readable report: equivalence lines first, then the MC lines
    // accumulated above.
    let mut human = String::new();
    for row in rows.iter().filter(|r| r.kind == "equiv") {
        let _ = writeln!(
            human,
            "EQUIV {} max_abs_dev={} limit={} {}",
            row.name,
            sig6(row.value),
            sig6(row.limit),
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    human.push_str(&report);
    let all_pass = rows.iter().all(|r| r.pass);
    let _ = writeln!(human, "VERIFY {}", if all_pass { "PASS" } else { "FAIL" });
    print!("{human}");

    if let Some(path) = &opts.out {
        let mut csv = String::from("kind,name,metric,value,limit,pass\n");
        for row in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                row.kind,
                row.name,
                row.metric,
                sig6(row.value),
                sig6(row.limit),
                row.pass
            );
        }
        fs::write(path, csv).map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?;
    }

    if all_pass {
        Ok(())
    } else {
        let failing: Vec<String> = rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{} {}={}", r.name, r.metric, sig6(r.value)))
            .collect();
        Err(CliError::Verification(failing.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn push_labels(out: &mut String, tag: &str, mixture: &WeightedMixture<f64>) {
    if let Ok(diag) = mixture.ghz_diagonal() {
        for (label, weight) in diag {
            if weight > 1e-12 {
                let _ = writeln!(out, "{tag}\t{label}\t{}", sig6(weight));
            }
        }
    }
}

fn push_states(out: &mut String, mixture: &WeightedMixture<f64>) {
    for (weight, state) in mixture.terms() {
        let _ = writeln!(out, "state\t{}", sig6(*weight));
        out.push_str(&state.dump_lines());
    }
}

pub fn simulate(opts: &Resolved) -> Result<(), CliError> {
    let circuit = opts
        .circuit
        .as_deref()
        .ok_or_else(|| usage("simulate needs circuit=<name> in the config file"))?;
    let state_spec = opts
        .state
        .as_deref()
        .ok_or_else(|| usage("simulate needs state=<spec> in the config file"))?;
    let (first, second) = parse_product(state_spec)?;
    let input = first
        .product(&second)
        .map_err(|e| usage(e.to_string()))?;

    let mut out = String::new();
    match circuit {
        "normal_round" | "pair_round" => {
            let round = if circuit == "pair_round" {
                pair_round_circuit(&input).map_err(|e| usage(e.to_string()))?
            } else {
                normal_round_circuit(&input).map_err(|e| usage(e.to_string()))?
            };
            let _ = writeln!(out, "circuit\t{circuit}");
            let _ = writeln!(out, "kept_probability\t{}", sig6(round.kept_probability));
            let _ = writeln!(out, "kept_even\t{}", sig6(round.kept_even));
            let _ = writeln!(out, "kept_odd\t{}", sig6(round.kept_odd));
            let n = input.n_qubits() / 2;
            for (pattern, prob) in &round.discards {
                let text: String = (0..n)
                    .map(|p| if (pattern >> p) & 1 == 1 { 'o' } else { 'e' })
                    .collect();
                let _ = writeln!(out, "discard\t{text}\t{}", sig6(*prob));
            }
            if let Some(output) = &round.output {
                push_labels(&mut out, "output_label", output);
                push_states(&mut out, output);
            }
        }
        "distill" => {
            let outcome = distill_circuit(&input).map_err(|e| usage(e.to_string()))?;
            let _ = writeln!(out, "circuit\tdistill");
            let _ = writeln!(out, "matched_weight\t{}", sig6(outcome.matched_weight));
            for harvest in &outcome.harvests {
                let pair = PairId::excluding(harvest.excluded_party)
                    .expect("three-party register");
                let _ = writeln!(out, "harvest\t{pair}\t{}", sig6(harvest.probability));
                if let Ok(diag) = harvest.state.ghz_diagonal() {
                    for (label, weight) in diag {
                        if weight > 1e-12 {
                            let _ = writeln!(
                                out,
                                "harvest_label\t{pair}\t{label}\t{}",
                                sig6(weight)
                            );
                        }
                    }
                }
                push_states(&mut out, &harvest.state);
            }
        }
        "link" => {
            let outcome = link_circuit(&input).map_err(|e| usage(e.to_string()))?;
            let _ = writeln!(out, "circuit\tlink");
            let _ = writeln!(out, "total_probability\t{}", sig6(outcome.total_probability));
            push_labels(&mut out, "output_label", &outcome.output);
            push_states(&mut out, &outcome.output);
        }
        other => {
            return Err(usage(format!(
                "unknown circuit `{other}`; expected normal_round, pair_round, distill, or link"
            )))
        }
    }
    write_output(&opts.out, &out)
}
