//! Closed-form calculus vs exact circuit enumeration on random inputs.
//!
//! Every ensemble-level operation has an amplitude-level counterpart that
//! knows nothing about the closed forms; these tests hold the two routes
//! together to 1e-10 on seeded random inputs. The acceptance suite runs the
//! same comparison at larger sample counts.

use mepp::ensemble::{cross_distill, link, GhzEnsemble, PairEnsemble, PairId};
use mepp::exact::{
    distill_circuit, link_circuit, normal_round_circuit, pair_round_circuit, WeightedMixture,
};
use mepp::Sign;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn random_ensemble(n: usize, rng: &mut ChaCha8Rng) -> GhzEnsemble<f64> {
    let classes = 1 << (n - 1);
    let probs: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 1e-3).collect();
    GhzEnsemble::new(n, probs).unwrap()
}

fn random_pair(pair: PairId, rng: &mut ChaCha8Rng) -> PairEnsemble<f64> {
    PairEnsemble::new(pair, rng.random::<f64>() + 1e-3, rng.random::<f64>() + 1e-3).unwrap()
}

fn ensemble_mixture(e: &GhzEnsemble<f64>) -> WeightedMixture<f64> {
    WeightedMixture::ghz_mixture(e.n_parties(), &e.weighted_labels()).unwrap()
}

fn pair_mixture(pe: &PairEnsemble<f64>) -> WeightedMixture<f64> {
    let labels = mepp::ghz::enumerate_classes(2).unwrap();
    WeightedMixture::ghz_mixture(
        2,
        &[
            (labels[0].with_sign(Sign::Plus), pe.f0()),
            (labels[1].with_sign(Sign::Plus), pe.f1()),
        ],
    )
    .unwrap()
}

fn assert_normal_round_agrees(e: &GhzEnsemble<f64>) {
    let calculus = e.normal_round().unwrap();
    let single = ensemble_mixture(e);
    let circuit = normal_round_circuit(&single.product(&single).unwrap()).unwrap();
    assert!(
        (calculus.kept_prob - circuit.kept_probability).abs() < TOL,
        "kept: {} vs {}",
        calculus.kept_prob,
        circuit.kept_probability
    );
    let dist = circuit
        .output
        .unwrap()
        .plus_sector_distribution(TOL)
        .unwrap();
    for (i, (a, b)) in calculus.output.probs().iter().zip(&dist).enumerate() {
        assert!((a - b).abs() < TOL, "class {i}: {a} vs {b}");
    }
}

#[test]
fn normal_round_matches_circuit_for_three_parties() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        assert_normal_round_agrees(&random_ensemble(3, &mut rng));
    }
}

#[test]
fn normal_round_matches_circuit_for_four_parties() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..5 {
        assert_normal_round_agrees(&random_ensemble(4, &mut rng));
    }
}

#[test]
fn cross_distill_matches_circuit() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..20 {
        let e = random_ensemble(3, &mut rng);
        let calculus = cross_distill(&e).unwrap();
        let single = ensemble_mixture(&e);
        let circuit = distill_circuit(&single.product(&single).unwrap()).unwrap();

        let identity: f64 = e.probs().iter().map(|p| p * p).sum();
        assert!((circuit.matched_weight - identity).abs() < TOL);

        for harvest in &circuit.harvests {
            let pair = PairId::excluding(harvest.excluded_party).unwrap();
            let (expected_pair, expected_weight) = calculus.get(pair).unwrap();
            assert!(
                (harvest.probability - expected_weight).abs() < TOL,
                "{pair}: {} vs {}",
                harvest.probability,
                expected_weight
            );
            let dist = harvest.state.plus_sector_distribution(TOL).unwrap();
            assert!((dist[0] - expected_pair.f0()).abs() < TOL);
            assert!((dist[1] - expected_pair.f1()).abs() < TOL);
        }
        assert_eq!(circuit.harvests.len(), calculus.entries().len());
    }
}

#[test]
fn pair_round_matches_circuit() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..20 {
        let pe = random_pair(PairId::AB, &mut rng);
        let calculus = pe.round().unwrap();
        let single = pair_mixture(&pe);
        let circuit = pair_round_circuit(&single.product(&single).unwrap()).unwrap();
        assert!((calculus.success_prob - circuit.kept_probability).abs() < TOL);
        let dist = circuit
            .output
            .unwrap()
            .plus_sector_distribution(TOL)
            .unwrap();
        assert!((dist[0] - calculus.output.f0()).abs() < TOL);
        assert!((dist[1] - calculus.output.f1()).abs() < TOL);
    }
}

#[test]
fn link_matches_circuit_for_every_share_pattern() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let patterns = [
        (PairId::AB, PairId::BC),
        (PairId::AB, PairId::AC),
        (PairId::AC, PairId::BC),
    ];
    for _ in 0..10 {
        for (p1, p2) in patterns {
            let first = random_pair(p1, &mut rng);
            let second = random_pair(p2, &mut rng);
            let calculus = link(&first, &second).unwrap();
            let circuit = link_circuit(&pair_mixture(&first).product(&pair_mixture(&second)).unwrap())
                .unwrap();
            assert!((circuit.total_probability - 1.0).abs() < TOL);

            // Circuit classes are in register order [outer1, shared, outer2];
            // map them onto party classes before comparing.
            let shared = p1.shared_party(p2).unwrap();
            let outer = |p: PairId| {
                let (a, b) = p.parties();
                if a == shared {
                    b
                } else {
                    a
                }
            };
            let to_party = [0usize, outer(p1) + 1, shared + 1, outer(p2) + 1];
            let register_dist = circuit.output.plus_sector_distribution(TOL).unwrap();
            for (r, &party_class) in to_party.iter().enumerate() {
                assert!(
                    (register_dist[r] - calculus.probs()[party_class]).abs() < TOL,
                    "register {r} party {party_class}"
                );
            }
        }
    }
}
