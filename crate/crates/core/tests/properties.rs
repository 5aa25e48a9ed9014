use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tiereval_core::btm::{self, Comparison, FitOptions, Winner};
use tiereval_core::corpus::{
    build_manifest, AttributeDescriptor, Difficulty, Manifest, PerDifficulty, TemplateTable,
};
use tiereval_core::evalkit::{self, ErrorMetrics};
use tiereval_core::hls::{self, Pairing, PatternTally};
use tiereval_core::responses::{ingest, ResponseMatrix, ResponseRecord};
use tiereval_core::simlab::{simulate_matrices, PoolSpec, ResponderKind, ResponderSpec};
use tiereval_core::stats;

fn grid(classes: &[String], attrs: usize, per_cell: u32) -> Manifest {
    let attrs: Vec<_> = (0..attrs)
        .map(|i| AttributeDescriptor {
            name: format!("attr {i}"),
            descriptors: PerDifficulty::new(
                "plain".into(),
                "partly hidden".into(),
                "mostly hidden".into(),
            ),
        })
        .collect();
    let t = TemplateTable::uniform("A photo of a {class}, {descriptor}.", &attrs);
    build_manifest(classes, &attrs, per_cell, &t).unwrap()
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("class {i}")).collect()
}

fn matrix_from_bits(m: &Manifest, model: &str, bits: &[bool]) -> ResponseMatrix {
    let recs = m
        .items()
        .iter()
        .zip(bits.iter().cycle())
        .map(|(i, &c)| ResponseRecord {
            model: model.into(),
            item_id: i.item_id.clone(),
            correct: c,
            confidence: None,
            predicted_class: None,
        });
    ingest(m, recs).unwrap().remove(model).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn manifest_round_trips_and_is_balanced(
        classes in prop::collection::btree_set("[a-z/% ]{1,8}", 1..4),
        attrs in 1usize..4,
        per_cell in 1u32..5,
    ) {
        let classes: Vec<String> = classes.into_iter().collect();
        let m = grid(&classes, attrs, per_cell);
        prop_assert_eq!(m.len(), classes.len() * attrs * 3 * per_cell as usize);
        for cell in m.cells() {
            for d in Difficulty::ALL {
                let items = m.cell_items(&cell, d).unwrap();
                prop_assert_eq!(items.len(), per_cell as usize);
                prop_assert!(items.iter().all(|i| i.class == cell.class && i.difficulty == d));
            }
        }
        let back = Manifest::from_jsonl(&m.to_jsonl()).unwrap();
        prop_assert_eq!(back.identity_hash(), m.identity_hash());
        prop_assert_eq!(back, m);
    }

    #[test]
    fn ingestion_ignores_record_order(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 1..20)) {
        let m = grid(&class_names(2), 2, 3);
        let recs: Vec<ResponseRecord> = ["a", "b"]
            .iter()
            .flat_map(|model| {
                m.items().iter().zip(bits.iter().cycle()).map(move |(i, &c)| ResponseRecord {
                    model: model.to_string(),
                    item_id: i.item_id.clone(),
                    correct: c,
                    confidence: Some(0.5),
                    predicted_class: None,
                })
            })
            .collect();
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(ingest(&m, recs).unwrap(), ingest(&m, shuffled).unwrap());
    }

    #[test]
    fn hls_invariants(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 1..40)) {
        let m = grid(&class_names(3), 2, 4);
        let mx = matrix_from_bits(&m, "x", &bits);
        let triplets = hls::build_triplets(&m, Pairing::ByIndex);
        let tally = hls::tally_patterns(&triplets, &mx).unwrap();
        prop_assert_eq!(tally.counts.iter().sum::<u64>(), triplets.len() as u64);
        prop_assert_eq!(tally.total, triplets.len() as u64);

        let mut shuffled = triplets.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = hls::hls_report(&triplets, &mx).unwrap();
        let b = hls::hls_report(&shuffled, &mx).unwrap();
        prop_assert_eq!(a.hls, b.hls);

        let mut renamed = mx.clone();
        renamed.model_id = "renamed".into();
        prop_assert_eq!(hls::hls_report(&triplets, &renamed).unwrap().hls, a.hls);

        let split = (seed % triplets.len() as u64) as usize;
        let left = hls::tally_patterns(&triplets[..split], &mx).unwrap_or_default();
        let right = hls::tally_patterns(&triplets[split..], &mx).unwrap();
        prop_assert_eq!(left.merge(&right), tally);
    }

    #[test]
    fn error_metric_identities(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..12)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let e = ErrorMetrics::between(&a, &b);
        prop_assert!((e.mse - e.rmse * e.rmse).abs() <= 1e-9 * (1.0 + e.mse));
        prop_assert!(e.mae <= e.rmse + 1e-12);
    }

    #[test]
    fn threshold_responders_are_perfectly_hierarchical(
        theta in -3.0f64..3.0,
        spread in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let m = grid(&class_names(2), 2, 5);
        let mut spec = ResponderSpec::threshold("t", theta, seed);
        spec.kind = ResponderKind::Threshold { spread };
        let pool = PoolSpec { seed, responders: vec![spec], manifest: None };
        let mats = simulate_matrices(&pool, &m).unwrap();
        let triplets = hls::build_triplets(&m, Pairing::ByIndex);
        prop_assert_eq!(hls::hls_report(&triplets, &mats["t"]).unwrap().hls, 100.0);
    }

    #[test]
    fn scores_stay_in_range(bits in prop::collection::vec(any::<bool>(), 1..30), k in 1u32..5, seed in any::<u64>()) {
        let m = grid(&class_names(2), 3, 4);
        let mx = matrix_from_bits(&m, "x", &bits);
        let r = evalkit::static_eval(&mx, &m, k, seed, 0).unwrap();
        for (&s, &a) in r.attribute_scores.values().zip(r.attribute_accuracies.values()) {
            prop_assert!((0.0..=100.0).contains(&s));
            prop_assert!((0.0..=100.0).contains(&a));
        }
        let all_correct = r.cells.iter().all(|c| c.correct == c.asked);
        prop_assert_eq!(r.global_score == 100.0, all_correct);
        let none_correct = r.cells.iter().all(|c| c.correct.total() == 0);
        prop_assert_eq!(r.global_score == 0.0, none_correct);
    }

    #[test]
    fn correlations_are_bounded(xs in prop::collection::vec((0u8..4, -5.0f64..5.0), 3..15)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xs.into_iter().map(|(a, b)| (a as f64, b)).unzip();
        for v in [stats::pearson(&x, &y), stats::spearman(&x, &y), stats::kendall_tau_b(&x, &y)].into_iter().flatten() {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn bt_fit_ignores_comparison_order_and_sums_to_zero(seed in any::<u64>(), wins in prop::collection::vec((0usize..4, 0usize..4), 4..30)) {
        let names = ["w", "x", "y", "z"];
        let mut cs: Vec<Comparison> = wins
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| Comparison { left: names[a].into(), right: names[b].into(), winner: Winner::Left, rater: String::new() })
            .collect();
        prop_assume!(!cs.is_empty());
        let a = btm::fit(&cs, FitOptions::default()).unwrap();
        cs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = btm::fit(&cs, FitOptions::default()).unwrap();
        prop_assert!(a.converged);
        prop_assert!(a.lambda.values().sum::<f64>().abs() < 1e-9);
        for (k, v) in &a.lambda {
            prop_assert!((v - b.lambda[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn static_subsampling_tracks_full_accuracy_on_average() {
    let m = grid(&class_names(10), 5, 12);
    let pool = PoolSpec::irt_spread(1, 0.3, 0.3, 17);
    let mx = &simulate_matrices(&pool, &m).unwrap()["m00"];
    let full = evalkit::full_eval(mx, &m).unwrap().global_accuracy;
    let runs = 100;
    let mean: f64 = (0..runs)
        .map(|s| {
            evalkit::static_eval(mx, &m, 3, s, 0)
                .unwrap()
                .global_accuracy
        })
        .sum::<f64>()
        / runs as f64;
    assert!((mean - full).abs() < 0.5, "{mean} vs {full}");
}

#[test]
fn difficulty_table_columns_fall_for_irt_pool() {
    let m = grid(&class_names(20), 4, 12);
    let pool = PoolSpec::irt_spread(3, -1.0, 1.5, 2);
    let mats = simulate_matrices(&pool, &m).unwrap();
    let input: Vec<_> = mats
        .iter()
        .map(|(id, mx)| (id.clone(), evalkit::difficulty_breakdown(mx, &m).unwrap()))
        .collect();
    let tables = evalkit::difficulty_tables(&input).unwrap();
    let avg: BTreeMap<Difficulty, Vec<f64>> = tables
        .iter()
        .map(|(d, t)| (*d, t.average.values.clone()))
        .collect();
    let (easy, medium, hard) = (
        &avg[&Difficulty::Easy],
        &avg[&Difficulty::Medium],
        &avg[&Difficulty::Hard],
    );
    for ((e, m), h) in easy.iter().zip(medium).zip(hard) {
        assert!(e >= m && m >= h, "{e} {m} {h}");
    }
}

#[test]
fn empty_tally_default_is_mergeable() {
    let t = PatternTally::default();
    assert_eq!(t.merge(&PatternTally::default()).total, 0);
}
