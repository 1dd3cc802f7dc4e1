//! End-to-end behaviour of the public API on synthetic data.

use proptest::prelude::*;

use robust_pll_core::data::{sample_candidates, synthetic_blobs, PartialDataset};
use robust_pll_core::eval::{accuracy, attack_sweep, entropies, ood_report, pgd_attack, AttackConfig};
use robust_pll_core::pll::{train, LabelWeights, TrainConfig, UpdateRule};
use robust_pll_core::{DenseMatrix, Ensemble, Error};

fn small_config(rule: UpdateRule, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 15,
        batch_size: 64,
        hidden: vec![32],
        seed,
        rule,
        ..TrainConfig::default()
    }
}

/// Blobs rescaled into the unit box so the attack constraints apply.
fn unit_blobs(n: usize, seed: u64) -> PartialDataset {
    let raw = synthetic_blobs(n, 6, 4, 0.4, 2.5, seed).unwrap();
    let scaled = robust_pll_core::data::minmax_normalize(raw.features());
    raw.with_features(scaled).unwrap()
}

#[test]
fn ensemble_of_robust_models_learns_and_survives_a_sweep() {
    let data = unit_blobs(600, 11);
    let members = (0..3)
        .map(|m| {
            train(&data, &small_config(UpdateRule::SquaredError, m))
                .unwrap()
                .classifier
        })
        .collect();
    let ens = Ensemble::new(members).unwrap();
    let acc = accuracy(&ens, data.features(), data.true_labels().unwrap()).unwrap();
    assert!(acc > 0.85, "accuracy {acc}");

    let sweep = attack_sweep(&ens, &data, &[0.0, 0.05, 0.2]).unwrap();
    assert_eq!(sweep[0].accuracy, acc);
    assert!(sweep[2].accuracy <= sweep[0].accuracy);
}

#[test]
fn pgd_respects_both_constraints_for_every_head() {
    let data = unit_blobs(300, 12);
    let y = data.true_labels().unwrap();
    for rule in [UpdateRule::SquaredError, UpdateRule::CrossEntropy, UpdateRule::Proden] {
        let model = train(&data, &small_config(rule, 1)).unwrap().classifier;
        for eps in [0.0, 0.03, 0.3] {
            let adv = pgd_attack(&model, data.features(), y, &AttackConfig::new(eps)).unwrap();
            for (a, x) in adv.as_slice().iter().zip(data.features().as_slice()) {
                assert!((a - x).abs() <= eps + 1e-12 && (0.0..=1.0).contains(a));
            }
        }
    }
}

#[test]
fn the_class_centroid_looks_more_uncertain_than_the_data() {
    let data = unit_blobs(800, 13);
    let model = train(&data, &small_config(UpdateRule::SquaredError, 2))
        .unwrap()
        .classifier;
    let (n, d) = data.features().shape();
    let mut centroid = vec![0.0; d];
    for row in data.features().iter_rows() {
        centroid.iter_mut().zip(row).for_each(|(c, x)| *c += x / n as f64);
    }
    let ood = DenseMatrix::from_rows(&vec![centroid; 50]).unwrap();
    let r = ood_report(
        &entropies(&model, data.features()).unwrap(),
        &entropies(&model, &ood).unwrap(),
        0,
    )
    .unwrap();
    assert!(r.cdf_area > 0.0 && r.ks_stat > 0.0 && r.mmd > 0.0, "{r:?}");
}

#[test]
fn final_weights_are_valid_and_track_training_labels() {
    let data = synthetic_blobs(500, 5, 3, 0.5, 3.0, 14).unwrap();
    let out = train(&data, &small_config(UpdateRule::SquaredError, 4)).unwrap();
    out.weights.validate(&data).unwrap();
    let y = data.true_labels().unwrap();
    let hits = (0..data.len()).filter(|&i| out.weights.argmax(i) == y[i]).count();
    assert!(hits as f64 / data.len() as f64 > 0.9);
    assert_eq!(
        out.trace.last().unwrap().train_accuracy,
        Some(hits as f64 / data.len() as f64)
    );
}

#[test]
fn label_weights_from_vec_is_checked() {
    let data = PartialDataset::new(DenseMatrix::zeros(2, 1), vec![true, true, false, true], 2, None).unwrap();
    assert!(LabelWeights::from_vec(&data, vec![0.5, 0.5, 0.0, 1.0]).is_ok());
    assert!(LabelWeights::from_vec(&data, vec![0.5, 0.5, 1.0, 0.0]).is_err());
    assert!(LabelWeights::from_vec(&data, vec![0.6, 0.6, 0.0, 1.0]).is_err());
    assert!(matches!(
        LabelWeights::from_vec(&data, vec![1.0]),
        Err(Error::Shape { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_candidates_contain_the_label(
        k in 2usize..8,
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 8), 1..20),
        seed in any::<u64>(),
    ) {
        let n = rows.len();
        let mut probs = DenseMatrix::zeros(n, k);
        let mut labels = Vec::with_capacity(n);
        for (i, r) in rows.iter().enumerate() {
            let s: f64 = r[..k].iter().sum::<f64>() + 1e-9;
            for (j, v) in r[..k].iter().enumerate() {
                probs.set(i, j, v / s);
            }
            labels.push(i % k);
        }
        let data = sample_candidates(DenseMatrix::zeros(n, 1), &labels, &probs, seed).unwrap();
        for (i, &y) in labels.iter().enumerate() {
            let mask = data.candidate_mask(i);
            prop_assert!(mask[y]);
            // The most probable incorrect label always joins.
            let top = (0..k).filter(|&j| j != y).max_by(|&a, &b| probs.get(i, a).total_cmp(&probs.get(i, b))).unwrap();
            prop_assert!(mask[top] || probs.get(i, top) == 0.0);
        }
        let again = sample_candidates(DenseMatrix::zeros(n, 1), &labels, &probs, seed).unwrap();
        prop_assert_eq!(data.candidates(), again.candidates());
    }
}
