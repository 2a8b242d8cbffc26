use ids_core::features::{assemble, extract_all, fit_one_hot, CidrTable, FeatureSchema, OneHotVocabulary};
use ids_core::flow::{Dataset, Task};
use ids_core::pipeline::{prepare, synth_records, SynthSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn synth(seed: u64) -> Dataset {
    let spec = SynthSpec {
        classes: 7,
        rows_per_class: 12,
        seed,
        ..SynthSpec::default()
    };
    Dataset::from_records(synth_records(&spec).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaler_uses_training_rows_only(data_seed in 0u64..4, split_seed in any::<u64>()) {
        let ds = synth(data_seed);
        let cidr = CidrTable::default();
        let p = prepare(&ds, Task::Multiclass, [0.6, 0.25, 0.15], split_seed, &cidr, None).unwrap();
        let rows = ds.subset(&p.split.train);
        let feats = extract_all(rows.rows.iter().map(|r| &r.record), &cidr).unwrap();
        let (raw, _) = assemble(&feats, &fit_one_hot(&feats));
        prop_assert_eq!(p.preprocessing.scaler.columns.len(), raw.cols());
        for (j, range) in p.preprocessing.scaler.columns.iter().enumerate() {
            let col = raw.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(range.min.to_bits(), lo.to_bits());
            prop_assert_eq!(range.max.to_bits(), hi.to_bits());
        }
        // every non-constant training column spans [0, 1] exactly
        for j in 0..p.train.x.cols() {
            let col = p.train.x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let r = p.preprocessing.scaler.columns[j];
            if r.max > r.min {
                prop_assert_eq!((lo, hi), (0.0, 1.0));
            }
        }
    }

    #[test]
    fn one_hot_blocks_sum_to_one_or_zero(
        rows in prop::collection::vec(prop::collection::vec(0u8..5, 3), 1..30),
        probe in prop::collection::vec(0u8..8, 3),
    ) {
        let as_str = |r: &Vec<u8>| r.iter().map(|v| format!("v{v}")).collect::<Vec<_>>();
        let fitted: Vec<Vec<String>> = rows.iter().map(as_str).collect();
        let vocab = OneHotVocabulary::fit(&["a", "b", "c"], &fitted);
        let (enc, unseen) = vocab.encode(&as_str(&probe));
        let mut at = 0;
        for (f, feature) in vocab.features.iter().enumerate() {
            let block: f64 = enc[at..at + feature.categories.len()].iter().sum();
            let seen = feature.categories.contains(&format!("v{}", probe[f]));
            prop_assert_eq!(block, if seen { 1.0 } else { 0.0 });
            prop_assert_eq!(seen, !unseen.iter().any(|u| u.feature == feature.name));
            at += feature.categories.len();
        }
    }

    #[test]
    fn column_order_ignores_row_order(data_seed in 0u64..4, shuffle in any::<u64>()) {
        let ds = synth(data_seed);
        let cidr = CidrTable::default();
        let feats = extract_all(ds.rows.iter().map(|r| &r.record), &cidr).unwrap();
        let vocab = fit_one_hot(&feats);
        let mut perm: Vec<usize> = (0..feats.len()).collect();
        perm.shuffle(&mut ids_core::rng::seeded(shuffle));
        let shuffled: Vec<_> = perm.iter().map(|&i| feats[i].clone()).collect();
        let (a, _) = assemble(&feats, &vocab);
        let (b, _) = assemble(&shuffled, &vocab);
        prop_assert_eq!(b, a.select_rows(&perm));
        let schema = FeatureSchema::from_vocabulary(&vocab);
        prop_assert_eq!(schema.width(), a.cols());
    }
}
