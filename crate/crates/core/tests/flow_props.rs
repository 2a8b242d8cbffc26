use ids_core::flow::{
    balance_sample, canonicalize_label, impute_missing, known_detailed_labels, parse_conn_log_str,
    write_conn_log, Dataset, Proto, RawFlowRecord, Task,
};
use proptest::option;
use proptest::prelude::*;

fn ip() -> impl Strategy<Value = String> {
    (any::<u8>(), any::<u8>(), any::<u8>(), 1u8..255).prop_map(|(a, b, c, d)| format!("{a}.{b}.{c}.{d}"))
}

fn record(labeled: bool) -> impl Strategy<Value = RawFlowRecord> {
    let label = prop_oneof![
        Just(("Benign".to_string(), "-".to_string())),
        prop::sample::select(known_detailed_labels()).prop_map(|d| ("Malicious".to_string(), d.to_string())),
    ];
    (
        (0.0f64..2e9, "[A-Za-z0-9]{4,18}", ip(), any::<u16>(), ip(), any::<u16>()),
        (
            prop::sample::select(vec![Proto::Tcp, Proto::Udp, Proto::Icmp]),
            option::of(prop::sample::select(vec!["dns", "http", "ssh", "irc"])),
            option::of(0.0f64..1e5),
            option::of(any::<u32>()),
            option::of(any::<u32>()),
            prop::sample::select(vec!["S0", "SF", "REJ", "OTH", "RSTR"]),
        ),
        (option::of(any::<bool>()), option::of(any::<bool>()), option::of(0u64..1000), option::of("[ShADadFfRr]{1,8}")),
        (option::of(0u64..1_000_000), option::of(0u64..1_000_000), option::of(0u64..1_000_000), option::of(0u64..1_000_000)),
        label,
    )
        .prop_map(move |(a, b, c, d, (raw, detailed))| RawFlowRecord {
            ts: a.0,
            uid: a.1,
            orig_h: a.2,
            orig_p: a.3,
            resp_h: a.4,
            resp_p: a.5,
            proto: b.0,
            service: b.1.map(str::to_string),
            duration: b.2,
            orig_bytes: b.3.map(u64::from),
            resp_bytes: b.4.map(u64::from),
            conn_state: b.5.to_string(),
            local_orig: c.0,
            local_resp: c.1,
            missed_bytes: c.2,
            history: c.3,
            orig_pkts: d.0,
            orig_ip_bytes: d.1,
            resp_pkts: d.2,
            resp_ip_bytes: d.3,
            tunnel_parents: None,
            raw_label: labeled.then_some(raw),
            raw_detailed_label: labeled.then_some(detailed),
        })
}

proptest! {
    #[test]
    fn write_then_parse_round_trips(recs in prop::collection::vec(record(true), 1..30)) {
        let parsed = parse_conn_log_str(&write_conn_log(&recs, true)).unwrap();
        prop_assert_eq!(parsed, recs);
    }

    #[test]
    fn unlabeled_logs_round_trip(recs in prop::collection::vec(record(false), 1..10)) {
        let parsed = parse_conn_log_str(&write_conn_log(&recs, false)).unwrap();
        prop_assert_eq!(parsed, recs);
    }

    #[test]
    fn imputation_leaves_nothing_missing(recs in prop::collection::vec(record(true), 1..30)) {
        for r in recs {
            let before = r.clone();
            let after = impute_missing(r);
            prop_assert!(after.is_complete());
            // present values survive
            prop_assert!(before.orig_bytes.is_none() || before.orig_bytes == after.orig_bytes);
            prop_assert!(before.service.is_none() || before.service == after.service);
        }
    }

    #[test]
    fn balance_sample_bounds(recs in prop::collection::vec(record(true), 1..80), k in 1usize..20, seed in any::<u64>()) {
        let ds = Dataset::from_records(recs).unwrap();
        let classes = ds.class_indices(Task::Binary);
        let present = [0, 1].iter().filter(|&&c| classes.contains(&Some(c))).count();
        match balance_sample(&ds, Task::Binary, k, seed) {
            Ok(a) => {
                prop_assert_eq!(&a, &balance_sample(&ds, Task::Binary, k, seed).unwrap());
                prop_assert!(a.len() <= present * k);
                for c in 0..2 {
                    prop_assert!(a.class_indices(Task::Binary).iter().filter(|v| **v == Some(c)).count() <= k);
                }
            }
            Err(_) => prop_assert!(present < 2),
        }
    }

    #[test]
    fn every_known_label_maps_to_one_class(d in prop::sample::select(known_detailed_labels()), upper in any::<bool>()) {
        let d = if upper { d.to_ascii_uppercase() } else { d.to_string() };
        let l = canonicalize_label("Malicious", &d).unwrap();
        prop_assert!(Task::Binary.class_of(&l) == Some(1));
        // either one of the seven classes or the out-of-vocabulary sentinel
        prop_assert!(Task::Multiclass.class_of(&l).is_none_or(|c| (1..7).contains(&c)));
    }
}
