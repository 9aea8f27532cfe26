use std::collections::BTreeMap;

use proptest::prelude::*;
use serde_json::json;
use streetrisk_core::annotation::{write_annotations, AnnotationRecord};
use streetrisk_core::schema::AnnotationSchema;
use streetrisk_service::{AnnotatorAccount, CampaignConfig, Service, Submission};

const ANNOTATORS: [&str; 3] = ["r0", "r1", "r2"];

fn config(compact_every: usize) -> CampaignConfig {
    CampaignConfig {
        annotators: ANNOTATORS
            .iter()
            .map(|id| AnnotatorAccount {
                annotator_id: id.to_string(),
                display_name: String::new(),
                retained: true,
            })
            .collect(),
        common_size: 6,
        seed: 5,
        agreement_min_common: 1,
        agreement_feedback: true,
        compact_every,
    }
}

fn submission(annotator: &str, address: &str, age: u8, wealth: u8, step: usize) -> Submission {
    serde_json::from_value(json!({
        "address_id": address,
        "annotator_id": annotator,
        "timestamp": format!("2019-03-02T10:{:02}:{:02}Z", step / 60 % 60, step % 60),
        "values": {
            "neighbourhood": ["terraced_houses"],
            "density": 3,
            "sv_quality": "bad",
            "house_type": "terraced",
            "house_age": age,
            "house_condition": 1,
            "wealth": wealth,
        }
    }))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The final state is the last accepted record per (address, annotator),
    /// whatever the interleaving, and it survives a restart.
    #[test]
    fn final_state_is_last_record_per_key(
        ops in prop::collection::vec((0usize..3, 0usize..6, 1u8..=3, 1u8..=10), 1..60),
        compact_every in 0usize..5,
        restart_at in 0usize..60,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let schema = AnnotationSchema::standard();
        let addresses: Vec<String> = (0..12).map(|k| format!("A{k:02}")).collect();
        let cfg = config(compact_every);
        let mut svc = Service::open(dir.path(), schema.clone(), &addresses, &cfg, None).unwrap();
        let common = svc.campaign().common_set.clone();

        let mut expected: BTreeMap<(String, String), AnnotationRecord> = BTreeMap::new();
        let mut revisions: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (step, &(a, i, age, wealth)) in ops.iter().enumerate() {
            if step == restart_at {
                drop(svc);
                svc = Service::open(dir.path(), schema.clone(), &addresses, &cfg, None).unwrap();
            }
            let (ann, addr) = (ANNOTATORS[a], &common[i]);
            let sub = submission(ann, addr, age, wealth, step);
            let ack = svc.submit(sub.clone()).unwrap();
            let key = (ann.to_string(), addr.clone());
            let rev = revisions.entry(key.clone()).or_default();
            *rev += 1;
            prop_assert_eq!(ack.revision, *rev);
            expected.insert(key, AnnotationRecord {
                address_id: sub.address_id,
                annotator_id: sub.annotator_id,
                timestamp: sub.timestamp.unwrap(),
                values: sub.values,
            });
        }
        let want: Vec<AnnotationRecord> = expected.into_values().collect();
        let mut want_csv = Vec::new();
        write_annotations(&mut want_csv, &want, &schema).unwrap();

        prop_assert_eq!(svc.store().records(), want.clone());
        prop_assert_eq!(&svc.export_csv().unwrap(), &want_csv);
        drop(svc);
        let reopened = Service::open(dir.path(), schema.clone(), &addresses, &cfg, None).unwrap();
        prop_assert_eq!(&reopened.export_csv().unwrap(), &want_csv);
        let history: usize = ANNOTATORS.iter().map(|a| reopened.store().history(a).unwrap().len()).sum();
        prop_assert_eq!(history, ops.len());
    }
}
