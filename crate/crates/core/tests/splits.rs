mod common;

use brixkit::data::brix_stats;
use brixkit::{build_named_split, build_split, Error, SplitName};

#[test]
fn split_sizes_match_published_layout() {
    let recs = common::published_layout();
    let expected = [
        (SplitName::SmJ, 112, 0),
        (SplitName::SmW, 112, 0),
        (SplitName::SsJ, 212, 92),
        (SplitName::SsW, 150, 92),
        (SplitName::SsA, 300, 92),
        (SplitName::MsJ, 352, 44),
        (SplitName::MsW, 440, 44),
    ];
    for (name, train, test) in expected {
        let s = build_named_split(&recs, name);
        assert_eq!((s.train.len(), s.test.len()), (train, test), "{name}");
    }
}

#[test]
fn splits_respect_devices_and_formats() {
    let recs = common::published_layout();
    let smj = build_named_split(&recs, SplitName::SmJ);
    assert!(smj
        .train
        .iter()
        .all(|r| r.is_phone() && r.image_format.as_str() == "jpg"));
    let ssa = build_named_split(&recs, SplitName::SsA);
    assert!(ssa.train.iter().any(|r| r.is_reflex()));
    assert!(ssa.train.iter().all(|r| !r.is_depth_camera()));
    let msj = build_named_split(&recs, SplitName::MsJ);
    assert_eq!(msj.test.iter().filter(|r| r.is_depth_camera()).count(), 22);
    assert!(msj.train.iter().all(|r| !r.is_reflex()));
}

#[test]
fn train_and_test_are_disjoint() {
    let recs = common::published_layout();
    for name in SplitName::ALL {
        let s = build_named_split(&recs, name);
        for t in &s.test {
            assert!(s.train.iter().all(|r| r.sample_id != t.sample_id));
        }
    }
}

#[test]
fn split_lookup_by_name() {
    let recs = common::published_layout();
    assert_eq!(build_split(&recs, "Sm_j").unwrap().train.len(), 112);
    assert_eq!(build_split(&recs, "ms_w").unwrap().train.len(), 440);
    assert!(matches!(build_split(&recs, "Zz_q"), Err(Error::UnknownSplitName(_))));
}

#[test]
fn stats_worked_example() {
    let s = brix_stats(&[15.0, 17.0, 19.0]).unwrap();
    assert_eq!(s.count, 3);
    assert!((s.mean - 17.0).abs() < 1e-12);
    assert!((s.std - 2.0).abs() < 1e-12);
    assert!((s.mad - 4.0 / 3.0).abs() < 1e-12);
}
