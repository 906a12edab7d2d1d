use flocksim::model::*;
use proptest::prelude::*;

#[test]
fn status_examples() {
    assert_eq!(status_of(0, 3, 5).unwrap(), PreservationStatus::NoneMade);
    assert_eq!(status_of(0, 3, 5).unwrap().color(), "red");
    assert_eq!(status_of(3, 3, 5).unwrap(), PreservationStatus::AtMin);
    assert_eq!(status_of(3, 3, 5).unwrap().color(), "green");
    assert_eq!(status_of(5, 3, 5).unwrap(), PreservationStatus::AtMax);
    assert_eq!(status_of(5, 3, 5).unwrap().color(), "blue");
    assert_eq!(status_of(1, 1, 1).unwrap(), PreservationStatus::AtMax);
    assert_eq!(status_of(2, 3, 5).unwrap().color(), "yellow");
}

#[test]
fn status_rejects_copy_count_above_r_max() {
    assert!(status_of(6, 3, 5).is_err());
    assert!(status_of(0, 4, 3).is_err());
}

#[test]
fn status_values_are_one_to_four() {
    let values: Vec<u32> = PreservationStatus::ALL.iter().map(|s| s.value()).collect();
    assert_eq!(values, vec![1, 2, 3, 4]);
}

#[test]
fn host_band_examples() {
    assert_eq!(host_band(0, 5, false, false), HostBand::Grey);
    assert_eq!(host_band(0, 5, true, false), HostBand::White);
    assert_eq!(host_band(5, 5, true, true), HostBand::Blue);
    assert_eq!(host_band(1, 5, true, true), HostBand::Red);
}

#[test]
fn host_band_thresholds_are_left_closed() {
    // capacity 4: used 1 is exactly 25%, 2 is 50%, 3 is 75%
    assert_eq!(host_band(1, 4, true, true), HostBand::Yellow);
    assert_eq!(host_band(2, 4, true, true), HostBand::Green);
    assert_eq!(host_band(3, 4, true, true), HostBand::Blue);
    assert_eq!(host_band(1, 8, true, true), HostBand::Red);
}

#[test]
fn classify_examples() {
    let defaults = SimConfig::default();
    assert_eq!(classify_condition(&defaults), NamedCondition::BoundaryHigh);
    let feast = SimConfig { host_capacity: 1000, ..SimConfig::default() };
    assert_eq!(classify_condition(&feast), NamedCondition::Feast);
    let famine = SimConfig { n_max: 10, r_min: 3, h_max: 4, host_capacity: 5, ..SimConfig::default() };
    assert_eq!(classify_condition(&famine), NamedCondition::Famine);
}

#[test]
fn classify_boundaries() {
    let base = SimConfig { n_max: 10, r_min: 3, r_max: 5, h_max: 1, ..SimConfig::default() };
    let at = |c: u32| classify_condition(&SimConfig { host_capacity: c, ..base.clone() });
    assert_eq!(at(29), NamedCondition::Famine);
    assert_eq!(at(30), NamedCondition::BoundaryLow);
    assert_eq!(at(31), NamedCondition::Straddle);
    assert_eq!(at(49), NamedCondition::Straddle);
    assert_eq!(at(50), NamedCondition::BoundaryHigh);
    assert_eq!(at(100), NamedCondition::BoundaryHigh);
    assert_eq!(at(101), NamedCondition::Feast);
}

#[test]
fn conditions_are_totally_ordered() {
    use NamedCondition::*;
    assert!(Famine < BoundaryLow && BoundaryLow < Straddle && Straddle < BoundaryHigh && BoundaryHigh < Feast);
}

#[test]
fn default_config_matches_documented_run() {
    let c = SimConfig::default();
    assert_eq!((c.n_max, c.h_max, c.r_min, c.r_max, c.host_capacity), (500, 1000, 3, 5, 5));
    assert_eq!(c.policy, PolicyKind::LeastAggressive);
    assert_eq!(c.bin_size, 100);
    assert!(c.validate().is_ok());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SimConfig { r_min: 6, r_max: 5, ..SimConfig::default() },
        SimConfig { n_max: 0, ..SimConfig::default() },
        SimConfig { h_max: 0, ..SimConfig::default() },
        SimConfig { bin_size: 0, ..SimConfig::default() },
        SimConfig { link_probability: 0.0, ..SimConfig::default() },
        SimConfig { link_probability: 1.5, ..SimConfig::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
}

#[test]
fn family_copy_index_reuses_gaps() {
    let mut f = Family::new(DoId(1), HostId(1), 3, 5);
    assert_eq!(f.next_copy_index(), 1);
    f.copies.push(ReplicaRef { do_id: DoId(1), copy_index: 1, host_id: HostId(2) });
    f.copies.push(ReplicaRef { do_id: DoId(1), copy_index: 3, host_id: HostId(3) });
    assert_eq!(f.next_copy_index(), 2);
    assert!(f.occupies(HostId(1)) && f.occupies(HostId(3)) && !f.occupies(HostId(4)));
}

#[test]
fn policy_names_round_trip() {
    for p in PolicyKind::ALL {
        assert_eq!(p.short_name().parse::<PolicyKind>().unwrap(), p);
    }
    assert!("greedy".parse::<PolicyKind>().is_err());
}

proptest! {
    #[test]
    fn status_is_monotone(r_min in 0u32..10, extra in 0u32..10) {
        let r_max = r_min + extra;
        let mut prev = status_of(0, r_min, r_max).unwrap();
        for c in 1..=r_max {
            let s = status_of(c, r_min, r_max).unwrap();
            prop_assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn host_band_monotone_in_used(cap in 1u32..=10) {
        let mut prev = host_band(0, cap, true, false).rank();
        for used in 1..=cap {
            let b = host_band(used, cap, true, true).rank();
            prop_assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn classification_partitions_space(n in 1u32..200, r_min in 0u32..6, extra in 0u32..6, h in 1u32..300, cap in 0u32..30) {
        let c = SimConfig { n_max: n, r_min, r_max: r_min + extra, h_max: h, host_capacity: cap, ..SimConfig::default() };
        let cond = classify_condition(&c);
        let (d_min, d_max, total) = ((n * r_min) as u64, (n * (r_min + extra)) as u64, (h * cap) as u64);
        let hits = [
            total < d_min,
            total == d_min,
            d_min < total && total < d_max,
            d_max <= total && total <= 2 * d_max && total != d_min,
            total > 2 * d_max && total != d_min,
        ];
        let expected = [NamedCondition::Famine, NamedCondition::BoundaryLow, NamedCondition::Straddle, NamedCondition::BoundaryHigh, NamedCondition::Feast];
        let idx = expected.iter().position(|e| *e == cond).unwrap();
        prop_assert!(hits[idx]);
    }
}
