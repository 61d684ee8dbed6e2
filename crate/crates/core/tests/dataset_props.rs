mod common;

use deepmobility_core::dataset::{
    fit_scaler, make_windows, normalize, oracle_label, read_csv_from, split, validation_count, write_csv_to,
    KpiRecord, OracleConfig, FEATURE_DIM,
};
use deepmobility_core::network::Severity;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn records(seed: u64, n: usize) -> Vec<KpiRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| common::random_record(&mut rng)).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6
}

fn same(a: &KpiRecord, b: &KpiRecord) -> bool {
    let (s, r) = (&a.serving, &b.serving);
    close(a.t, b.t)
        && (a.ue_id, a.day_of_week, a.time_of_day_s, a.device_type, a.qci, a.label)
            == (b.ue_id, b.day_of_week, b.time_of_day_s, b.device_type, b.qci, b.label)
        && (s.cell_id, s.tech, s.band_code, s.earfcn, s.cqi, s.alarm, s.ticket)
            == (r.cell_id, r.tech, r.band_code, r.earfcn, r.cqi, r.alarm, r.ticket)
        && [s.rsrp_dbm, s.rsrq_db, s.rssi_dbm, s.sinr_db, s.load_frac, s.backhaul_mbps, s.cfr, s.cdr, s.hof_rate, s.rlf_rate]
            .iter()
            .zip([r.rsrp_dbm, r.rsrq_db, r.rssi_dbm, r.sinr_db, r.load_frac, r.backhaul_mbps, r.cfr, r.cdr, r.hof_rate, r.rlf_rate])
            .all(|(x, y)| close(*x, y))
        && a.neighbors.iter().zip(&b.neighbors).all(|(x, y)| {
            (x.cell_id, x.alarm, x.ticket) == (y.cell_id, y.alarm, y.ticket)
                && close(x.rsrp_dbm, y.rsrp_dbm)
                && close(x.rsrq_db, y.rsrq_db)
                && close(x.load_frac, y.load_frac)
                && close(x.backhaul_mbps, y.backhaul_mbps)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 0usize..200) {
        let rows = records(seed, n);
        let mut buf = Vec::new();
        write_csv_to(&rows, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert!(same(a, b), "{a:?}\n!=\n{b:?}");
        }
    }

    #[test]
    fn oracle_labels_are_valid_and_skip_padding(seed in any::<u64>()) {
        let cfg = OracleConfig::default();
        for r in records(seed, 500) {
            let label = oracle_label(&r, &cfg) as usize;
            prop_assert!(label < 5);
            if label > 0 {
                prop_assert!(!r.neighbors[label - 1].is_padding());
            }
        }
    }

    #[test]
    fn normalized_training_rows_stay_in_unit_box(seed in any::<u64>()) {
        let rows = records(seed, 300);
        let scaler = fit_scaler(&rows).unwrap();
        for r in rows.iter().chain(&records(seed ^ 1, 50)) {
            let x = normalize(r, &scaler).unwrap();
            prop_assert_eq!(x.len(), FEATURE_DIM);
            prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn split_is_an_exact_partition(n in 2usize..2000, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let (train, val) = split(&items, frac, seed).unwrap();
        let want = ((frac * n as f64).round() as usize).clamp(1, n - 1);
        prop_assert_eq!(val.len(), want);
        prop_assert_eq!(validation_count(n, frac), want);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, items);
        prop_assert_eq!(split(&(0..n).collect::<Vec<_>>(), frac, seed).unwrap(), (train, val));
    }
}

#[test]
fn serving_with_alarm_loses_to_any_clean_neighbor() {
    let cfg = OracleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut r = common::random_record(&mut rng);
    r.serving.alarm = Severity::ServiceImpacting;
    r.serving.ticket = Severity::None;
    for n in r.neighbors.iter_mut() {
        n.cell_id = None;
    }
    r.neighbors[2].cell_id = Some(77);
    r.neighbors[2].alarm = Severity::None;
    r.neighbors[2].ticket = Severity::None;
    assert_eq!(oracle_label(&r, &cfg), 3);
}

#[test]
fn all_padding_means_stay() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut r = common::random_record(&mut rng);
    r.serving.alarm = Severity::ServiceImpacting;
    r.serving.ticket = Severity::ServiceImpacting;
    r.neighbors = [deepmobility_core::dataset::NeighborBlock::PADDING; 4];
    assert_eq!(oracle_label(&r, &OracleConfig::default()), 0);
}

#[test]
fn windows_never_mix_ues_and_drop_short_tails() {
    let mut rows = records(5, 0);
    for ue in 0..3u32 {
        for k in 0..(10 * (ue as usize + 1) + 3) {
            let mut r = records(ue as u64 * 1000 + k as u64, 1).remove(0);
            r.ue_id = ue;
            r.t = k as f64 * 0.12;
            rows.push(r);
        }
    }
    // Shuffle the row order; windows follow time, not file order.
    rows.reverse();
    let windows = make_windows(&rows, 10);
    assert_eq!(windows.len(), 1 + 2 + 3);
    for w in &windows {
        assert_eq!(w.len(), 10);
        assert!(w.iter().all(|r| r.ue_id == w[0].ue_id));
        assert!(w.windows(2).all(|p| p[0].t < p[1].t));
    }
}
