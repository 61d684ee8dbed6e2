#![allow(dead_code)]

use deepmobility_core::dataset::{KpiRecord, NeighborBlock, ServingBlock, NEIGHBOR_SLOTS};
use deepmobility_core::mobility::DeviceType;
use deepmobility_core::network::{Severity, Tech};
use rand::Rng;

pub fn severity<R: Rng>(rng: &mut R) -> Severity {
    Severity::from_code(rng.random_range(0..3)).unwrap()
}

/// A random but schema-valid record; some neighbor slots are padded and the
/// label, when present, points at the serving cell or a real neighbor.
pub fn random_record<R: Rng>(rng: &mut R) -> KpiRecord {
    let tech = [Tech::Bts3g, Tech::Enodeb4g, Tech::Gnodeb5g][rng.random_range(0..3)];
    let device = [DeviceType::Phone5g, DeviceType::Phone4g, DeviceType::IotStationary][rng.random_range(0..3)];
    let n_real = rng.random_range(0..=NEIGHBOR_SLOTS);
    let mut neighbors = [NeighborBlock::PADDING; NEIGHBOR_SLOTS];
    for (i, slot) in neighbors.iter_mut().enumerate().take(n_real) {
        *slot = NeighborBlock {
            cell_id: Some(100 + i as u32 + rng.random_range(0..50) * 10),
            rsrp_dbm: rng.random_range(-156.0..=-31.0),
            rsrq_db: rng.random_range(-34.0..=3.0),
            load_frac: rng.random_range(0.0..=1.0),
            alarm: severity(rng),
            ticket: severity(rng),
            backhaul_mbps: rng.random_range(0.0..20_000.0),
        };
    }
    let label = if rng.random_bool(0.2) { None } else { Some(rng.random_range(0..=n_real) as u8) };
    KpiRecord {
        t: rng.random_range(0.0..1.0e5),
        ue_id: rng.random_range(0..1000),
        day_of_week: rng.random_range(0..=6),
        time_of_day_s: rng.random_range(0..86_400),
        device_type: device,
        qci: rng.random_range(1..=9),
        serving: ServingBlock {
            cell_id: rng.random_range(1..100),
            tech,
            band_code: [2, 12, 66, 41, 71, 78][rng.random_range(0..6)],
            earfcn: rng.random_range(0..700_000),
            rsrp_dbm: rng.random_range(-156.0..=-31.0),
            rsrq_db: rng.random_range(-34.0..=3.0),
            rssi_dbm: rng.random_range(-120.0..-20.0),
            sinr_db: rng.random_range(-20.0..40.0),
            cqi: rng.random_range(0..=15),
            load_frac: rng.random_range(0.0..=1.0),
            alarm: severity(rng),
            ticket: severity(rng),
            backhaul_mbps: rng.random_range(0.0..20_000.0),
            cfr: rng.random_range(0.0..=1.0),
            cdr: rng.random_range(0.0..=1.0),
            hof_rate: rng.random_range(0.0..=1.0),
            rlf_rate: rng.random_range(0.0..=1.0),
        },
        neighbors,
        label,
    }
}
