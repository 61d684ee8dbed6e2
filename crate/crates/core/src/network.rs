//! Cell topology, radio propagation, measurement synthesis and the
//! time-varying network-side state (load, EMS alarms, maintenance tickets,
//! smoothed KPI rates).
//!
//! Propagation is log-distance path loss with exponentially correlated
//! log-normal shadowing (Gudmundson); per-tick Rayleigh fading is optional.
//! RSRP is the per-resource-element power, RSSI the total power over the
//! measurement bandwidth and RSRQ = N·RSRP/RSSI in the linear domain.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::units::{db_to_linear, linear_to_db};
use crate::{Error, Result};

pub type CellId = u32;

pub const RSRP_MIN_DBM: f64 = -156.0;
pub const RSRP_MAX_DBM: f64 = -31.0;
pub const RSRQ_MIN_DB: f64 = -34.0;
pub const RSRQ_MAX_DB: f64 = 3.0;
pub const CQI_MAX: u8 = 15;

/// Radio access technology of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tech {
    #[serde(rename = "BTS_3G")]
    Bts3g,
    #[serde(rename = "ENODEB_4G")]
    Enodeb4g,
    #[serde(rename = "GNODEB_5G")]
    Gnodeb5g,
}

impl Tech {
    pub const ALL: [Tech; 3] = [Tech::Bts3g, Tech::Enodeb4g, Tech::Gnodeb5g];

    pub fn index(self) -> usize {
        match self {
            Tech::Bts3g => 0,
            Tech::Enodeb4g => 1,
            Tech::Gnodeb5g => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Tech::Bts3g => "BTS_3G",
            Tech::Enodeb4g => "ENODEB_4G",
            Tech::Gnodeb5g => "GNODEB_5G",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Tech::ALL.into_iter().find(|t| t.label() == s)
    }
}

/// Operating band label; `code()` is the 3GPP band number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    B2,
    B4,
    B12,
    B66,
    #[serde(rename = "n41")]
    N41,
    #[serde(rename = "n71")]
    N71,
    #[serde(rename = "n77")]
    N77,
    #[serde(rename = "n78")]
    N78,
    #[serde(rename = "n260")]
    N260,
}

impl Band {
    pub fn code(self) -> u16 {
        match self {
            Band::B2 => 2,
            Band::B4 => 4,
            Band::B12 => 12,
            Band::B66 => 66,
            Band::N41 => 41,
            Band::N71 => 71,
            Band::N77 => 77,
            Band::N78 => 78,
            Band::N260 => 260,
        }
    }
}

/// Severity of an EMS alarm or a maintenance ticket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[default]
    None,
    Allowed,
    ServiceImpacting,
}

impl Severity {
    /// 0 = none, 1 = allowed, 2 = service impacting.
    pub fn code(self) -> u8 {
        match self {
            Severity::None => 0,
            Severity::Allowed => 1,
            Severity::ServiceImpacting => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Severity::None),
            1 => Some(Severity::Allowed),
            2 => Some(Severity::ServiceImpacting),
            _ => None,
        }
    }
}

/// A base station sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSite {
    pub cell_id: CellId,
    pub enb_id: u32,
    pub pci: u16,
    pub tac: u32,
    pub mcc: u16,
    pub mnc: u16,
    pub band: Band,
    pub earfcn: u32,
    pub tech: Tech,
    /// (x, y) in meters.
    pub position_m: (f64, f64),
    pub tx_power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub backhaul_mbps: f64,
    pub max_users: u32,
    /// Users attached outside the simulated UE population.
    #[serde(default)]
    pub background_users: u32,
    #[serde(default)]
    pub ca_enabled: bool,
}

impl CellSite {
    pub fn validate(&self) -> Result<()> {
        let id = self.cell_id;
        if self.pci > 503 {
            return Err(Error::config(format!("cell {id}: pci {} outside 0..=503", self.pci)));
        }
        if !(10.0..=50.0).contains(&self.tx_power_dbm) {
            return Err(Error::config(format!(
                "cell {id}: tx_power_dbm {} outside [10, 50]",
                self.tx_power_dbm
            )));
        }
        if !(self.bandwidth_mhz > 0.0) {
            return Err(Error::config(format!("cell {id}: bandwidth_mhz must be > 0")));
        }
        if self.max_users < 1 {
            return Err(Error::config(format!("cell {id}: max_users must be >= 1")));
        }
        if !(self.position_m.0.is_finite() && self.position_m.1.is_finite()) {
            return Err(Error::config(format!("cell {id}: position must be finite")));
        }
        if !(self.backhaul_mbps >= 0.0) {
            return Err(Error::config(format!("cell {id}: backhaul_mbps must be >= 0")));
        }
        Ok(())
    }

    pub fn distance_m(&self, pos: (f64, f64)) -> f64 {
        (self.position_m.0 - pos.0).hypot(self.position_m.1 - pos.1)
    }
}

/// Live network-side attributes of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkAttributes {
    pub connected_users: u32,
    pub alarm: Severity,
    pub ticket: Severity,
    /// Call failure rate.
    pub cfr: f64,
    /// Call drop rate.
    pub cdr: f64,
    pub hof_rate: f64,
    pub rlf_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub pl0_db: f64,
    pub path_loss_exp: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_corr_m: f64,
    /// Thermal noise plus noise figure over the measurement bandwidth.
    pub noise_dbm: f64,
    pub n_prb: u32,
    pub fast_fading: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            pl0_db: 38.0,
            path_loss_exp: 3.0,
            shadowing_sigma_db: 4.0,
            shadowing_corr_m: 50.0,
            noise_dbm: -97.0,
            n_prb: 50,
            fast_fading: false,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2.0..=5.0).contains(&self.path_loss_exp) {
            return Err(Error::config(format!(
                "path_loss_exp {} outside [2, 5]",
                self.path_loss_exp
            )));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("shadowing_sigma_db must be >= 0"));
        }
        if self.n_prb < 1 {
            return Err(Error::config("n_prb must be >= 1"));
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::config("noise_dbm must be finite"));
        }
        Ok(())
    }

    /// Power offset between wideband received power and per-RE RSRP.
    fn re_offset_db(&self) -> f64 {
        linear_to_db(12.0 * self.n_prb as f64)
    }
}

/// One UE-observed measurement of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub cell_id: CellId,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub rssi_dbm: f64,
    pub sinr_db: f64,
    pub cqi: u8,
}

/// Log-distance path loss; distances below 1 m are clamped to 1 m.
pub fn path_loss_db(distance_m: f64, cfg: &RadioConfig) -> f64 {
    let d = if distance_m.is_nan() { 1.0 } else { distance_m.max(1.0) };
    cfg.pl0_db + 10.0 * cfg.path_loss_exp * d.log10()
}

/// SINR thresholds for CQI 0..=15, evenly spread over [-6.7, 22.7] dB.
pub fn cqi_thresholds() -> [f64; 16] {
    let step = (22.7 - (-6.7)) / 15.0;
    std::array::from_fn(|k| -6.7 + step * k as f64)
}

/// Highest CQI whose threshold the SINR reaches; 0 below the first row.
pub fn cqi_from_sinr(sinr_db: f64) -> u8 {
    let table = cqi_thresholds();
    table.iter().rposition(|&th| sinr_db >= th).unwrap_or(0) as u8
}

/// Derives a sample from received wideband powers (all in dBm).
///
/// `serving_rx_dbm` is the wideband power of the measured cell and
/// `interference_rx_dbm` the co-channel powers of every other cell.
pub fn sample_from_powers(
    cell_id: CellId,
    serving_rx_dbm: f64,
    interference_rx_dbm: &[f64],
    cfg: &RadioConfig,
) -> MeasurementSample {
    let signal = db_to_linear(serving_rx_dbm);
    let interference: f64 = interference_rx_dbm.iter().map(|&p| db_to_linear(p)).sum();
    let noise = db_to_linear(cfg.noise_dbm);
    let rssi = signal + interference + noise;
    let rsrp_dbm = serving_rx_dbm - cfg.re_offset_db();
    let rsrq_db = linear_to_db(cfg.n_prb as f64 * db_to_linear(rsrp_dbm) / rssi);
    let sinr_db = linear_to_db(signal / (interference + noise));
    MeasurementSample {
        cell_id,
        rsrp_dbm: rsrp_dbm.clamp(RSRP_MIN_DBM, RSRP_MAX_DBM),
        rsrq_db: rsrq_db.clamp(RSRQ_MIN_DB, RSRQ_MAX_DB),
        rssi_dbm: linear_to_db(rssi),
        sinr_db,
        cqi: cqi_from_sinr(sinr_db),
    }
}

#[derive(Debug, Clone, Copy)]
struct ShadowCell {
    position: (f64, f64),
    value_db: f64,
}

/// Spatially correlated shadowing state of one UE towards every cell.
///
/// Moving by `d` meters updates each link as an AR(1) process with
/// correlation `exp(-d / shadowing_corr_m)`.
#[derive(Debug, Clone, Default)]
pub struct ShadowField {
    links: BTreeMap<CellId, ShadowCell>,
}

impl ShadowField {
    pub fn new() -> Self {
        Self::default()
    }

    /// Shadowing loss (dB) for the link to `cell` seen from `pos`.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        cell: CellId,
        pos: (f64, f64),
        cfg: &RadioConfig,
        rng: &mut R,
    ) -> f64 {
        let sigma = cfg.shadowing_sigma_db;
        let z: f64 = StandardNormal.sample(rng);
        match self.links.get_mut(&cell) {
            None => {
                let value_db = sigma * z;
                self.links.insert(cell, ShadowCell { position: pos, value_db });
                value_db
            }
            Some(link) => {
                let d = (link.position.0 - pos.0).hypot(link.position.1 - pos.1);
                let rho = if d == 0.0 {
                    1.0
                } else if cfg.shadowing_corr_m > 0.0 {
                    (-d / cfg.shadowing_corr_m).exp()
                } else {
                    0.0
                };
                link.value_db = rho * link.value_db + (1.0 - rho * rho).sqrt() * sigma * z;
                link.position = pos;
                link.value_db
            }
        }
    }
}

/// Wideband received power at `pos` from `cell`.
#[allow(clippy::too_many_arguments)]
fn received_power_dbm<R: Rng + ?Sized>(
    pos: (f64, f64),
    cell: &CellSite,
    tx_offset_db: f64,
    shadow: &mut ShadowField,
    cfg: &RadioConfig,
    rng: &mut R,
) -> f64 {
    let shadow_db = shadow.sample(cell.cell_id, pos, cfg, rng);
    let fading_db = if cfg.fast_fading {
        // Rayleigh: |h|^2 ~ Exp(1).
        let gain: f64 = Exp1.sample(rng);
        -linear_to_db(gain.max(1e-12))
    } else {
        0.0
    };
    cell.tx_power_dbm + tx_offset_db - path_loss_db(cell.distance_m(pos), cfg) - shadow_db - fading_db
}

/// Measures `cell` from `ue_pos`, with `interferers` as co-channel cells.
pub fn measure<R: Rng + ?Sized>(
    ue_pos: (f64, f64),
    cell: &CellSite,
    interferers: &[&CellSite],
    shadow: &mut ShadowField,
    cfg: &RadioConfig,
    rng: &mut R,
) -> MeasurementSample {
    let serving = received_power_dbm(ue_pos, cell, 0.0, shadow, cfg, rng);
    let interference: Vec<f64> = interferers
        .iter()
        .map(|c| received_power_dbm(ue_pos, c, 0.0, shadow, cfg, rng))
        .collect();
    sample_from_powers(cell.cell_id, serving, &interference, cfg)
}

/// Measures every cell from `ue_pos`; cells sharing an EARFCN interfere.
///
/// `tx_offsets_db[i]` is added to `cells[i].tx_power_dbm` (SON power changes).
/// Random draws happen once per link in cell order, so the stream does not
/// depend on anything but the position sequence.
pub fn measure_all<R: Rng + ?Sized>(
    ue_pos: (f64, f64),
    cells: &[CellSite],
    tx_offsets_db: &[f64],
    shadow: &mut ShadowField,
    cfg: &RadioConfig,
    rng: &mut R,
) -> Vec<MeasurementSample> {
    let rx: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let offset = tx_offsets_db.get(i).copied().unwrap_or(0.0);
            received_power_dbm(ue_pos, c, offset, shadow, cfg, rng)
        })
        .collect();
    let mut interference = Vec::with_capacity(cells.len());
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            interference.clear();
            interference.extend(
                cells
                    .iter()
                    .enumerate()
                    .filter(|&(j, o)| j != i && o.earfcn == c.earfcn)
                    .map(|(j, _)| rx[j]),
            );
            sample_from_powers(c.cell_id, rx[i], &interference, cfg)
        })
        .collect()
}

/// The `k` strongest non-serving cells by RSRP, descending; ties go to the
/// lower cell id.
pub fn top_neighbors(samples: &[MeasurementSample], serving_id: CellId, k: usize) -> Vec<CellId> {
    let mut others: Vec<&MeasurementSample> =
        samples.iter().filter(|s| s.cell_id != serving_id).collect();
    others.sort_by(|a, b| {
        b.rsrp_dbm
            .total_cmp(&a.rsrp_dbm)
            .then(a.cell_id.cmp(&b.cell_id))
    });
    others.into_iter().take(k).map(|s| s.cell_id).collect()
}

/// Half-open activity window `[start_s, end_s)`, optionally repeating every
/// `period_s` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub period_s: Option<f64>,
}

impl TimeWindow {
    pub fn contains(&self, t: f64) -> bool {
        if t < self.start_s {
            return false;
        }
        match self.period_s {
            Some(p) if p > 0.0 => (t - self.start_s).rem_euclid(p) < self.end_s - self.start_s,
            _ => t < self.end_s,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.end_s > self.start_s) {
            return Err(Error::config(format!(
                "window [{}, {}) is empty",
                self.start_s, self.end_s
            )));
        }
        if let Some(p) = self.period_s {
            if !(p >= self.end_s - self.start_s) {
                return Err(Error::config("period_s must cover the window length"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentKind {
    Alarm,
    Ticket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incident {
    pub cell_id: CellId,
    pub kind: IncidentKind,
    pub severity: Severity,
    #[serde(flatten)]
    pub window: TimeWindow,
}

/// Extra attached users during a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadChange {
    pub cell_id: CellId,
    pub extra_users: u32,
    #[serde(flatten)]
    pub window: TimeWindow,
}

/// Transmit power change during a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerChange {
    pub cell_id: CellId,
    pub delta_db: f64,
    #[serde(flatten)]
    pub window: TimeWindow,
}

/// Everything about the network that changes on a timetable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlarmSchedule {
    #[serde(default)]
    pub incidents: Vec<Incident>,
    #[serde(default)]
    pub loads: Vec<LoadChange>,
    #[serde(default)]
    pub power: Vec<PowerChange>,
}

impl AlarmSchedule {
    /// Rejects entries naming cells that do not exist.
    pub fn validate(&self, cells: &[CellSite]) -> Result<()> {
        let known = |id: CellId| cells.iter().any(|c| c.cell_id == id);
        let refs = self
            .incidents
            .iter()
            .map(|e| (e.cell_id, &e.window))
            .chain(self.loads.iter().map(|e| (e.cell_id, &e.window)))
            .chain(self.power.iter().map(|e| (e.cell_id, &e.window)));
        for (id, window) in refs {
            if !known(id) {
                return Err(Error::config(format!("schedule references unknown cell_id {id}")));
            }
            window.validate()?;
        }
        Ok(())
    }

    fn severity_at(&self, cell: CellId, kind: IncidentKind, t: f64) -> Severity {
        self.incidents
            .iter()
            .filter(|e| e.cell_id == cell && e.kind == kind && e.window.contains(t))
            .map(|e| e.severity)
            .max()
            .unwrap_or_default()
    }

    pub fn extra_users_at(&self, cell: CellId, t: f64) -> u32 {
        self.loads
            .iter()
            .filter(|e| e.cell_id == cell && e.window.contains(t))
            .map(|e| e.extra_users)
            .sum()
    }

    pub fn tx_offset_db_at(&self, cell: CellId, t: f64) -> f64 {
        self.power
            .iter()
            .filter(|e| e.cell_id == cell && e.window.contains(t))
            .map(|e| e.delta_db)
            .sum()
    }
}

/// Per-cell events observed during one tick; feed for the smoothed rates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellTickEvents {
    /// Simulated UEs currently attached.
    pub attached: u32,
    /// Some attached UE reported CQI 0 (no call could be set up).
    pub call_failure: bool,
    /// An attached UE's link was dropped (radio link failure).
    pub call_drop: bool,
    /// A handover into this cell failed.
    pub handover_failure: bool,
    /// An attached UE was out of sync (SINR below Qout) this tick.
    pub radio_link_failure: bool,
}

/// Smoothing factor for the per-tick exponentially weighted KPI rates.
pub const RATE_SMOOTHING: f64 = 0.05;

/// Network-side state of every cell, aligned with the topology order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub attrs: Vec<NetworkAttributes>,
    pub tx_offsets_db: Vec<f64>,
}

impl NetworkState {
    pub fn new(cells: &[CellSite]) -> Self {
        Self {
            attrs: vec![NetworkAttributes::default(); cells.len()],
            tx_offsets_db: vec![0.0; cells.len()],
        }
    }
}

fn smooth(rate: f64, event: bool) -> f64 {
    (1.0 - RATE_SMOOTHING) * rate + RATE_SMOOTHING * if event { 1.0 } else { 0.0 }
}

/// Advances the network-side state to time `t`.
///
/// Alarms, tickets, SON power offsets and scheduled extra load follow the
/// schedule; connected users combine attach bookkeeping with background and
/// scheduled load (capped at `max_users`); KPI rates are smoothed with
/// [`RATE_SMOOTHING`]. `events` may be empty, which counts as a quiet tick.
pub fn advance_network(
    state: &mut NetworkState,
    cells: &[CellSite],
    schedule: &AlarmSchedule,
    t: f64,
    events: &[CellTickEvents],
) {
    for (i, cell) in cells.iter().enumerate() {
        let ev = events.get(i).copied().unwrap_or_default();
        let a = &mut state.attrs[i];
        a.alarm = schedule.severity_at(cell.cell_id, IncidentKind::Alarm, t);
        a.ticket = schedule.severity_at(cell.cell_id, IncidentKind::Ticket, t);
        let users = ev.attached as u64
            + cell.background_users as u64
            + schedule.extra_users_at(cell.cell_id, t) as u64;
        a.connected_users = users.min(cell.max_users as u64) as u32;
        a.cfr = smooth(a.cfr, ev.call_failure);
        a.cdr = smooth(a.cdr, ev.call_drop);
        a.hof_rate = smooth(a.hof_rate, ev.handover_failure);
        a.rlf_rate = smooth(a.rlf_rate, ev.radio_link_failure);
        state.tx_offsets_db[i] = schedule.tx_offset_db_at(cell.cell_id, t);
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn cell(id: CellId, x: f64, y: f64) -> CellSite {
        CellSite {
            cell_id: id,
            enb_id: 100 + id,
            pci: (id * 3) as u16,
            tac: 7,
            mcc: 310,
            mnc: 260,
            band: Band::N78,
            earfcn: 632_628,
            tech: Tech::Gnodeb5g,
            position_m: (x, y),
            tx_power_dbm: 43.0,
            bandwidth_mhz: 20.0,
            backhaul_mbps: 1000.0,
            max_users: 100,
            background_users: 0,
            ca_enabled: false,
        }
    }

    fn quiet_radio() -> RadioConfig {
        RadioConfig {
            shadowing_sigma_db: 0.0,
            fast_fading: false,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn path_loss_examples() {
        let cfg = RadioConfig { pl0_db: 38.0, path_loss_exp: 3.5, ..RadioConfig::default() };
        assert_eq!(path_loss_db(1.0, &cfg), 38.0);
        assert!((path_loss_db(1000.0, &cfg) - 143.0).abs() < 1e-9);
        assert_eq!(path_loss_db(0.2, &cfg), 38.0);
        assert!(path_loss_db(10.0, &cfg) < path_loss_db(10.5, &cfg));
    }

    #[test]
    fn cqi_table_endpoints() {
        assert_eq!(cqi_from_sinr(-10.0), 0);
        assert_eq!(cqi_from_sinr(30.0), 15);
        assert_eq!(cqi_from_sinr(22.7), 15);
        assert_eq!(cqi_from_sinr(-6.7), 0);
        let t = cqi_thresholds();
        assert!((t[15] - 22.7).abs() < 1e-12);
    }

    #[test]
    fn single_cell_noise_30db_below() {
        let cfg = RadioConfig { noise_dbm: -100.0, n_prb: 50, ..quiet_radio() };
        let s = sample_from_powers(1, -70.0, &[], &cfg);
        // rssi = S + N with N = S/1000.
        let rssi = 10.0 * (1e-7f64 + 1e-10).log10();
        assert!((s.rssi_dbm - rssi).abs() < 1e-9);
        // N·RSRP/RSSI = (1/12)·(1/1.001) since RSRP is per resource element.
        let expected = 10.0 * (1.0 / (12.0 * 1.001f64)).log10();
        assert!((s.rsrq_db - expected).abs() < 1e-9, "{}", s.rsrq_db);
        assert!((s.sinr_db - 30.0).abs() < 1e-9);
    }

    #[test]
    fn two_equal_cells_without_noise() {
        let cfg = RadioConfig { noise_dbm: -400.0, ..quiet_radio() };
        let alone = sample_from_powers(1, -70.0, &[], &cfg);
        let pair = sample_from_powers(1, -70.0, &[-70.0], &cfg);
        assert!(pair.sinr_db.abs() < 1e-9);
        assert!((pair.rsrq_db - alone.rsrq_db - 10.0 * 0.5f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn measurement_clamps_to_reporting_ranges() {
        let cfg = quiet_radio();
        let far = sample_from_powers(1, -400.0, &[-60.0], &cfg);
        assert_eq!(far.rsrp_dbm, RSRP_MIN_DBM);
        assert_eq!(far.rsrq_db, RSRQ_MIN_DB);
        assert_eq!(far.cqi, 0);
        let near = sample_from_powers(1, 40.0, &[], &cfg);
        assert_eq!(near.rsrp_dbm, RSRP_MAX_DBM);
        assert!(near.rsrq_db <= RSRQ_MAX_DB);
    }

    #[test]
    fn measure_uses_interferers() {
        let cfg = quiet_radio();
        let a = cell(1, 0.0, 0.0);
        let b = cell(2, 200.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut shadow = ShadowField::new();
        let s = measure((100.0, 0.0), &a, &[&b], &mut shadow, &cfg, &mut rng);
        // Equidistant equal cells: interference dominates noise.
        assert!(s.sinr_db < 0.0 && s.sinr_db > -1.0);
    }

    #[test]
    fn other_carriers_do_not_interfere() {
        let cfg = quiet_radio();
        let a = cell(1, 0.0, 0.0);
        let mut b = cell(2, 200.0, 0.0);
        b.earfcn = 2_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = measure_all((100.0, 0.0), &[a, b], &[0.0, 0.0], &mut ShadowField::new(), &cfg, &mut rng);
        assert!(samples[0].sinr_db > 10.0);
    }

    #[test]
    fn top_neighbor_order_and_ties() {
        let mk = |id, rsrp| MeasurementSample { cell_id: id, rsrp_dbm: rsrp, rsrq_db: -10.0, rssi_dbm: -60.0, sinr_db: 5.0, cqi: 7 };
        let samples = vec![mk(1, -80.0), mk(2, -90.0), mk(3, -70.0), mk(4, -100.0), mk(5, -85.0), mk(6, -95.0)];
        assert_eq!(top_neighbors(&samples, 1, 4), vec![3, 5, 2, 6]);
        assert_eq!(top_neighbors(&samples[..2], 1, 4), vec![2]);
        let tied = vec![mk(1, -80.0), mk(9, -95.0), mk(4, -95.0)];
        assert_eq!(top_neighbors(&tied, 1, 4), vec![4, 9]);
    }

    fn schedule_one() -> AlarmSchedule {
        AlarmSchedule {
            incidents: vec![Incident {
                cell_id: 3,
                kind: IncidentKind::Alarm,
                severity: Severity::ServiceImpacting,
                window: TimeWindow { start_s: 100.0, end_s: 200.0, period_s: None },
            }],
            ..AlarmSchedule::default()
        }
    }

    #[test]
    fn alarm_windows_are_half_open() {
        let cells = vec![cell(1, 0.0, 0.0), cell(3, 10.0, 0.0)];
        let sched = schedule_one();
        let mut st = NetworkState::new(&cells);
        advance_network(&mut st, &cells, &sched, 150.0, &[]);
        assert_eq!(st.attrs[1].alarm, Severity::ServiceImpacting);
        assert_eq!(st.attrs[0].alarm, Severity::None);
        advance_network(&mut st, &cells, &sched, 200.0, &[]);
        assert_eq!(st.attrs[1].alarm, Severity::None);
        advance_network(&mut st, &cells, &sched, 100.0, &[]);
        assert_eq!(st.attrs[1].alarm, Severity::ServiceImpacting);
    }

    #[test]
    fn back_to_back_windows_end_before_start() {
        let w1 = TimeWindow { start_s: 0.0, end_s: 10.0, period_s: None };
        let w2 = TimeWindow { start_s: 10.0, end_s: 20.0, period_s: None };
        assert!(!w1.contains(10.0));
        assert!(w2.contains(10.0));
    }

    #[test]
    fn empty_schedule_never_alarms() {
        let cells = vec![cell(1, 0.0, 0.0), cell(2, 10.0, 0.0)];
        let mut st = NetworkState::new(&cells);
        for t in [0.0, 1.0, 1e6] {
            advance_network(&mut st, &cells, &AlarmSchedule::default(), t, &[]);
            assert!(st.attrs.iter().all(|a| a.alarm == Severity::None && a.ticket == Severity::None));
        }
    }

    #[test]
    fn unknown_cell_in_schedule_is_rejected() {
        let cells = vec![cell(1, 0.0, 0.0)];
        let err = schedule_one().validate(&cells).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn periodic_window() {
        let w = TimeWindow { start_s: 5.0, end_s: 7.0, period_s: Some(10.0) };
        assert!(!w.contains(4.9));
        assert!(w.contains(5.0));
        assert!(!w.contains(7.0));
        assert!(w.contains(16.5));
        assert!(!w.contains(18.0));
    }

    #[test]
    fn rates_smooth_and_users_cap() {
        let mut cells = vec![cell(1, 0.0, 0.0)];
        cells[0].max_users = 10;
        cells[0].background_users = 8;
        let mut st = NetworkState::new(&cells);
        let ev = CellTickEvents { attached: 5, handover_failure: true, ..Default::default() };
        advance_network(&mut st, &cells, &AlarmSchedule::default(), 0.0, &[ev]);
        assert_eq!(st.attrs[0].connected_users, 10);
        assert!((st.attrs[0].hof_rate - 0.05).abs() < 1e-15);
        advance_network(&mut st, &cells, &AlarmSchedule::default(), 0.1, &[CellTickEvents::default()]);
        assert!((st.attrs[0].hof_rate - 0.0475).abs() < 1e-15);
        assert_eq!(st.attrs[0].cdr, 0.0);
    }

    #[test]
    fn cell_validation() {
        let mut c = cell(1, 0.0, 0.0);
        assert!(c.validate().is_ok());
        c.pci = 504;
        assert!(c.validate().is_err());
        let mut c = cell(1, 0.0, 0.0);
        c.tx_power_dbm = 55.0;
        assert!(c.validate().is_err());
        let mut c = cell(1, 0.0, 0.0);
        c.max_users = 0;
        assert!(c.validate().is_err());
    }
}
