//! Per-tick KPI records (UE measurement report + network-side attributes +
//! time/device context), the composite-utility oracle that labels them, the
//! min-max scaler, the leakage-free train/validation split and CSV I/O.
//!
//! # Feature layout
//!
//! [`normalize`] emits a fixed-order vector of [`FEATURE_DIM`] values in
//! `[0, 1]`. The first [`SEQ_DIM`] entries are the per-tick radio features
//! consumed by the recurrent core; the rest are the static features fed to
//! the dense head alongside the final hidden state. Names are listed by
//! [`feature_names`].
//!
//! # CSV schema (version 1)
//!
//! One row per record, columns exactly [`csv_columns`]. Floats carry six
//! decimals; padded neighbor slots use `cell_id = -1`; an unlabelled record
//! has an empty `label` cell.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mobility::{time_context, DeviceType, UeProfile};
use crate::network::{
    CellId, CellSite, MeasurementSample, NetworkAttributes, Severity, Tech, CQI_MAX, RSRP_MAX_DBM,
    RSRP_MIN_DBM, RSRQ_MIN_DB,
};
use crate::{Error, Result};

pub const NEIGHBOR_SLOTS: usize = 4;
pub const SCHEMA_VERSION: u32 = 1;
/// Output classes: stay plus one per neighbor slot.
pub const N_CLASSES: usize = NEIGHBOR_SLOTS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServingBlock {
    pub cell_id: CellId,
    pub tech: Tech,
    pub band_code: u16,
    pub earfcn: u32,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub rssi_dbm: f64,
    pub sinr_db: f64,
    pub cqi: u8,
    pub load_frac: f64,
    pub alarm: Severity,
    pub ticket: Severity,
    pub backhaul_mbps: f64,
    pub cfr: f64,
    pub cdr: f64,
    pub hof_rate: f64,
    pub rlf_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborBlock {
    /// `None` marks a padded slot.
    pub cell_id: Option<CellId>,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub load_frac: f64,
    pub alarm: Severity,
    pub ticket: Severity,
    pub backhaul_mbps: f64,
}

impl NeighborBlock {
    /// Worst corner of every reporting range, so padding is never attractive.
    pub const PADDING: NeighborBlock = NeighborBlock {
        cell_id: None,
        rsrp_dbm: RSRP_MIN_DBM,
        rsrq_db: RSRQ_MIN_DB,
        load_frac: 1.0,
        alarm: Severity::ServiceImpacting,
        ticket: Severity::ServiceImpacting,
        backhaul_mbps: 0.0,
    };

    pub fn is_padding(&self) -> bool {
        self.cell_id.is_none()
    }
}

/// One flattened dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub t: f64,
    pub ue_id: u32,
    pub day_of_week: u8,
    pub time_of_day_s: u32,
    pub device_type: DeviceType,
    pub qci: u8,
    pub serving: ServingBlock,
    pub neighbors: [NeighborBlock; NEIGHBOR_SLOTS],
    /// 0 = stay, i = hand over to neighbor slot i.
    pub label: Option<u8>,
}

/// A cell as seen in one measurement report.
#[derive(Debug, Clone, Copy)]
pub struct CellView<'a> {
    pub site: &'a CellSite,
    pub attrs: &'a NetworkAttributes,
    pub sample: &'a MeasurementSample,
}

impl CellView<'_> {
    fn load_frac(&self) -> f64 {
        (self.attrs.connected_users as f64 / self.site.max_users.max(1) as f64).clamp(0.0, 1.0)
    }
}

/// Builds an unlabelled record. `neighbors` must already be sorted by
/// descending RSRP; at most [`NEIGHBOR_SLOTS`] are used and the remaining
/// slots are padded.
pub fn assemble_record(
    ue: &UeProfile,
    t: f64,
    epoch_day: u8,
    serving: CellView<'_>,
    neighbors: &[CellView<'_>],
) -> KpiRecord {
    let (day_of_week, time_of_day_s) = time_context(t, epoch_day);
    let s = serving;
    let mut slots = [NeighborBlock::PADDING; NEIGHBOR_SLOTS];
    for (slot, n) in slots.iter_mut().zip(neighbors) {
        *slot = NeighborBlock {
            cell_id: Some(n.site.cell_id),
            rsrp_dbm: n.sample.rsrp_dbm,
            rsrq_db: n.sample.rsrq_db,
            load_frac: n.load_frac(),
            alarm: n.attrs.alarm,
            ticket: n.attrs.ticket,
            backhaul_mbps: n.site.backhaul_mbps,
        };
    }
    KpiRecord {
        t,
        ue_id: ue.ue_id,
        day_of_week,
        time_of_day_s,
        device_type: ue.device_type,
        qci: ue.qci,
        serving: ServingBlock {
            cell_id: s.site.cell_id,
            tech: s.site.tech,
            band_code: s.site.band.code(),
            earfcn: s.site.earfcn,
            rsrp_dbm: s.sample.rsrp_dbm,
            rsrq_db: s.sample.rsrq_db,
            rssi_dbm: s.sample.rssi_dbm,
            sinr_db: s.sample.sinr_db,
            cqi: s.sample.cqi,
            load_frac: s.load_frac(),
            alarm: s.attrs.alarm,
            ticket: s.attrs.ticket,
            backhaul_mbps: s.site.backhaul_mbps,
            cfr: s.attrs.cfr,
            cdr: s.attrs.cdr,
            hof_rate: s.attrs.hof_rate,
            rlf_rate: s.attrs.rlf_rate,
        },
        neighbors: slots,
        label: None,
    }
}

/// Weights of the composite-utility labeller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub w_rsrp: f64,
    pub w_load: f64,
    pub w_backhaul: f64,
    pub p_alarm: f64,
    pub p_ticket: f64,
    /// Serving-cell bonus, in dB of RSRP (normally the A3 handover margin).
    pub stickiness_db: f64,
    /// Backhaul capacity that maps to 1.0.
    pub backhaul_ref_mbps: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            w_rsrp: 1.0,
            w_load: 0.5,
            w_backhaul: 0.3,
            p_alarm: 10.0,
            p_ticket: 5.0,
            stickiness_db: 3.0,
            backhaul_ref_mbps: 10_000.0,
        }
    }
}

impl OracleConfig {
    fn norm_rsrp(v: f64) -> f64 {
        ((v - RSRP_MIN_DBM) / (RSRP_MAX_DBM - RSRP_MIN_DBM)).clamp(0.0, 1.0)
    }

    /// Stickiness bonus in normalized score units.
    pub fn stickiness(&self) -> f64 {
        self.w_rsrp * self.stickiness_db / (RSRP_MAX_DBM - RSRP_MIN_DBM)
    }

    fn utility(&self, rsrp: f64, load: f64, backhaul: f64, alarm: Severity, ticket: Severity) -> f64 {
        let bh = if self.backhaul_ref_mbps > 0.0 {
            (backhaul / self.backhaul_ref_mbps).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.w_rsrp * Self::norm_rsrp(rsrp) + self.w_load * (1.0 - load) + self.w_backhaul * bh
            - if alarm == Severity::ServiceImpacting { self.p_alarm } else { 0.0 }
            - if ticket == Severity::ServiceImpacting { self.p_ticket } else { 0.0 }
    }

    /// Candidate scores: index 0 is the serving cell, `i` neighbor slot `i`;
    /// padded slots are `None`.
    pub fn scores(&self, r: &KpiRecord) -> [Option<f64>; N_CLASSES] {
        let s = &r.serving;
        let mut out = [None; N_CLASSES];
        out[0] = Some(self.utility(s.rsrp_dbm, s.load_frac, s.backhaul_mbps, s.alarm, s.ticket) + self.stickiness());
        for (i, n) in r.neighbors.iter().enumerate() {
            if !n.is_padding() {
                out[i + 1] = Some(self.utility(n.rsrp_dbm, n.load_frac, n.backhaul_mbps, n.alarm, n.ticket));
            }
        }
        out
    }
}

/// Ground-truth decision for one record: argmax of the oracle scores,
/// ties resolved towards staying and then towards the lowest slot.
pub fn oracle_label(record: &KpiRecord, cfg: &OracleConfig) -> u8 {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, s) in cfg.scores(record).iter().enumerate() {
        if let Some(s) = *s {
            if s > best.1 {
                best = (i, s);
            }
        }
    }
    best.0 as u8
}

// ---------------------------------------------------------------------------
// Features and scaling
// ---------------------------------------------------------------------------

/// Per-tick radio features (recurrent input).
pub const SEQ_DIM: usize = 4 + 2 * NEIGHBOR_SLOTS;
const STATIC_NUMERIC: usize = 12 + 2 * NEIGHBOR_SLOTS;
const NUMERIC_DIM: usize = SEQ_DIM + STATIC_NUMERIC;
const ONE_HOT_DIM: usize = 3 * 4 + 6 * NEIGHBOR_SLOTS;
/// Static features (dense head input next to the final hidden state).
pub const STATIC_DIM: usize = STATIC_NUMERIC + ONE_HOT_DIM;
pub const FEATURE_DIM: usize = SEQ_DIM + STATIC_DIM;

fn numeric_features(r: &KpiRecord) -> [f64; NUMERIC_DIM] {
    let s = &r.serving;
    let mut v = [0.0; NUMERIC_DIM];
    let mut k = 0;
    let mut push = |x: f64| {
        v[k] = x;
        k += 1;
    };
    push(s.rsrp_dbm);
    push(s.rsrq_db);
    push(s.sinr_db);
    push(s.cqi as f64);
    for n in &r.neighbors {
        push(n.rsrp_dbm);
        push(n.rsrq_db);
    }
    push(r.day_of_week as f64);
    push(r.time_of_day_s as f64);
    push(r.qci as f64);
    push(s.band_code as f64);
    push(s.earfcn as f64);
    push(s.rssi_dbm);
    push(s.load_frac);
    push(s.backhaul_mbps);
    push(s.cfr);
    push(s.cdr);
    push(s.hof_rate);
    push(s.rlf_rate);
    for n in &r.neighbors {
        push(n.load_frac);
        push(n.backhaul_mbps);
    }
    v
}

fn one_hot(r: &KpiRecord, out: &mut Vec<f64>) {
    let mut hot = |idx: usize, n: usize| out.extend((0..n).map(|i| if i == idx { 1.0 } else { 0.0 }));
    hot(r.device_type.index(), 3);
    hot(r.serving.tech.index(), 3);
    hot(r.serving.alarm.code() as usize, 3);
    hot(r.serving.ticket.code() as usize, 3);
    for n in &r.neighbors {
        hot(n.alarm.code() as usize, 3);
        hot(n.ticket.code() as usize, 3);
    }
}

/// Feature names in [`normalize`] order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = ["s_rsrp_dbm", "s_rsrq_db", "s_sinr_db", "s_cqi"].map(String::from).into();
    for k in 1..=NEIGHBOR_SLOTS {
        names.push(format!("n{k}_rsrp_dbm"));
        names.push(format!("n{k}_rsrq_db"));
    }
    names.extend(
        [
            "day_of_week", "time_of_day_s", "qci", "s_band_code", "s_earfcn", "s_rssi_dbm", "s_load_frac",
            "s_backhaul_mbps", "s_cfr", "s_cdr", "s_hof_rate", "s_rlf_rate",
        ]
        .map(String::from),
    );
    for k in 1..=NEIGHBOR_SLOTS {
        names.push(format!("n{k}_load_frac"));
        names.push(format!("n{k}_backhaul_mbps"));
    }
    for d in DeviceType::ALL {
        names.push(format!("device_{}", d.label()));
    }
    for t in Tech::ALL {
        names.push(format!("s_tech_{}", t.label()));
    }
    for prefix in ["s_alarm", "s_ticket"] {
        names.extend((0..3).map(|c| format!("{prefix}_{c}")));
    }
    for k in 1..=NEIGHBOR_SLOTS {
        names.extend((0..3).map(|c| format!("n{k}_alarm_{c}")));
        names.extend((0..3).map(|c| format!("n{k}_ticket_{c}")));
    }
    names
}

/// Per-feature min-max bounds fitted on training rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn is_fitted(&self) -> bool {
        self.min.len() == NUMERIC_DIM && self.max.len() == NUMERIC_DIM
    }
}

pub fn fit_scaler<'a, I>(records: I) -> Result<Scaler>
where
    I: IntoIterator<Item = &'a KpiRecord>,
{
    let mut min = vec![f64::INFINITY; NUMERIC_DIM];
    let mut max = vec![f64::NEG_INFINITY; NUMERIC_DIM];
    let mut seen = false;
    for r in records {
        seen = true;
        for (i, v) in numeric_features(r).into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    if !seen {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(Scaler { min, max })
}

/// Maps a record to `[0, 1]^FEATURE_DIM`; values outside the fitted range
/// saturate and constant features map to 0.
pub fn normalize(record: &KpiRecord, scaler: &Scaler) -> Result<Vec<f64>> {
    if !scaler.is_fitted() {
        return Err(Error::data("scaler is not fitted"));
    }
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for (i, v) in numeric_features(record).into_iter().enumerate() {
        let (lo, hi) = (scaler.min[i], scaler.max[i]);
        out.push(if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 });
    }
    one_hot(record, &mut out);
    debug_assert_eq!(out.len(), FEATURE_DIM);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Windows and split
// ---------------------------------------------------------------------------

/// `len` consecutive records of one UE; the training target is the label of
/// the last record.
pub type Window = Vec<KpiRecord>;

/// Cuts each UE's time-ordered stream into non-overlapping windows of
/// exactly `len` records; a short tail is dropped. UEs are visited in
/// ascending id order.
pub fn make_windows(records: &[KpiRecord], len: usize) -> Vec<Window> {
    let len = len.max(1);
    let mut by_ue: BTreeMap<u32, Vec<&KpiRecord>> = BTreeMap::new();
    for r in records {
        by_ue.entry(r.ue_id).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, mut rows) in by_ue {
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        for chunk in rows.chunks_exact(len) {
            out.push(chunk.iter().map(|r| (*r).clone()).collect());
        }
    }
    out
}

/// Number of validation units for `n` units: `round(val_fraction · n)`,
/// kept inside `[1, n - 1]` so neither side is empty.
pub fn validation_count(n: usize, val_fraction: f64) -> usize {
    ((val_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Seeded random split of whole windows (never of rows inside a window).
pub fn split<T: Clone>(items: &[T], val_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() < 2 {
        return Err(Error::data(format!("need at least 2 windows to split, got {}", items.len())));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::data(format!("val_fraction {val_fraction} outside (0, 1)")));
    }
    let n_val = validation_count(items.len(), val_fraction);
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; items.len()];
    for &i in &idx[..n_val] {
        is_val[i] = true;
    }
    let mut train = Vec::with_capacity(items.len() - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (item, v) in items.iter().zip(is_val) {
        if v {
            val.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, val))
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

const NEIGHBOR_FIELDS: [&str; 7] =
    ["cell_id", "rsrp_dbm", "rsrq_db", "load_frac", "alarm_code", "ticket_code", "backhaul_mbps"];

/// Frozen column list of schema version 1.
pub fn csv_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "schema_version", "t", "ue_id", "day_of_week", "time_of_day_s", "device_type", "qci", "s_cell_id",
        "s_tech", "s_band_code", "s_earfcn", "s_rsrp_dbm", "s_rsrq_db", "s_rssi_dbm", "s_sinr_db", "s_cqi",
        "s_load_frac", "s_alarm_code", "s_ticket_code", "s_backhaul_mbps", "s_cfr", "s_cdr", "s_hof_rate",
        "s_rlf_rate",
    ]
    .map(String::from)
    .into();
    for k in 1..=NEIGHBOR_SLOTS {
        cols.extend(NEIGHBOR_FIELDS.iter().map(|f| format!("n{k}_{f}")));
    }
    cols.push("label".into());
    cols
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn record_fields(r: &KpiRecord) -> Vec<String> {
    let s = &r.serving;
    let mut f = vec![
        SCHEMA_VERSION.to_string(),
        f6(r.t),
        r.ue_id.to_string(),
        r.day_of_week.to_string(),
        r.time_of_day_s.to_string(),
        r.device_type.label().to_string(),
        r.qci.to_string(),
        s.cell_id.to_string(),
        s.tech.label().to_string(),
        s.band_code.to_string(),
        s.earfcn.to_string(),
        f6(s.rsrp_dbm),
        f6(s.rsrq_db),
        f6(s.rssi_dbm),
        f6(s.sinr_db),
        s.cqi.to_string(),
        f6(s.load_frac),
        s.alarm.code().to_string(),
        s.ticket.code().to_string(),
        f6(s.backhaul_mbps),
        f6(s.cfr),
        f6(s.cdr),
        f6(s.hof_rate),
        f6(s.rlf_rate),
    ];
    for n in &r.neighbors {
        f.push(n.cell_id.map_or_else(|| "-1".to_string(), |c| c.to_string()));
        f.push(f6(n.rsrp_dbm));
        f.push(f6(n.rsrq_db));
        f.push(f6(n.load_frac));
        f.push(n.alarm.code().to_string());
        f.push(n.ticket.code().to_string());
        f.push(f6(n.backhaul_mbps));
    }
    f.push(r.label.map_or_else(String::new, |l| l.to_string()));
    f
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::data(format!("{other:?}")),
    }
}

pub fn write_csv_to<W: Write>(records: &[KpiRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_columns()).map_err(csv_err)?;
    for r in records {
        w.write_record(record_fields(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[KpiRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(records, std::io::BufWriter::new(file))
}

struct RowParser<'a> {
    row: &'a csv::StringRecord,
    line: u64,
    col: usize,
    names: &'a [String],
}

impl RowParser<'_> {
    fn next_str(&mut self) -> Result<&str> {
        let v = self.row.get(self.col).ok_or_else(|| Error::Parse {
            line: self.line,
            msg: format!("missing column {}", self.names[self.col]),
        })?;
        self.col += 1;
        Ok(v)
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse { line: self.line, msg: format!("column {}: {msg}", self.names[self.col - 1]) }
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T> {
        let s = self.next_str()?.trim().to_string();
        s.parse::<T>().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }

    fn float(&mut self) -> Result<f64> {
        let v: f64 = self.num()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("non-finite value".into()))
        }
    }

    fn severity(&mut self) -> Result<Severity> {
        let code: u8 = self.num()?;
        Severity::from_code(code).ok_or_else(|| self.err(format!("severity code {code} outside 0..=2")))
    }
}

fn parse_row(row: &csv::StringRecord, line: u64, names: &[String]) -> Result<KpiRecord> {
    if row.len() != names.len() {
        return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", names.len(), row.len()) });
    }
    let mut p = RowParser { row, line, col: 0, names };
    let version: u32 = p.num()?;
    if version != SCHEMA_VERSION {
        return Err(p.err(format!("unsupported schema_version {version}")));
    }
    let t = p.float()?;
    let ue_id = p.num()?;
    let day_of_week: u8 = p.num()?;
    if day_of_week > 6 {
        return Err(p.err(format!("day_of_week {day_of_week} outside 0..=6")));
    }
    let time_of_day_s: u32 = p.num()?;
    if time_of_day_s >= 86_400 {
        return Err(p.err(format!("time_of_day_s {time_of_day_s} outside 0..86400")));
    }
    let dev = p.next_str()?.to_string();
    let device_type = DeviceType::from_label(&dev).ok_or_else(|| p.err(format!("unknown device_type {dev:?}")))?;
    let qci = p.num()?;
    let cell_id = p.num()?;
    let tech_s = p.next_str()?.to_string();
    let tech = Tech::from_label(&tech_s).ok_or_else(|| p.err(format!("unknown tech {tech_s:?}")))?;
    let band_code = p.num()?;
    let earfcn = p.num()?;
    let rsrp_dbm = p.float()?;
    let rsrq_db = p.float()?;
    let rssi_dbm = p.float()?;
    let sinr_db = p.float()?;
    let cqi: u8 = p.num()?;
    if cqi > CQI_MAX {
        return Err(p.err(format!("cqi {cqi} outside 0..=15")));
    }
    let serving = ServingBlock {
        cell_id,
        tech,
        band_code,
        earfcn,
        rsrp_dbm,
        rsrq_db,
        rssi_dbm,
        sinr_db,
        cqi,
        load_frac: p.float()?,
        alarm: p.severity()?,
        ticket: p.severity()?,
        backhaul_mbps: p.float()?,
        cfr: p.float()?,
        cdr: p.float()?,
        hof_rate: p.float()?,
        rlf_rate: p.float()?,
    };
    let mut neighbors = [NeighborBlock::PADDING; NEIGHBOR_SLOTS];
    for slot in neighbors.iter_mut() {
        let id: i64 = p.num()?;
        let cell_id = match id {
            -1 => None,
            id if id >= 0 && id <= u32::MAX as i64 => Some(id as CellId),
            id => return Err(p.err(format!("invalid cell_id {id}"))),
        };
        *slot = NeighborBlock {
            cell_id,
            rsrp_dbm: p.float()?,
            rsrq_db: p.float()?,
            load_frac: p.float()?,
            alarm: p.severity()?,
            ticket: p.severity()?,
            backhaul_mbps: p.float()?,
        };
    }
    let label_s = p.next_str()?.trim().to_string();
    let label = if label_s.is_empty() {
        None
    } else {
        let l: u8 = label_s.parse().map_err(|_| p.err(format!("cannot parse {label_s:?}")))?;
        if l as usize >= N_CLASSES {
            return Err(p.err(format!("label {l} outside 0..={}", N_CLASSES - 1)));
        }
        if l > 0 && neighbors[l as usize - 1].is_padding() {
            return Err(p.err(format!("label {l} points at a padded neighbor slot")));
        }
        Some(l)
    };
    Ok(KpiRecord { t, ue_id, day_of_week, time_of_day_s, device_type, qci, serving, neighbors, label })
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<KpiRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let expected = csv_columns();
    let header = rdr.headers().map_err(csv_err)?.clone();
    for (i, h) in header.iter().enumerate() {
        if !expected.iter().any(|c| c == h) {
            return Err(Error::Parse { line: 1, msg: format!("unknown column {h:?}") });
        }
        if expected.get(i).map(String::as_str) != Some(h) {
            return Err(Error::Parse { line: 1, msg: format!("column {h:?} out of order at position {}", i + 1) });
        }
    }
    if header.len() != expected.len() {
        return Err(Error::Parse {
            line: 1,
            msg: format!("missing columns starting at {:?}", expected[header.len()]),
        });
    }
    let mut out = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(0, |p| p.line());
                out.push(parse_row(&row, line, &expected)?);
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(Error::Parse { line, msg: format!("{e}") });
            }
        }
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<KpiRecord>> {
    let file = std::fs::File::open(path)?;
    read_csv_from(std::io::BufReader::new(file))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mobility::Pattern;
    use crate::network::tests::cell;

    pub(crate) fn record() -> KpiRecord {
        KpiRecord {
            t: 1.2,
            ue_id: 4,
            day_of_week: 2,
            time_of_day_s: 3600,
            device_type: DeviceType::Phone5g,
            qci: 9,
            serving: ServingBlock {
                cell_id: 1,
                tech: Tech::Gnodeb5g,
                band_code: 78,
                earfcn: 632_628,
                rsrp_dbm: -95.0,
                rsrq_db: -11.0,
                rssi_dbm: -65.0,
                sinr_db: 8.0,
                cqi: 8,
                load_frac: 0.5,
                alarm: Severity::None,
                ticket: Severity::None,
                backhaul_mbps: 1000.0,
                cfr: 0.0,
                cdr: 0.0,
                hof_rate: 0.0,
                rlf_rate: 0.0,
            },
            neighbors: [NeighborBlock::PADDING; NEIGHBOR_SLOTS],
            label: None,
        }
    }

    fn neighbor(id: CellId, rsrp: f64) -> NeighborBlock {
        NeighborBlock {
            cell_id: Some(id),
            rsrp_dbm: rsrp,
            rsrq_db: -11.0,
            load_frac: 0.5,
            alarm: Severity::None,
            ticket: Severity::None,
            backhaul_mbps: 1000.0,
        }
    }

    fn profile() -> UeProfile {
        UeProfile { ue_id: 4, device_type: DeviceType::Phone4g, qci: 8, speed_mps: 0.0, pattern: Pattern::Stationary, start_m: (0.0, 0.0) }
    }

    fn sample(id: CellId, rsrp: f64) -> MeasurementSample {
        MeasurementSample { cell_id: id, rsrp_dbm: rsrp, rsrq_db: -10.0, rssi_dbm: -60.0, sinr_db: 3.0, cqi: 5 }
    }

    #[test]
    fn assemble_pads_missing_neighbors() {
        let cells = [cell(1, 0.0, 0.0), cell(2, 100.0, 0.0)];
        let mut attrs = [NetworkAttributes::default(); 2];
        attrs[0].alarm = Severity::ServiceImpacting;
        attrs[1].connected_users = 25;
        let samples = [sample(1, -90.0), sample(2, -95.0)];
        let r = assemble_record(
            &profile(),
            90_000.7,
            6,
            CellView { site: &cells[0], attrs: &attrs[0], sample: &samples[0] },
            &[CellView { site: &cells[1], attrs: &attrs[1], sample: &samples[1] }],
        );
        assert_eq!(r.serving.alarm.code(), 2);
        assert_eq!(r.neighbors[0].cell_id, Some(2));
        assert_eq!(r.neighbors[0].load_frac, 0.25);
        assert!(r.neighbors[1..].iter().all(|n| *n == NeighborBlock::PADDING));
        assert_eq!((r.day_of_week, r.time_of_day_s), (0, 3600));
        assert_eq!(r.label, None);
    }

    #[test]
    fn assemble_full_neighbor_list() {
        let cells: Vec<_> = (1..=5).map(|i| cell(i, i as f64, 0.0)).collect();
        let attrs = [NetworkAttributes::default(); 5];
        let samples: Vec<_> = (1..=5).map(|i| sample(i, -80.0 - i as f64)).collect();
        let views: Vec<_> = (1..5).map(|i| CellView { site: &cells[i], attrs: &attrs[i], sample: &samples[i] }).collect();
        let r = assemble_record(&profile(), 0.0, 0, CellView { site: &cells[0], attrs: &attrs[0], sample: &samples[0] }, &views);
        assert!(r.neighbors.iter().all(|n| !n.is_padding()));
    }

    #[test]
    fn oracle_only_serving() {
        assert_eq!(oracle_label(&record(), &OracleConfig::default()), 0);
    }

    #[test]
    fn oracle_prefers_much_stronger_neighbor() {
        let mut r = record();
        r.neighbors[0] = neighbor(2, -85.0);
        // serving: 1.0·61/125 + 0.25 + 0.03 + 3/125; neighbor: 1.0·71/125 + 0.25 + 0.03.
        let scores = OracleConfig::default().scores(&r);
        assert!((scores[0].unwrap() - (61.0 / 125.0 + 0.25 + 0.03 + 0.024)).abs() < 1e-12);
        assert!((scores[1].unwrap() - (71.0 / 125.0 + 0.25 + 0.03)).abs() < 1e-12);
        assert_eq!(oracle_label(&r, &OracleConfig::default()), 1);
    }

    #[test]
    fn oracle_avoids_alarmed_neighbor() {
        let mut r = record();
        r.neighbors[0] = NeighborBlock { alarm: Severity::ServiceImpacting, ..neighbor(2, -85.0) };
        assert_eq!(oracle_label(&r, &OracleConfig::default()), 0);
    }

    #[test]
    fn oracle_ties_go_to_serving_then_lowest_slot() {
        let cfg = OracleConfig { stickiness_db: 0.0, ..Default::default() };
        let mut r = record();
        r.neighbors[0] = neighbor(2, -95.0);
        assert_eq!(oracle_label(&r, &cfg), 0);
        r.neighbors[0] = neighbor(2, -90.0);
        r.neighbors[1] = neighbor(3, -90.0);
        assert_eq!(oracle_label(&r, &cfg), 1);
    }

    #[test]
    fn scaler_constant_feature_is_zero() {
        let recs = vec![record(), record()];
        let sc = fit_scaler(&recs).unwrap();
        let v = normalize(&recs[0], &sc).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v.len(), FEATURE_DIM);
    }

    #[test]
    fn scaler_linear_map() {
        let mut a = record();
        a.serving.rsrp_dbm = -156.0;
        let mut b = record();
        b.serving.rsrp_dbm = -31.0;
        let sc = fit_scaler([&a, &b]).unwrap();
        let mut c = record();
        c.serving.rsrp_dbm = -93.5;
        assert!((normalize(&c, &sc).unwrap()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_hot_tech() {
        let r = record();
        let sc = fit_scaler([&r]).unwrap();
        let v = normalize(&r, &sc).unwrap();
        let names = feature_names();
        let at = |n: &str| v[names.iter().position(|x| x == n).unwrap()];
        assert_eq!(
            (at("s_tech_BTS_3G"), at("s_tech_ENODEB_4G"), at("s_tech_GNODEB_5G")),
            (0.0, 0.0, 1.0)
        );
        assert_eq!(names.len(), FEATURE_DIM);
    }

    #[test]
    fn scaler_requires_rows() {
        assert!(matches!(fit_scaler(std::iter::empty()), Err(Error::EmptyTrainingSet)));
        assert!(normalize(&record(), &Scaler::default()).is_err());
    }

    #[test]
    fn split_counts_and_determinism() {
        let items: Vec<u32> = (0..100).collect();
        let (tr, va) = split(&items, 0.3, 7).unwrap();
        assert_eq!((tr.len(), va.len()), (70, 30));
        assert_eq!(split(&items, 0.3, 7).unwrap(), (tr, va));
        let (_, va3) = split(&[1, 2, 3], 0.3, 1).unwrap();
        assert_eq!(va3.len(), 1);
        assert!(split(&[1], 0.3, 1).is_err());
        assert!(split(&[1, 2], 1.0, 1).is_err());
    }

    #[test]
    fn windows_group_by_ue_in_time_order() {
        let mut rows = Vec::new();
        for ue in [2u32, 1] {
            for k in (0..7).rev() {
                let mut r = record();
                r.ue_id = ue;
                r.t = k as f64;
                rows.push(r);
            }
        }
        let w = make_windows(&rows, 3);
        assert_eq!(w.len(), 4);
        assert_eq!(w[0][0].ue_id, 1);
        assert_eq!(w[0].iter().map(|r| r.t).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        assert!(w.iter().all(|win| win.iter().all(|r| r.ue_id == win[0].ue_id)));
    }

    #[test]
    fn csv_header_only_for_empty_input() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("schema_version,t,ue_id"));
        assert!(read_csv_from(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn csv_bad_label_names_line() {
        let mut r = record();
        r.label = Some(0);
        let mut buf = Vec::new();
        write_csv_to(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].rsplit_once(',').map(|(head, _)| format!("{head},7")).unwrap();
        let err = read_csv_from(lines.join("\n").as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("label"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_unknown_column() {
        let text = "schema_version,t,bogus\n1,0.0,1\n";
        let err = read_csv_from(text.as_bytes()).unwrap_err();
        assert!(format!("{err}").contains("bogus"));
    }

    #[test]
    fn csv_label_on_padding_rejected() {
        let mut r = record();
        r.label = Some(2);
        let mut buf = Vec::new();
        write_csv_to(&[r], &mut buf).unwrap();
        assert!(read_csv_from(buf.as_slice()).is_err());
    }
}
