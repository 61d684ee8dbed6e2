//! Closed-loop simulation: ticks mobility and the network, routes each
//! UE's measurement report to a pluggable handover policy, executes the
//! returned handovers and reports comparative metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    a3_update, rlf_check, A3State, HandoverCause, HandoverConfig, HandoverEvent, HandoverOutcome,
    TriggerQuantity,
};
use crate::config::Scenario;
use crate::dataset::{assemble_record, oracle_label, CellView, KpiRecord, NEIGHBOR_SLOTS};
use crate::engine::{decide, Action, DecisionLogRow, DecisionPolicy, FeatureWindow, ModelBundle};
use crate::mobility::{step, UeState};
use crate::network::{
    advance_network, measure_all, top_neighbors, CellId, CellTickEvents, MeasurementSample, NetworkState,
    Severity, ShadowField,
};
use crate::{Error, Result};

/// What a policy sees besides the record itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickContext {
    pub t: f64,
    /// Radio link failure detected on the serving cell this tick.
    pub rlf: bool,
    /// Time of this UE's last handover (`-inf` if none).
    pub last_ho: f64,
}

/// A handover decision maker, called once per tick for every UE in UE
/// order. Returning the serving cell or `None` keeps the UE in place.
pub trait HandoverPolicy {
    fn name(&self) -> String;

    fn cause(&self) -> HandoverCause;

    /// Called before the first tick.
    fn reset(&mut self, n_ues: usize);

    fn decide(&mut self, ue: usize, record: &KpiRecord, ctx: &TickContext) -> Result<Option<CellId>>;

    /// Called after any executed handover, including RLF recovery.
    fn on_handover(&mut self, _ue: usize, _t: f64) {}
}

/// Classical A3 with time-to-trigger over the reported neighbors.
#[derive(Debug, Clone)]
pub struct A3Policy {
    pub cfg: HandoverConfig,
    states: Vec<A3State>,
}

impl A3Policy {
    pub fn new(cfg: HandoverConfig) -> Self {
        Self { cfg, states: Vec::new() }
    }
}

impl HandoverPolicy for A3Policy {
    fn name(&self) -> String {
        "a3".into()
    }

    fn cause(&self) -> HandoverCause {
        HandoverCause::A3
    }

    fn reset(&mut self, n_ues: usize) {
        self.states = vec![A3State::default(); n_ues];
    }

    fn decide(&mut self, ue: usize, r: &KpiRecord, ctx: &TickContext) -> Result<Option<CellId>> {
        let (serving, neighbors): (f64, Vec<(CellId, f64)>) = match self.cfg.trigger_quantity {
            TriggerQuantity::Rsrp => (
                r.serving.rsrp_dbm,
                r.neighbors.iter().filter_map(|n| n.cell_id.map(|id| (id, n.rsrp_dbm))).collect(),
            ),
            TriggerQuantity::Rsrq => (
                r.serving.rsrq_db,
                r.neighbors.iter().filter_map(|n| n.cell_id.map(|id| (id, n.rsrq_db))).collect(),
            ),
        };
        Ok(a3_update(&mut self.states[ue], serving, &neighbors, &self.cfg, ctx.t))
    }

    fn on_handover(&mut self, ue: usize, t: f64) {
        let st = &mut self.states[ue];
        st.timers_ms.clear();
        st.last_ho_time = t;
    }
}

/// Hands over whenever any reported neighbor is stronger than the serving
/// cell, with no margin, timer or rate limit.
#[derive(Debug, Clone, Default)]
pub struct GreedyPolicy;

impl HandoverPolicy for GreedyPolicy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn cause(&self) -> HandoverCause {
        HandoverCause::Greedy
    }

    fn reset(&mut self, _n_ues: usize) {}

    fn decide(&mut self, _ue: usize, r: &KpiRecord, _ctx: &TickContext) -> Result<Option<CellId>> {
        let best = r
            .neighbors
            .iter()
            .filter(|n| !n.is_padding() && n.rsrp_dbm > r.serving.rsrp_dbm)
            .fold(None::<(CellId, f64)>, |acc, n| match acc {
                Some((_, v)) if v >= n.rsrp_dbm => acc,
                _ => n.cell_id.map(|id| (id, n.rsrp_dbm)),
            });
        Ok(best.map(|(id, _)| id))
    }
}

/// The learned engine behind the policy layer.
#[derive(Debug, Clone)]
pub struct EnginePolicy {
    pub bundle: ModelBundle,
    pub policy: DecisionPolicy,
    label: String,
    windows: Vec<FeatureWindow>,
    ue_ids: Vec<u32>,
    pub log: Vec<DecisionLogRow>,
}

impl EnginePolicy {
    pub fn new(bundle: ModelBundle, policy: DecisionPolicy) -> Self {
        Self { bundle, policy, label: "deep".into(), windows: Vec::new(), ue_ids: Vec::new(), log: Vec::new() }
    }

    /// Name used in reports (defaults to `deep`).
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl HandoverPolicy for EnginePolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn cause(&self) -> HandoverCause {
        HandoverCause::Engine
    }

    fn reset(&mut self, n_ues: usize) {
        self.windows = vec![FeatureWindow::new(self.bundle.window_len); n_ues];
        self.ue_ids = vec![0; n_ues];
        self.log.clear();
    }

    fn decide(&mut self, ue: usize, r: &KpiRecord, ctx: &TickContext) -> Result<Option<CellId>> {
        self.windows[ue].push(r.clone());
        self.ue_ids[ue] = r.ue_id;
        let window = self.windows[ue].read();
        let d = decide(
            &self.bundle.model,
            &window,
            self.bundle.window_len,
            &self.bundle.scaler,
            &self.policy,
            ctx.rlf,
            ctx.t,
            ctx.last_ho,
        )?;
        let target = match d.action {
            Action::Stay => None,
            Action::HandOver(slot) => r.neighbors[slot as usize - 1].cell_id,
        };
        self.log.push(DecisionLogRow { t: ctx.t, ue_id: r.ue_id, decision: d });
        Ok(target)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub handover_count: usize,
    pub ping_pong_count: usize,
    pub hof_count: usize,
    pub rlf_count: usize,
    pub mean_sinr_db: f64,
    pub time_on_vetoed_cells_s: f64,
}

impl SimMetrics {
    pub const NAMES: [&'static str; 6] = [
        "handover_count",
        "ping_pong_count",
        "hof_count",
        "rlf_count",
        "mean_sinr_db",
        "time_on_vetoed_cells_s",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.handover_count as f64,
            self.ping_pong_count as f64,
            self.hof_count as f64,
            self.rlf_count as f64,
            self.mean_sinr_db,
            self.time_on_vetoed_cells_s,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub policy: String,
    pub metrics: SimMetrics,
    pub events: Vec<HandoverEvent>,
}

/// Counts A→B, B→A return pairs of one UE within `window_s`, pairing
/// greedily from the earliest event; each event is used at most once.
pub fn ping_pong_count(events: &[HandoverEvent], window_s: f64) -> Result<usize> {
    let mut by_ue: BTreeMap<u32, Vec<&HandoverEvent>> = BTreeMap::new();
    for e in events {
        let list = by_ue.entry(e.ue_id).or_default();
        if let Some(prev) = list.last() {
            if e.t < prev.t {
                return Err(Error::data(format!(
                    "handover events of UE {} are not time-ordered ({} after {})",
                    e.ue_id, e.t, prev.t
                )));
            }
        }
        list.push(e);
    }
    let mut count = 0;
    for list in by_ue.values() {
        let mut i = 0;
        while i + 1 < list.len() {
            let (a, b) = (list[i], list[i + 1]);
            if b.from_cell == a.to_cell && b.to_cell == a.from_cell && b.t - a.t <= window_s {
                count += 1;
                i += 2;
            } else {
                i += 1;
            }
        }
    }
    Ok(count)
}

fn strongest(samples: &[MeasurementSample]) -> CellId {
    samples
        .iter()
        .fold(None::<&MeasurementSample>, |best, s| match best {
            Some(b) if b.rsrp_dbm >= s.rsrp_dbm => Some(b),
            _ => Some(s),
        })
        .map(|s| s.cell_id)
        .expect("scenario has at least one cell")
}

fn ue_rng(seed: u64, ue: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ue as u64 * 4 + purpose);
    rng
}

pub fn run(scenario: &Scenario, policy: &mut dyn HandoverPolicy) -> Result<SimReport> {
    run_observed(scenario, policy, &mut |_| {})
}

/// Like [`run`], handing every assembled record to `observer` before the
/// policy sees it.
///
/// Mobility and radio draws use per-UE streams derived from the scenario
/// seed, so every policy faces the same positions and measurements.
pub fn run_observed(
    sc: &Scenario,
    policy: &mut dyn HandoverPolicy,
    observer: &mut dyn FnMut(&KpiRecord),
) -> Result<SimReport> {
    sc.validate()?;
    let cells = &sc.cells;
    let n_ues = sc.ues.len();
    let dt = sc.tick_s();
    let seed = sc.scenario.seed;
    let index_of: BTreeMap<CellId, usize> = cells.iter().enumerate().map(|(i, c)| (c.cell_id, i)).collect();
    let rlf_cfg = &sc.rlf;
    let rlf_len = rlf_cfg.qout_duration_ms.div_ceil(sc.scenario.tick_ms).max(1) as usize;

    policy.reset(n_ues);
    let mut net = NetworkState::new(cells);
    let mut ues: Vec<UeState> = sc.ues.iter().map(|p| UeState::initial(p, &sc.world)).collect();
    let mut move_rngs: Vec<ChaCha8Rng> = (0..n_ues).map(|i| ue_rng(seed, i, 0)).collect();
    let mut radio_rngs: Vec<ChaCha8Rng> = (0..n_ues).map(|i| ue_rng(seed, i, 1)).collect();
    let mut shadows = vec![ShadowField::new(); n_ues];
    let mut sinr_hist: Vec<Vec<f64>> = vec![Vec::with_capacity(rlf_len + 1); n_ues];
    let mut last_ho = vec![f64::NEG_INFINITY; n_ues];
    let mut cell_events = vec![CellTickEvents::default(); cells.len()];
    let mut events = Vec::new();
    let (mut sinr_sum, mut sinr_n, mut vetoed_s, mut rlf_count) = (0.0, 0usize, 0.0, 0usize);

    for k in 0..sc.n_ticks() {
        let t = k as f64 * dt;
        if k > 0 {
            for (i, ue) in ues.iter_mut().enumerate() {
                *ue = step(ue, &sc.ues[i], dt, &sc.world, &mut move_rngs[i]);
                cell_events[index_of[&ue.serving_cell]].attached += 1;
            }
        }
        advance_network(&mut net, cells, &sc.schedule, t, &cell_events);
        cell_events.iter_mut().for_each(|e| *e = CellTickEvents::default());

        for i in 0..n_ues {
            let samples =
                measure_all(ues[i].position, cells, &net.tx_offsets_db, &mut shadows[i], &sc.radio, &mut radio_rngs[i]);
            if k == 0 {
                ues[i].serving_cell = strongest(&samples);
                ues[i].attach_time = 0.0;
            }
            let serving = ues[i].serving_cell;
            let s_idx = index_of[&serving];
            let hist = &mut sinr_hist[i];
            hist.push(samples[s_idx].sinr_db);
            if hist.len() > rlf_len {
                hist.remove(0);
            }
            let rlf = rlf_check(hist, rlf_cfg.qout_db, rlf_cfg.qout_duration_ms, sc.scenario.tick_ms);

            let view = |idx: usize| CellView { site: &cells[idx], attrs: &net.attrs[idx], sample: &samples[idx] };
            let neighbor_views: Vec<CellView<'_>> = top_neighbors(&samples, serving, NEIGHBOR_SLOTS)
                .into_iter()
                .map(|id| view(index_of[&id]))
                .collect();
            let record = assemble_record(&sc.ues[i], t, sc.scenario.epoch_day, view(s_idx), &neighbor_views);
            observer(&record);

            let ctx = TickContext { t, rlf, last_ho: last_ho[i] };
            let mut target = policy.decide(i, &record, &ctx)?.filter(|&c| c != serving).map(|c| (c, policy.cause()));
            if rlf {
                rlf_count += 1;
                cell_events[s_idx].radio_link_failure = true;
                cell_events[s_idx].call_drop = true;
                sinr_hist[i].clear();
                if target.is_none() {
                    let best = strongest(&samples);
                    if best != serving {
                        target = Some((best, HandoverCause::RlfRecovery));
                    }
                }
            }
            if let Some((to, cause)) = target {
                let t_idx = *index_of
                    .get(&to)
                    .ok_or_else(|| Error::data(format!("policy chose unknown cell {to}")))?;
                let attrs = &net.attrs[t_idx];
                let failed = samples[t_idx].sinr_db < rlf_cfg.qout_db || attrs.alarm == Severity::ServiceImpacting;
                if failed {
                    cell_events[t_idx].handover_failure = true;
                }
                events.push(HandoverEvent {
                    t,
                    ue_id: sc.ues[i].ue_id,
                    from_cell: serving,
                    to_cell: to,
                    cause,
                    outcome: if failed { HandoverOutcome::Failure } else { HandoverOutcome::Success },
                });
                ues[i].serving_cell = to;
                ues[i].attach_time = t;
                last_ho[i] = t;
                sinr_hist[i].clear();
                policy.on_handover(i, t);
            }

            let cur = index_of[&ues[i].serving_cell];
            sinr_sum += samples[cur].sinr_db;
            sinr_n += 1;
            let a = &net.attrs[cur];
            if a.alarm == Severity::ServiceImpacting || a.ticket == Severity::ServiceImpacting {
                vetoed_s += dt;
            }
        }
    }

    let metrics = SimMetrics {
        handover_count: events.len(),
        ping_pong_count: ping_pong_count(&events, sc.scenario.ping_pong_window_s)?,
        hof_count: events.iter().filter(|e| e.outcome == HandoverOutcome::Failure).count(),
        rlf_count,
        mean_sinr_db: if sinr_n > 0 { sinr_sum / sinr_n as f64 } else { 0.0 },
        time_on_vetoed_cells_s: vetoed_s,
    };
    Ok(SimReport { scenario: sc.scenario.name.clone(), seed, policy: policy.name(), metrics, events })
}

/// Oracle-labelled records of every UE at every tick, with the serving
/// cell driven by the A3 baseline.
pub fn generate_dataset(sc: &Scenario) -> Result<Vec<KpiRecord>> {
    let mut records = Vec::with_capacity(sc.n_ticks() * sc.ues.len());
    let mut policy = A3Policy::new(sc.handover.clone());
    run_observed(sc, &mut policy, &mut |r| {
        let mut r = r.clone();
        r.label = Some(oracle_label(&r, &sc.oracle));
        records.push(r);
    })?;
    Ok(records)
}

pub const REPORT_HEADER: &str =
    "scenario,seed,policy,handover_count,ping_pong_count,hof_count,rlf_count,mean_sinr_db,time_on_vetoed_cells_s";

pub fn write_reports_to<W: Write>(reports: &[SimReport], mut out: W) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.3}",
            r.scenario,
            r.seed,
            r.policy,
            m.handover_count,
            m.ping_pong_count,
            m.hof_count,
            m.rlf_count,
            m.mean_sinr_db,
            m.time_on_vetoed_cells_s
        )?;
    }
    Ok(())
}

pub const EVENTS_HEADER: &str = "policy,t,ue_id,from_cell,to_cell,cause,outcome";

pub fn write_events_to<W: Write>(reports: &[SimReport], mut out: W) -> Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for r in reports {
        for e in &r.events {
            let outcome = match e.outcome {
                HandoverOutcome::Success => "success",
                HandoverOutcome::Failure => "failure",
            };
            writeln!(
                out,
                "{},{:.3},{},{},{},{},{}",
                r.policy,
                e.t,
                e.ue_id,
                e.from_cell,
                e.to_cell,
                e.cause.label(),
                outcome
            )?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_reports(reports: &[SimReport], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| write_reports_to(reports, w))
}

pub fn write_events(reports: &[SimReport], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| write_events_to(reports, w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub values: [f64; 6],
    pub delta: [f64; 6],
    /// `delta / reference`; 0 when both are 0, NaN when only the reference is.
    pub relative: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

/// Side-by-side metrics with deltas against the `reference` policy.
pub fn compare(reports: &[SimReport], reference: &str) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::data("compare needs at least two reports"));
    }
    let first = &reports[0];
    if let Some(r) = reports.iter().find(|r| r.scenario != first.scenario || r.seed != first.seed) {
        return Err(Error::data(format!(
            "report {} ran {}/{} but {} ran {}/{}",
            r.policy, r.scenario, r.seed, first.policy, first.scenario, first.seed
        )));
    }
    let base = reports
        .iter()
        .find(|r| r.policy == reference)
        .ok_or_else(|| Error::data(format!("reference policy {reference:?} not among the reports")))?
        .metrics
        .values();
    let rows = reports
        .iter()
        .map(|r| {
            let values = r.metrics.values();
            let mut delta = [0.0; 6];
            let mut relative = [0.0; 6];
            for k in 0..6 {
                delta[k] = values[k] - base[k];
                relative[k] = if delta[k] == 0.0 {
                    0.0
                } else if base[k] == 0.0 {
                    f64::NAN
                } else {
                    delta[k] / base[k].abs()
                };
            }
            ComparisonRow { policy: r.policy.clone(), values, delta, relative }
        })
        .collect();
    Ok(Comparison { scenario: first.scenario.clone(), seed: first.seed, reference: reference.into(), rows })
}

fn fmt_rel(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{:+.1}%", v * 100.0)
    }
}

impl Comparison {
    pub fn row(&self, policy: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }

    /// Aligned plain-text table; each cell is `value (delta, relative)`.
    pub fn to_text(&self) -> String {
        let mut cells: Vec<Vec<String>> = vec![std::iter::once("policy".to_string())
            .chain(SimMetrics::NAMES.iter().map(|s| s.to_string()))
            .collect()];
        for r in &self.rows {
            let mut line = vec![r.policy.clone()];
            for k in 0..6 {
                let v = if k < 4 { format!("{}", r.values[k]) } else { format!("{:.2}", r.values[k]) };
                if r.policy == self.reference {
                    line.push(v);
                } else {
                    line.push(format!("{v} ({:+.2}, {})", r.delta[k], fmt_rel(r.relative[k])));
                }
            }
            cells.push(line);
        }
        let widths: Vec<usize> =
            (0..cells[0].len()).map(|c| cells.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut out = format!(
            "scenario {} seed {} (reference: {}; closed-loop metrics are simulator-defined)\n",
            self.scenario, self.seed, self.reference
        );
        for line in &cells {
            let padded: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        }
        out
    }

    pub fn write_csv_to<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "scenario,seed,reference,policy")?;
        for n in SimMetrics::NAMES {
            write!(out, ",{n},{n}_delta,{n}_rel")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(out, "{},{},{},{}", self.scenario, self.seed, self.reference, r.policy)?;
            for k in 0..6 {
                write!(out, ",{:.6},{:.6},{:.6}", r.values[k], r.delta[k], r.relative[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
