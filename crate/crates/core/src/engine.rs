//! The decision engine. A per-UE sliding window of KPI records feeds the
//! trained network, and the network-side policy layer (alarm veto, RLF
//! override, score margin, rate limit) turns its scores into an action.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrainingConfig;
use crate::dataset::{
    fit_scaler, make_windows, normalize, split, KpiRecord, Scaler, Window, N_CLASSES, NEIGHBOR_SLOTS, SEQ_DIM,
    STATIC_DIM,
};
use crate::network::Severity;
use crate::nn::{train, DeepMobilityModel, EpochStats, ModelConfig, Sample};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionPolicy {
    pub veto_service_impacting: bool,
    pub allow_veto_override_on_rlf: bool,
    pub min_time_between_ho_s: f64,
    /// Minimum `score(target) - score(stay)` needed to act.
    pub score_margin: f64,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self {
            veto_service_impacting: true,
            allow_veto_override_on_rlf: true,
            min_time_between_ho_s: 1.0,
            score_margin: 0.05,
        }
    }
}

impl DecisionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.score_margin >= 0.0) {
            return Err(Error::config("score_margin must be >= 0"));
        }
        if !(self.min_time_between_ho_s >= 0.0) {
            return Err(Error::config("min_time_between_ho_s must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Stay,
    /// Neighbor slot 1..=4.
    HandOver(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    ModelChoice,
    AlarmVeto,
    RateLimited,
    MarginNotMet,
    RlfOverride,
}

impl Reason {
    pub fn label(self) -> &'static str {
        match self {
            Reason::ModelChoice => "ModelChoice",
            Reason::AlarmVeto => "AlarmVeto",
            Reason::RateLimited => "RateLimited",
            Reason::MarginNotMet => "MarginNotMet",
            Reason::RlfOverride => "RlfOverride",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub scores: [f64; N_CLASSES],
    /// Bit `i - 1` set when neighbor slot `i` was vetoed.
    pub vetoed_mask: u8,
    pub reason: Reason,
}

impl Decision {
    pub fn vetoed_slots(&self) -> Vec<u8> {
        (1..=NEIGHBOR_SLOTS as u8).filter(|s| self.vetoed_mask & (1 << (s - 1)) != 0).collect()
    }
}

/// Fixed-capacity per-UE history. Reading an under-full window repeats the
/// oldest record at the front.
#[derive(Debug, Clone)]
pub struct FeatureWindow {
    capacity: usize,
    buf: VecDeque<KpiRecord>,
}

impl FeatureWindow {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self { capacity, buf: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, record: KpiRecord) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Exactly `capacity` records, oldest first; empty if nothing was pushed.
    pub fn read(&self) -> Vec<&KpiRecord> {
        let Some(oldest) = self.buf.front() else {
            return Vec::new();
        };
        let pad = self.capacity - self.buf.len();
        std::iter::repeat_n(oldest, pad).chain(self.buf.iter()).collect()
    }
}

/// Normalizes a window into the recurrent sequence plus the static
/// features of its most recent record.
pub fn encode_window(window: &[&KpiRecord], scaler: &Scaler) -> Result<(Vec<f64>, Vec<f64>)> {
    let last = window.last().ok_or_else(|| Error::data("empty window"))?;
    let mut seq = Vec::with_capacity(window.len() * SEQ_DIM);
    for r in window {
        let v = normalize(r, scaler)?;
        seq.extend_from_slice(&v[..SEQ_DIM]);
    }
    let stat = normalize(last, scaler)?[SEQ_DIM..].to_vec();
    Ok((seq, stat))
}

/// Turns labelled windows into training samples; the target is the label
/// of each window's last record.
pub fn build_samples(windows: &[Window], scaler: &Scaler) -> Result<Vec<Sample>> {
    windows
        .iter()
        .map(|w| {
            let refs: Vec<&KpiRecord> = w.iter().collect();
            let (seq, stat) = encode_window(&refs, scaler)?;
            let label = w
                .last()
                .and_then(|r| r.label)
                .ok_or_else(|| Error::data(format!("window ending at t={} has no label", w.last().map_or(0.0, |r| r.t))))?;
            Ok(Sample { seq, stat, label: label as usize })
        })
        .collect()
}

fn vetoed(r: &KpiRecord, slot: usize) -> bool {
    let n = &r.neighbors[slot - 1];
    n.alarm == Severity::ServiceImpacting || n.ticket == Severity::ServiceImpacting
}

/// Applies the policy layer to raw model scores for the latest record.
pub fn apply_policy(
    scores: [f64; N_CLASSES],
    latest: &KpiRecord,
    policy: &DecisionPolicy,
    rlf: bool,
    t: f64,
    last_ho: f64,
) -> Decision {
    let mut vetoed_mask = 0u8;
    let mut allowed = [false; N_CLASSES];
    allowed[0] = true;
    for (slot, on) in allowed.iter_mut().enumerate().skip(1) {
        if latest.neighbors[slot - 1].is_padding() {
            continue;
        }
        if policy.veto_service_impacting && vetoed(latest, slot) {
            vetoed_mask |= 1 << (slot - 1);
            *on = rlf && policy.allow_veto_override_on_rlf;
        } else {
            *on = true;
        }
    }
    let pick = |mask: &[bool; N_CLASSES]| {
        let mut best = 0;
        for k in 1..N_CLASSES {
            if mask[k] && scores[k] > scores[best] {
                best = k;
            }
        }
        best
    };
    let best = pick(&allowed);
    let decision = |action, reason| Decision { action, scores, vetoed_mask, reason };
    if best == 0 {
        // Would a vetoed slot have won without the veto?
        let mut unvetoed = allowed;
        for (slot, on) in unvetoed.iter_mut().enumerate().skip(1) {
            *on |= vetoed_mask & (1 << (slot - 1)) != 0;
        }
        let reason = if pick(&unvetoed) != 0 { Reason::AlarmVeto } else { Reason::ModelChoice };
        return decision(Action::Stay, reason);
    }
    if scores[best] - scores[0] < policy.score_margin {
        return decision(Action::Stay, Reason::MarginNotMet);
    }
    if t - last_ho + 1e-9 < policy.min_time_between_ho_s {
        return decision(Action::Stay, Reason::RateLimited);
    }
    let reason = if vetoed_mask & (1 << (best - 1)) != 0 { Reason::RlfOverride } else { Reason::ModelChoice };
    decision(Action::HandOver(best as u8), reason)
}

/// Full decision for one UE at time `t`. `window` may be shorter than the
/// model's window length; it is front-padded by repeating its oldest record.
#[allow(clippy::too_many_arguments)]
pub fn decide(
    model: &DeepMobilityModel,
    window: &[&KpiRecord],
    window_len: usize,
    scaler: &Scaler,
    policy: &DecisionPolicy,
    rlf: bool,
    t: f64,
    last_ho: f64,
) -> Result<Decision> {
    if !scaler.is_fitted() {
        return Err(Error::data("scaler is not fitted"));
    }
    let oldest = *window.first().ok_or_else(|| Error::data("empty window"))?;
    let tail = &window[window.len().saturating_sub(window_len)..];
    let padded: Vec<&KpiRecord> = std::iter::repeat_n(oldest, window_len.saturating_sub(tail.len()))
        .chain(tail.iter().copied())
        .collect();
    let (seq, stat) = encode_window(&padded, scaler)?;
    let raw = model.forward(&seq, &stat)?;
    let scores: [f64; N_CLASSES] = raw
        .try_into()
        .map_err(|v: Vec<f64>| Error::shape(format!("model emits {} scores, expected {N_CLASSES}", v.len())))?;
    Ok(apply_policy(scores, padded[padded.len() - 1], policy, rlf, t, last_ho))
}

/// Trained model plus everything needed to feed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub window_len: usize,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub model: DeepMobilityModel,
}

pub const MODEL_FORMAT: &str = "deepmobility-model";
pub const MODEL_VERSION: u32 = 1;

impl ModelBundle {
    pub fn new(model: DeepMobilityModel, scaler: Scaler, window_len: usize) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            window_len,
            feature_names: crate::dataset::feature_names(),
            scaler,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(format!("model serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: ModelBundle = serde_json::from_str(text).map_err(|e| Error::data(format!("model file: {e}")))?;
        if b.format != MODEL_FORMAT || b.version != MODEL_VERSION {
            return Err(Error::data(format!("unsupported model format {} v{}", b.format, b.version)));
        }
        if b.feature_names != crate::dataset::feature_names() {
            return Err(Error::data("model was trained on a different feature layout"));
        }
        b.model.validate()?;
        if !b.scaler.is_fitted() {
            return Err(Error::data("model file carries an unfitted scaler"));
        }
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Result of [`fit_bundle`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub bundle: ModelBundle,
    pub history: Vec<EpochStats>,
    pub n_train: usize,
    pub n_val: usize,
}

/// Full training pipeline over labelled records: windows, seeded split,
/// scaler fitted on the training side only, model init and training.
///
/// `seed` drives the split and the weight init; the shuffle order comes
/// from `training.optimizer.seed`.
pub fn fit_bundle(
    records: &[KpiRecord],
    training: &TrainingConfig,
    model_cfg: &ModelConfig,
    seed: u64,
) -> Result<FitOutcome> {
    let windows = make_windows(records, training.window_len);
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let (train_w, val_w) = split(&windows, training.val_fraction, seed)?;
    let scaler = fit_scaler(train_w.iter().flatten())?;
    let train_set = build_samples(&train_w, &scaler)?;
    let val_set = build_samples(&val_w, &scaler)?;
    let mut model = DeepMobilityModel::new(model_cfg, SEQ_DIM, STATIC_DIM, N_CLASSES, &mut ChaCha8Rng::seed_from_u64(seed));
    let history = train(&mut model, &train_set, &val_set, &training.optimizer)?;
    Ok(FitOutcome {
        bundle: ModelBundle::new(model, scaler, training.window_len),
        history,
        n_train: train_set.len(),
        n_val: val_set.len(),
    })
}

/// One decision as logged during a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogRow {
    pub t: f64,
    pub ue_id: u32,
    pub decision: Decision,
}

pub const DECISION_LOG_HEADER: &str =
    "t,ue_id,action,reason,score_stay,score_1,score_2,score_3,score_4,vetoed_mask";

pub fn write_decision_log_to<W: Write>(rows: &[DecisionLogRow], mut out: W) -> Result<()> {
    writeln!(out, "{DECISION_LOG_HEADER}")?;
    for r in rows {
        let d = &r.decision;
        let action = match d.action {
            Action::Stay => "stay".to_string(),
            Action::HandOver(s) => format!("handover_{s}"),
        };
        write!(out, "{:.3},{},{},{}", r.t, r.ue_id, action, d.reason.label())?;
        for s in d.scores {
            write!(out, ",{s:.6}")?;
        }
        writeln!(out, ",{}", d.vetoed_mask)?;
    }
    Ok(())
}

pub fn write_decision_log(rows: &[DecisionLogRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_decision_log_to(rows, &mut w)?;
    w.flush()?;
    Ok(())
}
