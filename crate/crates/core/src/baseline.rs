//! Classical network-controlled A3 handover: a per-neighbor time-to-trigger
//! timer armed while `neighbor > serving + HOM`, with HOM = A3 offset +
//! hysteresis. Also holds radio link failure detection and the handover
//! event log types shared by every policy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::CellId;
use crate::{Error, Result};

/// Which measured quantity the A3 comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerQuantity {
    #[default]
    Rsrp,
    Rsrq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandoverConfig {
    pub a3_offset_db: f64,
    pub hysteresis_db: f64,
    pub ttt_ms: u32,
    pub tick_ms: u32,
    pub min_time_between_ho_s: f64,
    pub trigger_quantity: TriggerQuantity,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            a3_offset_db: 2.0,
            hysteresis_db: 1.0,
            ttt_ms: 480,
            tick_ms: 120,
            min_time_between_ho_s: 1.0,
            trigger_quantity: TriggerQuantity::Rsrp,
        }
    }
}

impl HandoverConfig {
    /// Effective handover margin.
    pub fn hom_db(&self) -> f64 {
        self.a3_offset_db + self.hysteresis_db
    }

    pub fn validate(&self) -> Result<()> {
        if self.tick_ms == 0 {
            return Err(Error::config("tick_ms must be > 0"));
        }
        if !self.ttt_ms.is_multiple_of(self.tick_ms) {
            return Err(Error::config(format!(
                "ttt_ms {} is not a multiple of tick_ms {}",
                self.ttt_ms, self.tick_ms
            )));
        }
        if !(self.a3_offset_db >= 0.0 && self.hysteresis_db >= 0.0 && self.min_time_between_ho_s >= 0.0) {
            return Err(Error::config("handover offsets and min_time_between_ho_s must be >= 0"));
        }
        Ok(())
    }
}

/// TTT timers of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct A3State {
    pub timers_ms: BTreeMap<CellId, u32>,
    pub last_ho_time: f64,
}

impl Default for A3State {
    fn default() -> Self {
        Self { timers_ms: BTreeMap::new(), last_ho_time: f64::NEG_INFINITY }
    }
}

/// Slack for comparing tick-derived float timestamps.
const TIME_EPS: f64 = 1e-9;

/// One A3 evaluation; call once per tick in tick order.
///
/// Neighbors absent from `neighbors` lose their timer. A neighbor is a
/// candidate once its timer has reached `ttt_ms` while the entering
/// condition still holds; the best candidate (highest level, then lowest id)
/// is returned if the rate limit allows, after which all timers reset.
pub fn a3_update(
    state: &mut A3State,
    serving: f64,
    neighbors: &[(CellId, f64)],
    cfg: &HandoverConfig,
    t: f64,
) -> Option<CellId> {
    let threshold = serving + cfg.hom_db();
    let mut timers = BTreeMap::new();
    let mut best: Option<(CellId, f64)> = None;
    for &(id, level) in neighbors {
        if level > threshold {
            let prev = state.timers_ms.get(&id).copied().unwrap_or(0);
            let timer = (prev + cfg.tick_ms).min(cfg.ttt_ms);
            timers.insert(id, timer);
            if timer >= cfg.ttt_ms {
                let better = match best {
                    None => true,
                    Some((bid, blevel)) => level > blevel || (level == blevel && id < bid),
                };
                if better {
                    best = Some((id, level));
                }
            }
        }
    }
    state.timers_ms = timers;
    let (target, _) = best?;
    if t - state.last_ho_time + TIME_EPS < cfg.min_time_between_ho_s {
        return None;
    }
    state.timers_ms.clear();
    state.last_ho_time = t;
    Some(target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlfConfig {
    pub qout_db: f64,
    pub qout_duration_ms: u32,
}

impl Default for RlfConfig {
    fn default() -> Self {
        Self { qout_db: -8.0, qout_duration_ms: 1000 }
    }
}

/// True iff the most recent samples stayed below `qout_db` for at least
/// `qout_duration_ms` (inclusive). `history` is sampled every `tick_ms`.
pub fn rlf_check(history: &[f64], qout_db: f64, qout_duration_ms: u32, tick_ms: u32) -> bool {
    let needed = qout_duration_ms.div_ceil(tick_ms.max(1)).max(1) as usize;
    history.len() >= needed && history[history.len() - needed..].iter().all(|&s| s < qout_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandoverCause {
    A3,
    Engine,
    Greedy,
    RlfRecovery,
}

impl HandoverCause {
    pub fn label(self) -> &'static str {
        match self {
            HandoverCause::A3 => "A3",
            HandoverCause::Engine => "Engine",
            HandoverCause::Greedy => "Greedy",
            HandoverCause::RlfRecovery => "RlfRecovery",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandoverOutcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub t: f64,
    pub ue_id: u32,
    pub from_cell: CellId,
    pub to_cell: CellId,
    pub cause: HandoverCause,
    pub outcome: HandoverOutcome,
}
