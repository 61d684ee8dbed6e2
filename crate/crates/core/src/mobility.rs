//! UE movement patterns, from random waypoint to a cyclic daily routine
//! with positional jitter. Every transition is a pure function of the
//! previous state and a seeded random stream.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::network::CellId;
use crate::{Error, Result};

pub const MAX_SPEED_MPS: f64 = 40.0;
pub const DEFAULT_JITTER_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceType {
    #[serde(rename = "PHONE_5G")]
    Phone5g,
    #[serde(rename = "PHONE_4G")]
    Phone4g,
    #[serde(rename = "IOT_STATIONARY")]
    IotStationary,
}

impl DeviceType {
    pub const ALL: [DeviceType; 3] = [DeviceType::Phone5g, DeviceType::Phone4g, DeviceType::IotStationary];

    pub fn index(self) -> usize {
        match self {
            DeviceType::Phone5g => 0,
            DeviceType::Phone4g => 1,
            DeviceType::IotStationary => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DeviceType::Phone5g => "PHONE_5G",
            DeviceType::Phone4g => "PHONE_4G",
            DeviceType::IotStationary => "IOT_STATIONARY",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        DeviceType::ALL.into_iter().find(|d| d.label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub position_m: (f64, f64),
    /// Dwell time at the anchor; `None` dwells forever.
    #[serde(default)]
    pub dwell_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    RandomWaypoint,
    Routine {
        anchors: Vec<Anchor>,
        #[serde(default = "default_jitter")]
        jitter_m: f64,
    },
    Stationary,
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeProfile {
    pub ue_id: u32,
    pub device_type: DeviceType,
    pub qci: u8,
    pub speed_mps: f64,
    pub pattern: Pattern,
    /// Initial position; routine UEs start at their first anchor instead.
    #[serde(default)]
    pub start_m: (f64, f64),
}

impl UeProfile {
    pub fn validate(&self) -> Result<()> {
        let id = self.ue_id;
        if !(1..=9).contains(&self.qci) {
            return Err(Error::config(format!("ue {id}: qci {} outside 1..=9", self.qci)));
        }
        if !(0.0..=MAX_SPEED_MPS).contains(&self.speed_mps) {
            return Err(Error::config(format!(
                "ue {id}: speed_mps {} outside [0, {MAX_SPEED_MPS}]",
                self.speed_mps
            )));
        }
        match &self.pattern {
            Pattern::Routine { anchors, jitter_m } => {
                if anchors.is_empty() {
                    return Err(Error::config(format!("ue {id}: routine needs at least one anchor")));
                }
                if !(*jitter_m >= 0.0) {
                    return Err(Error::config(format!("ue {id}: jitter_m must be >= 0")));
                }
                if anchors.iter().any(|a| a.dwell_s.is_some_and(|d| !(d >= 0.0))) {
                    return Err(Error::config(format!("ue {id}: dwell_s must be >= 0")));
                }
            }
            Pattern::Stationary if self.speed_mps != 0.0 => {
                return Err(Error::config(format!("ue {id}: stationary UE must have speed 0")));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Axis-aligned world rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_m: (f64, f64),
    pub max_m: (f64, f64),
}

impl Bounds {
    pub fn clamp(&self, p: (f64, f64)) -> (f64, f64) {
        (p.0.clamp(self.min_m.0, self.max_m.0), p.1.clamp(self.min_m.1, self.max_m.1))
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        (self.min_m.0..=self.max_m.0).contains(&p.0) && (self.min_m.1..=self.max_m.1).contains(&p.1)
    }
}

/// Pattern-specific progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Waypoint(Option<(f64, f64)>),
    Routine {
        /// Position on the anchor path, before jitter.
        nominal: (f64, f64),
        anchor: usize,
        /// Remaining dwell at `anchor`; `None` while travelling.
        dwell_left_s: Option<f64>,
    },
    Still,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub serving_cell: CellId,
    pub attach_time: f64,
    pub motion: Motion,
}

impl UeState {
    /// State at t = 0, before cell selection.
    pub fn initial(profile: &UeProfile, bounds: &Bounds) -> Self {
        let (position, motion) = match &profile.pattern {
            Pattern::RandomWaypoint => (profile.start_m, Motion::Waypoint(None)),
            Pattern::Routine { anchors, .. } => {
                let p = anchors[0].position_m;
                (
                    p,
                    Motion::Routine {
                        nominal: p,
                        anchor: 0,
                        dwell_left_s: Some(anchors[0].dwell_s.unwrap_or(f64::INFINITY)),
                    },
                )
            }
            Pattern::Stationary => (profile.start_m, Motion::Still),
        };
        Self {
            position: bounds.clamp(position),
            velocity: (0.0, 0.0),
            serving_cell: 0,
            attach_time: 0.0,
            motion,
        }
    }
}

fn toward(from: (f64, f64), to: (f64, f64), dist: f64) -> (f64, f64) {
    let len = (to.0 - from.0).hypot(to.1 - from.1);
    if len <= dist || len == 0.0 {
        to
    } else {
        let k = dist / len;
        (from.0 + (to.0 - from.0) * k, from.1 + (to.1 - from.1) * k)
    }
}

/// Advances one UE by `dt` seconds.
pub fn step<R: Rng + ?Sized>(
    state: &UeState,
    profile: &UeProfile,
    dt: f64,
    bounds: &Bounds,
    rng: &mut R,
) -> UeState {
    let mut next = state.clone();
    match (&profile.pattern, state.motion) {
        (Pattern::RandomWaypoint, Motion::Waypoint(wp)) => {
            let target = wp.unwrap_or_else(|| random_point(bounds, rng));
            let pos = toward(state.position, target, profile.speed_mps * dt);
            next.velocity = ((pos.0 - state.position.0) / dt, (pos.1 - state.position.1) / dt);
            next.position = bounds.clamp(pos);
            let arrived = pos == target;
            next.motion = Motion::Waypoint(if arrived { None } else { Some(target) });
        }
        (Pattern::Routine { anchors, jitter_m }, Motion::Routine { nominal, anchor, dwell_left_s }) => {
            let (nominal_next, anchor, dwell_left_s) =
                routine_advance(anchors, profile.speed_mps, dt, nominal, anchor, dwell_left_s);
            next.velocity = ((nominal_next.0 - nominal.0) / dt, (nominal_next.1 - nominal.1) / dt);
            let jittered = if *jitter_m > 0.0 {
                let n = Normal::new(0.0, *jitter_m).expect("jitter sigma is finite and >= 0");
                (nominal_next.0 + n.sample(rng), nominal_next.1 + n.sample(rng))
            } else {
                nominal_next
            };
            next.position = bounds.clamp(jittered);
            next.motion = Motion::Routine { nominal: nominal_next, anchor, dwell_left_s };
        }
        _ => {
            next.velocity = (0.0, 0.0);
        }
    }
    next
}

fn random_point<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> (f64, f64) {
    (
        rng.random_range(bounds.min_m.0..=bounds.max_m.0),
        rng.random_range(bounds.min_m.1..=bounds.max_m.1),
    )
}

/// Moves along the anchor cycle for `dt` seconds, carrying leftover time
/// across dwell and travel phases.
fn routine_advance(
    anchors: &[Anchor],
    speed: f64,
    dt: f64,
    mut pos: (f64, f64),
    mut anchor: usize,
    mut dwell_left: Option<f64>,
) -> ((f64, f64), usize, Option<f64>) {
    let mut remaining = dt;
    // Bounded: each pass either finishes the step or completes a phase.
    for _ in 0..(4 * anchors.len() + 16) {
        if remaining <= 0.0 {
            break;
        }
        match dwell_left {
            Some(left) => {
                if left > remaining {
                    dwell_left = Some(left - remaining);
                    remaining = 0.0;
                } else {
                    remaining -= left;
                    anchor = (anchor + 1) % anchors.len();
                    dwell_left = None;
                }
            }
            None => {
                let target = anchors[anchor].position_m;
                let dist = (target.0 - pos.0).hypot(target.1 - pos.1);
                if speed <= 0.0 {
                    break;
                }
                let needed = dist / speed;
                if needed <= remaining {
                    pos = target;
                    remaining -= needed;
                    dwell_left = Some(anchors[anchor].dwell_s.unwrap_or(f64::INFINITY));
                } else {
                    pos = toward(pos, target, speed * remaining);
                    remaining = 0.0;
                }
            }
        }
    }
    (pos, anchor, dwell_left)
}

/// Day of week and second of day at simulation time `t`, where `epoch_day`
/// is the weekday (0 = Monday) at t = 0.
pub fn time_context(t: f64, epoch_day: u8) -> (u8, u32) {
    let secs = t.max(0.0).floor() as u64;
    let day = (epoch_day as u64 + secs / 86_400) % 7;
    (day as u8, (secs % 86_400) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> Bounds {
        Bounds { min_m: (-1000.0, -1000.0), max_m: (1000.0, 1000.0) }
    }

    fn profile(pattern: Pattern, speed: f64) -> UeProfile {
        UeProfile { ue_id: 1, device_type: DeviceType::Phone5g, qci: 9, speed_mps: speed, pattern, start_m: (0.0, 0.0) }
    }

    #[test]
    fn stationary_never_moves() {
        let p = profile(Pattern::Stationary, 0.0);
        let mut s = UeState::initial(&p, &bounds());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dt in [0.1, 1.0, 100.0] {
            s = step(&s, &p, dt, &bounds(), &mut rng);
            assert_eq!(s.position, (0.0, 0.0));
        }
    }

    #[test]
    fn waypoint_moves_ten_meters_east() {
        let p = profile(Pattern::RandomWaypoint, 10.0);
        let mut s = UeState::initial(&p, &bounds());
        s.motion = Motion::Waypoint(Some((100.0, 0.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = step(&s, &p, 1.0, &bounds(), &mut rng);
        assert!((s.position.0 - 10.0).abs() < 1e-12);
        assert_eq!(s.position.1, 0.0);
        assert!((s.velocity.0 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn waypoint_arrival_picks_new_target() {
        let p = profile(Pattern::RandomWaypoint, 10.0);
        let mut s = UeState::initial(&p, &bounds());
        s.motion = Motion::Waypoint(Some((5.0, 0.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = step(&s, &p, 1.0, &bounds(), &mut rng);
        assert_eq!(s.position, (5.0, 0.0));
        assert_eq!(s.motion, Motion::Waypoint(None));
    }

    #[test]
    fn routine_single_anchor_stays_near() {
        let anchors = vec![Anchor { position_m: (50.0, -20.0), dwell_s: None }];
        let p = profile(Pattern::Routine { anchors, jitter_m: 5.0 }, 1.5);
        let mut s = UeState::initial(&p, &bounds());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut inside = 0;
        for _ in 0..10_000 {
            s = step(&s, &p, 0.12, &bounds(), &mut rng);
            if (s.position.0 - 50.0).abs() <= 15.0 && (s.position.1 + 20.0).abs() <= 15.0 {
                inside += 1;
            }
        }
        // Per-axis 3σ coverage is 0.9973² ≈ 0.9946.
        assert!(inside as f64 / 10_000.0 >= 0.99, "{inside}");
    }

    #[test]
    fn routine_is_periodic_without_jitter() {
        let anchors = vec![
            Anchor { position_m: (0.0, 0.0), dwell_s: Some(5.0) },
            Anchor { position_m: (100.0, 0.0), dwell_s: Some(3.0) },
        ];
        let p = profile(Pattern::Routine { anchors, jitter_m: 0.0 }, 10.0);
        // Cycle: dwell 5 + travel 10 + dwell 3 + travel 10 = 28 s.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = UeState::initial(&p, &bounds());
        let mut trace = Vec::new();
        for _ in 0..120 {
            s = step(&s, &p, 0.5, &bounds(), &mut rng);
            trace.push(s.position);
        }
        for k in 0..(120 - 56) {
            let (a, b) = (trace[k], trace[k + 56]);
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9, "tick {k}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn positions_are_clamped() {
        let small = Bounds { min_m: (0.0, 0.0), max_m: (10.0, 10.0) };
        let anchors = vec![Anchor { position_m: (0.0, 0.0), dwell_s: None }];
        let p = profile(Pattern::Routine { anchors, jitter_m: 5.0 }, 0.0);
        let mut s = UeState::initial(&p, &small);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            s = step(&s, &p, 1.0, &small, &mut rng);
            assert!(small.contains(s.position));
        }
    }

    #[test]
    fn time_context_examples() {
        assert_eq!(time_context(0.0, 0), (0, 0));
        assert_eq!(time_context(86_400.0, 0), (1, 0));
        assert_eq!(time_context(90_000.7, 6), (0, 3600));
    }

    #[test]
    fn profile_validation() {
        assert!(profile(Pattern::Stationary, 1.0).validate().is_err());
        assert!(profile(Pattern::RandomWaypoint, 41.0).validate().is_err());
        assert!(profile(Pattern::Routine { anchors: vec![], jitter_m: 5.0 }, 1.0).validate().is_err());
        let mut p = profile(Pattern::RandomWaypoint, 3.0);
        p.qci = 0;
        assert!(p.validate().is_err());
    }
}
