//! Control-panel state: knob, genre switch, when toggle and the crank.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{pot_to_wackiness, Genre, MillSettings, WhenSetting, POT_MAX};

/// Crank rotation that counts as one milling.
pub const CRANK_TRIGGER_DEG: f64 = 360.0;
/// Largest rotation a single crank event may report, either direction.
pub const MAX_CRANK_DELTA: i64 = 360;

pub fn crank_idle_reset() -> Duration {
    Duration::seconds(5)
}

pub fn switch_debounce() -> Duration {
    Duration::milliseconds(30)
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid {kind:?} event value {value}")]
pub struct InvalidEvent {
    pub kind: EventKind,
    pub value: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Pot,
    Switch,
    Toggle,
    Crank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEvent {
    pub kind: EventKind,
    /// Pot raw reading, switch position, toggle index, or signed crank degrees.
    pub value: i64,
    pub at: DateTime<Utc>,
}

impl InputEvent {
    pub fn new(kind: EventKind, value: i64, at: DateTime<Utc>) -> Self {
        Self { kind, value, at }
    }

    pub fn validate(&self) -> Result<(), InvalidEvent> {
        let ok = match self.kind {
            EventKind::Pot => (0..=i64::from(POT_MAX)).contains(&self.value),
            EventKind::Switch => (1..=12).contains(&self.value),
            EventKind::Toggle => (0..=2).contains(&self.value),
            EventKind::Crank => (-MAX_CRANK_DELTA..=MAX_CRANK_DELTA).contains(&self.value),
        };
        if ok {
            Ok(())
        } else {
            Err(InvalidEvent {
                kind: self.kind,
                value: self.value,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelState {
    pub pot_raw: u16,
    pub switch_pos: u8,
    pub toggle_pos: WhenSetting,
    pub crank_accum_deg: f64,
    pub last_crank_event: Option<DateTime<Utc>>,
    pub last_switch_event: Option<DateTime<Utc>>,
}

impl Default for PanelState {
    fn default() -> Self {
        Self {
            pot_raw: 0,
            switch_pos: 1,
            toggle_pos: WhenSetting::Present,
            crank_accum_deg: 0.0,
            last_crank_event: None,
            last_switch_event: None,
        }
    }
}

impl PanelState {
    /// Applies one event. Returns true when the crank completes a milling.
    pub fn apply_event(&mut self, event: &InputEvent) -> Result<bool, InvalidEvent> {
        event.validate()?;
        match event.kind {
            EventKind::Pot => self.pot_raw = event.value as u16,
            EventKind::Toggle => {
                self.toggle_pos = WhenSetting::from_index(event.value as u8).expect("validated")
            }
            EventKind::Switch => {
                let bouncing = self
                    .last_switch_event
                    .is_some_and(|last| event.at - last < switch_debounce());
                self.last_switch_event = Some(event.at);
                if !bouncing {
                    self.switch_pos = event.value as u8;
                }
            }
            EventKind::Crank => {
                let delta = event.value.max(0) as f64;
                let continuing = self
                    .last_crank_event
                    .is_some_and(|last| event.at - last <= crank_idle_reset());
                self.crank_accum_deg = if continuing { self.crank_accum_deg + delta } else { delta };
                self.last_crank_event = Some(event.at);
                if self.crank_accum_deg >= CRANK_TRIGGER_DEG {
                    self.crank_accum_deg = 0.0;
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Accumulated crank rotation as seen at `now`, zero once idle.
    pub fn crank_deg_at(&self, now: DateTime<Utc>) -> f64 {
        match self.last_crank_event {
            Some(last) if now - last <= crank_idle_reset() => self.crank_accum_deg,
            _ => 0.0,
        }
    }

    pub fn current_settings(&self) -> MillSettings {
        MillSettings {
            wackiness: pot_to_wackiness(i64::from(self.pot_raw)).expect("pot reading in range"),
            genre: Genre::from_position(self.switch_pos).expect("switch position in range"),
            when: self.toggle_pos,
        }
    }
}
