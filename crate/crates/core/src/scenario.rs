//! Scripted runs: an initial condition plus a time-ordered list of operator
//! and environment events.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::signal::{AdcCode, Channel, DeciCelsius, SignalError, SETPOINT_MAX, SETPOINT_MIN, TMP36_MAX, TMP36_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    /// Turn the potentiometer to a raw position.
    SetpointCode(AdcCode),
    /// Turn the potentiometer to the lowest position that reads as this setpoint.
    SetpointTemp(DeciCelsius),
    DisturbanceOn,
    DisturbanceOff,
    /// Make a converter channel stop (or resume) answering conversions.
    AdcFault {
        channel: Channel,
        on: bool,
    },
}

impl Event {
    pub fn is_setpoint_change(&self) -> bool {
        matches!(self, Event::SetpointCode(_) | Event::SetpointTemp(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedEvent {
    pub at_ms: u64,
    pub event: Event,
}

impl TimedEvent {
    pub const fn new(at_ms: u64, event: Event) -> Self {
        TimedEvent { at_ms, event }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: u64,
    pub initial_temp: DeciCelsius,
    /// Setpoint the potentiometer reads before any event moves it.
    pub initial_setpoint: DeciCelsius,
    pub events: Vec<TimedEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    /// Event at `index` is earlier than its predecessor.
    OutOfOrder {
        index: usize,
        at_ms: u64,
        previous_ms: u64,
    },
    /// Event at `index` is scheduled after the end of the run.
    AfterEnd {
        index: usize,
        at_ms: u64,
    },
    InitialTemp(DeciCelsius),
    Setpoint(SignalError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::OutOfOrder {
                index,
                at_ms,
                previous_ms,
            } => write!(
                f,
                "event {index} at {at_ms} ms precedes the previous event at {previous_ms} ms"
            ),
            ScenarioError::AfterEnd { index, at_ms } => {
                write!(f, "event {index} at {at_ms} ms is after the end of the scenario")
            }
            ScenarioError::InitialTemp(t) => {
                write!(f, "initial temperature {t} outside {TMP36_MIN}..{TMP36_MAX}")
            }
            ScenarioError::Setpoint(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.initial_temp < TMP36_MIN || self.initial_temp > TMP36_MAX {
            return Err(ScenarioError::InitialTemp(self.initial_temp));
        }
        check_setpoint(self.initial_setpoint)?;
        let mut previous_ms = 0;
        for (index, ev) in self.events.iter().enumerate() {
            if ev.at_ms < previous_ms {
                return Err(ScenarioError::OutOfOrder {
                    index,
                    at_ms: ev.at_ms,
                    previous_ms,
                });
            }
            if ev.at_ms > self.duration_ms {
                return Err(ScenarioError::AfterEnd { index, at_ms: ev.at_ms });
            }
            if let Event::SetpointTemp(t) = ev.event {
                check_setpoint(t)?;
            }
            previous_ms = ev.at_ms;
        }
        Ok(())
    }

    /// The first operator setpoint change, if any.
    pub fn first_setpoint_change(&self) -> Option<&TimedEvent> {
        self.events.iter().find(|e| e.event.is_setpoint_change())
    }
}

fn check_setpoint(t: DeciCelsius) -> Result<(), ScenarioError> {
    if t < SETPOINT_MIN || t > SETPOINT_MAX {
        return Err(ScenarioError::Setpoint(SignalError::SetpointOutOfRange {
            deci: t.get(),
        }));
    }
    Ok(())
}

pub const STEP_RESPONSE: &str = "step_response";
pub const DISTURBANCE: &str = "disturbance";
pub const RECOVERY: &str = "recovery";

pub const BUILTIN_NAMES: [&str; 3] = [STEP_RESPONSE, DISTURBANCE, RECOVERY];

/// Room at ambient with the knob at 30.0°C (fan idle); after 5 s the knob
/// drops to 20.0°C to demand full cooling.
pub fn step_response() -> Scenario {
    Scenario {
        name: STEP_RESPONSE.into(),
        duration_ms: 60_000,
        initial_temp: DeciCelsius(250),
        initial_setpoint: DeciCelsius(300),
        events: vec![TimedEvent::new(5_000, Event::SetpointTemp(DeciCelsius(200)))],
    }
}

/// Setpoint held at room temperature; a heat source is applied at 5 s and left on.
pub fn disturbance() -> Scenario {
    Scenario {
        name: DISTURBANCE.into(),
        duration_ms: 120_000,
        initial_temp: DeciCelsius(250),
        initial_setpoint: DeciCelsius(250),
        events: vec![TimedEvent::new(5_000, Event::DisturbanceOn)],
    }
}

/// The disturbance run continued: the heat source is removed at 120 s and the
/// room cools back down.
pub fn recovery() -> Scenario {
    let mut s = disturbance();
    s.name = RECOVERY.into();
    s.duration_ms = 300_000;
    s.events.push(TimedEvent::new(120_000, Event::DisturbanceOff));
    s
}

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        STEP_RESPONSE => Some(step_response()),
        DISTURBANCE => Some(disturbance()),
        RECOVERY => Some(recovery()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_NAMES {
            let s = builtin(name).unwrap();
            assert_eq!(s.name, name);
            s.validate().unwrap();
        }
        assert!(builtin("nosuch").is_none());
    }

    #[test]
    fn step_response_shape() {
        let s = step_response();
        assert_eq!(
            s.events,
            vec![TimedEvent::new(5_000, Event::SetpointTemp(DeciCelsius(200)))]
        );
        assert_eq!(s.duration_ms, 60_000);
        assert_eq!(s.initial_setpoint.get(), 300);
        assert_eq!(s.first_setpoint_change().unwrap().at_ms, 5_000);
    }

    #[test]
    fn recovery_extends_disturbance() {
        let s = recovery();
        assert_eq!(s.duration_ms, 300_000);
        assert!(s.events.contains(&TimedEvent::new(120_000, Event::DisturbanceOff)));
        assert!(s.first_setpoint_change().is_none());
    }

    #[test]
    fn validation_errors() {
        let mut s = step_response();
        s.events.push(TimedEvent::new(1_000, Event::DisturbanceOn));
        assert!(matches!(s.validate(), Err(ScenarioError::OutOfOrder { index: 1, .. })));

        let mut s = step_response();
        s.events.push(TimedEvent::new(60_001, Event::DisturbanceOn));
        assert!(matches!(s.validate(), Err(ScenarioError::AfterEnd { index: 1, .. })));

        let mut s = step_response();
        s.events[0].event = Event::SetpointTemp(DeciCelsius(500));
        assert!(matches!(s.validate(), Err(ScenarioError::Setpoint(_))));

        let mut s = step_response();
        s.initial_temp = DeciCelsius(2801);
        assert!(matches!(s.validate(), Err(ScenarioError::InitialTemp(_))));

        // equal timestamps are fine
        let mut s = disturbance();
        s.events.push(TimedEvent::new(5_000, Event::DisturbanceOff));
        s.validate().unwrap();
    }
}
