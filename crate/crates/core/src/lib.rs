//! Fixed-point model of a greenhouse fan-cooling loop.
//!
//! The crate is `no_std` (it needs `alloc` for scenario event lists and run
//! logs) and contains no I/O. It covers:
//!
//! - [`signal`]: converter and transducer models (12-bit ADC, TMP36,
//!   setpoint potentiometer, light channel, PWM duty) plus single-shot reads
//!   with a 10 ms timeout,
//! - [`pid`]: the integer PID with conditional-integration anti-windup and
//!   Smart Idle,
//! - [`safety`]: the ±5.0°C alarm supervisor,
//! - [`plant`]: a first-order thermal plant integrated in micro-degrees,
//! - [`engine`], [`scenario`], [`metrics`]: the 10 Hz closed loop, the
//!   scripted experiments and their performance figures.
//!
//! Temperatures are [`DeciCelsius`] (tenths of a degree) everywhere in the
//! loop, duty is a PWM compare value out of 40 000.
//!
//! ```
//! use thermoloop_core::{run_scenario, scenario, LoopConfig};
//!
//! let s = scenario::step_response();
//! let out = run_scenario(&LoopConfig::for_scenario(&s), &s).unwrap();
//! assert_eq!(out.records.len(), 600);
//! assert_eq!(out.metrics.response_latency_cycles, Some(1));
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod engine;
pub mod metrics;
pub mod pid;
pub mod plant;
pub mod safety;
pub mod scenario;
pub mod signal;

pub use engine::{run_scenario, Engine, EngineError, LoopConfig, RunOutput, TelemetryRecord};
pub use metrics::{compute_metrics, RunMetrics};
pub use pid::{PidController, PidGains, PidOutput, PidState};
pub use plant::{MicroCelsius, Plant, PlantParams, PlantState, Rate};
pub use safety::{Mode, SafetyConfig, SafetyState};
pub use scenario::{Event, Scenario, ScenarioError, TimedEvent};
pub use signal::{AdcCode, Channel, DeciCelsius, DutyCounts, Fraction};
