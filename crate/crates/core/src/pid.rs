//! Integer PID with conditional-integration anti-windup and Smart Idle.
//!
//! Error is measured in deci-degrees with the cooling sign convention
//! (`current - setpoint`, positive means too hot), and the output is a PWM
//! compare value. The integral is a plain per-cycle sum; the loop period is
//! folded into `ki`.

use crate::signal::{DeciCelsius, DutyCounts, PWM_PERIOD_COUNTS};

/// Proportional, integral and derivative gains in PWM counts per deci-degree
/// (the integral gain per deci-degree-cycle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PidGains {
    pub kp: u32,
    pub ki: u32,
    pub kd: u32,
}

impl PidGains {
    pub const fn new(kp: u32, ki: u32, kd: u32) -> Self {
        PidGains { kp, ki, kd }
    }
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: 2500,
            ki: 10,
            kd: 500,
        }
    }
}

/// Controller memory carried between cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PidState {
    /// Sum of committed errors, in deci-degree cycles.
    pub integral_acc: i64,
    pub last_error: DeciCelsius,
    pub last_output: DutyCounts,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = PidState::default();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PidOutput {
    pub duty: DutyCounts,
    /// The raw law fell outside the PWM range and was clamped.
    pub saturated: bool,
    /// Smart Idle cut the output because the error was negative.
    pub idle: bool,
    /// Raw control law before clamping. Zero on idle cycles.
    pub unclamped: i64,
}

/// `current - setpoint`.
pub fn compute_error(current: DeciCelsius, setpoint: DeciCelsius) -> DeciCelsius {
    current - setpoint
}

/// The raw law `kp*e + ki*acc + kd*(e - prev)`.
pub fn control_law(gains: &PidGains, error: i64, acc: i64, last_error: i64) -> i64 {
    gains.kp as i64 * error + gains.ki as i64 * acc + gains.kd as i64 * (error - last_error)
}

/// Advances the controller by one cycle.
///
/// A negative error switches the fan off and clears the integral. Otherwise
/// the candidate accumulator is committed only when the raw output it
/// produces fits inside the PWM range, so the accumulator never holds
/// authority the actuator cannot deliver.
pub fn pid_step(state: &mut PidState, gains: &PidGains, error: DeciCelsius) -> PidOutput {
    let e = error.get() as i64;

    if e < 0 {
        state.integral_acc = 0;
        state.last_error = error;
        state.last_output = DutyCounts::ZERO;
        return PidOutput {
            duty: DutyCounts::ZERO,
            saturated: false,
            idle: true,
            unclamped: 0,
        };
    }

    let candidate = state.integral_acc + e;
    let raw = control_law(gains, e, candidate, state.last_error.get() as i64);
    let saturated = !(0..=PWM_PERIOD_COUNTS as i64).contains(&raw);
    if !saturated {
        state.integral_acc = candidate;
    }
    let duty = DutyCounts::saturating_from(raw);

    state.last_error = error;
    state.last_output = duty;
    PidOutput {
        duty,
        saturated,
        idle: false,
        unclamped: raw,
    }
}

/// A [`PidState`] bundled with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PidController {
    pub gains: PidGains,
    pub state: PidState,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        PidController {
            gains,
            state: PidState::default(),
        }
    }

    pub fn step(&mut self, error: DeciCelsius) -> PidOutput {
        pid_step(&mut self.state, &self.gains, error)
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }
}
