//! Closed-loop performance figures computed from a telemetry log.

use crate::engine::{LoopConfig, TelemetryRecord};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    /// Control cycles from the first setpoint change until the duty moves,
    /// counting the cycle that computes the new duty. `None` without a
    /// setpoint change or without a response.
    pub response_latency_cycles: Option<u32>,
    /// Time from the first setpoint change until the end of the first cycle at
    /// 100% duty, or -1 if full duty is never reached.
    pub time_to_full_duty_ms: i64,
    /// How far the temperature fell below the final setpoint after the first
    /// setpoint change (over the whole run without one).
    pub undershoot_deci: u32,
    pub alarm_first_ms: Option<u64>,
    /// Records with a negative error and a nonzero duty.
    pub idle_duty_violations: u32,
    /// Every record beyond the alarm threshold ran the fan at 100%.
    pub saturation_held: bool,
}

pub fn compute_metrics(log: &[TelemetryRecord], scenario: &Scenario, cfg: &LoopConfig) -> RunMetrics {
    let period = cfg.period_ms() as i64;
    let threshold = cfg.safety.threshold().get();

    let change = scenario.first_setpoint_change();
    let event_idx = change.and_then(|ev| log.iter().position(|r| r.t_ms >= ev.at_ms));

    let mut response_latency_cycles = None;
    let mut time_to_full_duty_ms = -1;
    if let (Some(ev), Some(idx)) = (change, event_idx) {
        let before = if idx == 0 { 0 } else { log[idx - 1].duty.get() };
        response_latency_cycles = log[idx..]
            .iter()
            .position(|r| r.duty.get() != before)
            .map(|k| k as u32 + 1);
        if let Some(k) = log[idx..].iter().position(|r| r.duty.is_full()) {
            time_to_full_duty_ms = log[idx + k].t_ms as i64 + period - ev.at_ms as i64;
        }
    }

    let after = match (change, event_idx) {
        (Some(_), Some(idx)) => &log[idx..],
        (Some(_), None) => &log[log.len()..],
        (None, _) => log,
    };
    let undershoot_deci = match (log.last(), after.iter().map(|r| r.t_curr).min()) {
        (Some(last), Some(min)) => (last.t_set.get() - min.get()).max(0) as u32,
        _ => 0,
    };

    RunMetrics {
        response_latency_cycles,
        time_to_full_duty_ms,
        undershoot_deci,
        alarm_first_ms: log.iter().find(|r| r.state.is_alarm()).map(|r| r.t_ms),
        idle_duty_violations: log.iter().filter(|r| r.error.is_negative() && r.duty.get() > 0).count() as u32,
        saturation_held: log
            .iter()
            .filter(|r| r.error.get() > threshold)
            .all(|r| r.duty.is_full()),
    }
}
