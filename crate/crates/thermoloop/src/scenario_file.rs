//! Line-oriented scenario files.
//!
//! ```text
//! # Experiment A
//! name step_response
//! duration_ms 60000
//! initial_temp_deci 250
//! initial_setpoint_deci 300
//! at 5000 setpoint_deci 200
//! ```
//!
//! Headers may appear in any order before or between events. `name`,
//! `duration_ms` and `initial_temp_deci` are required; `initial_setpoint_deci`
//! defaults to 250. Event lines are `at <t_ms> <event> [arg]` with events
//! `setpoint_deci <deci>`, `setpoint_code <code>`, `disturbance_on`,
//! `disturbance_off`, `adc_fault_on <channel>` and `adc_fault_off <channel>`,
//! where a channel is `temperature`, `setpoint` or `light`. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use thermoloop_core::scenario::ScenarioError;
use thermoloop_core::{AdcCode, Channel, DeciCelsius, Event, Scenario, TimedEvent};

pub const DEFAULT_INITIAL_SETPOINT: DeciCelsius = DeciCelsius(250);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown event `{name}`")]
    UnknownEvent { line: usize, name: String },
    #[error("line {line}: event at {at_ms} ms is earlier than the previous event at {previous_ms} ms")]
    OutOfOrder { line: usize, at_ms: u64, previous_ms: u64 },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: ScenarioError },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
}

fn channel_name(c: Channel) -> &'static str {
    match c {
        Channel::Temperature => "temperature",
        Channel::Setpoint => "setpoint",
        Channel::Light => "light",
    }
}

fn parse_channel(s: &str) -> Option<Channel> {
    Channel::ALL.into_iter().find(|&c| channel_name(c) == s)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioFileError> {
    let mut name = None;
    let mut duration_ms = None;
    let mut initial_temp = None;
    let mut initial_setpoint = None;
    let mut events = Vec::new();
    let mut event_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let syntax = |message: String| ScenarioFileError::Syntax { line, message };
        let (key, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();

        let set_once = |slot: &mut Option<i64>, what: &str| -> Result<(), ScenarioFileError> {
            if slot.is_some() {
                return Err(syntax(format!("duplicate `{what}` header")));
            }
            *slot = Some(
                rest.parse()
                    .map_err(|_| syntax(format!("`{what}` expects an integer, found {rest:?}")))?,
            );
            Ok(())
        };

        match key {
            "name" => {
                if name.is_some() {
                    return Err(syntax("duplicate `name` header".into()));
                }
                if rest.is_empty() {
                    return Err(syntax("`name` expects a value".into()));
                }
                name = Some(rest.to_owned());
            }
            "duration_ms" => set_once(&mut duration_ms, key)?,
            "initial_temp_deci" => set_once(&mut initial_temp, key)?,
            "initial_setpoint_deci" => set_once(&mut initial_setpoint, key)?,
            "at" => {
                let mut parts = rest.split_whitespace();
                let at_ms: u64 = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| syntax("`at` expects a time in milliseconds".into()))?;
                let event_name = parts.next().ok_or_else(|| syntax("`at` expects an event".into()))?;
                let arg = parts.next();
                if parts.next().is_some() {
                    return Err(syntax("trailing input after event".into()));
                }
                let need_arg = || arg.ok_or_else(|| syntax(format!("`{event_name}` expects an argument")));
                let no_arg = |ev: Event| match arg {
                    Some(a) => Err(syntax(format!("`{event_name}` takes no argument, found {a:?}"))),
                    None => Ok(ev),
                };
                let event = match event_name {
                    "setpoint_deci" => {
                        let a = need_arg()?;
                        let v: i32 = a.parse().map_err(|_| syntax(format!("invalid setpoint {a:?}")))?;
                        Event::SetpointTemp(DeciCelsius(v))
                    }
                    "setpoint_code" => {
                        let a = need_arg()?;
                        let code = a
                            .parse()
                            .ok()
                            .and_then(|c| AdcCode::new(c, Channel::Setpoint).ok())
                            .ok_or_else(|| syntax(format!("invalid 12-bit code {a:?}")))?;
                        Event::SetpointCode(code)
                    }
                    "disturbance_on" => no_arg(Event::DisturbanceOn)?,
                    "disturbance_off" => no_arg(Event::DisturbanceOff)?,
                    "adc_fault_on" | "adc_fault_off" => {
                        let a = need_arg()?;
                        let channel = parse_channel(a).ok_or_else(|| syntax(format!("unknown channel {a:?}")))?;
                        Event::AdcFault {
                            channel,
                            on: event_name == "adc_fault_on",
                        }
                    }
                    other => {
                        return Err(ScenarioFileError::UnknownEvent {
                            line,
                            name: other.to_owned(),
                        })
                    }
                };
                if let Some(prev) = events.last().map(|e: &TimedEvent| e.at_ms) {
                    if at_ms < prev {
                        return Err(ScenarioFileError::OutOfOrder {
                            line,
                            at_ms,
                            previous_ms: prev,
                        });
                    }
                }
                events.push(TimedEvent::new(at_ms, event));
                event_lines.push(line);
            }
            other => return Err(syntax(format!("unknown directive `{other}`"))),
        }
    }

    let to_deci = |v: i64, what| {
        i32::try_from(v)
            .map(DeciCelsius)
            .map_err(|_| ScenarioFileError::Syntax {
                line: 0,
                message: format!("`{what}` out of range"),
            })
    };
    let scenario = Scenario {
        name: name.ok_or(ScenarioFileError::MissingHeader("name"))?,
        duration_ms: u64::try_from(duration_ms.ok_or(ScenarioFileError::MissingHeader("duration_ms"))?).map_err(
            |_| ScenarioFileError::Syntax {
                line: 0,
                message: "negative duration".into(),
            },
        )?,
        initial_temp: to_deci(
            initial_temp.ok_or(ScenarioFileError::MissingHeader("initial_temp_deci"))?,
            "initial_temp_deci",
        )?,
        initial_setpoint: match initial_setpoint {
            Some(v) => to_deci(v, "initial_setpoint_deci")?,
            None => DEFAULT_INITIAL_SETPOINT,
        },
        events,
    };

    scenario.validate().map_err(|source| {
        let line = match &source {
            ScenarioError::OutOfOrder { index, .. } | ScenarioError::AfterEnd { index, .. } => event_lines[*index],
            ScenarioError::Setpoint(_) => scenario
                .events
                .iter()
                .position(|e| matches!(e.event, Event::SetpointTemp(t) if scenario_setpoint_bad(t)))
                .map_or(0, |i| event_lines[i]),
            ScenarioError::InitialTemp(_) => 0,
        };
        ScenarioFileError::Invalid { line, source }
    })?;
    Ok(scenario)
}

fn scenario_setpoint_bad(t: DeciCelsius) -> bool {
    t < thermoloop_core::signal::SETPOINT_MIN || t > thermoloop_core::signal::SETPOINT_MAX
}

pub fn format_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name {}", s.name);
    let _ = writeln!(out, "duration_ms {}", s.duration_ms);
    let _ = writeln!(out, "initial_temp_deci {}", s.initial_temp.get());
    let _ = writeln!(out, "initial_setpoint_deci {}", s.initial_setpoint.get());
    for ev in &s.events {
        let _ = match ev.event {
            Event::SetpointTemp(t) => writeln!(out, "at {} setpoint_deci {}", ev.at_ms, t.get()),
            Event::SetpointCode(c) => writeln!(out, "at {} setpoint_code {}", ev.at_ms, c.code()),
            Event::DisturbanceOn => writeln!(out, "at {} disturbance_on", ev.at_ms),
            Event::DisturbanceOff => writeln!(out, "at {} disturbance_off", ev.at_ms),
            Event::AdcFault { channel, on } => writeln!(
                out,
                "at {} {} {}",
                ev.at_ms,
                if on { "adc_fault_on" } else { "adc_fault_off" },
                channel_name(channel)
            ),
        };
    }
    out
}
