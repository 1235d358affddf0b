//! Operator commands for a live session, exchanged as JSON objects tagged by `type`:
//!
//! ```text
//! {"type":"set_setpoint_deci","value":200}
//! {"type":"set_setpoint_code","value":2048}
//! {"type":"disturbance","on":true}
//! {"type":"set_gains","kp":2500,"ki":10,"kd":500}
//! {"type":"pause"}  {"type":"resume"}  {"type":"reset"}
//! ```

use serde::{Deserialize, Serialize};
use thermoloop_core::signal::{SETPOINT_MAX, SETPOINT_MIN};
use thermoloop_core::{AdcCode, Channel, DeciCelsius, PidGains};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandMessage {
    SetSetpointDeci(DeciCelsius),
    SetSetpointCode(AdcCode),
    Disturbance(bool),
    SetGains(PidGains),
    Pause,
    Resume,
    /// Clears the controller's integral and derivative memory.
    Reset,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Wire {
    SetSetpointDeci { value: i64 },
    SetSetpointCode { value: i64 },
    Disturbance { on: bool },
    SetGains { kp: i64, ki: i64, kd: i64 },
    Pause {},
    Resume {},
    Reset {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    OutOfRange,
    SessionClosed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct CommandError {
    pub code: ErrorCode,
    pub message: String,
}

impl CommandError {
    fn out_of_range(message: String) -> Self {
        CommandError {
            code: ErrorCode::OutOfRange,
            message,
        }
    }
}

fn gain(name: &str, v: i64) -> Result<u32, CommandError> {
    u32::try_from(v).map_err(|_| CommandError::out_of_range(format!("{name} must be in 0..={}, got {v}", u32::MAX)))
}

pub fn parse_command(json: &str) -> Result<CommandMessage, CommandError> {
    let wire: Wire = serde_json::from_str(json).map_err(|e| CommandError {
        code: ErrorCode::Malformed,
        message: e.to_string(),
    })?;
    Ok(match wire {
        Wire::SetSetpointDeci { value } => {
            if value < SETPOINT_MIN.get() as i64 || value > SETPOINT_MAX.get() as i64 {
                return Err(CommandError::out_of_range(format!(
                    "setpoint {value} outside {}..={} deci-degrees",
                    SETPOINT_MIN.get(),
                    SETPOINT_MAX.get()
                )));
            }
            CommandMessage::SetSetpointDeci(DeciCelsius(value as i32))
        }
        Wire::SetSetpointCode { value } => {
            let code = u16::try_from(value)
                .ok()
                .and_then(|c| AdcCode::new(c, Channel::Setpoint).ok())
                .ok_or_else(|| CommandError::out_of_range(format!("code {value} outside 0..=4095")))?;
            CommandMessage::SetSetpointCode(code)
        }
        Wire::Disturbance { on } => CommandMessage::Disturbance(on),
        Wire::SetGains { kp, ki, kd } => {
            CommandMessage::SetGains(PidGains::new(gain("kp", kp)?, gain("ki", ki)?, gain("kd", kd)?))
        }
        Wire::Pause {} => CommandMessage::Pause,
        Wire::Resume {} => CommandMessage::Resume,
        Wire::Reset {} => CommandMessage::Reset,
    })
}

impl CommandMessage {
    pub fn to_json(&self) -> String {
        let wire = match *self {
            CommandMessage::SetSetpointDeci(t) => Wire::SetSetpointDeci { value: t.get() as i64 },
            CommandMessage::SetSetpointCode(c) => Wire::SetSetpointCode { value: c.code() as i64 },
            CommandMessage::Disturbance(on) => Wire::Disturbance { on },
            CommandMessage::SetGains(g) => Wire::SetGains {
                kp: g.kp as i64,
                ki: g.ki as i64,
                kd: g.kd as i64,
            },
            CommandMessage::Pause => Wire::Pause {},
            CommandMessage::Resume => Wire::Resume {},
            CommandMessage::Reset => Wire::Reset {},
        };
        serde_json::to_string(&wire).expect("command serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let cases = [
            (
                r#"{"type":"set_setpoint_deci","value":200}"#,
                CommandMessage::SetSetpointDeci(DeciCelsius(200)),
            ),
            (
                r#"{"type":"set_setpoint_code","value":2048}"#,
                CommandMessage::SetSetpointCode(AdcCode::new(2048, Channel::Setpoint).unwrap()),
            ),
            (r#"{"type":"disturbance","on":true}"#, CommandMessage::Disturbance(true)),
            (
                r#"{"type":"set_gains","kp":2500,"ki":10,"kd":500}"#,
                CommandMessage::SetGains(PidGains::default()),
            ),
            (r#"{"type":"pause"}"#, CommandMessage::Pause),
            (r#"{"type":"resume"}"#, CommandMessage::Resume),
            (r#"{"type":"reset"}"#, CommandMessage::Reset),
        ];
        for (json, expected) in cases {
            assert_eq!(parse_command(json).unwrap(), expected);
            assert_eq!(parse_command(&expected.to_json()).unwrap(), expected);
        }
    }

    #[test]
    fn range_errors() {
        for json in [
            r#"{"type":"set_setpoint_deci","value":500}"#,
            r#"{"type":"set_setpoint_deci","value":199}"#,
            r#"{"type":"set_setpoint_code","value":4096}"#,
            r#"{"type":"set_setpoint_code","value":-1}"#,
            r#"{"type":"set_gains","kp":-1,"ki":10,"kd":500}"#,
        ] {
            assert_eq!(parse_command(json).unwrap_err().code, ErrorCode::OutOfRange, "{json}");
        }
    }

    #[test]
    fn malformed() {
        for json in [
            "",
            "{",
            r#"{"type":"explode"}"#,
            r#"{"type":"pause","now":true}"#,
            r#"{"type":"disturbance","on":"yes"}"#,
            r#"{"value":200}"#,
        ] {
            assert_eq!(parse_command(json).unwrap_err().code, ErrorCode::Malformed, "{json}");
        }
    }
}
