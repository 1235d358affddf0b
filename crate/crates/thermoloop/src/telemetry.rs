//! Telemetry line format.
//!
//! One record per line, comma separated, decimal integers:
//!
//! ```text
//! t_ms,t_set,t_curr,err,duty,light,state,fault
//! 5000,200,249,49,40000,2831,N,0
//! ```
//!
//! `state` is `N` (normal) or `A` (alarm), `fault` is `0` or `1`. A line never
//! exceeds 96 bytes, which is what a 9600 baud 8-N-1 link carries in one
//! 100 ms cycle.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thermoloop_core::safety::Mode;
use thermoloop_core::{AdcCode, Channel, DeciCelsius, DutyCounts, SafetyState, TelemetryRecord};

pub const CSV_HEADER: &str = "t_ms,t_set,t_curr,err,duty,light,state,fault";

/// Bytes per line a 9600 baud 8-N-1 link can move in 100 ms.
pub const MAX_LINE_BYTES: usize = 96;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TelemetryError {
    #[error("expected 8 fields, found {0}")]
    FieldCount(usize),
    #[error("field `{field}`: invalid integer {value:?}")]
    Integer { field: &'static str, value: String },
    #[error("field `{field}`: value {value} out of range")]
    Range { field: &'static str, value: i128 },
    #[error("state must be N or A, found {0:?}")]
    State(String),
    #[error("fault must be 0 or 1, found {0:?}")]
    Fault(String),
    #[error("err {err} does not equal t_curr - t_set ({expected})")]
    Inconsistent { err: i32, expected: i32 },
    #[error("line is {0} bytes, over the {MAX_LINE_BYTES}-byte budget")]
    TooLong(usize),
}

/// Formats one record, newline included.
pub fn format_line(r: &TelemetryRecord) -> String {
    let line = format!(
        "{},{},{},{},{},{},{},{}\n",
        r.t_ms,
        r.t_set.get(),
        r.t_curr.get(),
        r.error.get(),
        r.duty.get(),
        r.light.code(),
        r.state.mode().as_char(),
        u8::from(r.adc_fault),
    );
    assert!(line.len() <= MAX_LINE_BYTES, "telemetry line over budget: {line:?}");
    line
}

fn int<T: TryFrom<i128>>(field: &'static str, s: &str) -> Result<T, TelemetryError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(TelemetryError::Integer {
            field,
            value: s.to_owned(),
        });
    }
    let v: i128 = s.parse().map_err(|_| TelemetryError::Integer {
        field,
        value: s.to_owned(),
    })?;
    T::try_from(v).map_err(|_| TelemetryError::Range { field, value: v })
}

/// Parses one line, with or without its trailing newline.
pub fn parse_line(line: &str) -> Result<TelemetryRecord, TelemetryError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(TelemetryError::TooLong(line.len()));
    }
    let line = line.strip_suffix('\n').unwrap_or(line);
    let fields: Vec<&str> = line.split(',').collect();
    let [t_ms, t_set, t_curr, err, duty, light, state, fault] = fields[..] else {
        return Err(TelemetryError::FieldCount(fields.len()));
    };

    let t_set = DeciCelsius(int("t_set", t_set)?);
    let t_curr = DeciCelsius(int("t_curr", t_curr)?);
    let error = DeciCelsius(int("err", err)?);
    let expected = t_curr.get().checked_sub(t_set.get());
    if expected != Some(error.get()) {
        return Err(TelemetryError::Inconsistent {
            err: error.get(),
            expected: expected.unwrap_or(0),
        });
    }
    let duty_raw: u32 = int("duty", duty)?;
    let duty = DutyCounts::new(duty_raw).map_err(|_| TelemetryError::Range {
        field: "duty",
        value: duty_raw.into(),
    })?;
    let light_raw: u16 = int("light", light)?;
    let light = AdcCode::new(light_raw, Channel::Light).map_err(|_| TelemetryError::Range {
        field: "light",
        value: light_raw.into(),
    })?;
    let mode = match state.as_bytes() {
        [c] => Mode::from_char(*c as char),
        _ => None,
    }
    .ok_or_else(|| TelemetryError::State(state.to_owned()))?;
    let adc_fault = match fault {
        "0" => false,
        "1" => true,
        other => return Err(TelemetryError::Fault(other.to_owned())),
    };

    Ok(TelemetryRecord {
        t_ms: int("t_ms", t_ms)?,
        t_set,
        t_curr,
        error,
        duty,
        light,
        state: SafetyState::from_mode(mode),
        adc_fault,
    })
}

/// Writes the header line followed by one line per record.
pub fn write_csv<W: Write>(mut w: W, records: &[TelemetryRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        w.write_all(format_line(r).as_bytes())?;
    }
    w.flush()
}

/// JSON form of a record, as written to JSONL logs and pushed on the live stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub t_ms: u64,
    pub t_set: i32,
    pub t_curr: i32,
    pub err: i32,
    pub duty: u32,
    pub light: u16,
    pub state: char,
    pub fault: bool,
    /// Set on frames repeated while the live session is paused.
    #[serde(default)]
    pub paused: bool,
}

impl Frame {
    pub fn new(r: &TelemetryRecord, paused: bool) -> Self {
        Frame {
            t_ms: r.t_ms,
            t_set: r.t_set.get(),
            t_curr: r.t_curr.get(),
            err: r.error.get(),
            duty: r.duty.get(),
            light: r.light.code(),
            state: r.state.mode().as_char(),
            fault: r.adc_fault,
            paused,
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("frame serializes");
        s.push('\n');
        s
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[TelemetryRecord]) -> io::Result<()> {
    for r in records {
        w.write_all(Frame::new(r, false).to_line().as_bytes())?;
    }
    w.flush()
}
