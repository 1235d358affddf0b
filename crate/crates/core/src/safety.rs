//! Alarm supervisor: compares the instantaneous error against a symmetric
//! threshold. Memoryless, so it may chatter at the boundary.

use crate::signal::DeciCelsius;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Mode {
    Normal,
    Alarm,
}

impl Mode {
    /// Single-character code used on the telemetry line.
    pub const fn as_char(self) -> char {
        match self {
            Mode::Normal => 'N',
            Mode::Alarm => 'A',
        }
    }

    pub const fn from_char(c: char) -> Option<Mode> {
        match c {
            'N' => Some(Mode::Normal),
            'A' => Some(Mode::Alarm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Led {
    Green,
    Red,
}

/// Supervisor output. Only constructible from a [`Mode`], so the LED and
/// buzzer always agree with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SafetyState {
    mode: Mode,
}

impl SafetyState {
    pub const NORMAL: SafetyState = SafetyState { mode: Mode::Normal };
    pub const ALARM: SafetyState = SafetyState { mode: Mode::Alarm };

    pub const fn from_mode(mode: Mode) -> Self {
        SafetyState { mode }
    }

    pub const fn mode(self) -> Mode {
        self.mode
    }

    pub const fn is_alarm(self) -> bool {
        matches!(self.mode, Mode::Alarm)
    }

    pub const fn led(self) -> Led {
        match self.mode {
            Mode::Normal => Led::Green,
            Mode::Alarm => Led::Red,
        }
    }

    pub const fn buzzer_on(self) -> bool {
        self.is_alarm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SafetyConfig {
    threshold: DeciCelsius,
}

impl SafetyConfig {
    /// Returns `None` for a non-positive threshold.
    pub const fn new(threshold: DeciCelsius) -> Option<Self> {
        if threshold.get() > 0 {
            Some(SafetyConfig { threshold })
        } else {
            None
        }
    }

    pub const fn threshold(&self) -> DeciCelsius {
        self.threshold
    }
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            threshold: DeciCelsius(50),
        }
    }
}

/// Alarm when `|error|` strictly exceeds the threshold.
pub fn classify(error: DeciCelsius, cfg: &SafetyConfig) -> SafetyState {
    if error.get().unsigned_abs() > cfg.threshold.get().unsigned_abs() {
        SafetyState::ALARM
    } else {
        SafetyState::NORMAL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let cfg = SafetyConfig::default();
        let n = classify(DeciCelsius(0), &cfg);
        assert_eq!((n.mode(), n.led(), n.buzzer_on()), (Mode::Normal, Led::Green, false));
        for e in [51, -51] {
            let a = classify(DeciCelsius(e), &cfg);
            assert_eq!((a.mode(), a.led(), a.buzzer_on()), (Mode::Alarm, Led::Red, true));
        }
        assert_eq!(classify(DeciCelsius(50), &cfg), SafetyState::NORMAL);
        assert_eq!(classify(DeciCelsius(-50), &cfg), SafetyState::NORMAL);
    }

    #[test]
    fn symmetric_over_window() {
        let cfg = SafetyConfig::default();
        for e in -600..=600 {
            assert_eq!(classify(DeciCelsius(e), &cfg), classify(DeciCelsius(-e), &cfg));
        }
    }

    #[test]
    fn extreme_errors_do_not_overflow() {
        let cfg = SafetyConfig::default();
        assert!(classify(DeciCelsius(i32::MIN), &cfg).is_alarm());
        assert!(classify(DeciCelsius(i32::MAX), &cfg).is_alarm());
    }

    #[test]
    fn config_rejects_non_positive_threshold() {
        assert!(SafetyConfig::new(DeciCelsius(0)).is_none());
        assert!(SafetyConfig::new(DeciCelsius(-5)).is_none());
        assert_eq!(SafetyConfig::new(DeciCelsius(30)).unwrap().threshold().get(), 30);
    }

    #[test]
    fn mode_chars() {
        for m in [Mode::Normal, Mode::Alarm] {
            assert_eq!(Mode::from_char(m.as_char()), Some(m));
        }
        assert_eq!(Mode::from_char('x'), None);
    }
}
