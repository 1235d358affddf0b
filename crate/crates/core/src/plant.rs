//! First-order lumped thermal model of the sensed air volume.
//!
//! ```text
//! dT/dt = k_passive (T_amb - T) + k_fan * duty (T_amb - T) + [k_src (T_src - T)]
//! ```
//!
//! integrated with explicit Euler on fixed 10 ms substeps. The fan only moves
//! air at ambient temperature across the sensor, so it can never cool below
//! ambient. Temperature is held in micro-degrees and every substep is rounded
//! half up, which keeps trajectories bit-reproducible.

use core::fmt;
use core::time::Duration;

use crate::signal::{div_round_half_up, DeciCelsius, Fraction};

/// Temperature excursion beyond which the model is considered misconfigured.
pub const GUARD_RAIL: MicroCelsius = MicroCelsius(200_000_000);

/// Euler substep length.
pub const DEFAULT_SUBSTEP: Duration = Duration::from_millis(10);

const MICRO_PER_DECI: i64 = 100_000;
const PPM: i128 = 1_000_000;

/// High-resolution plant temperature in millionths of a degree Celsius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MicroCelsius(pub i64);

impl MicroCelsius {
    pub const fn from_deci(t: DeciCelsius) -> Self {
        MicroCelsius(t.get() as i64 * MICRO_PER_DECI)
    }

    pub const fn from_milli(milli: i64) -> Self {
        MicroCelsius(milli * 1000)
    }

    pub const fn get(self) -> i64 {
        self.0
    }

    /// Nearest tenth of a degree, halves rounded up.
    pub const fn round_to_deci(self) -> DeciCelsius {
        DeciCelsius(div_round_half_up(self.0, MICRO_PER_DECI) as i32)
    }

    pub fn to_celsius_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

/// A first-order rate constant in millionths per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct Rate(u32);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub const fn from_micro_per_sec(ppm: u32) -> Self {
        Rate(ppm)
    }

    /// Rounds to the nearest millionth per second. Negative and NaN inputs give `None`.
    pub fn from_per_sec(k: f64) -> Option<Self> {
        let scaled = k * 1e6 + 0.5;
        if scaled.is_nan() || scaled < 0.0 || scaled > u32::MAX as f64 {
            return None;
        }
        Some(Rate(scaled as u32))
    }

    pub const fn micro_per_sec(self) -> u32 {
        self.0
    }

    pub fn per_sec(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantParams {
    pub t_amb: DeciCelsius,
    /// Passive coupling to ambient.
    pub k_passive: Rate,
    /// Additional coupling to ambient at 100% fan duty.
    pub k_fan: Rate,
    /// Coupling to the heat source while the disturbance is applied.
    pub k_src: Rate,
    pub t_src: DeciCelsius,
    pub dt_sub: Duration,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            t_amb: DeciCelsius(250),
            k_passive: Rate(20_000),
            k_fan: Rate(200_000),
            k_src: Rate(500_000),
            t_src: DeciCelsius(400),
            dt_sub: DEFAULT_SUBSTEP,
        }
    }
}

impl PlantParams {
    /// Sum of all rates, in millionths per second.
    pub fn total_rate(&self) -> u64 {
        self.k_passive.0 as u64 + self.k_fan.0 as u64 + self.k_src.0 as u64
    }

    /// Checks `dt_sub * (k_passive + k_fan + k_src) < 0.1` and a nonzero substep.
    pub fn validate(&self) -> Result<(), PlantError> {
        let dt_us = self.dt_sub.as_micros();
        if dt_us == 0 {
            return Err(PlantError::ZeroSubstep);
        }
        // dt[us] * k[ppm/s] < 0.1 * 1e12
        if dt_us * self.total_rate() as u128 >= 100_000_000_000 {
            return Err(PlantError::Unstable);
        }
        for t in [self.t_amb, self.t_src] {
            if MicroCelsius::from_deci(t).0.abs() > GUARD_RAIL.0 {
                return Err(PlantError::GuardRail {
                    temp: MicroCelsius::from_deci(t),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlantState {
    pub temp: MicroCelsius,
    pub disturbance_on: bool,
}

impl PlantState {
    pub fn at(temp: DeciCelsius) -> Self {
        PlantState {
            temp: MicroCelsius::from_deci(temp),
            disturbance_on: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantError {
    /// The temperature left the ±200°C envelope.
    GuardRail {
        temp: MicroCelsius,
    },
    /// The explicit Euler stability bound is violated.
    Unstable,
    ZeroSubstep,
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::GuardRail { temp } => write!(
                f,
                "plant temperature {:.3}°C outside the ±200°C guard rail",
                temp.to_celsius_f64()
            ),
            PlantError::Unstable => {
                f.write_str("substep times total rate must stay below 0.1 for a stable integration")
            }
            PlantError::ZeroSubstep => f.write_str("plant substep must be nonzero"),
        }
    }
}

impl core::error::Error for PlantError {}

/// Advances the plant by one substep of `params.dt_sub` with the fan at `duty`.
pub fn plant_step(state: &PlantState, params: &PlantParams, duty: Fraction) -> Result<PlantState, PlantError> {
    let t = state.temp.0 as i128;
    let amb = MicroCelsius::from_deci(params.t_amb).0 as i128;
    let src = MicroCelsius::from_deci(params.t_src).0 as i128;
    let num = duty.numerator() as i128;
    let den = duty.denominator() as i128;

    let mut flux = params.k_passive.0 as i128 * (amb - t) * den + params.k_fan.0 as i128 * num * (amb - t);
    if state.disturbance_on {
        flux += params.k_src.0 as i128 * (src - t) * den;
    }
    let dt_us = params.dt_sub.as_micros() as i128;
    let delta = round_half_up_i128(dt_us * flux, PPM * PPM * den);

    let next = MicroCelsius((t + delta) as i64);
    if next.0.abs() > GUARD_RAIL.0 {
        return Err(PlantError::GuardRail { temp: next });
    }
    Ok(PlantState { temp: next, ..*state })
}

fn round_half_up_i128(num: i128, den: i128) -> i128 {
    (2 * num + den).div_euclid(2 * den)
}

pub fn set_disturbance(state: &mut PlantState, on: bool) {
    state.disturbance_on = on;
}

/// What the sensor sees: the plant temperature rounded to a tenth of a degree.
pub fn sensed_temperature(state: &PlantState) -> DeciCelsius {
    state.temp.round_to_deci()
}

/// Owned plant with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plant {
    params: PlantParams,
    state: PlantState,
}

impl Plant {
    pub fn new(params: PlantParams, initial: DeciCelsius) -> Result<Self, PlantError> {
        params.validate()?;
        let state = PlantState::at(initial);
        if state.temp.0.abs() > GUARD_RAIL.0 {
            return Err(PlantError::GuardRail { temp: state.temp });
        }
        Ok(Plant { params, state })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn set_disturbance(&mut self, on: bool) {
        set_disturbance(&mut self.state, on);
    }

    pub fn step(&mut self, duty: Fraction) -> Result<(), PlantError> {
        self.state = plant_step(&self.state, &self.params, duty)?;
        Ok(())
    }

    pub fn sensed(&self) -> DeciCelsius {
        sensed_temperature(&self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = PlantParams::default();
        let s = PlantState::at(p.t_amb);
        assert_eq!(plant_step(&s, &p, Fraction::ZERO).unwrap(), s);
        assert_eq!(plant_step(&s, &p, Fraction::ONE).unwrap(), s);
    }

    #[test]
    fn single_substep_cooling() {
        let p = PlantParams::default();
        let s = PlantState::at(DeciCelsius(300));
        let next = plant_step(&s, &p, Fraction::ZERO).unwrap();
        assert_eq!(next.temp, MicroCelsius::from_milli(29_999));
    }

    #[test]
    fn disturbance_toggle() {
        let mut s = PlantState::at(DeciCelsius(250));
        set_disturbance(&mut s, true);
        assert!(s.disturbance_on);
        set_disturbance(&mut s, true);
        assert!(s.disturbance_on);
        set_disturbance(&mut s, false);
        assert!(!s.disturbance_on);
        assert_eq!(s.temp, MicroCelsius::from_deci(DeciCelsius(250)));
    }

    #[test]
    fn sensed_rounding() {
        let sense = |milli| {
            sensed_temperature(&PlantState {
                temp: MicroCelsius::from_milli(milli),
                disturbance_on: false,
            })
            .get()
        };
        assert_eq!(sense(25_000), 250);
        assert_eq!(sense(25_049), 250);
        assert_eq!(sense(25_050), 251);
        assert_eq!(sense(-25_050), -250);
        assert_eq!(sense(-25_051), -251);
    }

    #[test]
    fn stability_bound() {
        let mut p = PlantParams::default();
        assert!(p.validate().is_ok());
        p.k_src = Rate::from_micro_per_sec(9_780_000);
        assert_eq!(p.validate(), Err(PlantError::Unstable));
        p.k_src = Rate::from_micro_per_sec(9_779_999);
        assert!(p.validate().is_ok());
        p.dt_sub = Duration::ZERO;
        assert_eq!(p.validate(), Err(PlantError::ZeroSubstep));
    }

    #[test]
    fn guard_rail_trips() {
        let p = PlantParams::default();
        assert!(matches!(
            Plant::new(p, DeciCelsius(2001)),
            Err(PlantError::GuardRail { .. })
        ));
        let s = PlantState {
            temp: MicroCelsius::from_milli(250_000),
            disturbance_on: false,
        };
        assert!(plant_step(&s, &p, Fraction::ZERO).is_err());
    }

    #[test]
    fn rate_from_float() {
        assert_eq!(Rate::from_per_sec(0.02), Some(Rate::from_micro_per_sec(20_000)));
        assert_eq!(Rate::from_per_sec(-0.1), None);
        assert_eq!(Rate::from_per_sec(f64::NAN), None);
    }
}
