//! Transducer and converter models between physical quantities and the
//! controller's integers.
//!
//! Everything here is exact integer arithmetic. Encoding paths (voltage to
//! code) truncate like a SAR converter; decoding paths (code to temperature)
//! round half up.

use core::fmt;
use core::ops::{Add, Neg, Sub};
use core::time::Duration;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ADC reference voltage in microvolts.
pub const ADC_REF_MICROVOLTS: i64 = 3_300_000;
/// Largest 12-bit code.
pub const ADC_MAX_CODE: u16 = 4095;
/// PWM period in timer counts; a compare value of this many counts is 100% duty.
pub const PWM_PERIOD_COUNTS: u32 = 40_000;
/// Wait budget of the single-shot conversion before the read is abandoned.
pub const ADC_TIMEOUT: Duration = Duration::from_millis(10);

/// Lowest temperature the TMP36 path can encode (0 mV at the pin).
pub const TMP36_MIN: DeciCelsius = DeciCelsius(-500);
/// Highest temperature the TMP36 path can encode (3300 mV at the pin).
pub const TMP36_MAX: DeciCelsius = DeciCelsius(2800);

/// Lower end of the potentiometer setpoint span, 20.0°C.
pub const SETPOINT_MIN: DeciCelsius = DeciCelsius(200);
/// Upper end of the potentiometer setpoint span, 40.0°C.
pub const SETPOINT_MAX: DeciCelsius = DeciCelsius(400);

/// Light channel reading in the dark (no IR).
pub const LIGHT_BASELINE_CODE: u16 = 2828;
/// Light channel reading at full IR exposure. The phototransistor pulls the
/// divider down as it conducts, so the code falls with irradiance.
pub const LIGHT_FULL_IR_CODE: u16 = 1228;
/// Peak amplitude of the seeded light-channel noise, in codes.
pub const LIGHT_NOISE_CODES: i32 = 8;

/// Temperature in tenths of a degree Celsius.
///
/// This is the unit of the whole control loop. All arithmetic on it is plain
/// integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct DeciCelsius(pub i32);

impl DeciCelsius {
    pub const ZERO: DeciCelsius = DeciCelsius(0);

    pub const fn new(deci: i32) -> Self {
        DeciCelsius(deci)
    }

    pub const fn get(self) -> i32 {
        self.0
    }

    pub const fn abs(self) -> Self {
        DeciCelsius(self.0.abs())
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for DeciCelsius {
    type Output = DeciCelsius;
    fn add(self, rhs: Self) -> Self {
        DeciCelsius(self.0 + rhs.0)
    }
}

impl Sub for DeciCelsius {
    type Output = DeciCelsius;
    fn sub(self, rhs: Self) -> Self {
        DeciCelsius(self.0 - rhs.0)
    }
}

impl Neg for DeciCelsius {
    type Output = DeciCelsius;
    fn neg(self) -> Self {
        DeciCelsius(-self.0)
    }
}

impl fmt::Display for DeciCelsius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{}{}.{}°C", sign, abs / 10, abs % 10)
    }
}

/// Analog input the converter is sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Channel {
    /// TMP36 on ADC channel 0.
    Temperature,
    /// Setpoint potentiometer on ADC channel 1.
    Setpoint,
    /// Optical sensor, logged only.
    Light,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Temperature, Channel::Setpoint, Channel::Light];

    pub const fn index(self) -> usize {
        match self {
            Channel::Temperature => 0,
            Channel::Setpoint => 1,
            Channel::Light => 2,
        }
    }
}

/// A 12-bit conversion result tagged with the channel it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdcCode {
    code: u16,
    channel: Channel,
}

impl AdcCode {
    pub fn new(code: u16, channel: Channel) -> Result<Self, SignalError> {
        if code > ADC_MAX_CODE {
            return Err(SignalError::CodeOutOfRange { code: code as u32 });
        }
        Ok(AdcCode { code, channel })
    }

    pub const fn code(self) -> u16 {
        self.code
    }

    pub const fn channel(self) -> Channel {
        self.channel
    }
}

/// PWM compare value, `0..=40000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(transparent))]
pub struct DutyCounts(u32);

impl DutyCounts {
    pub const ZERO: DutyCounts = DutyCounts(0);
    pub const FULL: DutyCounts = DutyCounts(PWM_PERIOD_COUNTS);

    pub fn new(counts: u32) -> Result<Self, SignalError> {
        if counts > PWM_PERIOD_COUNTS {
            return Err(SignalError::DutyOutOfRange { counts });
        }
        Ok(DutyCounts(counts))
    }

    /// Clamps an unbounded controller output into the PWM range.
    pub fn saturating_from(raw: i64) -> Self {
        DutyCounts(raw.clamp(0, PWM_PERIOD_COUNTS as i64) as u32)
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    pub const fn is_full(self) -> bool {
        self.0 == PWM_PERIOD_COUNTS
    }
}

/// An exact fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Fraction {
    num: u32,
    den: u32,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    /// Returns `None` unless `den > 0` and `num <= den`.
    pub const fn new(num: u32, den: u32) -> Option<Self> {
        if den == 0 || num > den {
            None
        } else {
            Some(Fraction { num, den })
        }
    }

    pub const fn numerator(self) -> u32 {
        self.num
    }

    pub const fn denominator(self) -> u32 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.num as u64 * other.den as u64 == other.num as u64 * self.den as u64
    }
}

impl Eq for Fraction {}

/// A pin voltage with microvolt resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Voltage {
    microvolts: i64,
}

impl Voltage {
    pub const fn from_millivolts(mv: i32) -> Self {
        Voltage {
            microvolts: mv as i64 * 1000,
        }
    }

    pub const fn from_microvolts(uv: i64) -> Self {
        Voltage { microvolts: uv }
    }

    pub const fn microvolts(self) -> i64 {
        self.microvolts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalError {
    VoltageOutOfRange { microvolts: i64 },
    TemperatureOutOfRange { deci: i32 },
    SetpointOutOfRange { deci: i32 },
    CodeOutOfRange { code: u32 },
    DutyOutOfRange { counts: u32 },
}

impl fmt::Display for SignalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SignalError::VoltageOutOfRange { microvolts } => {
                write!(f, "pin voltage {microvolts} uV outside the 0..3.3 V converter range")
            }
            SignalError::TemperatureOutOfRange { deci } => write!(
                f,
                "temperature {} outside the TMP36 span {}..{}",
                DeciCelsius(deci),
                TMP36_MIN,
                TMP36_MAX
            ),
            SignalError::SetpointOutOfRange { deci } => write!(
                f,
                "setpoint {} outside {}..{}",
                DeciCelsius(deci),
                SETPOINT_MIN,
                SETPOINT_MAX
            ),
            SignalError::CodeOutOfRange { code } => write!(f, "ADC code {code} exceeds 4095"),
            SignalError::DutyOutOfRange { counts } => {
                write!(f, "duty {counts} exceeds the {PWM_PERIOD_COUNTS}-count period")
            }
        }
    }
}

impl core::error::Error for SignalError {}

/// `round(num / den)` with halves rounded up, for `num >= 0`, `den > 0`.
pub(crate) const fn div_round_half_up(num: i64, den: i64) -> i64 {
    (2 * num + den).div_euclid(2 * den)
}

/// 12-bit quantization of a pin voltage: `floor(v * 4096 / 3.3 V)`, clamped to 4095.
pub fn adc_quantize(voltage: Voltage, channel: Channel) -> Result<AdcCode, SignalError> {
    let uv = voltage.microvolts();
    if !(0..=ADC_REF_MICROVOLTS).contains(&uv) {
        return Err(SignalError::VoltageOutOfRange { microvolts: uv });
    }
    let code = (uv * 4096 / ADC_REF_MICROVOLTS).min(ADC_MAX_CODE as i64) as u16;
    Ok(AdcCode { code, channel })
}

/// TMP36 decode. The sensor outputs 500 mV at 0°C and 10 mV/°C, so in
/// millivolts the temperature in deci-degrees is simply `mV - 500`.
pub fn tmp36_code_to_temp(code: AdcCode) -> DeciCelsius {
    let mv = div_round_half_up(code.code as i64 * 3300, 4096);
    DeciCelsius(mv as i32 - 500)
}

/// Inverse of [`tmp36_code_to_temp`], used to feed the plant temperature into the converter.
pub fn temp_to_tmp36_code(temp: DeciCelsius) -> Result<AdcCode, SignalError> {
    if temp < TMP36_MIN || temp > TMP36_MAX {
        return Err(SignalError::TemperatureOutOfRange { deci: temp.0 });
    }
    adc_quantize(Voltage::from_millivolts(temp.0 + 500), Channel::Temperature)
}

/// Maps the potentiometer onto the 20.0..40.0°C setpoint span.
pub fn pot_code_to_setpoint(code: AdcCode) -> DeciCelsius {
    let offset = div_round_half_up(code.code as i64 * 200, ADC_MAX_CODE as i64);
    DeciCelsius(SETPOINT_MIN.0 + offset as i32)
}

/// Lowest potentiometer position that decodes to `setpoint`.
pub fn setpoint_to_pot_code(setpoint: DeciCelsius) -> Result<AdcCode, SignalError> {
    if setpoint < SETPOINT_MIN || setpoint > SETPOINT_MAX {
        return Err(SignalError::SetpointOutOfRange { deci: setpoint.0 });
    }
    // decode is monotone, so the first code reaching the target decodes to it exactly
    let (mut lo, mut hi) = (0u16, ADC_MAX_CODE);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pot_code_to_setpoint(AdcCode {
            code: mid,
            channel: Channel::Setpoint,
        }) < setpoint
        {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(AdcCode {
        code: lo,
        channel: Channel::Setpoint,
    })
}

/// Normalized ambient infrared level in thousandths, `0..=1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct IrLevel(u16);

impl IrLevel {
    pub const DARK: IrLevel = IrLevel(0);
    pub const FULL: IrLevel = IrLevel(1000);

    pub const fn from_permille(permille: u16) -> Option<Self> {
        if permille > 1000 {
            None
        } else {
            Some(IrLevel(permille))
        }
    }

    pub const fn permille(self) -> u16 {
        self.0
    }
}

/// Noise-free light channel reading: linear between the dark baseline and the full-IR code.
pub fn light_channel_level(ir: IrLevel) -> AdcCode {
    let span = LIGHT_BASELINE_CODE as i64 - LIGHT_FULL_IR_CODE as i64;
    let drop = div_round_half_up(span * ir.0 as i64, 1000);
    AdcCode {
        code: (LIGHT_BASELINE_CODE as i64 - drop) as u16,
        channel: Channel::Light,
    }
}

/// Light channel reading with seeded noise of at most ±8 codes.
///
/// The light channel is logged for monitoring; the controller never reads it.
pub fn light_channel_sample(ir: IrLevel, noise_seed: u64) -> AdcCode {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise: i32 = rng.random_range(-LIGHT_NOISE_CODES..=LIGHT_NOISE_CODES);
    let base = light_channel_level(ir).code as i32;
    AdcCode {
        code: (base + noise).clamp(0, ADC_MAX_CODE as i32) as u16,
        channel: Channel::Light,
    }
}

/// `counts / 40000`, exactly.
pub fn duty_to_fraction(duty: DutyCounts) -> Fraction {
    Fraction {
        num: duty.0,
        den: PWM_PERIOD_COUNTS,
    }
}

/// Outcome of one triggered conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdcRead {
    Ready {
        code: AdcCode,
        elapsed: Duration,
    },
    /// The conversion flag never rose within the budget; the wait was abandoned.
    TimedOut {
        elapsed: Duration,
    },
}

impl AdcRead {
    pub fn code(self) -> Option<AdcCode> {
        match self {
            AdcRead::Ready { code, .. } => Some(code),
            AdcRead::TimedOut { .. } => None,
        }
    }

    pub fn elapsed(self) -> Duration {
        match self {
            AdcRead::Ready { elapsed, .. } | AdcRead::TimedOut { elapsed } => elapsed,
        }
    }
}

/// One converter channel in single-shot mode, with hooks for fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcChannelModel {
    pub responsive: bool,
    pub pending_code: AdcCode,
    pub conversion_delay: Duration,
}

impl AdcChannelModel {
    pub fn new(pending_code: AdcCode) -> Self {
        AdcChannelModel {
            responsive: true,
            pending_code,
            conversion_delay: Duration::ZERO,
        }
    }

    pub const fn timeout_budget(&self) -> Duration {
        ADC_TIMEOUT
    }

    /// Triggers one conversion and waits at most [`ADC_TIMEOUT`] of simulated time.
    pub fn read_single_shot(&self) -> AdcRead {
        if self.responsive && self.conversion_delay <= ADC_TIMEOUT {
            AdcRead::Ready {
                code: self.pending_code,
                elapsed: self.conversion_delay,
            }
        } else {
            AdcRead::TimedOut { elapsed: ADC_TIMEOUT }
        }
    }
}
