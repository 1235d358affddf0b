//! The closed loop: one control cycle every `control_period` of simulated time.
//!
//! Each cycle runs, in order:
//!
//! 1. a single-shot conversion of the temperature, setpoint and light channels
//!    (a timed-out channel reuses its last good code and flags the record),
//! 2. decode of temperature and setpoint,
//! 3. error, PID step and alarm classification,
//! 4. `substeps` plant substeps with the new duty held constant,
//! 5. one [`TelemetryRecord`] stamped with the cycle start time.
//!
//! Events and operator commands are applied between cycles.

use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use crate::metrics::{compute_metrics, RunMetrics};
use crate::pid::{compute_error, PidController, PidGains, PidOutput};
use crate::plant::{Plant, PlantError, PlantParams};
use crate::safety::{classify, SafetyConfig, SafetyState};
use crate::scenario::{Event, Scenario, ScenarioError};
use crate::signal::{
    duty_to_fraction, light_channel_sample, pot_code_to_setpoint, setpoint_to_pot_code, temp_to_tmp36_code,
    tmp36_code_to_temp, AdcChannelModel, AdcCode, AdcRead, Channel, DeciCelsius, DutyCounts, IrLevel, SignalError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopConfig {
    pub control_period: Duration,
    pub substeps: u32,
    pub gains: PidGains,
    pub safety: SafetyConfig,
    pub plant: PlantParams,
    /// Simulated run length for batch runs.
    pub duration: Duration,
    /// Seed of the light-channel noise.
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            control_period: Duration::from_millis(100),
            substeps: 10,
            gains: PidGains::default(),
            safety: SafetyConfig::default(),
            plant: PlantParams::default(),
            duration: Duration::from_secs(60),
            seed: 0,
        }
    }
}

impl LoopConfig {
    /// Default loop settings with the run length taken from `scenario`.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        LoopConfig {
            duration: Duration::from_millis(scenario.duration_ms),
            ..LoopConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.control_period.is_zero() || !self.control_period.subsec_nanos().is_multiple_of(1_000_000) {
            return Err(EngineError::Period);
        }
        if self.plant.dt_sub.checked_mul(self.substeps) != Some(self.control_period) {
            return Err(EngineError::Period);
        }
        self.plant.validate()?;
        Ok(())
    }

    pub fn period_ms(&self) -> u64 {
        self.control_period.as_millis() as u64
    }

    /// Number of control cycles in `duration`, rounded up.
    pub fn cycle_count(&self) -> u64 {
        let period = self.control_period.as_nanos();
        self.duration.as_nanos().div_ceil(period) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TelemetryRecord {
    pub t_ms: u64,
    pub t_set: DeciCelsius,
    pub t_curr: DeciCelsius,
    pub error: DeciCelsius,
    pub duty: DutyCounts,
    pub light: AdcCode,
    pub state: SafetyState,
    /// At least one channel timed out this cycle and its previous code was reused.
    pub adc_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    /// `control_period` is zero, not whole milliseconds, or not `substeps * dt_sub`.
    Period,
    Plant(PlantError),
    Signal(SignalError),
    Scenario(ScenarioError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Period => f.write_str(
                "control period must be a nonzero whole number of milliseconds equal to substeps * plant substep",
            ),
            EngineError::Plant(e) => write!(f, "plant: {e}"),
            EngineError::Signal(e) => write!(f, "signal chain: {e}"),
            EngineError::Scenario(e) => write!(f, "scenario: {e}"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<PlantError> for EngineError {
    fn from(e: PlantError) -> Self {
        EngineError::Plant(e)
    }
}

impl From<SignalError> for EngineError {
    fn from(e: SignalError) -> Self {
        EngineError::Signal(e)
    }
}

impl From<ScenarioError> for EngineError {
    fn from(e: ScenarioError) -> Self {
        EngineError::Scenario(e)
    }
}

/// Mixes the run seed with the cycle index so each light sample gets its own stream.
fn cycle_seed(seed: u64, cycle: u64) -> u64 {
    seed ^ cycle.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Running loop state. Owns the controller, the plant and the converter models.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: LoopConfig,
    pid: PidController,
    plant: Plant,
    adc: [AdcChannelModel; 3],
    last_good: [AdcCode; 3],
    pot: AdcCode,
    ir: IrLevel,
    cycle: u64,
    last_record: Option<TelemetryRecord>,
}

impl Engine {
    pub fn new(cfg: LoopConfig, initial_temp: DeciCelsius, initial_setpoint: DeciCelsius) -> Result<Self, EngineError> {
        cfg.validate()?;
        let plant = Plant::new(cfg.plant, initial_temp)?;
        let pot = setpoint_to_pot_code(initial_setpoint)?;
        let temp_code = temp_to_tmp36_code(plant.sensed())?;
        let light = light_channel_sample(IrLevel::DARK, cycle_seed(cfg.seed, u64::MAX));
        // power-on conversions seed the last-good codes
        let last_good = [temp_code, pot, light];
        Ok(Engine {
            cfg,
            pid: PidController::new(cfg.gains),
            plant,
            adc: last_good.map(AdcChannelModel::new),
            last_good,
            pot,
            ir: IrLevel::DARK,
            cycle: 0,
            last_record: None,
        })
    }

    pub fn from_scenario(cfg: LoopConfig, scenario: &Scenario) -> Result<Self, EngineError> {
        scenario.validate()?;
        Engine::new(cfg, scenario.initial_temp, scenario.initial_setpoint)
    }

    pub fn config(&self) -> &LoopConfig {
        &self.cfg
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn controller(&self) -> &PidController {
        &self.pid
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Start time of the next cycle.
    pub fn now_ms(&self) -> u64 {
        self.cycle * self.cfg.period_ms()
    }

    pub fn last_record(&self) -> Option<&TelemetryRecord> {
        self.last_record.as_ref()
    }

    pub fn pot_code(&self) -> AdcCode {
        self.pot
    }

    pub fn adc_channel_mut(&mut self, channel: Channel) -> &mut AdcChannelModel {
        &mut self.adc[channel.index()]
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), EngineError> {
        match *event {
            Event::SetpointCode(code) => self.pot = AdcCode::new(code.code(), Channel::Setpoint)?,
            Event::SetpointTemp(t) => self.pot = setpoint_to_pot_code(t)?,
            Event::DisturbanceOn => self.plant.set_disturbance(true),
            Event::DisturbanceOff => self.plant.set_disturbance(false),
            Event::AdcFault { channel, on } => self.adc[channel.index()].responsive = !on,
        }
        Ok(())
    }

    pub fn set_gains(&mut self, gains: PidGains) {
        self.cfg.gains = gains;
        self.pid.gains = gains;
    }

    pub fn set_ambient_ir(&mut self, ir: IrLevel) {
        self.ir = ir;
    }

    pub fn reset_controller(&mut self) {
        self.pid.reset();
    }

    fn sample(&mut self, channel: Channel, fault: &mut bool) -> AdcCode {
        let i = channel.index();
        match self.adc[i].read_single_shot() {
            AdcRead::Ready { code, .. } => {
                self.last_good[i] = code;
                code
            }
            AdcRead::TimedOut { .. } => {
                *fault = true;
                self.last_good[i]
            }
        }
    }

    /// Runs one control cycle.
    pub fn step(&mut self) -> Result<TelemetryRecord, EngineError> {
        let t_ms = self.now_ms();

        self.adc[Channel::Temperature.index()].pending_code = temp_to_tmp36_code(self.plant.sensed())?;
        self.adc[Channel::Setpoint.index()].pending_code = self.pot;
        self.adc[Channel::Light.index()].pending_code =
            light_channel_sample(self.ir, cycle_seed(self.cfg.seed, self.cycle));

        let mut adc_fault = false;
        let temp_code = self.sample(Channel::Temperature, &mut adc_fault);
        let set_code = self.sample(Channel::Setpoint, &mut adc_fault);
        let light = self.sample(Channel::Light, &mut adc_fault);

        let t_curr = tmp36_code_to_temp(temp_code);
        let t_set = pot_code_to_setpoint(set_code);
        let error = compute_error(t_curr, t_set);
        let PidOutput { duty, .. } = self.pid.step(error);
        let state = classify(error, &self.cfg.safety);

        let fraction = duty_to_fraction(duty);
        for _ in 0..self.cfg.substeps {
            self.plant.step(fraction)?;
        }

        let record = TelemetryRecord {
            t_ms,
            t_set,
            t_curr,
            error,
            duty,
            light,
            state,
            adc_fault,
        };
        self.cycle += 1;
        self.last_record = Some(record);
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub metrics: RunMetrics,
}

/// Runs `scenario` for `cfg.duration` of simulated time.
///
/// Events due at or before a cycle's start are applied before that cycle.
/// Events scheduled past the end of a shortened run never fire.
pub fn run_scenario(cfg: &LoopConfig, scenario: &Scenario) -> Result<RunOutput, EngineError> {
    let mut engine = Engine::from_scenario(*cfg, scenario)?;
    let cycles = cfg.cycle_count();
    let mut records = Vec::with_capacity(cycles as usize);
    let mut pending = scenario.events.iter().peekable();

    for _ in 0..cycles {
        let now = engine.now_ms();
        while let Some(ev) = pending.next_if(|ev| ev.at_ms <= now) {
            engine.apply(&ev.event)?;
        }
        records.push(engine.step()?);
    }

    let metrics = compute_metrics(&records, scenario, cfg);
    Ok(RunOutput { records, metrics })
}
