//! Fixed-rate tick engine and random pulse modulation.
//!
//! Stimulus intensity is encoded as the per-tick probability of firing an
//! electrode: each tick, every electrode draws one independent uniform
//! `u` and fires iff `u <= p`, so the mean pulse rate is
//! `tick_rate * p` Hz (120*p at the default 120 Hz cadence).
//!
//! Draws consume the RNG stream in row-major electrode order, which makes
//! the emitted event stream a pure function of `(seed, frame stream)`.
//! The uniform is taken on `(0, 1]` so the `<=` test is exact at both
//! ends: `p = 0` never fires and `p = 1` fires every tick.

use rand::distributions::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{FingerId, GridGeometry};

/// Update cadence of the stimulator link.
pub const TICK_RATE_HZ: u32 = 120;

/// Stimulation pulse width in microseconds.
pub const PULSE_WIDTH_US: u32 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulatorError {
    #[error("probability {value} at electrode {index} outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("frame carries {got} probabilities for geometry {want}")]
    ProbabilityCountMismatch { got: usize, want: usize },
}

/// Per-electrode stimulation probabilities delivered to the scheduler for
/// one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusFrame {
    pub finger: FingerId,
    pub geometry: GridGeometry,
    probabilities: Vec<f64>,
    pub tick: u64,
}

impl StimulusFrame {
    pub fn new(
        finger: FingerId,
        geometry: GridGeometry,
        probabilities: Vec<f64>,
        tick: u64,
    ) -> Result<Self, ModulatorError> {
        if probabilities.len() != geometry.len() {
            return Err(ModulatorError::ProbabilityCountMismatch {
                got: probabilities.len(),
                want: geometry.len(),
            });
        }
        if let Some((index, &value)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, &p)| !(0.0..=1.0).contains(&p) || p.is_nan())
        {
            return Err(ModulatorError::ProbabilityOutOfRange { index, value });
        }
        Ok(Self {
            finger,
            geometry,
            probabilities,
            tick,
        })
    }

    /// Frame with the same probability at every electrode.
    pub fn uniform(
        finger: FingerId,
        geometry: GridGeometry,
        p: f64,
        tick: u64,
    ) -> Result<Self, ModulatorError> {
        let len = geometry.len();
        Self::new(finger, geometry, vec![p; len], tick)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// One electrode firing at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseEvent {
    pub finger: FingerId,
    pub electrode_index: usize,
    pub tick: u64,
    pub pulse_width_us: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub tick_rate_hz: u32,
    pub rng_seed: u64,
    pub pulse_width_us: u32,
}

impl SchedulerConfig {
    pub fn with_seed(rng_seed: u64) -> Self {
        Self {
            tick_rate_hz: TICK_RATE_HZ,
            rng_seed,
            pulse_width_us: PULSE_WIDTH_US,
        }
    }
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

/// Per-electrode pulse counts over an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStats {
    pub counts: Vec<u64>,
    pub window_ticks: u64,
    pub tick_rate_hz: u32,
    /// Ticks during which the scheduler re-used a held frame because the
    /// input stream had stalled.
    pub held_ticks: u64,
}

impl RateStats {
    /// Empirical rate in Hz: `count * tick_rate / window_ticks`.
    pub fn rate_hz(&self, electrode: usize) -> f64 {
        if self.window_ticks == 0 {
            return 0.0;
        }
        self.counts[electrode] as f64 * self.tick_rate_hz as f64 / self.window_ticks as f64
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|e| self.rate_hz(e)).collect()
    }
}

/// Mean pulse rate realized by probability `p` at a given tick rate.
pub fn expected_rate(p: f64, tick_rate_hz: u32) -> f64 {
    tick_rate_hz as f64 * p
}

/// Evaluate one tick of a frame against an explicit RNG state. One draw
/// per electrode, row-major order, fire iff `u <= p`.
pub fn tick_frame<R: Rng>(frame: &StimulusFrame, rng: &mut R, pulse_width_us: u32) -> Vec<PulseEvent> {
    let mut events = Vec::new();
    for (electrode_index, &p) in frame.probabilities.iter().enumerate() {
        let u: f64 = rng.sample(OpenClosed01);
        if u <= p {
            events.push(PulseEvent {
                finger: frame.finger,
                electrode_index,
                tick: frame.tick,
                pulse_width_us,
            });
        }
    }
    events
}

/// Clocked scheduler: submit a frame whenever a fresh one arrives, step
/// once per tick. A held frame keeps stimulating while the input stalls,
/// mirroring a display that keeps refreshing between updates.
#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    rng: ChaCha8Rng,
    current: Option<StimulusFrame>,
    fresh: bool,
    next_tick: u64,
    counts: Vec<u64>,
    held_ticks: u64,
    ticks_run: u64,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            current: None,
            fresh: false,
            next_tick: 0,
            counts: Vec::new(),
            held_ticks: 0,
            ticks_run: 0,
        }
    }

    pub fn submit_frame(&mut self, frame: StimulusFrame) {
        if self.counts.len() != frame.geometry.len() {
            self.counts = vec![0; frame.geometry.len()];
        }
        self.current = Some(frame);
        self.fresh = true;
    }

    /// Advance one tick, emitting the pulses fired on it.
    pub fn step(&mut self) -> Vec<PulseEvent> {
        let tick = self.next_tick;
        self.next_tick += 1;
        self.ticks_run += 1;
        let Some(frame) = self.current.as_mut() else {
            return Vec::new();
        };
        if !self.fresh {
            self.held_ticks += 1;
        }
        self.fresh = false;
        frame.tick = tick;
        let events = tick_frame(frame, &mut self.rng, self.config.pulse_width_us);
        for event in &events {
            self.counts[event.electrode_index] += 1;
        }
        events
    }

    pub fn stats(&self) -> RateStats {
        RateStats {
            counts: self.counts.clone(),
            window_ticks: self.ticks_run,
            tick_rate_hz: self.config.tick_rate_hz,
            held_ticks: self.held_ticks,
        }
    }
}

/// Paces a loop at the tick rate in real time (wall-clock mode). In
/// simulated-time mode no pacer is used and ticks are instantaneous.
#[derive(Debug)]
pub struct TickPacer {
    start: std::time::Instant,
    tick_period: std::time::Duration,
}

impl TickPacer {
    pub fn new(tick_rate_hz: u32) -> Self {
        Self {
            start: std::time::Instant::now(),
            tick_period: std::time::Duration::from_secs_f64(1.0 / tick_rate_hz as f64),
        }
    }

    /// Sleep until tick `tick`'s wall-clock deadline has passed.
    pub fn wait_for_tick(&self, tick: u64) {
        let deadline = self.start + self.tick_period * tick as u32;
        let now = std::time::Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }
}

/// Drive a frame stream for a fixed number of ticks. The stream supplies
/// at most one frame per tick; when it runs dry the last frame is held.
pub fn run<I>(frames: I, ticks: u64, config: SchedulerConfig) -> (Vec<PulseEvent>, RateStats)
where
    I: IntoIterator<Item = StimulusFrame>,
{
    let mut scheduler = Scheduler::new(config);
    let mut source = frames.into_iter();
    let mut events = Vec::new();
    for _ in 0..ticks {
        if let Some(frame) = source.next() {
            scheduler.submit_frame(frame);
        }
        events.extend(scheduler.step());
    }
    (events, scheduler.stats())
}
