//! End-to-end leader-side pipeline: delivered pressure frames feed the
//! session filter, fresh grids map through the spatial filter, electrode
//! resampling, and the inverse transfer function into stimulation
//! probabilities, and per-finger schedulers turn those into pulses.
//!
//! Everything is clocked in ticks and seeded, so a run is a pure
//! function of `(frames, config)`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analysis::{accumulate_map, AnalysisError, StimulationMap};
use crate::grid::{
    resample_to_electrodes, spatial_filter, FingerId, GridError, GridGeometry, PressureGrid,
};
use crate::modulator::{
    expected_rate, ModulatorError, PulseEvent, Scheduler, SchedulerConfig, StimulusFrame,
    TICK_RATE_HZ,
};
use crate::psychophysics::{
    pressure_to_probability_with_deadzone, SigmoidModel, DEFAULT_DEADZONE_FRACTION,
};
use crate::transport::{link_transmit, FrameType, LinkModel, Role, SessionState, TransportError, WireFrame};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Modulator(#[from] ModulatorError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// SplitMix64 step, used to give each RNG consumer (link, per-finger
/// schedulers) an independent stream from one run seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e08b);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub model: SigmoidModel,
    pub link: LinkModel,
    pub window_ticks: u64,
    pub deadzone_fraction: f64,
    /// Normalization ceiling for the pressure-to-probability map.
    pub max_count: u16,
    /// When set, also accumulate one map per block of this many ticks,
    /// giving the time series the dynamic classifier consumes.
    pub block_ticks: Option<u64>,
    /// Base seed; the link and each finger's scheduler derive their own
    /// streams from it.
    pub seed: u64,
    /// Pace the tick loop at the tick rate in real time instead of
    /// running instantaneously.
    pub pace_realtime: bool,
}

impl PipelineConfig {
    pub fn new(model: SigmoidModel, seed: u64) -> Self {
        Self {
            model,
            link: LinkModel::ideal(derive_seed(seed, 0)),
            window_ticks: 2_400,
            deadzone_fraction: DEFAULT_DEADZONE_FRACTION,
            max_count: u16::MAX,
            block_ticks: None,
            seed,
            pace_realtime: false,
        }
    }

    fn scheduler_seed(&self, finger: FingerId) -> u64 {
        derive_seed(self.seed, 1 + finger.code() as u64)
    }
}

/// Everything a pipeline run produces.
#[derive(Debug)]
pub struct PipelineRun {
    /// All pulses, ordered by (tick, finger, electrode).
    pub events: Vec<PulseEvent>,
    pub session: SessionState,
    /// Whole-window stimulation map per finger.
    pub finger_maps: BTreeMap<FingerId, StimulationMap>,
    /// Per-block map series per finger; empty unless `block_ticks` set.
    pub finger_series: BTreeMap<FingerId, Vec<StimulationMap>>,
    pub window_ticks: u64,
    pub delivered_frames: u64,
}

/// Map one raw sensor grid to electrode stimulation probabilities:
/// spatial filter, electrode resampling, then the inverse transfer
/// function cell by cell.
pub fn pressure_to_stimulus(
    grid: &PressureGrid,
    model: &SigmoidModel,
    deadzone_fraction: f64,
    max_count: u16,
) -> Result<Vec<f64>, GridError> {
    let filtered = spatial_filter(grid)?;
    let electrode = resample_to_electrodes(&filtered, GridGeometry::electrode())?;
    Ok(electrode
        .values()
        .iter()
        .map(|&cell| {
            pressure_to_probability_with_deadzone(model, cell, max_count, deadzone_fraction)
        })
        .collect())
}

/// Noiseless stimulation map a grid would realize over an infinite
/// window: densities are the expected rates `tick_rate * p`. Used as
/// classifier templates.
pub fn expected_map(
    grid: &PressureGrid,
    model: &SigmoidModel,
    deadzone_fraction: f64,
    max_count: u16,
) -> Result<StimulationMap, GridError> {
    let probabilities = pressure_to_stimulus(grid, model, deadzone_fraction, max_count)?;
    let densities = probabilities
        .iter()
        .map(|&p| expected_rate(p, TICK_RATE_HZ))
        .collect();
    Ok(StimulationMap::from_rates(
        GridGeometry::electrode(),
        densities,
        u64::MAX,
    ))
}

/// Run follower frames through the link and the whole leader side for
/// `window_ticks` ticks.
pub fn run_pipeline(
    frames: &[WireFrame],
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    let deliveries = link_transmit(frames, &config.link)?;
    let mut session = SessionState::new(Role::Leader);

    // Schedulers exist from tick 0 for every finger in the input, so
    // event ticks align with the global clock regardless of when the
    // first frame actually arrives.
    let mut fingers: Vec<FingerId> = frames.iter().map(|f| f.finger).collect();
    fingers.sort();
    fingers.dedup();
    let mut schedulers: BTreeMap<FingerId, Scheduler> = fingers
        .iter()
        .map(|&finger| {
            let mut cfg = SchedulerConfig::with_seed(config.scheduler_seed(finger));
            cfg.tick_rate_hz = TICK_RATE_HZ;
            (finger, Scheduler::new(cfg))
        })
        .collect();

    let electrode_geometry = GridGeometry::electrode();
    let mut events: Vec<PulseEvent> = Vec::new();
    let mut next_delivery = 0usize;
    let pacer = config
        .pace_realtime
        .then(|| crate::modulator::TickPacer::new(TICK_RATE_HZ));
    for tick in 0..config.window_ticks {
        if let Some(pacer) = &pacer {
            pacer.wait_for_tick(tick);
        }
        while next_delivery < deliveries.len()
            && deliveries[next_delivery].delivery_tick <= tick
        {
            let delivery = &deliveries[next_delivery];
            next_delivery += 1;
            let Some(fresh) = session.ingest(delivery.frame.clone()) else {
                continue;
            };
            if fresh.frame_type != FrameType::Pressure {
                continue;
            }
            let grid = fresh.to_grid(GridGeometry::sensor().pitch_mm())?;
            let probabilities = pressure_to_stimulus(
                &grid,
                &config.model,
                config.deadzone_fraction,
                config.max_count,
            )?;
            let stimulus =
                StimulusFrame::new(fresh.finger, electrode_geometry, probabilities, tick)?;
            if let Some(scheduler) = schedulers.get_mut(&fresh.finger) {
                scheduler.submit_frame(stimulus);
            }
        }
        for scheduler in schedulers.values_mut() {
            events.extend(scheduler.step());
        }
    }

    let mut finger_maps = BTreeMap::new();
    let mut finger_series = BTreeMap::new();
    for &finger in &fingers {
        let finger_events: Vec<&PulseEvent> =
            events.iter().filter(|e| e.finger == finger).collect();
        finger_maps.insert(
            finger,
            accumulate_map(
                finger_events.iter().copied(),
                electrode_geometry,
                config.window_ticks,
                TICK_RATE_HZ,
            ),
        );
        if let Some(block) = config.block_ticks {
            let blocks = config.window_ticks / block;
            let mut series = Vec::with_capacity(blocks as usize);
            for b in 0..blocks {
                let lo = b * block;
                let hi = lo + block;
                series.push(accumulate_map(
                    finger_events
                        .iter()
                        .copied()
                        .filter(|e| e.tick >= lo && e.tick < hi),
                    electrode_geometry,
                    block,
                    TICK_RATE_HZ,
                ));
            }
            finger_series.insert(finger, series);
        }
    }

    Ok(PipelineRun {
        events,
        session,
        finger_maps,
        finger_series,
        window_ticks: config.window_ticks,
        delivered_frames: deliveries.len() as u64,
    })
}
