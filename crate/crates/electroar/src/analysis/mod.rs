//! Recognition oracle over leader-side stimulation maps.
//!
//! A stimulation map is the time-averaged pulse rate per electrode over
//! an observation window — the machine-checkable proxy for what a user
//! would feel. Static stimuli classify by nearest template (L2 on
//! unit-normalized maps); dynamic stimuli classify by a ridge-event
//! signature: how many times per scroll cycle the total map energy peaks
//! above 1.25x its median.
//!
//! These oracles stand in for the human recognition task so transmission
//! fidelity can be tested mechanically; they do not model perception.

pub mod report;

pub use report::{emit_report, tabulate, ClassTiming, ConfusionMatrix, Trial, TrialTiming};

use thiserror::Error;

use crate::grid::GridGeometry;
use crate::modulator::PulseEvent;

/// Centered circular moving-average width used to steady the energy
/// series before peak counting.
pub const ENERGY_SMOOTHING_FRAMES: usize = 5;
/// A peak must exceed this multiple of the series median energy.
pub const PEAK_THRESHOLD_RATIO: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("geometry mismatch: map is {map_width}x{map_height}, template `{label}` is {template_width}x{template_height}")]
    GeometryMismatch {
        label: String,
        map_width: usize,
        map_height: usize,
        template_width: usize,
        template_height: usize,
    },
    #[error("need at least 2 templates, got {got}")]
    EmptyTemplates { got: usize },
    #[error("undefined normalization: `{label}` map has zero energy")]
    UndefinedNormalization { label: String },
    #[error("series of {frames} maps is too short for {cycles} cycles")]
    SeriesTooShort { frames: usize, cycles: u32 },
    #[error("label `{label}` is not in the class set")]
    LabelMismatch { label: String },
    #[error("non-positive duration {value} in trial {index}")]
    NonPositiveDuration { index: usize, value: f64 },
}

/// Per-electrode empirical pulse rates in Hz over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulationMap {
    pub geometry: GridGeometry,
    pub densities: Vec<f64>,
    pub window_ticks: u64,
}

impl StimulationMap {
    /// Map with rates computed directly from expected values, bypassing
    /// the scheduler. Used for noiseless templates.
    pub fn from_rates(geometry: GridGeometry, densities: Vec<f64>, window_ticks: u64) -> Self {
        debug_assert_eq!(densities.len(), geometry.len());
        Self {
            geometry,
            densities,
            window_ticks,
        }
    }

    /// Total energy: the sum of all electrode rates.
    pub fn energy(&self) -> f64 {
        self.densities.iter().sum()
    }

    fn norm(&self) -> f64 {
        self.densities.iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

/// Tally pulse events into a map: `density[e] = count[e] * tick_rate /
/// window_ticks`.
pub fn accumulate_map<'a, I>(
    events: I,
    geometry: GridGeometry,
    window_ticks: u64,
    tick_rate_hz: u32,
) -> StimulationMap
where
    I: IntoIterator<Item = &'a PulseEvent>,
{
    let mut counts = vec![0u64; geometry.len()];
    for event in events {
        debug_assert!(event.electrode_index < counts.len());
        counts[event.electrode_index] += 1;
    }
    let densities = counts
        .iter()
        .map(|&c| {
            if window_ticks == 0 {
                0.0
            } else {
                c as f64 * tick_rate_hz as f64 / window_ticks as f64
            }
        })
        .collect();
    StimulationMap {
        geometry,
        densities,
        window_ticks,
    }
}

/// Outcome of a static classification: winning label and the distance to
/// every template in supplied order.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticDecision {
    pub label: String,
    pub distances: Vec<f64>,
}

/// Nearest-template classification under L2 distance between
/// unit-normalized maps. Normalization makes the decision invariant to
/// uniform rate scaling. Ties resolve to the earliest template in the
/// supplied list, so corpora should pass templates in canonical label
/// order.
pub fn classify_static(
    map: &StimulationMap,
    templates: &[(String, StimulationMap)],
) -> Result<StaticDecision, AnalysisError> {
    if templates.len() < 2 {
        return Err(AnalysisError::EmptyTemplates {
            got: templates.len(),
        });
    }
    let map_norm = map.norm();
    if map_norm == 0.0 {
        return Err(AnalysisError::UndefinedNormalization {
            label: "input".into(),
        });
    }
    let mut distances = Vec::with_capacity(templates.len());
    for (label, template) in templates {
        if template.geometry.width() != map.geometry.width()
            || template.geometry.height() != map.geometry.height()
        {
            return Err(AnalysisError::GeometryMismatch {
                label: label.clone(),
                map_width: map.geometry.width(),
                map_height: map.geometry.height(),
                template_width: template.geometry.width(),
                template_height: template.geometry.height(),
            });
        }
        let template_norm = template.norm();
        if template_norm == 0.0 {
            return Err(AnalysisError::UndefinedNormalization {
                label: label.clone(),
            });
        }
        let distance = map
            .densities
            .iter()
            .zip(&template.densities)
            .map(|(&m, &t)| {
                let d = m / map_norm - t / template_norm;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        distances.push(distance);
    }
    let best = distances
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.total_cmp(b))
        .map(|(idx, _)| idx)
        .expect("non-empty templates");
    Ok(StaticDecision {
        label: templates[best].0.clone(),
        distances,
    })
}

/// Smoothed total-energy series of a map sequence, circular boundary.
pub fn energy_series(series: &[StimulationMap]) -> Vec<f64> {
    let raw: Vec<f64> = series.iter().map(|m| m.energy()).collect();
    let n = raw.len();
    if n == 0 {
        return raw;
    }
    let half = ENERGY_SMOOTHING_FRAMES / 2;
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for offset in 0..ENERGY_SMOOTHING_FRAMES {
                let idx = (t + n + offset - half) % n;
                sum += raw[idx];
            }
            sum / ENERGY_SMOOTHING_FRAMES as f64
        })
        .collect()
}

fn lower_median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

/// Ridge events per cycle: circular runs of smoothed energy above
/// `1.25 x median`, divided by the cycle count. The sequence is periodic
/// by construction, so runs wrapping the series boundary count once.
pub fn peaks_per_cycle(series: &[StimulationMap], cycles: u32) -> Result<f64, AnalysisError> {
    if cycles < 1 || series.len() < 8 * cycles as usize {
        return Err(AnalysisError::SeriesTooShort {
            frames: series.len(),
            cycles,
        });
    }
    let smoothed = energy_series(series);
    let mut sorted = smoothed.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = PEAK_THRESHOLD_RATIO * lower_median(&sorted);
    let n = smoothed.len();
    let above: Vec<bool> = smoothed.iter().map(|&e| e > threshold).collect();
    let runs = (0..n)
        .filter(|&t| above[t] && !above[(t + n - 1) % n])
        .count();
    Ok(runs as f64 / cycles as f64)
}

/// Outcome of a dynamic classification.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicDecision {
    pub label: String,
    pub peaks_per_cycle: f64,
    pub distances: Vec<f64>,
}

/// Classify a map series by nearest expected peaks-per-cycle signature.
/// Ties resolve to the earliest signature in the supplied list.
pub fn classify_dynamic(
    series: &[StimulationMap],
    cycles: u32,
    signatures: &[(String, f64)],
) -> Result<DynamicDecision, AnalysisError> {
    if signatures.len() < 2 {
        return Err(AnalysisError::EmptyTemplates {
            got: signatures.len(),
        });
    }
    let measured = peaks_per_cycle(series, cycles)?;
    let distances: Vec<f64> = signatures
        .iter()
        .map(|(_, expected)| (measured - expected).abs())
        .collect();
    let best = distances
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.total_cmp(b))
        .map(|(idx, _)| idx)
        .expect("non-empty signatures");
    Ok(DynamicDecision {
        label: signatures[best].0.clone(),
        peaks_per_cycle: measured,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FingerId;
    use crate::modulator::{run, SchedulerConfig, StimulusFrame, TICK_RATE_HZ};

    fn map_from(densities: Vec<f64>) -> StimulationMap {
        let geometry = GridGeometry::electrode();
        StimulationMap::from_rates(geometry, densities, 1_000)
    }

    #[test]
    fn full_rate_electrode_accumulates_to_120() {
        let frames = (0..1u64).map(|tick| {
            StimulusFrame::uniform(FingerId::Index, GridGeometry::electrode(), 1.0, tick).unwrap()
        });
        let (events, _) = run(frames, 1_200, SchedulerConfig::with_seed(7));
        let map = accumulate_map(&events, GridGeometry::electrode(), 1_200, TICK_RATE_HZ);
        assert!(map.densities.iter().all(|&d| d == 120.0));
    }

    #[test]
    fn no_events_gives_zero_map() {
        let map = accumulate_map(&[], GridGeometry::electrode(), 1_000, TICK_RATE_HZ);
        assert!(map.densities.iter().all(|&d| d == 0.0));
        assert_eq!(map.energy(), 0.0);
    }

    #[test]
    fn half_probability_density_near_60() {
        let frames = (0..1u64).map(|tick| {
            StimulusFrame::uniform(FingerId::Index, GridGeometry::electrode(), 0.5, tick).unwrap()
        });
        let (events, _) = run(frames, 12_000, SchedulerConfig::with_seed(0x5eed_5001));
        let map = accumulate_map(&events, GridGeometry::electrode(), 12_000, TICK_RATE_HZ);
        let sigma_hz = 120.0 * (0.25f64 / 12_000.0).sqrt();
        for &d in &map.densities {
            assert!((d - 60.0).abs() <= 3.0 * sigma_hz, "density {d}");
        }
    }

    #[test]
    fn template_self_match_has_zero_distance() {
        let a = map_from((0..20).map(|i| i as f64).collect());
        let b = map_from((0..20).map(|i| (20 - i) as f64).collect());
        let templates = vec![("a".to_string(), a.clone()), ("b".to_string(), b)];
        let decision = classify_static(&a, &templates).unwrap();
        assert_eq!(decision.label, "a");
        assert_eq!(decision.distances[0], 0.0);
        assert!(decision.distances[1] > 0.0);
    }

    #[test]
    fn classification_is_scale_invariant() {
        let a = map_from((0..20).map(|i| i as f64).collect());
        let b = map_from((0..20).map(|i| ((i * 7) % 13) as f64).collect());
        let templates = vec![("a".to_string(), a.clone()), ("b".to_string(), b)];
        let scaled = map_from(a.densities.iter().map(|d| d * 0.125).collect());
        let d1 = classify_static(&a, &templates).unwrap();
        let d2 = classify_static(&scaled, &templates).unwrap();
        assert_eq!(d1.label, d2.label);
        for (x, y) in d1.distances.iter().zip(&d2.distances) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_map_cannot_be_classified() {
        let zero = map_from(vec![0.0; 20]);
        let a = map_from(vec![1.0; 20]);
        let b = map_from((0..20).map(|i| i as f64).collect());
        let templates = vec![("a".to_string(), a), ("b".to_string(), b)];
        assert!(matches!(
            classify_static(&zero, &templates),
            Err(AnalysisError::UndefinedNormalization { .. })
        ));
    }

    #[test]
    fn template_count_and_geometry_are_validated() {
        let a = map_from(vec![1.0; 20]);
        assert!(matches!(
            classify_static(&a, &[("only".to_string(), a.clone())]),
            Err(AnalysisError::EmptyTemplates { got: 1 })
        ));
        let other = StimulationMap::from_rates(
            GridGeometry::new(2, 2, 2.0).unwrap(),
            vec![1.0; 4],
            100,
        );
        let templates = vec![("a".to_string(), a.clone()), ("o".to_string(), other)];
        assert!(matches!(
            classify_static(&a, &templates),
            Err(AnalysisError::GeometryMismatch { .. })
        ));
    }

    fn flat_series(energy: f64, frames: usize) -> Vec<StimulationMap> {
        (0..frames)
            .map(|_| map_from(vec![energy / 20.0; 20]))
            .collect()
    }

    #[test]
    fn constant_series_has_no_peaks() {
        let series = flat_series(100.0, 120);
        assert_eq!(peaks_per_cycle(&series, 10).unwrap(), 0.0);
    }

    #[test]
    fn square_wave_series_counts_runs_per_cycle() {
        // 4 elevated windows per 60-frame cycle, 3 cycles.
        let mut series = Vec::new();
        for _ in 0..3 {
            for t in 0..60 {
                let elevated = matches!(t, 0..=3 | 15..=18 | 30..=33 | 45..=48);
                series.push(map_from(vec![if elevated { 10.0 } else { 2.0 }; 20]));
            }
        }
        assert_eq!(peaks_per_cycle(&series, 3).unwrap(), 4.0);
    }

    #[test]
    fn short_series_is_rejected() {
        let series = flat_series(1.0, 30);
        assert!(matches!(
            peaks_per_cycle(&series, 10),
            Err(AnalysisError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn dynamic_classifier_picks_nearest_signature() {
        let signatures = vec![
            ("circle".to_string(), 0.0),
            ("triangle".to_string(), 3.0),
            ("square".to_string(), 4.0),
            ("hexagon".to_string(), 6.0),
        ];
        let series = flat_series(50.0, 160);
        let decision = classify_dynamic(&series, 10, &signatures).unwrap();
        assert_eq!(decision.label, "circle");
        assert_eq!(decision.peaks_per_cycle, 0.0);
    }
}
