//! Synthetic stimulus corpora: static bars at four orientations and
//! dynamic prism-scroll pressure sequences, plus the recording/replay
//! file format used to move them around.
//!
//! The contact-synthesis model is a deterministic stand-in for glove
//! data: a pressure band across the sensor grid, plus a wider and
//! stronger ridge whenever a polygon vertex rolls through the contact
//! window. It preserves the structure recognition depends on (edge
//! periodicity distinguishes polygons) while staying fully specified.
//! All outputs are synthetic; none of this is measured hardware data.
//!
//! Convention: the 10-sensel axis of the 5x10 sensor grid runs along the
//! finger. A 0-degree bar runs along the width axis; 90 degrees runs
//! along the height axis. Scroll sequences hard-code the 90-degree grasp.

pub mod recording;

pub use recording::{Recorder, RecordingError, RecordingHeader, Replayer};

use std::f64::consts::PI;

use thiserror::Error;

use crate::grid::{FingerId, GridGeometry, PressureGrid};
use crate::transport::WireFrame;

/// Default bar amplitude in raw counts.
pub const DEFAULT_BAR_AMPLITUDE: u16 = 30_000;
/// Default bar thickness in sensel units.
pub const DEFAULT_BAR_THICKNESS: f64 = 1.5;
/// Default scroll band amplitude in raw counts.
pub const DEFAULT_SCROLL_AMPLITUDE: u16 = 20_000;
/// Width of the always-present contact band, in sensels.
pub const SCROLL_BAND_THICKNESS: f64 = 1.5;
/// Width of the vertex ridge. A vertex pressing in deforms more skin, so
/// the ridge is wider than the resting band.
pub const SCROLL_RIDGE_THICKNESS: f64 = 3.0;
/// Pressure gain while a vertex is in contact; products clip to 65535.
pub const SCROLL_RIDGE_GAIN: f64 = 1.5;
/// Angular half-width of vertex contact, radians.
pub const RIDGE_HALF_WIDTH_RAD: f64 = PI / 12.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("frames_per_cycle must be >= 8, got {got}")]
    FramesPerCycleTooSmall { got: usize },
    #[error("cycles must be >= 1")]
    NoCycles,
}

/// Bar inclination. 0 degrees runs along the width axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BarOrientation {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl BarOrientation {
    pub const ALL: [BarOrientation; 4] = [
        BarOrientation::Deg0,
        BarOrientation::Deg45,
        BarOrientation::Deg90,
        BarOrientation::Deg135,
    ];

    pub fn degrees(&self) -> u32 {
        match self {
            BarOrientation::Deg0 => 0,
            BarOrientation::Deg45 => 45,
            BarOrientation::Deg90 => 90,
            BarOrientation::Deg135 => 135,
        }
    }

    pub fn from_degrees(deg: u32) -> Option<Self> {
        match deg {
            0 => Some(BarOrientation::Deg0),
            45 => Some(BarOrientation::Deg45),
            90 => Some(BarOrientation::Deg90),
            135 => Some(BarOrientation::Deg135),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        self.degrees().to_string()
    }

    /// Perpendicular distance from a cell center to the bar line through
    /// the grid center, in sensel units.
    fn distance(&self, dx: f64, dy: f64) -> f64 {
        match self {
            BarOrientation::Deg0 => dy.abs(),
            BarOrientation::Deg45 => (dx - dy).abs() / std::f64::consts::SQRT_2,
            BarOrientation::Deg90 => dx.abs(),
            BarOrientation::Deg135 => (dx + dy).abs() / std::f64::consts::SQRT_2,
        }
    }
}

/// A static bar stimulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarPattern {
    pub orientation: BarOrientation,
    pub thickness_sensels: f64,
    pub amplitude: u16,
}

impl BarPattern {
    pub fn new(orientation: BarOrientation) -> Self {
        Self {
            orientation,
            thickness_sensels: DEFAULT_BAR_THICKNESS,
            amplitude: DEFAULT_BAR_AMPLITUDE,
        }
    }
}

/// Rasterize a bar: a cell gets the amplitude iff its center lies within
/// `thickness / 2` of the line through the grid center.
pub fn generate_bar(pattern: &BarPattern, geometry: GridGeometry) -> PressureGrid {
    let cx = (geometry.width() - 1) as f64 / 2.0;
    let cy = (geometry.height() - 1) as f64 / 2.0;
    let half = pattern.thickness_sensels / 2.0;
    let mut values = Vec::with_capacity(geometry.len());
    for j in 0..geometry.height() {
        for i in 0..geometry.width() {
            let d = pattern
                .orientation
                .distance(i as f64 - cx, j as f64 - cy);
            values.push(if d <= half { pattern.amplitude } else { 0 });
        }
    }
    PressureGrid::new(geometry, values).expect("values sized from geometry")
}

/// Cross-section of the scroll sticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrismShape {
    Circle,
    Triangle,
    Square,
    Hexagon,
}

impl PrismShape {
    pub const ALL: [PrismShape; 4] = [
        PrismShape::Circle,
        PrismShape::Triangle,
        PrismShape::Square,
        PrismShape::Hexagon,
    ];

    /// Vertices of the cross-section; a circle has none.
    pub fn vertex_count(&self) -> usize {
        match self {
            PrismShape::Circle => 0,
            PrismShape::Triangle => 3,
            PrismShape::Square => 4,
            PrismShape::Hexagon => 6,
        }
    }

    /// Ridge events expected per scroll cycle: one per vertex.
    pub fn expected_peaks_per_cycle(&self) -> f64 {
        self.vertex_count() as f64
    }

    pub fn label(&self) -> &'static str {
        match self {
            PrismShape::Circle => "circle",
            PrismShape::Triangle => "triangle",
            PrismShape::Square => "square",
            PrismShape::Hexagon => "hexagon",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "circle" => Some(PrismShape::Circle),
            "triangle" => Some(PrismShape::Triangle),
            "square" => Some(PrismShape::Square),
            "hexagon" => Some(PrismShape::Hexagon),
            _ => None,
        }
    }
}

/// Physical stick description. Dimensions default to the experiment
/// hardware: 150 mm stick, 28 mm prismatic mid-section, 9 mm stick
/// radius, 5 mm prism circumradius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrismSpec {
    pub cross_section: PrismShape,
    pub stick_length_mm: f64,
    pub section_length_mm: f64,
    pub stick_radius_mm: f64,
    pub circumradius_mm: f64,
}

impl PrismSpec {
    pub fn new(cross_section: PrismShape) -> Self {
        Self {
            cross_section,
            stick_length_mm: 150.0,
            section_length_mm: 28.0,
            stick_radius_mm: 9.0,
            circumradius_mm: 5.0,
        }
    }
}

/// A scrolled-stick pressure sequence: per frame, one grid for the index
/// finger and one for the thumb (opposite side of the stick). Each frame
/// occupies `ticks_per_frame` ticks when replayed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScrollSequence {
    pub prism: PrismSpec,
    pub frames: Vec<(PressureGrid, PressureGrid)>,
    pub ticks_per_frame: u64,
    pub cycles: u32,
    pub frames_per_cycle: usize,
}

impl ScrollSequence {
    pub fn with_ticks_per_frame(mut self, ticks_per_frame: u64) -> Self {
        self.ticks_per_frame = ticks_per_frame.max(1);
        self
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Whether any cross-section vertex is within the contact window at
/// scroll phase `phi`.
fn ridge_active(shape: PrismShape, phi: f64) -> bool {
    let n = shape.vertex_count();
    (0..n).any(|m| circular_distance(phi, 2.0 * PI * m as f64 / n as f64) <= RIDGE_HALF_WIDTH_RAD)
}

/// One synthesized contact grid: a vertical band (90-degree grasp), with
/// the ridge profile replacing it while a vertex is in contact.
fn scroll_grid(geometry: GridGeometry, amplitude: u16, ridge: bool) -> PressureGrid {
    let cx = (geometry.width() - 1) as f64 / 2.0;
    let ridge_value = ((amplitude as f64 * SCROLL_RIDGE_GAIN).round() as u32).min(65_535) as u16;
    let mut column = Vec::with_capacity(geometry.width());
    for i in 0..geometry.width() {
        let dx = (i as f64 - cx).abs();
        let value = if ridge && dx <= SCROLL_RIDGE_THICKNESS / 2.0 {
            ridge_value
        } else if dx <= SCROLL_BAND_THICKNESS / 2.0 {
            amplitude
        } else {
            0
        };
        column.push(value);
    }
    let values = (0..geometry.height())
        .flat_map(|_| column.iter().copied())
        .collect();
    PressureGrid::new(geometry, values).expect("values sized from geometry")
}

/// Synthesize a back-and-forth scroll. Frame `t` within a cycle maps to
/// phase through a triangle wave covering half a revolution — rolling
/// the stick half a turn forward and back between two finger pads — so
/// each cycle meets every vertex exactly once per finger across the two
/// opposed contact sides.
pub fn generate_scroll(
    spec: &PrismSpec,
    frames_per_cycle: usize,
    cycles: u32,
    amplitude: u16,
) -> Result<ScrollSequence, PatternError> {
    if frames_per_cycle < 8 {
        return Err(PatternError::FramesPerCycleTooSmall {
            got: frames_per_cycle,
        });
    }
    if cycles < 1 {
        return Err(PatternError::NoCycles);
    }
    let geometry = GridGeometry::sensor();
    let mut frames = Vec::with_capacity(frames_per_cycle * cycles as usize);
    for t in 0..frames_per_cycle * cycles as usize {
        let x = (t % frames_per_cycle) as f64 / frames_per_cycle as f64;
        let tri = if x < 0.5 { 2.0 * x } else { 2.0 * (1.0 - x) };
        let phi = PI * tri;
        let index = scroll_grid(geometry, amplitude, ridge_active(spec.cross_section, phi));
        let thumb = scroll_grid(
            geometry,
            amplitude,
            ridge_active(spec.cross_section, phi + PI),
        );
        frames.push((index, thumb));
    }
    Ok(ScrollSequence {
        prism: *spec,
        frames,
        ticks_per_frame: 1,
        cycles,
        frames_per_cycle,
    })
}

/// Wire frames for a static bar held for `ticks` ticks on one finger.
pub fn bar_wireframes(grid: &PressureGrid, finger: FingerId, ticks: u64) -> Vec<WireFrame> {
    (0..ticks)
        .map(|tick| {
            WireFrame::pressure(finger, tick as u32, tick, grid)
                .expect("sensor preset fits wire fields")
        })
        .collect()
}

/// Wire frames for a scroll sequence: per frame, an index frame then a
/// thumb frame stamped at `frame * ticks_per_frame`.
pub fn scroll_wireframes(sequence: &ScrollSequence) -> Vec<WireFrame> {
    let mut frames = Vec::with_capacity(sequence.frames.len() * 2);
    for (idx, (index_grid, thumb_grid)) in sequence.frames.iter().enumerate() {
        let tick = idx as u64 * sequence.ticks_per_frame;
        frames.push(
            WireFrame::pressure(FingerId::Index, idx as u32, tick, index_grid)
                .expect("sensor preset fits wire fields"),
        );
        frames.push(
            WireFrame::pressure(FingerId::Thumb, idx as u32, tick, thumb_grid)
                .expect("sensor preset fits wire fields"),
        );
    }
    frames
}
