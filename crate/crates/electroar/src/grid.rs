//! Pressure-grid data model, the 2x2-mean spatial filter, and geometric
//! resampling from the filtered sensor lattice onto the electrode lattice.
//!
//! Axis convention: `i` indexes width (column), `j` indexes height (row);
//! storage is row-major with `j` as the row, so `index = j * width + i`.
//! Grids are immutable after construction.

use thiserror::Error;

/// Raw sensor counts are 16-bit; full scale is 65535.
pub const MAX_COUNT: u16 = u16::MAX;

/// Hard-coded source rows used when decimating the filtered 4x9 sensor
/// lattice onto the 4x5 electrode lattice. Row decimation (rather than
/// interpolation) preserves edge sharpness; a custom map can be supplied
/// through [`resample_rows`].
pub const ELECTRODE_ROW_MAP: [usize; 5] = [0, 2, 4, 6, 8];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("degenerate grid: need at least 2x2 to filter, got {width}x{height}")]
    DegenerateGrid { width: usize, height: usize },
    #[error("geometry mismatch: {context}")]
    GeometryMismatch { context: String },
    #[error("invalid geometry: width={width}, height={height}, pitch_mm={pitch_mm}")]
    BadGeometry {
        width: usize,
        height: usize,
        pitch_mm: f64,
    },
    #[error("value count {got} does not match geometry {width}x{height}")]
    ValueCountMismatch {
        got: usize,
        width: usize,
        height: usize,
    },
}

/// Rectangular lattice: column count, row count, and center-to-center
/// spacing in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    width: usize,
    height: usize,
    pitch_mm: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, pitch_mm: f64) -> Result<Self, GridError> {
        if width < 1 || height < 1 || !(pitch_mm > 0.0) {
            return Err(GridError::BadGeometry {
                width,
                height,
                pitch_mm,
            });
        }
        Ok(Self {
            width,
            height,
            pitch_mm,
        })
    }

    /// The sensing array worn on each finger: 5 columns by 10 rows on a
    /// 2.0 mm pitch. The 10-sensel axis runs along the finger.
    pub fn sensor() -> Self {
        Self {
            width: 5,
            height: 10,
            pitch_mm: 2.0,
        }
    }

    /// The stimulation array under each fingertip: 4 columns by 5 rows on
    /// a 2.0 mm pitch.
    pub fn electrode() -> Self {
        Self {
            width: 4,
            height: 5,
            pitch_mm: 2.0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A grid of non-negative pressure samples in raw counts `[0, 65535]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureGrid {
    geometry: GridGeometry,
    values: Vec<u16>,
}

impl PressureGrid {
    pub fn new(geometry: GridGeometry, values: Vec<u16>) -> Result<Self, GridError> {
        if values.len() != geometry.len() {
            return Err(GridError::ValueCountMismatch {
                got: values.len(),
                width: geometry.width,
                height: geometry.height,
            });
        }
        Ok(Self { geometry, values })
    }

    /// Grid with every cell at `value`.
    pub fn constant(geometry: GridGeometry, value: u16) -> Self {
        Self {
            values: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    /// Cell at column `i`, row `j`.
    pub fn get(&self, i: usize, j: usize) -> u16 {
        debug_assert!(i < self.geometry.width && j < self.geometry.height);
        self.values[j * self.geometry.width + i]
    }

    pub fn max_value(&self) -> u16 {
        self.values.iter().copied().max().unwrap_or(0)
    }
}

/// One finger of the sensing/stimulation gloves. Codes 0/1/2 are the
/// stable transport encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FingerId {
    Thumb,
    Index,
    Middle,
}

impl FingerId {
    pub const ALL: [FingerId; 3] = [FingerId::Thumb, FingerId::Index, FingerId::Middle];

    pub fn code(&self) -> u8 {
        match self {
            FingerId::Thumb => 0,
            FingerId::Index => 1,
            FingerId::Middle => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FingerId::Thumb),
            1 => Some(FingerId::Index),
            2 => Some(FingerId::Middle),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FingerId::Thumb => "thumb",
            FingerId::Index => "index",
            FingerId::Middle => "middle",
        }
    }
}

/// 2x2 neighborhood mean: `out[i,j] = (in[i,j] + in[i+1,j] + in[i,j+1] +
/// in[i+1,j+1]) / 4`, evaluated in real arithmetic and rounded half-up
/// back to integer counts. Output geometry is `(width-1, height-1)` at
/// the same pitch.
pub fn spatial_filter(input: &PressureGrid) -> Result<PressureGrid, GridError> {
    let geo = input.geometry();
    if geo.width() < 2 || geo.height() < 2 {
        return Err(GridError::DegenerateGrid {
            width: geo.width(),
            height: geo.height(),
        });
    }
    let out_geo = GridGeometry::new(geo.width() - 1, geo.height() - 1, geo.pitch_mm())?;
    let mut values = Vec::with_capacity(out_geo.len());
    for j in 0..out_geo.height() {
        for i in 0..out_geo.width() {
            let sum = input.get(i, j) as u32
                + input.get(i + 1, j) as u32
                + input.get(i, j + 1) as u32
                + input.get(i + 1, j + 1) as u32;
            // (sum + 2) / 4 is round-half-up for non-negative quarters.
            values.push(((sum + 2) / 4) as u16);
        }
    }
    PressureGrid::new(out_geo, values)
}

/// Decimate a filtered 4x9 sensor grid onto the 4x5 electrode preset:
/// the width axis passes through unchanged, the height axis keeps source
/// rows [`ELECTRODE_ROW_MAP`] in order.
pub fn resample_to_electrodes(
    filtered: &PressureGrid,
    target: GridGeometry,
) -> Result<PressureGrid, GridError> {
    let geo = filtered.geometry();
    let expected = (
        GridGeometry::sensor().width() - 1,
        GridGeometry::sensor().height() - 1,
    );
    if (geo.width(), geo.height()) != expected
        || (target.width(), target.height())
            != (GridGeometry::electrode().width(), GridGeometry::electrode().height())
    {
        return Err(GridError::GeometryMismatch {
            context: format!(
                "resample_to_electrodes expects {}x{} -> {}x{}, got {}x{} -> {}x{} \
                 (use resample_rows for a custom row map)",
                expected.0,
                expected.1,
                GridGeometry::electrode().width(),
                GridGeometry::electrode().height(),
                geo.width(),
                geo.height(),
                target.width(),
                target.height()
            ),
        });
    }
    resample_rows(filtered, target, &ELECTRODE_ROW_MAP)
}

/// Row-decimating resample with an explicit source-row map. The width of
/// source and target must match; `rows[t]` is the source row copied into
/// target row `t`.
pub fn resample_rows(
    source: &PressureGrid,
    target: GridGeometry,
    rows: &[usize],
) -> Result<PressureGrid, GridError> {
    let geo = source.geometry();
    if geo.width() != target.width() {
        return Err(GridError::GeometryMismatch {
            context: format!(
                "width mismatch: source {} vs target {}",
                geo.width(),
                target.width()
            ),
        });
    }
    if rows.len() != target.height() {
        return Err(GridError::GeometryMismatch {
            context: format!(
                "row map has {} entries for target height {}",
                rows.len(),
                target.height()
            ),
        });
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= geo.height()) {
        return Err(GridError::GeometryMismatch {
            context: format!("row map entry {} out of range 0..{}", bad, geo.height()),
        });
    }
    let mut values = Vec::with_capacity(target.len());
    for &src_row in rows {
        for i in 0..target.width() {
            values.push(source.get(i, src_row));
        }
    }
    PressureGrid::new(target, values)
}
