//! Recording files: a human-inspectable text header terminated by a
//! blank line, followed by binary wire frames back to back.
//!
//! ```text
//! earlog 1
//! geometry 5x10
//! tick_rate 120
//! meta kind bar
//! meta label 45
//!
//! <wire frames...>
//! ```
//!
//! Replay reproduces the frame stream bit-exactly, tick stamps included.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::GridGeometry;
use crate::modulator::TICK_RATE_HZ;
use crate::transport::{decode, encode, TransportError, WireFrame, CRC_LEN, HEADER_LEN};

pub const FORMAT_ID: &str = "earlog";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("bad header at line {line}: {message}")]
    BadHeader { line: usize, message: String },
    #[error("unsupported recording version {found}")]
    VersionMismatch { found: u32 },
    #[error("corrupt frame after {complete_frames} complete frames: {source}")]
    CorruptFrame {
        complete_frames: u64,
        source: TransportError,
    },
    #[error("frame geometry {frame_width}x{frame_height} does not match header {header_width}x{header_height}")]
    GeometryMismatch {
        frame_width: u8,
        frame_height: u8,
        header_width: usize,
        header_height: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parsed recording header. Pitch rides along as the `pitch_mm` meta key
/// and defaults to the 2.0 mm sensor pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingHeader {
    pub width: usize,
    pub height: usize,
    pub tick_rate: u32,
    pub meta: Vec<(String, String)>,
}

impl RecordingHeader {
    pub fn for_geometry(geometry: GridGeometry) -> Self {
        Self {
            width: geometry.width(),
            height: geometry.height(),
            tick_rate: TICK_RATE_HZ,
            meta: vec![("pitch_mm".into(), geometry.pitch_mm().to_string())],
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn pitch_mm(&self) -> f64 {
        self.meta("pitch_mm")
            .and_then(|v| v.parse().ok())
            .unwrap_or(2.0)
    }

    pub fn geometry(&self) -> Result<GridGeometry, crate::grid::GridError> {
        GridGeometry::new(self.width, self.height, self.pitch_mm())
    }
}

/// Streaming recording writer.
pub struct Recorder<W: Write> {
    sink: W,
    header: RecordingHeader,
    frames_written: u64,
}

impl<W: Write> Recorder<W> {
    pub fn new(mut sink: W, header: RecordingHeader) -> Result<Self, RecordingError> {
        writeln!(sink, "{FORMAT_ID} {FORMAT_VERSION}")?;
        writeln!(sink, "geometry {}x{}", header.width, header.height)?;
        writeln!(sink, "tick_rate {}", header.tick_rate)?;
        for (key, value) in &header.meta {
            writeln!(sink, "meta {key} {value}")?;
        }
        writeln!(sink)?;
        Ok(Self {
            sink,
            header,
            frames_written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &WireFrame) -> Result<(), RecordingError> {
        if frame.width as usize != self.header.width
            || frame.height as usize != self.header.height
        {
            return Err(RecordingError::GeometryMismatch {
                frame_width: frame.width,
                frame_height: frame.height,
                header_width: self.header.width,
                header_height: self.header.height,
            });
        }
        self.sink.write_all(&encode(frame))?;
        self.frames_written += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> u64 {
        self.frames_written
    }

    pub fn finish(mut self) -> Result<W, RecordingError> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// Streaming recording reader; iterates decoded frames in file order.
pub struct Replayer<R: Read> {
    source: BufReader<R>,
    header: RecordingHeader,
    frames_read: u64,
    failed: bool,
}

impl<R: Read> Replayer<R> {
    pub fn new(source: R) -> Result<Self, RecordingError> {
        let mut source = BufReader::new(source);
        let mut line = String::new();
        let mut line_no = 0usize;
        let mut read_line = |source: &mut BufReader<R>,
                             line: &mut String|
         -> Result<String, RecordingError> {
            line.clear();
            line_no += 1;
            if source.read_line(line)? == 0 {
                return Err(RecordingError::BadHeader {
                    line: line_no,
                    message: "unexpected end of file inside header".into(),
                });
            }
            Ok(line.trim_end_matches(['\n', '\r']).to_string())
        };

        let first = read_line(&mut source, &mut line)?;
        let mut parts = first.split(' ');
        if parts.next() != Some(FORMAT_ID) {
            return Err(RecordingError::BadHeader {
                line: 1,
                message: format!("expected `{FORMAT_ID} <version>`, got `{first}`"),
            });
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| RecordingError::BadHeader {
                line: 1,
                message: "missing format version".into(),
            })?;
        if version != FORMAT_VERSION {
            return Err(RecordingError::VersionMismatch { found: version });
        }

        let geometry_line = read_line(&mut source, &mut line)?;
        let dims = geometry_line
            .strip_prefix("geometry ")
            .and_then(|rest| rest.split_once('x'))
            .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)))
            .ok_or_else(|| RecordingError::BadHeader {
                line: 2,
                message: format!("expected `geometry <w>x<h>`, got `{geometry_line}`"),
            })?;

        let rate_line = read_line(&mut source, &mut line)?;
        let tick_rate = rate_line
            .strip_prefix("tick_rate ")
            .and_then(|rest| rest.parse::<u32>().ok())
            .ok_or_else(|| RecordingError::BadHeader {
                line: 3,
                message: format!("expected `tick_rate <hz>`, got `{rate_line}`"),
            })?;

        let mut meta = Vec::new();
        let mut meta_line_no = 3;
        loop {
            meta_line_no += 1;
            let entry = read_line(&mut source, &mut line)?;
            if entry.is_empty() {
                break;
            }
            let mut fields = entry.splitn(3, ' ');
            match (fields.next(), fields.next(), fields.next()) {
                (Some("meta"), Some(key), Some(value)) => {
                    meta.push((key.to_string(), value.to_string()));
                }
                _ => {
                    return Err(RecordingError::BadHeader {
                        line: meta_line_no,
                        message: format!("expected `meta <key> <value>` or blank line, got `{entry}`"),
                    });
                }
            }
        }

        Ok(Self {
            source,
            header: RecordingHeader {
                width: dims.0,
                height: dims.1,
                tick_rate,
                meta,
            },
            frames_read: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &RecordingHeader {
        &self.header
    }

    fn read_next(&mut self) -> Result<Option<WireFrame>, RecordingError> {
        let mut fixed = [0u8; HEADER_LEN];
        let mut filled = 0;
        while filled < HEADER_LEN {
            let n = self.source.read(&mut fixed[filled..])?;
            if n == 0 {
                if filled == 0 {
                    return Ok(None); // clean end of stream
                }
                return Err(RecordingError::CorruptFrame {
                    complete_frames: self.frames_read,
                    source: TransportError::TruncatedFrame {
                        have: filled,
                        need: HEADER_LEN + CRC_LEN,
                    },
                });
            }
            filled += n;
        }
        let width = fixed[20] as usize;
        let height = fixed[21] as usize;
        let total = HEADER_LEN + 2 * width * height + CRC_LEN;
        let mut bytes = fixed.to_vec();
        bytes.resize(total, 0);
        if let Err(e) = self.source.read_exact(&mut bytes[HEADER_LEN..]) {
            let have = if e.kind() == io::ErrorKind::UnexpectedEof {
                HEADER_LEN
            } else {
                return Err(RecordingError::Io(e));
            };
            return Err(RecordingError::CorruptFrame {
                complete_frames: self.frames_read,
                source: TransportError::TruncatedFrame { have, need: total },
            });
        }
        let frame = decode(&bytes).map_err(|source| RecordingError::CorruptFrame {
            complete_frames: self.frames_read,
            source,
        })?;
        if frame.width as usize != self.header.width
            || frame.height as usize != self.header.height
        {
            return Err(RecordingError::GeometryMismatch {
                frame_width: frame.width,
                frame_height: frame.height,
                header_width: self.header.width,
                header_height: self.header.height,
            });
        }
        self.frames_read += 1;
        Ok(Some(frame))
    }
}

impl<R: Read> Iterator for Replayer<R> {
    type Item = Result<WireFrame, RecordingError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_next() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Write a whole recording to a file.
pub fn record_to_path(
    path: &Path,
    header: RecordingHeader,
    frames: &[WireFrame],
) -> Result<u64, RecordingError> {
    let mut recorder = Recorder::new(BufWriter::new(File::create(path)?), header)?;
    for frame in frames {
        recorder.write_frame(frame)?;
    }
    let written = recorder.frames_written();
    recorder.finish()?;
    Ok(written)
}

/// Read a whole recording from a file.
pub fn replay_from_path(path: &Path) -> Result<(RecordingHeader, Vec<WireFrame>), RecordingError> {
    let mut replayer = Replayer::new(File::open(path)?)?;
    let header = replayer.header().clone();
    let mut frames = Vec::new();
    for frame in &mut replayer {
        frames.push(frame?);
    }
    Ok((header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FingerId;
    use crate::patterns::{generate_scroll, scroll_wireframes, PrismShape, PrismSpec};

    fn scroll_frames() -> Vec<WireFrame> {
        let seq = generate_scroll(&PrismSpec::new(PrismShape::Square), 60, 10, 15_000)
            .unwrap()
            .with_ticks_per_frame(1);
        scroll_wireframes(&seq)
    }

    fn write_to_vec(frames: &[WireFrame]) -> Vec<u8> {
        let header = RecordingHeader::for_geometry(GridGeometry::sensor())
            .with_meta("kind", "scroll")
            .with_meta("label", "square");
        let mut recorder = Recorder::new(Vec::new(), header).unwrap();
        for frame in frames {
            recorder.write_frame(frame).unwrap();
        }
        recorder.finish().unwrap()
    }

    #[test]
    fn recordings_round_trip_bit_exactly() {
        let frames = scroll_frames();
        assert_eq!(frames.len(), 1_200);
        let bytes = write_to_vec(&frames);
        let mut replayer = Replayer::new(bytes.as_slice()).unwrap();
        assert_eq!(replayer.header().meta("label"), Some("square"));
        assert_eq!(replayer.header().tick_rate, 120);
        let replayed: Vec<WireFrame> = (&mut replayer).map(|f| f.unwrap()).collect();
        assert_eq!(replayed, frames);
        // Same input, same bytes.
        assert_eq!(write_to_vec(&frames), bytes);
    }

    #[test]
    fn truncated_file_yields_complete_frames_then_corrupt() {
        let frames = scroll_frames();
        let bytes = write_to_vec(&frames);
        // Chop mid-way through the last frame.
        let truncated = &bytes[..bytes.len() - 10];
        let replayer = Replayer::new(truncated).unwrap();
        let results: Vec<_> = replayer.collect();
        assert_eq!(results.len(), frames.len());
        for (result, expected) in results[..frames.len() - 1].iter().zip(&frames) {
            assert_eq!(result.as_ref().unwrap(), expected);
        }
        assert!(matches!(
            results.last().unwrap(),
            Err(RecordingError::CorruptFrame { complete_frames, .. })
                if *complete_frames == frames.len() as u64 - 1
        ));
    }

    #[test]
    fn empty_body_is_an_empty_stream() {
        let bytes = write_to_vec(&[]);
        let replayer = Replayer::new(bytes.as_slice()).unwrap();
        assert_eq!(replayer.count(), 0);
    }

    #[test]
    fn header_errors_are_distinguished() {
        assert!(matches!(
            Replayer::new("wrong 1\n".as_bytes()),
            Err(RecordingError::BadHeader { line: 1, .. })
        ));
        assert!(matches!(
            Replayer::new("earlog 9\n".as_bytes()),
            Err(RecordingError::VersionMismatch { found: 9 })
        ));
        assert!(matches!(
            Replayer::new("earlog 1\ngeometry five\n".as_bytes()),
            Err(RecordingError::BadHeader { line: 2, .. })
        ));
        assert!(matches!(
            Replayer::new("earlog 1\ngeometry 5x10\ntick_rate 120\nbogus line\n".as_bytes()),
            Err(RecordingError::BadHeader { .. })
        ));
    }

    #[test]
    fn writer_rejects_geometry_mismatch() {
        let header = RecordingHeader::for_geometry(GridGeometry::electrode());
        let mut recorder = Recorder::new(Vec::new(), header).unwrap();
        let err = recorder.write_frame(&scroll_frames()[0]).unwrap_err();
        assert!(matches!(err, RecordingError::GeometryMismatch { .. }));
    }

    #[test]
    fn reader_rejects_body_geometry_mismatch() {
        // Hand-assemble a header claiming 4x5 with a 5x10 body frame.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"earlog 1\ngeometry 4x5\ntick_rate 120\n\n");
        let grid = crate::grid::PressureGrid::constant(GridGeometry::sensor(), 7);
        let frame = WireFrame::pressure(FingerId::Index, 0, 0, &grid).unwrap();
        bytes.extend_from_slice(&crate::transport::encode(&frame));
        let replayer = Replayer::new(bytes.as_slice()).unwrap();
        let results: Vec<_> = replayer.collect();
        assert_eq!(results.len(), 1);
        assert!(matches!(
            results[0],
            Err(RecordingError::GeometryMismatch { .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scroll.earlog");
        let frames = scroll_frames();
        let header = RecordingHeader::for_geometry(GridGeometry::sensor());
        assert_eq!(
            record_to_path(&path, header, &frames).unwrap(),
            frames.len() as u64
        );
        let (_, replayed) = replay_from_path(&path).unwrap();
        assert_eq!(replayed, frames);
    }
}
