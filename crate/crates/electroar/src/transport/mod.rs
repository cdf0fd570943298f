//! Byte-exact frame transport: the wire codec, a fault-injecting
//! simulated link, leader/follower session bookkeeping, and an optional
//! UDP carrier.
//!
//! Wire layout, all multi-byte fields little-endian:
//!
//! | offset | size | field |
//! |--------|------|-------|
//! | 0      | 4    | magic `EARF` |
//! | 4      | 1    | version (1) |
//! | 5      | 1    | frame type: 0 pressure, 1 stimulus-echo, 2 control |
//! | 6      | 1    | finger: 0 thumb, 1 index, 2 middle |
//! | 7      | 1    | flags, reserved (0) |
//! | 8      | 4    | sequence |
//! | 12     | 8    | tick (1 tick = 1/120 s) |
//! | 20     | 1    | width |
//! | 21     | 1    | height |
//! | 22     | 2wh  | payload, u16 per cell, row-major |
//! | 22+2wh | 4    | CRC-32 (IEEE) over all preceding bytes |
//!
//! Ticks are the only time unit on the wire; wall-clock mapping happens
//! at the edges.

mod crc32;
pub mod link;
pub mod session;
pub mod udp;

pub use link::{link_transmit, Delivery, LinkModel};
pub use session::{Role, SessionState};

use thiserror::Error;

use crate::grid::{FingerId, GridGeometry, PressureGrid};

pub const MAGIC: [u8; 4] = *b"EARF";
pub const VERSION: u8 = 1;
/// Fixed bytes before the payload.
pub const HEADER_LEN: usize = 22;
pub const CRC_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("geometry overflow: {width}x{height} does not fit the 1-byte wire fields")]
    GeometryOverflow { width: usize, height: usize },
    #[error("bad magic {found:02x?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {found}")]
    UnsupportedVersion { found: u8 },
    #[error("truncated frame: have {have} bytes, need {need}")]
    TruncatedFrame { have: usize, need: usize },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invalid field: {context}")]
    InvalidField { context: String },
    #[error("{extra} trailing bytes after a complete frame")]
    TrailingBytes { extra: usize },
    #[error("frame payload {got} values does not match {width}x{height}")]
    PayloadMismatch { got: usize, width: u8, height: u8 },
}

/// Message class carried by a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameType {
    Pressure,
    StimulusEcho,
    Control,
}

impl FrameType {
    pub fn code(&self) -> u8 {
        match self {
            FrameType::Pressure => 0,
            FrameType::StimulusEcho => 1,
            FrameType::Control => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FrameType::Pressure),
            1 => Some(FrameType::StimulusEcho),
            2 => Some(FrameType::Control),
            _ => None,
        }
    }
}

/// Logical frame crossing the link. Sequence numbers increase per
/// `(finger, frame_type)` stream; `tick` stamps the sensor time.
#[derive(Debug, Clone, PartialEq)]
pub struct WireFrame {
    pub frame_type: FrameType,
    pub finger: FingerId,
    pub flags: u8,
    pub sequence: u32,
    pub tick: u64,
    pub width: u8,
    pub height: u8,
    pub payload: Vec<u16>,
}

impl WireFrame {
    pub fn new(
        frame_type: FrameType,
        finger: FingerId,
        sequence: u32,
        tick: u64,
        width: u8,
        height: u8,
        payload: Vec<u16>,
    ) -> Result<Self, TransportError> {
        if width == 0 || height == 0 {
            return Err(TransportError::InvalidField {
                context: format!("zero dimension {width}x{height}"),
            });
        }
        if payload.len() != width as usize * height as usize {
            return Err(TransportError::PayloadMismatch {
                got: payload.len(),
                width,
                height,
            });
        }
        Ok(Self {
            frame_type,
            finger,
            flags: 0,
            sequence,
            tick,
            width,
            height,
            payload,
        })
    }

    /// Pressure frame wrapping a grid snapshot.
    pub fn pressure(
        finger: FingerId,
        sequence: u32,
        tick: u64,
        grid: &PressureGrid,
    ) -> Result<Self, TransportError> {
        let geo = grid.geometry();
        if geo.width() > 255 || geo.height() > 255 {
            return Err(TransportError::GeometryOverflow {
                width: geo.width(),
                height: geo.height(),
            });
        }
        Self::new(
            FrameType::Pressure,
            finger,
            sequence,
            tick,
            geo.width() as u8,
            geo.height() as u8,
            grid.values().to_vec(),
        )
    }

    /// Reconstruct the pressure grid carried in the payload.
    pub fn to_grid(&self, pitch_mm: f64) -> Result<PressureGrid, crate::grid::GridError> {
        let geometry = GridGeometry::new(self.width as usize, self.height as usize, pitch_mm)?;
        PressureGrid::new(geometry, self.payload.clone())
    }

    /// Total encoded length in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 2 * self.payload.len() + CRC_LEN
    }
}

/// Serialize a frame. The layout is deterministic; construction already
/// validated geometry, so this cannot fail.
pub fn encode(frame: &WireFrame) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(frame.encoded_len());
    bytes.extend_from_slice(&MAGIC);
    bytes.push(VERSION);
    bytes.push(frame.frame_type.code());
    bytes.push(frame.finger.code());
    bytes.push(frame.flags);
    bytes.extend_from_slice(&frame.sequence.to_le_bytes());
    bytes.extend_from_slice(&frame.tick.to_le_bytes());
    bytes.push(frame.width);
    bytes.push(frame.height);
    for value in &frame.payload {
        bytes.extend_from_slice(&value.to_le_bytes());
    }
    let crc = crc32::checksum(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    bytes
}

/// Parse one frame from the front of `bytes`, returning it with the
/// number of bytes consumed. Validation order: magic, version, length,
/// checksum, then field ranges.
pub fn decode_prefix(bytes: &[u8]) -> Result<(WireFrame, usize), TransportError> {
    if bytes.len() < MAGIC.len() {
        return Err(TransportError::TruncatedFrame {
            have: bytes.len(),
            need: HEADER_LEN + CRC_LEN,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(TransportError::BadMagic {
            found: [bytes[0], bytes[1], bytes[2], bytes[3]],
        });
    }
    if bytes.len() < 5 {
        return Err(TransportError::TruncatedFrame {
            have: bytes.len(),
            need: HEADER_LEN + CRC_LEN,
        });
    }
    if bytes[4] != VERSION {
        return Err(TransportError::UnsupportedVersion { found: bytes[4] });
    }
    if bytes.len() < HEADER_LEN {
        return Err(TransportError::TruncatedFrame {
            have: bytes.len(),
            need: HEADER_LEN + CRC_LEN,
        });
    }
    let width = bytes[20];
    let height = bytes[21];
    let payload_len = 2 * width as usize * height as usize;
    let total = HEADER_LEN + payload_len + CRC_LEN;
    if bytes.len() < total {
        return Err(TransportError::TruncatedFrame {
            have: bytes.len(),
            need: total,
        });
    }
    let crc_offset = total - CRC_LEN;
    let stored = u32::from_le_bytes(bytes[crc_offset..total].try_into().unwrap());
    let computed = crc32::checksum(&bytes[..crc_offset]);
    if stored != computed {
        return Err(TransportError::ChecksumMismatch { stored, computed });
    }
    let frame_type = FrameType::from_code(bytes[5]).ok_or_else(|| TransportError::InvalidField {
        context: format!("frame type {}", bytes[5]),
    })?;
    let finger = FingerId::from_code(bytes[6]).ok_or_else(|| TransportError::InvalidField {
        context: format!("finger {}", bytes[6]),
    })?;
    if bytes[7] != 0 {
        return Err(TransportError::InvalidField {
            context: format!("reserved flags {:#04x}", bytes[7]),
        });
    }
    if width == 0 || height == 0 {
        return Err(TransportError::InvalidField {
            context: format!("zero dimension {width}x{height}"),
        });
    }
    let sequence = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let tick = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload = bytes[HEADER_LEN..crc_offset]
        .chunks_exact(2)
        .map(|pair| u16::from_le_bytes([pair[0], pair[1]]))
        .collect();
    Ok((
        WireFrame {
            frame_type,
            finger,
            flags: 0,
            sequence,
            tick,
            width,
            height,
            payload,
        },
        total,
    ))
}

/// Parse a buffer holding exactly one frame.
pub fn decode(bytes: &[u8]) -> Result<WireFrame, TransportError> {
    let (frame, consumed) = decode_prefix(bytes)?;
    if consumed != bytes.len() {
        return Err(TransportError::TrailingBytes {
            extra: bytes.len() - consumed,
        });
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Bit-at-a-time CRC-32, independent of the table-driven
    /// implementation used by the codec.
    fn crc32_bitwise(bytes: &[u8]) -> u32 {
        let mut crc = 0xffff_ffffu32;
        for &byte in bytes {
            crc ^= byte as u32;
            for _ in 0..8 {
                crc = if crc & 1 != 0 {
                    (crc >> 1) ^ 0xedb8_8320
                } else {
                    crc >> 1
                };
            }
        }
        !crc
    }

    fn one_by_one_frame() -> WireFrame {
        let geo = GridGeometry::new(1, 1, 2.0).unwrap();
        let grid = PressureGrid::new(geo, vec![4]).unwrap();
        WireFrame::pressure(FingerId::Thumb, 0, 0, &grid).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> WireFrame {
        let width = rng.gen_range(1..=8u8);
        let height = rng.gen_range(1..=8u8);
        let payload = (0..width as usize * height as usize)
            .map(|_| rng.gen())
            .collect();
        WireFrame::new(
            FrameType::from_code(rng.gen_range(0..=2)).unwrap(),
            FingerId::from_code(rng.gen_range(0..=2)).unwrap(),
            rng.gen(),
            rng.gen(),
            width,
            height,
            payload,
        )
        .unwrap()
    }

    #[test]
    fn crc_matches_standard_vector() {
        // Canonical IEEE CRC-32 check value.
        assert_eq!(crc32::checksum(b"123456789"), 0xcbf4_3926);
        assert_eq!(crc32_bitwise(b"123456789"), 0xcbf4_3926);
    }

    #[test]
    fn encode_known_frame_layout() {
        let bytes = encode(&one_by_one_frame());
        assert_eq!(bytes.len(), HEADER_LEN + 2 + CRC_LEN);
        assert_eq!(&bytes[..8], &[0x45, 0x41, 0x52, 0x46, 0x01, 0x00, 0x00, 0x00]);
        assert_eq!(&bytes[8..20], &[0u8; 12]);
        assert_eq!(&bytes[20..24], &[0x01, 0x01, 0x04, 0x00]);
        // CRC cross-checked against the independent bitwise route.
        let stored = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
        assert_eq!(stored, crc32_bitwise(&bytes[..24]));
    }

    #[test]
    fn decode_inverts_encode() {
        let frame = one_by_one_frame();
        assert_eq!(decode(&encode(&frame)).unwrap(), frame);
    }

    #[test]
    fn flipped_payload_bit_is_detected() {
        let mut bytes = encode(&one_by_one_frame());
        bytes[22] ^= 0x01;
        assert!(matches!(
            decode(&bytes),
            Err(TransportError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn empty_input_is_truncated() {
        assert!(matches!(
            decode(&[]),
            Err(TransportError::TruncatedFrame { have: 0, .. })
        ));
    }

    #[test]
    fn version_is_checked_before_checksum() {
        // Patch the version byte and recompute the CRC: still rejected as
        // unsupported, proving the version check comes first.
        let mut bytes = encode(&one_by_one_frame());
        bytes[4] = 2;
        let crc_offset = bytes.len() - CRC_LEN;
        let crc = crc32::checksum(&bytes[..crc_offset]);
        bytes[crc_offset..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode(&bytes),
            Err(TransportError::UnsupportedVersion { found: 2 })
        ));
        // Same result without recomputing: version still wins over CRC.
        let mut stale = encode(&one_by_one_frame());
        stale[4] = 2;
        assert!(matches!(
            decode(&stale),
            Err(TransportError::UnsupportedVersion { found: 2 })
        ));
    }

    #[test]
    fn bad_magic_is_detected() {
        let mut bytes = encode(&one_by_one_frame());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(TransportError::BadMagic { .. })));
    }

    #[test]
    fn crafted_valid_crc_bad_field_is_rejected() {
        let mut bytes = encode(&one_by_one_frame());
        bytes[6] = 7; // no such finger
        let crc_offset = bytes.len() - CRC_LEN;
        let crc = crc32::checksum(&bytes[..crc_offset]);
        bytes[crc_offset..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode(&bytes),
            Err(TransportError::InvalidField { .. })
        ));
    }

    #[test]
    fn geometry_overflow_is_rejected() {
        let geo = GridGeometry::new(300, 2, 2.0).unwrap();
        let grid = PressureGrid::constant(geo, 1);
        assert!(matches!(
            WireFrame::pressure(FingerId::Index, 0, 0, &grid),
            Err(TransportError::GeometryOverflow { .. })
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = encode(&one_by_one_frame());
        bytes.push(0xaa);
        assert!(matches!(
            decode(&bytes),
            Err(TransportError::TrailingBytes { extra: 1 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// decode . encode = identity over randomized frames.
        #[test]
        fn round_trip_random_frames(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = random_frame(&mut rng);
            let bytes = encode(&frame);
            prop_assert_eq!(bytes.len(), frame.encoded_len());
            prop_assert_eq!(decode(&bytes).unwrap(), frame);
        }

        /// Any single corrupted byte yields a defined error, never a
        /// silently wrong frame.
        #[test]
        fn single_byte_corruption_never_silent(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = random_frame(&mut rng);
            let bytes = encode(&frame);
            let pos = rng.gen_range(0..bytes.len());
            let delta = rng.gen_range(1..=255u8);
            let mut corrupted = bytes.clone();
            corrupted[pos] ^= delta;
            match decode(&corrupted) {
                Err(
                    TransportError::BadMagic { .. }
                    | TransportError::UnsupportedVersion { .. }
                    | TransportError::TruncatedFrame { .. }
                    | TransportError::ChecksumMismatch { .. },
                ) => {}
                other => prop_assert!(false, "corruption at {pos} gave {other:?}"),
            }
        }
    }
}
