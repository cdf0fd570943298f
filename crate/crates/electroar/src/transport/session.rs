//! Session bookkeeping on either end of the link.
//!
//! The leader applies a latest-wins policy: a frame whose tick is older
//! than the newest already delivered on its stream is worthless to a
//! 120 Hz display and is dropped. Anomalies never error; they become
//! counters.

use std::collections::BTreeMap;

use super::{FrameType, WireFrame};
use crate::grid::FingerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Follower,
    Leader,
}

#[derive(Debug, Clone, Copy, Default)]
struct StreamState {
    last_sequence: Option<u32>,
    newest_tick: Option<u64>,
}

/// Per-side session state: last sequence seen per `(finger, frame_type)`
/// stream plus gap and disorder counters.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub role: Role,
    streams: BTreeMap<(FingerId, FrameType), StreamState>,
    pub gap_count: u64,
    pub out_of_order_count: u64,
    pub handed_off: u64,
}

impl SessionState {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            streams: BTreeMap::new(),
            gap_count: 0,
            out_of_order_count: 0,
            handed_off: 0,
        }
    }

    /// Ingest one delivered frame. Returns the frame when it is fresh and
    /// should be handed to the mapping pipeline, `None` when it was
    /// discarded as stale.
    pub fn ingest(&mut self, frame: WireFrame) -> Option<WireFrame> {
        let stream = self
            .streams
            .entry((frame.finger, frame.frame_type))
            .or_default();
        if let Some(newest) = stream.newest_tick {
            if frame.tick < newest {
                self.out_of_order_count += 1;
                return None;
            }
        }
        if let Some(last) = stream.last_sequence {
            if frame.sequence <= last {
                // Duplicate or regressed sequence on a non-stale tick.
                self.out_of_order_count += 1;
                return None;
            }
            if frame.sequence > last + 1 {
                self.gap_count += u64::from(frame.sequence - last - 1);
            }
        }
        stream.last_sequence = Some(frame.sequence);
        stream.newest_tick = Some(frame.tick);
        self.handed_off += 1;
        Some(frame)
    }

    pub fn last_sequence(&self, finger: FingerId, frame_type: FrameType) -> Option<u32> {
        self.streams
            .get(&(finger, frame_type))
            .and_then(|s| s.last_sequence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridGeometry, PressureGrid};
    use crate::transport::link::{link_transmit, LinkModel};

    fn frame(seq: u32, tick: u64) -> WireFrame {
        let grid = PressureGrid::constant(GridGeometry::new(2, 2, 2.0).unwrap(), 5);
        WireFrame::pressure(FingerId::Index, seq, tick, &grid).unwrap()
    }

    #[test]
    fn in_order_frames_all_hand_off() {
        let mut session = SessionState::new(Role::Leader);
        for seq in 0..3u32 {
            assert!(session.ingest(frame(seq, seq as u64)).is_some());
        }
        assert_eq!(session.handed_off, 3);
        assert_eq!(session.gap_count, 0);
        assert_eq!(session.out_of_order_count, 0);
    }

    #[test]
    fn missing_frame_counts_as_gap() {
        let mut session = SessionState::new(Role::Leader);
        assert!(session.ingest(frame(0, 0)).is_some());
        assert!(session.ingest(frame(2, 2)).is_some());
        assert_eq!(session.handed_off, 2);
        assert_eq!(session.gap_count, 1);
    }

    #[test]
    fn stale_frame_is_discarded() {
        let mut session = SessionState::new(Role::Leader);
        assert!(session.ingest(frame(0, 0)).is_some());
        assert!(session.ingest(frame(2, 2)).is_some());
        assert!(session.ingest(frame(1, 1)).is_none());
        assert_eq!(session.handed_off, 2);
        assert_eq!(session.out_of_order_count, 1);
        assert_eq!(session.last_sequence(FingerId::Index, FrameType::Pressure), Some(2));
    }

    #[test]
    fn streams_are_tracked_independently() {
        let grid = PressureGrid::constant(GridGeometry::new(2, 2, 2.0).unwrap(), 5);
        let mut session = SessionState::new(Role::Leader);
        let index = WireFrame::pressure(FingerId::Index, 0, 10, &grid).unwrap();
        let thumb = WireFrame::pressure(FingerId::Thumb, 0, 5, &grid).unwrap();
        assert!(session.ingest(index).is_some());
        // Older tick, but a different stream: not stale.
        assert!(session.ingest(thumb).is_some());
        assert_eq!(session.out_of_order_count, 0);
    }

    #[test]
    fn handoff_ticks_increase_under_link_disorder() {
        let frames: Vec<WireFrame> = (0..2_000u32).map(|s| frame(s, s as u64)).collect();
        let model = LinkModel {
            latency_ticks: 1,
            jitter_ticks: 9,
            loss_probability: 0.2,
            reorder_probability: 0.2,
            rng_seed: 0x5eed_4001,
        };
        let deliveries = link_transmit(&frames, &model).unwrap();
        let mut session = SessionState::new(Role::Leader);
        let mut last_tick = None;
        let mut handed = 0;
        for delivery in deliveries {
            if let Some(fresh) = session.ingest(delivery.frame) {
                if let Some(prev) = last_tick {
                    assert!(fresh.tick >= prev, "hand-off went backwards");
                }
                last_tick = Some(fresh.tick);
                handed += 1;
            }
        }
        assert!(handed > 0);
        assert_eq!(session.handed_off, handed);
    }
}
