//! Fault-injecting simulated link. Operates entirely in integer ticks so
//! delivery schedules reproduce exactly from a seed.

use rand::distributions::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TransportError, WireFrame};

/// Link fault model. Each frame is independently dropped with
/// `loss_probability`; survivors are delayed by `latency_ticks` plus a
/// uniform integer jitter in `0..=jitter_ticks`. Reordering arises
/// naturally from jitter, and additionally from explicit adjacent swaps
/// with `reorder_probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub latency_ticks: u64,
    pub jitter_ticks: u64,
    pub loss_probability: f64,
    pub reorder_probability: f64,
    pub rng_seed: u64,
}

impl LinkModel {
    /// Near-ideal defaults: one tick of latency, no jitter, no loss.
    pub fn ideal(rng_seed: u64) -> Self {
        Self {
            latency_ticks: 1,
            jitter_ticks: 0,
            loss_probability: 0.0,
            reorder_probability: 0.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        for (name, p) in [
            ("loss_probability", self.loss_probability),
            ("reorder_probability", self.reorder_probability),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(TransportError::InvalidField {
                    context: format!("{name} {p} outside [0, 1)"),
                });
            }
        }
        Ok(())
    }
}

/// A frame that survived the link, with the tick it arrives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub frame: WireFrame,
    pub sent_tick: u64,
    pub delivery_tick: u64,
}

/// Push a tick-ordered frame stream through the link model.
///
/// Draw order is fixed: one loss draw per input frame, then one jitter
/// draw per survivor (when jitter is enabled), then one swap draw per
/// adjacent delivered pair. Deliveries come back sorted by delivery tick
/// with ties keeping send order.
pub fn link_transmit(
    frames: &[WireFrame],
    model: &LinkModel,
) -> Result<Vec<Delivery>, TransportError> {
    model.validate()?;
    debug_assert!(
        frames.windows(2).all(|w| w[0].tick <= w[1].tick),
        "input stream must be tick-ordered"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    let mut deliveries = Vec::with_capacity(frames.len());
    for frame in frames {
        let u: f64 = rng.sample(OpenClosed01);
        if u <= model.loss_probability {
            continue;
        }
        let jitter = if model.jitter_ticks > 0 {
            rng.gen_range(0..=model.jitter_ticks)
        } else {
            0
        };
        deliveries.push(Delivery {
            sent_tick: frame.tick,
            delivery_tick: frame.tick + model.latency_ticks + jitter,
            frame: frame.clone(),
        });
    }
    deliveries.sort_by_key(|d| d.delivery_tick);
    if model.reorder_probability > 0.0 {
        for idx in 0..deliveries.len().saturating_sub(1) {
            let u: f64 = rng.sample(OpenClosed01);
            if u <= model.reorder_probability {
                // Swap the frames between adjacent delivery slots; the
                // slots keep their ticks, so arrival order flips.
                let (left, right) = deliveries.split_at_mut(idx + 1);
                std::mem::swap(&mut left[idx].frame, &mut right[0].frame);
                std::mem::swap(&mut left[idx].sent_tick, &mut right[0].sent_tick);
            }
        }
    }
    Ok(deliveries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FingerId, GridGeometry, PressureGrid};
    use crate::transport::WireFrame;

    fn frame_stream(count: u32) -> Vec<WireFrame> {
        let grid = PressureGrid::constant(GridGeometry::new(2, 2, 2.0).unwrap(), 9);
        (0..count)
            .map(|seq| WireFrame::pressure(FingerId::Index, seq, seq as u64, &grid).unwrap())
            .collect()
    }

    #[test]
    fn degenerate_link_is_a_pure_delay() {
        let frames = frame_stream(100);
        let model = LinkModel {
            latency_ticks: 3,
            jitter_ticks: 0,
            loss_probability: 0.0,
            reorder_probability: 0.0,
            rng_seed: 1,
        };
        let out = link_transmit(&frames, &model).unwrap();
        assert_eq!(out.len(), 100);
        for (delivery, frame) in out.iter().zip(&frames) {
            assert_eq!(delivery.frame, *frame);
            assert_eq!(delivery.delivery_tick, frame.tick + 3);
        }
    }

    #[test]
    fn loss_is_binomial() {
        let frames = frame_stream(10_000);
        let model = LinkModel {
            latency_ticks: 0,
            jitter_ticks: 0,
            loss_probability: 0.2,
            reorder_probability: 0.0,
            rng_seed: 0x5eed_3001,
        };
        let out = link_transmit(&frames, &model).unwrap();
        let sigma = (10_000.0f64 * 0.2 * 0.8).sqrt();
        assert!(
            (out.len() as f64 - 8_000.0).abs() <= 3.0 * sigma,
            "delivered {}",
            out.len()
        );
    }

    #[test]
    fn same_seed_same_schedule() {
        let frames = frame_stream(500);
        let model = LinkModel {
            latency_ticks: 2,
            jitter_ticks: 5,
            loss_probability: 0.3,
            reorder_probability: 0.1,
            rng_seed: 0x5eed_3002,
        };
        let a = link_transmit(&frames, &model).unwrap();
        let b = link_transmit(&frames, &model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn in_order_when_jitter_and_reorder_disabled() {
        let frames = frame_stream(1_000);
        let model = LinkModel {
            latency_ticks: 7,
            jitter_ticks: 0,
            loss_probability: 0.4,
            reorder_probability: 0.0,
            rng_seed: 0x5eed_3003,
        };
        let out = link_transmit(&frames, &model).unwrap();
        assert!(out.windows(2).all(|w| w[0].frame.sequence < w[1].frame.sequence));
    }

    #[test]
    fn jitter_stays_within_bound() {
        let frames = frame_stream(1_000);
        let model = LinkModel {
            latency_ticks: 2,
            jitter_ticks: 4,
            loss_probability: 0.0,
            reorder_probability: 0.0,
            rng_seed: 0x5eed_3004,
        };
        let out = link_transmit(&frames, &model).unwrap();
        assert_eq!(out.len(), 1_000);
        assert!(out
            .iter()
            .all(|d| (2..=6).contains(&(d.delivery_tick - d.sent_tick))));
    }

    #[test]
    fn rejects_out_of_range_probabilities() {
        let model = LinkModel {
            latency_ticks: 0,
            jitter_ticks: 0,
            loss_probability: 1.0,
            reorder_probability: 0.0,
            rng_seed: 0,
        };
        assert!(link_transmit(&frame_stream(1), &model).is_err());
    }
}
