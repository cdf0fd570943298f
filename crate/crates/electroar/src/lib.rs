//! Desk-scale simulator of a tactile-transfer pipeline.
//!
//! A follower-side sensing glove samples 5x10 pressure grids per finger;
//! frames cross an imperfect link at a fixed 120 Hz cadence; the leader
//! side maps pressure through a psychophysically calibrated sigmoid into
//! per-electrode stimulation probabilities on a 4x5 display, and a random
//! modulator turns those into pulse events whose mean rate is `120 * p`
//! pulses per second. Calibration fitting and a recognition oracle close
//! the loop for experiments on synthetic bar and prism-scroll corpora.
//!
//! # Modules
//!
//! - [`grid`] — pressure grids, the 2x2-mean spatial filter, electrode
//!   resampling.
//! - [`psychophysics`] — the sigmoid transfer function `S = F(p)`, its
//!   inverse, and a deterministic fit from magnitude-estimation data.
//! - [`modulator`] — the 120 Hz tick engine and probabilistic pulse
//!   scheduling.
//! - [`transport`] — wire codec, simulated lossy link, session state,
//!   optional UDP carrier.
//! - [`patterns`] — bar and prism-scroll stimulus generators and the
//!   `earlog` recording format.
//! - [`analysis`] — stimulation maps, template and signature
//!   classifiers, confusion-matrix reports.
//! - [`pipeline`] — the end-to-end leader side, seeded and
//!   reproducible.
//! - [`cli`] — the `electroar` binary's subcommands.
//!
//! # Runnable examples
//!
//! One example per capability lives in `examples/`:
//!
//! ```bash
//! cargo run --example spatial_filtering
//! cargo run --example sigmoid_calibration
//! cargo run --example random_modulation
//! cargo run --example frame_codec
//! cargo run --example lossy_link
//! cargo run --example bar_patterns
//! cargo run --example prism_scroll
//! cargo run --example record_replay
//! cargo run --example end_to_end
//! cargo run --example udp_link
//! ```

pub mod analysis;
pub mod cli;
pub mod grid;
pub mod modulator;
pub mod patterns;
pub mod pipeline;
pub mod psychophysics;
pub mod transport;

pub use grid::{FingerId, GridGeometry, PressureGrid};
pub use modulator::{PulseEvent, SchedulerConfig, StimulusFrame, PULSE_WIDTH_US, TICK_RATE_HZ};
pub use psychophysics::SigmoidModel;
pub use transport::WireFrame;
