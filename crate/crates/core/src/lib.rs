//! Minimum-power wireless emulation of a wired small-cell backhaul.
//!
//! A macro BS with `2M` antennas serves two single-antenna small cells over
//! the air instead of by wire. Downlink traffic is split into zero-forced
//! private streams and a jointly decoded common stream; uplink traffic is
//! returned by XOR network coding at each small cell. The crate computes the
//! minimum BS power (an SDP relaxation per split), the extra small-cell power
//! needed on the return link, and simulates the protocol bit for bit.

pub mod beamforming;
pub mod bs_power;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod netcode;
pub mod rate_model;
pub mod sbs_power;
pub mod sdp;

pub use error::{Error, Result};
