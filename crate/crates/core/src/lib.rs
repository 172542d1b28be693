//! Object-centric perception and planning for deformable linear object (DLO)
//! assembly: singulation from a cluttered bin, visual-tactile shape tracking,
//! robot-to-robot handover and clip mounting.
//!
//! Every stage runs against a deterministic synthetic scene simulator
//! ([`sim`]), so the perception and planning algorithms can be exercised
//! end to end without hardware.
//!
//! Module map:
//!
//! - [`geometry`]: polylines, tangents, image grids, IoU, PCA, DBSCAN,
//!   polynomial bridging and rigid translations.
//! - [`sim`]: bin generation, depth rendering, oracle segmentation, gripper,
//!   force/torque and tactile sensor models.
//! - [`segmentation`]: top-layer extraction, skeletonization, prompt sampling,
//!   mask post-processing and back-projection to 3D.
//! - [`pick`]: grasp pose derivation, force threshold and the pick state
//!   machine.
//! - [`tracking`]: DBSCAN / PCA / polynomial shape reconstruction and tactile
//!   translation correction.
//! - [`handover`]: second-robot grasp frame, TCP-space RRT-Connect and the
//!   local grasp correction loop.
//! - [`mounting`]: fixture approach planning and insertion.
//! - [`harness`]: experiment configuration, runners and CSV/JSON reporting.

pub mod geometry;
pub mod handover;
pub mod harness;
pub mod io;
pub mod mounting;
pub mod pick;
pub mod rng;
pub mod segmentation;
pub mod sim;
pub mod tracking;

/// Gravitational acceleration used by every force computation, m/s².
pub const GRAVITY: f64 = 9.81;
