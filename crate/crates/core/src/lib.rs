//! Desk-scale human-structure-interaction toolkit.
//!
//! The forward chain synthesizes lower-limb gait, maps it to ground
//! reaction forces through link-segment inverse dynamics, drives a modal
//! floor model, and records geophone signals. The inverse chain estimates
//! the 12 critical joint flexion angles per gait cycle from those signals
//! with a physics-informed heterogeneous graph model, benchmarked against
//! an LSTM sequence regressor.

pub mod ad;
pub mod biomech;
pub mod floorsim;
pub mod gaitsynth;
pub mod gradcheck;
pub mod newmark;
pub mod pig;
