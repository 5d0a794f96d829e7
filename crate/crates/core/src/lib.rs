//! Witnesses and certificates of genuine network entanglement for
//! three-party quantum states.
//!
//! * [`qlinalg`]: tensor-structured states and operators.
//! * [`states`]: GHZ/W states, product measurements, outcome statistics.
//! * [`witness`]: closed-form entropic and fidelity witnesses.
//! * [`inflation`]: the ring-inflation SDP relaxation and state certification.
//! * [`postselect`]: certification under postselection.
//! * [`seesaw`]: explicit network-2 models and see-saw lower bounds.

pub mod error;
pub mod inflation;
pub mod postselect;
pub mod qlinalg;
pub mod random;
pub mod seesaw;
pub mod states;
pub mod witness;

pub use error::{NetwitError, Result};
pub use netwit_sdp as sdp;
