//! Resource allocation for heterogeneous cellular networks and virtualized
//! cloud radio access networks.
//!
//! * [`linalg`]: numerical kernels shared by the solvers.
//! * [`scenario`]: network instance generation and channel gains.
//! * [`powerctl`]: joint base-station association and power control with
//!   target-tracking, opportunistic and hybrid update rules.
//! * [`ofdma`]: femtocell subchannel and power allocation.
//! * [`cranvirt`]: rate, quantization and slicing for a shared C-RAN.
//! * [`harness`]: Monte Carlo experiment orchestration and CSV output.

pub mod cranvirt;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod ofdma;
pub mod powerctl;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
