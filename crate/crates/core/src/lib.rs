//! Switching control of the Ćuk converter in continuous conduction mode using
//! piecewise linear Lyapunov functions.
//!
//! The crate is `no_std` (it needs `alloc` for traces) and contains the whole
//! numerical side: the two affine operating modes of the converter, the
//! polytopic switching law, the facet certificates and an exact event-driven
//! simulator. File formats and the command line live in the `cuk-pllf` crate.
//!
//! State vectors are always ordered `[i_L1, i_L2, v_C1, v_C2]`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certificate;
pub mod controller;
pub mod converter;
mod error;
pub mod metrics;
pub mod sim;
pub mod smallmat;

pub use certificate::{paper_certificates, verify_certificate, CertificatePair, CertificateReport};
pub use controller::{
    coefficients_from_spec, in_polytope, initial_switch_state, lyapunov_value, switch_decide,
    IndexSet, PolytopeSpec, SwitchState,
};
pub use converter::{
    averaged_balance_residual, build_subsystems, equilibrium, ConverterParams, EquilibriumPoint,
    OperatingSpec, SubsystemModel,
};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, default_steady_window, Metrics};
pub use sim::{
    find_crossing, propagate_exact, run_simulation, Crossing, SimConfig, SimRun, SwitchEvent,
    TraceSample,
};
pub use smallmat::{mat_exp, Mat4, Mat5, Vec4, Vec5};
