//! Distribution network reconfiguration: a loss-minimizing solver over
//! radial configurations plus numerically verified multiplier certificates
//! and constraint-qualification diagnostics for the resulting points.

pub mod error;
pub mod kkt;
pub mod model_aux;
pub mod model_dnr;
pub mod network;
pub mod nlp;
pub mod search;
pub mod system;
pub mod topology;

pub use error::{Error, Result};
pub use kkt::{
    check_kkt, check_licq, check_mfcq, lift_multipliers, recover_multipliers_least_squares,
    AuxMultipliers, DnrMultipliers, KktReport, LicqReport, MfcqReport,
};
pub use model_aux::AuxModel;
pub use model_dnr::{DnrModel, Layout, PrimalPoint};
pub use network::{build_network, load_network, validate, Network, NetworkFile};
pub use search::{
    solve_direct, solve_enumerate, solve_topology, Certificate, SearchOptions, StudyResult,
};
pub use system::{active_set, ConstraintSystem, ReducedSystem};
pub use topology::{enumerate_radial, is_radial, topology_from_ids, topology_of, Topology};
