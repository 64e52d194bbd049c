//! leakstack-core: simulation and analysis library for coupler-assisted
//! leakage reduction on superconducting-qubit processors.
//!
//! The library spans four layers:
//!
//! - numerical core (generic over the float type): [`tensorspace`],
//!   [`linalg`], [`special`], [`capnet`], the integration engine behind
//!   [`dynamics`], and the readout classifier in [`readout`];
//! - a static device model ([`device`]) loaded from a TOML config, with a
//!   shipped `paper_device` profile;
//! - pulse-level protocols ([`protocols`]): coupler reset, state-selective
//!   qubit-coupler swaps, calibration scans, efficiency metrics;
//! - circuit-level experiments ([`experiments`]): leakage propagation,
//!   randomized benchmarking, stabilizer cycles with leakage injection, and
//!   repetition-rate studies.
//!
//! Everything the experiments expose is deterministic for a fixed seed,
//! independent of worker count.

pub mod capnet;
pub mod device;
pub mod dynamics;
pub mod experiments;
pub mod linalg;
pub mod protocols;
pub mod readout;
pub mod scalar;
pub mod special;
pub mod tensorspace;

pub use scalar::Real;

/// Concrete f64 instantiations of the generic core, used by the device
/// model, the protocol layer and the CLI.
pub type Cplx = num_complex::Complex<f64>;
pub type Operator = tensorspace::Operator<f64>;
pub type StateVector = tensorspace::StateVector<f64>;
pub type DensityMatrix = tensorspace::DensityMatrix<f64>;
pub type EvolutionResult = dynamics::EvolutionResult<f64>;
pub type LindbladModel = dynamics::LindbladModel<f64>;
pub type GmmModel = readout::GmmModel<f64>;
pub type ShotBatch = readout::ShotBatch<f64>;
pub type AssignmentReport = readout::AssignmentReport<f64>;
pub type CouplingSet = capnet::CouplingSet<f64>;
pub type CapacitanceNetwork = capnet::CapacitanceNetwork<f64>;
