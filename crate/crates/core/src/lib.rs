//! Time-adaptive symplectic networks for learning flow maps of autonomous
//! and non-autonomous Hamiltonian systems.
//!
//! ```
//! use tsympnet::{init_model, Arch, Kind, PhasePoint};
//!
//! let model = init_model(Kind::Tla, 1, Arch::linear(4, 2), 7).unwrap();
//! let x = PhasePoint::from_pq(1.0, 0.0);
//! assert_eq!(model.forward(0.0, None, &x).unwrap(), x);
//! ```

pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod hamiltonians;
pub mod integrators;
pub mod phase;
pub mod plot;
pub mod sympnet;
pub mod training;
pub mod verify;

pub use autodiff::{loss_and_gradients, pullback, Loss, ParamGradients};
pub use error::{Error, Result};
pub use hamiltonians::{FlowAccuracy, Forcing, HamiltonianSystem, Separable, SystemId};
pub use phase::{max_trajectory_error, PhasePoint};
pub use sympnet::{
    init_model, init_model_with, load_checkpoint, save_checkpoint, symplectic_residual, Activation,
    Arch, InitConfig, Kind, SympNetModel,
};
pub use training::{
    rollout, sample_dataset, train, DatasetSpec, TestSpec, TrainConfig, TrainOutcome,
    TrainingSample,
};
pub use verify::VerificationReport;
