pub mod dividends;
pub mod drawdown;
pub mod error;
pub mod levy_model;
pub mod montecarlo;
pub mod numerics;
pub mod parisian_kernel;
pub mod scale_fn;

pub use dividends::{DividendMoments, DividendQuery};
pub use drawdown::{DrawdownKind, DrawdownParisian, DrawdownSpec, SurvivalCurve};
pub use error::{Error, Result};
pub use levy_model::{JumpLaw, LevyModel, MarginalLaw, ModelConfig, ModelKind, TabulatedDensity};
pub use montecarlo::{SimConfig, SimEstimate, StopSpec};
pub use parisian_kernel::{ParisianKernel, PhiChi, PhiChiEngine};
pub use scale_fn::{ScaleFunctionSet, Strategy};
