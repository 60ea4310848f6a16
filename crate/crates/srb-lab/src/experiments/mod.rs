pub mod decay;
pub mod ergodic;
pub mod growth;
pub mod lyapunov;
pub mod recovery;
pub mod stability;

pub use decay::{estimate_exceptional_measure, DecayReport};
pub use ergodic::{birkhoff_density, density_cell_search, BirkhoffReport};
pub use growth::{fiber_growth, growth_survey, section_hull, GrowthLog, XInterval};
pub use lyapunov::{lyapunov_vertical, LyapunovSummary};
pub use recovery::{estimate_recovery_depth, RecoveryReport, RecoverySample};
pub use stability::{stability_sweep, StabilityConfig, StabilityEntry, StabilityReport};
