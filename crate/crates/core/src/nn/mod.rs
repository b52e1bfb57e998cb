//! Small exact-gradient networks: dense stacks, the policy/value network,
//! curiosity models and the recurrent credit network.

mod checkpoint;
mod dense;
mod gradcheck;
mod icm;
mod params;
mod policy;
mod recurrent;
mod sgd;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use dense::{Activation, Dense, Mlp, MlpCache};
pub use gradcheck::{max_relative_error, numeric_gradient, REL_ERROR_FLOOR};
pub use icm::{CuriosityArch, CuriosityNet};
pub use params::{Gradient, Layout, ModuleTag, ParamVector, TensorSpec};
pub use policy::{HeadDist, PolicyArch, PolicyNet, PolicyOutput, TypeAction};
pub use recurrent::{CreditArch, CreditNet, CreditOutput};
pub use sgd::{axpy, clip_norm, l2_norm, sgd_step};
