//! Dynamics models behind one interface: given the frame state and the
//! command window, predict the next pose in the local frame.
//!
//! Five families are supported: linear regression, MLP, the dynamical
//! hybrid (learned twist correction fed into the formulated model), the
//! kinematic hybrid (learned residual on the formulated model's output) and
//! the formulated model alone with searched parameters.

mod net;
mod spec;
mod window;

pub use net::{LinearLayout, MlpLayout, NetMode, BN_EPS, BN_MOMENTUM, HIDDEN};
pub use spec::{
    dynamical_hybrid_forward, featurize, kinematic_hybrid_forward, lr_forward, mlp_forward, ModelKind, ModelSpec,
    NormStats, RolloutWindow, StepContext,
};
pub use window::CommandWindow;
