use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::{LinearLayout, MlpLayout, NetMode, HIDDEN};
use super::window::CommandWindow;
use crate::analytical::{kinematics_step, RobotParams};
use crate::autodiff::{ParamVector, Real};
use crate::ego::{EgoState, TransformMode};
use crate::error::{invalid, Error, Result};
use crate::types::{ChassisTwist, Pose};

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Lr,
    Mlp,
    /// Dynamical hybrid: the network corrects the twist fed to the kinematics.
    FormulatedPlusMlp,
    /// Kinematic hybrid: the network adds a residual to the formulated output.
    MlpPlusFormulated,
    /// Formulated model only; its robot parameters are searched, not trained.
    ParamOnly,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Mlp => "mlp",
            ModelKind::FormulatedPlusMlp => "formulated+mlp",
            ModelKind::MlpPlusFormulated => "mlp+formulated",
            ModelKind::ParamOnly => "paramonly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lr" => ModelKind::Lr,
            "mlp" => ModelKind::Mlp,
            "formulated+mlp" | "dynamical" => ModelKind::FormulatedPlusMlp,
            "mlp+formulated" | "kinematic" => ModelKind::MlpPlusFormulated,
            "paramonly" | "formulated" => ModelKind::ParamOnly,
            _ => return None,
        })
    }

    /// True when the formulated model (and its actuator state) is part of the step.
    pub fn uses_formulated(&self) -> bool {
        matches!(self, ModelKind::FormulatedPlusMlp | ModelKind::MlpPlusFormulated | ModelKind::ParamOnly)
    }

    /// True when there are parameters to fit by gradient descent.
    pub fn is_differentiable(&self) -> bool {
        !matches!(self, ModelKind::ParamOnly)
    }

    fn uses_mlp(&self) -> bool {
        matches!(self, ModelKind::Mlp | ModelKind::FormulatedPlusMlp | ModelKind::MlpPlusFormulated)
    }
}

/// Pose history length `H`, command window span `T` (seconds) and the
/// number of hold bins `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutWindow {
    pub history: usize,
    pub span: f64,
    pub bins: usize,
}

impl Default for RolloutWindow {
    fn default() -> Self {
        RolloutWindow { history: 1, span: 0.2, bins: 5 }
    }
}

impl RolloutWindow {
    pub fn validate(&self) -> Result<()> {
        if self.history == 0 || self.bins == 0 || !(self.span > 0.0) {
            return Err(invalid!("window needs H >= 1, K >= 1 and T > 0"));
        }
        Ok(())
    }

    /// Length of the base feature vector, `3 H + 2 K`.
    pub fn feature_dim(&self) -> usize {
        3 * self.history + 2 * self.bins
    }
}

/// Frozen input standardization and output scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub feat_mean: Vec<f64>,
    pub feat_scale: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_scale: Vec<f64>,
}

impl NormStats {
    pub fn identity(n_in: usize, n_out: usize) -> Self {
        NormStats {
            feat_mean: vec![0.0; n_in],
            feat_scale: vec![1.0; n_in],
            out_mean: vec![0.0; n_out],
            out_scale: vec![1.0; n_out],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Net {
    None,
    Linear(LinearLayout),
    Mlp(MlpLayout),
}

/// A complete, serializable model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub transform: TransformMode,
    pub window: RolloutWindow,
    pub params: ParamVector,
    pub robot: RobotParams,
    pub norm: NormStats,
    /// Seconds of command history replayed to estimate the actuator state
    /// at the start of a rollout.
    pub warmup: f64,
    net: Net,
}

/// Inputs of one model step for one rollout.
pub struct StepContext<'a, S> {
    pub state: &'a EgoState<S>,
    pub window: &'a CommandWindow,
    /// Formulated actuator twist after this step's update (ignored by
    /// purely learned models).
    pub twist: ChassisTwist,
}

pub const DEFAULT_WARMUP: f64 = 1.0;

impl ModelSpec {
    /// A fresh model with seeded initial weights and identity normalization.
    pub fn new(
        kind: ModelKind,
        transform: TransformMode,
        window: RolloutWindow,
        robot: RobotParams,
        seed: u64,
    ) -> Result<Self> {
        window.validate()?;
        robot.validate()?;
        let n_in = window.feature_dim() + if kind == ModelKind::MlpPlusFormulated { 3 } else { 0 };
        let n_out = if kind == ModelKind::FormulatedPlusMlp { 2 } else { 3 };
        let mut params = ParamVector::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = move |b: f64| if b > 0.0 { rng.random_range(-b..b) } else { 0.0 };
        let net = match kind {
            ModelKind::ParamOnly => Net::None,
            ModelKind::Lr => {
                let l = LinearLayout::build(&mut params, "lr", n_in, n_out);
                l.init(&mut params, &mut uniform);
                Net::Linear(l)
            }
            _ => {
                let m = MlpLayout::build(&mut params, "mlp", n_in, &HIDDEN, n_out);
                m.init(&mut params, &mut uniform, kind != ModelKind::Mlp);
                Net::Mlp(m)
            }
        };
        let n_out = if kind == ModelKind::ParamOnly { 0 } else { n_out };
        let n_in = if kind == ModelKind::ParamOnly { 0 } else { n_in };
        Ok(ModelSpec {
            kind,
            transform,
            window,
            params,
            robot,
            norm: NormStats::identity(n_in, n_out),
            warmup: DEFAULT_WARMUP,
            net,
        })
    }

    /// Rebuilds the network layout for `kind`/`window` and installs the
    /// given parameters and statistics, checking every dimension.
    pub fn from_parts(
        kind: ModelKind,
        transform: TransformMode,
        window: RolloutWindow,
        robot: RobotParams,
        params: ParamVector,
        norm: NormStats,
        warmup: f64,
    ) -> Result<Self> {
        let mut spec = ModelSpec::new(kind, transform, window, robot, 0)?;
        if !spec.params.same_layout(&params) {
            return Err(Error::Dimension {
                expected: spec.params.len(),
                found: params.len(),
                what: "parameter layout",
            });
        }
        let check = |a: &[f64], b: &[f64], what| {
            if a.len() == b.len() {
                Ok(())
            } else {
                Err(Error::Dimension { expected: a.len(), found: b.len(), what })
            }
        };
        check(&spec.norm.feat_mean, &norm.feat_mean, "feature mean")?;
        check(&spec.norm.feat_scale, &norm.feat_scale, "feature scale")?;
        check(&spec.norm.out_mean, &norm.out_mean, "output mean")?;
        check(&spec.norm.out_scale, &norm.out_scale, "output scale")?;
        spec.params = params;
        spec.norm = norm;
        spec.warmup = warmup;
        Ok(spec)
    }

    /// Network input dimension (0 for the parameter-only model).
    pub fn input_dim(&self) -> usize {
        self.norm.feat_mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.norm.out_mean.len()
    }

    /// Seconds of commands a step must see: the bin span or the latency.
    pub fn command_reach(&self) -> f64 {
        let lat = if self.kind.uses_formulated() { self.robot.cmd_latency } else { 0.0 };
        self.window.span.max(lat)
    }

    /// Seconds of history a rollout start needs.
    pub fn required_history(&self) -> f64 {
        let warm = if self.kind.uses_formulated() { self.warmup + self.robot.cmd_latency } else { 0.0 };
        self.window.span.max(warm)
    }

    /// Predicts the next local pose for each rollout in the batch.
    ///
    /// `p` holds the parameter values as `S` (plain values or tape vars) in
    /// the layout of `self.params`.
    pub fn predict_batch<S: Real>(
        &self,
        p: &[S],
        ctx: &[StepContext<'_, S>],
        dt: f64,
        mode: &mut NetMode<'_>,
    ) -> Result<Vec<Pose<S>>> {
        if p.len() != self.params.len() {
            return Err(Error::Dimension { expected: self.params.len(), found: p.len(), what: "parameters" });
        }
        if ctx.is_empty() {
            return Ok(Vec::new());
        }
        // formulated output from the current local pose, when needed
        let formulated: Vec<Pose<S>> = if self.kind.uses_formulated() {
            ctx.iter()
                .map(|c| {
                    let cur = c.state.current();
                    let tw = ChassisTwist::new(cur.x.lift(c.twist.s), cur.x.lift(c.twist.omega));
                    kinematics_step(cur, tw, dt)
                })
                .collect()
        } else {
            Vec::new()
        };
        if self.kind == ModelKind::ParamOnly {
            return Ok(formulated);
        }
        let rows: Vec<Vec<S>> = ctx
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut f = featurize(c.state, c.window);
                if self.kind == ModelKind::MlpPlusFormulated {
                    let fo = formulated[i];
                    f.extend_from_slice(&[fo.x, fo.y, fo.theta]);
                }
                self.standardize(f)
            })
            .collect::<Result<_>>()?;
        let raw: Vec<Vec<S>> = match &self.net {
            Net::Linear(l) => rows.iter().map(|x| l.forward(p, x)).collect::<Result<_>>()?,
            Net::Mlp(m) => m.forward(p, &rows, mode)?,
            Net::None => unreachable!(),
        };
        let scale = |o: &[S], k: usize| o[k] * self.norm.out_scale[k] + self.norm.out_mean[k];
        let out = raw
            .iter()
            .enumerate()
            .map(|(i, o)| match self.kind {
                ModelKind::Lr | ModelKind::Mlp => Pose::new(scale(o, 0), scale(o, 1), scale(o, 2)),
                ModelKind::FormulatedPlusMlp => {
                    let c = &ctx[i];
                    let cur = c.state.current();
                    let tw = ChassisTwist::new(scale(o, 0) + c.twist.s, scale(o, 1) + c.twist.omega);
                    kinematics_step(cur, tw, dt)
                }
                ModelKind::MlpPlusFormulated => {
                    let fo = formulated[i];
                    Pose::new(fo.x + scale(o, 0), fo.y + scale(o, 1), fo.theta + scale(o, 2))
                }
                ModelKind::ParamOnly => unreachable!(),
            })
            .collect();
        Ok(out)
    }

    fn standardize<S: Real>(&self, mut f: Vec<S>) -> Result<Vec<S>> {
        if f.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), found: f.len(), what: "feature vector" });
        }
        for ((x, m), s) in f.iter_mut().zip(&self.norm.feat_mean).zip(&self.norm.feat_scale) {
            if *m != 0.0 || *s != 1.0 {
                *x = (*x - *m) * (1.0 / *s);
            }
        }
        Ok(f)
    }

    /// Plain-value prediction for a single rollout in eval mode.
    pub fn predict(&self, ctx: &StepContext<'_, f64>, dt: f64) -> Result<Pose> {
        let mut out = self.predict_batch(&self.params.values, core::slice::from_ref(ctx), dt, &mut NetMode::Eval)?;
        Ok(out.pop().expect("one prediction per context"))
    }

    /// Learnable parameter mask (false for running statistics).
    pub fn learnable(&self) -> Vec<bool> {
        self.params.learnable_mask()
    }

    /// Parameters of the output layer, which hybrids start at zero.
    pub fn output_layer_segments(&self) -> [&'static str; 2] {
        ["mlp.out.w", "mlp.out.b"]
    }

    pub(crate) fn has_mlp(&self) -> bool {
        self.kind.uses_mlp()
    }
}

/// Feature vector: flattened local history (oldest first), then the
/// command bins (oldest first).
pub fn featurize<S: Real>(st: &EgoState<S>, cmds: &CommandWindow) -> Vec<S> {
    let like = st.current().x;
    let mut f = Vec::with_capacity(3 * st.history.len() + 2 * cmds.len());
    st.history_features(&mut f);
    for &(s, w) in &cmds.bins {
        f.push(like.lift(s));
        f.push(like.lift(w));
    }
    f
}

/// Affine map `W f + b` with three outputs read as a local pose.
pub fn lr_forward<S: Real>(f: &[S], p: &[S], n_in: usize) -> Result<Pose<S>> {
    let expected = 3 * n_in + 3;
    if p.len() != expected {
        return Err(Error::Dimension { expected, found: p.len(), what: "linear parameters" });
    }
    let mut scratch = ParamVector::new();
    let l = LinearLayout::build(&mut scratch, "lr", n_in, 3);
    let o = l.forward(p, f)?;
    Ok(Pose::new(o[0], o[1], o[2]))
}

/// Batched MLP forward with the standard hidden widths and three outputs.
pub fn mlp_forward<S: Real>(fs: &[Vec<S>], p: &[S], n_in: usize, mode: &mut NetMode<'_>) -> Result<Vec<Pose<S>>> {
    let mut scratch = ParamVector::new();
    let m = MlpLayout::build(&mut scratch, "mlp", n_in, &HIDDEN, 3);
    if p.len() != scratch.len() {
        return Err(Error::Dimension { expected: scratch.len(), found: p.len(), what: "mlp parameters" });
    }
    Ok(m.forward(p, fs, mode)?.into_iter().map(|o| Pose::new(o[0], o[1], o[2])).collect())
}

/// Dynamical hybrid step: the network's twist correction is added to the
/// formulated actuator twist before integrating the kinematics.
pub fn dynamical_hybrid_forward<S: Real>(
    ctx: &StepContext<'_, S>,
    spec: &ModelSpec,
    p: &[S],
    dt: f64,
) -> Result<Pose<S>> {
    if spec.kind != ModelKind::FormulatedPlusMlp {
        return Err(invalid!("model kind {} is not the dynamical hybrid", spec.kind.name()));
    }
    let mut out = spec.predict_batch(p, core::slice::from_ref(ctx), dt, &mut NetMode::Eval)?;
    Ok(out.pop().expect("one prediction"))
}

/// Kinematic hybrid step: formulated output plus the network's residual.
pub fn kinematic_hybrid_forward<S: Real>(
    ctx: &StepContext<'_, S>,
    spec: &ModelSpec,
    p: &[S],
    dt: f64,
) -> Result<Pose<S>> {
    if spec.kind != ModelKind::MlpPlusFormulated {
        return Err(invalid!("model kind {} is not the kinematic hybrid", spec.kind.name()));
    }
    let mut out = spec.predict_batch(p, core::slice::from_ref(ctx), dt, &mut NetMode::Eval)?;
    Ok(out.pop().expect("one prediction"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytical::actuator_update;
    use crate::ego::TransformMode;
    use crate::types::Command;
    use proptest::prelude::*;

    const ALL: [ModelKind; 5] = [
        ModelKind::Lr,
        ModelKind::Mlp,
        ModelKind::FormulatedPlusMlp,
        ModelKind::MlpPlusFormulated,
        ModelKind::ParamOnly,
    ];

    fn const_window(s: f64, w: f64) -> CommandWindow {
        CommandWindow::from_commands(alloc::vec![Command::new(-1.0, s, w)], 0.2, 5).unwrap()
    }

    #[test]
    fn features_for_a_fresh_state() {
        let st = EgoState::start(TransformMode::Egocentric, &[Pose::new(3.0, 1.0, 0.4)]).unwrap();
        let f = featurize(&st, &const_window(1.0, 0.0));
        let mut expect = alloc::vec![0.0; 3];
        for _ in 0..5 {
            expect.extend_from_slice(&[1.0, 0.0]);
        }
        assert_eq!(f, expect);
    }

    #[test]
    fn dimensions_and_names() {
        let w = RolloutWindow { history: 3, span: 0.2, bins: 4 };
        for kind in ALL {
            assert_eq!(ModelKind::parse(kind.name()), Some(kind));
            let s = ModelSpec::new(kind, TransformMode::Egocentric, w, RobotParams::default(), 1).unwrap();
            let (i, o) = match kind {
                ModelKind::ParamOnly => (0, 0),
                ModelKind::MlpPlusFormulated => (20, 3),
                ModelKind::FormulatedPlusMlp => (17, 2),
                _ => (17, 3),
            };
            assert_eq!((s.input_dim(), s.output_dim()), (i, o), "{kind:?}");
        }
        assert!(ModelKind::parse("gru").is_none());
        assert!(ModelSpec::new(
            ModelKind::Lr,
            TransformMode::None,
            RolloutWindow { history: 0, ..w },
            RobotParams::default(),
            0
        )
        .is_err());
    }

    #[test]
    fn seeded_initialization() {
        let w = RolloutWindow::default();
        let a = ModelSpec::new(ModelKind::Mlp, TransformMode::Egocentric, w, RobotParams::default(), 4).unwrap();
        let b = ModelSpec::new(ModelKind::Mlp, TransformMode::Egocentric, w, RobotParams::default(), 4).unwrap();
        let c = ModelSpec::new(ModelKind::Mlp, TransformMode::Egocentric, w, RobotParams::default(), 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn from_parts_checks_layout() {
        let w = RolloutWindow::default();
        let a = ModelSpec::new(ModelKind::FormulatedPlusMlp, TransformMode::Egocentric, w, RobotParams::default(), 4)
            .unwrap();
        let back =
            ModelSpec::from_parts(a.kind, a.transform, a.window, a.robot, a.params.clone(), a.norm.clone(), a.warmup)
                .unwrap();
        assert_eq!(a, back);
        let lr = ModelSpec::new(ModelKind::Lr, TransformMode::Egocentric, w, RobotParams::default(), 4).unwrap();
        assert!(
            ModelSpec::from_parts(a.kind, a.transform, a.window, a.robot, lr.params, a.norm.clone(), a.warmup).is_err()
        );
        let mut norm = a.norm.clone();
        norm.out_scale.push(1.0);
        assert!(
            ModelSpec::from_parts(a.kind, a.transform, a.window, a.robot, a.params.clone(), norm, a.warmup).is_err()
        );
    }

    proptest! {
        #[test]
        fn zero_initialized_hybrids_are_the_formulated_model(
            x in -5.0f64..5.0, y in -5.0f64..5.0, th in -3.0f64..3.0,
            s in -0.5f64..0.5, w in -1.5f64..1.5, ts in -0.5f64..0.5, tw in -1.5f64..1.5,
            seed in 0u64..100,
        ) {
            let robot = RobotParams::default();
            let win = const_window(s, w);
            let twist = actuator_update(ChassisTwist::new(ts, tw), (s, w), &robot, 1.0 / 60.0);
            for mode in [TransformMode::Egocentric, TransformMode::None] {
                let st = EgoState::start(mode, &[Pose::new(x, y, th)]).unwrap();
                let ctx = StepContext { state: &st, window: &win, twist };
                let base = ModelSpec::new(ModelKind::ParamOnly, mode, RolloutWindow::default(), robot, 0).unwrap();
                let expect = base.predict(&ctx, 1.0 / 60.0).unwrap();
                for kind in [ModelKind::FormulatedPlusMlp, ModelKind::MlpPlusFormulated] {
                    let spec = ModelSpec::new(kind, mode, RolloutWindow::default(), robot, seed).unwrap();
                    prop_assert_eq!(spec.predict(&ctx, 1.0 / 60.0).unwrap(), expect);
                }
            }
        }
    }

    #[test]
    fn standalone_forwards_agree_with_the_spec() {
        let w = RolloutWindow { history: 2, ..Default::default() };
        let st = EgoState::start(TransformMode::Egocentric, &[Pose::new(0.0, 0.0, 0.0), Pose::new(0.01, 0.002, 0.03)])
            .unwrap();
        let win = const_window(0.3, -0.2);
        let ctx = StepContext { state: &st, window: &win, twist: ChassisTwist::new(0.25, -0.1) };
        let lr = ModelSpec::new(ModelKind::Lr, TransformMode::Egocentric, w, RobotParams::default(), 2).unwrap();
        let f = featurize(&st, &win);
        assert_eq!(lr_forward(&f, &lr.params.values, f.len()).unwrap(), lr.predict(&ctx, 0.02).unwrap());
        let mlp = ModelSpec::new(ModelKind::Mlp, TransformMode::Egocentric, w, RobotParams::default(), 2).unwrap();
        let got = mlp_forward(core::slice::from_ref(&f), &mlp.params.values, f.len(), &mut NetMode::Eval).unwrap();
        assert_eq!(got[0], mlp.predict(&ctx, 0.02).unwrap());
        for kind in [ModelKind::FormulatedPlusMlp, ModelKind::MlpPlusFormulated] {
            let mut h = ModelSpec::new(kind, TransformMode::Egocentric, w, RobotParams::default(), 2).unwrap();
            h.params.values.iter_mut().for_each(|v| *v += 0.01);
            let p = h.params.values.clone();
            let a = if kind == ModelKind::FormulatedPlusMlp {
                dynamical_hybrid_forward(&ctx, &h, &p, 0.02).unwrap()
            } else {
                kinematic_hybrid_forward(&ctx, &h, &p, 0.02).unwrap()
            };
            assert_eq!(a, h.predict(&ctx, 0.02).unwrap());
        }
        assert!(dynamical_hybrid_forward(&ctx, &lr, &lr.params.values, 0.02).is_err());
    }

    #[test]
    fn history_requirements() {
        let mut s = ModelSpec::new(
            ModelKind::FormulatedPlusMlp,
            TransformMode::Egocentric,
            RolloutWindow::default(),
            RobotParams::default(),
            0,
        )
        .unwrap();
        s.robot.cmd_latency = 0.3;
        assert_eq!(s.command_reach(), 0.3);
        assert_eq!(s.required_history(), s.warmup + 0.3);
        let m = ModelSpec::new(
            ModelKind::Mlp,
            TransformMode::Egocentric,
            RolloutWindow::default(),
            RobotParams::default(),
            0,
        )
        .unwrap();
        assert_eq!(m.required_history(), 0.2);
    }
}
