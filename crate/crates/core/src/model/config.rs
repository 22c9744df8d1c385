use super::ModelError;
use serde::{Deserialize, Serialize};

/// Which encoder row feeds the decoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// The last observed step `t_o`.
    #[default]
    LastObserved,
    /// Mean over the agent's valid observed steps.
    Mean,
}

/// Reference trajectory the decoder predicts offsets from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Last valid observed position, held.
    LastPosition,
    /// Last valid observed position extrapolated with the last observed velocity.
    #[default]
    ConstantVelocity,
}

/// Frame the decoder's planar offsets and variances are expressed in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeFrame {
    /// The scene's ego frame.
    Ego,
    /// Each agent's own pose at its last valid observed step (along-track, cross-track).
    #[default]
    Agent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Hidden width D.
    pub hidden: usize,
    pub heads: usize,
    pub tic_blocks: usize,
    pub agent_mlp_depth: usize,
    pub context_mlp_depth: usize,
    pub gmm_mlp_depth: usize,
    /// Depth of the feed-forward MLP after each attention module.
    pub ff_depth: usize,
    pub modes: usize,
    pub state_dim: usize,
    pub out_dim: usize,
    /// Decoded horizon F.
    pub future: usize,
    pub pooling: Pooling,
    pub anchor: Anchor,
    pub decode_frame: DecodeFrame,
    /// Metres per unit of normalized planar input.
    pub position_scale: f64,
    /// Metres per unit of normalized altitude input.
    pub altitude_scale: f64,
    pub velocity_scale: f64,
    pub vertical_scale: f64,
    pub sigma_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            heads: 8,
            tic_blocks: 3,
            agent_mlp_depth: 5,
            context_mlp_depth: 4,
            gmm_mlp_depth: 2,
            ff_depth: 5,
            modes: 4,
            state_dim: 4,
            out_dim: 7,
            future: 50,
            pooling: Pooling::LastObserved,
            anchor: Anchor::ConstantVelocity,
            decode_frame: DecodeFrame::Agent,
            position_scale: 100.0,
            altitude_scale: 100.0,
            velocity_scale: 200.0,
            vertical_scale: 0.5,
            sigma_scale: 0.1,
        }
    }
}

impl ModelConfig {
    /// D=16, h=2, L=1, M=2, for gradient checks and desk-scale training.
    pub fn tiny(future: usize) -> Self {
        Self { hidden: 16, heads: 2, tic_blocks: 1, modes: 2, future, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return bad("hidden width must be a positive multiple of heads");
        }
        if self.agent_mlp_depth == 0 || self.context_mlp_depth == 0 || self.gmm_mlp_depth == 0 || self.ff_depth == 0 {
            return bad("all MLP depths must be at least 1");
        }
        if self.modes == 0 || self.future == 0 {
            return bad("modes and future must be at least 1");
        }
        if self.state_dim != 4 || self.out_dim != 7 {
            return bad("state_dim must be 4 and out_dim 7");
        }
        let scales = [self.position_scale, self.altitude_scale, self.velocity_scale, self.vertical_scale, self.sigma_scale];
        if scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return bad("scales must be positive");
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        let c: Self = serde_json::from_slice(bytes).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// How the regression term mixes modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NllForm {
    /// `−log Σ_m ρ_m N(gt_t | μ_mt, σ_mt)` at every valid step.
    PerStep,
    /// One mixture over whole trajectories: `−log Σ_m ρ_m Π_t N(gt_t | μ_mt, σ_mt)`,
    /// divided by the scene's valid step count like the other forms.
    #[default]
    Trajectory,
    /// Gaussian NLL of the best mode only; ρ is trained by the CE term alone.
    BestMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda_nll: f64,
    pub lambda_ce: f64,
    pub sigma_floor: f64,
    pub nll_form: NllForm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_nll: 1.0, lambda_ce: 1.0, sigma_floor: 0.01, nll_form: NllForm::Trajectory }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda_nll >= 0.0 && self.lambda_ce >= 0.0) {
            return Err(ModelError::InvalidConfig("loss weights must be nonnegative".into()));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(ModelError::InvalidConfig("sigma floor must be positive".into()));
        }
        Ok(())
    }
}
