use super::gmm::{self, GmmHead, GmmPrediction, GmmTarget, LossReport};
use super::graph::{Gradients, Graph, Pattern, RowMix, Var};
use super::params::{gmm_head, init_params, layout_for, Layout, LinearIds, MlpIds, Norm, NormIds, SublayerIds, AGENT_INPUT_DIM};
use super::tensor::Tensor;
use super::{Anchor, DecodeFrame, LossConfig, ModelConfig, ModelError, ModelParams, Pooling};
use crate::airmap::PATCH_DIM;
use crate::geo::Pose2;
use crate::scenes::Scene;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Model-ready tensors for one scene. Agent rows are indexed `k·H + t`, context rows `k·P + p`.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneInput {
    pub agents: usize,
    pub history: usize,
    pub patch: usize,
    /// `(K·H) × 5`: x, y, z (scaled), cos θ, sin θ.
    pub agent_feat: Tensor,
    pub state_mask: Arc<Vec<bool>>,
    pub agent_mask: Vec<bool>,
    /// `(K·P) × 7`, positions scaled.
    pub context_feat: Tensor,
    pub context_mask: Arc<Vec<bool>>,
    /// `K·F` decoder reference positions (metres, ego frame).
    pub anchors: Vec<[f64; 3]>,
    /// `K·F` future positions and validity; empty when the scene has no future.
    pub future: Vec<[f64; 3]>,
    pub future_mask: Vec<bool>,
    /// Per agent, the frame `anchors` and `future` are expressed in (ego frame coordinates).
    pub decode_frames: Vec<Pose2>,
}

impl SceneInput {
    /// Builds inputs from an ego-frame scene. Observed steps are `[t_o−H+1, t_o]`,
    /// targets the following `cfg.future` steps (invalid where the scene ends).
    pub fn from_scene(scene: &Scene, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let k_n = scene.k();
        let h = scene.config.history;
        let p_n = scene.config.patch;
        let f_n = cfg.future;
        if scene.t_o + 1 < h || scene.patches.len() != k_n || scene.agent_ids.len() != k_n {
            return Err(ModelError::ShapeMismatch("scene rows inconsistent with its config".into()));
        }
        let t0 = scene.t_o + 1 - h;
        let (ps, zs) = (cfg.position_scale, cfg.altitude_scale);
        let mut agent_feat = Tensor::zeros(k_n * h, AGENT_INPUT_DIM);
        let mut state_mask = vec![false; k_n * h];
        let mut context_feat = Tensor::zeros(k_n * p_n, PATCH_DIM);
        let mut context_mask = vec![false; k_n * p_n];
        let mut anchors = vec![[0.0; 3]; k_n * f_n];
        let mut future = vec![[0.0; 3]; k_n * f_n];
        let mut future_mask = vec![false; k_n * f_n];
        let mut decode_frames = vec![Pose2::new(0.0, 0.0, 0.0); k_n];
        let agent_mask: Vec<bool> = scene.agent_ids.iter().map(Option::is_some).collect();
        for k in 0..k_n {
            let row = &scene.agents[k];
            if row.len() < scene.t_o + 1 {
                return Err(ModelError::ShapeMismatch("agent row shorter than t_o".into()));
            }
            if !agent_mask[k] {
                continue;
            }
            for t in 0..h {
                let s = row[t0 + t];
                if s.valid {
                    state_mask[k * h + t] = true;
                    agent_feat.row_mut(k * h + t).copy_from_slice(&[s.x / ps, s.y / ps, s.z / zs, s.theta.cos(), s.theta.sin()]);
                }
            }
            let obs = &row[t0..=scene.t_o];
            let last = obs.iter().rposition(|s| s.valid);
            let base = last.map_or([0.0; 3], |i| [obs[i].x, obs[i].y, obs[i].z]);
            let vel = match (cfg.anchor, last) {
                (Anchor::ConstantVelocity, Some(i)) if i > 0 && obs[i - 1].valid => {
                    [obs[i].x - obs[i - 1].x, obs[i].y - obs[i - 1].y, obs[i].z - obs[i - 1].z]
                }
                _ => [0.0; 3],
            };
            for t in 0..f_n {
                let lead = (h - last.unwrap_or(h - 1) + t) as f64;
                anchors[k * f_n + t] = [base[0] + lead * vel[0], base[1] + lead * vel[1], base[2] + lead * vel[2]];
                if let Some(s) = row.get(scene.t_o + 1 + t).filter(|s| s.valid) {
                    future[k * f_n + t] = [s.x, s.y, s.z];
                    future_mask[k * f_n + t] = true;
                }
            }
            if let (DecodeFrame::Agent, Some(i)) = (cfg.decode_frame, last) {
                let f = Pose2::new(obs[i].x, obs[i].y, obs[i].theta);
                for p in anchors[k * f_n..(k + 1) * f_n].iter_mut().chain(&mut future[k * f_n..(k + 1) * f_n]) {
                    let (x, y) = f.to_local(p[0], p[1]);
                    *p = [x, y, p[2]];
                }
                decode_frames[k] = f;
            }
            let patch = &scene.patches[k];
            if patch.len() != p_n {
                return Err(ModelError::ShapeMismatch(format!("patch has {} points, expected {p_n}", patch.len())));
            }
            for (p, (r, &m)) in patch.rows.iter().zip(&patch.mask).enumerate() {
                if m {
                    context_mask[k * p_n + p] = true;
                    let mut v = *r;
                    v[0] /= ps;
                    v[1] /= ps;
                    context_feat.row_mut(k * p_n + p).copy_from_slice(&v);
                }
            }
        }
        Ok(Self {
            agents: k_n,
            history: h,
            patch: p_n,
            agent_feat,
            state_mask: Arc::new(state_mask),
            agent_mask,
            context_feat,
            context_mask: Arc::new(context_mask),
            anchors,
            future,
            future_mask,
            decode_frames,
        })
    }

    pub fn target(&self) -> GmmTarget {
        GmmTarget { gt: self.future.clone(), mask: self.future_mask.clone(), anchors: self.anchors.clone() }
    }

    fn check(&self) -> Result<(), ModelError> {
        let (k, h, p) = (self.agents, self.history, self.patch);
        if self.agent_feat.shape() != (k * h, AGENT_INPUT_DIM) || self.state_mask.len() != k * h || self.agent_mask.len() != k {
            return Err(ModelError::ShapeMismatch(format!("agent input {:?} for K={k}, H={h}", self.agent_feat.shape())));
        }
        if self.context_feat.shape() != (k * p, PATCH_DIM) || self.context_mask.len() != k * p {
            return Err(ModelError::ShapeMismatch(format!("context input {:?} for K={k}, P={p}", self.context_feat.shape())));
        }
        Ok(())
    }

    /// Causal temporal pattern: `(k, t)` attends to valid `(k, t' ≤ t)`.
    pub fn temporal_pattern(&self) -> Pattern {
        let h = self.history;
        let keys = (0..self.agents * h)
            .map(|q| {
                if !self.state_mask[q] {
                    return Vec::new();
                }
                let (k, t) = (q / h, q % h);
                (0..=t).map(|s| k * h + s).filter(|&j| self.state_mask[j]).map(|j| j as u32).collect()
            })
            .collect();
        Pattern { keys }
    }

    /// Interaction pattern: `(k, t)` attends to every valid `(k', t)`.
    pub fn interaction_pattern(&self) -> Pattern {
        let h = self.history;
        let keys = (0..self.agents * h)
            .map(|q| {
                if !self.state_mask[q] {
                    return Vec::new();
                }
                let t = q % h;
                (0..self.agents).map(|k| k * h + t).filter(|&j| self.state_mask[j]).map(|j| j as u32).collect()
            })
            .collect();
        Pattern { keys }
    }

    /// Context pattern: `(k, t)` attends to the valid points of patch `k`.
    pub fn context_pattern(&self) -> Pattern {
        let (h, p) = (self.history, self.patch);
        let keys = (0..self.agents * h)
            .map(|q| {
                if !self.state_mask[q] {
                    return Vec::new();
                }
                let k = q / h;
                (k * p..(k + 1) * p).filter(|&j| self.context_mask[j]).map(|j| j as u32).collect()
            })
            .collect();
        Pattern { keys }
    }
}

/// Sinusoidal embedding of timestep `t` in `d` dimensions.
pub fn positional_encoding(t: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let a = t as f64 * freq;
            if i % 2 == 0 {
                a.sin()
            } else {
                a.cos()
            }
        })
        .collect()
}

/// Patterns for one scene, shared by all blocks.
pub struct Patterns {
    pub temporal: Arc<Pattern>,
    pub interaction: Arc<Pattern>,
    pub context: Arc<Pattern>,
}

impl Patterns {
    pub fn new(input: &SceneInput) -> Self {
        Self {
            temporal: Arc::new(input.temporal_pattern()),
            interaction: Arc::new(input.interaction_pattern()),
            context: Arc::new(input.context_pattern()),
        }
    }
}

/// Forward-pass handles into the graph.
pub struct Forward {
    pub embedded: Var,
    pub context: Var,
    pub encoded: Var,
    pub pooled: Var,
    pub raw: Var,
}

/// One agent's decoded modes in both frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTrajectory {
    pub rho: f64,
    pub ego: Vec<[f64; 3]>,
    pub world: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub gmm: GmmPrediction,
    /// `K` rows of `M` mode-mean trajectories.
    pub trajectories: Vec<Vec<ModeTrajectory>>,
}

/// Parameters plus the id layout that the forward pass walks.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
    layout: Layout,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let (params, layout) = init_params(&config, seed)?;
        Ok(Self { config, params, layout })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        let layout = layout_for(&config, &params)?;
        Ok(Self { config, params, layout })
    }

    pub fn head(&self, loss: &LossConfig) -> GmmHead {
        gmm_head(&self.config, loss.sigma_floor)
    }

    fn linear(&self, g: &mut Graph, x: Var, ids: LinearIds) -> Result<Var, ModelError> {
        let (w, b) = (g.param(ids.w), g.param(ids.b));
        g.linear(x, w, b)
    }

    fn layer_norm(&self, g: &mut Graph, x: Var, ids: NormIds) -> Result<Var, ModelError> {
        let (gg, b) = (g.param(ids.g), g.param(ids.b));
        g.layer_norm(x, gg, b)
    }

    fn mlp(&self, g: &mut Graph, mut x: Var, ids: &MlpIds, rows: Option<&Arc<Vec<bool>>>) -> Result<Var, ModelError> {
        let n = ids.layers.len();
        for (l, lin) in ids.layers.iter().enumerate() {
            x = self.linear(g, x, *lin)?;
            if l + 1 == n {
                break;
            }
            x = match ids.norm {
                Norm::None => x,
                Norm::Layer => self.layer_norm(g, x, ids.norms[l])?,
                Norm::Batch => {
                    let (gg, b) = (g.param(ids.norms[l].g), g.param(ids.norms[l].b));
                    let mask = rows.expect("batch norm needs a row mask").clone();
                    g.masked_batch_norm(x, gg, b, mask)?
                }
            };
            x = g.gelu(x);
        }
        Ok(x)
    }

    /// Per-state MLP plus sinusoidal timestep embedding; invalid states give zero rows.
    pub fn embed_agents(&self, g: &mut Graph, input: &SceneInput) -> Result<Var, ModelError> {
        input.check()?;
        let x = g.input(input.agent_feat.clone());
        let x = self.mlp(g, x, &self.layout.agent, None)?;
        let d = self.config.hidden;
        let mut pe = Tensor::zeros(input.agents * input.history, d);
        for t in 0..input.history {
            let row = positional_encoding(t, d);
            for k in 0..input.agents {
                pe.row_mut(k * input.history + t).copy_from_slice(&row);
            }
        }
        let pe = g.input(pe);
        let x = g.add(x, pe)?;
        g.mask_rows(x, input.state_mask.clone())
    }

    /// Per-point MLP with per-scene masked batch normalization; masked points give zero rows.
    pub fn embed_context(&self, g: &mut Graph, input: &SceneInput) -> Result<Var, ModelError> {
        input.check()?;
        let c = g.input(input.context_feat.clone());
        let c = self.mlp(g, c, &self.layout.context, Some(&input.context_mask))?;
        g.mask_rows(c, input.context_mask.clone())
    }

    /// Pre-norm attention with residual: `x + mask(Wo · attn(LN(x), kv))`.
    /// `kv = None` means self-attention.
    fn attend(&self, g: &mut Graph, x: Var, kv: Option<Var>, ids: &SublayerIds, pattern: &Arc<Pattern>, mask: &Arc<Vec<bool>>) -> Result<Var, ModelError> {
        let h = self.layer_norm(g, x, ids.ln_attn)?;
        let src = kv.unwrap_or(h);
        let q = self.linear(g, h, ids.q)?;
        let k = self.linear(g, src, ids.k)?;
        let v = self.linear(g, src, ids.v)?;
        let a = g.attention(q, k, v, self.config.heads, pattern.clone())?;
        let o = self.linear(g, a, ids.o)?;
        let o = g.mask_rows(o, mask.clone())?;
        g.add(x, o)
    }

    /// Pre-norm feed-forward with residual.
    fn feed_forward(&self, g: &mut Graph, x: Var, ids: &SublayerIds, mask: &Arc<Vec<bool>>) -> Result<Var, ModelError> {
        let h = self.layer_norm(g, x, ids.ln_ff)?;
        let f = self.mlp(g, h, &ids.ff, None)?;
        let f = g.mask_rows(f, mask.clone())?;
        g.add(x, f)
    }

    pub fn temporal_layer(&self, g: &mut Graph, x: Var, block: usize, input: &SceneInput, pat: &Patterns) -> Result<Var, ModelError> {
        let ids = &self.layout.blocks[block].temporal;
        let x = self.attend(g, x, None, ids, &pat.temporal, &input.state_mask)?;
        self.feed_forward(g, x, ids, &input.state_mask)
    }

    pub fn interaction_layer(&self, g: &mut Graph, x: Var, block: usize, input: &SceneInput, pat: &Patterns) -> Result<Var, ModelError> {
        let ids = &self.layout.blocks[block].interaction;
        let x = self.attend(g, x, None, ids, &pat.interaction, &input.state_mask)?;
        self.feed_forward(g, x, ids, &input.state_mask)
    }

    /// Cross-attention stage of the context layer alone.
    pub fn context_attention(&self, g: &mut Graph, x: Var, ctx: Var, block: usize, input: &SceneInput, pat: &Patterns) -> Result<Var, ModelError> {
        let ids = &self.layout.blocks[block].context;
        self.attend(g, x, Some(ctx), ids, &pat.context, &input.state_mask)
    }

    pub fn context_layer(&self, g: &mut Graph, x: Var, ctx: Var, block: usize, input: &SceneInput, pat: &Patterns) -> Result<Var, ModelError> {
        let x = self.context_attention(g, x, ctx, block, input, pat)?;
        self.feed_forward(g, x, &self.layout.blocks[block].context, &input.state_mask)
    }

    /// `L` TIC blocks over the embedded agent features.
    pub fn encode_scene(&self, g: &mut Graph, embedded: Var, ctx: Var, input: &SceneInput, pat: &Patterns) -> Result<Var, ModelError> {
        let mut x = embedded;
        for b in 0..self.layout.blocks.len() {
            x = self.temporal_layer(g, x, b, input, pat)?;
            x = self.interaction_layer(g, x, b, input, pat)?;
            x = self.context_layer(g, x, ctx, b, input, pat)?;
        }
        Ok(x)
    }

    fn pooling(&self, input: &SceneInput) -> RowMix {
        let h = input.history;
        let rows = (0..input.agents)
            .map(|k| match self.config.pooling {
                Pooling::LastObserved => vec![(k * h + h - 1, 1.0)],
                Pooling::Mean => {
                    let valid: Vec<usize> = (k * h..(k + 1) * h).filter(|&j| input.state_mask[j]).collect();
                    let w = 1.0 / valid.len().max(1) as f64;
                    valid.into_iter().map(|j| (j, w)).collect()
                }
            })
            .collect();
        RowMix { rows }
    }

    /// Pools the encoded rows per agent and applies the GMM MLP: `K × raw_width`.
    pub fn decode_raw(&self, g: &mut Graph, encoded: Var, input: &SceneInput) -> Result<(Var, Var), ModelError> {
        let pooled = g.row_mix(encoded, Arc::new(self.pooling(input)))?;
        let raw = self.mlp(g, pooled, &self.layout.gmm, None)?;
        Ok((pooled, raw))
    }

    pub fn forward(&self, g: &mut Graph, input: &SceneInput) -> Result<Forward, ModelError> {
        let pat = Patterns::new(input);
        let embedded = self.embed_agents(g, input)?;
        let context = self.embed_context(g, input)?;
        let encoded = self.encode_scene(g, embedded, context, input, &pat)?;
        let (pooled, raw) = self.decode_raw(g, encoded, input)?;
        Ok(Forward { embedded, context, encoded, pooled, raw })
    }

    /// Encoded `K·H × D` features, forward only.
    pub fn encode(&self, input: &SceneInput) -> Result<Tensor, ModelError> {
        let mut g = Graph::inference(&self.params);
        let f = self.forward(&mut g, input)?;
        Ok(g.value(f.encoded).clone())
    }

    pub fn decode_gmm(&self, input: &SceneInput, loss: &LossConfig) -> Result<GmmPrediction, ModelError> {
        let mut g = Graph::inference(&self.params);
        let f = self.forward(&mut g, input)?;
        let mut pred = gmm::decode(g.value(f.raw), &input.anchors, &self.head(loss))?;
        for (k, frame) in input.decode_frames.iter().enumerate() {
            pred.map_means(k, |p| {
                let (x, y) = frame.to_world(p[0], p[1]);
                [x, y, p[2]]
            });
        }
        Ok(pred)
    }

    pub fn loss(&self, input: &SceneInput, loss: &LossConfig) -> Result<LossReport, ModelError> {
        let mut g = Graph::inference(&self.params);
        let f = self.forward(&mut g, input)?;
        Ok(gmm::loss_and_grad(g.value(f.raw), &self.head(loss), &input.target(), loss)?.0)
    }

    pub fn loss_and_grad(&self, input: &SceneInput, loss: &LossConfig) -> Result<(LossReport, Gradients), ModelError> {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, input)?;
        let (out, report) = g.gmm_loss(f.raw, &self.head(loss), &input.target(), loss)?;
        Ok((report, g.backward(out)?))
    }

    /// Mixture plus the `M` mode-mean trajectories per agent, in the ego and world frames.
    pub fn predict(&self, scene: &Scene, loss: &LossConfig) -> Result<Prediction, ModelError> {
        let input = SceneInput::from_scene(scene, &self.config)?;
        let gmm = self.decode_gmm(&input, loss)?;
        let frame = scene.frame_of_reference;
        let trajectories = (0..gmm.agents)
            .map(|k| {
                gmm.mode_means(k)
                    .into_iter()
                    .enumerate()
                    .map(|(m, ego)| {
                        let world = ego
                            .iter()
                            .map(|p| {
                                let (x, y) = frame.to_world(p[0], p[1]);
                                [x, y, p[2]]
                            })
                            .collect();
                        ModeTrajectory { rho: gmm.rho(k, m), ego, world }
                    })
                    .collect()
            })
            .collect();
        Ok(Prediction { gmm, trajectories })
    }
}
