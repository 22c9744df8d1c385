use super::gmm::GmmHead;
use super::tensor::Tensor;
use super::{ModelConfig, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Per-state agent input width: x, y, z, cos θ, sin θ.
pub const AGENT_INPUT_DIM: usize = 5;
/// Scale applied to the uniform fan-in init of the decoder output layer.
pub const OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named parameter tensors, each with a gradient accumulator of the same shape.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams {
    pub names: Vec<String>,
    pub values: Vec<Tensor>,
    pub grads: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl ModelParams {
    pub fn push(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.index.insert(name.to_string(), self.values.len());
        self.names.push(name.to_string());
        self.grads.push(Tensor::zeros(value.rows, value.cols));
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|i| &self.values[i.0])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    None,
    Layer,
    Batch,
}

#[derive(Clone, Copy, Debug)]
pub struct LinearIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct NormIds {
    pub g: ParamId,
    pub b: ParamId,
}

/// `depth` linear layers; every layer but the last is followed by the norm (if any) and GELU.
#[derive(Clone, Debug)]
pub struct MlpIds {
    pub layers: Vec<LinearIds>,
    pub norms: Vec<NormIds>,
    pub norm: Norm,
}

#[derive(Clone, Debug)]
pub struct SublayerIds {
    pub ln_attn: NormIds,
    pub q: LinearIds,
    pub k: LinearIds,
    pub v: LinearIds,
    pub o: LinearIds,
    pub ln_ff: NormIds,
    pub ff: MlpIds,
}

#[derive(Clone, Debug)]
pub struct BlockIds {
    pub temporal: SublayerIds,
    pub interaction: SublayerIds,
    pub context: SublayerIds,
}

/// Parameter ids of every module, in creation order.
#[derive(Clone, Debug)]
pub struct Layout {
    pub agent: MlpIds,
    pub context: MlpIds,
    pub blocks: Vec<BlockIds>,
    pub gmm: MlpIds,
}

enum Init {
    FanIn(usize),
    Const(f64),
}

struct Builder<'a> {
    params: &'a mut ModelParams,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn tensor(&mut self, name: String, rows: usize, cols: usize, init: Init) -> ParamId {
        let data = match init {
            Init::FanIn(fan) => {
                let a = 1.0 / (fan as f64).sqrt();
                (0..rows * cols).map(|_| self.rng.gen_range(-a..a)).collect()
            }
            Init::Const(c) => vec![c; rows * cols],
        };
        self.params.push(&name, Tensor::from_vec(rows, cols, data))
    }

    fn linear(&mut self, name: &str, i: usize, o: usize) -> LinearIds {
        LinearIds { w: self.tensor(format!("{name}.w"), i, o, Init::FanIn(i)), b: self.tensor(format!("{name}.b"), 1, o, Init::FanIn(i)) }
    }

    fn norm(&mut self, name: &str, d: usize) -> NormIds {
        NormIds { g: self.tensor(format!("{name}.g"), 1, d, Init::Const(1.0)), b: self.tensor(format!("{name}.b"), 1, d, Init::Const(0.0)) }
    }

    fn mlp(&mut self, name: &str, input: usize, width: usize, out: usize, depth: usize, norm: Norm) -> MlpIds {
        let mut layers = Vec::with_capacity(depth);
        let mut norms = Vec::new();
        for l in 0..depth {
            let i = if l == 0 { input } else { width };
            let o = if l + 1 == depth { out } else { width };
            layers.push(self.linear(&format!("{name}.l{l}"), i, o));
            if l + 1 < depth && norm != Norm::None {
                norms.push(self.norm(&format!("{name}.n{l}"), o));
            }
        }
        MlpIds { layers, norms, norm }
    }

    fn sublayer(&mut self, name: &str, d: usize, ff_depth: usize) -> SublayerIds {
        SublayerIds {
            ln_attn: self.norm(&format!("{name}.ln_attn"), d),
            q: self.linear(&format!("{name}.q"), d, d),
            k: self.linear(&format!("{name}.k"), d, d),
            v: self.linear(&format!("{name}.v"), d, d),
            o: self.linear(&format!("{name}.o"), d, d),
            ln_ff: self.norm(&format!("{name}.ln_ff"), d),
            ff: self.mlp(&format!("{name}.ff"), d, d, d, ff_depth, Norm::None),
        }
    }
}

pub fn gmm_head(cfg: &ModelConfig, sigma_floor: f64) -> GmmHead {
    GmmHead {
        modes: cfg.modes,
        future: cfg.future,
        velocity_scale: cfg.velocity_scale,
        vertical_scale: cfg.vertical_scale,
        sigma_scale: cfg.sigma_scale,
        sigma_floor,
    }
}

/// Creates all parameters with seeded uniform fan-in initialization.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<(ModelParams, Layout), ModelError> {
    cfg.validate()?;
    let d = cfg.hidden;
    let raw = gmm_head(cfg, 1.0).raw_width();
    let mut params = ModelParams::default();
    let mut b = Builder { params: &mut params, rng: ChaCha8Rng::seed_from_u64(seed) };
    let agent = b.mlp("agent", AGENT_INPUT_DIM, d, d, cfg.agent_mlp_depth, Norm::Layer);
    let context = b.mlp("context", crate::airmap::PATCH_DIM, d, d, cfg.context_mlp_depth, Norm::Batch);
    let blocks = (0..cfg.tic_blocks)
        .map(|i| BlockIds {
            temporal: b.sublayer(&format!("block{i}.temporal"), d, cfg.ff_depth),
            interaction: b.sublayer(&format!("block{i}.interaction"), d, cfg.ff_depth),
            context: b.sublayer(&format!("block{i}.context"), d, cfg.ff_depth),
        })
        .collect();
    let gmm = b.mlp("gmm", d, d, raw, cfg.gmm_mlp_depth, Norm::None);
    // The decoder starts close to its anchors.
    if let Some(last) = gmm.layers.last() {
        params.values[last.w.0].scale(OUTPUT_INIT_SCALE);
        params.values[last.b.0].scale(OUTPUT_INIT_SCALE);
    }
    Ok((params, Layout { agent, context, blocks, gmm }))
}

/// Rebuilds the layout for `cfg` and checks that `params` has exactly its names and shapes.
pub fn layout_for(cfg: &ModelConfig, params: &ModelParams) -> Result<Layout, ModelError> {
    let (fresh, layout) = init_params(cfg, 0)?;
    if fresh.names != params.names {
        return Err(ModelError::ShapeMismatch("parameter names differ from the configured layout".into()));
    }
    for ((n, a), b) in fresh.names.iter().zip(&fresh.values).zip(&params.values) {
        if a.shape() != b.shape() {
            return Err(ModelError::ShapeMismatch(format!("{n}: {:?} vs {:?}", b.shape(), a.shape())));
        }
    }
    Ok(layout)
}

fn linear_count(i: usize, o: usize) -> usize {
    i * o + o
}

fn mlp_count(input: usize, width: usize, out: usize, depth: usize, norm: bool) -> usize {
    if depth == 1 {
        return linear_count(input, out);
    }
    let norm = if norm { 2 * width } else { 0 };
    linear_count(input, width) + norm + (depth - 2) * (linear_count(width, width) + norm) + linear_count(width, out)
}

/// Parameters in one TIC block: three sublayers, each with two layer norms,
/// four `D×D` projections and a feed-forward MLP.
pub fn block_param_count(cfg: &ModelConfig) -> usize {
    let d = cfg.hidden;
    3 * (2 * 2 * d + 4 * linear_count(d, d) + mlp_count(d, d, d, cfg.ff_depth, false))
}

/// Closed-form parameter count for `cfg`.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let d = cfg.hidden;
    let raw = cfg.modes * cfg.future * 6 + cfg.modes;
    mlp_count(AGENT_INPUT_DIM, d, d, cfg.agent_mlp_depth, true)
        + mlp_count(crate::airmap::PATCH_DIM, d, d, cfg.context_mlp_depth, true)
        + cfg.tic_blocks * block_param_count(cfg)
        + mlp_count(d, d, raw, cfg.gmm_mlp_depth, false)
}
