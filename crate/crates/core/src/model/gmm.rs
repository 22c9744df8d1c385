//! Gaussian-mixture trajectory head: raw decoder outputs to (μ, σ, ρ), and
//! the NLL + best-mode cross-entropy loss with its analytic gradient.

use super::tensor::Tensor;
use super::{LossConfig, ModelError, NllForm};
use serde::{Deserialize, Serialize};

const LOG_2PI: f64 = 1.837_877_066_409_345_3;

/// Output channels per (agent, mode, step): μx, μy, μz, σx, σy, σz, ρ.
pub const OUT_DIM: usize = 7;
const RAW_PER_STEP: usize = 6;

/// Maps raw decoder rows to mixture parameters.
///
/// Per agent the raw row holds `M·F·6` step values followed by `M` mode logits.
/// `μ_t = anchor_t + (t+1)·s·raw`, `σ_t = σ_floor + (t+1)·s_σ·softplus(raw)`,
/// `ρ = softmax(logits)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmHead {
    pub modes: usize,
    pub future: usize,
    /// m/s per unit of raw planar output.
    pub velocity_scale: f64,
    /// m/s per unit of raw vertical output.
    pub vertical_scale: f64,
    /// m per unit of softplus output, per step.
    pub sigma_scale: f64,
    pub sigma_floor: f64,
}

impl GmmHead {
    pub fn raw_width(&self) -> usize {
        self.modes * self.future * RAW_PER_STEP + self.modes
    }

    #[inline]
    fn step_offset(&self, m: usize, t: usize) -> usize {
        (m * self.future + t) * RAW_PER_STEP
    }

    #[inline]
    fn logit_offset(&self, m: usize) -> usize {
        self.modes * self.future * RAW_PER_STEP + m
    }

    #[inline]
    fn mu_scale(&self, t: usize, d: usize) -> f64 {
        (t + 1) as f64 * if d == 2 { self.vertical_scale } else { self.velocity_scale }
    }

    #[inline]
    fn sigma_step_scale(&self, t: usize) -> f64 {
        (t + 1) as f64 * self.sigma_scale
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Decoded mixture for `K` agents, stored as `K×M×F×7`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmPrediction {
    pub agents: usize,
    pub modes: usize,
    pub future: usize,
    pub data: Vec<f64>,
}

impl GmmPrediction {
    pub fn shape(&self) -> [usize; 4] {
        [self.agents, self.modes, self.future, OUT_DIM]
    }

    #[inline]
    /// The 7 outputs `μ_x, μ_y, μ_z, σ_x, σ_y, σ_z, ρ` of one mode at one step.
    pub fn at(&self, k: usize, m: usize, t: usize) -> &[f64] {
        let i = ((k * self.modes + m) * self.future + t) * OUT_DIM;
        &self.data[i..i + OUT_DIM]
    }

    pub fn mu(&self, k: usize, m: usize, t: usize) -> [f64; 3] {
        let v = self.at(k, m, t);
        [v[0], v[1], v[2]]
    }

    pub fn sigma(&self, k: usize, m: usize, t: usize) -> [f64; 3] {
        let v = self.at(k, m, t);
        [v[3], v[4], v[5]]
    }

    pub fn rho(&self, k: usize, m: usize) -> f64 {
        self.at(k, m, 0)[6]
    }

    /// The `M` mode-mean trajectories of agent `k`.
    /// Applies `f` to every mean of agent `k`.
    pub fn map_means(&mut self, k: usize, f: impl Fn([f64; 3]) -> [f64; 3]) {
        for m in 0..self.modes {
            for t in 0..self.future {
                let i = ((k * self.modes + m) * self.future + t) * OUT_DIM;
                let v = f([self.data[i], self.data[i + 1], self.data[i + 2]]);
                self.data[i..i + 3].copy_from_slice(&v);
            }
        }
    }

    pub fn mode_means(&self, k: usize) -> Vec<Vec<[f64; 3]>> {
        (0..self.modes).map(|m| (0..self.future).map(|t| self.mu(k, m, t)).collect()).collect()
    }
}

/// Decodes raw rows (`K × raw_width`). `anchors` holds `K·F` per-step reference positions.
pub fn decode(raw: &Tensor, anchors: &[[f64; 3]], head: &GmmHead) -> Result<GmmPrediction, ModelError> {
    if raw.cols != head.raw_width() || anchors.len() != raw.rows * head.future {
        return Err(ModelError::ShapeMismatch(format!(
            "gmm raw {}x{} with {} anchors, expected width {} and {} anchors",
            raw.rows,
            raw.cols,
            anchors.len(),
            head.raw_width(),
            raw.rows * head.future
        )));
    }
    let (m_n, f_n) = (head.modes, head.future);
    let mut data = Vec::with_capacity(raw.rows * m_n * f_n * OUT_DIM);
    for k in 0..raw.rows {
        let r = raw.row(k);
        let logits: Vec<f64> = (0..m_n).map(|m| r[head.logit_offset(m)]).collect();
        let log_rho = log_softmax(&logits);
        for (m, lr) in log_rho.iter().enumerate() {
            let rho = lr.exp();
            for t in 0..f_n {
                let s = &r[head.step_offset(m, t)..head.step_offset(m, t) + RAW_PER_STEP];
                let a = anchors[k * f_n + t];
                for d in 0..3 {
                    data.push(a[d] + head.mu_scale(t, d) * s[d]);
                }
                for d in 0..3 {
                    data.push(head.sigma_floor + head.sigma_step_scale(t) * softplus(s[3 + d]));
                }
                data.push(rho);
            }
        }
    }
    Ok(GmmPrediction { agents: raw.rows, modes: m_n, future: f_n, data })
}

/// Ground truth for the loss: `K·F` future positions with validity, and the decoder anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmTarget {
    pub gt: Vec<[f64; 3]>,
    pub mask: Vec<bool>,
    pub anchors: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub nll: f64,
    pub ce: f64,
    pub total: f64,
    pub valid_steps: usize,
    pub agents: usize,
}

/// Index of the mode with the smallest mean planar displacement over valid steps (lowest index on ties).
pub fn best_mode(means: &[Vec<[f64; 3]>], gt: &[[f64; 3]], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, traj) in means.iter().enumerate() {
        let (mut s, mut n) = (0.0, 0usize);
        for t in 0..gt.len().min(traj.len()) {
            if mask[t] {
                s += (traj[t][0] - gt[t][0]).hypot(traj[t][1] - gt[t][1]);
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        let ade = s / n as f64;
        if best.is_none_or(|(_, b)| ade < b) {
            best = Some((m, ade));
        }
    }
    best.map(|(m, _)| m)
}

/// Loss value and its gradient with respect to the raw decoder rows.
pub fn loss_and_grad(raw: &Tensor, head: &GmmHead, target: &GmmTarget, cfg: &LossConfig) -> Result<(LossReport, Tensor), ModelError> {
    let (k_n, m_n, f_n) = (raw.rows, head.modes, head.future);
    if target.gt.len() != k_n * f_n || target.mask.len() != k_n * f_n {
        return Err(ModelError::ShapeMismatch(format!("loss target has {} steps, expected {}", target.gt.len(), k_n * f_n)));
    }
    let pred = decode(raw, &target.anchors, head)?;
    let valid_steps = target.mask.iter().filter(|&&m| m).count();
    if valid_steps == 0 {
        return Err(ModelError::DegenerateMask);
    }
    let agents = (0..k_n).filter(|&k| target.mask[k * f_n..(k + 1) * f_n].iter().any(|&m| m)).count();
    let w_nll = cfg.lambda_nll / valid_steps as f64;
    let w_ce = cfg.lambda_ce / agents as f64;

    let mut grad = Tensor::zeros(k_n, raw.cols);
    let (mut nll, mut ce) = (0.0, 0.0);
    let mut ell = vec![0.0; m_n];
    for k in 0..k_n {
        let mask = &target.mask[k * f_n..(k + 1) * f_n];
        if !mask.iter().any(|&m| m) {
            continue;
        }
        let gt = &target.gt[k * f_n..(k + 1) * f_n];
        let r = raw.row(k);
        let logits: Vec<f64> = (0..m_n).map(|m| r[head.logit_offset(m)]).collect();
        let log_rho = log_softmax(&logits);
        let rho: Vec<f64> = log_rho.iter().map(|l| l.exp()).collect();
        let g = grad.row_mut(k);
        let mut dlogit = vec![0.0; m_n];
        let best = best_mode(&pred.mode_means(k), gt, mask).expect("agent has valid steps");
        let steps: Vec<usize> = (0..f_n).filter(|&t| mask[t]).collect();
        // Gaussian log-density of step t under mode m, and its gradient scaled by `w`.
        let log_n = |m: usize, t: usize| -> f64 {
            let (mu, sg) = (pred.mu(k, m, t), pred.sigma(k, m, t));
            (0..3).map(|d| {
                let z = (gt[t][d] - mu[d]) / sg[d];
                -(0.5 * LOG_2PI + sg[d].ln() + 0.5 * z * z)
            }).sum()
        };
        let add_grad = |g: &mut [f64], m: usize, t: usize, w: f64| {
            let (mu, sg) = (pred.mu(k, m, t), pred.sigma(k, m, t));
            let off = head.step_offset(m, t);
            for d in 0..3 {
                let e = gt[t][d] - mu[d];
                let var = sg[d] * sg[d];
                g[off + d] += w * e / var * head.mu_scale(t, d);
                let dsig = -1.0 / sg[d] + e * e / (var * sg[d]);
                g[off + 3 + d] += w * dsig * head.sigma_step_scale(t) * sigmoid(r[off + 3 + d]);
            }
        };
        match cfg.nll_form {
            NllForm::PerStep => {
                for &t in &steps {
                    for (m, l) in ell.iter_mut().enumerate() {
                        *l = log_rho[m] + log_n(m, t);
                    }
                    let mx = ell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = ell.iter().map(|l| (l - mx).exp()).sum();
                    nll -= mx + z.ln();
                    for m in 0..m_n {
                        // dL/dℓ_m = −responsibility_m
                        let w = -w_nll * (ell[m] - mx).exp() / z;
                        dlogit[m] += w + w_nll * rho[m];
                        add_grad(g, m, t, w);
                    }
                }
            }
            NllForm::Trajectory => {
                for (m, l) in ell.iter_mut().enumerate() {
                    *l = log_rho[m] + steps.iter().map(|&t| log_n(m, t)).sum::<f64>();
                }
                let mx = ell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = ell.iter().map(|l| (l - mx).exp()).sum();
                nll -= mx + z.ln();
                for m in 0..m_n {
                    let w = -w_nll * (ell[m] - mx).exp() / z;
                    dlogit[m] += w + w_nll * rho[m];
                    for &t in &steps {
                        add_grad(g, m, t, w);
                    }
                }
            }
            NllForm::BestMode => {
                for &t in &steps {
                    nll -= log_n(best, t);
                    add_grad(g, best, t, -w_nll);
                }
            }
        }

        ce -= log_rho[best];
        for m in 0..m_n {
            dlogit[m] += w_ce * (rho[m] - if m == best { 1.0 } else { 0.0 });
        }
        for m in 0..m_n {
            g[head.logit_offset(m)] += dlogit[m];
        }
    }
    let nll = nll / valid_steps as f64;
    let ce = ce / agents as f64;
    let total = cfg.lambda_nll * nll + cfg.lambda_ce * ce;
    Ok((LossReport { nll, ce, total, valid_steps, agents }, grad))
}
