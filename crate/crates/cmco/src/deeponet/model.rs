//! The operator model: recurrent branch, dense trunk, inner-product head.
//!
//! For an input sequence `u` and query point `r`, the prediction is
//! `G(u)(r) = sum_l psi_l(u) * phi_l(r) + bias` where `psi` is the branch
//! embedding (final-step hidden state of the top recurrent layer, optionally
//! layer-normalized) and `phi` is the trunk output at `r`. The trunk is
//! evaluated pointwise, so one trunk pass serves every sample of a batch.
//!
//! All training-space math happens on normalized inputs/targets; the public
//! [`DeepONetModel::forward`] handles input normalization, query-coordinate
//! scaling to `[-1, 1]`, and de-normalization of the outputs.

use rand_chacha::ChaCha8Rng;

use crate::data::QueryGrid;
use crate::error::{CmcoError, Result};
use crate::nn::dense::{Activation, Dense, DenseCache, DenseGrads};
use crate::nn::dropout::{dropout_apply_with, dropout_backward, DropoutMask};
use crate::nn::gru::{GruGrads, GruLayer, GruSeqCache};
use crate::nn::layer_norm::{LayerNorm, LayerNormCache};
use crate::nn::lstm::{LstmGrads, LstmLayer, LstmSeqCache};
use crate::nn::matrix::Matrix;
use crate::nn::rng::{domains, RngStream};
use crate::train::norm::NormStats;

use super::config::{closed_form_param_count, BranchConfig, BranchKind, TrunkConfig};

/// Stack of recurrent layers of one kind.
#[derive(Debug, Clone)]
pub enum RecurrentStack {
    Gru(Vec<GruLayer>),
    Lstm(Vec<LstmLayer>),
}

impl RecurrentStack {
    pub fn layers(&self) -> usize {
        match self {
            RecurrentStack::Gru(v) => v.len(),
            RecurrentStack::Lstm(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone)]
enum SeqCacheKind {
    Gru(GruSeqCache),
    Lstm(LstmSeqCache),
}

enum RecurrentGrads {
    Gru(GruGrads),
    Lstm(LstmGrads),
}

/// Field values at the query points, in physical units.
pub type FieldPrediction = Vec<f64>;

#[derive(Debug, Clone)]
pub struct DeepONetModel {
    pub branch_cfg: BranchConfig,
    pub trunk_cfg: TrunkConfig,
    pub branch: RecurrentStack,
    pub layer_norm: Option<LayerNorm>,
    pub trunk: Vec<Dense>,
    pub out_bias: f64,
    pub norm: NormStats,
    /// Per-dimension (min, max) for query scaling; attached during training.
    pub coord_bounds: Option<Vec<(f64, f64)>>,
}

/// Everything the backward pass needs from one batched forward.
pub struct BatchCache {
    /// Input sequence of each recurrent layer (post inter-layer dropout).
    layer_inputs: Vec<Vec<Matrix>>,
    seq_caches: Vec<SeqCacheKind>,
    /// Dropout masks between recurrent layers, indexed `[transition][t]`.
    inter_masks: Vec<Vec<DropoutMask>>,
    ln_cache: Option<LayerNormCache>,
    /// Branch embedding `[B x q]`.
    pub psi: Matrix,
    trunk_caches: Vec<DenseCache>,
    trunk_masks: Vec<DropoutMask>,
    /// Trunk features `[P x q]`.
    pub phi: Matrix,
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    use rand::Rng;
    -bound + 2.0 * bound * rng.random::<f64>()
}

fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = uniform(rng, bound);
    }
    m
}

/// Build a model with freshly initialized parameters. Recurrent blocks use
/// uniform `+/- 1/sqrt(H)`; dense trunk weights and biases use uniform
/// `+/- 1/sqrt(fan_in)`. The fan-in-only scale matters for the trunk: its
/// first layer sees a 1- or 2-dim coordinate, and a fan-out-averaged bound
/// leaves every unit in the near-linear regime of its activation over the
/// normalized query range, which caps what field shapes the basis can fit.
/// Spread biases likewise break the odd symmetry of zero-bias tanh units.
pub fn build_model(
    branch: BranchConfig,
    trunk: TrunkConfig,
    stream: RngStream,
) -> Result<DeepONetModel> {
    branch.validate()?;
    trunk.validate()?;
    if trunk.embedding_dim() != branch.hidden {
        return Err(CmcoError::InvalidConfig(format!(
            "embedding size mismatch: trunk ends at {} but branch hidden is {}",
            trunk.embedding_dim(),
            branch.hidden
        )));
    }
    let mut rng = stream.with_stream(domains::INIT).rng();
    let h = branch.hidden;
    let rec_bound = 1.0 / (h as f64).sqrt();

    let stack = match branch.kind {
        BranchKind::Gru => {
            let mut layers = Vec::with_capacity(branch.layers);
            let mut input = branch.input_channels;
            for _ in 0..branch.layers {
                layers.push(GruLayer {
                    w_ih: init_matrix(&mut rng, input, 3 * h, rec_bound),
                    w_hh: init_matrix(&mut rng, h, 3 * h, rec_bound),
                    b_ih: (0..3 * h).map(|_| uniform(&mut rng, rec_bound)).collect(),
                    b_hh: (0..3 * h).map(|_| uniform(&mut rng, rec_bound)).collect(),
                });
                input = h;
            }
            RecurrentStack::Gru(layers)
        }
        BranchKind::Lstm => {
            let mut layers = Vec::with_capacity(branch.layers);
            let mut input = branch.input_channels;
            for _ in 0..branch.layers {
                layers.push(LstmLayer {
                    w_ih: init_matrix(&mut rng, input, 4 * h, rec_bound),
                    w_hh: init_matrix(&mut rng, h, 4 * h, rec_bound),
                    b_ih: (0..4 * h).map(|_| uniform(&mut rng, rec_bound)).collect(),
                    b_hh: (0..4 * h).map(|_| uniform(&mut rng, rec_bound)).collect(),
                });
                input = h;
            }
            RecurrentStack::Lstm(layers)
        }
    };

    let mut trunk_layers = Vec::new();
    let k = trunk.widths.len() - 1;
    for i in 0..k {
        let (fan_in, fan_out) = (trunk.widths[i], trunk.widths[i + 1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let act = if i + 1 < k { trunk.activation } else { Activation::None };
        trunk_layers.push(Dense::new(
            init_matrix(&mut rng, fan_in, fan_out, bound),
            (0..fan_out).map(|_| uniform(&mut rng, bound)).collect(),
            act,
        )?);
    }

    let model = DeepONetModel {
        layer_norm: branch.layer_norm.then(|| LayerNorm::new(h)),
        branch: stack,
        trunk: trunk_layers,
        out_bias: 0.0,
        norm: NormStats::identity(branch.input_channels),
        coord_bounds: None,
        branch_cfg: branch,
        trunk_cfg: trunk,
    };
    debug_assert_eq!(
        model.parameter_count(),
        closed_form_param_count(&model.branch_cfg, &model.trunk_cfg)
    );
    Ok(model)
}

impl DeepONetModel {
    /// Named parameter blocks with shapes, in serialization order.
    pub fn param_blocks(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        match &self.branch {
            RecurrentStack::Gru(layers) => {
                for (l, layer) in layers.iter().enumerate() {
                    out.push((format!("branch.{l}.w_ih"), vec![layer.w_ih.rows(), layer.w_ih.cols()]));
                    out.push((format!("branch.{l}.w_hh"), vec![layer.w_hh.rows(), layer.w_hh.cols()]));
                    out.push((format!("branch.{l}.b_ih"), vec![layer.b_ih.len()]));
                    out.push((format!("branch.{l}.b_hh"), vec![layer.b_hh.len()]));
                }
            }
            RecurrentStack::Lstm(layers) => {
                for (l, layer) in layers.iter().enumerate() {
                    out.push((format!("branch.{l}.w_ih"), vec![layer.w_ih.rows(), layer.w_ih.cols()]));
                    out.push((format!("branch.{l}.w_hh"), vec![layer.w_hh.rows(), layer.w_hh.cols()]));
                    out.push((format!("branch.{l}.b_ih"), vec![layer.b_ih.len()]));
                    out.push((format!("branch.{l}.b_hh"), vec![layer.b_hh.len()]));
                }
            }
        }
        if let Some(ln) = &self.layer_norm {
            out.push(("branch.ln.gain".into(), vec![ln.gain.len()]));
            out.push(("branch.ln.shift".into(), vec![ln.shift.len()]));
        }
        for (i, layer) in self.trunk.iter().enumerate() {
            out.push((format!("trunk.{i}.w"), vec![layer.w.rows(), layer.w.cols()]));
            out.push((format!("trunk.{i}.b"), vec![layer.b.len()]));
        }
        out.push(("out.bias".into(), vec![1]));
        out
    }

    /// Total trainable parameters (matches the closed-form count).
    pub fn parameter_count(&self) -> usize {
        self.param_blocks().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        let mut push_rec = |w_ih: &Matrix, w_hh: &Matrix, b_ih: &[f64], b_hh: &[f64]| {
            out.extend_from_slice(w_ih.data());
            out.extend_from_slice(w_hh.data());
            out.extend_from_slice(b_ih);
            out.extend_from_slice(b_hh);
        };
        match &self.branch {
            RecurrentStack::Gru(layers) => {
                for l in layers {
                    push_rec(&l.w_ih, &l.w_hh, &l.b_ih, &l.b_hh);
                }
            }
            RecurrentStack::Lstm(layers) => {
                for l in layers {
                    push_rec(&l.w_ih, &l.w_hh, &l.b_ih, &l.b_hh);
                }
            }
        }
        if let Some(ln) = &self.layer_norm {
            out.extend_from_slice(&ln.gain);
            out.extend_from_slice(&ln.shift);
        }
        for layer in &self.trunk {
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        out.push(self.out_bias);
        out
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(CmcoError::shape(
                "assign_params",
                format!("{} values for {} parameters", flat.len(), self.parameter_count()),
            ));
        }
        let mut pos = 0usize;
        let mut take = |len: usize| {
            let s = &flat[pos..pos + len];
            pos += len;
            s
        };
        match &mut self.branch {
            RecurrentStack::Gru(layers) => {
                for l in layers {
                    let n = l.w_ih.rows() * l.w_ih.cols();
                    l.w_ih.data_mut().copy_from_slice(take(n));
                    let n = l.w_hh.rows() * l.w_hh.cols();
                    l.w_hh.data_mut().copy_from_slice(take(n));
                    let n = l.b_ih.len();
                    l.b_ih.copy_from_slice(take(n));
                    let n = l.b_hh.len();
                    l.b_hh.copy_from_slice(take(n));
                }
            }
            RecurrentStack::Lstm(layers) => {
                for l in layers {
                    let n = l.w_ih.rows() * l.w_ih.cols();
                    l.w_ih.data_mut().copy_from_slice(take(n));
                    let n = l.w_hh.rows() * l.w_hh.cols();
                    l.w_hh.data_mut().copy_from_slice(take(n));
                    let n = l.b_ih.len();
                    l.b_ih.copy_from_slice(take(n));
                    let n = l.b_hh.len();
                    l.b_hh.copy_from_slice(take(n));
                }
            }
        }
        if let Some(ln) = &mut self.layer_norm {
            let n = ln.gain.len();
            ln.gain.copy_from_slice(take(n));
            let n = ln.shift.len();
            ln.shift.copy_from_slice(take(n));
        }
        for layer in &mut self.trunk {
            let n = layer.w.rows() * layer.w.cols();
            layer.w.data_mut().copy_from_slice(take(n));
            let n = layer.b.len();
            layer.b.copy_from_slice(take(n));
        }
        self.out_bias = take(1)[0];
        debug_assert_eq!(pos, flat.len());
        Ok(())
    }

    /// Map query coordinates to `[-1, 1]` per dimension using the stored
    /// bounds; identity until bounds are attached.
    pub fn normalize_grid(&self, grid: &QueryGrid) -> Matrix {
        match &self.coord_bounds {
            None => grid.coords.clone(),
            Some(bounds) => {
                let mut out = grid.coords.clone();
                for i in 0..out.rows() {
                    let row = out.row_mut(i);
                    for (j, v) in row.iter_mut().enumerate() {
                        let (lo, hi) = bounds[j];
                        *v = if hi - lo < 1e-12 {
                            0.0
                        } else {
                            2.0 * (*v - lo) / (hi - lo) - 1.0
                        };
                    }
                }
                out
            }
        }
    }

    /// Batched forward in normalized space. `xs` is sequence-major:
    /// `xs[t]` is `[B x C]`. Returns `[B x P]` and the cache for backward.
    ///
    /// Dropout draws, when active, happen in a fixed order: inter-layer
    /// branch masks (timestep-major within each transition), then trunk
    /// hidden-layer masks.
    pub fn forward_batch_normalized(
        &self,
        xs: &[Matrix],
        grid_norm: &Matrix,
        dropout_active: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Matrix, BatchCache)> {
        if xs.is_empty() {
            return Err(CmcoError::shape("forward", "empty input sequence"));
        }
        if xs[0].cols() != self.branch_cfg.input_channels {
            return Err(CmcoError::shape(
                "forward",
                format!(
                    "input has {} channels, model expects {}",
                    xs[0].cols(),
                    self.branch_cfg.input_channels
                ),
            ));
        }
        if grid_norm.cols() != self.trunk_cfg.query_dim() {
            return Err(CmcoError::shape(
                "forward",
                format!(
                    "grid dim {} vs trunk input dim {}",
                    grid_norm.cols(),
                    self.trunk_cfg.query_dim()
                ),
            ));
        }

        let n_layers = self.branch.layers();
        let p_drop = self.branch_cfg.dropout;
        let mut layer_inputs: Vec<Vec<Matrix>> = Vec::with_capacity(n_layers);
        let mut seq_caches = Vec::with_capacity(n_layers);
        let mut inter_masks: Vec<Vec<DropoutMask>> = Vec::with_capacity(n_layers.saturating_sub(1));
        let mut seq: Vec<Matrix> = xs.to_vec();
        let mut final_h: Option<Matrix> = None;
        for l in 0..n_layers {
            let (hs, cache) = match &self.branch {
                RecurrentStack::Gru(layers) => {
                    let (hs, c) = layers[l].forward_seq(&seq)?;
                    (hs, SeqCacheKind::Gru(c))
                }
                RecurrentStack::Lstm(layers) => {
                    let (hs, c) = layers[l].forward_seq(&seq)?;
                    (hs, SeqCacheKind::Lstm(c))
                }
            };
            layer_inputs.push(std::mem::take(&mut seq));
            seq_caches.push(cache);
            if l + 1 < n_layers {
                let mut masks = Vec::with_capacity(hs.len());
                let mut next = Vec::with_capacity(hs.len());
                for h in &hs {
                    let (dropped, mask) = dropout_apply_with(h, p_drop, rng, dropout_active)?;
                    next.push(dropped);
                    masks.push(mask);
                }
                inter_masks.push(masks);
                seq = next;
            } else {
                final_h = hs.into_iter().last();
            }
        }
        let h_t = final_h.expect("non-empty sequence");

        let (psi, ln_cache) = match &self.layer_norm {
            Some(ln) => {
                let (y, c) = ln.forward_cached(&h_t)?;
                (y, Some(c))
            }
            None => (h_t, None),
        };

        let k = self.trunk.len();
        let mut trunk_caches = Vec::with_capacity(k);
        let mut trunk_masks = Vec::with_capacity(k.saturating_sub(1));
        let mut x = grid_norm.clone();
        for (i, layer) in self.trunk.iter().enumerate() {
            let (y, cache) = layer.forward_cached(&x)?;
            trunk_caches.push(cache);
            if i + 1 < k {
                let (dropped, mask) = dropout_apply_with(&y, self.trunk_cfg.dropout, rng, dropout_active)?;
                trunk_masks.push(mask);
                x = dropped;
            } else {
                x = y;
            }
        }
        let phi = x;

        let mut out = psi.matmul_tr(&phi)?;
        let bias = self.out_bias;
        out.map_inplace(|v| v + bias);

        Ok((
            out,
            BatchCache {
                layer_inputs,
                seq_caches,
                inter_masks,
                ln_cache,
                psi,
                trunk_caches,
                trunk_masks,
                phi,
            },
        ))
    }

    /// Backward through the batched forward; returns the flat gradient
    /// aligned with [`DeepONetModel::flatten_params`].
    pub fn backward_batch(&self, cache: &BatchCache, dout: &Matrix) -> Result<Vec<f64>> {
        let dpsi_full = dout.matmul(&cache.phi)?;
        let dphi = dout.tr_matmul(&cache.psi)?;
        let dbias: f64 = dout.data().iter().sum();

        // Trunk backward.
        let k = self.trunk.len();
        let mut trunk_grads: Vec<Option<DenseGrads>> = (0..k).map(|_| None).collect();
        let mut g = dphi;
        for i in (0..k).rev() {
            let (dx, grads) = self.trunk[i].backward(&cache.trunk_caches[i], &g)?;
            trunk_grads[i] = Some(grads);
            if i > 0 {
                g = dropout_backward(&dx, &cache.trunk_masks[i - 1]);
            }
        }

        // Branch backward.
        let (dh_top, ln_grads) = match (&self.layer_norm, &cache.ln_cache) {
            (Some(ln), Some(lnc)) => {
                let (dx, grads) = ln.backward(lnc, &dpsi_full)?;
                (dx, Some(grads))
            }
            _ => (dpsi_full, None),
        };

        let n_layers = self.branch.layers();
        let t_len = cache.layer_inputs[0].len();
        let b = dh_top.rows();
        let mut rec_grads: Vec<Option<RecurrentGrads>> = (0..n_layers).map(|_| None).collect();
        let mut upstream: Vec<Matrix> = Vec::new(); // dhs for the layer below
        for l in (0..n_layers).rev() {
            let dhs: Vec<Matrix> = if l == n_layers - 1 {
                let hidden = self.branch_cfg.hidden;
                let mut v = vec![Matrix::zeros(b, hidden); t_len - 1];
                v.push(dh_top.clone());
                v
            } else {
                upstream
                    .iter()
                    .zip(&cache.inter_masks[l])
                    .map(|(dx, mask)| dropout_backward(dx, mask))
                    .collect()
            };
            let (dxs, grads) = match (&self.branch, &cache.seq_caches[l]) {
                (RecurrentStack::Gru(layers), SeqCacheKind::Gru(c)) => {
                    let (dxs, g) = layers[l].backward_seq(&cache.layer_inputs[l], c, &dhs)?;
                    (dxs, RecurrentGrads::Gru(g))
                }
                (RecurrentStack::Lstm(layers), SeqCacheKind::Lstm(c)) => {
                    let (dxs, g) = layers[l].backward_seq(&cache.layer_inputs[l], c, &dhs)?;
                    (dxs, RecurrentGrads::Lstm(g))
                }
                _ => unreachable!("stack and cache kinds always match"),
            };
            rec_grads[l] = Some(grads);
            upstream = dxs;
        }

        // Assemble in flatten order.
        let mut flat = Vec::with_capacity(self.parameter_count());
        for grads in rec_grads.into_iter().flatten() {
            match grads {
                RecurrentGrads::Gru(g) => {
                    flat.extend_from_slice(g.dw_ih.data());
                    flat.extend_from_slice(g.dw_hh.data());
                    flat.extend_from_slice(&g.db_ih);
                    flat.extend_from_slice(&g.db_hh);
                }
                RecurrentGrads::Lstm(g) => {
                    flat.extend_from_slice(g.dw_ih.data());
                    flat.extend_from_slice(g.dw_hh.data());
                    flat.extend_from_slice(&g.db_ih);
                    flat.extend_from_slice(&g.db_hh);
                }
            }
        }
        if let Some(g) = ln_grads {
            flat.extend_from_slice(&g.dgain);
            flat.extend_from_slice(&g.dshift);
        }
        for g in trunk_grads.into_iter().flatten() {
            flat.extend_from_slice(g.dw.data());
            flat.extend_from_slice(&g.db);
        }
        flat.push(dbias);
        debug_assert_eq!(flat.len(), self.parameter_count());
        Ok(flat)
    }

    /// Full single-sample forward in physical units: normalizes the input
    /// sequence and query coordinates, runs the operator, de-normalizes.
    /// Fresh dropout masks are drawn from `stream` on every call when
    /// `dropout_active` is set.
    pub fn forward(
        &self,
        u: &Matrix,
        grid: &QueryGrid,
        dropout_active: bool,
        stream: RngStream,
    ) -> Result<FieldPrediction> {
        let u_norm = self.norm.normalize_input(u)?;
        let grid_norm = self.normalize_grid(grid);
        let xs = sequence_major(&[&u_norm])?;
        let mut rng = stream.rng();
        let (out, _) = self.forward_batch_normalized(&xs, &grid_norm, dropout_active, &mut rng)?;
        let pred: Vec<f64> = out.data().iter().map(|&v| self.norm.denormalize_output(v)).collect();
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(CmcoError::NumericFailure(
                "non-finite value in field prediction".into(),
            ));
        }
        Ok(pred)
    }
}

/// Repack per-sample `[T x C]` matrices into sequence-major `[B x C]` steps.
pub fn sequence_major(samples: &[&Matrix]) -> Result<Vec<Matrix>> {
    let b = samples.len();
    if b == 0 {
        return Err(CmcoError::shape("sequence_major", "no samples"));
    }
    let (t_len, c) = (samples[0].rows(), samples[0].cols());
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut step = Matrix::zeros(b, c);
        for (i, s) in samples.iter().enumerate() {
            if s.rows() != t_len || s.cols() != c {
                return Err(CmcoError::shape(
                    "sequence_major",
                    format!("sample {i} is {}x{}, expected {t_len}x{c}", s.rows(), s.cols()),
                ));
            }
            step.row_mut(i).copy_from_slice(s.row(t));
        }
        out.push(step);
    }
    Ok(out)
}
