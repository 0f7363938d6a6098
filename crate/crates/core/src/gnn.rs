//! Graph-neural beamformer.
//!
//! Each user is a node whose feature stacks its own channel, its
//! eavesdropper's channel and a learned embedding. A GCN layer generates a
//! message per node, aggregates the other nodes' transformed messages with an
//! elementwise max, concatenates the two and maps the result back to a new
//! embedding; channel blocks pass through unchanged. All parameters are shared
//! across nodes, which makes the map permutation-equivariant and independent
//! of the number of users.

use crate::autodiff::{Bound, Linear, Mlp, Optimizer, OptimizerKind, ParamId, ParamStore, Tape, Tensor, Var, PRELU_INIT};
use crate::channel::{draw_channel_set, sample_topology, ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::secrecy::{normalize_power_real, secrecy_loss_real, Beamformer, RealChannels};
use crate::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Architecture of a [`GnnModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnArch {
    pub antennas: usize,
    pub layers: usize,
    pub message_width: usize,
    pub aggregate_width: usize,
    pub hidden_width: usize,
    /// Multiplies channel entries before they enter the network.
    pub feature_scale: f64,
}

impl GnnArch {
    /// Default widths relative to the antenna count: messages and aggregates
    /// `4N`, output-MLP hidden layer `8N`.
    pub fn for_scenario(cfg: &ScenarioConfig, layers: usize) -> Self {
        let n = cfg.antennas;
        Self {
            antennas: n,
            layers,
            message_width: 4 * n,
            aggregate_width: 4 * n,
            hidden_width: 8 * n,
            feature_scale: 1.0 / cfg.reference_gain().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GcnLayer {
    message: Linear,
    aggregate: Linear,
    aggregate_slope: ParamId,
    output: Mlp,
}

/// Learnable parameters plus architecture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub arch: GnnArch,
    pub params: ParamStore,
    layers: Vec<GcnLayer>,
}

impl GnnModel {
    pub fn new<R: Rng + ?Sized>(arch: GnnArch, rng: &mut R) -> Self {
        let n = arch.antennas;
        let mut params = ParamStore::new();
        let layers = (0..arch.layers)
            .map(|d| {
                let message = Linear::new(&mut params, &format!("gcn{d}.message"), 6 * n, arch.message_width, rng);
                let aggregate =
                    Linear::new(&mut params, &format!("gcn{d}.aggregate"), arch.message_width, arch.aggregate_width, rng);
                let aggregate_slope = params.add(format!("gcn{d}.aggregate.prelu"), Tensor::scalar(PRELU_INIT));
                let output = Mlp::new(
                    &mut params,
                    &format!("gcn{d}.output"),
                    &[arch.message_width + arch.aggregate_width, arch.hidden_width, 2 * n],
                    rng,
                );
                GcnLayer { message, aggregate, aggregate_slope, output }
            })
            .collect();
        Self { arch, params, layers }
    }

    /// Same architecture with the given parameter values (layout must match).
    pub fn with_params(arch: GnnArch, params: ParamStore) -> Result<Self> {
        let mut rng = crate::rng::seeded(0);
        let mut model = Self::new(arch, &mut rng);
        model.params.copy_from(&params)?;
        Ok(model)
    }
}

/// Initial embeddings `e_k = h_k / ||h_k||` as `[K, 2N]` rows `[Re | Im]`.
pub fn init_embeddings(ch: &ChannelSet<f64>) -> Result<Tensor> {
    let n = ch.antennas();
    let mut rows = Vec::with_capacity(ch.num_users() * 2 * n);
    for h in &ch.users {
        let norm = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("zero user channel has no matched-filter direction".into()));
        }
        rows.extend(h.iter().map(|c| c.re / norm));
        rows.extend(h.iter().map(|c| c.im / norm));
    }
    Tensor::matrix(ch.num_users(), 2 * n, rows)
}

/// Channel block `[K, 4N]` = `[Re h_k, Im h_k, Re h_E,k, Im h_E,k] * scale`.
fn channel_block(ch: &ChannelSet<f64>, scale: f64) -> Result<Tensor> {
    let n = ch.antennas();
    let mut rows = Vec::with_capacity(ch.num_users() * 4 * n);
    for (h, he) in ch.users.iter().zip(&ch.eves) {
        rows.extend(h.iter().map(|c| c.re * scale));
        rows.extend(h.iter().map(|c| c.im * scale));
        rows.extend(he.iter().map(|c| c.re * scale));
        rows.extend(he.iter().map(|c| c.im * scale));
    }
    Tensor::matrix(ch.num_users(), 4 * n, rows)
}

fn stack_rows(blocks: &[Tensor]) -> Result<Tensor> {
    let cols = blocks[0].dims2()?.1;
    let rows: usize = blocks.iter().map(|b| b.dims2().map(|d| d.0)).sum::<Result<usize>>()?;
    let data = blocks.iter().flat_map(|b| b.data().iter().copied()).collect();
    Tensor::matrix(rows, cols, data)
}

/// One GCN layer over a batch of graphs with `set_size` nodes each.
///
/// `channels` is the constant `[B*K, 4N]` block and `embeddings` the current
/// `[B*K, 2N]` embeddings; returns the next `[B*K, 2N]` embeddings.
pub fn gcn_layer(
    tape: &mut Tape,
    p: &Bound,
    layer_index: usize,
    model: &GnnModel,
    channels: Var,
    embeddings: Var,
    set_size: usize,
) -> Result<Var> {
    let layer = &model.layers[layer_index];
    let z = tape.concat(&[channels, embeddings])?;
    let m = layer.message.forward(tape, p, z)?;
    let t = layer.aggregate.forward(tape, p, m)?;
    let t = tape.prelu(t, p.var(layer.aggregate_slope))?;
    let a = tape.max_over_others(t, set_size)?;
    let c = tape.concat(&[m, a])?;
    layer.output.forward(tape, p, c)
}

/// Final-layer embeddings `[B*K, 2N]` for a batch of equally sized scenarios.
pub fn forward_embeddings(tape: &mut Tape, p: &Bound, model: &GnnModel, batch: &[ChannelSet<f64>]) -> Result<Var> {
    let k = batch.first().ok_or_else(|| Error::Dimension("empty batch".into()))?.num_users();
    for ch in batch {
        ch.validate()?;
        if ch.num_users() != k {
            return Err(Error::Dimension("scenarios in a batch must have equal user counts".into()));
        }
        if ch.antennas() != model.arch.antennas {
            return Err(Error::Dimension(format!(
                "model built for {} antennas, channel has {}",
                model.arch.antennas,
                ch.antennas()
            )));
        }
    }
    let chan = batch.iter().map(|c| channel_block(c, model.arch.feature_scale)).collect::<Result<Vec<_>>>()?;
    let emb = batch.iter().map(init_embeddings).collect::<Result<Vec<_>>>()?;
    let chan = tape.constant(stack_rows(&chan)?);
    let mut e = tape.constant(stack_rows(&emb)?);
    for d in 0..model.layers.len() {
        e = gcn_layer(tape, p, d, model, chan, e, k)?;
    }
    Ok(e)
}

/// Beamformer for one scenario; satisfies the power budget with equality.
pub fn gnn_forward(ch: &ChannelSet<f64>, model: &GnnModel, power_budget: f64) -> Result<Beamformer<f64>> {
    let mut tape = Tape::new();
    gnn_forward_on(&mut tape, ch, model, power_budget)
}

/// [`gnn_forward`] recording onto a caller-provided tape (e.g. to count work).
pub fn gnn_forward_on(tape: &mut Tape, ch: &ChannelSet<f64>, model: &GnnModel, power_budget: f64) -> Result<Beamformer<f64>> {
    let p = model.params.bind_frozen(tape);
    let e = forward_embeddings(tape, &p, model, std::slice::from_ref(ch))?;
    let w = normalize_power_real(tape, e, power_budget)?;
    Ok(Beamformer::from_real_rows(tape.value(w).data(), ch.num_users(), ch.antennas()))
}

/// Mean of `-R^sec` over a batch, recorded on `tape`.
pub fn batch_loss(
    tape: &mut Tape,
    p: &Bound,
    model: &GnnModel,
    batch: &[ChannelSet<f64>],
    noise: f64,
    power_budget: f64,
) -> Result<Var> {
    let e = forward_embeddings(tape, p, model, batch)?;
    embeddings_loss(tape, e, batch, noise, power_budget)
}

/// Mean of `-R^sec` given stacked `[B*K, 2N]` embeddings for `batch`.
pub(crate) fn embeddings_loss(tape: &mut Tape, e: Var, batch: &[ChannelSet<f64>], noise: f64, power_budget: f64) -> Result<Var> {
    let k = batch[0].num_users();
    let mut losses = Vec::with_capacity(batch.len());
    for (b, ch) in batch.iter().enumerate() {
        let eb = tape.slice_rows(e, b * k, k)?;
        losses.push(secrecy_loss_real(tape, eb, &RealChannels::new(ch), noise, power_budget)?);
    }
    let all = tape.concat(&losses)?;
    tape.mean(all)
}

/// Unsupervised training schedule shared by the GNN and MLP beamformers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamTrainConfig {
    pub learning_rate: f64,
    /// Number of parameter updates; each sees a fresh batch.
    pub epochs: usize,
    pub batch_size: usize,
    pub layers: usize,
    pub optimizer: OptimizerKind,
}

impl Default for BeamTrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.005, epochs: 300, batch_size: 512, layers: 5, optimizer: OptimizerKind::adam() }
    }
}

impl BeamTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.layers == 0 {
            return Err(Error::Config("batch_size and layers must be at least 1".into()));
        }
        Ok(())
    }
}

/// One training scenario: random layout, UAV uniform over the area, fresh fading.
pub fn sample_training_channels<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> ChannelSet<f64> {
    let mut topo = sample_topology::<f64, _>(cfg, rng);
    topo.uav = Point::new(f64::unit_uniform(rng) * cfg.area_side, f64::unit_uniform(rng) * cfg.area_side);
    draw_channel_set(&topo, cfg, rng)
}

/// Generic minibatch loop: `loss_fn` records the batch loss for the given
/// bound parameters; returns the per-epoch loss curve.
pub(crate) fn fit<R, F>(
    params: &mut ParamStore,
    train: &BeamTrainConfig,
    scenario: &ScenarioConfig,
    rng: &mut R,
    mut loss_fn: F,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut Tape, &Bound, &[ChannelSet<f64>]) -> Result<Var>,
{
    let mut opt = Optimizer::new(train.optimizer, train.learning_rate);
    let mut curve = Vec::with_capacity(train.epochs);
    for epoch in 0..train.epochs {
        let batch: Vec<_> = (0..train.batch_size).map(|_| sample_training_channels(scenario, rng)).collect();
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let loss = loss_fn(&mut tape, &p, &batch).map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: non-finite loss {value}")));
        }
        let grads = params.grads(&p, &tape.backward(loss)?);
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "epoch {epoch}: non-finite gradient for {}",
                params.names()[bad]
            )));
        }
        opt.step(params.tensors_mut(), &grads)?;
        curve.push(value);
    }
    Ok(curve)
}

/// Train a fresh GNN on `scenario`.
pub fn train_gnn<R: Rng + ?Sized>(train: &BeamTrainConfig, scenario: &ScenarioConfig, rng: &mut R) -> Result<(GnnModel, Vec<f64>)> {
    train.validate()?;
    scenario.validate()?;
    let model = GnnModel::new(GnnArch::for_scenario(scenario, train.layers), rng);
    transfer_train(&model, train, scenario, rng)
}

/// Continue training `pretrained` on `scenario` (e.g. a different user count).
pub fn transfer_train<R: Rng + ?Sized>(
    pretrained: &GnnModel,
    train: &BeamTrainConfig,
    scenario: &ScenarioConfig,
    rng: &mut R,
) -> Result<(GnnModel, Vec<f64>)> {
    if scenario.antennas != pretrained.arch.antennas {
        return Err(Error::Dimension(format!(
            "model has {} antennas, scenario {}",
            pretrained.arch.antennas, scenario.antennas
        )));
    }
    let mut model = pretrained.clone();
    let mut params = std::mem::take(&mut model.params);
    let (noise, power) = (scenario.noise_power, scenario.power_budget);
    let curve = fit(&mut params, train, scenario, rng, |tape, p, batch| batch_loss(tape, p, &model, batch, noise, power))?;
    model.params = params;
    Ok((model, curve))
}

/// Mean of `-R^sec` over fixed scenarios without updating anything.
pub fn evaluate_loss(model: &GnnModel, batch: &[ChannelSet<f64>], noise: f64, power_budget: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let p = model.params.bind_frozen(&mut tape);
    let l = batch_loss(&mut tape, &p, model, batch, noise, power_budget)?;
    Ok(tape.value(l).item())
}
