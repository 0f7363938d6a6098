use crate::autodiff::{Bound, Mlp, Optimizer, OptimizerKind, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps `log(1 - tanh(u)^2)` finite at saturation.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacArch {
    pub state_dim: usize,
    pub hidden: Vec<usize>,
}

impl SacArch {
    fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(&self.hidden);
        w.push(output);
        w
    }
}

/// A network together with its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub mlp: Mlp,
    pub params: ParamStore,
}

impl Net {
    fn new<R: Rng + ?Sized>(name: &str, widths: &[usize], rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        let mlp = Mlp::new(&mut params, name, widths, rng);
        Self { mlp, params }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        self.mlp.forward(tape, p, x)
    }
}

/// Actor, twin critics, their targets and the entropy temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SacModel {
    pub arch: SacArch,
    pub actor: Net,
    pub critics: [Net; 2],
    pub targets: [Net; 2],
    pub log_alpha: f64,
}

impl SacModel {
    pub fn new<R: Rng + ?Sized>(arch: SacArch, init_alpha: f64, rng: &mut R) -> Self {
        let actor = Net::new("actor", &arch.widths(arch.state_dim, 2 * ACTION_DIM), rng);
        let cw = arch.widths(arch.state_dim + ACTION_DIM, 1);
        let critics = [Net::new("critic", &cw, rng), Net::new("critic", &cw, rng)];
        let targets = critics.clone();
        Self { arch, actor, critics, targets, log_alpha: init_alpha.ln() }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Named parameters of every network, prefixed by role.
    pub fn export(&self) -> ParamStore {
        let mut out = ParamStore::new();
        let nets = [
            ("actor", &self.actor),
            ("critic1", &self.critics[0]),
            ("critic2", &self.critics[1]),
            ("target1", &self.targets[0]),
            ("target2", &self.targets[1]),
        ];
        for (role, net) in nets {
            for (name, t) in net.params.iter() {
                out.add(format!("{role}/{name}"), t.clone());
            }
        }
        out.add("log_alpha", Tensor::scalar(self.log_alpha));
        out
    }

    /// Inverse of [`SacModel::export`].
    pub fn import(arch: SacArch, store: &ParamStore) -> Result<Self> {
        let mut m = Self::new(arch, 1.0, &mut crate::rng::seeded(0));
        load_net(&mut m.actor, "actor", store)?;
        let [c1, c2] = &mut m.critics;
        load_net(c1, "critic1", store)?;
        load_net(c2, "critic2", store)?;
        let [t1, t2] = &mut m.targets;
        load_net(t1, "target1", store)?;
        load_net(t2, "target2", store)?;
        let expected = m.export().len();
        if store.len() != expected {
            return Err(Error::Checkpoint(format!("expected {expected} parameters, found {}", store.len())));
        }
        m.log_alpha = store.by_name("log_alpha").map(|t| t.item()).ok_or_else(|| Error::Checkpoint("missing log_alpha".into()))?;
        Ok(m)
    }
}

fn load_net(net: &mut Net, role: &str, store: &ParamStore) -> Result<()> {
    for i in 0..net.params.len() {
        let key = format!("{role}/{}", net.params.names()[i]);
        let t = store.by_name(&key).ok_or_else(|| Error::Checkpoint(format!("missing parameter {key}")))?;
        let slot = &mut net.params.tensors_mut()[i];
        if t.shape() != slot.shape() {
            return Err(Error::Checkpoint(format!("parameter {key} has shape {:?}", t.shape())));
        }
        slot.data_mut().copy_from_slice(t.data());
    }
    Ok(())
}

/// Squashed-Gaussian actor head on the tape.
pub struct PolicyOut {
    pub action: Var,
    /// `[B, 1]` log-density of `action` including the tanh correction.
    pub log_prob: Var,
    pub log_std: Var,
}

/// `a = tanh(mu + sigma * eps)` and its log-density for given head outputs.
pub fn squashed_gaussian(tape: &mut Tape, mu: Var, log_std: Var, eps: &Tensor) -> Result<PolicyOut> {
    let log_std = tape.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)?;
    let std = tape.exp(log_std)?;
    let e = tape.constant(eps.clone());
    let noise = tape.mul(std, e)?;
    let u = tape.add(mu, noise)?;
    let action = tape.tanh(u)?;
    // log N(u; mu, sigma) = -eps^2/2 - log sigma - log(2 pi)/2
    let gauss: Vec<f64> = eps.data().iter().map(|z| -0.5 * z * z - HALF_LN_2PI).collect();
    let gauss = tape.constant(Tensor::new(eps.shape().to_vec(), gauss)?);
    let lp = tape.sub(gauss, log_std)?;
    let a2 = tape.square(action)?;
    let one_minus = tape.neg(a2)?;
    let one_minus = tape.add_const(one_minus, 1.0 + SQUASH_EPS)?;
    let jac = tape.log(one_minus)?;
    let lp = tape.sub(lp, jac)?;
    let log_prob = tape.sum_last(lp)?;
    Ok(PolicyOut { action, log_prob, log_std })
}

/// Actor forward pass for `states: [B, S]` with noise `eps: [B, 2]`
/// (zeros give the deterministic action `tanh(mu)`).
pub fn actor_head(tape: &mut Tape, p: &Bound, model: &SacModel, states: Var, eps: &Tensor) -> Result<PolicyOut> {
    let out = model.actor.forward(tape, p, states)?;
    let mu = tape.slice_cols(out, 0, ACTION_DIM)?;
    let log_std = tape.slice_cols(out, ACTION_DIM, ACTION_DIM)?;
    squashed_gaussian(tape, mu, log_std, eps)
}

pub fn standard_normal_noise<R: Rng + ?Sized>(rows: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * ACTION_DIM).map(|_| f64::standard_normal(rng)).collect();
    Tensor::matrix(rows, ACTION_DIM, data).expect("noise shape")
}

/// Sample an action for one state; `deterministic` returns `tanh(mu)`.
pub fn actor_sample<R: Rng + ?Sized>(model: &SacModel, state: &[f64], rng: &mut R, deterministic: bool) -> Result<([f64; 2], f64)> {
    let eps = if deterministic { Tensor::zeros(&[1, ACTION_DIM]) } else { standard_normal_noise(1, rng) };
    let mut tape = Tape::new();
    let p = model.actor.params.bind_frozen(&mut tape);
    let s = tape.constant(Tensor::matrix(1, state.len(), state.to_vec())?);
    let out = actor_head(&mut tape, &p, model, s, &eps)?;
    let a = tape.value(out.action).data();
    Ok(([a[0], a[1]], tape.value(out.log_prob).item()))
}

/// Minibatch in tensor form.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
}

impl Batch {
    pub fn from_transitions(ts: &[&super::Transition]) -> Result<Self> {
        let b = ts.len();
        if b == 0 {
            return Err(Error::Dimension("empty minibatch".into()));
        }
        let s = ts[0].state.len();
        let states = Tensor::matrix(b, s, ts.iter().flat_map(|t| t.state.iter().copied()).collect())?;
        let next_states = Tensor::matrix(b, s, ts.iter().flat_map(|t| t.next_state.iter().copied()).collect())?;
        let actions = Tensor::matrix(b, ACTION_DIM, ts.iter().flat_map(|t| t.action).collect())?;
        Ok(Self { states, actions, rewards: ts.iter().map(|t| t.reward).collect(), next_states })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

fn critic_value(tape: &mut Tape, net: &Net, p: &Bound, states: Var, actions: Var) -> Result<Var> {
    let x = tape.concat(&[states, actions])?;
    net.forward(tape, p, x)
}

/// Bellman targets for both critics plus each target critic's own value,
/// given next-state noise `eps`.
pub struct Targets {
    pub y: Vec<f64>,
    /// `r + discount * (Q_i'(s', a') - alpha log pi)` for `i = 1, 2`.
    pub per_critic: [Vec<f64>; 2],
}

/// `y = r + discount * (min_i Q_i'(s', a') - alpha log pi(a'|s'))`, `a'` from the current actor.
pub fn critic_targets(model: &SacModel, batch: &Batch, discount: f64, eps: &Tensor) -> Result<Targets> {
    let mut tape = Tape::new();
    let pa = model.actor.params.bind_frozen(&mut tape);
    let s2 = tape.constant(batch.next_states.clone());
    let pol = actor_head(&mut tape, &pa, model, s2, eps)?;
    let alpha = model.alpha();
    let logp = tape.value(pol.log_prob).data().to_vec();
    let mut per_q = Vec::with_capacity(2);
    for net in &model.targets {
        let p = net.params.bind_frozen(&mut tape);
        let q = critic_value(&mut tape, net, &p, s2, pol.action)?;
        per_q.push(tape.value(q).data().to_vec());
    }
    let soft = |q: f64, lp: f64| q - if alpha == 0.0 { 0.0 } else { alpha * lp };
    let mut y = Vec::with_capacity(batch.len());
    let mut per = [Vec::with_capacity(batch.len()), Vec::with_capacity(batch.len())];
    for i in 0..batch.len() {
        let r = batch.rewards[i];
        y.push(r + discount * soft(per_q[0][i].min(per_q[1][i]), logp[i]));
        for c in 0..2 {
            per[c].push(r + discount * soft(per_q[c][i], logp[i]));
        }
    }
    Ok(Targets { y, per_critic: per })
}

/// Mean-squared Bellman residual of `net` against `y`, recorded on `tape`.
fn critic_loss(tape: &mut Tape, net: &Net, p: &Bound, batch: &Batch, y: &[f64]) -> Result<Var> {
    let s = tape.constant(batch.states.clone());
    let a = tape.constant(batch.actions.clone());
    let q = critic_value(tape, net, p, s, a)?;
    let y = tape.constant(Tensor::matrix(y.len(), 1, y.to_vec())?);
    let d = tape.sub(q, y)?;
    let d2 = tape.square(d)?;
    tape.mean(d2)
}

fn checked_grads(store: &ParamStore, p: &Bound, tape: &Tape, loss: Var, what: &str) -> Result<Vec<Tensor>> {
    let v = tape.value(loss).item();
    if !v.is_finite() {
        return Err(Error::Training(format!("{what}: non-finite loss {v}")));
    }
    let grads = store.grads(p, &tape.backward(loss)?);
    if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training(format!("{what}: non-finite gradient for {}", store.names()[bad])));
    }
    Ok(grads)
}

/// Optimizer state for every trainable part of the agent.
#[derive(Debug, Clone)]
pub struct SacOptimizers {
    pub actor: Optimizer,
    pub critics: [Optimizer; 2],
    pub alpha: Optimizer,
}

impl SacOptimizers {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        let o = Optimizer::new(kind, lr);
        Self { actor: o.clone(), critics: [o.clone(), o.clone()], alpha: o }
    }
}

/// One step on each critic against the shared targets `y`; returns the losses.
pub fn update_critics(model: &mut SacModel, batch: &Batch, y: &[f64], opts: &mut [Optimizer; 2]) -> Result<[f64; 2]> {
    let mut losses = [0.0; 2];
    for c in 0..2 {
        let net = &mut model.critics[c];
        let mut tape = Tape::new();
        let p = net.params.bind(&mut tape);
        let loss = critic_loss(&mut tape, net, &p, batch, y)?;
        let grads = checked_grads(&net.params, &p, &tape, loss, "critic update")?;
        losses[c] = tape.value(loss).item();
        opts[c].step(net.params.tensors_mut(), &grads)?;
    }
    Ok(losses)
}

/// Actor objective `mean(alpha log pi(a|s) - min_i Q_i(s, a))` with
/// reparameterized `a`; returns the loss and mean log-probability nodes.
pub fn actor_loss(tape: &mut Tape, p: &Bound, model: &SacModel, batch: &Batch, eps: &Tensor) -> Result<(Var, Var)> {
    let s = tape.constant(batch.states.clone());
    let pol = actor_head(tape, p, model, s, eps)?;
    let mut qs = Vec::with_capacity(2);
    for net in &model.critics {
        let pc = net.params.bind_frozen(tape);
        qs.push(critic_value(tape, net, &pc, s, pol.action)?);
    }
    let q = tape.minimum(qs[0], qs[1])?;
    let weighted = tape.scale(pol.log_prob, model.alpha())?;
    let obj = tape.sub(weighted, q)?;
    let loss = tape.mean(obj)?;
    let mean_logp = tape.mean(pol.log_prob)?;
    Ok((loss, mean_logp))
}

/// One actor step; returns `(loss, mean log pi)` before the step.
pub fn update_actor(model: &mut SacModel, batch: &Batch, eps: &Tensor, opt: &mut Optimizer) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let p = model.actor.params.bind(&mut tape);
    let (loss, mean_logp) = actor_loss(&mut tape, &p, model, batch, eps)?;
    let grads = checked_grads(&model.actor.params, &p, &tape, loss, "actor update")?;
    let out = (tape.value(loss).item(), tape.value(mean_logp).item());
    opt.step(model.actor.params.tensors_mut(), &grads)?;
    Ok(out)
}

/// Temperature step on `L = -log(alpha) * (mean log pi + target_entropy)`;
/// `dL/dlog(alpha) = entropy - target_entropy` with `entropy = -mean log pi`.
pub fn update_alpha(model: &mut SacModel, mean_log_prob: f64, target_entropy: f64, opt: &mut Optimizer) -> Result<f64> {
    let grad = -(mean_log_prob + target_entropy);
    if !grad.is_finite() {
        return Err(Error::Training(format!("temperature gradient {grad}")));
    }
    let mut p = [Tensor::scalar(model.log_alpha)];
    opt.step(&mut p, &[Tensor::scalar(grad)])?;
    model.log_alpha = p[0].item();
    Ok(model.alpha())
}

/// `target <- tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut ParamStore, source: &ParamStore, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("soft-update rate {tau} outside [0, 1]")));
    }
    target.check_layout(source)?;
    for (t, s) in target.tensors_mut().iter_mut().zip(source.tensors()) {
        for (tv, sv) in t.data_mut().iter_mut().zip(s.data()) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}
