//! UAV deployment with soft actor-critic.
//!
//! The agent moves the UAV horizontally; the reward at each position is the
//! sum secrecy rate achieved by a frozen GNN beamformer there, averaged over a
//! few fading draws that stay fixed for the whole episode.

mod agent;
mod buffer;
mod env;

pub use agent::*;
pub use buffer::{ReplayBuffer, Transition};
pub use env::{apply_action, compute_reward, encode_state, reward_and_channels, state_dim, Action, FadingSeeds};

use crate::autodiff::OptimizerKind;
use crate::channel::{sample_topology, ScenarioConfig, Topology};
use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::rng::derive_seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Metres moved per unit action.
    pub step_scale: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub discount: f64,
    pub learning_rate: f64,
    pub tau: f64,
    pub init_alpha: f64,
    pub target_entropy: f64,
    /// Transitions stored (with uniform random actions) before updates start.
    pub warmup: usize,
    pub hidden: Vec<usize>,
    /// Fading draws averaged per reward.
    pub fading_draws: usize,
    /// Draw a new user layout every episode instead of keeping one fixed.
    pub resample_topology: bool,
    pub optimizer: OptimizerKind,
    /// Multiplier applied to rewards before they enter the replay buffer.
    /// Logged rewards are never scaled.
    pub reward_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            steps_per_episode: 50,
            step_scale: 10.0,
            batch_size: 64,
            buffer_capacity: 1_000_000,
            discount: 0.99,
            learning_rate: 3e-4,
            tau: 0.005,
            init_alpha: 0.2,
            target_entropy: -(ACTION_DIM as f64),
            warmup: 1000,
            hidden: vec![256, 256],
            fading_draws: 4,
            resample_topology: false,
            optimizer: OptimizerKind::adam(),
            reward_scale: 0.1,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.steps_per_episode == 0 || self.batch_size == 0 || self.buffer_capacity == 0 || self.fading_draws == 0 {
            return bad("steps_per_episode, batch_size, buffer_capacity and fading_draws must be positive");
        }
        if !(self.step_scale > 0.0) {
            return bad("step_scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.tau) {
            return bad("discount and tau must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.init_alpha > 0.0) || !(self.reward_scale > 0.0) {
            return bad("learning_rate, init_alpha and reward_scale must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden must list at least one positive width");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub final_secrecy_rate: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct SacRun {
    pub model: SacModel,
    pub episodes: Vec<EpisodeLog>,
}

impl SacRun {
    pub fn cumulative_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.cumulative_reward).collect()
    }
}

fn fading_for(seed: u64, draws: usize) -> FadingSeeds {
    FadingSeeds((0..draws as u64).map(|i| derive_seed(seed, i)).collect())
}

/// Train an agent. With `fixed = Some(topo)` every episode uses that user
/// layout; otherwise a new one is sampled per episode. Each episode starts
/// with the UAV at the area center.
pub fn train_sac<R: Rng + ?Sized>(
    cfg: &SacConfig,
    scenario: &ScenarioConfig,
    gnn: &GnnModel,
    fixed: Option<&Topology<f64>>,
    rng: &mut R,
) -> Result<SacRun> {
    cfg.validate()?;
    scenario.validate()?;
    if let Some(t) = fixed {
        t.validate()?;
        if t.num_users() != scenario.users {
            return Err(Error::Dimension(format!("topology has {} users, scenario {}", t.num_users(), scenario.users)));
        }
    }
    if fixed.is_none() && !cfg.resample_topology {
        return Err(Error::Config("a fixed topology is required unless resample_topology is set".into()));
    }
    let scale = gnn.arch.feature_scale;
    let arch = SacArch { state_dim: state_dim(scenario.users, scenario.antennas), hidden: cfg.hidden.clone() };
    let mut model = SacModel::new(arch, cfg.init_alpha, rng);
    let mut opts = SacOptimizers::new(cfg.optimizer, cfg.learning_rate);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut logs = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let layout = match fixed {
            Some(t) if !cfg.resample_topology => t.clone(),
            _ => sample_topology::<f64, _>(scenario, rng),
        };
        let mut topo = layout.with_uav(layout.center());
        let fading = fading_for(rng.random::<u64>(), cfg.fading_draws);
        let (_, ch) = reward_and_channels(&topo, scenario, gnn, &fading)?;
        let mut state = encode_state(&topo, &ch, scale);
        let mut total = 0.0;
        let mut last = 0.0;
        for _ in 0..cfg.steps_per_episode {
            let a = if buffer.len() < cfg.warmup {
                [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
            } else {
                actor_sample(&model, &state, rng, false)?.0
            };
            topo = apply_action(&topo, Action { dx: a[0], dy: a[1] }, cfg.step_scale);
            let (r, ch) = reward_and_channels(&topo, scenario, gnn, &fading)?;
            let next = encode_state(&topo, &ch, scale);
            buffer.push(Transition { state: std::mem::replace(&mut state, next.clone()), action: a, reward: r * cfg.reward_scale, next_state: next });
            total += r;
            last = r;
            if buffer.len() >= cfg.warmup.max(cfg.batch_size) {
                sac_update(&mut model, &mut opts, &buffer, cfg, rng)
                    .map_err(|e| Error::Training(format!("episode {episode}: {e}")))?;
            }
        }
        logs.push(EpisodeLog { episode, cumulative_reward: total, final_secrecy_rate: last, alpha: model.alpha() });
    }
    Ok(SacRun { model, episodes: logs })
}

/// One gradient update of critics, actor and temperature, then the target sync.
pub fn sac_update<R: Rng + ?Sized>(
    model: &mut SacModel,
    opts: &mut SacOptimizers,
    buffer: &ReplayBuffer,
    cfg: &SacConfig,
    rng: &mut R,
) -> Result<()> {
    let batch = Batch::from_transitions(&buffer.sample(cfg.batch_size, rng))?;
    let eps_next = standard_normal_noise(batch.len(), rng);
    let targets = critic_targets(model, &batch, cfg.discount, &eps_next)?;
    update_critics(model, &batch, &targets.y, &mut opts.critics)?;
    let eps = standard_normal_noise(batch.len(), rng);
    let (_, mean_logp) = update_actor(model, &batch, &eps, &mut opts.actor)?;
    update_alpha(model, mean_logp, cfg.target_entropy, &mut opts.alpha)?;
    for c in 0..2 {
        soft_update(&mut model.targets[c].params, &model.critics[c].params, cfg.tau)?;
    }
    Ok(())
}

/// Deterministic roll-out from the area center with the given fading; the
/// first point is the start position.
pub fn rollout(
    model: &SacModel,
    layout: &Topology<f64>,
    scenario: &ScenarioConfig,
    gnn: &GnnModel,
    fading: &FadingSeeds,
    step_scale: f64,
    steps: usize,
) -> Result<Vec<TracePoint>> {
    let mut topo = layout.with_uav(layout.center());
    let (r, mut ch) = reward_and_channels(&topo, scenario, gnn, fading)?;
    let mut trace = vec![TracePoint { step: 0, x: topo.uav.x, y: topo.uav.y, reward: r }];
    let mut rng = crate::rng::seeded(0);
    for step in 1..=steps {
        let s = encode_state(&topo, &ch, gnn.arch.feature_scale);
        let (a, _) = actor_sample(model, &s, &mut rng, true)?;
        topo = apply_action(&topo, Action { dx: a[0], dy: a[1] }, step_scale);
        let (r, next) = reward_and_channels(&topo, scenario, gnn, fading)?;
        ch = next;
        trace.push(TracePoint { step, x: topo.uav.x, y: topo.uav.y, reward: r });
    }
    Ok(trace)
}

/// Moving average with window `w` (shorter at the start).
pub fn smooth(xs: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for i in 0..xs.len() {
        acc += xs[i];
        if i >= w {
            acc -= xs[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}
