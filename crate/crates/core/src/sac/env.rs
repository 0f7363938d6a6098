use crate::channel::{draw_channel_set, ChannelSet, ScenarioConfig, Topology};
use crate::error::Result;
use crate::geometry::Point;
use crate::gnn::{gnn_forward, GnnModel};
use crate::rng::seeded;
use crate::secrecy::secrecy_report;

/// Horizontal UAV displacement in `[-1, 1]^2`, scaled on application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
}

impl Action {
    pub const ZERO: Action = Action { dx: 0.0, dy: 0.0 };
}

/// State dimension `2 + 4KN`.
pub fn state_dim(users: usize, antennas: usize) -> usize {
    2 + 4 * users * antennas
}

/// Flattened state: UAV position divided by the area side, then
/// `Re h_1..Re h_K, Im h_1..Im h_K, Re h_E,1.., Im h_E,1..` (each `h` in
/// antenna order) multiplied by `channel_scale`.
pub fn encode_state(topo: &Topology<f64>, ch: &ChannelSet<f64>, channel_scale: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(state_dim(ch.num_users(), ch.antennas()));
    s.push(topo.uav.x / topo.area_side);
    s.push(topo.uav.y / topo.area_side);
    for block in [&ch.users, &ch.eves] {
        for h in block {
            s.extend(h.iter().map(|c| c.re * channel_scale));
        }
        for h in block {
            s.extend(h.iter().map(|c| c.im * channel_scale));
        }
    }
    s
}

/// `uav <- clip(uav + step_scale * a)` inside the area.
pub fn apply_action(topo: &Topology<f64>, a: Action, step_scale: f64) -> Topology<f64> {
    let p = Point::new(topo.uav.x + step_scale * a.dx, topo.uav.y + step_scale * a.dy);
    topo.with_uav(topo.clip(p))
}

/// Small-scale fading draws used for one reward evaluation; the same seeds
/// at the same position give the same channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FadingSeeds(pub Vec<u64>);

impl FadingSeeds {
    pub fn channels(&self, topo: &Topology<f64>, cfg: &ScenarioConfig) -> Vec<ChannelSet<f64>> {
        self.0.iter().map(|&s| draw_channel_set(topo, cfg, &mut seeded(s))).collect()
    }
}

/// Sum secrecy rate of the GNN beamformer at the topology's UAV position,
/// averaged over the fading draws. Also returns the channels of the first draw.
pub fn reward_and_channels(
    topo: &Topology<f64>,
    cfg: &ScenarioConfig,
    gnn: &GnnModel,
    fading: &FadingSeeds,
) -> Result<(f64, ChannelSet<f64>)> {
    let sets = fading.channels(topo, cfg);
    let mut total = 0.0;
    for ch in &sets {
        let w = gnn_forward(ch, gnn, cfg.power_budget)?;
        total += secrecy_report(ch, &w, cfg.noise_power).sum;
    }
    let first = sets.into_iter().next().expect("at least one fading draw");
    Ok((total / fading.0.len() as f64, first))
}

pub fn compute_reward(topo: &Topology<f64>, cfg: &ScenarioConfig, gnn: &GnnModel, fading: &FadingSeeds) -> Result<f64> {
    reward_and_channels(topo, cfg, gnn, fading).map(|r| r.0)
}
