//! Reference strategies: MRT and MLP beamformers, heuristic UAV placements
//! and the exhaustive grid deployment oracle.

use crate::autodiff::{Bound, Mlp, ParamStore, Tape, Tensor, Var};
use crate::channel::{ChannelSet, ScenarioConfig, Topology};
use crate::error::{Error, Result};
use crate::geometry::{mean, min_enclosing_circle, polygon_centroid, Point};
use crate::gnn::{embeddings_loss, fit, BeamTrainConfig, GnnModel};
use crate::sac::{compute_reward, FadingSeeds};
use crate::secrecy::{normalize_power_real, Beamformer};
use crate::Scalar;
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Maximum-ratio transmission: `w_k = sqrt(P/K) h_k / ||h_k||`.
pub fn mrt_beamformer<T: Scalar>(ch: &ChannelSet<T>, power_budget: T) -> Result<Beamformer<T>> {
    let per_user = (power_budget / T::lit(ch.num_users() as f64)).sqrt();
    let mut vectors = Vec::with_capacity(ch.num_users());
    for h in &ch.users {
        let norm = h.iter().fold(T::zero(), |s, c| s + c.norm_sqr()).sqrt();
        if !(norm > T::zero()) {
            return Err(Error::Degenerate("zero user channel has no MRT direction".into()));
        }
        let s = per_user / norm;
        vectors.push(h.iter().map(|c| Complex::new(c.re * s, c.im * s)).collect());
    }
    Ok(Beamformer { vectors })
}

/// Shape of an [`MlpModel`]; fixed to one `(K, N)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpArch {
    pub users: usize,
    pub antennas: usize,
    pub hidden_width: usize,
    pub feature_scale: f64,
}

impl MlpArch {
    /// `4KN -> 8KN -> 8KN -> 2KN`.
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            users: cfg.users,
            antennas: cfg.antennas,
            hidden_width: 8 * cfg.users * cfg.antennas,
            feature_scale: 1.0 / cfg.reference_gain().sqrt(),
        }
    }

    fn widths(&self) -> [usize; 4] {
        let kn = self.users * self.antennas;
        [4 * kn, self.hidden_width, self.hidden_width, 2 * kn]
    }
}

/// Fully connected beamformer over the flattened channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArch,
    pub params: ParamStore,
    net: Mlp,
}

impl MlpModel {
    pub fn new<R: Rng + ?Sized>(arch: MlpArch, rng: &mut R) -> Self {
        let mut params = ParamStore::new();
        let net = Mlp::new(&mut params, "mlp", &arch.widths(), rng);
        Self { arch, params, net }
    }

    pub fn with_params(arch: MlpArch, params: ParamStore) -> Result<Self> {
        let mut model = Self::new(arch, &mut crate::rng::seeded(0));
        model.params.copy_from(&params)?;
        Ok(model)
    }

    fn check(&self, ch: &ChannelSet<f64>) -> Result<()> {
        ch.validate()?;
        if ch.num_users() != self.arch.users || ch.antennas() != self.arch.antennas {
            return Err(Error::Dimension(format!(
                "MLP built for K={}, N={}; got K={}, N={} (retrain required)",
                self.arch.users,
                self.arch.antennas,
                ch.num_users(),
                ch.antennas()
            )));
        }
        Ok(())
    }
}

/// `[Re h_1.., Im h_1.., Re h_E,1.., Im h_E,1..] * scale`.
fn flatten(ch: &ChannelSet<f64>, scale: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(4 * ch.num_users() * ch.antennas());
    for block in [&ch.users, &ch.eves] {
        for h in block {
            v.extend(h.iter().map(|c| c.re * scale));
        }
        for h in block {
            v.extend(h.iter().map(|c| c.im * scale));
        }
    }
    v
}

/// Embeddings `[B*K, 2N]` for a batch.
fn mlp_embeddings(tape: &mut Tape, p: &Bound, model: &MlpModel, batch: &[ChannelSet<f64>]) -> Result<Var> {
    for ch in batch {
        model.check(ch)?;
    }
    let a = &model.arch;
    let rows: Vec<f64> = batch.iter().flat_map(|c| flatten(c, a.feature_scale)).collect();
    let x = tape.constant(Tensor::matrix(batch.len(), 4 * a.users * a.antennas, rows)?);
    let y = model.net.forward(tape, p, x)?;
    tape.reshape(y, &[batch.len() * a.users, 2 * a.antennas])
}

pub fn mlp_forward(ch: &ChannelSet<f64>, model: &MlpModel, power_budget: f64) -> Result<Beamformer<f64>> {
    let mut tape = Tape::new();
    let p = model.params.bind_frozen(&mut tape);
    let e = mlp_embeddings(&mut tape, &p, model, std::slice::from_ref(ch))?;
    let w = normalize_power_real(&mut tape, e, power_budget)?;
    Ok(Beamformer::from_real_rows(tape.value(w).data(), ch.num_users(), ch.antennas()))
}

/// Train an MLP with the same unsupervised loss and schedule as the GNN.
pub fn train_mlp<R: Rng + ?Sized>(train: &BeamTrainConfig, scenario: &ScenarioConfig, rng: &mut R) -> Result<(MlpModel, Vec<f64>)> {
    train.validate()?;
    scenario.validate()?;
    let mut model = MlpModel::new(MlpArch::for_scenario(scenario), rng);
    let mut params = std::mem::take(&mut model.params);
    let (noise, power) = (scenario.noise_power, scenario.power_budget);
    let curve = fit(&mut params, train, scenario, rng, |tape, p, batch| {
        let e = mlp_embeddings(tape, p, &model, batch)?;
        embeddings_loss(tape, e, batch, noise, power)
    })?;
    model.params = params;
    Ok((model, curve))
}

/// Any beamforming scheme evaluated by the harness.
#[derive(Debug, Clone, Copy)]
pub enum Scheme<'a> {
    Gnn(&'a GnnModel),
    Mlp(&'a MlpModel),
    Mrt,
}

impl Scheme<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Gnn(_) => "gnn",
            Scheme::Mlp(_) => "mlp",
            Scheme::Mrt => "mrt",
        }
    }

    pub fn beamform(&self, ch: &ChannelSet<f64>, power_budget: f64) -> Result<Beamformer<f64>> {
        match self {
            Scheme::Gnn(m) => crate::gnn::gnn_forward(ch, m, power_budget),
            Scheme::Mlp(m) => mlp_forward(ch, m, power_budget),
            Scheme::Mrt => mrt_beamformer(ch, power_budget),
        }
    }
}

/// The four user-based placements, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    AreaCenter,
    GeometricCenter,
    Circumcenter,
    PolygonCentroid,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] =
        [Heuristic::AreaCenter, Heuristic::GeometricCenter, Heuristic::Circumcenter, Heuristic::PolygonCentroid];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::AreaCenter => "area_center",
            Heuristic::GeometricCenter => "geometric_center",
            Heuristic::Circumcenter => "circumcenter",
            Heuristic::PolygonCentroid => "polygon_centroid",
        }
    }
}

/// Heuristic UAV positions from user locations only.
pub fn heuristic_positions<T: Scalar>(topo: &Topology<T>) -> [(Heuristic, Point<T>); 4] {
    assert!(!topo.users.is_empty(), "heuristics need at least one user");
    [
        (Heuristic::AreaCenter, topo.center()),
        (Heuristic::GeometricCenter, mean(&topo.users)),
        (Heuristic::Circumcenter, min_enclosing_circle(&topo.users).center),
        (Heuristic::PolygonCentroid, polygon_centroid(&topo.users)),
    ]
}

/// Cell-center grid of `g x g` points over the area, row-major in `y` then
/// `x`; the area center is appended when it is not already a grid point.
pub fn deployment_grid(area_side: f64, g: usize) -> Vec<Point<f64>> {
    assert!(g > 0, "grid resolution must be positive");
    let pitch = area_side / g as f64;
    let mut pts: Vec<_> = (0..g)
        .flat_map(|j| (0..g).map(move |i| Point::new((i as f64 + 0.5) * pitch, (j as f64 + 0.5) * pitch)))
        .collect();
    let c = Point::new(area_side / 2.0, area_side / 2.0);
    if !pts.iter().any(|p| p.distance(c) < 1e-9 * area_side.max(1.0)) {
        pts.push(c);
    }
    pts
}

/// Nearest point of `grid` (lowest index on ties).
pub fn snap_to_grid(grid: &[Point<f64>], p: Point<f64>) -> Point<f64> {
    let mut best = grid[0];
    let mut best_d = f64::INFINITY;
    for &q in grid {
        let d = q.distance(p);
        if d < best_d {
            best = q;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: Point<f64>,
    pub best_reward: f64,
    /// Reward at every grid point, in [`deployment_grid`] order.
    pub rewards: Vec<f64>,
    pub grid: Vec<Point<f64>>,
}

/// Exhaustive search of the deployment reward over a `g x g` grid.
pub fn grid_search_deployment(
    topo: &Topology<f64>,
    cfg: &ScenarioConfig,
    gnn: &GnnModel,
    fading: &FadingSeeds,
    g: usize,
) -> Result<GridResult> {
    let grid = deployment_grid(topo.area_side, g);
    let rewards = grid
        .iter()
        .map(|&p| compute_reward(&topo.with_uav(p), cfg, gnn, fading))
        .collect::<Result<Vec<_>>>()?;
    let mut idx = 0;
    for (i, &r) in rewards.iter().enumerate() {
        if r > rewards[idx] {
            idx = i;
        }
    }
    Ok(GridResult { best: grid[idx], best_reward: rewards[idx], rewards, grid })
}
