use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use uavsec::gnn::BeamTrainConfig;
use uavsec::sac::SacConfig;
use uavsec::ScenarioConfig;

/// Everything a run depends on besides the command line.
///
/// Unknown keys anywhere in the file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every random stream of a run derives from it.
    pub seed: u64,
    pub out_dir: String,
    /// Physical scenario. `scenario.seed` selects the frozen layouts used by
    /// deployment experiments.
    pub scenario: ScenarioConfig,
    pub gnn: BeamTrainConfig,
    pub sac: SacConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Held-out scenarios per evaluation point.
    pub eval_scenarios: usize,
    pub user_counts: Vec<usize>,
    /// Multipliers applied to `scenario.power_budget`.
    pub power_multipliers: Vec<f64>,
    /// Multipliers applied to `scenario.noise_power`.
    pub noise_multipliers: Vec<f64>,
    /// Train a fresh MLP for every user count it was not built for; otherwise
    /// such points are reported as `retrain_required`.
    pub retrain_mlp: bool,
    pub cdf_user_counts: Vec<usize>,
    /// Deployment grid resolution per side.
    pub grid: usize,
    /// Frozen fading draws used to score deployment positions.
    pub eval_fading_draws: usize,
    /// Number of frozen layouts in deploy-compare.
    pub topologies: usize,
    pub bench_user_counts: Vec<usize>,
    pub bench_repeats: usize,
    /// Full grid searches timed per user count.
    pub bench_grid_repeats: usize,
    pub transfer_users: usize,
    pub transfer_seeds: usize,
    /// Moving-average window for loss curves.
    pub loss_window: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eval_scenarios: 200,
            user_counts: vec![4, 6, 8, 10, 12],
            power_multipliers: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            noise_multipliers: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            retrain_mlp: true,
            cdf_user_counts: vec![8, 12],
            grid: 25,
            eval_fading_draws: 32,
            topologies: 3,
            bench_user_counts: vec![8, 12],
            bench_repeats: 400,
            bench_grid_repeats: 4,
            transfer_users: 12,
            transfer_seeds: 3,
            loss_window: 10,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Desk-scale schedule: GNN/MLP 100 updates of 128 scenarios, SAC 200 episodes.
    pub fn desk() -> Self {
        Self {
            seed: 0,
            out_dir: "out".into(),
            scenario: ScenarioConfig::default(),
            gnn: BeamTrainConfig { epochs: 100, batch_size: 128, ..BeamTrainConfig::default() },
            sac: SacConfig { episodes: 200, ..SacConfig::default() },
            experiment: ExperimentConfig::default(),
        }
    }

    /// Full reference schedule (300 x 512 beamformer updates, 500 SAC episodes).
    pub fn full() -> Self {
        Self { gnn: BeamTrainConfig::default(), sac: SacConfig::default(), ..Self::desk() }
    }

    /// `default`/`desk` and `full` name built-in presets; anything else is a TOML file.
    pub fn load(name: &str) -> Result<Self> {
        let cfg = match name {
            "default" | "desk" => Self::desk(),
            "full" => Self::full(),
            path => {
                let text = std::fs::read_to_string(Path::new(path)).with_context(|| format!("reading config {path}"))?;
                Self::parse(&text).with_context(|| format!("invalid config {path}"))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().context("scenario")?;
        self.gnn.validate().context("gnn")?;
        self.sac.validate().context("sac")?;
        let e = &self.experiment;
        if e.eval_scenarios == 0 || e.grid == 0 || e.eval_fading_draws == 0 || e.bench_repeats == 0 || e.bench_grid_repeats == 0 || e.loss_window == 0 {
            bail!("experiment: eval_scenarios, grid, eval_fading_draws, bench repeats and loss_window must be positive");
        }
        if e.user_counts.contains(&0) || e.cdf_user_counts.contains(&0) || e.bench_user_counts.contains(&0) || e.transfer_users == 0 {
            bail!("experiment: user counts must be positive");
        }
        if e.power_multipliers.iter().chain(&e.noise_multipliers).any(|m| !(*m > 0.0)) {
            bail!("experiment: sweep multipliers must be positive");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
