//! Experiment runners. Each returns [`ResultTable`]s; writing files is left
//! to the caller.

use crate::config::RunConfig;
use crate::table::{Cell, ResultTable};
use anyhow::{Context, Result};
use std::time::Instant;
use uavsec::baselines::{
    grid_search_deployment, heuristic_positions, mlp_forward, mrt_beamformer, train_mlp, MlpArch, MlpModel, Scheme,
};
use uavsec::channel::sample_topology;
use uavsec::gnn::{gnn_forward, sample_training_channels, train_gnn, transfer_train, GnnModel};
use uavsec::rng::{derive_seed, stream};
use uavsec::sac::{compute_reward, rollout, smooth, train_sac, FadingSeeds, SacModel, SacRun};
use uavsec::secrecy::secrecy_report;
use uavsec::{ChannelSet, ScenarioConfig, Topology};

// Independent random streams of a run, keyed off the master seed.
const GNN_STREAM: u64 = 1;
const MLP_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;
const SAC_STREAM: u64 = 4;
const TRANSFER_STREAM: u64 = 5;
const BENCH_STREAM: u64 = 6;

fn sub_seed(master: u64, stream_id: u64, index: u64) -> u64 {
    derive_seed(derive_seed(master, stream_id), index)
}

pub fn with_users(s: &ScenarioConfig, users: usize) -> ScenarioConfig {
    ScenarioConfig { users, ..s.clone() }
}

/// Loss curve table: `epoch, loss, smoothed_loss`.
pub fn loss_table(curve: &[f64], window: usize) -> ResultTable {
    let sm = smooth(curve, window);
    let mut t = ResultTable::new(&["epoch", "loss", "smoothed_loss"]);
    for (i, (&l, &s)) in curve.iter().zip(&sm).enumerate() {
        t.push(vec![(i + 1).into(), l.into(), s.into()]).unwrap();
    }
    t
}

pub fn train_gnn_run(cfg: &RunConfig) -> Result<(GnnModel, Vec<f64>)> {
    let mut rng = stream(cfg.seed, GNN_STREAM);
    Ok(train_gnn(&cfg.gnn, &cfg.scenario, &mut rng)?)
}

/// MLP for `users` with the same schedule as the GNN.
pub fn train_mlp_run(cfg: &RunConfig, users: usize) -> Result<(MlpModel, Vec<f64>)> {
    let mut rng = stream(derive_seed(cfg.seed, MLP_STREAM), users as u64);
    Ok(train_mlp(&cfg.gnn, &with_users(&cfg.scenario, users), &mut rng)?)
}

/// `n` held-out scenarios for `scenario`; identical for equal `(seed, K, N)`.
pub fn held_out(cfg: &RunConfig, scenario: &ScenarioConfig, n: usize) -> Vec<ChannelSet> {
    let mut rng = stream(sub_seed(cfg.seed, EVAL_STREAM, scenario.users as u64), scenario.antennas as u64);
    (0..n).map(|_| sample_training_channels(scenario, &mut rng)).collect()
}

pub fn mean_sum_secrecy(scheme: Scheme, set: &[ChannelSet], power: f64, noise: f64) -> Result<f64> {
    let mut total = 0.0;
    for ch in set {
        total += secrecy_report(ch, &scheme.beamform(ch, power)?, noise).sum;
    }
    Ok(total / set.len() as f64)
}

/// Frozen layouts for deployment experiments, from `scenario.seed`.
pub fn layouts(cfg: &RunConfig) -> Vec<Topology> {
    (0..cfg.experiment.topologies as u64)
        .map(|t| sample_topology::<f64, _>(&cfg.scenario, &mut stream(cfg.scenario.seed, t)))
        .collect()
}

/// Frozen fading draws used to score deployment positions.
pub fn eval_fading(cfg: &RunConfig) -> FadingSeeds {
    let base = derive_seed(cfg.scenario.seed, u64::MAX);
    FadingSeeds((0..cfg.experiment.eval_fading_draws as u64).map(|i| derive_seed(base, i)).collect())
}

pub struct SacOutcome {
    pub run: SacRun,
    pub curve: ResultTable,
    pub trace: ResultTable,
    pub final_position: (f64, f64),
    pub final_reward: f64,
}

/// Train SAC on `layout` with training seed index `seed_index`, then roll the
/// deterministic policy out under the frozen evaluation fading.
pub fn train_sac_run(cfg: &RunConfig, gnn: &GnnModel, layout: &Topology, seed_index: u64) -> Result<SacOutcome> {
    let mut rng = stream(derive_seed(cfg.seed, SAC_STREAM), seed_index);
    let run = train_sac(&cfg.sac, &cfg.scenario, gnn, Some(layout), &mut rng)?;
    let mut curve = ResultTable::new(&["episode", "cumulative_reward", "final_secrecy_rate"]);
    for e in &run.episodes {
        curve.push(vec![(e.episode + 1).into(), e.cumulative_reward.into(), e.final_secrecy_rate.into()])?;
    }
    let (trace, last) = sac_trace(cfg, gnn, &run.model, layout)?;
    Ok(SacOutcome { run, curve, trace, final_position: (last.0, last.1), final_reward: last.2 })
}

/// Trace table `step, x, y, reward` plus the final `(x, y, reward)`.
pub fn sac_trace(cfg: &RunConfig, gnn: &GnnModel, model: &SacModel, layout: &Topology) -> Result<(ResultTable, (f64, f64, f64))> {
    let points = rollout(
        model,
        layout,
        &cfg.scenario,
        gnn,
        &eval_fading(cfg),
        cfg.sac.step_scale,
        cfg.sac.steps_per_episode,
    )?;
    let mut trace = ResultTable::new(&["step", "x", "y", "reward"]);
    for p in &points {
        trace.push(vec![p.step.into(), p.x.into(), p.y.into(), p.reward.into()])?;
    }
    let last = points.last().expect("rollout has a start point");
    Ok((trace, (last.x, last.y, last.reward)))
}

/// Mean sum secrecy rate per scheme on the held-out set: `scheme, mean_secrecy_rate`.
pub fn run_eval(cfg: &RunConfig, gnn: &GnnModel, mlp: Option<&MlpModel>) -> Result<ResultTable> {
    let s = &cfg.scenario;
    let set = held_out(cfg, s, cfg.experiment.eval_scenarios);
    let mut t = ResultTable::new(&["scheme", "users", "mean_secrecy_rate"]);
    let mut schemes = vec![Scheme::Gnn(gnn)];
    schemes.extend(mlp.map(Scheme::Mlp));
    schemes.push(Scheme::Mrt);
    for sch in schemes {
        let m = mean_sum_secrecy(sch, &set, s.power_budget, s.noise_power)?;
        t.push(vec![sch.name().into(), s.users.into(), m.into()])?;
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Users,
    Power,
    Noise,
}

impl SweepKind {
    pub fn file_name(self) -> &'static str {
        match self {
            SweepKind::Users => "sweep_users.csv",
            SweepKind::Power => "sweep_power.csv",
            SweepKind::Noise => "sweep_noise.csv",
        }
    }
}

/// One row per `(scheme, value)`: `scheme, value, mean_secrecy_rate, status`.
/// For the user sweep `value` is K; otherwise it is the absolute power or noise.
pub fn run_sweep(kind: SweepKind, cfg: &RunConfig, gnn: &GnnModel, mlp: &MlpModel) -> Result<ResultTable> {
    let e = &cfg.experiment;
    let base = &cfg.scenario;
    let mut t = ResultTable::new(&["scheme", "value", "mean_secrecy_rate", "status"]);
    let points: Vec<(f64, ScenarioConfig)> = match kind {
        SweepKind::Users => e.user_counts.iter().map(|&k| (k as f64, with_users(base, k))).collect(),
        SweepKind::Power => e
            .power_multipliers
            .iter()
            .map(|m| (base.power_budget * m, ScenarioConfig { power_budget: base.power_budget * m, ..base.clone() }))
            .collect(),
        SweepKind::Noise => e
            .noise_multipliers
            .iter()
            .map(|m| (base.noise_power * m, ScenarioConfig { noise_power: base.noise_power * m, ..base.clone() }))
            .collect(),
    };
    for (value, s) in points {
        let set = held_out(cfg, &s, e.eval_scenarios);
        let (p, n) = (s.power_budget, s.noise_power);
        let g = mean_sum_secrecy(Scheme::Gnn(gnn), &set, p, n)?;
        t.push(vec!["gnn".into(), value.into(), g.into(), "ok".into()])?;
        if s.users == mlp.arch.users {
            let m = mean_sum_secrecy(Scheme::Mlp(mlp), &set, p, n)?;
            t.push(vec!["mlp".into(), value.into(), m.into(), "ok".into()])?;
        } else if e.retrain_mlp {
            let (own, _) = train_mlp_run(cfg, s.users)?;
            let m = mean_sum_secrecy(Scheme::Mlp(&own), &set, p, n)?;
            t.push(vec!["mlp".into(), value.into(), m.into(), "retrained".into()])?;
        } else {
            t.push(vec!["mlp".into(), value.into(), f64::NAN.into(), "retrain_required".into()])?;
        }
        let r = mean_sum_secrecy(Scheme::Mrt, &set, p, n)?;
        t.push(vec!["mrt".into(), value.into(), r.into(), "ok".into()])?;
    }
    Ok(t)
}

/// Per-user secrecy rates with empirical CDF values:
/// `scheme, users, rank, secrecy_rate, cdf`.
pub fn run_cdf(cfg: &RunConfig, gnn: &GnnModel, mlp: &MlpModel) -> Result<ResultTable> {
    let e = &cfg.experiment;
    let mut t = ResultTable::new(&["scheme", "users", "rank", "secrecy_rate", "cdf"]);
    for &k in &e.cdf_user_counts {
        let s = with_users(&cfg.scenario, k);
        let set = held_out(cfg, &s, e.eval_scenarios);
        let retrained;
        let mlp_k = if k == mlp.arch.users {
            Some(mlp)
        } else if e.retrain_mlp {
            retrained = train_mlp_run(cfg, k)?.0;
            Some(&retrained)
        } else {
            None
        };
        let mut schemes = vec![Scheme::Gnn(gnn)];
        schemes.extend(mlp_k.map(Scheme::Mlp));
        schemes.push(Scheme::Mrt);
        for sch in schemes {
            let mut samples = Vec::with_capacity(set.len() * k);
            for ch in &set {
                samples.extend(secrecy_report(ch, &sch.beamform(ch, s.power_budget)?, s.noise_power).secrecy);
            }
            samples.sort_by(f64::total_cmp);
            let n = samples.len();
            for (i, v) in samples.into_iter().enumerate() {
                t.push(vec![sch.name().into(), k.into(), (i + 1).into(), v.into(), ((i + 1) as f64 / n as f64).into()])?;
            }
        }
    }
    Ok(t)
}

/// Six strategy rows per layout: `topology, strategy, x, y, secrecy_rate`.
/// `sac_final[t]` is the SAC end position for layout `t`.
pub fn run_deploy_compare(cfg: &RunConfig, gnn: &GnnModel, layouts: &[Topology], sac_final: &[(f64, f64)]) -> Result<ResultTable> {
    let fading = eval_fading(cfg);
    let s = &cfg.scenario;
    let mut t = ResultTable::new(&["topology", "strategy", "x", "y", "secrecy_rate"]);
    for (i, (layout, &(sx, sy))) in layouts.iter().zip(sac_final).enumerate() {
        let mut row = |name: &str, x: f64, y: f64| -> Result<()> {
            let r = compute_reward(&layout.with_uav(uavsec::geometry::Point::new(x, y)), s, gnn, &fading)?;
            t.push(vec![i.into(), name.into(), x.into(), y.into(), r.into()])
        };
        row("sac", sx, sy)?;
        let grid = grid_search_deployment(layout, s, gnn, &fading, cfg.experiment.grid)?;
        row("grid_oracle", grid.best.x, grid.best.y)?;
        for (h, p) in heuristic_positions(layout) {
            row(h.name(), p.x, p.y)?;
        }
    }
    Ok(t)
}

/// Wall-clock inference cost: `scheme, users, repeats, total_seconds, per_run_seconds`.
/// The grid oracle row times complete deployment searches.
pub fn bench_inference(cfg: &RunConfig, gnn: &GnnModel) -> Result<ResultTable> {
    let e = &cfg.experiment;
    let grid_repeats = e.bench_grid_repeats;
    let mut t = ResultTable::new(&["scheme", "users", "repeats", "total_seconds", "per_run_seconds"]);
    let mut record = |name: &str, k: usize, reps: usize, secs: f64| {
        t.push(vec![name.into(), k.into(), reps.into(), secs.into(), (secs / reps as f64).into()])
    };
    for &k in &e.bench_user_counts {
        let s = with_users(&cfg.scenario, k);
        let mut rng = stream(derive_seed(cfg.seed, BENCH_STREAM), k as u64);
        let set: Vec<_> = (0..e.bench_repeats).map(|_| sample_training_channels(&s, &mut rng)).collect();
        // Timing does not depend on the weights, so an untrained MLP of the right shape suffices.
        let mlp = MlpModel::new(MlpArch::for_scenario(&s), &mut rng);
        let start = Instant::now();
        for ch in &set {
            std::hint::black_box(gnn_forward(ch, gnn, s.power_budget)?);
        }
        record("gnn", k, set.len(), start.elapsed().as_secs_f64())?;
        let start = Instant::now();
        for ch in &set {
            std::hint::black_box(mlp_forward(ch, &mlp, s.power_budget)?);
        }
        record("mlp", k, set.len(), start.elapsed().as_secs_f64())?;
        let start = Instant::now();
        for ch in &set {
            std::hint::black_box(mrt_beamformer(ch, s.power_budget)?);
        }
        record("mrt", k, set.len(), start.elapsed().as_secs_f64())?;
        let layout = sample_topology::<f64, _>(&s, &mut rng);
        let fading = FadingSeeds(vec![derive_seed(cfg.seed, k as u64)]);
        let start = Instant::now();
        for _ in 0..grid_repeats {
            std::hint::black_box(grid_search_deployment(&layout, &s, gnn, &fading, e.grid)?);
        }
        record("grid_oracle", k, grid_repeats, start.elapsed().as_secs_f64())?;
    }
    Ok(t)
}

pub struct TransferOutcome {
    /// `seed, epoch, scratch_loss, transfer_loss, scratch_smoothed, transfer_smoothed`.
    pub curves: ResultTable,
    /// `seed, target_loss, epochs_to_target, epochs, fraction`.
    pub summary: ResultTable,
    pub mean_fraction: f64,
}

/// Fine-tune the pretrained GNN at `experiment.transfer_users` and compare
/// with training from scratch under the same schedule.
pub fn run_transfer(cfg: &RunConfig, pretrained: &GnnModel) -> Result<TransferOutcome> {
    let e = &cfg.experiment;
    let s = with_users(&cfg.scenario, e.transfer_users);
    let w = e.loss_window;
    let mut curves = ResultTable::new(&[
        "seed",
        "epoch",
        "scratch_loss",
        "transfer_loss",
        "scratch_smoothed",
        "transfer_smoothed",
    ]);
    let mut summary = ResultTable::new(&["seed", "target_loss", "epochs_to_target", "epochs", "fraction"]);
    let mut fractions = Vec::new();
    for seed in 0..e.transfer_seeds as u64 {
        let base = sub_seed(cfg.seed, TRANSFER_STREAM, seed);
        let (_, scratch) = train_gnn(&cfg.gnn, &s, &mut stream(base, 0)).context("scratch run")?;
        let (_, tuned) = transfer_train(pretrained, &cfg.gnn, &s, &mut stream(base, 1)).context("fine-tuning run")?;
        let (ss, ts) = (smooth(&scratch, w), smooth(&tuned, w));
        let target = *ss.last().expect("non-empty curve");
        // Only full windows count, so a lucky first batch cannot qualify.
        let hit = (w.min(ts.len()) - 1..ts.len()).find(|&i| ts[i] <= target).map_or(ts.len(), |i| i + 1);
        let frac = hit as f64 / ts.len() as f64;
        fractions.push(frac);
        for i in 0..scratch.len() {
            curves.push(vec![
                Cell::Int(seed as i64),
                (i + 1).into(),
                scratch[i].into(),
                tuned[i].into(),
                ss[i].into(),
                ts[i].into(),
            ])?;
        }
        summary.push(vec![Cell::Int(seed as i64), target.into(), hit.into(), ts.len().into(), frac.into()])?;
    }
    let mean_fraction = fractions.iter().sum::<f64>() / fractions.len().max(1) as f64;
    Ok(TransferOutcome { curves, summary, mean_fraction })
}
