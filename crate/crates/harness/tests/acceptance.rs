//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Artifacts land in `$CARGO_TARGET_TMPDIR/acceptance`.
//!
//! Run alone with `cargo test -p uavsec-harness --test acceptance`.

use anyhow::{ensure, Context, Result};
use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;
use uavsec::autodiff::{gradient_check, RandomGraph, Tape, Tensor};
use uavsec::baselines::{mlp_forward, mrt_beamformer, MlpModel};
use uavsec::gnn::{gnn_forward, sample_training_channels, GnnModel};
use uavsec::rng::seeded;
use uavsec::sac::smooth;
use uavsec::secrecy::{gamma_recast, normalize_power, secrecy_loss_real, secrecy_report, RealChannels};
use uavsec_harness::config::RunConfig;
use uavsec_harness::experiments::{self as ex, SweepKind};
use uavsec_harness::table::ResultTable;

// Pinned tolerances and thresholds.
const GRAD_STEP: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-5;
const RECAST_TOL: f64 = 1e-10;
const LOSS_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-9;
const EQUIV_TOL: f64 = 1e-9;
const MLP_BREAK: f64 = 1e-3;
const MLP_BREAK_SHARE: f64 = 0.95;
const MRT_MARGIN: f64 = 1.1;
const TRANSFER_SHARE: f64 = 0.5;
const ORACLE_SHARE: f64 = 0.9;
const SAC_SEEDS: u64 = 3;
const REWARD_WINDOW: usize = 50;
const GNN_SCALING: f64 = 3.0;
const ORACLE_COST: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, n: usize, name: &str, f: impl FnOnce() -> Result<Outcome>) {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {n:>2} {name}: {} ({detail}; {:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
}

struct Models {
    gnn: GnnModel,
    gnn_curve: Vec<f64>,
    mlp: MlpModel,
}

fn out_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("output directory");
    dir
}

fn random_complex(rng: &mut impl Rng, n: usize) -> Vec<Complex<f64>> {
    (0..n).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn autodiff() -> Result<Outcome> {
    let mut rng = seeded(11);
    let mut worst: f64 = 0.0;
    for g in 0..100 {
        let graph = RandomGraph::sample(&mut rng, 4 + g % 12);
        let inputs = graph.inputs(&mut rng);
        worst = worst.max(gradient_check(&inputs, GRAD_STEP, |t, v| graph.build(t, v))?);
    }
    outcome(worst <= GRAD_TOL, format!("worst relative error {worst:.2e}"))
}

fn recast() -> Result<Outcome> {
    let mut rng = seeded(12);
    let mut worst_gamma: f64 = 0.0;
    for _ in 0..1000 {
        let h = random_complex(&mut rng, 8);
        let w = random_complex(&mut rng, 8);
        // Direct h^H w.
        let direct: Complex<f64> = h.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let g = gamma_recast(&h, &w)?;
        worst_gamma = worst_gamma.max((g[0] * g[0] + g[1] * g[1] - direct.norm_sqr()).abs());
    }
    let cfg = uavsec::ScenarioConfig::default();
    let mut worst_loss: f64 = 0.0;
    for _ in 0..100 {
        let ch = sample_training_channels(&cfg, &mut rng);
        let (k, n) = (ch.num_users(), ch.antennas());
        let rows: Vec<f64> = (0..k * 2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::matrix(k, 2 * n, rows.clone())?);
        let loss = secrecy_loss_real(&mut tape, e, &RealChannels::new(&ch), cfg.noise_power, cfg.power_budget)?;
        let emb: Vec<Vec<Complex<f64>>> =
            rows.chunks(2 * n).map(|r| (0..n).map(|i| Complex::new(r[i], r[n + i])).collect()).collect();
        let w = normalize_power(&emb, cfg.power_budget)?;
        let reference = secrecy_report(&ch, &w, cfg.noise_power).sum;
        worst_loss = worst_loss.max((tape.value(loss).item() + reference).abs());
    }
    outcome(
        worst_gamma <= RECAST_TOL && worst_loss <= LOSS_TOL,
        format!("recast error {worst_gamma:.2e}, loss error {worst_loss:.2e}"),
    )
}

fn power(m: &Models) -> Result<Outcome> {
    let cfg = uavsec::ScenarioConfig::default();
    let p = cfg.power_budget;
    let mut rng = seeded(13);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ch = sample_training_channels(&cfg, &mut rng);
        for w in [gnn_forward(&ch, &m.gnn, p)?, mlp_forward(&ch, &m.mlp, p)?, mrt_beamformer(&ch, p)?] {
            let total: f64 = w.vectors.iter().flatten().map(|c| c.re * c.re + c.im * c.im).sum();
            worst = worst.max((total - p).abs());
        }
    }
    outcome(worst <= POWER_TOL, format!("worst power deviation {worst:.2e}"))
}

fn equivariance(m: &Models) -> Result<Outcome> {
    let cfg = uavsec::ScenarioConfig::default();
    let (p, noise) = (cfg.power_budget, cfg.noise_power);
    let mut rng = seeded(14);
    let (mut worst_w, mut worst_rate) = (0.0f64, 0.0f64);
    let mut mlp_broken = 0;
    for _ in 0..100 {
        let ch = sample_training_channels(&cfg, &mut rng);
        let mut perm: Vec<usize> = (0..cfg.users).collect();
        perm.shuffle(&mut rng);
        let pc = ch.permuted(&perm);
        // Deviation of f(P x) from P f(x), per entry and in sum rate.
        let probe = |a: &uavsec::Beamformer64, b: &uavsec::Beamformer64| {
            let dw = perm
                .iter()
                .enumerate()
                .flat_map(|(i, &j)| a.vectors[j].iter().zip(&b.vectors[i]).map(|(x, y)| (x - y).norm()))
                .fold(0.0, f64::max);
            let dr = (secrecy_report(&ch, a, noise).sum - secrecy_report(&pc, b, noise).sum).abs();
            (dw, dr)
        };
        let (dw, dr) = probe(&gnn_forward(&ch, &m.gnn, p)?, &gnn_forward(&pc, &m.gnn, p)?);
        worst_w = worst_w.max(dw);
        worst_rate = worst_rate.max(dr);
        let (mw, mr) = probe(&mlp_forward(&ch, &m.mlp, p)?, &mlp_forward(&pc, &m.mlp, p)?);
        if mw.max(mr) > MLP_BREAK {
            mlp_broken += 1;
        }
    }
    let share = mlp_broken as f64 / 100.0;
    outcome(
        worst_w <= EQUIV_TOL && worst_rate <= EQUIV_TOL && share >= MLP_BREAK_SHARE,
        format!("GNN beamformer {worst_w:.2e}, rate {worst_rate:.2e}; MLP broken on {:.0}% of probes", share * 100.0),
    )
}

fn gnn_training(cfg: &RunConfig, m: &Models, dir: &Path) -> Result<Outcome> {
    let w = cfg.experiment.loss_window;
    ex::loss_table(&m.gnn_curve, w).write(dir.join("loss_curve.csv"))?;
    let sm = smooth(&m.gnn_curve, w);
    let (first, last) = (sm[w - 1], *sm.last().context("empty loss curve")?);
    let eval = ex::run_eval(cfg, &m.gnn, Some(&m.mlp))?;
    eval.write(dir.join("eval.csv"))?;
    let rate = |s: &str| eval.filter("scheme", s).next().and_then(|r| r[2].as_f64()).unwrap_or(f64::NAN);
    let (g, ml, mrt) = (rate("gnn"), rate("mlp"), rate("mrt"));
    outcome(
        last < first && g >= ml && g >= MRT_MARGIN * mrt,
        format!("smoothed loss {first:.3} -> {last:.3}; secrecy GNN {g:.3}, MLP {ml:.3}, MRT {mrt:.3}"),
    )
}

fn generalization(cfg: &RunConfig, m: &Models) -> Result<Outcome> {
    let s = ex::with_users(&cfg.scenario, 12);
    let set = ex::held_out(cfg, &s, cfg.experiment.eval_scenarios);
    let g = ex::mean_sum_secrecy(uavsec::baselines::Scheme::Gnn(&m.gnn), &set, s.power_budget, s.noise_power)?;
    let r = ex::mean_sum_secrecy(uavsec::baselines::Scheme::Mrt, &set, s.power_budget, s.noise_power)?;
    outcome(g >= r, format!("K=12 secrecy GNN {g:.3}, MRT {r:.3}"))
}

fn transfer(cfg: &RunConfig, m: &Models, dir: &Path) -> Result<Outcome> {
    let o = ex::run_transfer(cfg, &m.gnn)?;
    o.curves.write(dir.join("transfer_curve.csv"))?;
    o.summary.write(dir.join("transfer_summary.csv"))?;
    let per: Vec<String> = o.summary.rows.iter().map(|r| format!("{:.2}", r[4].as_f64().unwrap_or(f64::NAN))).collect();
    outcome(
        o.mean_fraction <= TRANSFER_SHARE,
        format!("mean fraction of scratch epochs {:.3} (per seed {})", o.mean_fraction, per.join(", ")),
    )
}

struct SacResults {
    /// `[topology][seed]` final positions.
    finals: Vec<Vec<(f64, f64)>>,
    /// `[topology][seed]` cumulative episode rewards.
    curves: Vec<Vec<Vec<f64>>>,
}

fn train_agents(cfg: &RunConfig, m: &Models, dir: &Path) -> Result<SacResults> {
    let layouts = ex::layouts(cfg);
    let mut res = SacResults { finals: Vec::new(), curves: Vec::new() };
    for (t, layout) in layouts.iter().enumerate() {
        let (mut finals, mut curves) = (Vec::new(), Vec::new());
        for s in 0..SAC_SEEDS {
            let o = ex::train_sac_run(cfg, &m.gnn, layout, s)?;
            o.curve.write(dir.join(format!("sac_curve_t{t}_s{s}.csv")))?;
            o.trace.write(dir.join(format!("trace_t{t}_s{s}.csv")))?;
            finals.push(o.final_position);
            curves.push(o.run.cumulative_rewards());
        }
        res.finals.push(finals);
        res.curves.push(curves);
    }
    Ok(res)
}

fn deployment(cfg: &RunConfig, m: &Models, sac: &SacResults, dir: &Path) -> Result<Outcome> {
    let layouts = ex::layouts(cfg);
    let mut pass = true;
    let mut notes = Vec::new();
    for s in 0..SAC_SEEDS as usize {
        let finals: Vec<(f64, f64)> = sac.finals.iter().map(|f| f[s]).collect();
        ex::run_deploy_compare(cfg, &m.gnn, &layouts, &finals)?.write(dir.join(format!("deploy_compare_s{s}.csv")))?;
    }
    for t in 0..layouts.len() {
        let mut sac_mean = 0.0;
        let mut others = Vec::new();
        for s in 0..SAC_SEEDS as usize {
            let table = ResultTable::parse(&std::fs::read_to_string(dir.join(format!("deploy_compare_s{s}.csv")))?)?;
            let rows: Vec<_> = table.rows.iter().filter(|r| r[0].as_f64() == Some(t as f64)).collect();
            ensure!(rows.len() == 6, "topology {t} has {} strategy rows", rows.len());
            sac_mean += rows[0][4].as_f64().context("sac rate")? / SAC_SEEDS as f64;
            others = rows[1..].iter().map(|r| (r[1].as_str().unwrap_or("?").to_string(), r[4].as_f64().unwrap_or(f64::NAN))).collect();
        }
        let oracle = others[0].1;
        let best_heuristic = others[1..].iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
        let ok = sac_mean >= ORACLE_SHARE * oracle && sac_mean >= best_heuristic;
        pass &= ok;
        notes.push(format!(
            "topology {t}: SAC {sac_mean:.3} = {:.3} of oracle {oracle:.3}, best heuristic {best_heuristic:.3}",
            sac_mean / oracle
        ));
    }
    outcome(pass, notes.join("; "))
}

fn learning_curves(sac: &SacResults) -> Result<Outcome> {
    let mut pass = true;
    let mut notes = Vec::new();
    for (t, runs) in sac.curves.iter().enumerate() {
        for (s, cum) in runs.iter().enumerate() {
            ensure!(cum.len() >= 2 * REWARD_WINDOW, "run too short for the smoothing window");
            let sm = smooth(cum, REWARD_WINDOW);
            let (head, tail) = (sm[REWARD_WINDOW - 1], *sm.last().unwrap());
            pass &= tail > head;
            notes.push(format!("t{t}s{s} {head:.1}->{tail:.1}"));
        }
    }
    outcome(pass, notes.join(", "))
}

fn monotone_sweeps(cfg: &RunConfig, m: &Models, dir: &Path) -> Result<Outcome> {
    let mut pass = true;
    let mut notes = Vec::new();
    for (kind, increasing) in [(SweepKind::Power, true), (SweepKind::Noise, false)] {
        let path = dir.join(kind.file_name());
        ex::run_sweep(kind, cfg, &m.gnn, &m.mlp)?.write(&path)?;
        let table = ResultTable::parse(&std::fs::read_to_string(&path)?)?;
        for scheme in ["gnn", "mlp", "mrt"] {
            let mut pts: Vec<(f64, f64)> =
                table.filter("scheme", scheme).map(|r| (r[1].as_f64().unwrap(), r[2].as_f64().unwrap())).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let ok = pts.windows(2).all(|w| if increasing { w[1].1 >= w[0].1 } else { w[1].1 <= w[0].1 });
            if !ok {
                pass = false;
                notes.push(format!("{} not monotone for {scheme}: {pts:?}", kind.file_name()));
            }
        }
    }
    if pass {
        notes.push("power and noise sweeps monotone for gnn, mlp, mrt".into());
    }
    outcome(pass, notes.join("; "))
}

fn timing(cfg: &RunConfig, m: &Models, dir: &Path) -> Result<Outcome> {
    let mut c = cfg.clone();
    c.experiment.bench_user_counts = vec![8, 12];
    let t = ex::bench_inference(&c, &m.gnn)?;
    t.write(dir.join("bench.csv"))?;
    let per = |scheme: &str, k: f64| {
        t.filter("scheme", scheme).find(|r| r[1].as_f64() == Some(k)).and_then(|r| r[4].as_f64()).unwrap_or(f64::NAN)
    };
    let (g8, g12, grid8) = (per("gnn", 8.0), per("gnn", 12.0), per("grid_oracle", 8.0));
    outcome(
        g12 <= GNN_SCALING * g8 && grid8 >= ORACLE_COST * g8,
        format!(
            "GNN {:.3} ms (K=8) vs {:.3} ms (K=12), ratio {:.2}; grid oracle {:.0}x GNN",
            g8 * 1e3,
            g12 * 1e3,
            g12 / g8,
            grid8 / g8
        ),
    )
}

fn cli(args: &[&str]) -> Result<()> {
    let out = Command::new(env!("CARGO_BIN_EXE_uavsec")).args(args).output()?;
    ensure!(out.status.success(), "uavsec {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn determinism(dir: &Path) -> Result<Outcome> {
    let root = dir.join("determinism");
    // A short SAC schedule keeps the repeat cheap; determinism does not depend on length.
    let sac_cfg = root.join("sac.toml");
    std::fs::create_dir_all(&root)?;
    std::fs::write(&sac_cfg, "[sac]\nepisodes = 6\nwarmup = 100\nhidden = [32, 32]\n")?;
    let mut same = true;
    let mut notes = Vec::new();
    let mut files: Vec<Vec<u8>> = Vec::new();
    for run in ["a", "b"] {
        let d = root.join(run);
        let d_str = d.to_str().context("utf-8 path")?;
        cli(&["train-gnn", "--config", "default", "--seed", "7", "--out", d_str])?;
        let ckpt = d.join("gnn.json");
        cli(&[
            "train-sac",
            "--config",
            sac_cfg.to_str().context("utf-8 path")?,
            "--seed",
            "7",
            "--out",
            d_str,
            "--checkpoint",
            ckpt.to_str().context("utf-8 path")?,
        ])?;
        files.push(std::fs::read(d.join("loss_curve.csv"))?);
        files.push(std::fs::read(d.join("trace.csv"))?);
    }
    for (i, name) in ["loss_curve.csv", "trace.csv"].iter().enumerate() {
        let eq = files[i] == files[i + 2];
        same &= eq;
        notes.push(format!("{name} {}", if eq { "identical" } else { "differs" }));
    }
    outcome(same, notes.join(", "))
}

fn main() {
    let dir = out_dir();
    let cfg = RunConfig::desk();
    let mut suite = Suite { failures: 0 };
    println!("acceptance artifacts: {}", dir.display());

    let start = Instant::now();
    let models = (|| -> Result<Models> {
        let (gnn, gnn_curve) = ex::train_gnn_run(&cfg)?;
        let (mlp, _) = ex::train_mlp_run(&cfg, cfg.scenario.users)?;
        Ok(Models { gnn, gnn_curve, mlp })
    })();
    println!("trained shared GNN and MLP in {:.1}s", start.elapsed().as_secs_f64());
    let models = match models {
        Ok(m) => m,
        Err(e) => {
            println!("model training failed: {e:#}");
            std::process::exit(1);
        }
    };

    suite.run(1, "autodiff matches central differences", autodiff);
    suite.run(2, "recast equivalence", recast);
    suite.run(3, "power constraint", || power(&models));
    suite.run(4, "permutation equivariance", || equivariance(&models));
    suite.run(5, "GNN training", || gnn_training(&cfg, &models, &dir));
    suite.run(6, "generalization to K=12", || generalization(&cfg, &models));
    suite.run(7, "transfer", || transfer(&cfg, &models, &dir));

    let start = Instant::now();
    let sac = train_agents(&cfg, &models, &dir);
    println!("trained {} SAC agents in {:.1}s", 3 * SAC_SEEDS, start.elapsed().as_secs_f64());
    match &sac {
        Ok(s) => {
            suite.run(8, "SAC deployment", || deployment(&cfg, &models, s, &dir));
            suite.run(9, "SAC learning curve", || learning_curves(s));
        }
        Err(e) => {
            let msg = format!("{e:#}");
            suite.run(8, "SAC deployment", || Err(anyhow::anyhow!(msg.clone())));
            suite.run(9, "SAC learning curve", || Err(anyhow::anyhow!(msg)));
        }
    }

    suite.run(10, "monotone sweeps", || monotone_sweeps(&cfg, &models, &dir));
    suite.run(11, "timing", || timing(&cfg, &models, &dir));
    suite.run(12, "determinism", || determinism(&dir));

    if suite.failures > 0 {
        println!("{} of 12 criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
