use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use uavsec::baselines::MlpModel;
use uavsec::checkpoint::{load_gnn, load_mlp, load_sac, save_model, Metadata, Model};
use uavsec::gnn::GnnModel;
use uavsec_harness::config::RunConfig;
use uavsec_harness::experiments::{self as ex, SweepKind};
use uavsec_harness::{Manifest, ModelSource};

#[derive(Parser)]
#[command(name = "uavsec", version, about = "Secure UAV beamforming and deployment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the GNN beamformer; writes loss_curve.csv and gnn.json.
    TrainGnn(Common),
    /// Train the MLP baseline; writes loss_curve.csv and mlp.json.
    TrainMlp(Common),
    /// Train the deployment agent on one frozen layout; writes sac_curve.csv, trace.csv and sac.json.
    TrainSac(Common),
    /// Mean sum secrecy rate of every scheme on held-out scenarios.
    Eval(Common),
    SweepUsers(Common),
    SweepPower(Common),
    SweepNoise(Common),
    /// Per-user secrecy rate distribution.
    Cdf(Common),
    /// SAC, grid oracle and heuristic placements on the frozen layouts.
    DeployCompare(Common),
    /// Inference timing.
    Bench(Common),
    /// Fine-tuning versus training from scratch at a larger user count.
    Transfer(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// `default`, `desk`, `full`, or a TOML file.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// GNN checkpoint; trained in-process when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    mlp_checkpoint: Option<PathBuf>,
    #[arg(long)]
    sac_checkpoint: Option<PathBuf>,
    /// Override the scenario user count.
    #[arg(long)]
    users: Option<usize>,
    /// Override the deployment grid resolution.
    #[arg(long)]
    grid: Option<usize>,
    /// Override the number of timed inference runs.
    #[arg(long)]
    repeats: Option<usize>,
    /// Frozen layout index used by train-sac.
    #[arg(long, default_value_t = 0)]
    topology: usize,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.display().to_string();
        }
        if let Some(k) = self.users {
            cfg.scenario.users = k;
        }
        if let Some(g) = self.grid {
            cfg.experiment.grid = g;
        }
        if let Some(r) = self.repeats {
            cfg.experiment.bench_repeats = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Run {
    cfg: RunConfig,
    args: Common,
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn meta(&self) -> Metadata {
        Metadata { config_hash: self.cfg.hash(), seed: self.cfg.seed }
    }

    fn save(&self, file: &str, model: Model) -> Result<()> {
        save_model(self.out.join(file), &model, &self.meta()).with_context(|| format!("writing {file}"))
    }

    fn gnn(&mut self) -> Result<GnnModel> {
        match &self.args.checkpoint {
            Some(p) => {
                let (m, _) = load_gnn(p).with_context(|| format!("GNN checkpoint {}", p.display()))?;
                self.manifest.model("gnn", ModelSource::Loaded(p.display().to_string()));
                Ok(m)
            }
            None => {
                self.manifest.model("gnn", ModelSource::Trained);
                Ok(ex::train_gnn_run(&self.cfg)?.0)
            }
        }
    }

    fn mlp(&mut self) -> Result<MlpModel> {
        match &self.args.mlp_checkpoint {
            Some(p) => {
                let (m, _) = load_mlp(p).with_context(|| format!("MLP checkpoint {}", p.display()))?;
                self.manifest.model("mlp", ModelSource::Loaded(p.display().to_string()));
                Ok(m)
            }
            None => {
                self.manifest.model("mlp", ModelSource::Trained);
                Ok(ex::train_mlp_run(&self.cfg, self.cfg.scenario.users)?.0)
            }
        }
    }

    fn write(&self, file: &str, t: &uavsec_harness::table::ResultTable) -> Result<()> {
        t.write(self.out.join(file)).with_context(|| format!("writing {file}"))
    }
}

fn execute(name: &str, command: Command) -> Result<()> {
    let args = match &command {
        Command::TrainGnn(a)
        | Command::TrainMlp(a)
        | Command::TrainSac(a)
        | Command::Eval(a)
        | Command::SweepUsers(a)
        | Command::SweepPower(a)
        | Command::SweepNoise(a)
        | Command::Cdf(a)
        | Command::DeployCompare(a)
        | Command::Bench(a)
        | Command::Transfer(a) => a.clone(),
    };
    let cfg = args.load()?;
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = Manifest::new(name, &cfg);
    let mut run = Run { cfg, args, out, manifest };
    let window = run.cfg.experiment.loss_window;

    match command {
        Command::TrainGnn(_) => {
            let (m, curve) = ex::train_gnn_run(&run.cfg)?;
            run.manifest.model("gnn", ModelSource::Trained);
            run.write("loss_curve.csv", &ex::loss_table(&curve, window))?;
            run.save("gnn.json", Model::Gnn(m))?;
        }
        Command::TrainMlp(_) => {
            let (m, curve) = ex::train_mlp_run(&run.cfg, run.cfg.scenario.users)?;
            run.manifest.model("mlp", ModelSource::Trained);
            run.write("loss_curve.csv", &ex::loss_table(&curve, window))?;
            run.save("mlp.json", Model::Mlp(m))?;
        }
        Command::TrainSac(_) => {
            let gnn = run.gnn()?;
            let layouts = ex::layouts(&run.cfg);
            let t = run.args.topology;
            let Some(layout) = layouts.get(t) else {
                bail!("--topology {t} is out of range; experiment.topologies = {}", layouts.len());
            };
            let o = ex::train_sac_run(&run.cfg, &gnn, layout, 0)?;
            run.manifest.model("sac", ModelSource::Trained);
            run.write("sac_curve.csv", &o.curve)?;
            run.write("trace.csv", &o.trace)?;
            run.save("sac.json", Model::Sac(o.run.model))?;
        }
        Command::Eval(_) => {
            let gnn = run.gnn()?;
            let mlp = run.mlp()?;
            run.write("eval.csv", &ex::run_eval(&run.cfg, &gnn, Some(&mlp))?)?;
        }
        Command::SweepUsers(_) | Command::SweepPower(_) | Command::SweepNoise(_) => {
            let kind = match name {
                "sweep-users" => SweepKind::Users,
                "sweep-power" => SweepKind::Power,
                _ => SweepKind::Noise,
            };
            let gnn = run.gnn()?;
            let mlp = run.mlp()?;
            run.write(kind.file_name(), &ex::run_sweep(kind, &run.cfg, &gnn, &mlp)?)?;
        }
        Command::Cdf(_) => {
            let gnn = run.gnn()?;
            let mlp = run.mlp()?;
            run.write("cdf.csv", &ex::run_cdf(&run.cfg, &gnn, &mlp)?)?;
        }
        Command::DeployCompare(_) => {
            let gnn = run.gnn()?;
            let layouts = ex::layouts(&run.cfg);
            let mut finals = Vec::with_capacity(layouts.len());
            match run.args.sac_checkpoint.clone() {
                Some(p) => {
                    let (sac, _) = load_sac(&p).with_context(|| format!("SAC checkpoint {}", p.display()))?;
                    run.manifest.model("sac", ModelSource::Loaded(p.display().to_string()));
                    for layout in &layouts {
                        let (_, (x, y, _)) = ex::sac_trace(&run.cfg, &gnn, &sac, layout)?;
                        finals.push((x, y));
                    }
                }
                None => {
                    run.manifest.model("sac", ModelSource::Trained);
                    for (i, layout) in layouts.iter().enumerate() {
                        let o = ex::train_sac_run(&run.cfg, &gnn, layout, 0)?;
                        run.write(&format!("trace_{i}.csv"), &o.trace)?;
                        finals.push(o.final_position);
                    }
                }
            }
            run.write("deploy_compare.csv", &ex::run_deploy_compare(&run.cfg, &gnn, &layouts, &finals)?)?;
        }
        Command::Bench(_) => {
            let gnn = run.gnn()?;
            run.write("bench.csv", &ex::bench_inference(&run.cfg, &gnn)?)?;
        }
        Command::Transfer(_) => {
            let gnn = run.gnn()?;
            let o = ex::run_transfer(&run.cfg, &gnn)?;
            run.write("transfer_curve.csv", &o.curves)?;
            run.write("transfer_summary.csv", &o.summary)?;
            println!("mean fraction of scratch epochs needed: {:.3}", o.mean_fraction);
        }
    }
    run.manifest.write(&run.out)?;
    println!("wrote results to {}", Path::new(&run.out).display());
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::TrainGnn(_) => "train-gnn",
        Command::TrainMlp(_) => "train-mlp",
        Command::TrainSac(_) => "train-sac",
        Command::Eval(_) => "eval",
        Command::SweepUsers(_) => "sweep-users",
        Command::SweepPower(_) => "sweep-power",
        Command::SweepNoise(_) => "sweep-noise",
        Command::Cdf(_) => "cdf",
        Command::DeployCompare(_) => "deploy-compare",
        Command::Bench(_) => "bench",
        Command::Transfer(_) => "transfer",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    match execute(name, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
