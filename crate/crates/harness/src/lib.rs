//! Experiment harness for the `uavsec` toolkit: run configuration, result
//! tables, experiment runners and the run manifest written next to outputs.

pub mod config;
pub mod experiments;
pub mod table;

use anyhow::Result;
use config::RunConfig;
use std::fmt::Write as _;
use std::path::Path;

/// How a model used by a command was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Trained,
    Loaded(String),
}

/// Plain-text record of what produced the files in an output directory.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub models: Vec<(String, ModelSource)>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self { command: command.to_string(), config: config.clone(), models: Vec::new() }
    }

    pub fn model(&mut self, name: &str, source: ModelSource) {
        self.models.push((name.to_string(), source));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "command: {}", self.command).unwrap();
        writeln!(s, "version: {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(s, "checkpoint_format: {}", uavsec::checkpoint::FORMAT_VERSION).unwrap();
        writeln!(s, "seed: {}", self.config.seed).unwrap();
        writeln!(s, "config_hash: {}", self.config.hash()).unwrap();
        for (name, src) in &self.models {
            match src {
                ModelSource::Trained => writeln!(s, "model {name}: trained in-process").unwrap(),
                ModelSource::Loaded(p) => writeln!(s, "model {name}: loaded from {p}").unwrap(),
            }
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config.to_toml());
        s
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        std::fs::write(dir.as_ref().join("manifest.txt"), self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_hash_and_sources() {
        let cfg = RunConfig::desk();
        let mut m = Manifest::new("eval", &cfg);
        m.model("gnn", ModelSource::Loaded("g.json".into()));
        m.model("mlp", ModelSource::Trained);
        let text = m.render();
        assert!(text.contains(&cfg.hash()));
        assert!(text.contains("model gnn: loaded from g.json"));
        assert!(text.contains("model mlp: trained in-process"));
        assert!(text.contains("seed: 0"));
    }
}
