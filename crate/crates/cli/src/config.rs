//! Model and experiment configuration: a TOML (or JSON metadata) file merged
//! with command-line flags, flags winning.

use std::path::Path;

use clap::Args;
use dqchaos::models::{
    build_bose_hubbard, build_kerr_resonator, build_random_liouvillian, build_spin_chain,
};
use dqchaos::{BoseHubbardParams, KerrParams, ModelSpec, RandomLiouvillianParams, SpinChainParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    BoseHubbard(BoseHubbardParams),
    Kerr(KerrParams),
    SpinChain(SpinChainParams),
    Random(RandomLiouvillianParams),
}

impl ModelConfig {
    pub fn default_for(kind: &str) -> Result<Self, CliError> {
        Ok(match kind {
            "bose-hubbard" | "bh" => Self::BoseHubbard(BoseHubbardParams::dimer(2.5, 3.0, 6)),
            "kerr" => Self::Kerr(KerrParams {
                detuning: 10.0,
                interaction: 10.0,
                drive: 3.5,
                loss: 1.0,
                cutoff: 30,
            }),
            "spin-chain" | "spin" => Self::SpinChain(SpinChainParams::reference(5, 1.0)),
            "random" => Self::Random(RandomLiouvillianParams {
                dim: 20,
                n_jumps: 2,
                strength: 1.0,
                seed: 0,
            }),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown model {other:?}; expected bose-hubbard, kerr, spin-chain or random"
                )))
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::BoseHubbard(_) => "bose-hubbard",
            Self::Kerr(_) => "kerr",
            Self::SpinChain(_) => "spin-chain",
            Self::Random(_) => "random",
        }
    }

    pub fn build(&self) -> Result<ModelSpec, CliError> {
        Ok(match self {
            Self::BoseHubbard(p) => build_bose_hubbard(p)?,
            Self::Kerr(p) => build_kerr_resonator(p)?,
            Self::SpinChain(p) => build_spin_chain(p)?,
            Self::Random(p) => build_random_liouvillian(p)?,
        })
    }

    pub fn bose_hubbard(&self) -> Result<&BoseHubbardParams, CliError> {
        match self {
            Self::BoseHubbard(p) => Ok(p),
            other => Err(CliError::Usage(format!(
                "this command needs a bose-hubbard model, got {}",
                other.kind()
            ))),
        }
    }

    /// Mean-field parameters; a Kerr resonator is a one-site chain.
    pub fn mean_field(&self) -> Result<BoseHubbardParams, CliError> {
        match self {
            Self::BoseHubbard(p) => Ok(p.clone()),
            Self::Kerr(p) => Ok(BoseHubbardParams {
                detuning: p.detuning,
                interaction: p.interaction,
                hopping: 0.0,
                drive: p.drive,
                loss: p.loss,
                n_sites: 1,
                cutoff: p.cutoff,
            }),
            other => Err(CliError::Usage(format!(
                "classical equations exist for bosonic models only, got {}",
                other.kind()
            ))),
        }
    }

    /// `(detuning, drive, loss)` for models where the default coherent
    /// initial amplitude makes sense.
    pub fn coherent_inputs(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::BoseHubbard(p) => Some((p.detuning, p.drive, p.loss)),
            Self::Kerr(p) => Some((p.detuning, p.drive, p.loss)),
            _ => None,
        }
    }

    pub fn set_axis(&mut self, axis: Axis, v: f64) -> Result<(), CliError> {
        match (self, axis) {
            (Self::BoseHubbard(p), Axis::Detuning) => p.detuning = v,
            (Self::BoseHubbard(p), Axis::Drive) => p.drive = v,
            (Self::Kerr(p), Axis::Detuning) => p.detuning = v,
            (Self::Kerr(p), Axis::Drive) => p.drive = v,
            (Self::SpinChain(p), Axis::Drive) => p.drive = v,
            (m, a) => {
                return Err(CliError::Usage(format!("axis {a:?} does not apply to {}", m.kind())))
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Detuning,
    Drive,
}

/// Physics flags shared by every model-driven subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct ModelArgs {
    /// Model kind: bose-hubbard, kerr, spin-chain, random.
    #[arg(long)]
    pub model: Option<String>,
    /// TOML configuration, or JSON metadata from an earlier run.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub detuning: Option<f64>,
    #[arg(long)]
    pub drive: Option<f64>,
    #[arg(long)]
    pub interaction: Option<f64>,
    #[arg(long)]
    pub hopping: Option<f64>,
    #[arg(long)]
    pub loss: Option<f64>,
    /// Fock cutoff per mode.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Spin-chain length.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub anisotropy: Option<f64>,
    #[arg(long)]
    pub dephasing: Option<f64>,
    /// Random-Liouvillian Hilbert dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub jumps: Option<usize>,
    #[arg(long)]
    pub strength: Option<f64>,
    /// Seed of the random Liouvillian itself.
    #[arg(long)]
    pub model_seed: Option<u64>,
}

/// Everything a configuration file may hold. Metadata blocks written by this
/// tool have the same shape, so they can be fed back with `--config`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssqt: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twa: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub otoc: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hstats: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<serde_json::Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext == "json" || ext == "csv" {
            let mut v: serde_json::Value = if ext == "csv" {
                let line = text
                    .lines()
                    .find_map(|l| l.strip_prefix(crate::meta::CSV_META_PREFIX))
                    .ok_or_else(|| bad(&"no metadata line"))?;
                serde_json::from_str(line).map_err(|e| bad(&e))?
            } else {
                serde_json::from_str(&text).map_err(|e| bad(&e))?
            };
            // Result files wrap the configuration in a `meta` block.
            if let Some(inner) = v.get_mut("meta") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(|e| bad(&e))
        } else {
            let v: toml::Value = toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            // Route through JSON so sections are stored uniformly.
            let j = serde_json::to_value(v).map_err(|e| CliError::Usage(e.to_string()))?;
            serde_json::from_value(j).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }

    /// Typed view of one section, defaults filled in.
    pub fn section<T: for<'de> Deserialize<'de> + Default>(
        &self,
        pick: impl Fn(&Self) -> &Option<serde_json::Value>,
    ) -> Result<T, CliError> {
        match pick(self) {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("config section: {e}"))),
            None => Ok(T::default()),
        }
    }
}

fn not_for(flag: &str, kind: &str) -> CliError {
    CliError::Usage(format!("--{flag} does not apply to a {kind} model"))
}

impl ModelArgs {
    pub fn file(&self) -> Result<FileConfig, CliError> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }

    /// Model from the file (if any), replaced by `--model` defaults when the
    /// kinds differ, then patched by individual flags.
    pub fn resolve(&self, file: &FileConfig, fallback: ModelConfig) -> Result<ModelConfig, CliError> {
        let mut m = match (&self.model, &file.model) {
            (Some(k), Some(f)) if ModelConfig::default_for(k)?.kind() == f.kind() => f.clone(),
            (Some(k), _) if ModelConfig::default_for(k)?.kind() == fallback.kind() => fallback,
            (Some(k), _) => ModelConfig::default_for(k)?,
            (None, Some(f)) => f.clone(),
            (None, None) => fallback,
        };
        let kind = m.kind();
        macro_rules! set {
            ($flag:ident, $name:literal, $($variant:ident => $field:ident),+) => {
                if let Some(v) = self.$flag {
                    match &mut m {
                        $(ModelConfig::$variant(p) => p.$field = v,)+
                        #[allow(unreachable_patterns)]
                        _ => return Err(not_for($name, kind)),
                    }
                }
            };
        }
        set!(detuning, "detuning", BoseHubbard => detuning, Kerr => detuning);
        set!(drive, "drive", BoseHubbard => drive, Kerr => drive, SpinChain => drive);
        set!(interaction, "interaction", BoseHubbard => interaction, Kerr => interaction);
        set!(hopping, "hopping", BoseHubbard => hopping);
        set!(loss, "loss", BoseHubbard => loss, Kerr => loss);
        set!(cutoff, "cutoff", BoseHubbard => cutoff, Kerr => cutoff);
        set!(sites, "sites", BoseHubbard => n_sites);
        set!(length, "length", SpinChain => length);
        set!(coupling, "coupling", SpinChain => coupling);
        set!(anisotropy, "anisotropy", SpinChain => anisotropy);
        set!(dephasing, "dephasing", SpinChain => dephasing);
        set!(dim, "dim", Random => dim);
        set!(jumps, "jumps", Random => n_jumps);
        set!(strength, "strength", Random => strength);
        set!(model_seed, "model-seed", Random => seed);
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_model_round_trip() {
        let text = r#"
[model]
kind = "bose-hubbard"
detuning = -4.0
hopping = 2.0
drive = 3.0
loss = 1.0
cutoff = 5

[ssqt]
trajectories = 7
"#;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        let f = FileConfig::load(&p).unwrap();
        let m = f.model.clone().unwrap();
        assert_eq!(m.bose_hubbard().unwrap().detuning, -4.0);
        assert_eq!(m.bose_hubbard().unwrap().interaction, 1.0);
        let args = ModelArgs {
            detuning: Some(1.5),
            ..Default::default()
        };
        let r = args.resolve(&f, ModelConfig::default_for("kerr").unwrap()).unwrap();
        assert_eq!(r.bose_hubbard().unwrap().detuning, 1.5);
        assert_eq!(r.bose_hubbard().unwrap().cutoff, 5);
    }

    #[test]
    fn foreign_flag_is_a_usage_error() {
        let args = ModelArgs {
            model: Some("kerr".into()),
            length: Some(4),
            ..Default::default()
        };
        assert!(matches!(args.resolve(&FileConfig::default(), ModelConfig::default_for("kerr").unwrap()), Err(CliError::Usage(_))));
    }
}
