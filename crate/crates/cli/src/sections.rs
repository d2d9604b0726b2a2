//! Typed experiment sections of the configuration file. Every field has a
//! default, so a section may be partial or absent.

use clap::ValueEnum;
use dqchaos::classical::{LyapunovConfig, TwaConfig};
use dqchaos::ssqt::{BulkChoice, CminChoice, CminScale};
use dqchaos::trajectories::Integrator;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Coherent,
    Fock,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsqtSection {
    /// Snapshot time.
    pub t: f64,
    pub trajectories: usize,
    pub k: u32,
    pub scale: CminScale,
    /// Fixed cutoff; overrides the `k` rule.
    pub c_min: Option<f64>,
    pub dt: f64,
    pub integrator: Integrator,
    pub seed: u64,
    pub initial: InitialKind,
    /// Coherent amplitude `(re, im)`; default `3 sqrt(F / (Delta - i gamma))`.
    pub alpha: Option<(f64, f64)>,
    /// Fock starts draw `n` from `0..=fock_max`.
    pub fock_max: usize,
    pub bulk: BulkChoice,
    pub pooled: bool,
}

impl Default for SsqtSection {
    fn default() -> Self {
        Self {
            t: 50.0,
            trajectories: 100,
            k: dqchaos::ssqt::DEFAULT_K,
            scale: CminScale::Log,
            c_min: None,
            dt: 1e-3,
            integrator: Integrator::Euler,
            seed: 0,
            initial: InitialKind::Coherent,
            alpha: None,
            fock_max: 3,
            bulk: BulkChoice::Auto,
            pooled: false,
        }
    }
}

impl SsqtSection {
    pub fn cmin(&self) -> CminChoice {
        match self.c_min {
            Some(c_min) => CminChoice::Fixed { c_min },
            None => CminChoice::Rule {
                k: self.k,
                scale: self.scale,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalStart {
    /// All modes empty.
    #[default]
    Vacuum,
    /// `3 sqrt(F / (Delta - i gamma))` on every mode.
    Coherent,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalSection {
    pub initial: ClassicalStart,
    #[serde(flatten)]
    pub lyapunov: LyapunovConfig,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TwaSection {
    #[serde(flatten)]
    pub twa: TwaConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtocSection {
    /// Forward time `t`; absent means the steady-state correlator.
    pub t: Option<f64>,
    pub tau_max: f64,
    pub n_tau: usize,
    pub mode: usize,
}

impl Default for OtocSection {
    fn default() -> Self {
        Self {
            t: None,
            tau_max: 2.0,
            n_tau: 81,
            mode: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HstatsSection {
    pub scales: Vec<f64>,
    pub m_max: Vec<usize>,
    pub max_cutoff: usize,
}

impl Default for HstatsSection {
    fn default() -> Self {
        Self {
            scales: vec![1.0],
            m_max: vec![50, 100, 200],
            max_cutoff: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsSection {
    /// Eigenvalue CSV.
    pub input: Option<std::path::PathBuf>,
    /// Eigenbasis cache file, used when `input` is absent.
    pub from_cache: Option<std::path::PathBuf>,
    pub bulk: BulkChoice,
    pub unfold: bool,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            input: None,
            from_cache: None,
            bulk: BulkChoice::Auto,
            unfold: true,
        }
    }
}

/// `auto`, `off`, or a number (`0` also disables the filter).
pub fn parse_bulk(s: &str) -> Result<BulkChoice, CliError> {
    match s.trim() {
        "auto" => Ok(BulkChoice::Auto),
        "off" | "none" => Ok(BulkChoice::Off),
        v => match v.parse::<f64>() {
            Ok(0.0) => Ok(BulkChoice::Off),
            Ok(eps) if eps > 0.0 && eps.is_finite() => Ok(BulkChoice::Fixed { eps }),
            _ => Err(CliError::Usage(format!(
                "--bulk-eps expects auto, off or a non-negative number, got {s:?}"
            ))),
        },
    }
}

/// `"a,b,c"` into numbers.
pub fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {x:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_fill_defaults() {
        let s: SsqtSection = serde_json::from_str(r#"{"trajectories": 5, "bulk": {"mode": "off"}}"#).unwrap();
        assert_eq!(s.trajectories, 5);
        assert_eq!(s.bulk, BulkChoice::Off);
        assert_eq!(s.k, 3);
        let c: ClassicalSection = serde_json::from_str(r#"{"dt": 0.01}"#).unwrap();
        assert_eq!(c.lyapunov.dt, 0.01);
        assert_eq!(c.lyapunov.n_blocks, LyapunovConfig::default().n_blocks);
        let t: TwaSection = serde_json::from_str(r#"{"trajectories": 4}"#).unwrap();
        assert_eq!(t.twa.trajectories, 4);
    }

    #[test]
    fn sections_round_trip() {
        let s = SsqtSection {
            alpha: Some((1.0, -0.5)),
            c_min: Some(1e-4),
            ..Default::default()
        };
        let back: SsqtSection = serde_json::from_value(serde_json::to_value(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let c = ClassicalSection::default();
        let back: ClassicalSection = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bulk_flag_forms() {
        assert_eq!(parse_bulk("auto").unwrap(), BulkChoice::Auto);
        assert_eq!(parse_bulk("0").unwrap(), BulkChoice::Off);
        assert_eq!(parse_bulk("0.5").unwrap(), BulkChoice::Fixed { eps: 0.5 });
        assert!(parse_bulk("-1").is_err());
    }
}
