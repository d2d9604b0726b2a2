//! Metadata blocks embedded in every output. A block holds the resolved
//! configuration in [`FileConfig`] shape, so `--config <output>` replays a run.

use std::io::Write;
use std::path::Path;

use dqchaos::{cache, hamiltonian_stats, liouvillian, observables, ssqt, stats, trajectories};
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::CliError;

/// CSV outputs carry their metadata on a comment line with this prefix.
pub const CSV_META_PREFIX: &str = "# meta ";

/// Numerical thresholds baked into the library, recorded for provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub max_unforced_liouvillian_dim: usize,
    pub zero_eigenvalue_rel: f64,
    pub positivity_floor: f64,
    pub biorthonormality_warn: f64,
    pub biorthonormality_fail: f64,
    pub dp_max_default: f64,
    pub min_set_for_cos: usize,
    pub weight_hist: (f64, f64, usize),
    pub dedup_rel: f64,
    pub unfold_bandwidth: f64,
    pub bulk_eps_factor: f64,
    pub hist: (usize, f64),
    pub fidelity_clip: f64,
    pub support_tol: f64,
    pub hamiltonian_convergence: f64,
    pub cache_format: u32,
}

impl Tolerances {
    pub fn current() -> Self {
        Self {
            max_unforced_liouvillian_dim: liouvillian::MAX_DIM_UNFORCED,
            zero_eigenvalue_rel: liouvillian::ZERO_TOL_REL,
            positivity_floor: liouvillian::POSITIVITY_FLOOR,
            biorthonormality_warn: liouvillian::BIORTHO_TOL,
            biorthonormality_fail: liouvillian::BIORTHO_FAIL,
            dp_max_default: trajectories::DEFAULT_DP_MAX,
            min_set_for_cos: ssqt::MIN_SET_FOR_COS,
            weight_hist: (ssqt::WEIGHT_HIST_LO, ssqt::WEIGHT_HIST_HI, ssqt::WEIGHT_BINS_PER_DECADE),
            dedup_rel: stats::DEDUP_REL,
            unfold_bandwidth: stats::UNFOLD_BANDWIDTH,
            bulk_eps_factor: stats::BULK_EPS_FACTOR,
            hist: (stats::HIST_BINS, stats::HIST_MAX),
            fidelity_clip: observables::FIDELITY_CLIP,
            support_tol: observables::SUPPORT_TOL,
            hamiltonian_convergence: hamiltonian_stats::CONVERGENCE_TOL,
            cache_format: cache::VERSION,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(flatten)]
    pub config: FileConfig,
    pub tolerances: Tolerances,
    /// Input files, cache fingerprints and similar run facts.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub provenance: serde_json::Map<String, serde_json::Value>,
}

impl Meta {
    pub fn new(command: &str, config: FileConfig) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            tolerances: Tolerances::current(),
            provenance: Default::default(),
        }
    }

    pub fn note(mut self, key: &str, value: impl Serialize) -> Self {
        self.provenance
            .insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn csv_line(&self) -> String {
        format!("meta {}", serde_json::to_string(self).expect("metadata serializes"))
    }
}

/// Section value for a [`FileConfig`] slot.
pub fn section<T: Serialize>(v: &T) -> Option<serde_json::Value> {
    Some(serde_json::to_value(v).expect("section serializes"))
}

/// `{"meta": ..., "result": ...}` to `out`, or stdout.
pub fn emit_json(out: Option<&Path>, meta: &Meta, result: &impl Serialize) -> Result<(), CliError> {
    let doc = serde_json::json!({ "meta": meta, "result": result });
    let text = serde_json::to_string_pretty(&doc).expect("result serializes");
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text + "\n")?;
            log::info!("wrote {}", p.display());
        }
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}")?;
        }
    }
    Ok(())
}

/// CSV writer that starts with the metadata comment line.
pub fn csv_writer(out: Option<&Path>, meta: &Meta) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let mut sink: Box<dyn Write> = match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(std::io::BufWriter::new(std::fs::File::create(p)?))
        }
        None => Box::new(std::io::stdout()),
    };
    writeln!(sink, "# {}", meta.csv_line())?;
    Ok(csv::Writer::from_writer(sink))
}
