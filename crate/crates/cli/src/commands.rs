use std::path::PathBuf;
use std::sync::Mutex;

use clap::Args;
use dqchaos::cache::{self, CacheOutcome};
use dqchaos::classical::{integrate_classical, lyapunov_max, semiclassical_otoc, LyapunovResult};
use dqchaos::hamiltonian_stats::r_vs_cutoff_curve;
use dqchaos::liouvillian::check_size;
use dqchaos::observables::{quadratures, quantum_otoc_with};
use dqchaos::ssqt::{ssqt_statistics, BulkChoice, CminScale, SsqtConfig, SsqtReport};
use dqchaos::states::{coherent, default_coherent_amplitude, product};
use dqchaos::stats::{self, reference, Histogram, SpacingSample, StatsSummary};
use dqchaos::trajectories::{Integrator, TrajectoryConfig, TrajectoryEngine};
use dqchaos::{
    io, BoseHubbardParams, InitialState, KerrParams, LiouvillianSpectrum, ModelSpec, Operator, C64,
};
use serde::Serialize;

use crate::config::{FileConfig, ModelArgs, ModelConfig};
use crate::meta::{csv_writer, emit_json, section, Meta};
use crate::sections::{
    parse_bulk, parse_list, ClassicalSection, ClassicalStart, HstatsSection, InitialKind, OtocSection, SsqtSection,
    StatsSection, TwaSection,
};
use crate::{CliError, RunArgs};

/// At most one dense diagonalization in flight per process.
static DIAG_LOCK: Mutex<()> = Mutex::new(());

pub fn eigenbasis(model: &ModelSpec, run: &RunArgs) -> Result<(LiouvillianSpectrum, CacheOutcome), CliError> {
    let dir = cache::cache_dir(run.cache_dir.as_deref());
    let _guard = DIAG_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    if !cache::cache_path(&dir, model).exists() {
        // Refuse before assembling anything large.
        check_size(model.liouvillian_dim(), run.force_large)?;
    }
    Ok(cache::load_or_compute(model, &dir, run.force_large)?)
}

fn outcome_name(o: CacheOutcome) -> &'static str {
    match o {
        CacheOutcome::Hit => "hit",
        CacheOutcome::Miss => "miss",
        CacheOutcome::Recomputed => "recomputed",
    }
}

fn parse_integrator(s: &str) -> Result<Integrator, CliError> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| CliError::Usage(format!("--integrator expects euler or second-order, got {s:?}")))
}

fn parse_scale(s: &str) -> Result<CminScale, CliError> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| CliError::Usage(format!("--scale expects log or linear, got {s:?}")))
}

// ---------------------------------------------------------------- spectrum

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn spectrum(a: &SpectrumArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let mc = a.model.resolve(&file, ModelConfig::default_for("kerr")?)?;
    let model = mc.build()?;
    let (spec, outcome) = eigenbasis(&model, &a.run)?;
    let dir = cache::cache_dir(a.run.cache_dir.as_deref());
    let meta = Meta::new(
        "spectrum",
        FileConfig {
            model: Some(mc),
            ..Default::default()
        },
    )
    .note("fingerprint", model.fingerprint())
    .note("cache_file", cache::cache_path(&dir, &model))
    .note("cache", outcome_name(outcome))
    .note("steady_index", spec.steady_index());
    match &a.run.out {
        Some(p) => {
            io::write_eigenvalues_file(p, spec.eigenvalues(), Some(&meta.csv_line()))?;
            log::info!("wrote {} eigenvalues to {}", spec.dim(), p.display());
        }
        None => io::write_eigenvalues(std::io::stdout().lock(), spec.eigenvalues(), Some(&meta.csv_line()))?,
    }
    Ok(())
}

// ---------------------------------------------------------------- stats

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Eigenvalue CSV (`re,im` or a single real column).
    #[arg(long, conflicts_with = "from_cache")]
    pub input: Option<PathBuf>,
    /// Eigenbasis cache file written by `spectrum`.
    #[arg(long)]
    pub from_cache: Option<PathBuf>,
    /// Bulk filter `|Im l| >= eps`: auto, off, or a number.
    #[arg(long)]
    pub bulk_eps: Option<String>,
    /// Unfold before computing spacings.
    #[arg(long, action = clap::ArgAction::Set)]
    pub unfold: Option<bool>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct HistogramColumns {
    bin_centers: Vec<f64>,
    density: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poisson_2d: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ginue: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poisson_1d: Option<Vec<f64>>,
    outside: usize,
}

#[derive(Serialize)]
struct StatsOut {
    kind: &'static str,
    n_input: usize,
    bulk_eps: f64,
    removed_by_bulk: usize,
    n: usize,
    merged: usize,
    mean_r: f64,
    neg_mean_cos_theta: Option<f64>,
    l1_to_poisson_2d: Option<f64>,
    l1_to_ginibre: Option<f64>,
    references: serde_json::Value,
    histogram: HistogramColumns,
}

fn raw_complex_sample(eigs: &[C64]) -> Result<SpacingSample, CliError> {
    let mut s = stats::complex_nn_spacings(eigs)?;
    s.ratios = stats::complex_spacing_ratios(eigs)?.ratios;
    let m = s.raw_spacings.iter().sum::<f64>() / s.raw_spacings.len().max(1) as f64;
    s.unfolded_spacings = s.raw_spacings.iter().map(|x| x / m).collect();
    Ok(s)
}

pub fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut sec: StatsSection = file.section(|f| &f.stats)?;
    if a.input.is_some() || a.from_cache.is_some() {
        sec.input = a.input.clone();
        sec.from_cache = a.from_cache.clone();
    }
    if let Some(b) = &a.bulk_eps {
        sec.bulk = parse_bulk(b)?;
    }
    if let Some(u) = a.unfold {
        sec.unfold = u;
    }
    let mut meta = Meta::new(
        "stats",
        FileConfig {
            stats: section(&sec),
            ..Default::default()
        },
    );
    let eigs = match (&sec.input, &sec.from_cache) {
        (Some(p), _) => io::read_eigenvalues_file(p).map_err(|e| match e {
            dqchaos::Error::InvalidInput(m) => dqchaos::Error::InvalidInput(format!("{}: {m}", p.display())),
            other => other,
        })?,
        (None, Some(p)) => {
            let (spec, fp) = cache::load_any(p)?;
            meta = meta.note("fingerprint", fp);
            spec.eigenvalues().to_vec()
        }
        (None, None) => return Err(CliError::Usage("stats needs --input or --from-cache".into())),
    };
    let real = eigs.iter().all(|z| z.im == 0.0);
    let out = if real {
        let mut e: Vec<f64> = eigs.iter().map(|z| z.re).collect();
        e.sort_by(f64::total_cmp);
        let summary = if sec.unfold {
            stats::real_statistics(&e, stats::DEFAULT_POLY_DEGREE)?
        } else {
            let gaps: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
            let m = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
            let scaled: Vec<f64> = gaps.iter().map(|g| g / m).collect();
            StatsSummary {
                mean_r: stats::mean_real_ratio(&e)?,
                neg_mean_cos_theta: None,
                histogram: Histogram::standard(&scaled),
                n_points: e.len(),
                merged: 0,
                l1_to_poisson_2d: None,
                l1_to_ginibre: None,
            }
        };
        let h = &summary.histogram;
        StatsOut {
            kind: "real",
            n_input: eigs.len(),
            bulk_eps: 0.0,
            removed_by_bulk: 0,
            n: summary.n_points,
            merged: summary.merged,
            mean_r: summary.mean_r,
            neg_mean_cos_theta: None,
            l1_to_poisson_2d: None,
            l1_to_ginibre: None,
            references: serde_json::json!({
                "poisson_1d_mean_r": reference::POISSON_1D_MEAN_R,
                "goe_mean_r": reference::WIGNER_DYSON_MEAN_R,
                "gue_mean_r": reference::GUE_MEAN_R,
            }),
            histogram: HistogramColumns {
                bin_centers: h.centers(),
                density: h.density.clone(),
                poisson_2d: None,
                ginue: None,
                poisson_1d: Some(stats::bin_average(h, |s| stats::reference_poisson_1d(s).unwrap_or(0.0))),
                outside: h.outside,
            },
        }
    } else {
        let eps = match sec.bulk {
            BulkChoice::Off => 0.0,
            BulkChoice::Auto => stats::default_bulk_eps(&eigs)?,
            BulkChoice::Fixed { eps } => eps,
        };
        let (bulk, removed) = stats::bulk_filter(&eigs, eps);
        let sample = if sec.unfold {
            stats::unfold_complex(&bulk)?
        } else {
            raw_complex_sample(&bulk)?
        };
        let summary = StatsSummary::from_complex(&sample)?;
        let h = &summary.histogram;
        StatsOut {
            kind: "complex",
            n_input: eigs.len(),
            bulk_eps: eps,
            removed_by_bulk: removed,
            n: summary.n_points,
            merged: summary.merged,
            mean_r: summary.mean_r,
            neg_mean_cos_theta: summary.neg_mean_cos_theta,
            l1_to_poisson_2d: summary.l1_to_poisson_2d,
            l1_to_ginibre: summary.l1_to_ginibre,
            references: serde_json::json!({
                "ginibre": { "mean_r": reference::GINIBRE_MEAN_R, "neg_mean_cos_theta": reference::GINIBRE_NEG_COS },
                "poisson_2d": { "mean_r": reference::POISSON_2D_MEAN_R, "neg_mean_cos_theta": reference::POISSON_2D_NEG_COS },
            }),
            histogram: HistogramColumns {
                bin_centers: h.centers(),
                density: h.density.clone(),
                poisson_2d: Some(stats::bin_average(h, |s| stats::reference_p2d(s).unwrap_or(0.0))),
                ginue: Some(stats::bin_average(h, |s| stats::reference_ginue(s).unwrap_or(0.0))),
                poisson_1d: None,
                outside: h.outside,
            },
        }
    };
    emit_json(a.out.as_deref(), &meta, &out)
}

// ---------------------------------------------------------------- ssqt

/// SSQT flags, shared with `sweep`.
#[derive(Args, Clone, Debug, Default)]
pub struct SsqtFlags {
    /// Snapshot time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Number of trajectories M.
    #[arg(long, short = 'M')]
    pub trajectories: Option<usize>,
    /// c_min = C - k sigma.
    #[arg(long)]
    pub k: Option<u32>,
    /// Fixed c_min instead of the k rule.
    #[arg(long)]
    pub c_min: Option<f64>,
    /// Scale of the c_min rule: log or linear.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// euler or second-order.
    #[arg(long)]
    pub integrator: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub initial: Option<InitialKind>,
    /// Coherent amplitude: RE IM.
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_hyphen_values = true)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub fock_max: Option<usize>,
    /// Bulk filter on relevant sets: auto, off, or a number.
    #[arg(long)]
    pub bulk_eps: Option<String>,
    /// Also report statistics of the union of relevant sets.
    #[arg(long)]
    pub pooled: bool,
}

impl SsqtFlags {
    pub fn apply(&self, file: &FileConfig) -> Result<SsqtSection, CliError> {
        let mut s: SsqtSection = file.section(|f| &f.ssqt)?;
        if let Some(v) = self.t {
            s.t = v;
        }
        if let Some(v) = self.trajectories {
            s.trajectories = v;
        }
        if let Some(v) = self.k {
            s.k = v;
            s.c_min = None;
        }
        if let Some(v) = self.c_min {
            s.c_min = Some(v);
        }
        if let Some(v) = &self.scale {
            s.scale = parse_scale(v)?;
        }
        if let Some(v) = self.dt {
            s.dt = v;
        }
        if let Some(v) = &self.integrator {
            s.integrator = parse_integrator(v)?;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.initial {
            s.initial = v;
        }
        if let Some(v) = &self.alpha {
            s.alpha = Some((v[0], v[1]));
        }
        if let Some(v) = self.fock_max {
            s.fock_max = v;
        }
        if let Some(v) = &self.bulk_eps {
            s.bulk = parse_bulk(v)?;
        }
        if self.pooled {
            s.pooled = true;
        }
        if s.trajectories == 0 {
            return Err(CliError::Usage("need at least one trajectory (M >= 1)".into()));
        }
        if !(s.t >= 0.0) || !s.t.is_finite() {
            return Err(CliError::Usage(format!("snapshot time must be >= 0, got {}", s.t)));
        }
        Ok(s)
    }
}

pub fn coherent_alpha(sec_alpha: Option<(f64, f64)>, mc: &ModelConfig) -> Result<C64, CliError> {
    match (sec_alpha, mc.coherent_inputs()) {
        (Some((re, im)), _) => Ok(C64::new(re, im)),
        (None, Some((d, f, g))) => Ok(default_coherent_amplitude(d, f, g)),
        (None, None) => Err(CliError::Usage(format!(
            "coherent starts need an explicit --alpha for a {} model",
            mc.kind()
        ))),
    }
}

pub fn ssqt_config(sec: &SsqtSection, mc: &ModelConfig, model: &ModelSpec) -> Result<SsqtConfig, CliError> {
    let initial = match sec.initial {
        InitialKind::Coherent => InitialState::coherent(coherent_alpha(sec.alpha, mc)?),
        InitialKind::Fock => {
            let smallest = model.space().factor_dims().iter().copied().min().unwrap_or(1);
            if sec.fock_max >= smallest {
                return Err(CliError::Usage(format!(
                    "fock_max {} does not fit local dimension {smallest}",
                    sec.fock_max
                )));
            }
            InitialState::Fock { max_n: sec.fock_max }
        }
        InitialKind::Random => InitialState::Random,
    };
    Ok(SsqtConfig {
        t_snapshot: sec.t,
        trajectories: sec.trajectories,
        base_seed: sec.seed,
        initial,
        dynamics: TrajectoryConfig::new(sec.dt).with_integrator(sec.integrator),
        cmin: sec.cmin(),
        bulk: sec.bulk.clone(),
        pooled: sec.pooled,
    })
}

/// Slowest non-stationary decay rate `min |Re l|`.
pub fn spectral_gap(spec: &LiouvillianSpectrum) -> f64 {
    let tol = spec.zero_tolerance();
    spec.eigenvalues()
        .iter()
        .enumerate()
        .filter(|&(j, z)| j != spec.steady_index() && z.re.abs() > tol)
        .map(|(_, z)| z.re.abs())
        .fold(f64::INFINITY, f64::min)
}

/// Snapshots later than this many relaxation times count as steady state.
pub const STEADY_RELAXATION_TIMES: f64 = 10.0;

/// `-<cos theta>` above the midpoint between the 2D Poisson and Ginibre
/// values reads as chaotic.
pub fn classify(neg_cos: f64) -> &'static str {
    let mid = 0.5 * (reference::GINIBRE_NEG_COS + reference::POISSON_2D_NEG_COS);
    if neg_cos > mid {
        "chaotic"
    } else {
        "integrable"
    }
}

#[derive(Serialize)]
pub struct SsqtOut {
    pub classification: String,
    pub regime: &'static str,
    pub relaxation_time: f64,
    pub initial: InitialState,
    pub report: SsqtReport,
}

pub fn run_ssqt(
    sec: &SsqtSection,
    mc: &ModelConfig,
    run: &RunArgs,
) -> Result<(SsqtOut, LiouvillianSpectrum, CacheOutcome), CliError> {
    let model = mc.build()?;
    let cfg = ssqt_config(sec, mc, &model)?;
    let (spec, outcome) = eigenbasis(&model, run)?;
    let engine = TrajectoryEngine::new(&model);
    let report = ssqt_statistics(&spec, &engine, &cfg)?;
    let relax = 1.0 / spectral_gap(&spec);
    let regime = if sec.t >= STEADY_RELAXATION_TIMES * relax {
        "steady-state"
    } else {
        "transient"
    };
    let class = classify(report.neg_mean_cos_theta.mean);
    Ok((
        SsqtOut {
            classification: format!("{regime} {class}"),
            regime,
            relaxation_time: relax,
            initial: cfg.initial,
            report,
        },
        spec,
        outcome,
    ))
}

#[derive(Args, Debug)]
pub struct SsqtArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub flags: SsqtFlags,
    /// CSV of the selected eigenvalues (union over trajectories).
    #[arg(long)]
    pub selected_out: Option<PathBuf>,
}

pub fn ssqt(a: &SsqtArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let sec = a.flags.apply(&file)?;
    let mc = a.model.resolve(&file, ModelConfig::default_for("bose-hubbard")?)?;
    let (out, spec, outcome) = run_ssqt(&sec, &mc, &a.run)?;
    let meta = Meta::new(
        "ssqt",
        FileConfig {
            model: Some(mc),
            ssqt: section(&sec),
            ..Default::default()
        },
    )
    .note("cache", outcome_name(outcome));
    if let Some(p) = &a.selected_out {
        let mut w = csv_writer(Some(p), &meta)?;
        w.write_record(["index", "re", "im"])?;
        let eigs = spec.eigenvalues();
        for &j in &out.report.selected_union {
            w.write_record([j.to_string(), format!("{:e}", eigs[j].re), format!("{:e}", eigs[j].im)])?;
        }
        w.flush()?;
    }
    log::info!(
        "N_lambda = {:.1}, <r> = {:.3}, -<cos> = {:.3}: {}",
        out.report.n_lambda.mean,
        out.report.mean_r.mean,
        out.report.neg_mean_cos_theta.mean,
        out.classification
    );
    emit_json(a.run.out.as_deref(), &meta, &out)
}

// ---------------------------------------------------------------- classical

#[derive(Args, Clone, Debug, Default)]
pub struct LyapunovFlags {
    /// Mean-field starting point.
    #[arg(long, value_enum)]
    pub start: Option<ClassicalStart>,
    /// RK4 step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub n_transient: Option<usize>,
    #[arg(long)]
    pub n_sample: Option<usize>,
    #[arg(long)]
    pub n_blocks: Option<usize>,
    /// Orbit separation.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl LyapunovFlags {
    pub fn apply(&self, file: &FileConfig) -> Result<ClassicalSection, CliError> {
        let mut s: ClassicalSection = file.section(|f| &f.classical)?;
        if let Some(v) = self.start {
            s.initial = v;
        }
        if let Some(v) = self.step {
            s.lyapunov.dt = v;
        }
        if let Some(v) = self.n_transient {
            s.lyapunov.n_transient = v;
        }
        if let Some(v) = self.n_sample {
            s.lyapunov.n_sample = v;
        }
        if let Some(v) = self.n_blocks {
            s.lyapunov.n_blocks = v;
        }
        if let Some(v) = self.epsilon {
            s.lyapunov.epsilon = v;
        }
        Ok(s)
    }
}

pub fn mean_field_start(sec: &ClassicalSection, p: &BoseHubbardParams) -> Vec<C64> {
    match sec.initial {
        ClassicalStart::Vacuum => vec![C64::new(0.0, 0.0); p.n_sites],
        ClassicalStart::Coherent => vec![default_coherent_amplitude(p.detuning, p.drive, p.loss); p.n_sites],
    }
}

/// Limit cycle when the exponent is statistically zero, otherwise by sign.
pub fn classify_lyapunov(r: &LyapunovResult) -> &'static str {
    if r.consistent_with_zero {
        "limit-cycle"
    } else if r.lambda_max > 0.0 {
        "chaotic"
    } else {
        "fixed-point"
    }
}

#[derive(Args, Debug)]
pub struct ClassicalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub flags: LyapunovFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the mean-field orbit to this CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Length of the written orbit.
    #[arg(long, default_value_t = 100.0)]
    pub trace_time: f64,
}

pub fn classical(a: &ClassicalArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let sec = a.flags.apply(&file)?;
    let mc = a.model.resolve(&file, ModelConfig::default_for("bose-hubbard")?)?;
    let p = mc.mean_field()?;
    let y0 = mean_field_start(&sec, &p);
    let res = lyapunov_max(&y0, &p, &sec.lyapunov)?;
    let class = classify_lyapunov(&res);
    log::info!("Lambda = {:.4} +- {:.4}: {class}", res.lambda_max, res.std_error);
    let meta = Meta::new(
        "classical",
        FileConfig {
            model: Some(mc),
            classical: section(&sec),
            ..Default::default()
        },
    );
    if let Some(path) = &a.trace_out {
        let every = ((0.05 / sec.lyapunov.dt).round() as usize).max(1);
        let tr = integrate_classical(&y0, &p, a.trace_time, sec.lyapunov.dt, every)?;
        let meta = meta.clone().note("trace_time", a.trace_time);
        let mut w = csv_writer(Some(path), &meta)?;
        let mut header = vec!["t".to_string()];
        for j in 0..p.n_sites {
            header.push(format!("re_alpha{j}"));
            header.push(format!("im_alpha{j}"));
        }
        w.write_record(&header)?;
        for (t, y) in tr.times.iter().zip(&tr.states) {
            let mut row = vec![format!("{t}")];
            for z in y {
                row.push(format!("{:e}", z.re));
                row.push(format!("{:e}", z.im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    #[derive(Serialize)]
    struct Out<'a> {
        classification: &'a str,
        initial: Vec<C64>,
        lyapunov: LyapunovResult,
    }
    emit_json(
        a.out.as_deref(),
        &meta,
        &Out {
            classification: class,
            initial: y0,
            lyapunov: res,
        },
    )
}

// ---------------------------------------------------------------- twa

#[derive(Args, Clone, Debug, Default)]
pub struct TwaFlags {
    #[arg(long)]
    pub twa_trajectories: Option<usize>,
    #[arg(long)]
    pub twa_dt: Option<f64>,
    #[arg(long)]
    pub t_relax: Option<f64>,
    #[arg(long)]
    pub t_measure: Option<f64>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    #[arg(long)]
    pub twa_seed: Option<u64>,
}

impl TwaFlags {
    pub fn apply(&self, file: &FileConfig) -> Result<TwaSection, CliError> {
        let mut s: TwaSection = file.section(|f| &f.twa)?;
        let c = &mut s.twa;
        if let Some(v) = self.twa_trajectories {
            c.trajectories = v;
        }
        if let Some(v) = self.twa_dt {
            c.dt = v;
        }
        if let Some(v) = self.t_relax {
            c.t_relax = v;
        }
        if let Some(v) = self.t_measure {
            c.t_measure = v;
        }
        if let Some(v) = self.sample_interval {
            c.sample_interval = v;
        }
        if let Some(v) = self.twa_seed {
            c.base_seed = v;
        }
        if c.trajectories == 0 {
            return Err(CliError::Usage("need at least one TWA trajectory".into()));
        }
        Ok(s)
    }
}

#[derive(Args, Debug)]
pub struct TwaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub flags: TwaFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn twa(a: &TwaArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let sec = a.flags.apply(&file)?;
    let mc = a.model.resolve(&file, ModelConfig::default_for("bose-hubbard")?)?;
    let p = mc.mean_field()?;
    let res = semiclassical_otoc(&p, &sec.twa)?;
    log::info!("D_ss = {:.4} +- {:.4}", res.d_ss, res.std_error);
    let meta = Meta::new(
        "twa",
        FileConfig {
            model: Some(mc),
            twa: section(&sec),
            ..Default::default()
        },
    );
    emit_json(a.out.as_deref(), &meta, &res)
}

// ---------------------------------------------------------------- otoc

#[derive(Args, Debug)]
pub struct OtocArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Forward time from the default coherent state; the steady state when absent.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub n_tau: Option<usize>,
    /// Mode carrying the quadratures.
    #[arg(long)]
    pub mode: Option<usize>,
}

pub fn otoc(a: &OtocArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let mut sec: OtocSection = file.section(|f| &f.otoc)?;
    if a.t.is_some() {
        sec.t = a.t;
    }
    if let Some(v) = a.tau_max {
        sec.tau_max = v;
    }
    if let Some(v) = a.n_tau {
        sec.n_tau = v;
    }
    if let Some(v) = a.mode {
        sec.mode = v;
    }
    if sec.n_tau < 1 || !(sec.tau_max >= 0.0) {
        return Err(CliError::Usage("need n_tau >= 1 and tau_max >= 0".into()));
    }
    let fallback = ModelConfig::Kerr(KerrParams {
        detuning: 10.0,
        interaction: 10.0,
        drive: 3.5,
        loss: 1.0,
        cutoff: 30,
    });
    let mc = a.model.resolve(&file, fallback)?;
    let model = mc.build()?;
    let (fwd, o1) = eigenbasis(&model, &a.run)?;
    let (bwd, o2) = eigenbasis(&model.with_reversed_hamiltonian(), &a.run)?;
    let (q, p) = quadratures(model.space(), sec.mode)?;
    let (rho_in, t) = match sec.t {
        None => (fwd.steady_state()?, 0.0),
        Some(t) => {
            let alpha = coherent_alpha(None, &mc)?;
            let psi = product(
                &model
                    .space()
                    .factor_dims()
                    .iter()
                    .map(|&d| coherent(d, alpha))
                    .collect::<Vec<_>>(),
            );
            (Operator::projector(model.space(), &psi)?, t)
        }
    };
    let tau: Vec<f64> = if sec.n_tau == 1 {
        vec![0.0]
    } else {
        (0..sec.n_tau)
            .map(|k| sec.tau_max * k as f64 / (sec.n_tau - 1) as f64)
            .collect()
    };
    let series = quantum_otoc_with(&fwd, &bwd, &rho_in, t, &tau, &q, &p)?;
    let meta = Meta::new(
        "otoc",
        FileConfig {
            model: Some(mc),
            otoc: section(&sec),
            ..Default::default()
        },
    )
    .note("cache", [outcome_name(o1), outcome_name(o2)])
    .note("max_imag", series.max_imag);
    let mut w = csv_writer(a.run.out.as_deref(), &meta)?;
    w.write_record(["tau", "otoc"])?;
    for (t, v) in series.tau.iter().zip(&series.values) {
        w.write_record([format!("{t}"), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- hstats

#[derive(Args, Debug)]
pub struct HstatsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Thermodynamic scales L, comma separated.
    #[arg(long)]
    pub scales: Option<String>,
    /// M_max values, comma separated.
    #[arg(long)]
    pub m_max: Option<String>,
    /// Largest Fock cutoff tried while converging levels.
    #[arg(long)]
    pub max_cutoff: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn hstats(a: &HstatsArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let mut sec: HstatsSection = file.section(|f| &f.hstats)?;
    if let Some(s) = &a.scales {
        sec.scales = parse_list(s, "scales")?;
    }
    if let Some(s) = &a.m_max {
        sec.m_max = parse_list(s, "m-max")?;
    }
    if let Some(v) = a.max_cutoff {
        sec.max_cutoff = v;
    }
    let fallback = ModelConfig::BoseHubbard(BoseHubbardParams {
        loss: 0.0,
        ..BoseHubbardParams::dimer(2.5, 2.9, 10)
    });
    let mc = a.model.resolve(&file, fallback)?;
    let p = mc.bose_hubbard()?.clone();
    let rows = r_vs_cutoff_curve(&p, &sec.scales, &sec.m_max, sec.max_cutoff)?;
    let meta = Meta::new(
        "hstats",
        FileConfig {
            model: Some(mc),
            hstats: section(&sec),
            ..Default::default()
        },
    );
    let mut w = csv_writer(a.out.as_deref(), &meta)?;
    w.write_record(["scale", "m_max", "mean_r", "n_levels", "cutoff", "poisson", "wigner_dyson"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.scale),
            r.m_max.to_string(),
            format!("{:.6}", r.mean_r),
            r.n_levels.to_string(),
            r.cutoff.to_string(),
            format!("{}", reference::POISSON_1D_MEAN_R),
            format!("{}", reference::WIGNER_DYSON_MEAN_R),
        ])?;
    }
    w.flush()?;
    Ok(())
}
