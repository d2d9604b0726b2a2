//! Resumable parameter sweeps. Rows are appended and flushed as points
//! finish; a rerun reads the existing file and skips completed points.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::Args;
use dqchaos::classical::{lyapunov_max, semiclassical_otoc};
use dqchaos::observables::poisson_deviation;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{
    classify, classify_lyapunov, eigenbasis, mean_field_start, run_ssqt, LyapunovFlags, SsqtFlags, TwaFlags,
};
use crate::config::{Axis, FileConfig, ModelArgs, ModelConfig};
use crate::meta::{section, Meta, CSV_META_PREFIX};
use crate::{CliError, RunArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Ssqt,
    Lyapunov,
    TwaOtoc,
    Deltan,
}

impl Task {
    fn parse(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
            CliError::Usage(format!("unknown task {s:?}; expected ssqt, lyapunov, twa-otoc or deltan"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub axis: Axis,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl AxisRange {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points)
            .map(|k| self.start + (self.end - self.start) * k as f64 / (self.points - 1) as f64)
            .collect()
    }

    fn column(&self) -> &'static str {
        match self.axis {
            Axis::Detuning => "detuning",
            Axis::Drive => "drive",
        }
    }
}

/// `"detuning=a:b:n,drive=c:d:m"`; `Δ`/`delta` and `F`/`f` are accepted.
pub fn parse_grid(s: &str) -> Result<Vec<AxisRange>, CliError> {
    let bad = |m: String| CliError::Usage(format!("--grid {s:?}: {m}"));
    let mut out: Vec<AxisRange> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, range) = part.split_once('=').ok_or_else(|| bad(format!("missing '=' in {part:?}")))?;
        let axis = match name.trim() {
            "detuning" | "delta" | "Delta" | "Δ" => Axis::Detuning,
            "drive" | "F" | "f" => Axis::Drive,
            other => return Err(bad(format!("unknown axis {other:?}"))),
        };
        let f: Vec<&str> = range.split(':').collect();
        if f.len() != 3 {
            return Err(bad(format!("expected start:end:points in {range:?}")));
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(format!("not a number: {x:?}")));
        let points: usize = f[2].trim().parse().map_err(|_| bad(format!("bad point count {:?}", f[2])))?;
        if points == 0 {
            return Err(bad("point count must be positive".into()));
        }
        if out.iter().any(|a| a.axis == axis) {
            return Err(bad(format!("axis {axis:?} given twice")));
        }
        out.push(AxisRange {
            axis,
            start: num(f[0])?,
            end: num(f[1])?,
            points,
        });
    }
    if out.is_empty() {
        return Err(bad("no axes".into()));
    }
    Ok(out)
}

/// Cartesian product, first axis outermost.
pub fn grid_points(axes: &[AxisRange]) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for a in axes {
        let vals = a.values();
        pts = pts
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub grid: String,
    pub task: Task,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Axes, e.g. "detuning=-4:8:13,drive=1:5:9".
    #[arg(long)]
    pub grid: Option<String>,
    /// ssqt, lyapunov, twa-otoc or deltan.
    #[arg(long)]
    pub task: Option<String>,
    /// Grid points evaluated in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub ssqt: SsqtFlags,
    #[command(flatten)]
    pub lyapunov: LyapunovFlags,
    #[command(flatten)]
    pub twa: TwaFlags,
}

fn columns(task: Task, axes: &[AxisRange], n_modes: usize) -> Vec<String> {
    let mut c: Vec<String> = axes.iter().map(|a| a.column().to_string()).collect();
    let extra: Vec<String> = match task {
        Task::Ssqt => [
            "n_lambda",
            "n_lambda_se",
            "mean_r",
            "mean_r_se",
            "neg_mean_cos_theta",
            "neg_mean_cos_theta_se",
            "c_min",
            "classification",
        ]
        .map(String::from)
        .to_vec(),
        Task::Lyapunov => ["lambda_max", "std_error", "classification"].map(String::from).to_vec(),
        Task::TwaOtoc => ["d_ss", "std_error"].map(String::from).to_vec(),
        Task::Deltan => (0..n_modes).map(|j| format!("deltan_mode{j}")).collect(),
    };
    c.extend(extra);
    c
}

/// Existing rows of a previous run, keyed by their axis values. Fails when
/// the file was produced by a different configuration.
fn completed(path: &Path, meta: &Meta, n_axes: usize, n_cols: usize) -> Result<HashSet<Vec<u64>>, CliError> {
    let text = std::fs::read_to_string(path)?;
    // A final line without its newline was cut off mid-write, whatever it
    // parses as.
    let body = match text.rfind('\n') {
        Some(i) if i + 1 < text.len() => &text[..=i],
        None if !text.is_empty() => "",
        _ => text.as_str(),
    };
    let mut done = HashSet::new();
    let mut saw_meta = false;
    for (k, line) in body.lines().enumerate() {
        if let Some(m) = line.strip_prefix(CSV_META_PREFIX) {
            let old: Meta = serde_json::from_str(m)
                .map_err(|e| CliError::Usage(format!("{}: unreadable metadata: {e}", path.display())))?;
            let same = serde_json::to_value(&old.config).ok() == serde_json::to_value(&meta.config).ok();
            if !same {
                return Err(CliError::Usage(format!(
                    "{} was written by a different configuration; choose another --out",
                    path.display()
                )));
            }
            saw_meta = true;
            continue;
        }
        if line.starts_with('#') || k <= 1 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let key: Option<Vec<u64>> = fields
            .iter()
            .take(n_axes)
            .map(|x| x.parse::<f64>().ok().map(f64::to_bits))
            .collect();
        match key {
            Some(key) if fields.len() == n_cols => {
                done.insert(key);
            }
            // A torn final line from an interrupted run is redone.
            _ => log::warn!("{}: ignoring malformed line {}", path.display(), k + 1),
        }
    }
    if !saw_meta {
        return Err(CliError::Usage(format!("{} has no metadata line", path.display())));
    }
    Ok(done)
}

struct Ctx<'a> {
    task: Task,
    base: &'a ModelConfig,
    axes: &'a [AxisRange],
    file: &'a FileConfig,
    args: &'a SweepArgs,
}

fn evaluate(ctx: &Ctx, point: &[f64]) -> Result<Vec<String>, CliError> {
    let mut mc = ctx.base.clone();
    for (a, &v) in ctx.axes.iter().zip(point) {
        mc.set_axis(a.axis, v)?;
    }
    let f = |x: f64| format!("{x:e}");
    Ok(match ctx.task {
        Task::Ssqt => {
            let sec = ctx.args.ssqt.apply(ctx.file)?;
            let (o, _, _) = run_ssqt(&sec, &mc, &ctx.args.run)?;
            let r = &o.report;
            vec![
                f(r.n_lambda.mean),
                f(r.n_lambda.std_error),
                f(r.mean_r.mean),
                f(r.mean_r.std_error),
                f(r.neg_mean_cos_theta.mean),
                f(r.neg_mean_cos_theta.std_error),
                f(r.c_min),
                classify(r.neg_mean_cos_theta.mean).to_string(),
            ]
        }
        Task::Lyapunov => {
            let sec = ctx.args.lyapunov.apply(ctx.file)?;
            let p = mc.mean_field()?;
            let r = lyapunov_max(&mean_field_start(&sec, &p), &p, &sec.lyapunov)?;
            vec![f(r.lambda_max), f(r.std_error), classify_lyapunov(&r).to_string()]
        }
        Task::TwaOtoc => {
            let sec = ctx.args.twa.apply(ctx.file)?;
            let r = semiclassical_otoc(&mc.mean_field()?, &sec.twa)?;
            vec![f(r.d_ss), f(r.std_error)]
        }
        Task::Deltan => {
            let model = mc.build()?;
            let (spec, _) = eigenbasis(&model, &ctx.args.run)?;
            let rho = spec.steady_state()?;
            (0..model.space().n_factors())
                .map(|j| poisson_deviation(&rho, j).map(f))
                .collect::<Result<_, _>>()?
        }
    })
}

pub fn run(a: &SweepArgs) -> Result<(), CliError> {
    let file = a.model.file()?;
    let stored: Option<SweepSection> = match &file.sweep {
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("sweep section: {e}")))?),
        None => None,
    };
    let grid = a
        .grid
        .clone()
        .or_else(|| stored.as_ref().map(|s| s.grid.clone()))
        .ok_or_else(|| CliError::Usage("sweep needs --grid".into()))?;
    let task = match (&a.task, &stored) {
        (Some(t), _) => Task::parse(t)?,
        (None, Some(s)) => s.task,
        (None, None) => return Err(CliError::Usage("sweep needs --task".into())),
    };
    let axes = parse_grid(&grid)?;
    let out: PathBuf = a
        .run
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("sweep needs --out (the file is also the resume record)".into()))?;
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let base = a.model.resolve(&file, ModelConfig::default_for("bose-hubbard")?)?;
    for ax in &axes {
        base.clone().set_axis(ax.axis, ax.start)?;
    }

    // Only the section the task reads goes into the metadata.
    let mut cfg = FileConfig {
        model: Some(base.clone()),
        sweep: section(&SweepSection { grid: grid.clone(), task }),
        ..Default::default()
    };
    match task {
        Task::Ssqt => cfg.ssqt = section(&a.ssqt.apply(&file)?),
        Task::Lyapunov => cfg.classical = section(&a.lyapunov.apply(&file)?),
        Task::TwaOtoc => cfg.twa = section(&a.twa.apply(&file)?),
        Task::Deltan => {}
    }
    let meta = Meta::new("sweep", cfg.clone());
    let n_modes = base.build()?.space().n_factors();
    let header = columns(task, &axes, n_modes);
    let done = if out.exists() {
        completed(&out, &meta, axes.len(), header.len())?
    } else {
        HashSet::new()
    };
    let points = grid_points(&axes);
    let todo: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| {
            let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
            let skip = done.contains(&key);
            if skip {
                log::info!("skipping completed point {p:?}");
            }
            !skip
        })
        .cloned()
        .collect();
    log::info!(
        "sweep {task:?}: {} points, {} already done, {} to run on {} worker(s)",
        points.len(),
        points.len() - todo.len(),
        todo.len(),
        a.jobs
    );

    let fresh = !out.exists();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    if !fresh {
        // Drop a row torn by an interrupted run.
        let bytes = std::fs::read(&out)?;
        if !bytes.ends_with(b"\n") {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            std::fs::OpenOptions::new().write(true).open(&out)?.set_len(keep as u64)?;
        }
    }
    let mut fh = std::fs::OpenOptions::new().create(true).append(true).open(&out)?;
    if fresh {
        writeln!(fh, "# {}", meta.csv_line())?;
        writeln!(fh, "{}", header.join(","))?;
        fh.flush()?;
    }
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(false).from_writer(fh));

    let ctx = Ctx {
        task,
        base: &base,
        axes: &axes,
        file: &cfg,
        args: a,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let failures: Vec<CliError> = pool.install(|| {
        todo.par_iter()
            .filter_map(|p| {
                let res = evaluate(&ctx, p).and_then(|vals| {
                    let mut row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
                    row.extend(vals);
                    let mut w = writer.lock().unwrap_or_else(|e| e.into_inner());
                    w.write_record(&row)?;
                    w.flush()?;
                    Ok(())
                });
                match res {
                    Ok(()) => {
                        log::info!("finished point {p:?}");
                        None
                    }
                    Err(e) => {
                        log::error!("point {p:?} failed: {e}");
                        Some(e)
                    }
                }
            })
            .collect()
    });
    match failures.into_iter().next() {
        None => Ok(()),
        Some(e) => Err(e),
    }
}
