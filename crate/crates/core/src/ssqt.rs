//! Spectral statistics of quantum trajectories.
//!
//! Each trajectory snapshot `|psi_m(t)><psi_m(t)| = sum_j c_{m,j} eta_j` is
//! projected on the Liouvillian eigenbasis; eigenvalues with
//! `|c_{m,j}| > c_min` form the relevant set, whose size is `N_lambda` and
//! whose level statistics classify the dynamics seen by the trajectory.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::LiouvillianSpectrum;
use crate::states::InitialState;
use crate::stats::{self, Histogram};
use crate::trajectories::{run_ensemble, TrajectoryConfig, TrajectoryEngine};

/// Below this many relevant eigenvalues `-<cos theta>` is reported as 0.
pub const MIN_SET_FOR_COS: usize = 100;
pub const DEFAULT_K: u32 = 3;
/// Log-spaced bins of the weight histogram.
pub const WEIGHT_HIST_LO: f64 = 1e-12;
pub const WEIGHT_HIST_HI: f64 = 1.0;
pub const WEIGHT_BINS_PER_DECADE: usize = 20;

/// Spectral weights of one trajectory snapshot, aligned with the spectrum's
/// eigenvalue order.
#[derive(Clone, Debug)]
pub struct WeightedSpectrum {
    pub trajectory: u64,
    pub t: f64,
    pub weights: Vec<C64>,
}

impl WeightedSpectrum {
    pub fn n_lambda(&self, c_min: f64) -> usize {
        self.weights.iter().filter(|c| c.norm() > c_min).count()
    }
}

/// `c_{m,j} = Tr[sigma_j^dagger |psi><psi|]`.
pub fn trajectory_weights(spec: &LiouvillianSpectrum, psi: &[C64]) -> Result<Vec<C64>> {
    Ok(spec.pure_state_weights(&[psi.to_vec()])?.pop().expect("one state"))
}

/// Scale on which the mean and deviation of `p(|c|)` are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CminScale {
    /// `C` and `sigma` of `|c|` itself; `sigma` is the second central moment.
    Linear,
    /// `C` and `sigma` (standard deviation) of `log10 |c|`; `c_min = 10^(C - k sigma)`.
    #[default]
    Log,
}

/// The resolved weight cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CminRule {
    pub k: u32,
    pub scale: CminScale,
    /// Mean of `p(|c|)` on the chosen scale.
    pub mean_c: f64,
    /// Deviation of `p(|c|)` on the chosen scale.
    pub sigma_c: f64,
    pub c_min: f64,
    /// Weights below the histogram range, excluded from the moments.
    pub below_range: usize,
}

/// Builds the log-binned `p(|c|)` over all trajectories and eigen-indices
/// and returns `c_min = C - k sigma` (floored at zero).
pub fn resolve_cmin(weight_sets: &[WeightedSpectrum], k: u32, scale: CminScale) -> Result<CminRule> {
    let decades = (WEIGHT_HIST_HI / WEIGHT_HIST_LO).log10();
    let nbins = (decades * WEIGHT_BINS_PER_DECADE as f64).round() as usize;
    let lo = WEIGHT_HIST_LO.log10();
    let width = decades / nbins as f64;
    let mut counts = vec![0usize; nbins];
    let mut below = 0usize;
    for ws in weight_sets {
        for c in &ws.weights {
            let a = c.norm();
            if !(a >= WEIGHT_HIST_LO) {
                below += 1;
                continue;
            }
            let b = (((a.log10() - lo) / width) as usize).min(nbins - 1);
            counts[b] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("no spectral weights inside the histogram range".into()));
    }
    let centers: Vec<f64> = (0..nbins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let (mean_c, sigma_c, c_min) = match scale {
        CminScale::Linear => {
            let vals: Vec<f64> = centers.iter().map(|x| 10f64.powf(*x)).collect();
            let mean: f64 = p.iter().zip(&vals).map(|(p, v)| p * v).sum();
            let var: f64 = p.iter().zip(&vals).map(|(p, v)| p * (v - mean).powi(2)).sum();
            (mean, var, (mean - k as f64 * var).max(0.0))
        }
        CminScale::Log => {
            let mean: f64 = p.iter().zip(&centers).map(|(p, v)| p * v).sum();
            let var: f64 = p.iter().zip(&centers).map(|(p, v)| p * (v - mean).powi(2)).sum();
            let sd = var.sqrt();
            (mean, sd, 10f64.powf(mean - k as f64 * sd))
        }
    };
    Ok(CminRule {
        k,
        scale,
        mean_c,
        sigma_c,
        c_min,
        below_range: below,
    })
}

/// Indices `j` with `|c_j| > c_min`.
pub fn select_relevant(weights: &[C64], c_min: f64) -> Vec<usize> {
    weights
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > c_min)
        .map(|(j, _)| j)
        .collect()
}

/// How `c_min` is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CminChoice {
    /// From the weight distribution of the snapshot being analysed.
    Rule { k: u32, scale: CminScale },
    Fixed { c_min: f64 },
}

impl Default for CminChoice {
    fn default() -> Self {
        Self::Rule {
            k: DEFAULT_K,
            scale: CminScale::default(),
        }
    }
}

/// Removal of eigenvalues near the real axis before statistics.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BulkChoice {
    Off,
    /// `stats::BULK_EPS_FACTOR` times the median `|Im|` nearest-neighbour
    /// displacement of the full Liouvillian spectrum.
    #[default]
    Auto,
    Fixed { eps: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsqtConfig {
    pub t_snapshot: f64,
    pub trajectories: usize,
    pub base_seed: u64,
    pub initial: InitialState,
    pub dynamics: TrajectoryConfig,
    #[serde(default)]
    pub cmin: CminChoice,
    #[serde(default)]
    pub bulk: BulkChoice,
    /// Also compute statistics on the union of all relevant sets.
    #[serde(default)]
    pub pooled: bool,
}

/// Indicators of one trajectory's relevant set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryIndicators {
    pub trajectory: u64,
    pub n_lambda: usize,
    /// Relevant eigenvalues left after the bulk filter.
    pub n_bulk: usize,
    pub mean_r: Option<f64>,
    /// Set to 0 when `n_lambda < MIN_SET_FOR_COS`.
    pub neg_mean_cos_theta: f64,
    pub jumps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, std_error, n }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PooledStats {
    pub n_points: usize,
    pub mean_r: f64,
    pub neg_mean_cos_theta: f64,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SsqtReport {
    pub t: f64,
    pub c_min: f64,
    pub cmin_rule: Option<CminRule>,
    pub bulk_eps: f64,
    pub n_lambda: MeanSe,
    pub mean_r: MeanSe,
    pub neg_mean_cos_theta: MeanSe,
    pub per_trajectory: Vec<TrajectoryIndicators>,
    pub pooled: Option<PooledStats>,
    /// Union of relevant eigenvalue indices over all trajectories.
    pub selected_union: Vec<usize>,
    pub base_seed: u64,
    pub trajectories: usize,
}

pub fn resolve_bulk_eps(spec: &LiouvillianSpectrum, bulk: &BulkChoice) -> Result<f64> {
    Ok(match bulk {
        BulkChoice::Off => 0.0,
        BulkChoice::Auto => stats::default_bulk_eps(spec.eigenvalues())?,
        BulkChoice::Fixed { eps } => *eps,
    })
}

/// Indicators of a relevant set. `n_lambda` is the set size before filtering.
pub fn set_indicators(eigs: &[C64], bulk_eps: f64) -> (usize, Option<f64>, f64) {
    let (bulk, _) = stats::bulk_filter(eigs, bulk_eps);
    let n_bulk = bulk.len();
    if n_bulk < 3 {
        return (n_bulk, None, 0.0);
    }
    match stats::unfold_complex(&bulk) {
        Ok(s) => {
            let cos = if eigs.len() < MIN_SET_FOR_COS {
                0.0
            } else {
                s.neg_mean_cos_theta()
            };
            (n_bulk, Some(s.mean_r()), cos)
        }
        Err(_) => (n_bulk, None, 0.0),
    }
}

/// Full procedure at one snapshot time: evolve `trajectories` quantum
/// trajectories, project, select, and compute per-trajectory indicators.
pub fn ssqt_statistics(
    spec: &LiouvillianSpectrum,
    engine: &TrajectoryEngine,
    cfg: &SsqtConfig,
) -> Result<SsqtReport> {
    if cfg.trajectories < 1 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    let records = run_ensemble(
        engine,
        &cfg.initial,
        &[cfg.t_snapshot],
        cfg.trajectories,
        cfg.base_seed,
        &cfg.dynamics,
    )?;
    let states: Vec<Vec<C64>> = records.iter().map(|r| r.samples[0].clone()).collect();
    let weights = spec.pure_state_weights(&states)?;
    let sets: Vec<WeightedSpectrum> = records
        .iter()
        .zip(weights)
        .map(|(r, w)| WeightedSpectrum {
            trajectory: r.index,
            t: cfg.t_snapshot,
            weights: w,
        })
        .collect();
    let (c_min, rule) = match &cfg.cmin {
        CminChoice::Fixed { c_min } => (*c_min, None),
        CminChoice::Rule { k, scale } => {
            let r = resolve_cmin(&sets, *k, *scale)?;
            (r.c_min, Some(r))
        }
    };
    let bulk_eps = resolve_bulk_eps(spec, &cfg.bulk)?;
    let eigs = spec.eigenvalues();

    let mut per = Vec::with_capacity(sets.len());
    let mut union = vec![false; eigs.len()];
    for (ws, rec) in sets.iter().zip(&records) {
        let idx = select_relevant(&ws.weights, c_min);
        for &j in &idx {
            union[j] = true;
        }
        let sel: Vec<C64> = idx.iter().map(|&j| eigs[j]).collect();
        let (n_bulk, mean_r, cos) = set_indicators(&sel, bulk_eps);
        per.push(TrajectoryIndicators {
            trajectory: ws.trajectory,
            n_lambda: idx.len(),
            n_bulk,
            mean_r,
            neg_mean_cos_theta: cos,
            jumps: rec.jump_log.len(),
        });
    }

    let pooled = if cfg.pooled {
        // Identical eigenvalues chosen by several trajectories enter once.
        let chosen: Vec<C64> = union
            .iter()
            .enumerate()
            .filter(|(_, &u)| u)
            .map(|(j, _)| eigs[j])
            .collect();
        let (bulk, _) = stats::bulk_filter(&chosen, bulk_eps);
        let s = stats::unfold_complex(&bulk)?;
        Some(PooledStats {
            n_points: bulk.len(),
            mean_r: s.mean_r(),
            neg_mean_cos_theta: if chosen.len() < MIN_SET_FOR_COS {
                0.0
            } else {
                s.neg_mean_cos_theta()
            },
            histogram: Histogram::standard(&s.unfolded_spacings),
        })
    } else {
        None
    };

    let n_l: Vec<f64> = per.iter().map(|p| p.n_lambda as f64).collect();
    let rs: Vec<f64> = per.iter().filter_map(|p| p.mean_r).collect();
    let cs: Vec<f64> = per.iter().map(|p| p.neg_mean_cos_theta).collect();
    Ok(SsqtReport {
        t: cfg.t_snapshot,
        c_min,
        cmin_rule: rule,
        bulk_eps,
        n_lambda: MeanSe::of(&n_l),
        mean_r: MeanSe::of(&rs),
        neg_mean_cos_theta: MeanSe::of(&cs),
        per_trajectory: per,
        pooled,
        selected_union: union
            .iter()
            .enumerate()
            .filter(|(_, &u)| u)
            .map(|(j, _)| j)
            .collect(),
        base_seed: cfg.base_seed,
        trajectories: cfg.trajectories,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NLambdaPoint {
    pub t: f64,
    pub n_lambda: MeanSe,
    /// Per-trajectory values at this time.
    pub values: Vec<usize>,
}

/// `N_lambda(t)` averaged over trajectories, at fixed `c_min`.
pub fn n_lambda_series(
    spec: &LiouvillianSpectrum,
    engine: &TrajectoryEngine,
    initial: &InitialState,
    t_grid: &[f64],
    trajectories: usize,
    base_seed: u64,
    dynamics: &TrajectoryConfig,
    c_min: f64,
) -> Result<Vec<NLambdaPoint>> {
    let records = run_ensemble(engine, initial, t_grid, trajectories, base_seed, dynamics)?;
    let mut out = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        let states: Vec<Vec<C64>> = records.iter().map(|r| r.samples[i].clone()).collect();
        let weights = spec.pure_state_weights(&states)?;
        let values: Vec<usize> = weights
            .iter()
            .map(|w| w.iter().filter(|c| c.norm() > c_min).count())
            .collect();
        let as_f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        out.push(NLambdaPoint {
            t,
            n_lambda: MeanSe::of(&as_f),
            values,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{assemble, diagonalize};
    use crate::models::{build_kerr_resonator, KerrParams};
    use crate::operator::Operator;
    use crate::states::coherent;
    use proptest::prelude::*;

    fn kerr_spec() -> (crate::models::ModelSpec, LiouvillianSpectrum) {
        let m = build_kerr_resonator(&KerrParams {
            detuning: 1.0,
            interaction: 1.0,
            drive: 1.2,
            loss: 1.0,
            cutoff: 5,
        })
        .unwrap();
        let s = diagonalize(assemble(&m).unwrap(), false).unwrap();
        (m, s)
    }

    #[test]
    fn weights_reconstruct_projector() {
        let (m, spec) = kerr_spec();
        let psi = coherent(6, C64::new(0.4, -0.8));
        let c = trajectory_weights(&spec, &psi).unwrap();
        let rho = Operator::projector(m.space(), &psi).unwrap();
        assert!(spec.reconstruct(&c).unwrap().max_abs_diff(&rho) < 1e-10);
    }

    #[test]
    fn cmin_zero_selects_all_and_k0_is_mean() {
        let (_, spec) = kerr_spec();
        let psi = coherent(6, C64::new(0.4, -0.8));
        let c = trajectory_weights(&spec, &psi).unwrap();
        assert_eq!(select_relevant(&c, 0.0).len(), spec.dim() - c.iter().filter(|z| z.norm() == 0.0).count());
        let ws = vec![WeightedSpectrum {
            trajectory: 0,
            t: 0.0,
            weights: c,
        }];
        for scale in [CminScale::Linear, CminScale::Log] {
            let r = resolve_cmin(&ws, 0, scale).unwrap();
            let expect = match scale {
                CminScale::Linear => r.mean_c,
                CminScale::Log => 10f64.powf(r.mean_c),
            };
            assert!((r.c_min - expect).abs() <= 1e-15 * expect.abs().max(1.0));
        }
        assert!(resolve_cmin(&[], 3, CminScale::Log).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn n_lambda_antitone_in_cmin(a in 1e-12f64..1.0, b in 1e-12f64..1.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let (_, spec) = kerr_spec();
            let c = trajectory_weights(&spec, &coherent(6, C64::new(re, im))).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(select_relevant(&c, hi).len() <= select_relevant(&c, lo).len());
        }
    }
}
