//! Photon-counting quantum trajectories (Monte-Carlo wave function).
//!
//! Each step jumps with probability `dp = dt sum_mu gamma_mu <L_mu^dag L_mu>`,
//! choosing the channel with weight `gamma_mu <L_mu^dag L_mu>`; otherwise the
//! state evolves under `H_nh = H - (i/2) sum_mu gamma_mu L_mu^dag L_mu` and is
//! renormalized. Jumps happen on step boundaries.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::operator::{normalize, Operator};
use crate::states::InitialState;

pub const DEFAULT_DP_MAX: f64 = 0.05;
/// Largest tolerated population in the two highest Fock levels of a mode.
pub const CUTOFF_POPULATION_WARN: f64 = 1e-3;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Compressed sparse rows.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    pub fn from_operator(op: &Operator) -> Self {
        let n = op.dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for (i, j, v) in op.nonzeros() {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for (j, v) in r {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_into(&self, x: &[C64], out: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// `psi <- (1 - i dt H_nh) psi`, then normalize.
    #[default]
    Euler,
    /// Adds the `-(dt^2/2) H_nh^2 psi` term to the no-jump update.
    SecondOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_dp_max")]
    pub dp_max: f64,
    /// Track the population of the top two Fock levels of every factor.
    #[serde(default)]
    pub check_cutoff: bool,
}

fn default_dp_max() -> f64 {
    DEFAULT_DP_MAX
}

impl TrajectoryConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            integrator: Integrator::Euler,
            dp_max: DEFAULT_DP_MAX,
            check_cutoff: false,
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_cutoff_check(mut self, on: bool) -> Self {
        self.check_cutoff = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.dp_max > 0.0 && self.dp_max < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dp_max must lie in (0, 1), got {}",
                self.dp_max
            )));
        }
        Ok(())
    }
}

/// A model compiled for fast state-vector updates.
#[derive(Clone, Debug)]
pub struct TrajectoryEngine {
    model: ModelSpec,
    h_nh: CsrMatrix,
    jumps: Vec<(CsrMatrix, f64)>,
}

impl TrajectoryEngine {
    pub fn new(model: &ModelSpec) -> Self {
        let mut h_nh = model.hamiltonian().clone();
        let mut jumps = Vec::new();
        for j in model.jumps() {
            if j.rate == 0.0 {
                continue;
            }
            let ldl = &j.op.adjoint() * &j.op;
            h_nh = &h_nh - &ldl.scale(C64::new(0.0, 0.5 * j.rate));
            jumps.push((CsrMatrix::from_operator(&j.op), j.rate));
        }
        Self {
            model: model.clone(),
            h_nh: CsrMatrix::from_operator(&h_nh),
            jumps,
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Per-channel jump weights `gamma_mu |L_mu psi|^2` (before the `dt` factor).
    pub fn jump_weights(&self, psi: &[C64]) -> Vec<f64> {
        let mut buf = vec![ZERO; psi.len()];
        self.jumps
            .iter()
            .map(|(l, g)| {
                l.mul_into(psi, &mut buf);
                g * buf.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .collect()
    }

    /// Largest population held by the top two levels of any tensor factor.
    pub fn top_level_population(&self, psi: &[C64]) -> f64 {
        let space = self.model.space();
        let dims = space.factor_dims();
        let mut worst: f64 = 0.0;
        for (f, &d) in dims.iter().enumerate() {
            if d < 3 {
                continue;
            }
            let mut pop = 0.0;
            for (idx, z) in psi.iter().enumerate() {
                let digit = space.unflatten(idx)[f];
                if digit + 2 >= d {
                    pop += z.norm_sqr();
                }
            }
            worst = worst.max(pop);
        }
        worst
    }
}

/// One quantum trajectory in flight.
#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub psi: Vec<C64>,
    pub t: f64,
    pub rng: ChaCha8Rng,
    /// `(time, channel index)` of every jump, channel indices counting only
    /// channels with nonzero rate.
    pub jump_log: Vec<(f64, usize)>,
    /// `t = anchor + steps * dt`, so regular steps do not accumulate
    /// rounding; `anchor` moves when a shortened step lands on a grid time.
    anchor: f64,
    steps: u64,
    scratch: Vec<C64>,
    scratch2: Vec<C64>,
}

/// Stream for the dynamics of trajectory `index`; `+1` is reserved for
/// sampling its initial state.
pub fn trajectory_rng(base_seed: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(2 * index + purpose);
    rng
}

impl TrajectoryState {
    pub fn new(mut psi: Vec<C64>, rng: ChaCha8Rng) -> Result<Self> {
        if normalize(&mut psi) == 0.0 {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let n = psi.len();
        Ok(Self {
            psi,
            t: 0.0,
            rng,
            jump_log: Vec::new(),
            anchor: 0.0,
            steps: 0,
            scratch: vec![ZERO; n],
            scratch2: vec![ZERO; n],
        })
    }

    pub fn projector(&self, space: &crate::operator::HilbertSpace) -> Operator {
        Operator::projector(space, &self.psi).expect("state matches its space")
    }
}

/// Advances by one step. Returns the channel index if a jump occurred.
pub fn step(
    engine: &TrajectoryEngine,
    state: &mut TrajectoryState,
    cfg: &TrajectoryConfig,
) -> Result<Option<usize>> {
    let jumped = advance(engine, state, cfg, cfg.dt)?;
    state.steps += 1;
    state.t = state.anchor + state.steps as f64 * cfg.dt;
    finish_step(state, jumped)
}

/// Advances by `h < dt` to reach `target` exactly.
fn partial_step(
    engine: &TrajectoryEngine,
    state: &mut TrajectoryState,
    cfg: &TrajectoryConfig,
    target: f64,
) -> Result<Option<usize>> {
    let jumped = advance(engine, state, cfg, target - state.t)?;
    state.anchor = target;
    state.steps = 0;
    state.t = target;
    finish_step(state, jumped)
}

fn finish_step(state: &mut TrajectoryState, jumped: Option<usize>) -> Result<Option<usize>> {
    if let Some(mu) = jumped {
        state.jump_log.push((state.t, mu));
    }
    Ok(jumped)
}

/// One update of length `dt`, without touching the clock.
fn advance(
    engine: &TrajectoryEngine,
    state: &mut TrajectoryState,
    cfg: &TrajectoryConfig,
    dt: f64,
) -> Result<Option<usize>> {
    let weights = engine.jump_weights(&state.psi);
    let total: f64 = weights.iter().sum();
    let dp = total * dt;
    if dp >= cfg.dp_max {
        return Err(Error::StepTooLarge {
            dp,
            max: cfg.dp_max,
        });
    }
    let u: f64 = state.rng.random();
    let jumped = if u < dp {
        let v: f64 = state.rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut mu = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if v < acc {
                mu = k;
                break;
            }
        }
        engine.jumps[mu].0.mul_into(&state.psi, &mut state.scratch);
        std::mem::swap(&mut state.psi, &mut state.scratch);
        Some(mu)
    } else {
        let h = &engine.h_nh;
        h.mul_into(&state.psi, &mut state.scratch);
        let mi_dt = C64::new(0.0, -dt);
        match cfg.integrator {
            Integrator::Euler => {
                for (p, hp) in state.psi.iter_mut().zip(&state.scratch) {
                    *p += mi_dt * hp;
                }
            }
            Integrator::SecondOrder => {
                h.mul_into(&state.scratch, &mut state.scratch2);
                let half = C64::new(-0.5 * dt * dt, 0.0);
                for ((p, hp), hhp) in state.psi.iter_mut().zip(&state.scratch).zip(&state.scratch2) {
                    *p += mi_dt * hp + half * hhp;
                }
            }
        }
        None
    };
    let n = normalize(&mut state.psi);
    if !n.is_finite() || n == 0.0 {
        return Err(Error::BlowUp { t: state.t + dt });
    }
    Ok(jumped)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in t_grid {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid grid time {t}")));
        }
        if t < prev {
            return Err(Error::InvalidParameter("time grid must be non-decreasing".into()));
        }
        prev = t;
    }
    Ok(())
}

/// Steps `state` forward to time `target`. Regular steps of `dt` are taken
/// while they fit; a shortened last step lands on `target` exactly. Gaps
/// below `1e-9 dt` count as already reached.
pub fn advance_to(
    engine: &TrajectoryEngine,
    state: &mut TrajectoryState,
    cfg: &TrajectoryConfig,
    target: f64,
) -> Result<()> {
    let tol = 1e-9 * cfg.dt;
    while state.anchor + (state.steps + 1) as f64 * cfg.dt <= target + tol {
        step(engine, state, cfg)?;
    }
    if target - state.t > tol {
        partial_step(engine, state, cfg, target)?;
    }
    Ok(())
}

/// A single trajectory sampled on a time grid.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub index: u64,
    /// State at each grid time.
    pub samples: Vec<Vec<C64>>,
    pub jump_log: Vec<(f64, usize)>,
    /// Worst top-level population seen at the sample times (0 if unchecked).
    pub max_top_population: f64,
}

/// Runs one trajectory from `psi0`, recording the state at each grid time.
pub fn run_trajectory(
    engine: &TrajectoryEngine,
    psi0: Vec<C64>,
    t_grid: &[f64],
    cfg: &TrajectoryConfig,
    rng: ChaCha8Rng,
    index: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if psi0.len() != engine.dim() {
        return Err(Error::DimensionMismatch {
            expected: engine.dim(),
            found: psi0.len(),
        });
    }
    check_grid(t_grid)?;
    let mut state = TrajectoryState::new(psi0, rng)?;
    let mut samples = Vec::with_capacity(t_grid.len());
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        advance_to(engine, &mut state, cfg, t)?;
        if cfg.check_cutoff {
            worst = worst.max(engine.top_level_population(&state.psi));
        }
        samples.push(state.psi.clone());
    }
    if worst > CUTOFF_POPULATION_WARN {
        log::warn!(
            "trajectory {index}: top Fock levels hold population {worst:.2e}; raise the cutoff"
        );
    }
    Ok(TrajectoryRecord {
        index,
        samples,
        jump_log: state.jump_log,
        max_top_population: worst,
    })
}

/// Runs trajectories `0..m` in parallel with per-index RNG streams. The
/// output order follows the trajectory index.
pub fn run_ensemble(
    engine: &TrajectoryEngine,
    initial: &InitialState,
    t_grid: &[f64],
    m: usize,
    base_seed: u64,
    cfg: &TrajectoryConfig,
) -> Result<Vec<TrajectoryRecord>> {
    if m < 1 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    (0..m as u64)
        .into_par_iter()
        .map(|idx| {
            let mut init_rng = trajectory_rng(base_seed, idx, 1);
            let psi0 = initial.sample(engine.model().space(), &mut init_rng)?;
            run_trajectory(engine, psi0, t_grid, cfg, trajectory_rng(base_seed, idx, 0), idx)
        })
        .collect()
}

/// Ensemble averages on a time grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub m: usize,
    pub base_seed: u64,
    pub times: Vec<f64>,
    /// `means[k][i]`: mean of observable `k` at time `i`.
    pub means: Vec<Vec<f64>>,
    /// Sample standard errors aligned with `means`.
    pub std_errors: Vec<Vec<f64>>,
    /// Averaged density matrices, if requested (not serialized).
    #[serde(skip)]
    pub density: Option<Vec<Operator>>,
    pub max_top_population: f64,
    pub n_jumps_mean: f64,
}

/// Averages Hermitian observables (and optionally the projectors) over `m`
/// trajectories. Reduction is done in trajectory order, so results do not
/// depend on thread scheduling.
pub fn ensemble_average(
    engine: &TrajectoryEngine,
    initial: &InitialState,
    t_grid: &[f64],
    m: usize,
    base_seed: u64,
    cfg: &TrajectoryConfig,
    observables: &[Operator],
    keep_density: bool,
) -> Result<EnsembleResult> {
    if m < 1 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    let d = engine.dim();
    for o in observables {
        if o.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: o.dim(),
            });
        }
    }
    let obs_csr: Vec<CsrMatrix> = observables.iter().map(CsrMatrix::from_operator).collect();
    let nt = t_grid.len();
    let mut sum = vec![vec![0.0; nt]; observables.len()];
    let mut sum_sq = vec![vec![0.0; nt]; observables.len()];
    let mut rho_sum: Option<Vec<faer::Mat<C64>>> =
        keep_density.then(|| (0..nt).map(|_| faer::Mat::zeros(d, d)).collect());
    let mut worst: f64 = 0.0;
    let mut jumps = 0usize;

    const CHUNK: u64 = 64;
    let mut start = 0u64;
    while start < m as u64 {
        let end = (start + CHUNK).min(m as u64);
        let chunk: Vec<(Vec<Vec<f64>>, TrajectoryRecord)> = (start..end)
            .into_par_iter()
            .map(|idx| {
                let mut init_rng = trajectory_rng(base_seed, idx, 1);
                let psi0 = initial.sample(engine.model().space(), &mut init_rng)?;
                let rec = run_trajectory(engine, psi0, t_grid, cfg, trajectory_rng(base_seed, idx, 0), idx)?;
                let mut buf = vec![ZERO; d];
                let vals = obs_csr
                    .iter()
                    .map(|o| {
                        rec.samples
                            .iter()
                            .map(|psi| {
                                o.mul_into(psi, &mut buf);
                                psi.iter().zip(&buf).map(|(a, b)| (a.conj() * b).re).sum()
                            })
                            .collect()
                    })
                    .collect();
                Ok((vals, rec))
            })
            .collect::<Result<_>>()?;
        for (vals, rec) in chunk {
            for (k, series) in vals.iter().enumerate() {
                for (i, &v) in series.iter().enumerate() {
                    sum[k][i] += v;
                    sum_sq[k][i] += v * v;
                }
            }
            if let Some(rs) = rho_sum.as_mut() {
                for (r, psi) in rs.iter_mut().zip(&rec.samples) {
                    for j in 0..d {
                        let cj = psi[j].conj();
                        for i in 0..d {
                            r[(i, j)] += psi[i] * cj;
                        }
                    }
                }
            }
            worst = worst.max(rec.max_top_population);
            jumps += rec.jump_log.len();
        }
        start = end;
    }

    let mf = m as f64;
    let means: Vec<Vec<f64>> = sum.iter().map(|s| s.iter().map(|x| x / mf).collect()).collect();
    let std_errors = sum_sq
        .iter()
        .zip(&means)
        .map(|(sq, mu)| {
            sq.iter()
                .zip(mu)
                .map(|(s2, mu)| {
                    if m < 2 {
                        0.0
                    } else {
                        let var = ((s2 / mf - mu * mu) * mf / (mf - 1.0)).max(0.0);
                        (var / mf).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    let density = rho_sum.map(|rs| {
        rs.into_iter()
            .map(|r| {
                Operator::new(engine.model().space().clone(), r * faer::Scale(C64::new(1.0 / mf, 0.0)))
                    .expect("dimensions match")
            })
            .collect()
    });
    Ok(EnsembleResult {
        m,
        base_seed,
        times: t_grid.to_vec(),
        means,
        std_errors,
        density,
        max_top_population: worst,
        n_jumps_mean: jumps as f64 / mf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_kerr_resonator, Jump, KerrParams};
    use crate::operator::{annihilation, sigma_minus, sigma_plus, HilbertSpace};
    use crate::states::fock;

    fn oscillator() -> ModelSpec {
        build_kerr_resonator(&KerrParams {
            detuning: 0.7,
            interaction: 0.0,
            drive: 0.0,
            loss: 1.0,
            cutoff: 4,
        })
        .unwrap()
    }

    #[test]
    fn no_jumps_is_normalized_euler() {
        let m = oscillator().closed();
        let engine = TrajectoryEngine::new(&m);
        let psi0 = crate::states::coherent(5, C64::new(0.5, 0.1));
        let mut st = TrajectoryState::new(psi0.clone(), trajectory_rng(1, 0, 0)).unwrap();
        let cfg = TrajectoryConfig::new(0.01);
        step(&engine, &mut st, &cfg).unwrap();
        let h = m.hamiltonian();
        let mut expect: Vec<C64> = psi0
            .iter()
            .zip(h.apply(&psi0))
            .map(|(p, hp)| p + C64::new(0.0, -0.01) * hp)
            .collect();
        normalize(&mut expect);
        for (a, b) in st.psi.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn advance_to_lands_on_off_grid_times() {
        // Closed and diagonal: the exact state is a phase per Fock level.
        let m = oscillator().closed();
        let engine = TrajectoryEngine::new(&m);
        let psi0 = crate::states::coherent(5, C64::new(0.5, 0.1));
        let energies: Vec<f64> = m
            .hamiltonian()
            .apply(&psi0)
            .iter()
            .zip(&psi0)
            .map(|(hp, p)| (hp / p).re)
            .collect();
        let cfg = TrajectoryConfig::new(0.01).with_integrator(Integrator::SecondOrder);
        let mut st = TrajectoryState::new(psi0.clone(), trajectory_rng(1, 0, 0)).unwrap();
        for target in [0.123, 0.123, 0.5, 0.5071] {
            advance_to(&engine, &mut st, &cfg, target).unwrap();
            assert_eq!(st.t, target);
            let err = st
                .psi
                .iter()
                .zip(&psi0)
                .zip(&energies)
                .map(|((a, p), e)| (a - p * C64::new(0.0, -e * target).exp()).norm())
                .fold(0.0, f64::max);
            assert!(err < 2e-4, "t = {target}: {err}");
        }
        // Regular steps resume from the landing point.
        step(&engine, &mut st, &cfg).unwrap();
        assert!((st.t - 0.5171).abs() < 1e-15);
    }

    #[test]
    fn single_photon_decays_once() {
        let engine = TrajectoryEngine::new(&oscillator());
        for seed in 0..20 {
            let rec = run_trajectory(
                &engine,
                fock(5, 1).unwrap(),
                &[0.0, 5.0, 30.0],
                &TrajectoryConfig::new(0.01),
                trajectory_rng(seed, 0, 0),
                0,
            )
            .unwrap();
            assert!(rec.jump_log.len() <= 1);
            if rec.jump_log.len() == 1 {
                let last = rec.samples.last().unwrap();
                assert!((last[0].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_frequencies_match_weights() {
        let space = HilbertSpace::single(2).unwrap();
        let h = Operator::zeros(&space);
        let m = ModelSpec::new(
            "toy",
            h,
            vec![
                Jump {
                    op: sigma_minus(),
                    rate: 0.3,
                    label: "down".into(),
                },
                Jump {
                    op: sigma_plus(),
                    rate: 0.9,
                    label: "up".into(),
                },
            ],
        )
        .unwrap();
        let engine = TrajectoryEngine::new(&m);
        let psi = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let w = engine.jump_weights(&psi);
        // index 0 is spin up: sigma_minus moves |0> to |1> with weight |0.6|^2
        let p_down = w[0] / (w[0] + w[1]);
        let expect = 0.3 * 0.36 / (0.3 * 0.36 + 0.9 * 0.64);
        assert!((p_down - expect).abs() < 1e-14);
        let cfg = TrajectoryConfig::new(0.02);
        let mut counts = [0usize; 2];
        let mut rng_idx = 0;
        while counts[0] + counts[1] < 20000 {
            let mut st = TrajectoryState::new(psi.clone(), trajectory_rng(7, rng_idx, 0)).unwrap();
            rng_idx += 1;
            for _ in 0..50 {
                let mut probe = st.clone();
                probe.psi = psi.clone();
                if let Some(mu) = step(&engine, &mut probe, &cfg).unwrap() {
                    counts[mu] += 1;
                }
                st.rng = probe.rng;
            }
        }
        let freq = counts[0] as f64 / (counts[0] + counts[1]) as f64;
        let se = (expect * (1.0 - expect) / 20000.0).sqrt();
        assert!((freq - expect).abs() < 4.0 * se, "{freq} vs {expect}");
    }

    #[test]
    fn seeds_reproduce_jump_logs() {
        let m = build_kerr_resonator(&KerrParams {
            detuning: 1.0,
            interaction: 0.5,
            drive: 1.0,
            loss: 1.0,
            cutoff: 6,
        })
        .unwrap();
        let engine = TrajectoryEngine::new(&m);
        let init = InitialState::coherent(C64::new(1.0, 0.0));
        let a = run_ensemble(&engine, &init, &[0.0, 4.0], 3, 99, &TrajectoryConfig::new(0.005)).unwrap();
        let b = run_ensemble(&engine, &init, &[0.0, 4.0], 3, 99, &TrajectoryConfig::new(0.005)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.jump_log, y.jump_log);
            assert_eq!(x.samples, y.samples);
        }
        assert_ne!(a[0].jump_log, a[1].jump_log);
    }

    #[test]
    fn step_size_guard() {
        let engine = TrajectoryEngine::new(&oscillator());
        let mut st = TrajectoryState::new(fock(5, 4).unwrap(), trajectory_rng(0, 0, 0)).unwrap();
        let r = step(&engine, &mut st, &TrajectoryConfig::new(0.02));
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn single_trajectory_average_is_projector() {
        let m = oscillator();
        let engine = TrajectoryEngine::new(&m);
        let init = InitialState::given(&fock(5, 2).unwrap());
        let n = {
            let a = annihilation(5).unwrap();
            &a.adjoint() * &a
        };
        let res = ensemble_average(&engine, &init, &[0.0, 0.5], 1, 3, &TrajectoryConfig::new(0.01), &[n], true).unwrap();
        let rho = &res.density.as_ref().unwrap()[0];
        assert!((rho.get(2, 2).re - 1.0).abs() < 1e-14);
        assert!((res.means[0][0] - 2.0).abs() < 1e-12);
        let late = &res.density.unwrap()[1];
        assert!((late.trace().re - 1.0).abs() < 1e-12);
        assert!((&(late * late).trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn norm_preserved_every_step() {
        let m = build_kerr_resonator(&KerrParams {
            detuning: 2.0,
            interaction: 1.0,
            drive: 2.0,
            loss: 1.0,
            cutoff: 8,
        })
        .unwrap();
        let engine = TrajectoryEngine::new(&m);
        let cfg = TrajectoryConfig::new(0.002).with_integrator(Integrator::SecondOrder);
        let mut st = TrajectoryState::new(crate::states::coherent(9, C64::new(1.0, 1.0)), trajectory_rng(5, 0, 0)).unwrap();
        for _ in 0..3000 {
            step(&engine, &mut st, &cfg).unwrap();
            let n: f64 = st.psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-10);
        }
    }
}
