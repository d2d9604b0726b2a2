//! Mean-field (Gross-Pitaevskii) dynamics, the largest Lyapunov exponent by
//! orbit separation, and truncated-Wigner trajectories with the replica
//! correlator `D_ss`.
//!
//! Mode equations (drive on the first mode):
//! `d alpha_j/dt = (i Delta - gamma/2) alpha_j - i U |alpha_j|^2 alpha_j
//!                 + i J (alpha_{j-1} + alpha_{j+1}) - i F delta_{j0}`.
//! The Wigner drift replaces `|alpha|^2` by `|alpha|^2 - 1` and adds
//! `sqrt(gamma/2) xi(t)` per mode, `<xi xi*> = delta(t - t')`.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::BoseHubbardParams;
use crate::random_matrix::complex_normal;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn drift(alphas: &[C64], p: &BoseHubbardParams, wigner_shift: f64, out: &mut [C64]) {
    let n = alphas.len();
    let lin = C64::new(-0.5 * p.loss, p.detuning);
    for j in 0..n {
        let a = alphas[j];
        let mut neigh = C64::new(0.0, 0.0);
        if j > 0 {
            neigh += alphas[j - 1];
        }
        if j + 1 < n {
            neigh += alphas[j + 1];
        }
        let mut d = lin * a - I * p.interaction * (a.norm_sqr() - wigner_shift) * a + I * p.hopping * neigh;
        if j == 0 {
            d -= I * p.drive;
        }
        out[j] = d;
    }
}

/// Mean-field right-hand side.
pub fn gp_rhs(alphas: &[C64], p: &BoseHubbardParams) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); alphas.len()];
    drift(alphas, p, 0.0, &mut out);
    out
}

/// Generic fixed-step RK4 on complex vectors.
fn rk4<F: Fn(&[C64], &mut [C64])>(f: &F, y: &mut [C64], dt: f64, buf: &mut [Vec<C64>; 5]) {
    let n = y.len();
    let [k1, k2, k3, k4, tmp] = buf;
    f(y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(tmp, k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn buffers(n: usize) -> [Vec<C64>; 5] {
    std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n])
}

fn finite(y: &[C64]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
}

/// RK4 integration of the mean-field equations, sampling every
/// `sample_every` steps (and always the final state).
pub fn integrate_classical(
    state0: &[C64],
    p: &BoseHubbardParams,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<ClassicalTrajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) || sample_every == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, t_final >= 0, sample_every > 0 (got {dt}, {t_final}, {sample_every})"
        )));
    }
    if state0.len() != p.n_sites {
        return Err(Error::DimensionMismatch {
            expected: p.n_sites,
            found: state0.len(),
        });
    }
    let steps = (t_final / dt).round() as usize;
    let mut y = state0.to_vec();
    let mut buf = buffers(y.len());
    let f = |a: &[C64], out: &mut [C64]| drift(a, p, 0.0, out);
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    for k in 1..=steps {
        rk4(&f, &mut y, dt, &mut buf);
        if !finite(&y) {
            return Err(Error::BlowUp { t: k as f64 * dt });
        }
        if k % sample_every == 0 || k == steps {
            times.push(k as f64 * dt);
            states.push(y.clone());
        }
    }
    Ok(ClassicalTrajectory { times, states })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub n_transient: usize,
    pub n_sample: usize,
    pub n_blocks: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            dt: 1e-3,
            n_transient: 10_000,
            n_sample: 1_000_000,
            n_blocks: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub lambda_max: f64,
    /// Standard error from block averages.
    pub std_error: f64,
    /// `|lambda_max| < 3 std_error`: limit cycle (or marginal) behaviour.
    pub consistent_with_zero: bool,
    /// Times the two orbits coincided and had to be perturbed afresh.
    pub reperturbations: usize,
}

/// Orbit-separation estimate for a real ODE `dy/dt = f(y)` integrated by RK4.
/// After each step the perturbed orbit is put back at distance `epsilon`
/// along `y2 - y1`, and `log(d / epsilon)` is accumulated once the transient
/// is over.
pub fn lyapunov_max_with<F>(f: F, y0: &[f64], cfg: &LyapunovConfig) -> Result<LyapunovResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    if !(cfg.epsilon > 0.0 && cfg.dt > 0.0) || cfg.n_sample == 0 || cfg.n_blocks == 0 {
        return Err(Error::InvalidParameter(format!("invalid Lyapunov configuration {cfg:?}")));
    }
    let n = y0.len();
    // Complex-buffer RK4 reused on packed reals: pairs (re, im).
    let m = n.div_ceil(2);
    let pack = |y: &[f64], out: &mut [C64]| {
        for k in 0..m {
            out[k] = C64::new(y[2 * k], if 2 * k + 1 < n { y[2 * k + 1] } else { 0.0 });
        }
    };
    let g = |c: &[C64], out: &mut [C64]| {
        let mut yr = vec![0.0; n];
        for k in 0..n {
            yr[k] = if k % 2 == 0 { c[k / 2].re } else { c[k / 2].im };
        }
        let mut dr = vec![0.0; n];
        f(&yr, &mut dr);
        pack(&dr, out);
    };
    let mut y1 = vec![C64::new(0.0, 0.0); m];
    pack(y0, &mut y1);
    let shifted: Vec<f64> = y0.iter().map(|v| v + cfg.epsilon).collect();
    let mut y2 = vec![C64::new(0.0, 0.0); m];
    pack(&shifted, &mut y2);
    let mut b1 = buffers(m);
    let mut b2 = buffers(m);
    let eps = cfg.epsilon;
    let mut reperturb = 0usize;
    let total = cfg.n_transient + cfg.n_sample;
    let block_len = (cfg.n_sample / cfg.n_blocks).max(1);
    let mut block_sums = Vec::with_capacity(cfg.n_blocks + 1);
    let mut acc = 0.0;
    let mut in_block = 0usize;
    let mut sum = 0.0;
    for k in 0..total {
        rk4(&g, &mut y1, cfg.dt, &mut b1);
        rk4(&g, &mut y2, cfg.dt, &mut b2);
        if !finite(&y1) || !finite(&y2) {
            return Err(Error::BlowUp {
                t: (k + 1) as f64 * cfg.dt,
            });
        }
        let d = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if d == 0.0 {
            reperturb += 1;
            log::debug!("orbits coincided at step {k}; re-perturbing");
            let shift = eps / (n as f64).sqrt();
            for (a, b) in y2.iter_mut().zip(&y1) {
                *a = b + C64::new(shift, shift);
            }
            continue;
        }
        let scale = eps / d;
        for (a, b) in y2.iter_mut().zip(&y1) {
            *a = b + (*a - b) * scale;
        }
        if k >= cfg.n_transient {
            let l = (d / eps).ln();
            sum += l;
            acc += l;
            in_block += 1;
            if in_block == block_len {
                block_sums.push(acc / (block_len as f64 * cfg.dt));
                acc = 0.0;
                in_block = 0;
            }
        }
    }
    let lambda_max = sum / (cfg.n_sample as f64 * cfg.dt);
    let nb = block_sums.len();
    let std_error = if nb >= 2 {
        let mean = block_sums.iter().sum::<f64>() / nb as f64;
        let var = block_sums.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
        (var / nb as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(LyapunovResult {
        lambda_max,
        std_error,
        consistent_with_zero: lambda_max.abs() < 3.0 * std_error,
        reperturbations: reperturb,
    })
}

/// Largest Lyapunov exponent of the mean-field Bose-Hubbard equations.
pub fn lyapunov_max(state0: &[C64], p: &BoseHubbardParams, cfg: &LyapunovConfig) -> Result<LyapunovResult> {
    if state0.len() != p.n_sites {
        return Err(Error::DimensionMismatch {
            expected: p.n_sites,
            found: state0.len(),
        });
    }
    let y0: Vec<f64> = state0.iter().flat_map(|z| [z.re, z.im]).collect();
    let n = p.n_sites;
    let f = |y: &[f64], out: &mut [f64]| {
        let a: Vec<C64> = (0..n).map(|j| C64::new(y[2 * j], y[2 * j + 1])).collect();
        let mut d = vec![C64::new(0.0, 0.0); n];
        drift(&a, p, 0.0, &mut d);
        for j in 0..n {
            out[2 * j] = d[j].re;
            out[2 * j + 1] = d[j].im;
        }
    };
    lyapunov_max_with(f, &y0, cfg)
}

/// Complex Wiener increments with `E|dW|^2 = dt` (each quadrature `dt/2`).
pub fn wiener_increments(rng: &mut ChaCha8Rng, n: usize, dt: f64) -> Vec<C64> {
    let s = dt.sqrt();
    (0..n).map(|_| complex_normal(rng) * s).collect()
}

/// Euler-Maruyama step of the truncated-Wigner equations with externally
/// supplied increments, so that replicas can share one noise path.
pub fn twa_step(alphas: &mut [C64], p: &BoseHubbardParams, dt: f64, dw: &[C64], scratch: &mut [C64]) {
    drift(alphas, p, 1.0, scratch);
    let amp = (0.5 * p.loss).sqrt();
    for ((a, d), w) in alphas.iter_mut().zip(scratch.iter()).zip(dw) {
        *a += dt * d + amp * w;
    }
}

/// Vacuum Wigner sample: each quadrature has variance 1/4.
pub fn vacuum_wigner_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| complex_normal(rng) * std::f64::consts::FRAC_1_SQRT_2)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwaConfig {
    pub trajectories: usize,
    pub dt: f64,
    /// Replicas evolve this long before the distance is sampled.
    pub t_relax: f64,
    /// End of the sampling window.
    pub t_measure: f64,
    /// Sampling interval inside the window.
    pub sample_interval: f64,
    pub epsilon: C64,
    pub base_seed: u64,
}

impl Default for TwaConfig {
    fn default() -> Self {
        Self {
            trajectories: 1000,
            dt: 1e-4,
            t_relax: 50.0,
            t_measure: 60.0,
            sample_interval: 1.0,
            epsilon: C64::new(0.01, 0.01) * std::f64::consts::FRAC_1_SQRT_2,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OtocResult {
    /// `1 - <exp(-sum_j d_j)>`.
    pub d_ss: f64,
    pub std_error: f64,
    /// `1 - <exp(-d_j)>` per mode.
    pub per_mode: Vec<f64>,
    pub per_mode_std_error: Vec<f64>,
    pub samples_per_trajectory: usize,
}

/// Replica correlator `D_ss`. Each trajectory draws a vacuum Wigner initial
/// condition, starts a second replica at `+epsilon` on every mode, drives
/// both with the same noise, and samples `exp(-d)` over the window.
pub fn semiclassical_otoc(p: &BoseHubbardParams, cfg: &TwaConfig) -> Result<OtocResult> {
    if cfg.trajectories < 1 || !(cfg.dt > 0.0) || !(cfg.t_measure >= cfg.t_relax) || !(cfg.sample_interval > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid TWA configuration {cfg:?}")));
    }
    let n = p.n_sites;
    let steps_total = (cfg.t_measure / cfg.dt).round() as usize;
    let steps_relax = (cfg.t_relax / cfg.dt).round() as usize;
    let every = ((cfg.sample_interval / cfg.dt).round() as usize).max(1);
    let per_traj: Vec<(Vec<f64>, f64)> = (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
            rng.set_stream(idx);
            let mut a = vacuum_wigner_sample(&mut rng, n);
            let mut b: Vec<C64> = a.iter().map(|z| z + cfg.epsilon).collect();
            let mut sa = vec![C64::new(0.0, 0.0); n];
            let mut sb = vec![C64::new(0.0, 0.0); n];
            let mut mode_acc = vec![0.0; n];
            let mut tot_acc = 0.0;
            let mut count = 0usize;
            for k in 1..=steps_total {
                let dw = wiener_increments(&mut rng, n, cfg.dt);
                twa_step(&mut a, p, cfg.dt, &dw, &mut sa);
                twa_step(&mut b, p, cfg.dt, &dw, &mut sb);
                if !finite(&a) || !finite(&b) {
                    return Err(Error::BlowUp { t: k as f64 * cfg.dt });
                }
                if k >= steps_relax && (k - steps_relax) % every == 0 {
                    let mut dsum = 0.0;
                    for j in 0..n {
                        let d = (b[j] - a[j]).norm();
                        mode_acc[j] += (-d).exp();
                        dsum += d;
                    }
                    tot_acc += (-dsum).exp();
                    count += 1;
                }
            }
            let c = count.max(1) as f64;
            Ok((mode_acc.iter().map(|x| x / c).collect(), tot_acc / c))
        })
        .collect::<Result<_>>()?;
    let m = per_traj.len() as f64;
    let stat = |xs: Vec<f64>| {
        let mean = xs.iter().sum::<f64>() / m;
        let se = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        (1.0 - mean, se)
    };
    let (d_ss, std_error) = stat(per_traj.iter().map(|t| t.1).collect());
    let mut per_mode = Vec::with_capacity(n);
    let mut per_mode_se = Vec::with_capacity(n);
    for j in 0..n {
        let (d, se) = stat(per_traj.iter().map(|t| t.0[j]).collect());
        per_mode.push(d);
        per_mode_se.push(se);
    }
    let samples = if steps_total >= steps_relax {
        (steps_total - steps_relax) / every + 1
    } else {
        0
    };
    Ok(OtocResult {
        d_ss,
        std_error,
        per_mode,
        per_mode_std_error: per_mode_se,
        samples_per_trajectory: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(delta: f64, gamma: f64) -> BoseHubbardParams {
        BoseHubbardParams {
            detuning: delta,
            interaction: 0.0,
            hopping: 0.0,
            drive: 0.0,
            loss: gamma,
            n_sites: 2,
            cutoff: 2,
        }
    }

    #[test]
    fn linear_limit_matches_closed_form() {
        let p = linear(1.3, 0.4);
        let a0 = vec![C64::new(0.8, -0.2), C64::new(-0.3, 0.5)];
        let tr = integrate_classical(&a0, &p, 10.0 / 0.4, 1e-3, 1000).unwrap();
        let t = *tr.times.last().unwrap();
        let f = (C64::new(-0.2, 1.3) * t).exp();
        for (a, b) in tr.states.last().unwrap().iter().zip(&a0) {
            assert!((a - b * f).norm() < 1e-8);
        }
    }

    #[test]
    fn modes_decouple_without_hopping() {
        let mut p = BoseHubbardParams::dimer(2.0, 0.0, 3);
        p.hopping = 0.0;
        let a = gp_rhs(&[C64::new(0.5, 0.1), C64::new(0.0, 0.0)], &p);
        assert_eq!(a[1], C64::new(0.0, 0.0));
    }

    #[test]
    fn wigner_shift_is_the_only_noiseless_difference() {
        let p = BoseHubbardParams::dimer(2.5, 3.0, 3);
        let p0 = BoseHubbardParams { loss: 0.0, ..p.clone() };
        let a = vec![C64::new(0.4, 0.3), C64::new(-1.1, 0.2)];
        let mut b = a.clone();
        let mut s = vec![C64::new(0.0, 0.0); 2];
        let dt = 1e-3;
        twa_step(&mut b, &p0, dt, &[C64::new(0.0, 0.0); 2], &mut s);
        let g = gp_rhs(&a, &p0);
        for j in 0..2 {
            let expect = a[j] + dt * (g[j] + I * p0.interaction * a[j]);
            assert!((b[j] - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn noiseless_linear_twa_matches_exponential() {
        let p = BoseHubbardParams {
            loss: 0.0,
            ..linear(0.9, 0.0)
        };
        let mut a = vec![C64::new(0.3, 0.1), C64::new(0.2, -0.4)];
        let a0 = a.clone();
        let mut s = vec![C64::new(0.0, 0.0); 2];
        let dt = 1e-5;
        for _ in 0..100_000 {
            twa_step(&mut a, &p, dt, &[C64::new(0.0, 0.0); 2], &mut s);
        }
        let f = (C64::new(0.0, 0.9) * 1.0).exp();
        for (x, y) in a.iter().zip(&a0) {
            assert!((x - y * f).norm() < 1e-5);
        }
    }

    #[test]
    fn paired_replicas_with_zero_offset_stay_identical() {
        let p = BoseHubbardParams::dimer(2.5, 3.0, 3);
        let cfg = TwaConfig {
            trajectories: 4,
            dt: 1e-3,
            t_relax: 2.0,
            t_measure: 3.0,
            epsilon: C64::new(0.0, 0.0),
            ..Default::default()
        };
        let r = semiclassical_otoc(&p, &cfg).unwrap();
        assert_eq!(r.d_ss, 0.0);
    }

    #[test]
    fn ou_vacuum_occupation() {
        let p = linear(0.7, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dt = 1e-3;
        let mut s = vec![C64::new(0.0, 0.0); 2];
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for _ in 0..400 {
            let mut a = vec![C64::new(2.0, 0.0); 2];
            for k in 0..8000 {
                let dw = wiener_increments(&mut rng, 2, dt);
                twa_step(&mut a, &p, dt, &dw, &mut s);
                if k >= 7000 && k % 100 == 0 {
                    acc += a[0].norm_sqr();
                    cnt += 1.0;
                }
            }
        }
        let mean = acc / cnt;
        assert!((mean - 0.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn hamiltonian_twa_is_reversible() {
        let p = BoseHubbardParams {
            loss: 0.0,
            ..BoseHubbardParams::dimer(1.5, 2.0, 3)
        };
        let rev = BoseHubbardParams {
            detuning: -p.detuning,
            interaction: -p.interaction,
            hopping: -p.hopping,
            drive: -p.drive,
            ..p.clone()
        };
        let a0 = vec![C64::new(0.7, -0.1), C64::new(0.2, 0.9)];
        let zero = [C64::new(0.0, 0.0); 2];
        let mut s = vec![C64::new(0.0, 0.0); 2];
        for dt in [1e-2, 1e-3] {
            let mut a = a0.clone();
            twa_step(&mut a, &p, dt, &zero, &mut s);
            twa_step(&mut a, &rev, dt, &zero, &mut s);
            let err: f64 = a.iter().zip(&a0).map(|(x, y)| (x - y).norm()).sum();
            assert!(err < 50.0 * dt * dt, "dt={dt} err={err}");
        }
    }

    #[test]
    fn contracting_linear_system_exponent() {
        // dy/dt = A y with eigenvalues -0.3 and -1.1
        let f = |y: &[f64], out: &mut [f64]| {
            out[0] = -0.3 * y[0] + 0.5 * y[1];
            out[1] = -1.1 * y[1];
        };
        let cfg = LyapunovConfig {
            n_sample: 200_000,
            ..Default::default()
        };
        let r = lyapunov_max_with(f, &[1.0, 1.0], &cfg).unwrap();
        assert!((r.lambda_max + 0.3).abs() < 0.02 * 0.3, "{r:?}");
    }
}
