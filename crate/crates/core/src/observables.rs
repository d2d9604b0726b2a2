//! Steady-state diagnostics and the superoperator OTOC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::{assemble, diagonalize, LiouvillianSpectrum};
use crate::models::ModelSpec;
use crate::operator::{annihilation, creation, embed, number, HilbertSpace, Operator};
use crate::stats::real_spacing_ratios;
use crate::C64;

/// Eigenvalues of `rho` below this are clipped to zero before square roots.
pub const FIDELITY_CLIP: f64 = 1e-14;
/// Relative floor defining the support of a density matrix.
pub const SUPPORT_TOL: f64 = 1e-14;
/// Level gaps of `-log rho` below this count as exact degeneracies.
pub const DEGENERACY_TOL: f64 = 1e-10;

fn same_dim(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `Tr(rho op)`.
pub fn expectation(rho: &Operator, op: &Operator) -> Result<C64> {
    same_dim(rho, op)?;
    let (r, o) = (rho.matrix(), op.matrix());
    let d = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += r[(i, k)] * o[(k, i)];
        }
    }
    Ok(acc)
}

fn mode_ladder(space: &HilbertSpace, mode: usize) -> Result<(Operator, Operator)> {
    let dims = space.factor_dims();
    if mode >= dims.len() {
        return Err(Error::SiteOutOfRange {
            site: mode,
            n_factors: dims.len(),
        });
    }
    let a = embed(&annihilation(dims[mode])?, mode, space)?;
    let ad = embed(&creation(dims[mode])?, mode, space)?;
    Ok((a, ad))
}

/// `<a^dag a^dag a a> - <a^dag a>^2` for one mode. Negative values mean
/// sub-Poissonian light.
pub fn poisson_deviation(rho: &Operator, mode: usize) -> Result<f64> {
    // a^dag a^dag a a = n (n - 1), also under truncation; the integer
    // diagonal keeps Fock states exact.
    let space = rho.space();
    let dims = space.factor_dims();
    if mode >= dims.len() {
        return Err(Error::SiteOutOfRange {
            site: mode,
            n_factors: dims.len(),
        });
    }
    let n = embed(&number(dims[mode])?, mode, space)?;
    let nbar = expectation(rho, &n)?.re;
    let n2 = expectation(rho, &(&n * &n))?.re;
    Ok(n2 - nbar - nbar * nbar)
}

/// `Tr(rho^2)`.
pub fn purity(rho: &Operator) -> f64 {
    let m = rho.matrix();
    let d = rho.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            acc += (m[(i, k)] * m[(k, i)]).re;
        }
    }
    acc
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clipped to [0, 1].
pub fn fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    same_dim(rho, sigma)?;
    let clip = |x: f64| if x > FIDELITY_CLIP { x.sqrt() } else { 0.0 };
    let s = rho.hermitian_map(clip)?;
    let inner = &(&s * sigma) * &s;
    let (vals, _) = inner.hermitian_eigen()?;
    let tr: f64 = vals.iter().map(|&v| clip(v)).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntanglementRatio {
    pub mean_r: f64,
    pub n_levels: usize,
    /// Eigenvalues of rho dropped as outside its support.
    pub excluded: usize,
}

/// Level-ratio statistic of `-log rho` restricted to the support of `rho`.
pub fn entanglement_r(rho: &Operator) -> Result<EntanglementRatio> {
    let (vals, _) = rho.hermitian_eigen()?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::InvalidInput("density matrix has no positive eigenvalue".into()));
    }
    let floor = SUPPORT_TOL * top;
    let mut levels: Vec<f64> = vals.iter().filter(|&&p| p > floor).map(|p| -p.ln()).collect();
    let excluded = vals.len() - levels.len();
    if excluded > 0 {
        log::info!("entanglement spectrum: {excluded} eigenvalues outside the support excluded");
    }
    levels.sort_by(f64::total_cmp);
    // Snap numerically degenerate levels together.
    for i in 1..levels.len() {
        if levels[i] - levels[i - 1] < DEGENERACY_TOL {
            levels[i] = levels[i - 1];
        }
    }
    let r = real_spacing_ratios(&levels);
    if r.is_empty() {
        return Err(Error::InvalidInput(format!(
            "ratio undefined: {} support levels, all gaps degenerate or too few",
            levels.len()
        )));
    }
    Ok(EntanglementRatio {
        mean_r: r.iter().sum::<f64>() / r.len() as f64,
        n_levels: levels.len(),
        excluded,
    })
}

/// `Q = (a + a^dag)/sqrt 2`, `P = i (a^dag - a)/sqrt 2` on one mode.
pub fn quadratures(space: &HilbertSpace, mode: usize) -> Result<(Operator, Operator)> {
    let (a, ad) = mode_ladder(space, mode)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + &ad).scale_real(s);
    let p = (&ad - &a).scale(C64::new(0.0, s));
    Ok((q, p))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OtocSeries {
    pub t: f64,
    pub tau: Vec<f64>,
    /// `-<[Q(t+tau), P(t)]^2>` with `[Q, P] = i`, so a free oscillator gives
    /// `cos^2(Delta tau)`.
    pub values: Vec<f64>,
    /// Largest imaginary part discarded.
    pub max_imag: f64,
}

/// OTOC through forward and backward master-equation propagation. The
/// backward generator keeps the jump operators and flips the Hamiltonian.
pub fn quantum_otoc_with(
    forward: &LiouvillianSpectrum,
    backward: &LiouvillianSpectrum,
    rho_in: &Operator,
    t: f64,
    tau_grid: &[f64],
    q: &Operator,
    p: &Operator,
) -> Result<OtocSeries> {
    same_dim(rho_in, q)?;
    same_dim(rho_in, p)?;
    let rho_t = forward.propagate(rho_in, t)?;
    let p2 = p * p;
    let q2 = q * q;
    let p_rho = p * &rho_t;
    let rho_p = &rho_t * p;
    let p_rho_p = &p_rho * p;
    let vals: Vec<C64> = tau_grid
        .par_iter()
        .map(|&tau| {
            let chain = |x: &Operator| -> Result<Operator> {
                let y = forward.propagate(x, tau)?;
                backward.propagate(&(&(q * &y) * q), tau)
            };
            let t1 = (p * &chain(&p_rho)?).trace();
            let t2 = (p * &chain(&rho_p)?).trace();
            let t3 = (&p2 * &chain(&rho_t)?).trace();
            let t4 = (&q2 * &forward.propagate(&p_rho_p, tau)?).trace();
            Ok(-(t1 + t2 - t3 - t4))
        })
        .collect::<Result<_>>()?;
    let max_imag = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if max_imag > 1e-8 {
        log::warn!("OTOC imaginary residue {max_imag:.3e}");
    }
    Ok(OtocSeries {
        t,
        tau: tau_grid.to_vec(),
        values: vals.iter().map(|v| v.re).collect(),
        max_imag,
    })
}

/// Diagonalizes the forward and backward generators and evaluates the OTOC
/// on `mode`. Pass the steady state as `rho_in` for the steady-state OTOC.
pub fn quantum_otoc(
    model: &ModelSpec,
    rho_in: &Operator,
    t: f64,
    tau_grid: &[f64],
    mode: usize,
    force: bool,
) -> Result<OtocSeries> {
    let fwd = diagonalize(assemble(model)?, force)?;
    let bwd = diagonalize(assemble(&model.with_reversed_hamiltonian())?, force)?;
    let (q, p) = quadratures(model.space(), mode)?;
    quantum_otoc_with(&fwd, &bwd, rho_in, t, tau_grid, &q, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_kerr_resonator, KerrParams};
    use crate::states::{coherent, fock};
    use proptest::prelude::*;

    fn space(d: usize) -> HilbertSpace {
        HilbertSpace::single(d).unwrap()
    }

    fn thermal(d: usize, nbar: f64) -> Operator {
        let q = nbar / (1.0 + nbar);
        let p: Vec<f64> = (0..d).map(|n| (1.0 - q) * q.powi(n as i32)).collect();
        Operator::diagonal(&space(d), &p).unwrap()
    }

    #[test]
    fn fock_number_and_trace() {
        let s = space(6);
        let rho = Operator::projector(&s, &fock(6, 2).unwrap()).unwrap();
        assert!((expectation(&rho, &Operator::identity(&s)).unwrap().re - 1.0).abs() < 1e-15);
        assert!((expectation(&rho, &number(6).unwrap()).unwrap().re - 2.0).abs() < 1e-15);
        for n in 0..5 {
            let r = Operator::projector(&s, &fock(6, n).unwrap()).unwrap();
            assert_eq!(poisson_deviation(&r, 0).unwrap(), -(n as f64));
        }
    }

    #[test]
    fn coherent_is_poissonian() {
        let psi = coherent(60, C64::new(1.2, -0.7));
        let rho = Operator::projector(&space(60), &psi).unwrap();
        assert!(poisson_deviation(&rho, 0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn thermal_deviation_is_nbar_squared() {
        let nbar = 0.8;
        let rho = thermal(200, nbar);
        // geometric distribution: <n(n-1)> = 2 nbar^2
        assert!((poisson_deviation(&rho, 0).unwrap() - nbar * nbar).abs() < 1e-9);
    }

    #[test]
    fn purity_and_fidelity_identities() {
        let s = space(5);
        let a = Operator::projector(&s, &fock(5, 1).unwrap()).unwrap();
        let b = Operator::projector(&s, &fock(5, 3).unwrap()).unwrap();
        let mixed = Operator::identity(&s).scale_real(0.2);
        assert!((purity(&a) - 1.0).abs() < 1e-12);
        assert!((purity(&mixed) - 0.2).abs() < 1e-12);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!(fidelity(&a, &b).unwrap() < 1e-9);
        assert!((fidelity(&mixed, &mixed).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pure_state_fidelity_is_overlap() {
        let psi = coherent(8, C64::new(0.5, 0.3));
        let rho = Operator::projector(&space(8), &psi).unwrap();
        let sigma = thermal(8, 0.6);
        let direct = sigma.expectation_in(&psi).re;
        assert!((fidelity(&rho, &sigma).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn maximally_mixed_ratio_is_undefined() {
        let s = space(7);
        assert!(entanglement_r(&Operator::identity(&s).scale_real(1.0 / 7.0)).is_err());
    }

    #[test]
    fn entanglement_ratio_excludes_kernel() {
        let p = [0.5, 0.3, 0.15, 0.05, 0.0, 0.0];
        let rho = Operator::diagonal(&space(6), &p).unwrap();
        let r = entanglement_r(&rho).unwrap();
        assert_eq!(r.excluded, 2);
        assert_eq!(r.n_levels, 4);
    }

    #[test]
    fn free_oscillator_otoc_is_cos_squared() {
        let delta = 0.7;
        let m = build_kerr_resonator(&KerrParams {
            detuning: delta,
            interaction: 0.0,
            drive: 0.0,
            loss: 0.0,
            cutoff: 9,
        })
        .unwrap()
        .closed();
        let s = m.space().clone();
        let rho = Operator::projector(&s, &fock(10, 0).unwrap()).unwrap();
        let taus: Vec<f64> = (0..8).map(|k| 0.4 * k as f64).collect();
        let o = quantum_otoc(&m, &rho, 0.5, &taus, 0, false).unwrap();
        for (tau, v) in taus.iter().zip(&o.values) {
            assert!((v - (delta * tau).cos().powi(2)).abs() < 1e-6, "tau={tau} O={v}");
        }
        assert!(o.max_imag < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn coherent_mixtures_are_not_sub_poissonian(seed in 0u64..1000, k in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = 20;
            let s = space(d);
            let mut rho = Operator::zeros(&s);
            for _ in 0..k {
                let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let w: f64 = rng.random_range(0.1..1.0);
                rho = &rho + &Operator::projector(&s, &coherent(d, a)).unwrap().scale_real(w);
            }
            let tr = rho.trace().re;
            let rho = rho.scale_real(1.0 / tr);
            prop_assert!(poisson_deviation(&rho, 0).unwrap() > -1e-8);
        }

        #[test]
        fn fidelity_is_symmetric(seed in 0u64..1000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = space(4);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let g = crate::random_matrix::ginibre(4, 4, rng);
                let a = Operator::new(s.clone(), g).unwrap();
                let r = &a * &a.adjoint();
                let tr = r.trace().re;
                r.scale_real(1.0 / tr)
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            let f1 = fidelity(&a, &b).unwrap();
            let f2 = fidelity(&b, &a).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&f1));
        }
    }
}
