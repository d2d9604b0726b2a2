//! Closed-system level statistics of the driven Bose-Hubbard chain with an
//! energy cutoff `M_max` on the number of levels used.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{apply_thermodynamic_scaling, BoseHubbardParams};
use crate::operator::HilbertSpace;
use crate::random_matrix::symmetric_eigenvalues;
use crate::stats::{real_spacing_ratios, reference};

/// Relative change allowed for converged levels under `N_c -> N_c + 2`.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Below this many levels the ratio average is noisy.
pub const M_MAX_WARN: usize = 200;

/// Real symmetric Bose-Hubbard matrix in the Fock basis (first site most
/// significant), built entry by entry.
pub fn bose_hubbard_matrix(p: &BoseHubbardParams) -> Result<Mat<f64>> {
    if p.cutoff < 2 || p.n_sites < 1 {
        return Err(Error::InvalidParameter(format!(
            "need cutoff >= 2 and at least one site, got {} and {}",
            p.cutoff, p.n_sites
        )));
    }
    let space = HilbertSpace::new(vec![p.cutoff + 1; p.n_sites])?;
    let d = space.dim();
    let mut h = Mat::<f64>::zeros(d, d);
    for idx in 0..d {
        let occ = space.unflatten(idx);
        let mut diag = 0.0;
        for &n in &occ {
            let n = n as f64;
            diag += -p.detuning * n + 0.5 * p.interaction * n * (n - 1.0);
        }
        h[(idx, idx)] = diag;
        // a_{j+1}^dag a_j + h.c.; fill the lower-to-upper pair once per move.
        for j in 0..p.n_sites.saturating_sub(1) {
            let (nj, nk) = (occ[j], occ[j + 1]);
            if nj > 0 && nk < p.cutoff {
                let mut to = occ.clone();
                to[j] -= 1;
                to[j + 1] += 1;
                let t = space.flatten(&to);
                let amp = -p.hopping * ((nj * (nk + 1)) as f64).sqrt();
                h[(t, idx)] += amp;
                h[(idx, t)] += amp;
            }
        }
        if occ[0] < p.cutoff {
            let mut to = occ.clone();
            to[0] += 1;
            let t = space.flatten(&to);
            let amp = p.drive * ((occ[0] + 1) as f64).sqrt();
            h[(t, idx)] += amp;
            h[(idx, t)] += amp;
        }
    }
    Ok(h)
}

fn levels(p: &BoseHubbardParams) -> Result<Vec<f64>> {
    let h = bose_hubbard_matrix(p)?;
    if h.nrows() > 12_000 {
        return Err(Error::ResourceGuard {
            dim: h.nrows(),
            limit: 12_000,
        });
    }
    Ok(symmetric_eigenvalues(&h))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergedSpectrum {
    /// Lowest `m_max` levels, ascending.
    pub energies: Vec<f64>,
    /// Fock cutoff at which they were stable.
    pub cutoff: usize,
    pub max_change: f64,
}

/// Raises `N_c` in steps of 2 from `params.cutoff` until the lowest `m_max`
/// eigenvalues change by less than [`CONVERGENCE_TOL`] (relative to
/// `max(1, |E|)`), or fails past `max_cutoff`.
pub fn hamiltonian_spectrum(p: &BoseHubbardParams, m_max: usize, max_cutoff: usize) -> Result<ConvergedSpectrum> {
    if m_max < 1 {
        return Err(Error::InvalidParameter("m_max must be positive".into()));
    }
    let mut nc = p.cutoff.max(2);
    while (nc + 1).pow(p.n_sites as u32) < m_max {
        nc += 1;
    }
    let mut prev = levels(&BoseHubbardParams { cutoff: nc, ..p.clone() })?;
    let mut last_change = f64::INFINITY;
    while nc + 2 <= max_cutoff {
        let next = levels(&BoseHubbardParams { cutoff: nc + 2, ..p.clone() })?;
        let change = prev
            .iter()
            .zip(&next)
            .take(m_max)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        log::debug!("N_c {} -> {}: max relative change {change:.3e}", nc, nc + 2);
        last_change = change;
        nc += 2;
        if change < CONVERGENCE_TOL && prev.len() >= m_max {
            let mut energies = next;
            energies.truncate(m_max);
            return Ok(ConvergedSpectrum {
                energies,
                cutoff: nc,
                max_change: change,
            });
        }
        prev = next;
    }
    Err(Error::NotConverged(format!(
        "lowest {m_max} levels not stable to {CONVERGENCE_TOL:e} by N_c = {nc} (last change {last_change:.3e})"
    )))
}

/// Spectrum at `F = 0` assembled sector by sector in total particle number.
pub fn sector_spectrum(p: &BoseHubbardParams) -> Result<Vec<f64>> {
    if p.drive != 0.0 {
        return Err(Error::InvalidParameter("sectors exist only without drive".into()));
    }
    let h = bose_hubbard_matrix(p)?;
    let space = HilbertSpace::new(vec![p.cutoff + 1; p.n_sites])?;
    let max_n = p.cutoff * p.n_sites;
    let mut sectors: Vec<Vec<usize>> = vec![Vec::new(); max_n + 1];
    for idx in 0..space.dim() {
        sectors[space.unflatten(idx).iter().sum::<usize>()].push(idx);
    }
    let mut out = Vec::with_capacity(space.dim());
    for s in sectors.iter().filter(|s| !s.is_empty()) {
        let sub = Mat::<f64>::from_fn(s.len(), s.len(), |i, j| h[(s[i], s[j])]);
        out.extend(symmetric_eigenvalues(&sub));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RStatistic {
    pub mean_r: f64,
    pub n_levels: usize,
    pub poisson: f64,
    pub wigner_dyson: f64,
}

/// `<r>_H` over the lowest `m_max` levels of `energies` (any order).
pub fn r_statistic(energies: &[f64], m_max: usize) -> Result<RStatistic> {
    if m_max < M_MAX_WARN {
        log::warn!("M_max = {m_max} < {M_MAX_WARN}: ratio statistics will be noisy");
    }
    let mut e = energies.to_vec();
    e.sort_by(f64::total_cmp);
    e.truncate(m_max);
    let r = real_spacing_ratios(&e);
    if r.is_empty() {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: e.len(),
        });
    }
    Ok(RStatistic {
        mean_r: r.iter().sum::<f64>() / r.len() as f64,
        n_levels: e.len(),
        poisson: reference::POISSON_1D_MEAN_R,
        wigner_dyson: reference::WIGNER_DYSON_MEAN_R,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RCurveRow {
    pub scale: f64,
    pub m_max: usize,
    pub mean_r: f64,
    pub n_levels: usize,
    pub cutoff: usize,
}

/// `<r>_H` versus `M_max` for each thermodynamic scale `L`. Each `L` is
/// converged once at the largest `M_max` in the grid.
pub fn r_vs_cutoff_curve(
    p: &BoseHubbardParams,
    scales: &[f64],
    m_max_grid: &[usize],
    max_cutoff: usize,
) -> Result<Vec<RCurveRow>> {
    let top = m_max_grid.iter().copied().max().ok_or_else(|| {
        Error::InvalidParameter("empty M_max grid".into())
    })?;
    let mut rows = Vec::new();
    for &l in scales {
        let scaled = apply_thermodynamic_scaling(p, l)?;
        let spec = hamiltonian_spectrum(&scaled, top, max_cutoff)?;
        for &m in m_max_grid {
            if m > spec.energies.len() {
                continue;
            }
            let r = r_statistic(&spec.energies, m)?;
            rows.push(RCurveRow {
                scale: l,
                m_max: m,
                mean_r: r.mean_r,
                n_levels: r.n_levels,
                cutoff: spec.cutoff,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::bose_hubbard_hamiltonian;
    use proptest::prelude::*;

    #[test]
    fn matrix_matches_operator_builder() {
        let p = BoseHubbardParams {
            n_sites: 3,
            ..BoseHubbardParams::dimer(2.5, 2.9, 3)
        };
        let h = bose_hubbard_matrix(&p).unwrap();
        let op = bose_hubbard_hamiltonian(&p).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                assert!((op.get(i, j).re - h[(i, j)]).abs() < 1e-12);
                assert!(op.get(i, j).im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anharmonic_ladder() {
        let p = BoseHubbardParams {
            detuning: 0.3,
            interaction: 1.0,
            hopping: 0.0,
            drive: 0.0,
            loss: 0.0,
            n_sites: 1,
            cutoff: 20,
        };
        let mut expect: Vec<f64> = (0..=20)
            .map(|n| {
                let n = n as f64;
                -0.3 * n + 0.5 * n * (n - 1.0)
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in levels(&p).unwrap().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn undriven_spectrum_is_union_of_sectors() {
        let p = BoseHubbardParams {
            n_sites: 3,
            ..BoseHubbardParams::dimer(1.1, 0.0, 4)
        };
        let full = levels(&p).unwrap();
        let sec = sector_spectrum(&p).unwrap();
        assert_eq!(full.len(), sec.len());
        for (a, b) in full.iter().zip(&sec) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_spacing_gives_one() {
        let e: Vec<f64> = (0..300).map(|k| 0.5 * k as f64).collect();
        assert!((r_statistic(&e, 300).unwrap().mean_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_loop_finds_stable_levels() {
        let p = BoseHubbardParams {
            cutoff: 6,
            ..BoseHubbardParams::dimer(2.5, 2.9, 6)
        };
        let s = hamiltonian_spectrum(&p, 20, 30).unwrap();
        assert_eq!(s.energies.len(), 20);
        let more = levels(&BoseHubbardParams { cutoff: s.cutoff + 4, ..p }).unwrap();
        for (a, b) in s.energies.iter().zip(&more) {
            assert!((a - b).abs() / a.abs().max(1.0) < 1e-7);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = BoseHubbardParams {
            cutoff: 4,
            ..BoseHubbardParams::dimer(2.5, 2.9, 4)
        };
        assert!(matches!(hamiltonian_spectrum(&p, 20, 6), Err(Error::NotConverged(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ratio_is_affine_invariant(seed in 0u64..1000, a in 0.01f64..100.0, b in -50.0f64..50.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let e: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
            let t: Vec<f64> = e.iter().map(|x| a * x + b).collect();
            let r1 = r_statistic(&e, 50).unwrap().mean_r;
            let r2 = r_statistic(&t, 50).unwrap().mean_r;
            prop_assert!((r1 - r2).abs() < 1e-9);
        }
    }
}
