//! Liouvillian assembly and full non-Hermitian eigendecomposition.
//!
//! Right eigenvectors are the columns of `V`; left eigenvectors are taken as
//! the rows of `W = V^{-1}`, which makes the pair biorthonormal by
//! construction (`W V = 1`). With `vec(sigma_j) = conj(W[j, :])^T` the spectral
//! weight of `rho` is `c_j = Tr[sigma_j^dagger rho] = W[j, :] vec(rho)`.
//! Right eigenvectors carry unit Frobenius norm, except the steady one, which
//! is scaled to unit trace so that `sigma_0` is the identity.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::operator::{devectorize, vectorize, HilbertSpace, Operator, SuperOperator};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest Liouvillian dimension diagonalized without an explicit override.
pub const MAX_DIM_UNFORCED: usize = 5000;
/// Relative tolerance (to the spectral radius) for counting null eigenvalues.
pub const ZERO_TOL_REL: f64 = 1e-9;
/// Steady-state eigenvalues below this are an error, not a rounding artefact.
pub const POSITIVITY_FLOOR: f64 = -1e-9;
/// Target for `|W V x - x| / |x|` on a random probe; above it a warning is logged.
pub const BIORTHO_TOL: f64 = 1e-6;
/// Above this residual the eigenbasis is rejected as (nearly) defective.
pub const BIORTHO_FAIL: f64 = 1e-4;

/// `-i[H, .] + sum_mu gamma_mu D[L_mu]` in the column-stacking convention.
pub fn assemble(model: &ModelSpec) -> Result<SuperOperator> {
    let space = model.space();
    let mut s = SuperOperator::zeros(space);
    let h = model.hamiltonian();
    s.add_left(-I, h);
    s.add_right(I, h);
    for jump in model.jumps() {
        if jump.rate == 0.0 {
            continue;
        }
        let g = C64::new(jump.rate, 0.0);
        let l = &jump.op;
        let lbar: Vec<_> = l
            .nonzeros()
            .into_iter()
            .map(|(i, j, v)| (i, j, v.conj()))
            .collect();
        s.add_kron(g, &lbar, &l.nonzeros());
        let ldl = &l.adjoint() * l;
        s.add_left(-0.5 * g, &ldl);
        s.add_right(-0.5 * g, &ldl);
    }
    Ok(s)
}

/// Refuses Liouvillian dimensions above [`MAX_DIM_UNFORCED`] unless `force`.
pub fn check_size(liouvillian_dim: usize, force: bool) -> Result<()> {
    if liouvillian_dim > MAX_DIM_UNFORCED && !force {
        return Err(Error::ResourceGuard {
            dim: liouvillian_dim,
            limit: MAX_DIM_UNFORCED,
        });
    }
    Ok(())
}

/// Full eigendecomposition of a Liouvillian.
#[derive(Clone, Debug)]
pub struct LiouvillianSpectrum {
    space: HilbertSpace,
    eigenvalues: Vec<C64>,
    right: Mat<C64>,
    left: Mat<C64>,
    steady_index: usize,
    spectral_radius: f64,
}

/// Consumes the superoperator so its storage is released before `V^{-1}` is
/// formed; at the largest sizes this is the difference between two and
/// three dense copies.
pub fn diagonalize(l: SuperOperator, force: bool) -> Result<LiouvillianSpectrum> {
    let n = l.dim();
    check_size(n, force)?;
    let space = l.space().clone();
    let m = l.into_matrix();
    if m.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::InvalidInput("Liouvillian has non-finite entries".into()));
    }
    let evd = m.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    drop(m);
    let eigenvalues: Vec<C64> = (0..n).map(|i| evd.S()[i]).collect();
    let mut right = evd.U().to_owned();
    drop(evd);

    let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let steady_index = eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidDimension("empty Liouvillian".into()))?;

    let d = space.dim();
    for j in 0..n {
        let col = right.col_as_slice_mut(j);
        let scale = if j == steady_index {
            let tr: C64 = (0..d).map(|k| col[k + k * d]).sum();
            if tr.norm() < 1e-300 {
                return Err(Error::Eigen("steady eigenvector has zero trace".into()));
            }
            ONE / tr
        } else {
            let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            C64::new(1.0 / nrm, 0.0)
        };
        for z in col.iter_mut() {
            *z *= scale;
        }
    }

    let left = right.partial_piv_lu().inverse();
    let spec = LiouvillianSpectrum {
        space,
        eigenvalues,
        right,
        left,
        steady_index,
        spectral_radius,
    };
    let residual = spec.biorthonormality_residual(0x5eed);
    if residual >= BIORTHO_TOL && residual < BIORTHO_FAIL {
        log::warn!("ill-conditioned eigenbasis: biorthonormality residual {residual:.2e}");
    }
    if !(residual < BIORTHO_FAIL) {
        return Err(Error::Biorthonormalization {
            residual,
            clusters: describe_clusters(&spec.eigenvalues, 1e-6 * spectral_radius.max(1e-300)),
        });
    }
    Ok(spec)
}

/// Lists groups of eigenvalues closer than `tol`, the usual culprits of an
/// ill-conditioned eigenbasis.
fn describe_clusters(eigs: &[C64], tol: f64) -> String {
    let mut order: Vec<usize> = (0..eigs.len()).collect();
    order.sort_by(|&a, &b| eigs[a].re.total_cmp(&eigs[b].re));
    let mut out = Vec::new();
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if eigs[b].re - eigs[a].re > tol {
                break;
            }
            if (eigs[a] - eigs[b]).norm() < tol {
                out.push(format!("{:.6e}{:+.6e}i ~ {:.6e}{:+.6e}i", eigs[a].re, eigs[a].im, eigs[b].re, eigs[b].im));
            }
            if out.len() >= 10 {
                return out.join("; ");
            }
        }
    }
    if out.is_empty() {
        "none within tolerance".into()
    } else {
        out.join("; ")
    }
}

impl LiouvillianSpectrum {
    /// Rebuilds a spectrum from stored parts (used by the eigenbasis cache).
    pub(crate) fn from_parts(
        space: HilbertSpace,
        eigenvalues: Vec<C64>,
        right: Mat<C64>,
        left: Mat<C64>,
        steady_index: usize,
        spectral_radius: f64,
    ) -> Self {
        Self {
            space,
            eigenvalues,
            right,
            left,
            steady_index,
            spectral_radius,
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    /// Liouvillian dimension.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn steady_index(&self) -> usize {
        self.steady_index
    }

    pub fn steady_eigenvalue(&self) -> C64 {
        self.eigenvalues[self.steady_index]
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn zero_tolerance(&self) -> f64 {
        ZERO_TOL_REL * self.spectral_radius
    }

    /// Right eigenvectors as columns.
    pub fn right_vectors(&self) -> &Mat<C64> {
        &self.right
    }

    /// `V^{-1}`; row `j` is the conjugated vectorized left eigenoperator.
    pub fn left_vectors(&self) -> &Mat<C64> {
        &self.left
    }

    /// `eta_j`.
    pub fn right_op(&self, j: usize) -> Operator {
        devectorize(self.right.col_as_slice(j), &self.space).expect("consistent dimensions")
    }

    /// `sigma_j`, normalized so that `Tr[sigma_j^dagger eta_l] = delta_jl`.
    pub fn left_op(&self, j: usize) -> Operator {
        let row: Vec<C64> = (0..self.dim()).map(|k| self.left[(j, k)].conj()).collect();
        devectorize(&row, &self.space).expect("consistent dimensions")
    }

    /// `max_{jl} |Tr[sigma_j^dagger eta_l] - delta_jl|` on a random probe:
    /// returns `|W V x - x| / |x|` for a Gaussian `x`.
    pub fn biorthonormality_residual(&self, seed: u64) -> f64 {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let vx = matvec(&self.right, &x);
        let wvx = matvec(&self.left, &vx);
        let num: f64 = wvx.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        (num / den).sqrt()
    }

    /// `c_j = Tr[sigma_j^dagger rho]` for a vectorized `rho`.
    pub fn weights_of_vec(&self, vec_rho: &[C64]) -> Vec<C64> {
        matvec(&self.left, vec_rho)
    }

    pub fn spectral_weights(&self, rho: &Operator) -> Result<Vec<C64>> {
        self.check_space(rho)?;
        Ok(self.weights_of_vec(&vectorize(rho)))
    }

    /// Weights of the projectors `|psi><psi|`, one row per state, via a
    /// single matrix-matrix product.
    pub fn pure_state_weights(&self, states: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let d = self.space.dim();
        let n = self.dim();
        for psi in states {
            if psi.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: psi.len(),
                });
            }
        }
        let x = Mat::<C64>::from_fn(n, states.len(), |k, m| {
            let (i, j) = (k % d, k / d);
            states[m][i] * states[m][j].conj()
        });
        let c = &self.left * &x;
        Ok((0..states.len())
            .map(|m| c.col_as_slice(m).to_vec())
            .collect())
    }

    /// `sum_j c_j eta_j`.
    pub fn reconstruct(&self, weights: &[C64]) -> Result<Operator> {
        if weights.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: weights.len(),
            });
        }
        devectorize(&matvec(&self.right, weights), &self.space)
    }

    /// `exp(L t) rho` through the eigenbasis.
    pub fn propagate(&self, rho: &Operator, t: f64) -> Result<Operator> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite time {t}")));
        }
        let mut c = self.spectral_weights(rho)?;
        for (cj, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *cj *= (l * t).exp();
        }
        self.reconstruct(&c)
    }

    /// Steady state, Hermitian-symmetrized and repaired against tiny negative
    /// eigenvalues.
    pub fn steady_state(&self) -> Result<Operator> {
        let tol = self.zero_tolerance();
        let count = self.eigenvalues.iter().filter(|z| z.norm() < tol).count();
        if count > 1 {
            return Err(Error::MultipleSteadyStates { count, tol });
        }
        let rho = self.right_op(self.steady_index).hermitian_part();
        let (vals, _) = rho.hermitian_eigen()?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < POSITIVITY_FLOOR {
            return Err(Error::NotPositive(min));
        }
        let repaired = if min < 0.0 {
            rho.hermitian_map(|x| x.max(0.0))?
        } else {
            rho
        };
        let tr = repaired.trace().re;
        Ok(repaired.scale_real(1.0 / tr))
    }

    fn check_space(&self, rho: &Operator) -> Result<()> {
        if rho.dim() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                found: rho.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn matvec(m: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj.re == 0.0 && xj.im == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(m.col_as_slice(j)) {
            *o += a * xj;
        }
    }
    out
}
