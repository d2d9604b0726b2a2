//! Pure-state constructors and the initial-state families used for trajectories.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{normalize, HilbertSpace};
use crate::random_matrix::complex_normal;

/// Fock vector `|n>` in a mode of dimension `dim`.
pub fn fock(dim: usize, n: usize) -> Result<Vec<C64>> {
    if n >= dim {
        return Err(Error::InvalidParameter(format!(
            "Fock level {n} outside a mode of dimension {dim}"
        )));
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[n] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Coherent state `|alpha>` truncated to `dim` levels and renormalized.
pub fn coherent(dim: usize, alpha: C64) -> Vec<C64> {
    let mut v = Vec::with_capacity(dim);
    let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        v.push(amp);
        amp = amp * alpha / ((n + 1) as f64).sqrt();
    }
    normalize(&mut v);
    v
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
    normalize(&mut v);
    v
}

/// Kronecker product of local states, first factor most significant.
pub fn product(factors: &[Vec<C64>]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            for &b in f {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// `3 sqrt(F / (Delta - i gamma))`, the coherent amplitude used as the default
/// trajectory start for the driven Bose-Hubbard models.
pub fn default_coherent_amplitude(detuning: f64, drive: f64, loss: f64) -> C64 {
    3.0 * (C64::new(drive, 0.0) / C64::new(detuning, -loss)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialState {
    /// `|alpha> (x) |alpha> (x) ...` on every factor.
    Coherent { re: f64, im: f64 },
    /// `|n> (x) |n> (x) ...` with `n` drawn uniformly from `0..=max_n` per trajectory.
    Fock { max_n: usize },
    /// Haar-random vector in the full space, fresh per trajectory.
    Random,
    /// An explicit state vector.
    Given { amplitudes: Vec<(f64, f64)> },
}

impl InitialState {
    pub fn coherent(alpha: C64) -> Self {
        Self::Coherent {
            re: alpha.re,
            im: alpha.im,
        }
    }

    pub fn given(psi: &[C64]) -> Self {
        Self::Given {
            amplitudes: psi.iter().map(|z| (z.re, z.im)).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: &HilbertSpace, rng: &mut R) -> Result<Vec<C64>> {
        let dims = space.factor_dims();
        match self {
            Self::Coherent { re, im } => {
                let alpha = C64::new(*re, *im);
                Ok(product(
                    &dims.iter().map(|&d| coherent(d, alpha)).collect::<Vec<_>>(),
                ))
            }
            Self::Fock { max_n } => {
                let n = rng.random_range(0..=*max_n);
                let locals = dims.iter().map(|&d| fock(d, n)).collect::<Result<Vec<_>>>()?;
                Ok(product(&locals))
            }
            Self::Random => Ok(random_state(space.dim(), rng)),
            Self::Given { amplitudes } => {
                if amplitudes.len() != space.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: space.dim(),
                        found: amplitudes.len(),
                    });
                }
                let mut v: Vec<C64> = amplitudes.iter().map(|&(r, i)| C64::new(r, i)).collect();
                if normalize(&mut v) == 0.0 {
                    return Err(Error::InvalidInput("zero initial state".into()));
                }
                Ok(v)
            }
        }
    }
}
