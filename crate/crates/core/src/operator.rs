//! Dense operator algebra on finite tensor-product Hilbert spaces, plus the
//! superoperator (vectorization) machinery.
//!
//! Vectorization is column-stacking throughout the crate: the entry
//! `rho[(i, j)]` of a `d x d` operator lands at index `i + j * d`. With this
//! convention `vec(A rho B) = (B^T kron A) vec(rho)`.

use std::ops::{Add, Mul, Sub};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the largest entry of `A - A^dagger`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A finite tensor product of local spaces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    factor_dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidDimension("no tensor factors".into()));
        }
        if factor_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDimension(format!(
                "zero-dimensional factor in {factor_dims:?}"
            )));
        }
        Ok(Self { factor_dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn n_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    /// Splits a flat basis index into per-factor occupation indices.
    /// The first factor is the most significant digit.
    pub fn unflatten(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factor_dims.len()];
        for (slot, &d) in digits.iter_mut().zip(&self.factor_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        digits
    }

    pub fn flatten(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factor_dims)
            .fold(0, |acc, (&k, &d)| acc * d + k)
    }
}

/// A dense complex matrix tagged with the space it acts on.
#[derive(Clone, Debug)]
pub struct Operator {
    space: HilbertSpace,
    matrix: Mat<C64>,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_fn(space: HilbertSpace, f: impl FnMut(usize, usize) -> C64) -> Self {
        let d = space.dim();
        let matrix = Mat::from_fn(d, d, f);
        Self { space, matrix }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        Self::from_fn(space.clone(), |_, _| C64::new(0.0, 0.0))
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        Self::from_fn(space.clone(), |i, j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `|psi><phi|`
    pub fn outer(space: &HilbertSpace, psi: &[C64], phi: &[C64]) -> Result<Self> {
        let d = space.dim();
        if psi.len() != d || phi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if psi.len() != d { psi.len() } else { phi.len() },
            });
        }
        Ok(Self::from_fn(space.clone(), |i, j| psi[i] * phi[j].conj()))
    }

    pub fn projector(space: &HilbertSpace, psi: &[C64]) -> Result<Self> {
        Self::outer(space, psi, psi)
    }

    pub fn diagonal(space: &HilbertSpace, diag: &[f64]) -> Result<Self> {
        if diag.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: diag.len(),
            });
        }
        Ok(Self::from_fn(space.clone(), |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint().to_owned(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.transpose().to_owned(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.conjugate().to_owned(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let d = self.dim();
        Self {
            space: self.space.clone(),
            matrix: Mat::from_fn(d, d, |i, j| self.matrix[(i, j)] * s),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm_l2()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.norm_max()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "operator dimension mismatch");
        let d = self.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                m = m.max((self.matrix[(i, j)] - other.matrix[(i, j)]).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                if (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// `(A + A^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        let d = self.dim();
        Self {
            space: self.space.clone(),
            matrix: Mat::from_fn(d, d, |i, j| {
                (self.matrix[(i, j)] + self.matrix[(j, i)].conj()) * 0.5
            }),
        }
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn anticommutator(&self, other: &Operator) -> Self {
        &(self * other) + &(other * self)
    }

    /// Matrix-vector product.
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let d = self.dim();
        assert_eq!(psi.len(), d, "state length mismatch");
        let mut out = vec![C64::new(0.0, 0.0); d];
        for (j, &pj) in psi.iter().enumerate() {
            if pj == C64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.col_as_slice(j);
            for (o, &a) in out.iter_mut().zip(col) {
                *o += a * pj;
            }
        }
        out
    }

    /// `<psi| A |psi>` for a (not necessarily normalized) state.
    pub fn expectation_in(&self, psi: &[C64]) -> C64 {
        let a_psi = self.apply(psi);
        psi.iter().zip(&a_psi).map(|(p, q)| p.conj() * q).sum()
    }

    /// Nonzero entries as `(row, col, value)` triplets.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let d = self.dim();
        let mut out = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let v = self.matrix[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Zero-pads the operator into a larger single-factor space, keeping the
    /// existing block in the top-left corner.
    pub fn pad_to(&self, new_dim: usize) -> Result<Self> {
        let d = self.dim();
        if new_dim < d {
            return Err(Error::InvalidDimension(format!(
                "cannot pad dimension {d} down to {new_dim}"
            )));
        }
        let space = HilbertSpace::single(new_dim)?;
        Ok(Self::from_fn(space, |i, j| {
            if i < d && j < d {
                self.matrix[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Hermitian eigendecomposition, eigenvalues ascending. The caller is
    /// responsible for passing a Hermitian operator.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Mat<C64>)> {
        let h = self.hermitian_part();
        let evd = h
            .matrix
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let d = self.dim();
        let values = (0..d).map(|i| evd.S()[i].re).collect();
        Ok((values, evd.U().to_owned()))
    }

    /// Applies `f` to the spectrum of a Hermitian operator.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (vals, vecs) = self.hermitian_eigen()?;
        let d = self.dim();
        let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
        let mut m = Mat::<C64>::zeros(d, d);
        for k in 0..d {
            if fv[k] == 0.0 {
                continue;
            }
            for j in 0..d {
                let b = vecs[(j, k)].conj() * fv[k];
                for i in 0..d {
                    m[(i, j)] += vecs[(i, k)] * b;
                }
            }
        }
        Ok(Self {
            space: self.space.clone(),
            matrix: m,
        })
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// Bosonic lowering operator truncated to `dim` Fock levels.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "ladder operator needs dim >= 2, got {dim}"
        )));
    }
    let space = HilbertSpace::single(dim)?;
    Ok(Operator::from_fn(space, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<Operator> {
    let space = HilbertSpace::single(dim)?;
    let diag: Vec<f64> = (0..dim).map(|n| n as f64).collect();
    Operator::diagonal(&space, &diag)
}

fn qubit(entries: [[C64; 2]; 2]) -> Operator {
    let space = HilbertSpace::single(2).expect("qubit space");
    Operator::from_fn(space, |i, j| entries[i][j])
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Basis convention for spins: index 0 is spin up (`sigma_z = +1`).
pub fn sigma_x() -> Operator {
    qubit([[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> Operator {
    qubit([[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> Operator {
    qubit([[ONE, ZERO], [ZERO, -ONE]])
}

/// Raising operator `|up><down|`.
pub fn sigma_plus() -> Operator {
    qubit([[ZERO, ONE], [ZERO, ZERO]])
}

pub fn sigma_minus() -> Operator {
    qubit([[ZERO, ZERO], [ONE, ZERO]])
}

/// Places a local operator on factor `site` of `space`, identity elsewhere.
pub fn embed(op: &Operator, site: usize, space: &HilbertSpace) -> Result<Operator> {
    let dims = space.factor_dims();
    if site >= dims.len() {
        return Err(Error::SiteOutOfRange {
            site,
            n_factors: dims.len(),
        });
    }
    if op.dim() != dims[site] {
        return Err(Error::DimensionMismatch {
            expected: dims[site],
            found: op.dim(),
        });
    }
    let local = op.nonzeros();
    let total = space.dim();
    let mut m = Mat::<C64>::zeros(total, total);
    // stride of the chosen factor in the flat index
    let inner: usize = dims[site + 1..].iter().product();
    let outer: usize = dims[..site].iter().product();
    let local_dim = dims[site];
    for o in 0..outer {
        for n in 0..inner {
            let base = o * local_dim * inner + n;
            for &(i, j, v) in &local {
                m[(base + i * inner, base + j * inner)] += v;
            }
        }
    }
    Operator::new(space.clone(), m)
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &Operator) -> Vec<C64> {
    let d = rho.dim();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        v.extend_from_slice(rho.matrix().col_as_slice(j));
    }
    v
}

pub fn devectorize(v: &[C64], space: &HilbertSpace) -> Result<Operator> {
    let d = space.dim();
    if v.len() != d * d {
        let root = (v.len() as f64).sqrt().round() as usize;
        if root * root != v.len() {
            return Err(Error::InvalidDimension(format!(
                "vector length {} is not a perfect square",
                v.len()
            )));
        }
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: v.len(),
        });
    }
    Ok(Operator::from_fn(space.clone(), |i, j| v[i + j * d]))
}

/// A linear map on vectorized operators of `space`.
#[derive(Clone, Debug)]
pub struct SuperOperator {
    space: HilbertSpace,
    matrix: Mat<C64>,
}

impl SuperOperator {
    pub fn new(space: HilbertSpace, matrix: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d * d || matrix.ncols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: matrix.nrows(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.dim() * space.dim();
        Self {
            space: space.clone(),
            matrix: Mat::zeros(n, n),
        }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let n = space.dim() * space.dim();
        Self {
            space: space.clone(),
            matrix: Mat::identity(n, n),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    /// Dimension of the vectorized space, `dim(space)^2`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "vector length mismatch");
        let mut out = vec![ZERO; n];
        for (j, &vj) in v.iter().enumerate() {
            if vj == ZERO {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.matrix.col_as_slice(j)) {
                *o += a * vj;
            }
        }
        out
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        let out = self.apply_vec(&vectorize(rho));
        devectorize(&out, &self.space).expect("superoperator space is consistent")
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim(), other.dim(), "superoperator dimension mismatch");
        SuperOperator {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Accumulates `scale * (b kron a)` using only the nonzero entries of
    /// the factors.
    pub(crate) fn add_kron(&mut self, scale: C64, b: &[(usize, usize, C64)], a: &[(usize, usize, C64)]) {
        let d = self.space.dim();
        for &(p, q, bv) in b {
            let f = scale * bv;
            for &(i, j, av) in a {
                self.matrix[(p * d + i, q * d + j)] += f * av;
            }
        }
    }

    /// Accumulates `scale * (I kron a)`.
    pub(crate) fn add_left(&mut self, scale: C64, a: &Operator) {
        let d = self.space.dim();
        let nz = a.nonzeros();
        for p in 0..d {
            for &(i, j, av) in &nz {
                self.matrix[(p * d + i, p * d + j)] += scale * av;
            }
        }
    }

    /// Accumulates `scale * (b^T kron I)`.
    pub(crate) fn add_right(&mut self, scale: C64, b: &Operator) {
        let d = self.space.dim();
        let nz = b.nonzeros();
        for &(i, j, bv) in &nz {
            // (b^T)[j, i] = b[i, j]
            for k in 0..d {
                self.matrix[(j * d + k, i * d + k)] += scale * bv;
            }
        }
    }
}

fn check_same_space(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Superoperator of `rho -> A rho B`.
pub fn sandwich_superop(a: &Operator, b: &Operator) -> Result<SuperOperator> {
    check_same_space(a, b)?;
    let mut s = SuperOperator::zeros(a.space());
    let bt: Vec<_> = b.nonzeros().into_iter().map(|(i, j, v)| (j, i, v)).collect();
    s.add_kron(ONE, &bt, &a.nonzeros());
    Ok(s)
}

/// Superoperator of `rho -> A rho`.
pub fn left_mult_superop(a: &Operator) -> SuperOperator {
    let mut s = SuperOperator::zeros(a.space());
    s.add_left(ONE, a);
    s
}

/// Superoperator of `rho -> rho B`.
pub fn right_mult_superop(b: &Operator) -> SuperOperator {
    let mut s = SuperOperator::zeros(b.space());
    s.add_right(ONE, b);
    s
}

/// Normalizes a state vector in place, returning its previous norm.
pub fn normalize(psi: &mut [C64]) -> f64 {
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for z in psi.iter_mut() {
            *z /= n;
        }
    }
    n
}

pub fn norm(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
