//! Gaussian random-matrix samplers.
//!
//! Normalizations: complex entries have unit mean modulus squared; GUE and
//! GOE off-diagonal entries have unit variance.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Gaussian with `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix with i.i.d. entries of unit variance.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<C64> {
    let mut m = Mat::<C64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

/// GUE matrix: `E|H_ij|^2 = 1` off the diagonal, real unit-variance diagonal.
pub fn gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<C64> {
    let mut m = Mat::<C64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(normal(rng), 0.0);
        for i in 0..j {
            let z = complex_normal(rng);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// GOE matrix with unit off-diagonal variance (diagonal variance 2).
pub fn goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = normal(rng) * std::f64::consts::SQRT_2;
        for i in 0..j {
            let x = normal(rng);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat<C64>) -> Vec<f64> {
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("Hermitian eigensolver converges on finite input")
}

pub fn symmetric_eigenvalues(m: &Mat<f64>) -> Vec<f64> {
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigensolver converges on finite input")
}

/// Eigenvalues of a general complex matrix.
pub fn complex_eigenvalues(m: &Mat<C64>) -> Vec<C64> {
    m.eigenvalues()
        .expect("dense eigensolver converges on finite input")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gue_is_hermitian_with_unit_offdiagonal_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gue(200, &mut rng);
        let mut acc = 0.0;
        let mut count = 0.0;
        for j in 0..200 {
            for i in 0..j {
                assert_eq!(m[(i, j)], m[(j, i)].conj());
                acc += m[(i, j)].norm_sqr();
                count += 1.0;
            }
        }
        assert!((acc / count - 1.0).abs() < 0.02);
    }

    #[test]
    fn ginibre_entries_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ginibre(300, 300, &mut rng);
        let mean_sq: f64 = (0..300)
            .flat_map(|j| (0..300).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            / 90_000.0;
        assert!((mean_sq - 1.0).abs() < 0.02);
    }
}
