//! Seeded random operators for tests, benches and fixtures.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoding::DensityMatrix;
use crate::linalg::{ComplexMatrix, TensorLayout};
use crate::Result;

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let entries = (0..rows * cols)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    ComplexMatrix::new(rows, cols, entries).expect("entry count matches shape")
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ginibre(rng, dim, dim).hermitian_part()
}

/// Random full-rank density `GG† / Tr(GG†)`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<DensityMatrix> {
    random_density_of_rank(rng, dim, dim)
}

/// Random density of the given rank.
pub fn random_density_of_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> Result<DensityMatrix> {
    let g = ginibre(rng, dim, rank.max(1));
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityMatrix::new(gg.scale(1.0 / tr), TensorLayout::flat(dim))
}

/// Random real symmetric density, as produced by the data encodings.
pub fn random_real_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<DensityMatrix> {
    let g = nalgebra::DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    DensityMatrix::from_psd(&(&g * g.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_densities_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in 1..6 {
            random_density(&mut rng, d).unwrap().validate(1e-12).unwrap();
            random_density_of_rank(&mut rng, d, 1).unwrap().validate(1e-12).unwrap();
            random_real_density(&mut rng, d).unwrap().validate(1e-12).unwrap();
        }
        assert!(random_hermitian(&mut rng, 4).is_hermitian(0.0));
    }
}
