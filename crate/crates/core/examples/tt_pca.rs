//! TT-PCA on data drawn from a known TT subspace, with threshold and fixed ranks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsubspace::linalg::gaussian_matrix;
use ttsubspace::synthetic::{random_subspace, sample_in_subspace};
use ttsubspace::ttpca::{fit, TtPcaConfig};

fn main() -> ttsubspace::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dims = [4, 5, 4];
    let truth = random_subspace(&dims, &[3, 4, 3], &mut rng)?;
    let clean = sample_in_subspace(&truth, 200, &mut rng);
    let data = &clean + gaussian_matrix(80, 200, &mut rng) * 0.05;

    for tau in [0.0, 0.05, 0.2, 0.5] {
        let f = fit(&data, &dims, &TtPcaConfig::threshold(tau))?;
        let err = (&data - f.reconstruction()).norm() / data.norm();
        println!("tau {tau:<4} ranks {:?} rel. error {err:.4}", f.ranks());
    }

    let f = fit(&data, &dims, &TtPcaConfig::fixed(vec![3, 4, 3]))?;
    let err_clean = (&clean - f.reconstruction()).norm() / clean.norm();
    println!("fixed ranks {:?}: distance to clean data {err_clean:.4}", f.ranks());
    Ok(())
}
