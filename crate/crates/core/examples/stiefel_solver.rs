//! One constrained core update: min ||A X B - C|| over X with orthonormal columns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsubspace::linalg::{gaussian_matrix, orthonormality_error, random_orthonormal};
use ttsubspace::stiefel::{solve, SolverConfig, StiefelProblem};

fn main() -> ttsubspace::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = gaussian_matrix(12, 8, &mut rng);
    let b = gaussian_matrix(3, 6, &mut rng);
    let c = gaussian_matrix(12, 6, &mut rng);
    let prob = StiefelProblem::new(a, b, c)?;
    let x0 = random_orthonormal(8, 3, &mut rng);

    for bb in [false, true] {
        let cfg = SolverConfig { bb_step: bb, ..SolverConfig::default() };
        let rep = solve(&prob, &x0, &cfg)?;
        println!(
            "bb_step {bb}: f {:.6} -> {:.6} in {} iterations ({:?}), |X^T X - I| {:.1e}",
            rep.history[0],
            rep.objective,
            rep.iterations,
            rep.stop,
            orthonormality_error(&rep.x)
        );
    }
    Ok(())
}
