use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ttsubspace::data::{load_csv, load_idx, save_csv, write_idx};
use ttsubspace::linalg::{gaussian_matrix, orthonormality_error};
use ttsubspace::model::storage::{dim_ttpca, storage_ttnpe, storage_ttpca};
use ttsubspace::stiefel::{solve, SolverConfig, StiefelProblem};
use ttsubspace::synthetic::{max_feasible_ranks, random_orthonormal_cores, random_subspace};
use ttsubspace::tensor::{
    left_refold, left_unfold, mode_refold, mode_unfold, right_refold, right_unfold,
};
use ttsubspace::ttpca::{self, TtPcaConfig};
use ttsubspace::{DenseTensor, LabeledDataset, Matrix, TtSubspace};

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=4, 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unfoldings_round_trip(a in 1usize..4, b in 1usize..5, c in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian_matrix(a * b, c, &mut rng);
        let t = left_refold(&m, a, b, c).unwrap();
        prop_assert_eq!(left_unfold(&t).unwrap(), m);
        let r = right_unfold(&t).unwrap();
        prop_assert_eq!(right_refold(&r, a, b, c).unwrap(), t.clone());
        for mode in 0..3 {
            let u = mode_unfold(&t, mode).unwrap();
            prop_assert_eq!(mode_refold(&u, t.shape(), mode).unwrap(), t.clone());
        }
    }

    #[test]
    fn ttpca_basis_is_orthonormal_and_projection_is_optimal(
        dims in dims_strategy(),
        n in 1usize..30,
        tau in 0.0f64..0.9,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: usize = dims.iter().product();
        let data = gaussian_matrix(d, n, &mut rng);
        let fit = ttpca::fit(&data, &dims, &TtPcaConfig::threshold(tau)).unwrap();
        let u = fit.subspace().basis();
        prop_assert!(orthonormality_error(u) < 1e-10);
        // the representation is the orthogonal projection, so the residual is orthogonal to U
        let resid = &data - fit.reconstruction();
        prop_assert!((u.transpose() * &resid).amax() < 1e-9 * data.amax().max(1.0));
        prop_assert!(resid.norm() <= data.norm() * (1.0 + 1e-12));
        let ranks = fit.ranks();
        prop_assert_eq!(ranks[0], 1);
        for (i, w) in ranks.windows(2).enumerate() {
            prop_assert!(w[1] >= 1 && w[1] <= w[0] * dims[i]);
        }
    }

    #[test]
    fn smaller_tau_never_loses_accuracy(dims in dims_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: usize = dims.iter().product();
        let data = gaussian_matrix(d, 12, &mut rng);
        let err = |tau: f64| {
            let f = ttpca::fit(&data, &dims, &TtPcaConfig::threshold(tau)).unwrap();
            (&data - f.reconstruction()).norm()
        };
        prop_assert!(err(0.05) <= err(0.5) + 1e-9);
        prop_assert!(err(0.0) <= 1e-9 * data.norm());
    }

    #[test]
    fn subspace_file_round_trips(dims in dims_strategy(), r_n in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: usize = dims.iter().product();
        let r_n = r_n.min(d);
        let ranks = max_feasible_ranks(&dims, r_n);
        let s = TtSubspace::new(random_orthonormal_cores(&dims, &ranks, &mut rng).unwrap()).unwrap();
        let bytes = s.to_bytes();
        prop_assert_eq!(&bytes[..4], b"TTSS");
        let back = TtSubspace::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.cores(), s.cores());
        prop_assert_eq!(back.is_orthonormal(), s.is_orthonormal());
        prop_assert!(TtSubspace::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn storage_is_basis_plus_embedding(dims in dims_strategy(), r_n in 1usize..5, n_tr in 1u64..500) {
        let d: usize = dims.iter().product();
        let ranks = max_feasible_ranks(&dims, r_n.min(d));
        let pca = storage_ttpca(&dims, &ranks, n_tr).unwrap();
        let npe = storage_ttnpe(&dims, &ranks, n_tr).unwrap();
        prop_assert_eq!(pca.subspace_dim, dim_ttpca(&dims, &ranks).unwrap());
        prop_assert_eq!(npe.total_storage, pca.subspace_dim + *ranks.last().unwrap() as u64 * n_tr);
        prop_assert!((npe.compression_ratio - npe.total_storage as f64 / (n_tr as f64 * d as f64)).abs() < 1e-15);
    }

    #[test]
    fn solver_stays_on_the_manifold(m in 2usize..7, q in 1usize..4, seed in any::<u64>()) {
        let q = q.min(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian_matrix(m + 2, m, &mut rng);
        let b = gaussian_matrix(q, 3, &mut rng);
        let c = gaussian_matrix(m + 2, 3, &mut rng);
        let prob = StiefelProblem::new(a, b, c).unwrap();
        let x0 = ttsubspace::linalg::random_orthonormal(m, q, &mut rng);
        let rep = solve(&prob, &x0, &SolverConfig::default()).unwrap();
        prop_assert!(orthonormality_error(&rep.x) < 1e-8);
        prop_assert!(rep.objective <= prob.objective(&x0).unwrap() + 1e-10);
    }
}

fn small_dataset(seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = random_subspace(&[2, 3], &[2, 2], &mut rng).unwrap();
    let data = s.basis() * gaussian_matrix(2, 5, &mut rng);
    LabeledDataset::from_raw_labels(data, &[3, 1, 3, 7, 1], vec![2, 3]).unwrap()
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let ds = small_dataset(1);
    save_csv(&ds, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.data(), ds.data());
    assert_eq!(
        (0..5).map(|i| back.raw_label(i)).collect::<Vec<_>>(),
        vec![3, 1, 3, 7, 1]
    );
}

#[test]
fn idx_round_trip_on_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab) = (dir.path().join("x-images.idx"), dir.path().join("x-labels.idx"));
    let data = Matrix::from_fn(6, 4, |r, c| ((r * 37 + c * 11) % 256) as f64);
    let ds = LabeledDataset::from_raw_labels(data, &[0, 9, 0, 4], vec![2, 3]).unwrap();
    write_idx(&ds, &img, &lab).unwrap();
    let back = load_idx(&img, &lab).unwrap();
    assert_eq!(back.data(), ds.data());
    assert_eq!(back.label_names(), &[0, 4, 9]);
    let t: DenseTensor = back.sample(1);
    assert_eq!(t.data(), ds.sample_slice(1));
}

#[test]
fn mnist_fixture_is_intact() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    for which in ["train", "test"] {
        let ds = load_idx(
            dir.join(format!("mnist12-{which}-images.idx")),
            dir.join(format!("mnist12-{which}-labels.idx")),
        )
        .unwrap();
        assert_eq!(ds.n_samples(), 400);
        assert_eq!(ds.dim(), 784);
        assert_eq!(ds.label_names(), &[1, 2]);
        let per_class: Vec<usize> = (0..2).map(|c| ds.labels().iter().filter(|&&l| l == c).count()).collect();
        assert_eq!(per_class, vec![200, 200]);
        assert!(ds.data().iter().all(|&v| (0.0..=255.0).contains(&v) && v.fract() == 0.0));
    }
}
