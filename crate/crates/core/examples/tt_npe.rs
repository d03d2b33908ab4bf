//! TT-NPE embedding of two noisy synthetic classes, compared with raw KNN.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsubspace::data::add_noise;
use ttsubspace::synthetic::{random_subspace, sample_in_subspace};
use ttsubspace::ttnpe::{fit, knn_baseline, TtNpeConfig};
use ttsubspace::{LabeledDataset, Matrix};

fn main() -> ttsubspace::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dims = vec![3, 4, 3];
    let mut data = Matrix::zeros(36, 300);
    let mut labels = Vec::new();
    for c in 0..2 {
        let s = random_subspace(&dims, &[2, 3, 2], &mut rng)?;
        data.columns_mut(c * 150, 150)
            .copy_from(&sample_in_subspace(&s, 150, &mut rng));
        labels.extend(std::iter::repeat_n(c as i64, 150));
    }
    let ds = add_noise(&LabeledDataset::from_raw_labels(data, &labels, dims)?, 0.2, 5)?;
    let (train, test) = ds.split(200, 6)?;

    let k = 5;
    for ranks in [vec![2, 4, 4], vec![3, 6, 8], vec![3, 12, 36]] {
        let model = fit(&train, &TtNpeConfig::new(ranks.clone(), k))?;
        let wrong = (0..test.n_samples())
            .filter(|&i| model.classify_knn(&test.sample(i), k).unwrap() != test.labels()[i])
            .count();
        println!(
            "ranks {ranks:?}: {} sweeps, relaxed objective {:.3e}, test errors {wrong}/{}",
            model.sweeps,
            model.relaxed_objective(),
            test.n_samples()
        );
    }
    let wrong = (0..test.n_samples())
        .filter(|&i| knn_baseline(&train, &test.sample(i), k).unwrap() != test.labels()[i])
        .count();
    println!("raw KNN: test errors {wrong}/{}", test.n_samples());
    Ok(())
}
