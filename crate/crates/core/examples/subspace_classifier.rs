//! Nearest-TT-subspace classification of three synthetic classes, saved and reloaded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsubspace::data::add_noise;
use ttsubspace::synthetic::{random_subspace, sample_in_subspace};
use ttsubspace::ttpca::{fit_classifier, ClassModel, TtPcaConfig};
use ttsubspace::{LabeledDataset, Matrix};

fn main() -> ttsubspace::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = vec![4, 4, 4];
    let per_class = 120;
    let mut data = Matrix::zeros(64, 3 * per_class);
    let mut labels = Vec::new();
    for c in 0..3 {
        let s = random_subspace(&dims, &[2, 3, 2], &mut rng)?;
        data.columns_mut(c * per_class, per_class)
            .copy_from(&sample_in_subspace(&s, per_class, &mut rng));
        labels.extend(std::iter::repeat_n(10 * (c as i64 + 1), per_class));
    }
    let ds = LabeledDataset::from_raw_labels(data, &labels, dims)?;
    let ds = add_noise(&ds, 0.1, 1)?;
    let (train, test) = ds.split(180, 2)?;

    let model = fit_classifier(&train, &TtPcaConfig::threshold(0.3))?;
    for (class, name) in model.classes().iter().zip(model.label_names()) {
        println!("class {name}: ranks {:?}", class.ranks());
    }

    let restored = ClassModel::from_bytes(&model.to_bytes())?;
    let wrong = (0..test.n_samples())
        .filter(|&i| restored.classify(&test.sample(i)).unwrap() != test.labels()[i])
        .count();
    println!("test error {wrong}/{}", test.n_samples());
    Ok(())
}
