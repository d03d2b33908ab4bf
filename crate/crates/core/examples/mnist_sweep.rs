//! Error vs compression ratio on the bundled MNIST 1-vs-2 sample.
//!
//! `cargo run --release --example mnist_sweep -- plot.csv`

use std::path::Path;

use ttsubspace::data::load_idx;
use ttsubspace::experiment::{emit_plotdata, sweep_datasets, ExperimentConfig, Method};
use ttsubspace::synthetic::max_feasible_ranks;

fn main() -> ttsubspace::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let dims = vec![4, 7, 4, 7];
    let load = |which: &str| {
        load_idx(
            dir.join(format!("mnist12-{which}-images.idx")),
            dir.join(format!("mnist12-{which}-labels.idx")),
        )?
        .reshape(dims.clone())
    };
    let (train, test) = (load("train")?, load("test")?);

    let mut ranks: Vec<Vec<usize>> = [4, 8, 16, 64, 256]
        .iter()
        .map(|&r| max_feasible_ranks(&dims, r))
        .collect();
    ranks.extend([vec![2, 4, 4, 4], vec![4, 4, 8, 32]]);
    let cfg = ExperimentConfig {
        methods: vec![Method::TtNpe, Method::TtPca, Method::Knn],
        ranks,
        knn_k: vec![5],
        ..ExperimentConfig::default()
    };
    let rows = sweep_datasets(&train, &test, &cfg)?;
    for r in &rows {
        println!(
            "{:<6} {:<22} ratio {:>9.5} error {:.4}",
            r.method.as_str(),
            r.param,
            r.compression_ratio,
            r.error.unwrap_or(f64::NAN)
        );
    }
    if let Some(out) = std::env::args().nth(1) {
        emit_plotdata(&rows, &out)?;
        println!("wrote {out}");
    }
    Ok(())
}
