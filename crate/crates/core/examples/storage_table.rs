//! Storage and compression ratios of every method for MNIST-sized data.

use ttsubspace::model::storage::{
    dim_tpca, storage_embedding, storage_pca, storage_tnpe, storage_ttnpe, storage_ttpca,
    StorageMethod, TpcaVariant,
};

fn main() -> ttsubspace::Result<()> {
    let dims = [4, 7, 4, 7];
    let d = 784;
    let n_tr = 2000;
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "r", "PCA", "TT-PCA", "TNPE", "TT-NPE");
    for r in [1, 2, 3, 4] {
        let ranks = [r; 4];
        println!(
            "{r:>4} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            storage_pca(d, r as u64, n_tr)?.compression_ratio,
            storage_ttpca(&dims, &ranks, n_tr)?.compression_ratio,
            storage_tnpe(&dims, &ranks, n_tr)?.compression_ratio,
            storage_ttnpe(&dims, &ranks, n_tr)?.compression_ratio,
        );
    }
    println!("T-PCA dim at ranks 2: {}", dim_tpca(&dims, &[2; 4], TpcaVariant::General)?);
    let knn = storage_embedding(StorageMethod::Knn, d, 4, 1, n_tr)?;
    println!("KNN stores {} numbers (ratio {})", knn.total_storage, knn.compression_ratio);
    Ok(())
}
