//! Writing and reading the TTSS subspace format.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsubspace::synthetic::random_subspace;
use ttsubspace::TtSubspace;

fn main() -> ttsubspace::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_subspace(&[2, 3, 4], &[2, 3, 2], &mut rng)?;
    let path = std::env::temp_dir().join("example.ttss");
    std::fs::write(&path, s.to_bytes()).expect("write model");

    let bytes = std::fs::read(&path).expect("read model");
    let back = TtSubspace::from_bytes(&bytes)?;
    println!("{} bytes at {}", bytes.len(), path.display());
    println!("dims {:?} ranks {:?} orthonormal {}", back.dims(), back.ranks(), back.is_orthonormal());
    assert_eq!(back.basis(), s.basis());
    Ok(())
}
