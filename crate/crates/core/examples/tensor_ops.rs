//! Unfoldings and the connect product on tiny cores.

use ttsubspace::tensor::{connect_chain, connect_product, left_unfold, right_unfold};
use ttsubspace::DenseTensor;

fn main() -> ttsubspace::Result<()> {
    let a = DenseTensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0])?;
    let b = DenseTensor::new(vec![2, 3, 1], (1..=6).map(f64::from).collect())?;
    println!("L(a) =\n{}", left_unfold(&a)?);
    println!("R(b) =\n{}", right_unfold(&b)?);

    let ab = connect_product(&a, &b)?;
    println!("a * b has shape {:?}", ab.shape());
    println!("L(a * b) =\n{}", left_unfold(&ab)?);

    let chain = connect_chain(&[a, b], 1)?;
    assert_eq!(chain, ab);
    Ok(())
}
