//! Unfoldings, n-mode products and the Kronecker form of a multilinear map.

use ftnet::{fold, kronecker, mode_product, multi_mode_product, unfold, DenseTensor, Matrix};

fn main() -> ftnet::Result<()> {
    // 2×2×2 tensor holding 1…8 in storage order (first index fastest).
    let x = DenseTensor::from_vec(vec![2, 2, 2], (1..=8).map(f64::from).collect())?;
    for mode in 0..3 {
        let m = unfold(&x, mode)?;
        println!("mode-{mode} unfolding ({}×{}):", m.rows(), m.cols());
        for i in 0..m.rows() {
            let row: Vec<f64> = (0..m.cols()).map(|j| m.get(i, j)).collect();
            println!("  {row:?}");
        }
        assert_eq!(fold(&m, mode, x.shape())?, x);
    }

    let a = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0], &[-1.0, 0.5]])?;
    let y = mode_product(&x, &a, 1)?;
    println!("X ×_1 A has extents {:?}", y.dims());

    // Y = X ×_0 A0 ×_1 A1 ×_2 A2, and its mode-1 unfolding as a Kronecker product.
    let a0 = Matrix::from_rows(&[&[1.0, -1.0]])?;
    let a2 = Matrix::from_rows(&[&[0.5, 2.0], &[1.0, 1.0]])?;
    let y = multi_mode_product(&x, &[(&a0, 0), (&a, 1), (&a2, 2)])?;
    let lhs = unfold(&y, 1)?;
    let rhs = a.matmul(&unfold(&x, 1)?)?.matmul(&kronecker(&a2, &a0)?.transpose())?;
    let err = lhs
        .data()
        .iter()
        .zip(rhs.data())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    println!("Y_(1) vs A1·X_(1)·(A2 ⊗ A0)ᵀ: max difference {err:.1e}");
    Ok(())
}
