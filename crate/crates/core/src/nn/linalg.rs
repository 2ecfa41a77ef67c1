use super::mat::Mat;

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    debug_assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!((m - 1) * rsc + n - 1 < c.len());
    // SAFETY: the strides and extents above stay inside the three slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// `x * w^T` for a row-major weight of shape `out_dim x x.cols()`.
pub fn matmul_bt(x: &Mat, w: &[f64], out_dim: usize) -> Mat {
    let (rows, inner) = (x.rows(), x.cols());
    assert_eq!(w.len(), out_dim * inner, "weight shape mismatch");
    let mut out = Mat::zeros(rows, out_dim);
    gemm(rows, inner, out_dim, x.data(), inner, 1, w, 1, inner, 0.0, out.data_mut(), out_dim);
    out
}

/// `dx += dy * w` for a row-major weight of shape `dy.cols() x dx.cols()`.
pub fn add_matmul(dx: &mut Mat, dy: &Mat, w: &[f64]) {
    let (rows, out_dim, in_dim) = (dy.rows(), dy.cols(), dx.cols());
    assert_eq!(dx.rows(), rows);
    assert_eq!(w.len(), out_dim * in_dim, "weight shape mismatch");
    gemm(rows, out_dim, in_dim, dy.data(), out_dim, 1, w, in_dim, 1, 1.0, dx.data_mut(), in_dim);
}

/// `dw += dy^T * x` for a row-major gradient of shape `dy.cols() x x.cols()`.
pub fn add_matmul_at(dw: &mut [f64], dy: &Mat, x: &Mat) {
    let (rows, out_dim, in_dim) = (dy.rows(), dy.cols(), x.cols());
    assert_eq!(x.rows(), rows);
    assert_eq!(dw.len(), out_dim * in_dim, "gradient shape mismatch");
    gemm(out_dim, rows, in_dim, dy.data(), 1, out_dim, x.data(), in_dim, 1, 1.0, dw, in_dim);
}
