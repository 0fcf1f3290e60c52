//! Matrix kernels backing the tape's linear operations.

/// `out[b, o] (+)= sum_i x[b, i] * w[o, i]`, with `x: [rows × inner]`, `w: [outs × inner]`.
pub fn matmul_wt(
    x: &[f64],
    w: &[f64],
    rows: usize,
    inner: usize,
    outs: usize,
    out: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(x.len(), rows * inner);
    assert_eq!(w.len(), outs * inner);
    assert_eq!(out.len(), rows * outs);
    if rows == 0 || outs == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths match the dimensions and strides asserted above.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            inner,
            outs,
            1.0,
            x.as_ptr(),
            inner as isize,
            1,
            w.as_ptr(),
            1,
            inner as isize,
            beta,
            out.as_mut_ptr(),
            outs as isize,
            1,
        );
    }
}

/// `out[b, i] += sum_o g[b, o] * w[o, i]`.
pub fn matmul_acc(g: &[f64], w: &[f64], rows: usize, outs: usize, inner: usize, out: &mut [f64]) {
    assert_eq!(g.len(), rows * outs);
    assert_eq!(w.len(), outs * inner);
    assert_eq!(out.len(), rows * inner);
    if rows == 0 || inner == 0 {
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            outs,
            inner,
            1.0,
            g.as_ptr(),
            outs as isize,
            1,
            w.as_ptr(),
            inner as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            inner as isize,
            1,
        );
    }
}

/// `out[o, i] += sum_b g[b, o] * x[b, i]`.
pub fn matmul_tn_acc(
    g: &[f64],
    x: &[f64],
    rows: usize,
    outs: usize,
    inner: usize,
    out: &mut [f64],
) {
    assert_eq!(g.len(), rows * outs);
    assert_eq!(x.len(), rows * inner);
    assert_eq!(out.len(), outs * inner);
    if outs == 0 || inner == 0 {
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            outs,
            rows,
            inner,
            1.0,
            g.as_ptr(),
            1,
            outs as isize,
            x.as_ptr(),
            inner as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            inner as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_wt(x: &[f64], w: &[f64], rows: usize, inner: usize, outs: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * outs];
        for b in 0..rows {
            for o in 0..outs {
                out[b * outs + o] = (0..inner)
                    .map(|i| x[b * inner + i] * w[o * inner + i])
                    .sum();
            }
        }
        out
    }

    #[test]
    fn gemm_wrappers_match_loops() {
        let (rows, inner, outs) = (3, 4, 5);
        let x: Vec<f64> = (0..rows * inner).map(|v| v as f64 * 0.5 - 2.0).collect();
        let w: Vec<f64> = (0..outs * inner).map(|v| (v as f64).sin()).collect();
        let g: Vec<f64> = (0..rows * outs).map(|v| (v as f64).cos()).collect();

        let mut out = vec![0.0; rows * outs];
        matmul_wt(&x, &w, rows, inner, outs, &mut out, false);
        for (a, b) in out.iter().zip(naive_wt(&x, &w, rows, inner, outs)) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut dx = vec![0.0; rows * inner];
        matmul_acc(&g, &w, rows, outs, inner, &mut dx);
        for b in 0..rows {
            for i in 0..inner {
                let want: f64 = (0..outs).map(|o| g[b * outs + o] * w[o * inner + i]).sum();
                assert!((dx[b * inner + i] - want).abs() < 1e-12);
            }
        }

        let mut dw = vec![0.0; outs * inner];
        matmul_tn_acc(&g, &x, rows, outs, inner, &mut dw);
        for o in 0..outs {
            for i in 0..inner {
                let want: f64 = (0..rows).map(|b| g[b * outs + o] * x[b * inner + i]).sum();
                assert!((dw[o * inner + i] - want).abs() < 1e-12);
            }
        }
    }
}
