//! Small dense helpers shared by the generators and baselines.

use nalgebra::DMatrix;
use num_complex::Complex64;

const GRAM_CHUNK: usize = 2048;

/// `Σ_i h_i h_iᴴ` over the rows of a row-major `count × dim` buffer.
///
/// The complex product is carried out as one real Gram matrix of the stacked
/// `[Re h; Im h]` vectors so the heavy lifting lands in the optimized f64 GEMM.
pub(crate) fn gram_of_rows(samples: &[Complex64], dim: usize) -> DMatrix<Complex64> {
    let count = if dim == 0 { 0 } else { samples.len() / dim };
    let two = 2 * dim;
    let mut acc = DMatrix::<f64>::zeros(two, two);
    let mut start = 0;
    while start < count {
        let len = GRAM_CHUNK.min(count - start);
        let stacked = DMatrix::<f64>::from_fn(two, len, |r, c| {
            let h = samples[(start + c) * dim + (r % dim)];
            if r < dim {
                h.re
            } else {
                h.im
            }
        });
        let stacked_t = stacked.transpose();
        acc.gemm(1.0, &stacked, &stacked_t, 1.0);
        start += len;
    }
    DMatrix::from_fn(dim, dim, |i, j| {
        let rr = acc[(i, j)];
        let ii = acc[(dim + i, dim + j)];
        let ir = acc[(dim + i, j)];
        let ri = acc[(i, dim + j)];
        Complex64::new(rr + ii, ir - ri)
    })
}

/// Makes the first entry with non-negligible magnitude real and positive.
pub(crate) fn fix_phase(v: &mut [Complex64]) {
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-8 * peak) {
        let rot = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

pub(crate) fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
