//! N-dimensional FFT over row-major grids, built from 1-D transforms.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward (or unnormalized inverse) FFT of a row-major array.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(total, data.len(), "shape does not match data length");
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = total;
    let mut line = Vec::new();
    for &len in shape {
        stride /= len;
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        line.resize(len, Complex64::new(0.0, 0.0));
        let block = len * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, value) in line.iter().enumerate() {
                    data[base + k * stride] = *value;
                }
            }
        }
    }
}

/// Signed wavenumber of FFT bin `k` out of `len`.
pub fn signed_mode(k: usize, len: usize) -> i64 {
    if k <= len / 2 {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// Decomposes a flat row-major index into per-axis indices.
pub fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for axis in (0..shape.len()).rev() {
        out[axis] = flat % shape[axis];
        flat /= shape[axis];
    }
}
