//! Radix-2 Cooley-Tukey FFT.
//!
//! Forward transform is unnormalized, the inverse carries the 1/N factor,
//! matching the textbook overlap-save convention used by the block filters.
//! Lengths must be powers of two.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use super::array::ComplexArray;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("FFT length {0} is not a power of two")]
pub struct FftSizeError(pub usize);

fn check_len(n: usize) -> Result<(), FftSizeError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(FftSizeError(n));
    }
    Ok(())
}

/// In-place radix-2 decimation-in-time FFT. `data.len()` must be a power of
/// two; `inverse` selects the conjugate transform with 1/N scaling.
pub fn fft_in_place(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    debug_assert!(n.is_power_of_two(), "fft length {} not a power of two", n);
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 0..n - 1 {
        if i < j {
            data.swap(i, j);
        }
        let mut k = n >> 1;
        while k <= j {
            j -= k;
            k >>= 1;
        }
        j += k;
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut size = 2;
    while size <= n {
        let half = size >> 1;
        let angle = sign * 2.0 * PI / size as f64;
        let w = Complex64::new(angle.cos(), angle.sin());
        let mut start = 0;
        while start < n {
            let mut t = Complex64::new(1.0, 0.0);
            for k in 0..half {
                let u = start + k;
                let v = u + half;
                let tmp = t * data[v];
                data[v] = data[u] - tmp;
                data[u] += tmp;
                t *= w;
            }
            start += size;
        }
        size <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// FFT applied along the trailing axis of a vector or matrix.
pub fn fft_last_axis(x: &ComplexArray, inverse: bool) -> ComplexArray {
    let w = x.row_len();
    debug_assert!(w.is_power_of_two());
    let mut data = x.data().to_vec();
    for r in 0..x.rows() {
        fft_in_place(&mut data[r * w..(r + 1) * w], inverse);
    }
    ComplexArray::new(data, x.shape().to_vec())
}

/// Unnormalized discrete Fourier transform of a power-of-two-length array.
pub fn fft(x: &ComplexArray) -> Result<ComplexArray, FftSizeError> {
    check_len(x.row_len())?;
    Ok(fft_last_axis(x, false))
}

/// Inverse transform with 1/N scaling; exact inverse of [`fft`].
pub fn ifft(x: &ComplexArray) -> Result<ComplexArray, FftSizeError> {
    check_len(x.row_len())?;
    Ok(fft_last_axis(x, true))
}
