//! Iterative radix-2 FFT (forward transform, no normalisation).

use alloc::vec::Vec;
use num_complex::Complex64;

pub(crate) struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
}

impl Fft {
    /// `n` must be a power of two.
    pub(crate) fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| {
                let ang = -2.0 * core::f64::consts::PI * k as f64 / n as f64;
                Complex64::new(libm::cos(ang), libm::sin(ang))
            })
            .collect();
        Self { n, twiddles }
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let r = i.reverse_bits() >> (usize::BITS - bits);
            if r > i {
                buf.swap(i, r);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}
