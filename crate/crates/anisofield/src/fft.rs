//! Linear convolution of 3-D arrays through zero-padded FFTs.

use ndarray::{s, Array3, Axis, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// Smallest n >= len whose prime factors are 2, 3 and 5.
pub fn fast_len(len: usize) -> usize {
    let mut n = len.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

fn transform(data: &mut Array3<Complex64>, dir: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    for ax in 0..3 {
        let n = data.len_of(Axis(ax));
        let fft = planner.plan_fft(n, dir);
        Zip::from(data.lanes_mut(Axis(ax))).par_for_each(|mut lane| {
            let mut buf: Vec<Complex64> = lane.iter().copied().collect();
            fft.process(&mut buf);
            for (d, b) in lane.iter_mut().zip(buf) {
                *d = b;
            }
        });
    }
}

/// Full linear convolution c[m] = sum_k a[k] b[m - k], of shape la + lb - 1.
pub fn convolve_full(a: &Array3<f64>, b: &Array3<f64>) -> Array3<f64> {
    let (sa, sb) = (a.shape(), b.shape());
    let out = [0, 1, 2].map(|j| sa[j] + sb[j] - 1);
    let pad = out.map(fast_len);
    let lift = |x: &Array3<f64>| {
        let mut z = Array3::<Complex64>::zeros(pad);
        let sh = x.shape();
        z.slice_mut(s![..sh[0], ..sh[1], ..sh[2]])
            .zip_mut_with(x, |d, &v| *d = Complex64::new(v, 0.0));
        z
    };
    let mut fa = lift(a);
    let mut fb = lift(b);
    transform(&mut fa, FftDirection::Forward);
    transform(&mut fb, FftDirection::Forward);
    Zip::from(&mut fa).and(&fb).par_for_each(|x, y| *x *= *y);
    transform(&mut fa, FftDirection::Inverse);
    let scale = 1.0 / (pad[0] * pad[1] * pad[2]) as f64;
    fa.slice(s![..out[0], ..out[1], ..out[2]]).map(|z| z.re * scale)
}
