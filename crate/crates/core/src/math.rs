//! Small numeric helpers shared by the analytic model and the simulator.

/// Binomial probabilities `C(k, h) p^h (1-p)^(k-h)` for `h = 0..=k`.
///
/// Computed in log space so that large `k` neither overflows the
/// coefficient nor underflows the powers prematurely.
pub fn binomial_pmf(k: usize, p: f64) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    let mut out = vec![0.0; k + 1];
    if p == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p == 1.0 {
        out[k] = 1.0;
        return out;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_coeff = 0.0;
    for (h, slot) in out.iter_mut().enumerate() {
        if h > 0 {
            ln_coeff += ((k - h + 1) as f64).ln() - (h as f64).ln();
        }
        *slot = (ln_coeff + h as f64 * lp + (k - h) as f64 * lq).exp();
    }
    out
}

/// `n` log-spaced points from `lo` to `hi`, both included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Sample mean and standard error of the mean.
///
/// The standard error is zero for fewer than two values.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
