//! Central finite differences with Richardson extrapolation.

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Second-order central difference for the n-th derivative at step h.
pub fn central_difference<F: Fn(f64) -> f64>(f: &F, x: f64, n: usize, h: f64) -> f64 {
    let half = n as f64 / 2.0;
    let mut acc = 0.0;
    for i in 0..=n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom(n, i) * f(x + (half - i as f64) * h);
    }
    acc / h.powi(n as i32)
}

/// n-th derivative from central differences at h, h/2, …, h/2^{levels−1},
/// extrapolated in powers of h².
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64, n: usize, h: f64, levels: usize) -> f64 {
    let levels = levels.max(1);
    let mut table: Vec<f64> = (0..levels)
        .map(|i| central_difference(&f, x, n, h / 2f64.powi(i as i32)))
        .collect();
    for j in 1..levels {
        let factor = 4f64.powi(j as i32);
        for i in (j..levels).rev() {
            table[i] = table[i] + (table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table[levels - 1]
}
