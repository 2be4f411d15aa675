#![allow(dead_code)]

/// `(β+1) ∫₀¹ e^{iΦu} u^β du` by its power series
/// `(β+1) Σ (iΦ)ⁿ / (n! (n+β+1))`.
pub fn coherence_series(phi: f64, beta: f64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    // (iΦ)^n / n!
    let (mut tr, mut ti) = (1.0f64, 0.0f64);
    for n in 0..400 {
        let d = n as f64 + beta + 1.0;
        re += tr / d;
        im += ti / d;
        let f = phi / (n as f64 + 1.0);
        let (nr, ni) = (-ti * f, tr * f);
        tr = nr;
        ti = ni;
        if n > 10 && tr.abs() + ti.abs() < 1e-30 {
            break;
        }
    }
    ((beta + 1.0) * re, (beta + 1.0) * im)
}

/// Angular frequency from linearly interpolated crossings of the midline
/// between the extreme values.
pub fn zero_crossing_frequency(ts: &[f64], ys: &[f64]) -> f64 {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for i in 1..ys.len() {
        let (a, b) = (ys[i - 1] - mid, ys[i] - mid);
        if a == 0.0 {
            crossings.push(ts[i - 1]);
        } else if a * b < 0.0 {
            crossings.push(ts[i - 1] + (ts[i] - ts[i - 1]) * a / (a - b));
        }
    }
    assert!(crossings.len() >= 3, "too few crossings");
    let half_periods = (crossings.len() - 1) as f64;
    std::f64::consts::PI * half_periods / (crossings[crossings.len() - 1] - crossings[0])
}

/// Peak-to-peak excursion over consecutive windows of `width` samples.
pub fn windowed_contrast(ys: &[f64], width: usize) -> Vec<f64> {
    ys.windows(width)
        .map(|w| {
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .collect()
}
