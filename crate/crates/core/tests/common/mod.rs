//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Direct O(L²) DFT magnitudes (bins 0..=L/2) of the mean-removed signal.
pub fn dft_magnitudes(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    (0..=n / 2)
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &s) in signal.iter().enumerate() {
                // reduce k·t first so the angle stays small and exact
                let phase = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += (s - mean) * phase.cos();
                im += (s - mean) * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Largest |a-b| relative to the largest |b|.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Replace each zero by the sorted-window median of the non-zero values
/// within `radius` (clipped to the frame); even counts average the middle two.
pub fn inpaint_oracle(w: usize, h: usize, data: &[f64], radius: usize) -> Vec<f64> {
    let mut out = data.to_vec();
    for y in 0..h {
        for x in 0..w {
            if data[y * w + x] != 0.0 {
                continue;
            }
            let mut vals = Vec::new();
            for yy in y.saturating_sub(radius)..=(y + radius).min(h - 1) {
                for xx in x.saturating_sub(radius)..=(x + radius).min(w - 1) {
                    let v = data[yy * w + xx];
                    if v != 0.0 {
                        vals.push(v);
                    }
                }
            }
            if vals.is_empty() {
                continue;
            }
            vals.sort_by(f64::total_cmp);
            let n = vals.len();
            out[y * w + x] = if n % 2 == 1 { vals[n / 2] } else { (vals[n / 2 - 1] + vals[n / 2]) / 2.0 };
        }
    }
    out
}
