//! Seed derivation and small numeric helpers shared across modules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::maps::{CylinderPoint, SkewMapParams};

/// splitmix64-style mix of (seed, tag); used to hand independent streams to
/// parallel workers so that results do not depend on scheduling.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Uniform random point of S¹ × I.
pub fn random_point(params: &SkewMapParams, rng: &mut ChaCha8Rng) -> CylinderPoint {
    CylinderPoint::new(
        rng.random::<f64>(),
        params.domain.lo + rng.random::<f64>() * params.domain.len(),
    )
}

/// Median of a non-empty slice (lower median; the slice is copied and sorted).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Ordinary least squares for y ≈ a·x + b. Returns (a, b) or None when the
/// design is degenerate. Weights must be nonnegative.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let w = ws[i];
        sw += w;
        sx += w * xs[i];
        sy += w * ys[i];
        sxx += w * xs[i] * xs[i];
        sxy += w * xs[i] * ys[i];
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-12 * sw.max(1.0) * sxx.max(1.0) {
        return None;
    }
    let a = (sw * sxy - sx * sy) / det;
    let b = (sxx * sy - sx * sxy) / det;
    Some((a, b))
}

/// Coefficient of determination of the fit y ≈ a·x + b (unweighted).
pub fn r_squared(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - a * x - b).powi(2))
        .sum();
    if ss_tot <= 0.0 {
        return if ss_res <= 1e-30 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Spearman rank correlation of two equal-length samples.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx).powi(2);
        vy += (ry[i] - my).powi(2);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Pool-adjacent-violators isotonic regression for a nonincreasing fit.
pub fn isotonic_nonincreasing(ys: &[f64]) -> Vec<f64> {
    // PAV on the negated sequence gives the nondecreasing solution.
    let mut blocks: Vec<(f64, usize)> = Vec::new(); // (sum, count) of -y
    for &y in ys {
        blocks.push((-y, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 > s2 / c2 as f64 {
                blocks.pop();
                blocks.pop();
                blocks.push((s1 + s2, c1 + c2));
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (s, c) in blocks {
        let v = -(s / c as f64);
        out.extend(std::iter::repeat_n(v, c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_spreads() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn linear_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (a, b) = weighted_linear_fit(&xs, &ys, &[1.0; 4]).unwrap();
        assert!((a - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
        assert!((r_squared(&xs, &ys, a, b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_degenerate() {
        assert!(weighted_linear_fit(&[2.0, 2.0], &[1.0, 3.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn spearman_signs() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotonic_smooths_to_nonincreasing() {
        let y = [5.0, 6.0, 3.0, 3.5, 1.0];
        let s = isotonic_nonincreasing(&y);
        for w in s.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        // Means are preserved.
        let m1: f64 = y.iter().sum();
        let m2: f64 = s.iter().sum();
        assert!((m1 - m2).abs() < 1e-9);
    }
}
