//! Decay of the exceptional sets E_n, fitted against C·e^{−γ√n}.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::SkewMapParams;
use crate::symbolic::deep_threshold;
use crate::util;

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    /// (n, fraction of sampled points in E_n).
    pub entries: Vec<(usize, f64)>,
    pub samples: usize,
    /// Fit of log(fraction) = log C − γ√n over nonzero entries, weighted by
    /// hit counts. None when every fraction is zero.
    pub c_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub r_squared: Option<f64>,
}

impl DecayReport {
    pub fn fractions(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    /// Isotonic (nonincreasing) smoothing of the fractions.
    pub fn smoothed_fractions(&self) -> Vec<f64> {
        util::isotonic_nonincreasing(&self.fractions())
    }
}

/// Fraction of random points whose deep-return weight up to n exceeds 2n,
/// for each n in `n_list` (ascending).
pub fn estimate_exceptional_measure(
    params: &SkewMapParams,
    n_list: &[usize],
    samples: usize,
    eta: f64,
    seed: u64,
) -> Result<DecayReport> {
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10^3 samples, got {samples}"
        )));
    }
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "n_list must be ascending and non-empty".into(),
        ));
    }
    let n_max = *n_list.last().unwrap();
    let thr = deep_threshold(params.alpha, eta);

    let counts: Vec<u64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let rng = util::rng_for(seed, i as u64);
            let mut orbit = crate::maps::OrbitSampler::new(params, rng);
            // Prefix sums of the deep-return weight along the orbit.
            let mut prefix = Vec::with_capacity(n_max + 1);
            prefix.push(0u64);
            let mut acc = 0u64;
            for j in 0..n_max {
                if j >= 1 {
                    let r = crate::symbolic::return_code(orbit.current().x, params.alpha).r;
                    if r as f64 >= thr {
                        acc += r as u64;
                    }
                }
                prefix.push(acc);
                if orbit.step().is_err() {
                    break;
                }
            }
            let mut flags = vec![0u64; n_list.len()];
            for (slot, &n) in flags.iter_mut().zip(n_list) {
                if n < prefix.len() && prefix[n] > 2 * n as u64 {
                    *slot = 1;
                }
            }
            flags
        })
        .reduce(
            || vec![0u64; n_list.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let entries: Vec<(usize, f64)> = n_list
        .iter()
        .zip(&counts)
        .map(|(&n, &c)| (n, c as f64 / samples as f64))
        .collect();

    // Weighted fit on nonzero bins; zero fractions carry no log information.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (&(n, frac), &c) in entries.iter().zip(&counts) {
        if frac > 0.0 {
            xs.push((n as f64).sqrt());
            ys.push(frac.ln());
            ws.push(c as f64);
        }
    }
    let fit = util::weighted_linear_fit(&xs, &ys, &ws);
    let (c_hat, gamma_hat, r2) = match fit {
        Some((slope, intercept)) => (
            Some(intercept.exp()),
            Some(-slope),
            Some(util::r_squared(&xs, &ys, slope, intercept)),
        ),
        None => (None, None, None),
    };
    Ok(DecayReport {
        entries,
        samples,
        c_hat,
        gamma_hat,
        r_squared: r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_one_has_zero_fraction() {
        // G_1 ranges over the empty index set 1..=0.
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let rep = estimate_exceptional_measure(&params, &[1, 2], 1000, 0.1, 3).unwrap();
        assert_eq!(rep.entries[0].1, 0.0);
    }

    #[test]
    fn fractions_decay_and_gamma_positive() {
        // E_n mass decays like e^{-2n} at alpha = 0.01, so only small n are
        // observable at this sample count.
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let rep = estimate_exceptional_measure(&params, &[1, 2, 3, 4], 100_000, 0.1, 7).unwrap();
        let smooth = rep.smoothed_fractions();
        for w in smooth.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        assert!(rep.entries[1].1 > 0.0, "report {rep:?}");
        assert!(rep.gamma_hat.unwrap_or(0.0) > 0.0, "report {rep:?}");
    }

    #[test]
    fn all_zero_skips_fit() {
        // The identity test map never produces returns (alpha = 0).
        let params = SkewMapParams::test_linear();
        let rep = estimate_exceptional_measure(&params, &[2, 4, 8], 1000, 0.1, 5).unwrap();
        assert!(rep.entries.iter().all(|e| e.1 == 0.0));
        assert!(rep.gamma_hat.is_none());
    }
}
