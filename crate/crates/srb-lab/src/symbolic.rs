//! Return codes, deep-return sets, exceptional sets and hyperbolic times.
//!
//! The fiber interval is partitioned around the critical strip [−√α, √α]
//! into rings I_r = [√α e^{−r}, √α e^{−(r−1)}) (and their mirror images),
//! r ≥ 1, with r = 0 outside the strip. Boundary points are assigned to the
//! smaller r; the partition only matters modulo null sets, consistency is
//! the contract here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{CylinderPoint, OrbitTrace, SkewMapParams};

/// Ring index of the critical-strip partition. 0 means |x| ≥ √α.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReturnCode {
    pub r: u32,
}

/// Largest representable ring index: the smallest r with √α e^{−r} below the
/// smallest positive normal f64. x = 0 maps there.
pub fn r_cap(alpha: f64) -> u32 {
    if alpha <= 0.0 {
        return 0;
    }
    let t = 0.5 * alpha.ln() - f64::MIN_POSITIVE.ln();
    t.ceil().max(1.0) as u32
}

pub fn return_code(x: f64, alpha: f64) -> ReturnCode {
    if alpha <= 0.0 {
        return ReturnCode { r: 0 };
    }
    let sa = alpha.sqrt();
    let ax = x.abs();
    if ax >= sa {
        return ReturnCode { r: 0 };
    }
    let cap = r_cap(alpha);
    if ax == 0.0 {
        return ReturnCode { r: cap };
    }
    let r = (sa / ax).ln().ceil();
    if r < 1.0 {
        ReturnCode { r: 1 }
    } else if r >= cap as f64 {
        ReturnCode { r: cap }
    } else {
        ReturnCode { r: r as u32 }
    }
}

/// Deep-return threshold (1/2 − 2η)·log(1/α).
pub fn deep_threshold(alpha: f64, eta: f64) -> f64 {
    (0.5 - 2.0 * eta) * (1.0 / alpha).ln()
}

fn check_window(trace: &OrbitTrace, n: usize) -> Result<()> {
    if trace.len() <= n {
        return Err(Error::InvalidArgument(format!(
            "trace of length {} is too short for n = {n}",
            trace.len()
        )));
    }
    Ok(())
}

/// G_n: indices 1 ≤ j ≤ n−1 whose return code clears the deep threshold.
pub fn deep_return_indices(
    trace: &OrbitTrace,
    alpha: f64,
    eta: f64,
    n: usize,
) -> Result<Vec<usize>> {
    check_window(trace, n)?;
    let thr = deep_threshold(alpha, eta);
    let mut out = Vec::new();
    for j in 1..n {
        if trace.rcodes[j] as f64 >= thr {
            out.push(j);
        }
    }
    Ok(out)
}

/// Point is in the exceptional set E_n iff Σ_{j∈G_n} r_j > 2n.
pub fn is_exceptional(trace: &OrbitTrace, alpha: f64, eta: f64, n: usize) -> Result<bool> {
    let g = deep_return_indices(trace, alpha, eta, n)?;
    let total: u64 = g.iter().map(|&j| trace.rcodes[j] as u64).sum();
    Ok(total > 2 * n as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicParams {
    /// Expansion exponent c > 0.
    pub c: f64,
    /// Slack 0 < ε < c/2.
    pub eps: f64,
    /// Deep-return exponent η ∈ (0, 1/4).
    pub eta: f64,
    /// Smallest admissible hyperbolic return time.
    pub p_start: usize,
}

impl HyperbolicParams {
    pub fn new(c: f64, eps: f64, eta: f64, p_start: usize) -> Result<Self> {
        if c.is_nan() || c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "c must be positive, got {c}"
            )));
        }
        if !(eps > 0.0 && eps < c / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must satisfy 0 < eps < c/2 = {}, got {eps}",
                c / 2.0
            )));
        }
        if !(eta > 0.0 && eta < 0.25) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie in (0, 1/4), got {eta}"
            )));
        }
        if p_start == 0 {
            return Err(Error::InvalidArgument("p_start must be >= 1".into()));
        }
        Ok(Self {
            c,
            eps,
            eta,
            p_start,
        })
    }

    /// c taken as half the empirical median vertical Lyapunov exponent of the
    /// map, ε = c/4, η = 0.1.
    pub fn calibrated(params: &SkewMapParams, p_start: usize, seed: u64) -> Result<Self> {
        let lam = median_vertical_exponent(params, 256, 2000, seed)?;
        if lam.is_nan() || lam <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "median vertical Lyapunov exponent {lam:.4} is not positive; \
                 cannot calibrate hyperbolic-time parameters"
            )));
        }
        let c = 0.5 * lam;
        Self::new(c, c / 4.0, 0.1, p_start)
    }
}

fn median_vertical_exponent(
    params: &SkewMapParams,
    samples: usize,
    n: usize,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut exps = Vec::with_capacity(samples);
    for i in 0..samples {
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(crate::util::derive_seed(seed, i as u64));
        let pt = CylinderPoint::new(
            rng.random::<f64>(),
            params.domain.lo + rng.random::<f64>() * params.domain.len(),
        );
        let tr = params.orbit(pt, n)?;
        let (mut sum, mut count) = (0.0, 0usize);
        for &d in &tr.dlog[..n] {
            if d.is_finite() {
                sum += d;
                count += 1;
            }
        }
        if count > 0 {
            exps.push(sum / count as f64);
        }
    }
    exps.sort_by(f64::total_cmp);
    Ok(exps[exps.len() / 2])
}

/// Weight used in the hyperbolic-time inequality: r_j when j clears the deep
/// threshold (and j ≥ 1), else 0.
fn deep_weight(rcode: u32, j: usize, thr: f64) -> f64 {
    if j >= 1 && rcode as f64 >= thr {
        rcode as f64
    } else {
        0.0
    }
}

/// n is a hyperbolic time iff Σ_{i∈G_n, k≤i<n} r_i < (c+ε)(n−k) for every
/// 0 ≤ k < n.
pub fn is_hyperbolic_time(
    trace: &OrbitTrace,
    hp: &HyperbolicParams,
    alpha: f64,
    n: usize,
) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "hyperbolic times start at n = 1".into(),
        ));
    }
    check_window(trace, n)?;
    let thr = deep_threshold(alpha, hp.eta);
    let rate = hp.c + hp.eps;
    let mut suffix = 0.0;
    for k in (0..n).rev() {
        suffix += deep_weight(trace.rcodes[k], k, thr);
        if suffix >= rate * (n - k) as f64 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// First n in [p_start, max_steps] that is both a hyperbolic time and a
/// return (r_n ≥ 1). Runs in O(max_steps) via the prefix-sum form of the
/// hyperbolic-time inequality: with P(n) = Σ_{j<n} w_j and
/// D(n) = (c+ε)n − P(n), n is hyperbolic iff D(n) > max_{k<n} D(k).
pub fn first_hyperbolic_return(
    params: &SkewMapParams,
    pt: CylinderPoint,
    hp: &HyperbolicParams,
    max_steps: usize,
) -> Result<Option<usize>> {
    if max_steps < hp.p_start {
        return Err(Error::InvalidArgument(format!(
            "max_steps = {max_steps} is below p_start = {}",
            hp.p_start
        )));
    }
    let thr = deep_threshold(params.alpha, hp.eta);
    let rate = hp.c + hp.eps;
    let mut cur = CylinderPoint::new(pt.theta, pt.x);
    let mut prev_r = return_code(cur.x, params.alpha).r;
    let mut prefix = 0.0;
    let mut run_max = 0.0; // D(0) = 0
    for n in 1..=max_steps {
        cur = params.eval(cur).map_err(|e| match e {
            Error::DomainEscape { x, lo, hi, .. } => Error::DomainEscape {
                x,
                lo,
                hi,
                steps: n,
            },
            other => other,
        })?;
        prefix += deep_weight(prev_r, n - 1, thr);
        let d = rate * n as f64 - prefix;
        let r_n = return_code(cur.x, params.alpha).r;
        if d > run_max && r_n >= 1 && n >= hp.p_start {
            return Ok(Some(n));
        }
        run_max = run_max.max(d);
        prev_r = r_n;
    }
    Ok(None)
}
