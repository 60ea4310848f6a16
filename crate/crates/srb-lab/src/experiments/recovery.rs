//! Recovery depth: how many iterates a point started near the critical line
//! x = 0 needs before the accumulated vertical expansion compensates the
//! initial loss.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::SkewMapParams;
use crate::util;

#[derive(Clone, Debug, Serialize)]
pub struct RecoverySample {
    pub x0: f64,
    /// Smallest N with sum of log-derivatives >= ln|x0| + (eta - 1) ln alpha,
    /// or None if the orbit re-entered (-sqrt(alpha), sqrt(alpha)) or hit the
    /// cap first.
    pub depth: Option<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    pub samples: Vec<RecoverySample>,
    pub median_depth: Option<f64>,
    pub censored: usize,
}

/// Samples points with |x| < 2 alpha^{1/2} (theta uniform) and scans each
/// orbit for the recovery depth. Orbits are censored when they return to
/// (-sqrt(alpha), sqrt(alpha)) before recovering or exceed `max_steps`.
pub fn estimate_recovery_depth(
    params: &SkewMapParams,
    samples: usize,
    max_steps: usize,
    eta: f64,
    seed: u64,
) -> Result<RecoveryReport> {
    if params.alpha <= 0.0 {
        return Err(Error::InvalidArgument(
            "recovery depth needs alpha > 0".into(),
        ));
    }
    if !(0.0 < eta && eta < 0.25) {
        return Err(Error::InvalidArgument(format!(
            "eta must lie in (0, 1/4), got {eta}"
        )));
    }
    if samples == 0 || max_steps == 0 {
        return Err(Error::InvalidArgument(
            "samples and max_steps must be positive".into(),
        ));
    }
    let sqrt_alpha = params.alpha.sqrt();
    let band = (2.0 * sqrt_alpha).min(params.domain.hi.abs().min(params.domain.lo.abs()));

    let out: Vec<RecoverySample> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = util::rng_for(seed, i as u64);
            use rand::Rng;
            let mut x0 = 0.0;
            while x0 == 0.0 {
                x0 = (rng.random::<f64>() * 2.0 - 1.0) * band;
            }
            let target = x0.abs().ln() + (eta - 1.0) * params.alpha.ln();
            let mut orbit = crate::maps::OrbitSampler::from_x(params, x0, rng);
            let mut logprod = 0.0;
            let mut depth = None;
            for n in 1..=max_steps {
                let d = params.vertical_derivative(orbit.current()).abs();
                if d == 0.0 {
                    break;
                }
                logprod += d.ln();
                let pt = match orbit.step() {
                    Ok(next) => next,
                    Err(_) => break,
                };
                if pt.x.abs() <= sqrt_alpha {
                    break;
                }
                if logprod >= target {
                    depth = Some(n as u32);
                    break;
                }
            }
            RecoverySample { x0, depth }
        })
        .collect();

    let depths: Vec<f64> = out.iter().filter_map(|s| s.depth).map(f64::from).collect();
    let censored = out.len() - depths.len();
    let median_depth = if depths.is_empty() {
        None
    } else {
        Some(util::median(&depths))
    };
    Ok(RecoveryReport {
        samples: out,
        median_depth,
        censored,
    })
}
