//! Fiber-growth proxies: exact interval images of a vertical segment along a
//! theta-orbit, threshold crossing times, and the time to cover the
//! x-section of the second-image attractor approximant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{MapVariant, SkewMapParams};
use crate::util;

const COVER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XInterval {
    pub lo: f64,
    pub hi: f64,
}

impl XInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    fn hull(self, other: XInterval) -> XInterval {
        XInterval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    fn contains(&self, other: &XInterval, tol: f64) -> bool {
        self.lo <= other.lo + tol && self.hi >= other.hi - tol
    }
}

/// Exact image of the interval under x ↦ a − x².
fn quadratic_image(a: f64, j: XInterval) -> XInterval {
    let lo2 = j.lo * j.lo;
    let hi2 = j.hi * j.hi;
    if j.lo <= 0.0 && 0.0 <= j.hi {
        XInterval {
            lo: a - lo2.max(hi2),
            hi: a,
        }
    } else {
        XInterval {
            lo: a - lo2.max(hi2),
            hi: a - lo2.min(hi2),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthLog {
    pub theta0: f64,
    /// Length of the fiber image after each iteration (index 0 = |J|).
    pub lengths: Vec<f64>,
    /// First n with length > alpha^{1-2eta}.
    pub cross_shallow: Option<u32>,
    /// First n with length > sqrt(alpha).
    pub cross_sqrt: Option<u32>,
    /// First n with length > 0.1 |I|.
    pub cross_const: Option<u32>,
    /// First n where the image contains the attractor x-section at theta_n.
    pub cover_time: Option<u32>,
}

impl GrowthLog {
    pub fn all_thresholds_crossed(&self) -> bool {
        self.cross_shallow.is_some() && self.cross_sqrt.is_some() && self.cross_const.is_some()
    }
}

/// x-section hull at `theta` of the second image of the full cylinder: hull
/// over the degree² two-step branch preimages of `theta`.
pub fn section_hull(params: &SkewMapParams, theta: f64) -> Result<XInterval> {
    if params.variant != MapVariant::Viana {
        return Err(Error::InvalidArgument(
            "section hull is defined for the viana variant".into(),
        ));
    }
    let d = params.degree as usize;
    let full = XInterval {
        lo: params.domain.lo,
        hi: params.domain.hi,
    };
    let mut hull: Option<XInterval> = None;
    for k in 0..d * d {
        let theta2 = crate::maps::reduce_mod1((theta + k as f64) / (d * d) as f64);
        let theta1 = crate::maps::reduce_mod1(theta2 * d as f64);
        let j1 = quadratic_image(params.a(theta2), full);
        let j2 = quadratic_image(params.a(theta1), j1);
        hull = Some(match hull {
            Some(h) => h.hull(j2),
            None => j2,
        });
    }
    Ok(hull.unwrap())
}

/// Iterates the segment {theta0}×j and records threshold crossings and the
/// cover time. Hitting `max_iter` before full cover leaves `cover_time`
/// as None; that is a partial log, not an error.
pub fn fiber_growth(
    params: &SkewMapParams,
    theta0: f64,
    j: XInterval,
    eta: f64,
    max_iter: usize,
) -> Result<GrowthLog> {
    if params.variant != MapVariant::Viana {
        return Err(Error::InvalidArgument(
            "fiber growth is defined for the viana variant".into(),
        ));
    }
    if j.is_empty() || j.lo < params.domain.lo || j.hi > params.domain.hi {
        return Err(Error::InvalidArgument(format!(
            "segment [{}, {}] must lie inside the fiber interval",
            j.lo, j.hi
        )));
    }
    // alpha = 0 degenerates both alpha-scaled thresholds to 0; the cover
    // test is still meaningful there.
    let thr_shallow = params.alpha.powf(1.0 - 2.0 * eta);
    let thr_sqrt = params.alpha.sqrt();
    let thr_const = 0.1 * (params.domain.hi - params.domain.lo);

    let mut theta = crate::maps::reduce_mod1(theta0);
    let mut cur = j;
    let mut log = GrowthLog {
        theta0: theta,
        lengths: vec![cur.len()],
        cross_shallow: None,
        cross_sqrt: None,
        cross_const: None,
        cover_time: None,
    };
    for n in 1..=max_iter {
        cur = quadratic_image(params.a(theta), cur);
        theta = crate::maps::reduce_mod1(theta * params.degree as f64);
        log.lengths.push(cur.len());
        let len = cur.len();
        if log.cross_shallow.is_none() && len > thr_shallow {
            log.cross_shallow = Some(n as u32);
        }
        if log.cross_sqrt.is_none() && len > thr_sqrt {
            log.cross_sqrt = Some(n as u32);
        }
        if log.cross_const.is_none() && len > thr_const {
            log.cross_const = Some(n as u32);
        }
        if log.cover_time.is_none() && n >= 2 {
            let section = section_hull(params, theta)?;
            if cur.contains(&section, COVER_TOL) {
                log.cover_time = Some(n as u32);
            }
        }
        if log.cover_time.is_some() && log.all_thresholds_crossed() {
            break;
        }
    }
    Ok(log)
}

/// Runs `fibers` random fibers with the given segment length and reports the
/// fraction where every threshold was crossed within `max_iter`, plus the
/// individual logs.
pub fn growth_survey(
    params: &SkewMapParams,
    fibers: usize,
    segment_len: f64,
    eta: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(Vec<GrowthLog>, f64)> {
    use rand::Rng;
    if fibers == 0 {
        return Err(Error::InvalidArgument("fibers must be positive".into()));
    }
    let mut rng = util::rng_for(seed, 0);
    let span = params.domain.hi - params.domain.lo - segment_len;
    if span <= 0.0 {
        return Err(Error::InvalidArgument(
            "segment longer than the fiber interval".into(),
        ));
    }
    let mut logs = Vec::with_capacity(fibers);
    for _ in 0..fibers {
        let theta0 = rng.random::<f64>();
        let lo = params.domain.lo + rng.random::<f64>() * span;
        let j = XInterval {
            lo,
            hi: lo + segment_len,
        };
        logs.push(fiber_growth(params, theta0, j, eta, max_iter)?);
    }
    let crossed = logs.iter().filter(|l| l.all_thresholds_crossed()).count();
    let frac = crossed as f64 / fibers as f64;
    Ok((logs, frac))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_interval(params: &SkewMapParams) -> XInterval {
        XInterval {
            lo: params.domain.lo,
            hi: params.domain.hi,
        }
    }

    #[test]
    fn unperturbed_full_fiber_covers_by_two() {
        let params = SkewMapParams::viana(16, 1.9, 0.0, vec![]).unwrap();
        let log = fiber_growth(&params, 0.37, full_interval(&params), 0.1, 10).unwrap();
        assert_eq!(log.cover_time, Some(2));
    }

    #[test]
    fn crossing_times_nonincreasing_in_segment_size() {
        let params = SkewMapParams::viana(
            16,
            1.9,
            0.01,
            vec![crate::maps::Perturbation {
                amplitude: 0.01,
                frequency: 1,
                phase: 1.0,
            }],
        )
        .unwrap();
        let theta0 = 0.123;
        let small = XInterval {
            lo: 0.4,
            hi: 0.4 + 1e-4,
        };
        let big = XInterval {
            lo: 0.4,
            hi: 0.4 + 1e-2,
        };
        let ls = fiber_growth(&params, theta0, small, 0.1, 2000).unwrap();
        let lb = fiber_growth(&params, theta0, big, 0.1, 2000).unwrap();
        for (a, b) in [
            (ls.cross_shallow, lb.cross_shallow),
            (ls.cross_sqrt, lb.cross_sqrt),
            (ls.cross_const, lb.cross_const),
        ] {
            let (a, b) = (a.expect("small crossed"), b.expect("big crossed"));
            assert!(b <= a, "big {b} vs small {a}");
        }
    }

    #[test]
    fn image_length_bounded_by_fiber_interval() {
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let log = fiber_growth(&params, 0.7, full_interval(&params), 0.1, 200).unwrap();
        let cap = params.domain.hi - params.domain.lo + 1e-12;
        assert!(log.lengths.iter().all(|&l| l <= cap));
    }

    #[test]
    fn survey_mostly_crosses() {
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let (_, frac) = growth_survey(&params, 50, 1e-3, 0.1, 200, 21).unwrap();
        assert!(frac >= 0.9, "fraction {frac}");
    }

    #[test]
    fn rejects_test_variants() {
        let params = SkewMapParams::test_linear();
        let j = XInterval { lo: -0.5, hi: 0.5 };
        assert!(fiber_growth(&params, 0.0, j, 0.1, 10).is_err());
    }
}
