//! The skew-product map family on the cylinder S¹ × I.
//!
//! The main family is `(θ, x) ↦ (dθ mod 1, a(θ) − x²)` with
//! `a(θ) = a₀ + α sin(2πθ) + Σ amp·sin(2π·freq·θ + phase)`.
//! Two analytically trivial test variants (doubling × doubling, identity)
//! are included as oracles for the transfer-operator machinery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Number of θ samples used when bounding a(θ) at construction time.
const A_RANGE_SAMPLES: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapVariant {
    Viana,
    TestDoublingProduct,
    TestLinear,
}

/// One extra sinusoidal term added to a(θ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub frequency: u32,
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
}

impl DomainInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && -2.0 < lo && lo < hi && hi < 2.0) {
            return Err(Error::InvalidParams(format!(
                "domain interval must satisfy -2 < lo < hi < 2, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// A point on the cylinder, θ ∈ [0,1) on S¹ = ℝ/ℤ and x in the fiber interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderPoint {
    pub theta: f64,
    pub x: f64,
}

impl CylinderPoint {
    pub fn new(theta: f64, x: f64) -> Self {
        Self {
            theta: reduce_mod1(theta),
            x,
        }
    }
}

/// Reduce to [0, 1), correcting the floating cases that land exactly on 1.
pub fn reduce_mod1(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewMapParams {
    pub degree: u32,
    pub a0: f64,
    pub alpha: f64,
    #[serde(default)]
    pub perturb: Vec<Perturbation>,
    pub variant: MapVariant,
    pub domain: DomainInterval,
}

impl SkewMapParams {
    /// Viana map with an automatically chosen forward-invariant fiber interval.
    pub fn viana(degree: u32, a0: f64, alpha: f64, perturb: Vec<Perturbation>) -> Result<Self> {
        let domain = auto_domain(a0, alpha, &perturb)?;
        Self::with_domain(degree, a0, alpha, perturb, MapVariant::Viana, domain)
    }

    /// Full constructor; validates the domain by a forward-invariance check.
    pub fn with_domain(
        degree: u32,
        a0: f64,
        alpha: f64,
        perturb: Vec<Perturbation>,
        variant: MapVariant,
        domain: DomainInterval,
    ) -> Result<Self> {
        let p = Self {
            degree,
            a0,
            alpha,
            perturb,
            variant,
            domain,
        };
        p.validate()?;
        Ok(p)
    }

    /// Family sharing one fiber interval: the base map plus one extra
    /// perturbation term per amplitude in `deltas` (direction
    /// sin(2πθ + 1)). The interval is sized for the largest amplitude so
    /// every member is forward invariant on the same domain, which lets
    /// sweep outputs live on a common grid.
    pub fn sweep_family(
        degree: u32,
        a0: f64,
        alpha: f64,
        deltas: &[f64],
    ) -> Result<Vec<SkewMapParams>> {
        let worst = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let envelope = vec![Perturbation {
            amplitude: worst,
            frequency: 1,
            phase: 1.0,
        }];
        let domain = auto_domain(a0, alpha, &envelope)?;
        deltas
            .iter()
            .map(|&delta| {
                let perturb = if delta == 0.0 {
                    vec![]
                } else {
                    vec![Perturbation {
                        amplitude: delta,
                        frequency: 1,
                        phase: 1.0,
                    }]
                };
                Self::with_domain(degree, a0, alpha, perturb, MapVariant::Viana, domain)
            })
            .collect()
    }

    pub fn test_doubling_product() -> Self {
        Self {
            degree: 2,
            a0: 0.0,
            alpha: 0.0,
            perturb: Vec::new(),
            variant: MapVariant::TestDoublingProduct,
            domain: DomainInterval { lo: 0.0, hi: 1.0 },
        }
    }

    pub fn test_linear() -> Self {
        Self {
            degree: 1,
            a0: 0.0,
            alpha: 0.0,
            perturb: Vec::new(),
            variant: MapVariant::TestLinear,
            domain: DomainInterval { lo: 0.0, hi: 1.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            MapVariant::Viana => {
                if self.degree < 2 {
                    return Err(Error::InvalidParams(format!(
                        "circle-expansion degree must be >= 2, got {}",
                        self.degree
                    )));
                }
                if !(1.0 < self.a0 && self.a0 < 2.0) {
                    return Err(Error::InvalidParams(format!(
                        "a0 must lie in (1, 2), got {}",
                        self.a0
                    )));
                }
                if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "alpha must be a finite nonnegative real, got {}",
                        self.alpha
                    )));
                }
                for t in &self.perturb {
                    if !t.amplitude.is_finite() || !t.phase.is_finite() {
                        return Err(Error::InvalidParams(
                            "perturbation terms must be finite".into(),
                        ));
                    }
                }
                self.check_forward_invariance()
            }
            MapVariant::TestDoublingProduct | MapVariant::TestLinear => {
                if (self.domain.lo, self.domain.hi) != (0.0, 1.0) {
                    return Err(Error::InvalidParams(
                        "test variants are defined on I = [0, 1]".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// a(θ) = a₀ + α sin(2πθ) + Σ amp·sin(2π·freq·θ + phase).
    pub fn a(&self, theta: f64) -> f64 {
        let mut a = self.a0 + self.alpha * (TWO_PI * theta).sin();
        for t in &self.perturb {
            a += t.amplitude * (TWO_PI * t.frequency as f64 * theta + t.phase).sin();
        }
        a
    }

    /// Range of a(θ) over the circle, bounded by dense sampling plus the
    /// trivial amplitude envelope as a cross-check.
    pub fn a_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..A_RANGE_SAMPLES {
            let a = self.a(i as f64 / A_RANGE_SAMPLES as f64);
            lo = lo.min(a);
            hi = hi.max(a);
        }
        (lo, hi)
    }

    /// Verifies φ(S¹×I) ⊂ interior(S¹×I). For the quadratic fiber family the
    /// image x-range is [a_min − max(lo², hi²), a_max] exactly.
    fn check_forward_invariance(&self) -> Result<()> {
        let (a_min, a_max) = self.a_range();
        let m2 = self.domain.lo.powi(2).max(self.domain.hi.powi(2));
        let img_lo = a_min - m2;
        let img_hi = a_max;
        if img_lo <= self.domain.lo || img_hi >= self.domain.hi {
            return Err(Error::InvalidParams(format!(
                "phi(S1 x I) = S1 x [{img_lo:.6}, {img_hi:.6}] is not contained in the \
                 interior of S1 x [{:.6}, {:.6}]",
                self.domain.lo, self.domain.hi
            )));
        }
        Ok(())
    }

    pub fn eval(&self, pt: CylinderPoint) -> Result<CylinderPoint> {
        let (theta, x) = match self.variant {
            MapVariant::Viana => (
                reduce_mod1(self.degree as f64 * pt.theta),
                self.a(pt.theta) - pt.x * pt.x,
            ),
            MapVariant::TestDoublingProduct => {
                (reduce_mod1(2.0 * pt.theta), reduce_mod1(2.0 * pt.x))
            }
            MapVariant::TestLinear => (pt.theta, pt.x),
        };
        if !self.domain.contains(x) {
            return Err(Error::DomainEscape {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
                steps: 1,
            });
        }
        Ok(CylinderPoint { theta, x })
    }

    /// ∂_x f(θ, x). Vanishes exactly on the critical line x = 0 for the
    /// Viana variant.
    pub fn vertical_derivative(&self, pt: CylinderPoint) -> f64 {
        match self.variant {
            MapVariant::Viana => -2.0 * pt.x,
            MapVariant::TestDoublingProduct => 2.0,
            MapVariant::TestLinear => 1.0,
        }
    }

    /// |det Dφ| = d·|∂_x f| by the block-triangular derivative structure.
    pub fn jacobian_det(&self, pt: CylinderPoint) -> f64 {
        self.degree as f64 * self.vertical_derivative(pt).abs()
    }

    pub fn orbit(&self, pt: CylinderPoint, n: usize) -> Result<OrbitTrace> {
        if n == 0 {
            return Err(Error::InvalidArgument("orbit length must be >= 1".into()));
        }
        if !self.domain.contains(pt.x) {
            return Err(Error::InvalidArgument(format!(
                "starting point x = {} is outside I = [{}, {}]",
                pt.x, self.domain.lo, self.domain.hi
            )));
        }
        let mut points = Vec::with_capacity(n + 1);
        let mut dlog = Vec::with_capacity(n + 1);
        let mut rcodes = Vec::with_capacity(n + 1);
        let mut cur = CylinderPoint::new(pt.theta, pt.x);
        for step in 0..=n {
            dlog.push(self.vertical_derivative(cur).abs().ln());
            rcodes.push(crate::symbolic::return_code(cur.x, self.alpha).r);
            points.push(cur);
            if step < n {
                cur = self.eval(cur).map_err(|e| match e {
                    Error::DomainEscape { x, lo, hi, .. } => Error::DomainEscape {
                        x,
                        lo,
                        hi,
                        steps: step + 1,
                    },
                    other => other,
                })?;
            }
        }
        Ok(OrbitTrace {
            points,
            dlog,
            rcodes,
        })
    }
}

/// Sliding base-d digit expansion of a Lebesgue-random circle point.
///
/// Iterating θ ↦ dθ mod 1 in floating point shifts mantissa bits out and
/// collapses every orbit to 0 within 53/log₂(d) steps. Keeping the digit
/// queue explicit and refilling the tail from the RNG simulates the exact
/// orbit of a random θ₀ with full precision at every step.
#[derive(Clone, Debug)]
struct DigitQueue {
    digits: std::collections::VecDeque<u32>,
    base: u32,
}

impl DigitQueue {
    fn new(base: u32, rng: &mut impl rand::Rng) -> Self {
        let k = (53.0 / (base as f64).log2()).ceil() as usize + 1;
        let digits = (0..k).map(|_| rng.random_range(0..base)).collect();
        Self { digits, base }
    }

    fn value(&self) -> f64 {
        let mut v = 0.0;
        for &d in self.digits.iter().rev() {
            v = (v + d as f64) / self.base as f64;
        }
        v
    }

    /// One application of t ↦ base·t mod 1 on the underlying expansion.
    fn shift(&mut self, rng: &mut impl rand::Rng) {
        self.digits.pop_front();
        self.digits.push_back(rng.random_range(0..self.base));
    }
}

/// Orbit generator for Monte-Carlo sampling: the expanding circle
/// coordinate(s) follow the exact symbolic shift on a random expansion (see
/// `DigitQueue`); the quadratic fiber coordinate is iterated directly.
pub struct OrbitSampler<'a> {
    params: &'a SkewMapParams,
    rng: rand_chacha::ChaCha8Rng,
    theta_digits: Option<DigitQueue>,
    x_digits: Option<DigitQueue>,
    pt: CylinderPoint,
}

impl<'a> OrbitSampler<'a> {
    /// Random start: θ from a fresh expansion, x uniform in I.
    pub fn new(params: &'a SkewMapParams, mut rng: rand_chacha::ChaCha8Rng) -> Self {
        use rand::Rng;
        let x = params.domain.lo + rng.random::<f64>() * params.domain.len();
        Self::build(params, x, rng)
    }

    /// Random θ, caller-chosen fiber coordinate.
    pub fn from_x(params: &'a SkewMapParams, x: f64, rng: rand_chacha::ChaCha8Rng) -> Self {
        Self::build(params, x, rng)
    }

    fn build(params: &'a SkewMapParams, x: f64, mut rng: rand_chacha::ChaCha8Rng) -> Self {
        use rand::Rng;
        let (theta_digits, x_digits, theta, x) = match params.variant {
            MapVariant::Viana => {
                let q = DigitQueue::new(params.degree, &mut rng);
                let theta = q.value();
                (Some(q), None, theta, x)
            }
            MapVariant::TestDoublingProduct => {
                let qt = DigitQueue::new(2, &mut rng);
                let qx = DigitQueue::new(2, &mut rng);
                let (theta, x) = (qt.value(), qx.value());
                (Some(qt), Some(qx), theta, x)
            }
            MapVariant::TestLinear => (None, None, rng.random::<f64>(), x),
        };
        Self {
            params,
            rng,
            theta_digits,
            x_digits,
            pt: CylinderPoint { theta, x },
        }
    }

    pub fn current(&self) -> CylinderPoint {
        self.pt
    }

    pub fn step(&mut self) -> Result<CylinderPoint> {
        match self.params.variant {
            MapVariant::Viana => {
                let x = self.params.a(self.pt.theta) - self.pt.x * self.pt.x;
                if !self.params.domain.contains(x) {
                    return Err(Error::DomainEscape {
                        x,
                        lo: self.params.domain.lo,
                        hi: self.params.domain.hi,
                        steps: 1,
                    });
                }
                let q = self.theta_digits.as_mut().unwrap();
                q.shift(&mut self.rng);
                self.pt = CylinderPoint {
                    theta: q.value(),
                    x,
                };
            }
            MapVariant::TestDoublingProduct => {
                let qt = self.theta_digits.as_mut().unwrap();
                qt.shift(&mut self.rng);
                let theta = qt.value();
                let qx = self.x_digits.as_mut().unwrap();
                qx.shift(&mut self.rng);
                self.pt = CylinderPoint {
                    theta,
                    x: qx.value(),
                };
            }
            MapVariant::TestLinear => {}
        }
        Ok(self.pt)
    }
}

/// Pick a forward-invariant fiber interval for the quadratic family.
///
/// With a(θ) ∈ [a_min, a_max], an interval I = [−L, hi] is forward invariant
/// iff a_max ≤ hi ≤ L and L² − L ≤ a_min, i.e. L ≤ β(a_min) where
/// β(a) = (1 + √(1+4a))/2 solves β² − β = a. Feasible iff a_max < β(a_min);
/// the slack is split to keep the image strictly interior.
fn auto_domain(a0: f64, alpha: f64, perturb: &[Perturbation]) -> Result<DomainInterval> {
    let probe = SkewMapParams {
        degree: 2,
        a0,
        alpha,
        perturb: perturb.to_vec(),
        variant: MapVariant::Viana,
        domain: DomainInterval { lo: -1.0, hi: 1.0 },
    };
    let (a_min, a_max) = probe.a_range();
    if a_min <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "a(theta) reaches {a_min:.6} <= 0; perturbation too large"
        )));
    }
    let beta = 0.5 * (1.0 + (1.0 + 4.0 * a_min).sqrt());
    let gap = beta - a_max;
    if gap <= 1e-6 {
        return Err(Error::InvalidParams(format!(
            "no forward-invariant interval: max a(theta) = {a_max:.6} reaches the \
             invariance bound beta(min a) = {beta:.6}"
        )));
    }
    DomainInterval::new(-(a_max + 0.75 * gap), a_max + 0.25 * gap)
}

/// Orbit segment with per-step vertical-derivative logs and return codes.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitTrace {
    pub points: Vec<CylinderPoint>,
    /// log|∂_x f| at each point; −∞ where the orbit hits x = 0 exactly.
    pub dlog: Vec<f64>,
    /// Return codes r_j of each point, from `symbolic::return_code`.
    pub rcodes: Vec<u32>,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
