//! Cell-level approximation of the induced first-hyperbolic-return map:
//! per-cell return times h, tail statistics, the reconstruction
//! μ* = Σ_j φ*^j (μ | {h > j}), symmetric-difference comparisons between
//! nearby maps, and a bounded-distortion probe.
//!
//! The nested rectangle partition of the underlying theory is replaced by a
//! fixed grid: each cell takes the return time of its center, and extra
//! random probes record how often points of the same cell disagree.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{CylinderPoint, SkewMapParams};
use crate::symbolic::{first_hyperbolic_return, HyperbolicParams};
use crate::transfer::{Grid, GridDensity, UlamOperator};
use crate::util;

#[derive(Clone, Debug)]
pub struct InducedScheme {
    pub grid: Grid,
    pub hp: HyperbolicParams,
    /// First hyperbolic return of the cell center; None when undecided
    /// within `max_steps`.
    pub h: Vec<Option<u32>>,
    /// Fraction of extra probes per cell whose return time differs from the
    /// center's.
    pub disagreement: Vec<f64>,
    pub max_steps: usize,
    pub undecided_fraction: f64,
}

impl InducedScheme {
    pub fn decided_fraction(&self) -> f64 {
        1.0 - self.undecided_fraction
    }

    /// h with undecided cells counted at the cap (conservative).
    pub fn h_capped(&self, cell: usize) -> usize {
        self.h[cell].map_or(self.max_steps, |v| v as usize)
    }
}

pub fn build_induced(
    params: &SkewMapParams,
    grid: Grid,
    hp: HyperbolicParams,
    probes_per_cell: usize,
    max_steps: usize,
    seed: u64,
) -> Result<InducedScheme> {
    if probes_per_cell == 0 {
        return Err(Error::InvalidArgument(
            "probes_per_cell must be >= 1".into(),
        ));
    }
    if grid.domain != params.domain {
        return Err(Error::GridMismatch(
            "grid domain differs from map fiber interval".into(),
        ));
    }
    let n = grid.cells();
    let results: Vec<(Option<u32>, f64)> = (0..n)
        .into_par_iter()
        .map(|cell| {
            let (it, ix) = grid.split_index(cell);
            let center = grid.center(it, ix);
            let h0 = probe(params, center, &hp, max_steps);
            let extras = probes_per_cell - 1;
            let mut disagree = 0usize;
            if extras > 0 {
                let mut rng = util::rng_for(seed, cell as u64);
                use rand::Rng;
                let dt = 1.0 / grid.n_theta as f64;
                let dx = grid.domain.len() / grid.n_x as f64;
                for _ in 0..extras {
                    let pt = CylinderPoint {
                        theta: (it as f64 + rng.random::<f64>()) * dt,
                        x: grid.domain.lo + (ix as f64 + rng.random::<f64>()) * dx,
                    };
                    if probe(params, pt, &hp, max_steps) != h0 {
                        disagree += 1;
                    }
                }
            }
            let frac = if extras > 0 {
                disagree as f64 / extras as f64
            } else {
                0.0
            };
            (h0, frac)
        })
        .collect();

    let h: Vec<Option<u32>> = results.iter().map(|r| r.0).collect();
    let disagreement: Vec<f64> = results.iter().map(|r| r.1).collect();
    let undecided = h.iter().filter(|v| v.is_none()).count();
    Ok(InducedScheme {
        grid,
        hp,
        h,
        disagreement,
        max_steps,
        undecided_fraction: undecided as f64 / n as f64,
    })
}

/// Domain escapes are folded into "undecided": the scheme is a measurement,
/// not a verdict on single orbits.
fn probe(
    params: &SkewMapParams,
    pt: CylinderPoint,
    hp: &HyperbolicParams,
    max_steps: usize,
) -> Option<u32> {
    first_hyperbolic_return(params, pt, hp, max_steps)
        .ok()
        .flatten()
        .map(|n| n as u32)
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub n: usize,
    pub q: f64,
    /// ‖Σ_{j≥N} χ_{h>j}‖_q with undecided cells counted at the cap.
    pub tail_q_norm: f64,
    /// (h, cell count) pairs over decided cells, ascending in h.
    pub histogram: Vec<(u32, usize)>,
}

pub fn return_time_tail(scheme: &InducedScheme, n: usize, q: f64) -> Result<TailReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("tail cutoff N must be >= 1".into()));
    }
    if q < 1.0 {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    let area = scheme.grid.cell_area();
    let mut acc = 0.0;
    for cell in 0..scheme.grid.cells() {
        // Σ_{j≥N} χ_{h>j} evaluates to max(h − N, 0) pointwise.
        let t = scheme.h_capped(cell).saturating_sub(n) as f64;
        acc += t.powf(q) * area;
    }
    let mut hist = std::collections::BTreeMap::new();
    for h in scheme.h.iter().flatten() {
        *hist.entry(*h).or_insert(0usize) += 1;
    }
    Ok(TailReport {
        n,
        q,
        tail_q_norm: acc.powf(1.0 / q),
        histogram: hist.into_iter().collect(),
    })
}

/// Truncated reconstruction μ* = Σ_{j<N} φ*^j (μ | {h > j}), evaluated with
/// Horner's scheme (N−1 operator applications), then normalized.
pub struct SrbReconstruction {
    pub density: GridDensity,
    /// Mass of the truncated sum before normalization,
    /// Σ_{j<N} μ({h > j}).
    pub kept_mass: f64,
    /// Σ_{j≥N} μ({h > j}), the mass dropped by the truncation.
    pub truncated_mass: f64,
}

pub fn reconstruct_srb(
    scheme: &InducedScheme,
    mu: &GridDensity,
    truncate_n: usize,
    op: &UlamOperator,
) -> Result<SrbReconstruction> {
    if truncate_n < 1 {
        return Err(Error::InvalidArgument("truncate_N must be >= 1".into()));
    }
    if mu.grid != scheme.grid || op.grid != scheme.grid {
        return Err(Error::GridMismatch(
            "scheme, density and operator must share a grid".into(),
        ));
    }
    let cells = scheme.grid.cells();
    let area = scheme.grid.cell_area();
    let restricted = |j: usize| -> Vec<f64> {
        (0..cells)
            .map(|c| {
                if scheme.h_capped(c) > j {
                    mu.values[c]
                } else {
                    0.0
                }
            })
            .collect()
    };
    // Σ_j P^j m_j = m_0 + P(m_1 + P(m_2 + ...)).
    let mut acc = restricted(truncate_n - 1);
    for j in (0..truncate_n - 1).rev() {
        acc = op.apply(&acc);
        let m = restricted(j);
        for (a, b) in acc.iter_mut().zip(&m) {
            *a += b;
        }
    }
    let kept_mass = acc.iter().sum::<f64>() * area;
    let mut truncated_mass = 0.0;
    for c in 0..cells {
        let h = scheme.h_capped(c);
        if h > truncate_n {
            truncated_mass += (h - truncate_n) as f64 * mu.values[c] * area;
        }
    }
    let density = GridDensity::from_values(scheme.grid, acc)?;
    Ok(SrbReconstruction {
        density,
        kept_mass,
        truncated_mass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct U1Report {
    /// m̂({h_φ = j} Δ {h_φ₀ = j}) for j = 1..=N, over cells decided in both
    /// schemes.
    pub per_j: Vec<f64>,
    /// Mass of cells undecided in at least one scheme (excluded above).
    pub undecided_mass: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn u1_check(
    params0: &SkewMapParams,
    params1: &SkewMapParams,
    grid: Grid,
    hp: HyperbolicParams,
    n_levels: usize,
    probes: usize,
    cap: usize,
    seed: u64,
) -> Result<U1Report> {
    let s0 = build_induced(params0, grid, hp, probes, cap, seed)?;
    let s1 = build_induced(params1, grid, hp, probes, cap, seed)?;
    let area = grid.cell_area();
    let mut per_j = vec![0.0; n_levels];
    let mut undecided_mass = 0.0;
    for cell in 0..grid.cells() {
        match (s0.h[cell], s1.h[cell]) {
            (Some(a), Some(b)) => {
                if a != b {
                    for (j, slot) in per_j.iter_mut().enumerate() {
                        let j = (j + 1) as u32;
                        if (a == j) != (b == j) {
                            *slot += area;
                        }
                    }
                }
            }
            _ => undecided_mass += area,
        }
    }
    Ok(U1Report {
        per_j,
        undecided_mass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistortionReport {
    /// Global max over decided cells of the sampled Jacobian ratio at time h.
    pub delta_hat: f64,
    /// Probe pairs discarded for hitting the critical line (zero Jacobian).
    pub discarded_pairs: usize,
    pub sampled_cells: usize,
}

pub fn distortion_probe(
    params: &SkewMapParams,
    scheme: &InducedScheme,
    pairs_per_cell: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if pairs_per_cell == 0 {
        return Err(Error::InvalidArgument("pairs_per_cell must be >= 1".into()));
    }
    let grid = scheme.grid;
    let per_cell: Vec<(f64, usize, bool)> = (0..grid.cells())
        .into_par_iter()
        .map(|cell| {
            let Some(h) = scheme.h[cell] else {
                return (1.0, 0, false);
            };
            let (it, ix) = grid.split_index(cell);
            let mut rng = util::rng_for(seed, 0x0d15_7037 ^ cell as u64);
            use rand::Rng;
            let dt = 1.0 / grid.n_theta as f64;
            let dx = grid.domain.len() / grid.n_x as f64;
            let mut worst: f64 = 1.0;
            let mut discarded = 0usize;
            for _ in 0..pairs_per_cell {
                let mut log_j = [0.0f64; 2];
                let mut ok = true;
                for slot in &mut log_j {
                    let mut pt = CylinderPoint {
                        theta: (it as f64 + rng.random::<f64>()) * dt,
                        x: grid.domain.lo + (ix as f64 + rng.random::<f64>()) * dx,
                    };
                    let mut acc = 0.0;
                    for _ in 0..h {
                        let jac = params.jacobian_det(pt);
                        if jac == 0.0 {
                            ok = false;
                            break;
                        }
                        acc += jac.ln();
                        match params.eval(pt) {
                            Ok(next) => pt = next,
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    *slot = acc;
                    if !ok {
                        break;
                    }
                }
                if ok {
                    worst = worst.max((log_j[0] - log_j[1]).abs().exp());
                } else {
                    discarded += 1;
                }
            }
            (worst, discarded, true)
        })
        .collect();

    let mut delta_hat: f64 = 1.0;
    let mut discarded_pairs = 0;
    let mut sampled_cells = 0;
    for (w, d, decided) in per_cell {
        if decided {
            delta_hat = delta_hat.max(w);
            sampled_cells += 1;
        }
        discarded_pairs += d;
    }
    Ok(DistortionReport {
        delta_hat,
        discarded_pairs,
        sampled_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::DomainInterval;
    use crate::transfer::build_ulam;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(n, n, DomainInterval::new(0.0, 1.0).unwrap()).unwrap()
    }

    fn hp_loose() -> HyperbolicParams {
        HyperbolicParams::new(0.5, 0.1, 0.1, 1).unwrap()
    }

    #[test]
    fn doubling_returns_everywhere_with_p_start_one() {
        // For the doubling product with alpha treated as full strip the test
        // map has no strip at all (alpha = 0), so h is undecided; use the
        // viana family instead to exercise decided cells, and the doubling
        // map to exercise the undecided path.
        let params = SkewMapParams::test_doubling_product();
        let scheme = build_induced(&params, unit_grid(4), hp_loose(), 2, 50, 1).unwrap();
        assert_eq!(scheme.undecided_fraction, 1.0);

        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let grid = Grid::new(16, 16, params.domain).unwrap();
        let scheme = build_induced(
            &params,
            grid,
            HyperbolicParams::calibrated(&params, 20, 3).unwrap(),
            3,
            10_000,
            7,
        )
        .unwrap();
        assert!(scheme.decided_fraction() > 0.99);
        for h in scheme.h.iter().flatten() {
            assert!(*h >= 20);
        }
    }

    #[test]
    fn center_h_independent_of_seed() {
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let grid = Grid::new(16, 8, params.domain).unwrap();
        let hp = HyperbolicParams::calibrated(&params, 20, 3).unwrap();
        let a = build_induced(&params, grid, hp, 2, 5000, 1).unwrap();
        let b = build_induced(&params, grid, hp, 2, 5000, 2).unwrap();
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn tail_examples() {
        let grid = unit_grid(4);
        let mk = |h: u32| InducedScheme {
            grid,
            hp: hp_loose(),
            h: vec![Some(h); grid.cells()],
            disagreement: vec![0.0; grid.cells()],
            max_steps: 100,
            undecided_fraction: 0.0,
        };
        // h ≡ 5, N = 2, q = 2 → pointwise 3, norm 3.
        let t = return_time_tail(&mk(5), 2, 2.0).unwrap();
        assert!((t.tail_q_norm - 3.0).abs() < 1e-12);
        // All h ≤ N → 0.
        let t = return_time_tail(&mk(3), 3, 2.0).unwrap();
        assert_eq!(t.tail_q_norm, 0.0);
        // Nonincreasing in N.
        let s = mk(7);
        let mut prev = f64::INFINITY;
        for n in 1..10 {
            let t = return_time_tail(&s, n, 2.0).unwrap();
            assert!(t.tail_q_norm <= prev);
            prev = t.tail_q_norm;
        }
    }

    #[test]
    fn reconstruct_h_one_is_identity() {
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let grid = Grid::new(16, 8, params.domain).unwrap();
        let op = build_ulam(&params, grid, 4, 1).unwrap();
        let scheme = InducedScheme {
            grid,
            hp: hp_loose(),
            h: vec![Some(1); grid.cells()],
            disagreement: vec![0.0; grid.cells()],
            max_steps: 100,
            undecided_fraction: 0.0,
        };
        let mut rng = util::rng_for(31, 0);
        use rand::Rng;
        let mu = GridDensity::from_values(
            grid,
            (0..grid.cells())
                .map(|_| rng.random::<f64>() + 0.1)
                .collect(),
        )
        .unwrap();
        let rec = reconstruct_srb(&scheme, &mu, 1, &op).unwrap();
        assert!(crate::transfer::l1_distance(&rec.density, &mu).unwrap() < 1e-12);
        assert!((rec.kept_mass - 1.0).abs() < 1e-12);
        assert_eq!(rec.truncated_mass, 0.0);
    }

    #[test]
    fn reconstruct_two_level_toy_matches_hand_sum() {
        // Identity dynamics, 1×2 grid: cell 0 has h = 2, cell 1 has h = 1.
        // μ* (pre-normalization) = μ|{h>0} + P(μ|{h>1}) = μ + μ·χ_{cell 0}.
        let params = SkewMapParams::test_linear();
        let grid = Grid::new(1, 2, DomainInterval::new(0.0, 1.0).unwrap()).unwrap();
        let op = build_ulam(&params, grid, 4, 0).unwrap();
        let scheme = InducedScheme {
            grid,
            hp: hp_loose(),
            h: vec![Some(2), Some(1)],
            disagreement: vec![0.0; 2],
            max_steps: 10,
            undecided_fraction: 0.0,
        };
        let mu = GridDensity::from_values(grid, vec![0.8, 1.2]).unwrap();
        let rec = reconstruct_srb(&scheme, &mu, 2, &op).unwrap();
        // Hand sum: [0.8 + 0.8, 1.2] = [1.6, 1.2], mass (1.6+1.2)/2 = 1.4.
        assert!((rec.kept_mass - 1.4).abs() < 1e-12);
        let want = [1.6 / 1.4, 1.2 / 1.4];
        for (a, b) in rec.density.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        // Bookkeeping identity: truncated mass = Σ_{j≥N} μ({h>j}) = 0 here.
        assert_eq!(rec.truncated_mass, 0.0);
        let rec1 = reconstruct_srb(&scheme, &mu, 1, &op).unwrap();
        // Dropped level j=1 contributes μ({h>1}) = 0.8/2 = 0.4.
        assert!((rec1.truncated_mass - 0.4).abs() < 1e-12);
    }

    #[test]
    fn u1_identical_params_is_zero() {
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let grid = Grid::new(16, 8, params.domain).unwrap();
        let hp = HyperbolicParams::calibrated(&params, 20, 3).unwrap();
        let rep = u1_check(&params, &params, grid, hp, 30, 1, 3000, 9).unwrap();
        assert!(rep.per_j.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn u1_symmetric_difference_counts_swapped_cells() {
        // Direct check of the measure formula on hand-built schemes.
        let grid = Grid::new(1, 10, DomainInterval::new(0.0, 1.0).unwrap()).unwrap();
        let area = grid.cell_area(); // 0.1
        let mut h0: Vec<Option<u32>> = vec![Some(3); 10];
        let mut h1 = h0.clone();
        // Swap the level-5 support between two cells.
        h0[2] = Some(5);
        h1[7] = Some(5);
        let mk = |h: Vec<Option<u32>>| InducedScheme {
            grid,
            hp: hp_loose(),
            h,
            disagreement: vec![0.0; 10],
            max_steps: 100,
            undecided_fraction: 0.0,
        };
        let (s0, s1) = (mk(h0), mk(h1));
        // Inline version of the per-j tally used by u1_check.
        let mut per5 = 0.0;
        for c in 0..10 {
            if let (Some(a), Some(b)) = (s0.h[c], s1.h[c]) {
                if (a == 5) != (b == 5) {
                    per5 += area;
                }
            }
        }
        assert!((per5 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn distortion_constant_jacobian_maps() {
        let params = SkewMapParams::test_linear();
        let grid = unit_grid(4);
        let scheme = InducedScheme {
            grid,
            hp: hp_loose(),
            h: vec![Some(3); grid.cells()],
            disagreement: vec![0.0; grid.cells()],
            max_steps: 10,
            undecided_fraction: 0.0,
        };
        let rep = distortion_probe(&params, &scheme, 4, 5).unwrap();
        assert_eq!(rep.delta_hat, 1.0);

        let params = SkewMapParams::test_doubling_product();
        let rep = distortion_probe(&params, &scheme, 4, 5).unwrap();
        assert_eq!(rep.delta_hat, 1.0);
    }

    #[test]
    fn distortion_viana_stable_under_more_pairs() {
        let params = SkewMapParams::viana(16, 1.9, 0.01, vec![]).unwrap();
        let grid = Grid::new(16, 16, params.domain).unwrap();
        let hp = HyperbolicParams::calibrated(&params, 20, 3).unwrap();
        let scheme = build_induced(&params, grid, hp, 1, 5000, 7).unwrap();
        let a = distortion_probe(&params, &scheme, 4, 5).unwrap();
        let b = distortion_probe(&params, &scheme, 8, 5).unwrap();
        assert!(a.delta_hat.is_finite() && a.delta_hat >= 1.0);
        assert!(b.delta_hat.is_finite());
        // Stability under probe-count doubling (log-scale within ±20%).
        let ratio = b.delta_hat.ln().max(1e-9) / a.delta_hat.ln().max(1e-9);
        assert!(ratio > 0.8 && ratio < 1.25, "ratio = {ratio}");
    }

    #[test]
    fn u1_decreases_along_perturbation_sweep() {
        let family = SkewMapParams::sweep_family(16, 1.7, 0.01, &[0.0, 1e-3, 1e-2, 1e-1]).unwrap();
        let base = &family[0];
        let grid = Grid::new(16, 16, base.domain).unwrap();
        let hp = HyperbolicParams::calibrated(base, 10, 3).unwrap();
        let mut totals = Vec::new();
        for p in family.iter().rev() {
            let rep = u1_check(base, p, grid, hp, 50, 1, 2000, 11).unwrap();
            totals.push(rep.per_j.iter().sum::<f64>());
        }
        assert_eq!(*totals.last().unwrap(), 0.0);
        assert!(totals[0] >= totals[2], "sweep totals {totals:?}");
    }
}
