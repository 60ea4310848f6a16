//! Statistical-stability sweep: perturb a(θ) by δ·sin(2πθ+1) and track the
//! L¹ movement of the computed invariant density.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::SkewMapParams;
use crate::transfer::{build_ulam, invariant_density, l1_distance, Grid, GridDensity};

use super::ergodic::birkhoff_density;

#[derive(Clone, Debug, Serialize)]
pub struct StabilityConfig {
    pub n_theta: usize,
    pub n_x: usize,
    pub subsamples: usize,
    pub density_max_iter: usize,
    pub density_tol: f64,
    pub birkhoff_orbits: usize,
    pub birkhoff_length: usize,
    pub birkhoff_burn_in: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityEntry {
    pub delta: f64,
    pub l1: f64,
    pub birkhoff_crosscheck: f64,
    pub density_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub entries: Vec<StabilityEntry>,
    /// Deltas whose pipeline failed, with the error message.
    pub failures: Vec<(f64, String)>,
    pub n_theta: usize,
    pub n_x: usize,
    pub seed: u64,
}

fn run_one(
    params: &SkewMapParams,
    grid: &Grid,
    cfg: &StabilityConfig,
) -> Result<(GridDensity, f64, f64)> {
    let op = build_ulam(params, *grid, cfg.subsamples, cfg.seed)?;
    let inv = invariant_density(&op, cfg.density_tol, cfg.density_max_iter)?;
    let birkhoff = birkhoff_density(
        params,
        cfg.birkhoff_orbits,
        cfg.birkhoff_length,
        cfg.birkhoff_burn_in,
        grid,
        cfg.seed,
    )?;
    let cross = l1_distance(&inv.density, &birkhoff.density)?;
    Ok((inv.density, cross, inv.residual))
}

/// Runs the pipeline for each delta (which must include 0) and reports the
/// L¹ distance of each density to the unperturbed one. A failing delta is
/// recorded and the sweep continues; a failure at delta = 0 aborts since
/// there is nothing to compare against.
pub fn stability_sweep(
    degree: u32,
    a0: f64,
    alpha: f64,
    deltas: &[f64],
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    if !deltas.contains(&0.0) {
        return Err(Error::InvalidArgument("deltas must include 0".into()));
    }
    let family = SkewMapParams::sweep_family(degree, a0, alpha, deltas)?;
    let grid = Grid::new(cfg.n_theta, cfg.n_x, family[0].domain)?;

    let base_idx = deltas.iter().position(|&d| d == 0.0).unwrap();
    let (base_density, base_cross, base_res) = run_one(&family[base_idx], &grid, cfg)?;

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (i, (&delta, params)) in deltas.iter().zip(&family).enumerate() {
        if i == base_idx {
            entries.push(StabilityEntry {
                delta,
                l1: 0.0,
                birkhoff_crosscheck: base_cross,
                density_residual: base_res,
            });
            continue;
        }
        match run_one(params, &grid, cfg) {
            Ok((density, cross, res)) => entries.push(StabilityEntry {
                delta,
                l1: l1_distance(&density, &base_density)?,
                birkhoff_crosscheck: cross,
                density_residual: res,
            }),
            Err(e) => failures.push((delta, e.to_string())),
        }
    }
    entries.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(StabilityReport {
        entries,
        failures,
        n_theta: cfg.n_theta,
        n_x: cfg.n_x,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> StabilityConfig {
        StabilityConfig {
            n_theta: 16,
            n_x: 16,
            subsamples: 64,
            density_max_iter: 20_000,
            density_tol: 1e-8,
            birkhoff_orbits: 300,
            birkhoff_length: 2100,
            birkhoff_burn_in: 100,
            seed,
        }
    }

    #[test]
    fn zero_delta_entry_is_exactly_zero() {
        let rep = stability_sweep(16, 1.7, 0.01, &[0.0, 1e-2], &small_cfg(3)).unwrap();
        let zero = rep.entries.iter().find(|e| e.delta == 0.0).unwrap();
        assert_eq!(zero.l1, 0.0);
        assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    }

    #[test]
    fn l1_grows_with_delta() {
        let rep = stability_sweep(16, 1.7, 0.01, &[0.0, 1e-3, 1e-1], &small_cfg(7)).unwrap();
        let get = |d: f64| rep.entries.iter().find(|e| e.delta == d).unwrap().l1;
        assert!(get(1e-3) < get(1e-1), "{} vs {}", get(1e-3), get(1e-1));
    }

    #[test]
    fn missing_zero_delta_is_rejected() {
        assert!(stability_sweep(16, 1.7, 0.01, &[1e-3], &small_cfg(1)).is_err());
    }
}
