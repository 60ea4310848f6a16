//! Ergodicity probes: Birkhoff occupation histograms and the density-point
//! cell search.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::SkewMapParams;
use crate::transfer::{Grid, GridDensity};
use crate::util;

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffReport {
    pub density: GridDensity,
    pub escaped_orbits: usize,
    pub counted_iterates: u64,
}

/// Normalized occupation histogram of post-burn-in iterates over `n_orbits`
/// random starts. Orbits that escape the domain are dropped and counted.
pub fn birkhoff_density(
    params: &SkewMapParams,
    n_orbits: usize,
    length: usize,
    burn_in: usize,
    grid: &Grid,
    seed: u64,
) -> Result<BirkhoffReport> {
    if length <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "length {length} must exceed burn_in {burn_in}"
        )));
    }
    if n_orbits == 0 {
        return Err(Error::InvalidArgument("n_orbits must be positive".into()));
    }
    if grid.domain != params.domain {
        return Err(Error::GridMismatch(
            "grid domain differs from map domain".into(),
        ));
    }

    struct Tally {
        counts: Vec<u64>,
        escaped: usize,
    }

    let cells = grid.n_theta * grid.n_x;
    let tally = (0..n_orbits)
        .into_par_iter()
        .map(|i| {
            let rng = util::rng_for(seed, i as u64);
            let mut orbit = crate::maps::OrbitSampler::new(params, rng);
            let mut counts = vec![0u64; cells];
            for step in 0..length {
                if step >= burn_in {
                    counts[grid.index_of(orbit.current())] += 1;
                }
                if orbit.step().is_err() {
                    return Tally {
                        counts: vec![0; cells],
                        escaped: 1,
                    };
                }
            }
            Tally { counts, escaped: 0 }
        })
        .reduce(
            || Tally {
                counts: vec![0; cells],
                escaped: 0,
            },
            |mut a, b| {
                for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                    *x += y;
                }
                a.escaped += b.escaped;
                a
            },
        );

    let total: u64 = tally.counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "every orbit escaped the domain".into(),
        ));
    }
    let area = grid.cell_area();
    let values: Vec<f64> = tally
        .counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * area))
        .collect();
    Ok(BirkhoffReport {
        density: GridDensity::from_values(*grid, values)?,
        escaped_orbits: tally.escaped,
        counted_iterates: total,
    })
}

/// First coarse cell (row-major theta-major order) where the fine-cell set
/// `b` fills all but an `eps` fraction of the cell's mass; None when no cell
/// qualifies. `b` is a boolean mask over the fine grid's cells.
pub fn density_cell_search(
    b: &[bool],
    fine: &Grid,
    coarse: &Grid,
    eps: f64,
) -> Result<Option<(usize, usize)>> {
    if b.len() != fine.n_theta * fine.n_x {
        return Err(Error::GridMismatch(format!(
            "mask has {} entries for a {}x{} grid",
            b.len(),
            fine.n_theta,
            fine.n_x
        )));
    }
    if !fine.n_theta.is_multiple_of(coarse.n_theta) || !fine.n_x.is_multiple_of(coarse.n_x) {
        return Err(Error::GridMismatch(
            "coarse grid must divide the fine grid".into(),
        ));
    }
    if !b.iter().any(|&v| v) {
        return Err(Error::InvalidArgument(
            "mask must have positive mass".into(),
        ));
    }
    if !(0.0 < eps && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1], got {eps}"
        )));
    }
    let rt = fine.n_theta / coarse.n_theta;
    let rx = fine.n_x / coarse.n_x;
    let per_cell = (rt * rx) as f64;
    for it in 0..coarse.n_theta {
        for ix in 0..coarse.n_x {
            let mut missing = 0usize;
            for dt in 0..rt {
                for dx in 0..rx {
                    let fi = (it * rt + dt) * fine.n_x + ix * rx + dx;
                    if !b[fi] {
                        missing += 1;
                    }
                }
            }
            if (missing as f64) < eps * per_cell {
                return Ok(Some((it, ix)));
            }
        }
    }
    Ok(None)
}
