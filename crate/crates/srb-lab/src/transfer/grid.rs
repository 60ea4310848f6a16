//! Piecewise-constant densities on a θ×x grid, with L^p norms and a discrete
//! total-variation diagnostic.
//!
//! Lebesgue measure on S¹×I is normalized to total mass 1, so every cell has
//! measure 1/(n_theta·n_x) and the uniform density is identically 1.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{CylinderPoint, DomainInterval};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_theta: usize,
    pub n_x: usize,
    pub domain: DomainInterval,
}

impl Grid {
    pub fn new(n_theta: usize, n_x: usize, domain: DomainInterval) -> Result<Self> {
        if n_theta == 0 || n_x == 0 {
            return Err(Error::InvalidArgument(
                "grid dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            n_theta,
            n_x,
            domain,
        })
    }

    pub fn cells(&self) -> usize {
        self.n_theta * self.n_x
    }

    /// Normalized cell measure.
    pub fn cell_area(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn index_of(&self, pt: CylinderPoint) -> usize {
        let it = ((pt.theta * self.n_theta as f64) as usize).min(self.n_theta - 1);
        let fx = (pt.x - self.domain.lo) / self.domain.len();
        let ix = ((fx * self.n_x as f64) as usize).min(self.n_x - 1);
        it * self.n_x + ix
    }

    /// Center of cell (it, ix).
    pub fn center(&self, it: usize, ix: usize) -> CylinderPoint {
        CylinderPoint {
            theta: (it as f64 + 0.5) / self.n_theta as f64,
            x: self.domain.lo + (ix as f64 + 0.5) / self.n_x as f64 * self.domain.len(),
        }
    }

    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_x, idx % self.n_x)
    }

    /// True when n is a pure power of base (base^k, k ≥ 1).
    pub fn is_power_of(mut n: usize, base: usize) -> bool {
        if base < 2 || n < base {
            return false;
        }
        while n.is_multiple_of(base) {
            n /= base;
        }
        n == 1
    }
}

/// Nonnegative piecewise-constant density, row-major in θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn uniform(grid: Grid) -> Self {
        let n = grid.cells();
        Self {
            grid,
            values: vec![1.0; n],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.cells(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let mut d = Self { grid, values };
        d.normalize()?;
        Ok(d)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if m.is_nan() || m <= 0.0 {
            return Err(Error::InvalidArgument(
                "cannot normalize a zero density".into(),
            ));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(())
    }

    /// Marginal density in θ (n_theta values, integrating to 1 over [0,1)).
    pub fn theta_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_theta];
        for (idx, v) in self.values.iter().enumerate() {
            let (it, _) = self.grid.split_index(idx);
            out[it] += v / self.grid.n_x as f64;
        }
        out
    }

    /// Marginal density in x (n_x values, w.r.t. normalized x-measure).
    pub fn x_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_x];
        for (idx, v) in self.values.iter().enumerate() {
            let (_, ix) = self.grid.split_index(idx);
            out[ix] += v / self.grid.n_theta as f64;
        }
        out
    }
}

/// Hölder-conjugate exponents tied to the cylinder dimension d = 2:
/// p = d/(d−1) for densities, q = d for return times, 1/p + 1/q = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    pub dim: u32,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { dim: 2 }
    }
}

impl NormConfig {
    pub fn p(&self) -> f64 {
        self.dim as f64 / (self.dim as f64 - 1.0)
    }

    pub fn q(&self) -> f64 {
        self.dim as f64
    }
}

pub fn l1_distance(d1: &GridDensity, d2: &GridDensity) -> Result<f64> {
    if d1.grid != d2.grid {
        return Err(Error::GridMismatch(
            "densities live on different grids".into(),
        ));
    }
    Ok(d1
        .values
        .iter()
        .zip(&d2.values)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * d1.grid.cell_area())
}

pub fn lp_norm(d: &GridDensity, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let s: f64 = d.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * d.grid.cell_area();
    Ok(s.powf(1.0 / p))
}

/// Anisotropic edge-weighted total variation: sum over adjacent cell pairs of
/// |Δvalue| times the physical length of the shared edge. θ wraps (S¹), x
/// does not.
pub fn discrete_variation(d: &GridDensity) -> f64 {
    let g = &d.grid;
    let edge_theta = g.domain.len() / g.n_x as f64; // edge between θ-neighbors
    let edge_x = 1.0 / g.n_theta as f64; // edge between x-neighbors
    let mut tv = 0.0;
    for it in 0..g.n_theta {
        for ix in 0..g.n_x {
            let v = d.values[it * g.n_x + ix];
            if g.n_theta > 1 {
                let up = d.values[((it + 1) % g.n_theta) * g.n_x + ix];
                tv += (v - up).abs() * edge_theta;
            }
            if ix + 1 < g.n_x {
                let right = d.values[it * g.n_x + ix + 1];
                tv += (v - right).abs() * edge_x;
            }
        }
    }
    tv
}

/// Writes the `srb-density v1` text format: a one-line header followed by
/// row-major values, one per line.
pub fn write_density<W: Write>(w: &mut W, d: &GridDensity) -> Result<()> {
    writeln!(
        w,
        "srb-density v1; {}; {}; theta in [0,1); x in [{:.17e},{:.17e}]",
        d.grid.n_theta, d.grid.n_x, d.grid.domain.lo, d.grid.domain.hi
    )?;
    for v in &d.values {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

pub fn read_density<R: BufRead>(r: &mut R) -> Result<GridDensity> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let parts: Vec<&str> = header.trim().split(';').map(str::trim).collect();
    if parts.len() != 5 || parts[0] != "srb-density v1" {
        return Err(Error::Config(format!("bad density header: {header:?}")));
    }
    let n_theta: usize = parts[1]
        .parse()
        .map_err(|e| Error::Config(format!("bad n_theta: {e}")))?;
    let n_x: usize = parts[2]
        .parse()
        .map_err(|e| Error::Config(format!("bad n_x: {e}")))?;
    let xr = parts[4]
        .strip_prefix("x in [")
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Config(format!("bad x range: {:?}", parts[4])))?;
    let (lo, hi) = xr
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("bad x range: {xr:?}")))?;
    let domain = DomainInterval::new(
        lo.parse()
            .map_err(|e| Error::Config(format!("bad lo: {e}")))?,
        hi.parse()
            .map_err(|e| Error::Config(format!("bad hi: {e}")))?,
    )?;
    let grid = Grid::new(n_theta, n_x, domain)?;
    let mut values = Vec::with_capacity(grid.cells());
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad value: {e}")))?,
        );
    }
    GridDensity::from_values(grid, values)
}
