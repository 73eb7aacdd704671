//! Uniform and hyperbolically stretched tensor-product grids.
//!
//! Computational coordinates live on `[0, 1]`; the physical coordinate of a
//! node is `x(ξ)` and its metric coefficient is `h = dξ/dx`. Each axis stores
//! `n + 2` nodes: index `0` and `n + 1` are boundary (wall layout) or ghost
//! (periodic layout) nodes, `1..=n` are the unknowns.

use crate::error::{QnsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StretchMode {
    Uniform,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchConfig {
    pub beta: f64,
    pub length: f64,
    pub mode: StretchMode,
}

impl StretchConfig {
    pub fn uniform(length: f64) -> Self {
        Self { beta: 1.0, length, mode: StretchMode::Uniform }
    }

    pub fn hyperbolic(beta: f64, length: f64) -> Self {
        Self { beta, length, mode: StretchMode::Hyperbolic }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(QnsError::Config(format!("domain length must be positive, got {}", self.length)));
        }
        // tan(1/β) must be positive and finite for a monotone map
        if self.mode == StretchMode::Hyperbolic
            && (!(self.beta > std::f64::consts::FRAC_2_PI) || !self.beta.is_finite())
        {
            return Err(QnsError::Config(format!("stretching beta must exceed 2/π, got {}", self.beta)));
        }
        Ok(())
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&xi) {
        Ok(())
    } else {
        Err(QnsError::Domain(format!("computational coordinate {xi} outside [0, 1]")))
    }
}

/// Maps a computational coordinate to the physical domain `[0, L]`.
///
/// Hyperbolic mode uses `x = L/2 [1 + β atan((2ξ − 1) tan(1/β))]`, which
/// clusters nodes towards both ends of the interval.
pub fn stretch_map(xi: f64, cfg: &StretchConfig) -> Result<f64> {
    check_xi(xi)?;
    cfg.validate()?;
    Ok(match cfg.mode {
        StretchMode::Uniform => xi * cfg.length,
        StretchMode::Hyperbolic => {
            let s = (2.0 * xi - 1.0) * (1.0 / cfg.beta).tan();
            0.5 * cfg.length * (1.0 + cfg.beta * s.atan())
        }
    })
}

/// Metric coefficient `h = dξ/dx` from the analytic derivative of [`stretch_map`].
pub fn metric_coeff(xi: f64, cfg: &StretchConfig) -> Result<f64> {
    check_xi(xi)?;
    cfg.validate()?;
    Ok(match cfg.mode {
        StretchMode::Uniform => 1.0 / cfg.length,
        StretchMode::Hyperbolic => {
            let tb = (1.0 / cfg.beta).tan();
            let s = (2.0 * xi - 1.0) * tb;
            (1.0 + s * s) / (cfg.length * cfg.beta * tb)
        }
    })
}

/// One grid direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    /// Number of unknowns along the axis.
    pub n: usize,
    /// Computational spacing Δξ.
    pub d: f64,
    /// Physical coordinates, `n + 2` entries.
    pub coords: Vec<f64>,
    /// Metric coefficients, `n + 2` entries.
    pub h: Vec<f64>,
    pub periodic: bool,
    pub length: f64,
}

impl Axis {
    /// Wall layout: unknowns at `ξ_i = iΔξ`, `Δξ = 1/(n+1)`, walls at `ξ = 0, 1`.
    pub fn walled(n: usize, cfg: &StretchConfig) -> Result<Self> {
        if n < 2 {
            return Err(QnsError::Config(format!("need at least 2 nodes per axis, got {n}")));
        }
        cfg.validate()?;
        let d = 1.0 / (n as f64 + 1.0);
        let mut coords = Vec::with_capacity(n + 2);
        let mut h = Vec::with_capacity(n + 2);
        for i in 0..n + 2 {
            let xi = if i == n + 1 { 1.0 } else { i as f64 * d };
            coords.push(stretch_map(xi, cfg)?);
            h.push(metric_coeff(xi, cfg)?);
        }
        Ok(Self { n, d, coords, h, periodic: false, length: cfg.length })
    }

    /// Periodic layout: `n` distinct nodes `x_i = (i − 1)L/n`, ghosts one
    /// spacing outside on either side. Only uniform spacing is supported.
    pub fn periodic(n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(QnsError::Config(format!("need at least 2 nodes per axis, got {n}")));
        }
        StretchConfig::uniform(length).validate()?;
        let d = 1.0 / n as f64;
        let coords = (0..n + 2).map(|i| (i as f64 - 1.0) * d * length).collect();
        let h = vec![1.0 / length; n + 2];
        Ok(Self { n, d, coords, h, periodic: true, length })
    }

    /// Interior coordinates `coords[1..=n]`.
    pub fn interior(&self) -> &[f64] {
        &self.coords[1..=self.n]
    }

    /// Index of the neighbour across the boundary for periodic wraparound.
    pub fn wrap(&self, i: usize) -> usize {
        debug_assert!(self.periodic);
        match i {
            0 => self.n,
            i if i == self.n + 1 => 1,
            i => i,
        }
    }
}

/// Tensor-product 2D grid. `xi` runs along x (index `i`), `eta` along y (index `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub xi: Axis,
    pub eta: Axis,
}

impl Grid2D {
    pub fn n_xi(&self) -> usize {
        self.xi.n
    }

    pub fn n_eta(&self) -> usize {
        self.eta.n
    }

    /// Number of unknowns `N_ξ · N_η`.
    pub fn len(&self) -> usize {
        self.xi.n * self.eta.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes per row including boundary/ghost nodes.
    pub fn stride(&self) -> usize {
        self.xi.n + 2
    }

    pub fn total_nodes(&self) -> usize {
        (self.xi.n + 2) * (self.eta.n + 2)
    }

    pub fn periodic(&self) -> bool {
        self.xi.periodic
    }

    /// Flat index of an unknown, `k = (i − 1) + (j − 1) N_ξ` for `1 ≤ i ≤ N_ξ`, `1 ≤ j ≤ N_η`.
    #[inline]
    pub fn unknown(&self, i: usize, j: usize) -> usize {
        (i - 1) + (j - 1) * self.xi.n
    }

    /// Flat index into a full `(N_ξ + 2) × (N_η + 2)` node array.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + j * self.stride()
    }

    /// Inverse of [`Grid2D::unknown`], returning 1-based `(i, j)`.
    pub fn unknown_ij(&self, k: usize) -> (usize, usize) {
        (k % self.xi.n + 1, k / self.xi.n + 1)
    }

    /// Copies interior values of a full node array into an unknown vector.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 1..=self.eta.n {
            for i in 1..=self.xi.n {
                out.push(full[self.node(i, j)]);
            }
        }
        out
    }

    /// Writes an unknown vector into the interior of a full node array.
    pub fn scatter(&self, unknowns: &[f64], full: &mut [f64]) {
        for j in 1..=self.eta.n {
            for i in 1..=self.xi.n {
                full[self.node(i, j)] = unknowns[self.unknown(i, j)];
            }
        }
    }
}

/// Builds a walled grid with `n_xi × n_eta` unknowns and the same stretching on both axes.
pub fn build_grid(n_xi: usize, n_eta: usize, cfg: &StretchConfig) -> Result<Grid2D> {
    Ok(Grid2D { xi: Axis::walled(n_xi, cfg)?, eta: Axis::walled(n_eta, cfg)? })
}

/// Builds a uniform doubly periodic grid on `[0, L)²`.
pub fn build_periodic_grid(n_xi: usize, n_eta: usize, length: f64) -> Result<Grid2D> {
    Ok(Grid2D { xi: Axis::periodic(n_xi, length)?, eta: Axis::periodic(n_eta, length)? })
}
