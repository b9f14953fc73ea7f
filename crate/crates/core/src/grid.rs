//! Uniform embedding grid for the cube geometry.
//!
//! The measurement domain is the unit cube `Omega = [0,1]^3`. All fields live
//! on the larger periodized box `[-L, 1+L]^3` so that compactly supported
//! potentials can be extended and transformed without touching the seam:
//!
//! ```text
//!   -L        0                 1        1+L
//!    |--------|=================|--------|
//!      margin        Omega         margin
//! ```
//!
//! With `n` cells per axis the spacing is `h = (1+2L)/n` and nodes sit at
//! `x_i = -L + i h` for `i = 0..=n`. Node `n` duplicates node `0` under the
//! box period, so spectral paths operate on the `n^3` unique nodes while
//! finite differences may use all `(n+1)^3` samples. The faces of `Omega`
//! must land exactly on grid nodes; construction fails otherwise.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Geometry of the embedding box and its uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells per axis of the periodized box (nodes per axis is `n + 1`).
    pub n: usize,
    /// Margin `L` between `Omega` and the box on every side.
    pub margin: f64,
    /// Offset of the dual lattice in units of the frequency spacing.
    pub fourier_offset: [f64; 3],
}

impl GridSpec {
    /// Build a grid, checking the size, margin and `Omega` alignment rules.
    pub fn new(n: usize, margin: f64, fourier_offset: [f64; 3]) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidParam(format!(
                "grid needs at least 8 cells per axis, got {n}"
            )));
        }
        if !(margin >= 0.5) {
            return Err(Error::InvalidParam(format!(
                "margin must be at least 0.5, got {margin}"
            )));
        }
        for (axis, off) in fourier_offset.iter().enumerate() {
            if !off.is_finite() || !(0.0..1.0).contains(off) {
                return Err(Error::InvalidParam(format!(
                    "fourier offset component {axis} must lie in [0,1), got {off}"
                )));
            }
        }
        let spec = GridSpec {
            n,
            margin,
            fourier_offset,
        };
        // The faces of Omega must coincide with grid nodes so boundary traces
        // and Dirichlet problems are well posed on the lattice.
        let lo = margin / spec.h();
        let hi = (1.0 + margin) / spec.h();
        let tol = 1e-9 * n as f64;
        if (lo - lo.round()).abs() > tol || (hi - hi.round()).abs() > tol {
            return Err(Error::InvalidParam(format!(
                "Omega faces do not align with the grid: n = {n}, margin = {margin} \
                 place x = 0 at fractional index {lo:.6}"
            )));
        }
        Ok(spec)
    }

    /// Grid with the default margin 0.5 and the default half-bin offset.
    pub fn with_default_margin(n: usize) -> Result<Self> {
        GridSpec::new(n, 0.5, [0.5, 0.5, 0.5])
    }

    /// Box period `1 + 2L`.
    #[inline]
    pub fn period(&self) -> f64 {
        1.0 + 2.0 * self.margin
    }

    /// Grid spacing `h = (1+2L)/n`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.period() / self.n as f64
    }

    /// Nodes per axis, `n + 1`.
    #[inline]
    pub fn nodes_per_axis(&self) -> usize {
        self.n + 1
    }

    /// Total node count `(n+1)^3`.
    #[inline]
    pub fn node_count(&self) -> usize {
        let m = self.nodes_per_axis();
        m * m * m
    }

    /// Coordinate of node index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.margin + i as f64 * self.h()
    }

    /// Position of a node given its per-axis indices.
    #[inline]
    pub fn node_pos(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    /// Flat node-major index (x slowest, z fastest).
    #[inline]
    pub fn node_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let m = self.nodes_per_axis();
        (ix * m + iy) * m + iz
    }

    /// Inverse of [`GridSpec::node_index`].
    #[inline]
    pub fn node_coords(&self, idx: usize) -> (usize, usize, usize) {
        let m = self.nodes_per_axis();
        (idx / (m * m), (idx / m) % m, idx % m)
    }

    /// Per-axis node index of the `x = 0` face of `Omega`.
    #[inline]
    pub fn omega_lo(&self) -> usize {
        (self.margin / self.h()).round() as usize
    }

    /// Per-axis node index of the `x = 1` face of `Omega`.
    #[inline]
    pub fn omega_hi(&self) -> usize {
        ((1.0 + self.margin) / self.h()).round() as usize
    }

    /// Node lies in the closed cube `Omega`.
    #[inline]
    pub fn in_omega(&self, ix: usize, iy: usize, iz: usize) -> bool {
        let (lo, hi) = (self.omega_lo(), self.omega_hi());
        ix >= lo && ix <= hi && iy >= lo && iy <= hi && iz >= lo && iz <= hi
    }

    /// Node lies strictly inside `Omega`.
    #[inline]
    pub fn in_omega_interior(&self, ix: usize, iy: usize, iz: usize) -> bool {
        let (lo, hi) = (self.omega_lo(), self.omega_hi());
        ix > lo && ix < hi && iy > lo && iy < hi && iz > lo && iz < hi
    }

    /// Node lies on the boundary `partial Omega`.
    #[inline]
    pub fn on_omega_boundary(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.in_omega(ix, iy, iz) && !self.in_omega_interior(ix, iy, iz)
    }

    /// Center of `Omega`, used as the phase origin for oscillatory probes.
    #[inline]
    pub fn omega_center(&self) -> [f64; 3] {
        [0.5, 0.5, 0.5]
    }

    /// Signed dual-lattice frequency for FFT bin `m` along one axis.
    ///
    /// Bin `m` in `0..n` maps to the signed integer `m' = m` for `m < n/2` and
    /// `m - n` otherwise; with offset `sigma` the frequency is
    /// `k = 2 pi (m' + sigma) / period`.
    #[inline]
    pub fn dual_freq(&self, m: usize, offset: f64) -> f64 {
        let n = self.n as isize;
        let m = m as isize;
        let signed = if m < n - n / 2 { m } else { m - n };
        2.0 * std::f64::consts::PI * (signed as f64 + offset) / self.period()
    }

    /// Check two grids describe the same lattice.
    pub fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.n != other.n || (self.margin - other.margin).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "{what}: {}x (margin {}) vs {}x (margin {})",
                self.n, self.margin, other.n, other.margin
            )));
        }
        Ok(())
    }
}
