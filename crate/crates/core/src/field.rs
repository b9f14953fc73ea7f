//! Complex scalar and vector fields sampled on the embedding grid.
//!
//! Values are stored node-major (x slowest, z fastest) over all `(n+1)^3`
//! nodes of the box. Spectral code views the first `n` nodes per axis as one
//! period; helpers keep the duplicated top plane consistent after inverse
//! transforms.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use num_complex::Complex64;

/// Complex scalar samples on every grid node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

/// Complex 3-vector samples on every grid node, stored per component.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: GridSpec,
    pub comps: [Vec<Complex64>; 3],
}

impl ScalarField {
    /// Zero field on `grid`.
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.node_count()],
        }
    }

    /// Sample a closure of the node position.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let m = grid.nodes_per_axis();
        let mut data = Vec::with_capacity(grid.node_count());
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    data.push(f(grid.node_pos(ix, iy, iz)));
                }
            }
        }
        ScalarField { grid, data }
    }

    /// Sample a real-valued closure.
    pub fn from_real_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> Complex64 {
        self.data[self.grid.node_index(ix, iy, iz)]
    }

    #[inline]
    pub fn at_mut(&mut self, ix: usize, iy: usize, iz: usize) -> &mut Complex64 {
        &mut self.data[self.grid.node_index(ix, iy, iz)]
    }

    /// Fail if any sample is NaN or infinite.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{what} contains NaN/inf samples")))
        }
    }

    /// Largest absolute sample value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute imaginary part, used to validate real-valued inputs.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Pointwise linear combination `self + c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &ScalarField) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in self.data.iter_mut() {
            *v *= c;
        }
    }

    /// Trilinear interpolation at an arbitrary point; zero outside the box.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> Complex64 {
        let g = &self.grid;
        let h = g.h();
        let m = g.nodes_per_axis();
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let t = (p[a] + g.margin) / h;
            if t < 0.0 || t > (m - 1) as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let i = t.floor().min((m - 2) as f64).max(0.0) as usize;
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for dx in 0..2 {
            let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
                for dz in 0..2 {
                    let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        acc += w * self.at(base[0] + dx, base[1] + dy, base[2] + dz);
                    }
                }
            }
        }
        acc
    }

    /// Copy the periodic images: plane `n` is overwritten with plane `0` on
    /// every axis. Called after inverse transforms which only fill the
    /// `n^3` unique nodes.
    pub fn sync_periodic_faces(&mut self) {
        let n = self.grid.n;
        let m = self.grid.nodes_per_axis();
        for a in 0..m {
            for b in 0..m {
                let src = self.grid.node_index(0, a, b);
                let dst = self.grid.node_index(n, a, b);
                self.data[dst] = self.data[src];
            }
        }
        for a in 0..m {
            for b in 0..m {
                let src = self.grid.node_index(a, 0, b);
                let dst = self.grid.node_index(a, n, b);
                self.data[dst] = self.data[src];
            }
        }
        for a in 0..m {
            for b in 0..m {
                let src = self.grid.node_index(a, b, 0);
                let dst = self.grid.node_index(a, b, n);
                self.data[dst] = self.data[src];
            }
        }
    }
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.node_count()];
        VectorField {
            grid,
            comps: [z.clone(), z.clone(), z],
        }
    }

    /// Sample a closure returning the three components at once.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> [Complex64; 3]) -> Self {
        let m = grid.nodes_per_axis();
        let mut out = VectorField::zeros(grid);
        let mut idx = 0;
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    let v = f(grid.node_pos(ix, iy, iz));
                    out.comps[0][idx] = v[0];
                    out.comps[1][idx] = v[1];
                    out.comps[2][idx] = v[2];
                    idx += 1;
                }
            }
        }
        out
    }

    pub fn from_real_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        Self::from_fn(grid, |x| {
            let v = f(x);
            [
                Complex64::new(v[0], 0.0),
                Complex64::new(v[1], 0.0),
                Complex64::new(v[2], 0.0),
            ]
        })
    }

    /// Component as a scalar field view (clones the samples).
    pub fn component(&self, axis: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.comps[axis].clone(),
        }
    }

    #[inline]
    pub fn at(&self, axis: usize, ix: usize, iy: usize, iz: usize) -> Complex64 {
        self.comps[axis][self.grid.node_index(ix, iy, iz)]
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        for (axis, c) in self.comps.iter().enumerate() {
            if !c.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "{what} component {axis} contains NaN/inf samples"
                )));
            }
        }
        Ok(())
    }

    /// Largest pointwise Euclidean magnitude `max_x |V(x)|`.
    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.comps[0].len() {
            let s = self.comps[0][i].norm_sqr()
                + self.comps[1][i].norm_sqr()
                + self.comps[2][i].norm_sqr();
            best = best.max(s);
        }
        best.sqrt()
    }

    pub fn max_imag(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, c: Complex64, other: &VectorField) {
        for axis in 0..3 {
            for (a, b) in self.comps[axis]
                .iter_mut()
                .zip(other.comps[axis].iter())
            {
                *a += c * b;
            }
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for axis in 0..3 {
            for v in self.comps[axis].iter_mut() {
                *v *= c;
            }
        }
    }

    /// Pointwise dot product with a constant complex vector: `sum_j m_j V_j(x)`.
    pub fn dot_const(&self, m: [Complex64; 3]) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for axis in 0..3 {
            for (o, v) in out.data.iter_mut().zip(self.comps[axis].iter()) {
                *o += m[axis] * v;
            }
        }
        out
    }
}
