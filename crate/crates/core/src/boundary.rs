//! Boundary mesh, trace basis and fractional boundary norms on the cube.
//!
//! The boundary of `Omega = [0,1]^3` is meshed by the grid nodes lying on its
//! six faces. Every node gets a unique *owner* face in the canonical priority
//! order `XLo, XHi, YLo, YHi, ZLo, ZHi`, so edge and corner nodes belong to
//! the first face containing them and the top face owns only nodes interior
//! to it — which is what makes restriction to "all but the top face" a clean
//! submesh. Quadrature weights are per-face trapezoid weights accumulated
//! over every containing face, hence `sum_p w_p = 6` exactly.
//!
//! Traces are expanded in per-face cosine modes
//!
//! ```text
//!   e_{f,mn}(p) = cos(m pi u) cos(n pi v) / mult(p),   p on face f,
//! ```
//!
//! divided by the number of faces containing `p` so that the six `(0,0)`
//! modes sum to the constant function exactly.
//!
//! Fractional norms come from the boundary graph Laplacian `L` (nodes at
//! grid distance `h` are adjacent, scaled by `1/h^2`): with `B = W^{-1/2} L
//! W^{-1/2} = U diag(lambda) U^T`,
//!
//! ```text
//!   |g|_s^2 = sum_i (1 + lambda_i)^s |(U^T W^{1/2} g)_i|^2 ,
//! ```
//!
//! which is exactly the weighted `L^2` norm at `s = 0`, is nondecreasing in
//! `s`, and assigns every constant the norm `sqrt(6)` at every `s` because
//! constants span the kernel of `L`.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Faces of the cube in canonical priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
    ZLo,
    ZHi,
}

pub const FACES: [Face; 6] = [
    Face::XLo,
    Face::XHi,
    Face::YLo,
    Face::YHi,
    Face::ZLo,
    Face::ZHi,
];

impl Face {
    /// Axis normal to the face.
    #[inline]
    pub fn axis(self) -> usize {
        match self {
            Face::XLo | Face::XHi => 0,
            Face::YLo | Face::YHi => 1,
            Face::ZLo | Face::ZHi => 2,
        }
    }

    /// Outward unit normal.
    #[inline]
    pub fn normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis()] = if self.is_high() { 1.0 } else { -1.0 };
        n
    }

    #[inline]
    pub fn is_high(self) -> bool {
        matches!(self, Face::XHi | Face::YHi | Face::ZHi)
    }

    /// The two in-face axes, in increasing order.
    #[inline]
    pub fn tangents(self) -> (usize, usize) {
        match self.axis() {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        FACES.iter().position(|f| *f == self).unwrap()
    }
}

/// One boundary node with its quadrature data.
#[derive(Debug, Clone)]
pub struct BoundaryNode {
    /// Grid indices of the node.
    pub ijk: [usize; 3],
    /// Position in box coordinates (`Omega` is `[0,1]^3`).
    pub pos: [f64; 3],
    /// Owning face under the canonical priority.
    pub owner: Face,
    /// Bitmask over `FACES` of all faces containing the node.
    pub face_mask: u8,
    /// Number of faces containing the node (1 interior, 2 edge, 3 corner).
    pub mult: usize,
    /// Accumulated trapezoid quadrature weight.
    pub weight: f64,
    /// Outward normal of the owning face.
    pub normal: [f64; 3],
}

impl BoundaryNode {
    #[inline]
    pub fn on_face(&self, f: Face) -> bool {
        self.face_mask & (1 << f.index()) != 0
    }
}

/// The meshed boundary of `Omega`.
pub struct BoundaryMesh {
    pub grid: GridSpec,
    pub nodes: Vec<BoundaryNode>,
    /// Map from flat grid node index to boundary node index.
    lookup: Vec<u32>,
}

const NO_NODE: u32 = u32::MAX;

impl BoundaryMesh {
    pub fn new(grid: GridSpec) -> Self {
        let m = grid.nodes_per_axis();
        let (lo, hi) = (grid.omega_lo(), grid.omega_hi());
        let h = grid.h();
        let mut nodes = Vec::new();
        let mut lookup = vec![NO_NODE; grid.node_count()];
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    if !grid.on_omega_boundary(ix, iy, iz) {
                        continue;
                    }
                    let ijk = [ix, iy, iz];
                    let mut face_mask = 0u8;
                    let mut owner = None;
                    let mut weight = 0.0;
                    for f in FACES {
                        let a = f.axis();
                        let plane = if f.is_high() { hi } else { lo };
                        if ijk[a] != plane {
                            continue;
                        }
                        face_mask |= 1 << f.index();
                        if owner.is_none() {
                            owner = Some(f);
                        }
                        // Trapezoid weight within this face: halve per
                        // in-face axis on which the node sits at a face edge.
                        let (t1, t2) = f.tangents();
                        let mut w = h * h;
                        for t in [t1, t2] {
                            if ijk[t] == lo || ijk[t] == hi {
                                w *= 0.5;
                            }
                        }
                        weight += w;
                    }
                    let owner = owner.expect("boundary node lies on no face");
                    let mult = face_mask.count_ones() as usize;
                    lookup[grid.node_index(ix, iy, iz)] = nodes.len() as u32;
                    nodes.push(BoundaryNode {
                        ijk,
                        pos: grid.node_pos(ix, iy, iz),
                        owner,
                        face_mask,
                        mult,
                        weight,
                        normal: owner.normal(),
                    });
                }
            }
        }
        BoundaryMesh {
            grid,
            nodes,
            lookup,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Boundary index of a grid node, if it is a boundary node.
    #[inline]
    pub fn boundary_index(&self, ix: usize, iy: usize, iz: usize) -> Option<usize> {
        let v = self.lookup[self.grid.node_index(ix, iy, iz)];
        (v != NO_NODE).then_some(v as usize)
    }

    /// Weighted inner product `sum_p w_p conj(a_p) b_p`.
    pub fn dot(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        self.nodes
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(n, (x, y))| n.weight * x.conj() * y)
            .sum()
    }

    /// Weighted `L^2` norm of a trace.
    pub fn l2(&self, a: &[Complex64]) -> f64 {
        self.dot(a, a).re.max(0.0).sqrt()
    }

    /// Indices of nodes accessible when the open top face is removed, i.e.
    /// every node lying on at least one face other than `ZHi`.
    pub fn accessible_without_top(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.face_mask != 1 << Face::ZHi.index())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-face cosine trace basis up to mode order `m_max` in each direction.
#[derive(Debug, Clone, Copy)]
pub struct TraceBasis {
    pub m_max: usize,
}

impl TraceBasis {
    pub fn new(m_max: usize) -> Self {
        TraceBasis { m_max }
    }

    #[inline]
    pub fn per_face(&self) -> usize {
        (self.m_max + 1) * (self.m_max + 1)
    }

    #[inline]
    pub fn count(&self) -> usize {
        6 * self.per_face()
    }

    /// Decode a flat basis index into (face, m, n).
    #[inline]
    pub fn decode(&self, idx: usize) -> (Face, usize, usize) {
        let per = self.per_face();
        let f = FACES[idx / per];
        let r = idx % per;
        (f, r / (self.m_max + 1), r % (self.m_max + 1))
    }

    /// Flat indices of the basis functions supported on the five faces other
    /// than the top one.
    pub fn indices_without_top(&self) -> Vec<usize> {
        (0..5 * self.per_face()).collect()
    }

    /// Evaluate basis function `idx` at a boundary node.
    pub fn eval(&self, idx: usize, node: &BoundaryNode) -> f64 {
        let (f, m, n) = self.decode(idx);
        if !node.on_face(f) {
            return 0.0;
        }
        let (t1, t2) = f.tangents();
        let u = node.pos[t1];
        let v = node.pos[t2];
        (m as f64 * std::f64::consts::PI * u).cos() * (n as f64 * std::f64::consts::PI * v).cos()
            / node.mult as f64
    }

    /// Dense trace matrix `T[p, idx] = e_idx(p)` over all boundary nodes.
    pub fn trace_matrix(&self, mesh: &BoundaryMesh) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(mesh.len(), self.count());
        for (p, node) in mesh.nodes.iter().enumerate() {
            for idx in 0..self.count() {
                t[(p, idx)] = self.eval(idx, node);
            }
        }
        t
    }
}

/// Result of a weighted least-squares projection of a trace onto the basis.
pub struct TraceProjection {
    pub coeffs: DVector<Complex64>,
    /// Relative weighted residual `|T c - g| / |g|`.
    pub residual: f64,
}

/// Project node values onto the basis in the weighted `L^2` sense. The
/// least-squares problem is solved through a truncated SVD of the
/// weight-scaled trace matrix, because on coarse meshes the per-face cosine
/// system can be exactly rank deficient (edge-localized mode combinations of
/// adjacent faces cancel); the minimum-norm coefficients are then the
/// canonical representative.
pub fn project_trace(
    mesh: &BoundaryMesh,
    basis: &TraceBasis,
    values: &[Complex64],
) -> Result<TraceProjection> {
    let t = basis.trace_matrix(mesh);
    let k = basis.count();
    let m = mesh.len();
    let mut a = DMatrix::<f64>::zeros(m, k);
    let mut rhs_re = DVector::<f64>::zeros(m);
    let mut rhs_im = DVector::<f64>::zeros(m);
    for (p, node) in mesh.nodes.iter().enumerate() {
        let sw = node.weight.sqrt();
        for idx in 0..k {
            a[(p, idx)] = sw * t[(p, idx)];
        }
        rhs_re[p] = sw * values[p].re;
        rhs_im[p] = sw * values[p].im;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = 1e-10 * smax.max(1.0);
    let re = svd
        .solve(&rhs_re, eps)
        .map_err(|e| Error::SolverFailure(format!("trace projection: {e}")))?;
    let im = svd
        .solve(&rhs_im, eps)
        .map_err(|e| Error::SolverFailure(format!("trace projection: {e}")))?;
    let coeffs = DVector::from_iterator(k, (0..k).map(|i| Complex64::new(re[i], im[i])));
    let mut fit = vec![Complex64::new(0.0, 0.0); mesh.len()];
    for p in 0..mesh.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..k {
            acc += t[(p, a)] * coeffs[a];
        }
        fit[p] = acc;
    }
    let diff: Vec<Complex64> = fit
        .iter()
        .zip(values.iter())
        .map(|(a, b)| a - b)
        .collect();
    let denom = mesh.l2(values);
    let residual = if denom == 0.0 {
        0.0
    } else {
        mesh.l2(&diff) / denom
    };
    Ok(TraceProjection {
        coeffs,
        residual,
    })
}

/// Synthesize node values from basis coefficients.
pub fn synthesize_trace(
    mesh: &BoundaryMesh,
    basis: &TraceBasis,
    coeffs: &DVector<Complex64>,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); mesh.len()];
    for (p, node) in mesh.nodes.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for idx in 0..basis.count() {
            let e = basis.eval(idx, node);
            if e != 0.0 {
                acc += e * coeffs[idx];
            }
        }
        out[p] = acc;
    }
    out
}

/// Spectral data for fractional boundary norms.
pub struct SobolevScale {
    /// Eigenvalues of `W^{-1/2} L W^{-1/2}`, clamped to `>= 0`.
    pub eigenvalues: DVector<f64>,
    /// Rows map node values to spectral coordinates: `Y = U^T W^{1/2}`.
    to_spectral: DMatrix<f64>,
}

impl SobolevScale {
    pub fn new(mesh: &BoundaryMesh) -> Self {
        let m = mesh.len();
        let h2 = mesh.grid.h() * mesh.grid.h();
        let mut lap = DMatrix::<f64>::zeros(m, m);
        for (p, node) in mesh.nodes.iter().enumerate() {
            let [ix, iy, iz] = node.ijk;
            let mut neighbors = Vec::with_capacity(6);
            let mut push = |jx: isize, jy: isize, jz: isize| {
                if jx < 0 || jy < 0 || jz < 0 {
                    return;
                }
                let (jx, jy, jz) = (jx as usize, jy as usize, jz as usize);
                let nn = mesh.grid.nodes_per_axis();
                if jx >= nn || jy >= nn || jz >= nn {
                    return;
                }
                if let Some(q) = mesh.boundary_index(jx, jy, jz) {
                    neighbors.push(q);
                }
            };
            let (x, y, z) = (ix as isize, iy as isize, iz as isize);
            push(x - 1, y, z);
            push(x + 1, y, z);
            push(x, y - 1, z);
            push(x, y + 1, z);
            push(x, y, z - 1);
            push(x, y, z + 1);
            for q in neighbors {
                lap[(p, p)] += 1.0 / h2;
                lap[(p, q)] -= 1.0 / h2;
            }
        }
        // Symmetrize similarity: B = W^{-1/2} L W^{-1/2}.
        let mut b = lap;
        for p in 0..m {
            for q in 0..m {
                if b[(p, q)] != 0.0 {
                    b[(p, q)] /= (mesh.nodes[p].weight * mesh.nodes[q].weight).sqrt();
                }
            }
        }
        let eig = b.symmetric_eigen();
        let eigenvalues = eig.eigenvalues.map(|l| l.max(0.0));
        let mut to_spectral = eig.eigenvectors.transpose();
        for q in 0..m {
            let sw = mesh.nodes[q].weight.sqrt();
            for p in 0..m {
                to_spectral[(p, q)] *= sw;
            }
        }
        SobolevScale {
            eigenvalues,
            to_spectral,
        }
    }

    /// Apply the node-to-spectral map to every column of a real matrix.
    pub fn spectral_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.to_spectral * m
    }

    /// Spectral coordinates `y = U^T W^{1/2} g` of a complex trace.
    pub fn coords(&self, values: &[Complex64]) -> DVector<Complex64> {
        let m = values.len();
        let re = DVector::from_iterator(m, values.iter().map(|z| z.re));
        let im = DVector::from_iterator(m, values.iter().map(|z| z.im));
        let yr = &self.to_spectral * re;
        let yi = &self.to_spectral * im;
        DVector::from_iterator(m, (0..m).map(|i| Complex64::new(yr[i], yi[i])))
    }

    /// Fractional norm `|g|_s`.
    pub fn norm(&self, values: &[Complex64], s: f64) -> f64 {
        let y = self.coords(values);
        let mut acc = 0.0;
        for i in 0..y.len() {
            acc += (1.0 + self.eigenvalues[i]).powf(s) * y[i].norm_sqr();
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn mesh8() -> BoundaryMesh {
        BoundaryMesh::new(GridSpec::with_default_margin(8).unwrap())
    }

    #[test]
    fn node_count_and_weight_sum() {
        let mesh = mesh8();
        // Omega spans 5 nodes per axis at n = 8: 125 - 27 interior = 98.
        assert_eq!(mesh.len(), 98);
        let total: f64 = mesh.nodes.iter().map(|n| n.weight).sum();
        assert!((total - 6.0).abs() < 1e-12, "weights sum to {total}");
    }

    #[test]
    fn top_face_owns_only_its_interior() {
        let mesh = mesh8();
        for node in &mesh.nodes {
            if node.owner == Face::ZHi {
                assert_eq!(node.mult, 1, "top-owned node {:?} on an edge", node.ijk);
            }
        }
        let inaccessible = mesh.len() - mesh.accessible_without_top().len();
        // Interior of the top face: (5-2)^2 nodes at n = 8.
        assert_eq!(inaccessible, 9);
    }

    #[test]
    fn constants_are_exactly_representable() {
        let mesh = mesh8();
        // Order 2 keeps the system full rank on the 5-node faces of n = 8, so
        // the coefficient representation is unique.
        let basis = TraceBasis::new(2);
        let ones = vec![Complex64::new(1.0, 0.0); mesh.len()];
        let proj = project_trace(&mesh, &basis, &ones).unwrap();
        assert!(proj.residual < 1e-10, "residual {}", proj.residual);
        // The coefficients should put 1 on each face's (0,0) mode.
        for f in 0..6 {
            let idx = f * basis.per_face();
            assert!((proj.coeffs[idx] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn constant_norm_is_sqrt_six_at_every_order() {
        let mesh = mesh8();
        let scale = SobolevScale::new(&mesh);
        let ones = vec![Complex64::new(1.0, 0.0); mesh.len()];
        for s in [-2.0, -0.5, 0.0, 0.5, 1.0, 3.0] {
            let v = scale.norm(&ones, s);
            assert!(
                (v - 6.0f64.sqrt()).abs() < 1e-9,
                "s = {s}: norm {v} != sqrt(6)"
            );
        }
    }

    #[test]
    fn norms_are_monotone_in_order() {
        let mesh = mesh8();
        let scale = SobolevScale::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let g: Vec<Complex64> = (0..mesh.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let orders = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
        let norms: Vec<f64> = orders.iter().map(|&s| scale.norm(&g, s)).collect();
        for w in norms.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-12), "norms not monotone: {norms:?}");
        }
        // A rough trace should grow strictly.
        assert!(norms[5] > norms[0] * 1.01);
    }

    #[test]
    fn zero_order_norm_matches_weighted_l2() {
        let mesh = mesh8();
        let scale = SobolevScale::new(&mesh);
        let g: Vec<Complex64> = mesh
            .nodes
            .iter()
            .map(|n| Complex64::new(n.pos[0] - n.pos[2], n.pos[1]))
            .collect();
        let a = scale.norm(&g, 0.0);
        let b = mesh.l2(&g);
        assert!((a - b).abs() < 1e-10 * b);
    }

    #[test]
    fn projection_recovers_band_limited_traces() {
        let mesh = mesh8();
        let basis = TraceBasis::new(2);
        // A function that is exactly a combination of face modes: cos(pi x)
        // restricted to the boundary lives in the span (every face sees it as
        // either a (m,n) cosine mode in its own parameters or a constant).
        let g: Vec<Complex64> = mesh
            .nodes
            .iter()
            .map(|n| Complex64::new((std::f64::consts::PI * n.pos[0]).cos(), 0.0))
            .collect();
        let proj = project_trace(&mesh, &basis, &g).unwrap();
        assert!(proj.residual < 1e-9, "residual {}", proj.residual);
        let back = synthesize_trace(&mesh, &basis, &proj.coeffs);
        let err: f64 = back
            .iter()
            .zip(g.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8);
    }
}
