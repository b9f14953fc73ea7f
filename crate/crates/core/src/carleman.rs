//! Numerical audit of the semiclassical Carleman estimate with the linear
//! weight `phi(x) = -gamma_tilde . x`, the inequality behind partial-data
//! reconstruction: for `u` in `H^2` with zero boundary trace and `0 < h <= 1`,
//!
//! ```text
//!   -h (d_nu phi e^{phi/h} d_nu u | e^{phi/h} d_nu u)_{bdry-}
//!       + || e^{phi/h} h grad u ||^2
//!   <=  C h^2 || e^{phi/h} H_{W,q} u ||^2
//!       + h (d_nu phi e^{phi/h} d_nu u | e^{phi/h} d_nu u)_{bdry+},
//! ```
//!
//! where `bdry-+` are the boundary pieces with `d_nu phi < 0` and
//! `d_nu phi >= 0`. The constant is non-constructive; this module evaluates
//! all four terms by grid quadrature and *fits* `C` as the largest ratio
//! `(lhs - rhs_plus) / rhs_interior` over a sample set, so downstream checks
//! assert the inequality with a measured constant, never a claimed one.
//!
//! With `gamma_tilde` near the vertical, `d_nu phi = -gamma_tilde . nu` is
//! below `-2 eps0` on the top face, so the weighted Neumann term the
//! partial-data estimator drops is part of `lhs_minus` and inherits the
//! fitted bound:
//!
//! ```text
//!   eps0 * h * || e^{phi/h} d_nu u ||^2_{faces with d_nu phi <= -eps0}
//!       <= lhs_minus <= C h^2 || e^{phi/h} H u ||^2 + rhs_plus.
//! ```
//!
//! Linear weights are the only ones used by the estimators; the limiting
//! Carleman weight condition `<phi'' grad phi, grad phi> + <phi'' xi, xi> = 0`
//! on `|xi| = |grad phi|` is kept as an executable check, with `|x|^2` as the
//! stock non-example.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::potentials::{Bump, PotentialPair};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Weights the limiting-condition check knows how to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum CarlemanWeight {
    /// `phi(x) = x . gamma_tilde` (the sign is irrelevant to the condition);
    /// the direction must be unit.
    Linear { gamma_tilde: [f64; 3] },
    /// `phi(x) = |x|^2`, the stock non-example: positive residual.
    Quadratic,
}

impl CarlemanWeight {
    fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        match self {
            CarlemanWeight::Linear { gamma_tilde } => *gamma_tilde,
            CarlemanWeight::Quadratic => [2.0 * x[0], 2.0 * x[1], 2.0 * x[2]],
        }
    }

    fn hessian_apply(&self, v: [f64; 3]) -> [f64; 3] {
        match self {
            CarlemanWeight::Linear { .. } => [0.0, 0.0, 0.0],
            CarlemanWeight::Quadratic => [2.0 * v[0], 2.0 * v[1], 2.0 * v[2]],
        }
    }
}

/// Largest sampled value of `<phi'' grad phi, grad phi> + <phi'' xi, xi>`
/// over random `x` in the unit cube and random `xi` with `|xi| = |grad phi|`,
/// `xi` orthogonal to `grad phi`. Identically zero for linear weights (the
/// Hessian vanishes); positive for the quadratic non-example. Linear
/// directions must be unit vectors.
pub fn limiting_weight_residual(
    weight: &CarlemanWeight,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if let CarlemanWeight::Linear { gamma_tilde } = weight {
        let n = dot3(*gamma_tilde, *gamma_tilde).sqrt();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParam(format!(
                "limiting weight needs |grad phi| = 1, got |gamma_tilde| = {n}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut drawn = 0usize;
    while drawn < samples {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let g = weight.grad(x);
        let gn = dot3(g, g).sqrt();
        if gn < 1e-6 {
            continue;
        }
        // Random direction, projected off grad phi and rescaled to |grad phi|.
        let raw = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let along = dot3(raw, g) / (gn * gn);
        let mut xi = [raw[0] - along * g[0], raw[1] - along * g[1], raw[2] - along * g[2]];
        let xn = dot3(xi, xi).sqrt();
        if xn < 1e-6 {
            continue;
        }
        for a in 0..3 {
            xi[a] *= gn / xn;
        }
        let hg = weight.hessian_apply(g);
        let hxi = weight.hessian_apply(xi);
        worst = worst.max((dot3(hg, g) + dot3(hxi, xi)).abs());
        drawn += 1;
    }
    Ok(worst)
}

/// The four quadrature terms of the weighted estimate for one sample `u`,
/// plus the per-face breakdown of the boundary flux.
#[derive(Debug, Clone)]
pub struct CarlemanReport {
    /// Semiclassical parameter.
    pub h: f64,
    pub gamma_tilde: [f64; 3],
    /// `-h sum_{d_nu phi < 0} d_nu phi |e^{phi/h} d_nu u|^2` (nonnegative).
    pub lhs_minus: f64,
    /// `|| e^{phi/h} h grad u ||^2` over the interior.
    pub lhs_grad: f64,
    /// `h^2 || e^{phi/h} H_{W,q} u ||^2` over the interior.
    pub rhs_interior: f64,
    /// `h sum_{d_nu phi >= 0} d_nu phi |e^{phi/h} d_nu u|^2` (nonnegative).
    pub rhs_plus: f64,
    /// `h integral |e^{phi/h} d_nu u|^2` per face, order `FACES`.
    pub face_flux: [f64; 6],
    /// `d_nu phi = -gamma_tilde . nu` per face (constant on each).
    pub face_dnphi: [f64; 6],
}

impl CarlemanReport {
    /// `(lhs_minus + lhs_grad - rhs_plus) / rhs_interior`: the constant this
    /// sample demands of the estimate. Zero when every term vanishes.
    pub fn ratio(&self) -> f64 {
        let num = self.lhs_minus + self.lhs_grad - self.rhs_plus;
        if self.rhs_interior > 0.0 {
            num / self.rhs_interior
        } else if num <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Weighted Neumann flux of the faces with `d_nu phi <= -eps0`: the term
    /// the partial-data estimator drops, bounded by `lhs_minus / eps0`.
    pub fn dropped_term(&self, eps0: f64) -> f64 {
        let mut acc = 0.0;
        for f in 0..6 {
            if self.face_dnphi[f] <= -eps0 {
                acc += self.face_flux[f];
            }
        }
        acc
    }
}

const FACE_NORMALS: [(usize, f64); 6] = [
    (0, -1.0),
    (0, 1.0),
    (1, -1.0),
    (1, 1.0),
    (2, -1.0),
    (2, 1.0),
];

/// Evaluate both sides of the estimate for `u` on its own grid, with
/// `phi = -gamma_tilde . x`. Volume terms use centered stencils on interior
/// nodes, boundary terms one-sided normal differences with `h^2` face
/// weights. The trace of `u` must vanish.
pub fn carleman_sides(
    pair: &PotentialPair,
    u: &ScalarField,
    gamma_tilde: [f64; 3],
    h: f64,
) -> Result<CarlemanReport> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "semiclassical parameter must lie in (0, 1], got {h}"
        )));
    }
    let gn = dot3(gamma_tilde, gamma_tilde).sqrt();
    if (gn - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParam(format!(
            "weight direction must be unit, |gamma_tilde| = {gn}"
        )));
    }
    let grid = u.grid;
    let (lo, hi) = (grid.omega_lo(), grid.omega_hi());
    let hg = grid.h();

    // The estimate is stated for zero boundary trace.
    let mut interior_max = 0.0f64;
    let mut trace_max = 0.0f64;
    for ix in lo..=hi {
        for iy in lo..=hi {
            for iz in lo..=hi {
                let v = u.data[grid.node_index(ix, iy, iz)].norm();
                if grid.on_omega_boundary(ix, iy, iz) {
                    trace_max = trace_max.max(v);
                } else {
                    interior_max = interior_max.max(v);
                }
            }
        }
    }
    if trace_max > 1e-12 * interior_max.max(1e-300) {
        return Err(Error::InvalidParam(format!(
            "nonzero boundary trace: max |u| = {trace_max:.3e} on the boundary \
             against {interior_max:.3e} inside"
        )));
    }

    let phi = |x: [f64; 3]| -dot3(gamma_tilde, x);
    let weight2 = |x: [f64; 3]| (2.0 * phi(x) / h).exp();

    let mut lhs_grad = 0.0;
    let mut rhs_interior = 0.0;
    let hg3 = hg * hg * hg;
    let inv_2hg = 1.0 / (2.0 * hg);
    let inv_hg2 = 1.0 / (hg * hg);
    for ix in lo + 1..hi {
        for iy in lo + 1..hi {
            for iz in lo + 1..hi {
                let x = grid.node_pos(ix, iy, iz);
                let c = u.data[grid.node_index(ix, iy, iz)];
                let xp = u.data[grid.node_index(ix + 1, iy, iz)];
                let xm = u.data[grid.node_index(ix - 1, iy, iz)];
                let yp = u.data[grid.node_index(ix, iy + 1, iz)];
                let ym = u.data[grid.node_index(ix, iy - 1, iz)];
                let zp = u.data[grid.node_index(ix, iy, iz + 1)];
                let zm = u.data[grid.node_index(ix, iy, iz - 1)];
                let gradu = [
                    (xp - xm) * inv_2hg,
                    (yp - ym) * inv_2hg,
                    (zp - zm) * inv_2hg,
                ];
                let lap = (xp + xm + yp + ym + zp + zm - 6.0 * c) * inv_hg2;
                let w = pair.w_at(x);
                let divw = pair.div_w_at(x);
                let pot = dot3(w, w) + pair.q_at(x);
                // H u = -lap u - 2i W.grad u - i (div W) u + (W^2 + q) u.
                let wgrad = w[0] * gradu[0] + w[1] * gradu[1] + w[2] * gradu[2];
                let hu = -lap - Complex64::i() * (2.0 * wgrad + divw * c) + pot * c;
                let w2 = weight2(x);
                lhs_grad += w2
                    * (gradu[0].norm_sqr() + gradu[1].norm_sqr() + gradu[2].norm_sqr());
                rhs_interior += w2 * hu.norm_sqr();
            }
        }
    }
    lhs_grad *= h * h * hg3;
    rhs_interior *= h * h * hg3;

    let mut face_flux = [0.0f64; 6];
    let mut face_dnphi = [0.0f64; 6];
    let span = hi - lo + 1;
    for (f, &(axis, sign)) in FACE_NORMALS.iter().enumerate() {
        let mut nu = [0.0; 3];
        nu[axis] = sign;
        face_dnphi[f] = -dot3(gamma_tilde, nu);
        let wall = if sign > 0.0 { hi } else { lo };
        let inner = if sign > 0.0 { hi - 1 } else { lo + 1 };
        let mut flux = 0.0;
        for a in 0..span {
            for b in 0..span {
                let (ix, iy, iz) = match axis {
                    0 => (wall, lo + a, lo + b),
                    1 => (lo + a, wall, lo + b),
                    _ => (lo + a, lo + b, wall),
                };
                let (jx, jy, jz) = match axis {
                    0 => (inner, iy, iz),
                    1 => (ix, inner, iz),
                    _ => (ix, iy, inner),
                };
                let du = (u.data[grid.node_index(ix, iy, iz)]
                    - u.data[grid.node_index(jx, jy, jz)])
                    / hg;
                flux += weight2(grid.node_pos(ix, iy, iz)) * du.norm_sqr();
            }
        }
        face_flux[f] = h * flux * hg * hg;
    }
    let mut lhs_minus = 0.0;
    let mut rhs_plus = 0.0;
    for f in 0..6 {
        if face_dnphi[f] < 0.0 {
            lhs_minus += -face_dnphi[f] * face_flux[f];
        } else {
            rhs_plus += face_dnphi[f] * face_flux[f];
        }
    }

    Ok(CarlemanReport {
        h,
        gamma_tilde,
        lhs_minus,
        lhs_grad,
        rhs_interior,
        rhs_plus,
        face_flux,
        face_dnphi,
    })
}

/// A grid-independent random `H^1_0` sample: a smooth bump times a plane
/// wave, supported strictly inside `Omega`.
#[derive(Debug, Clone)]
pub struct H10Sample {
    pub bump: Bump,
    pub wave: [f64; 3],
    pub amp: Complex64,
}

impl H10Sample {
    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        let osc = Complex64::new(0.0, dot3(self.wave, x)).exp();
        self.amp * self.bump.value(x) * osc
    }

    pub fn field(&self, grid: GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }
}

/// Seeded sample set for the audit; parameters are grid-independent so the
/// same functions can be evaluated on refined grids.
pub fn h10_samples(count: usize, seed: u64) -> Vec<H10Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| H10Sample {
            bump: Bump {
                center: [
                    rng.gen_range(0.4..0.6),
                    rng.gen_range(0.4..0.6),
                    rng.gen_range(0.4..0.6),
                ],
                radius: rng.gen_range(0.22..0.32),
                amp: 1.0,
                sharp: rng.gen_range(8.0..16.0),
            },
            wave: [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ],
            amp: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        })
        .collect()
}

/// Reports for a sample set plus the fitted constant: the largest ratio the
/// estimate must absorb.
#[derive(Debug, Clone)]
pub struct CarlemanAudit {
    pub reports: Vec<CarlemanReport>,
    pub fitted_c: f64,
}

/// Run `carleman_sides` over a seeded sample set and fit the constant.
pub fn carleman_audit(
    pair: &PotentialPair,
    grid: GridSpec,
    gamma_tilde: [f64; 3],
    h: f64,
    count: usize,
    seed: u64,
) -> Result<CarlemanAudit> {
    let mut reports = Vec::with_capacity(count);
    let mut fitted_c = 0.0f64;
    for sample in h10_samples(count, seed) {
        let report = carleman_sides(pair, &sample.field(grid), gamma_tilde, h)?;
        fitted_c = fitted_c.max(report.ratio());
        reports.push(report);
    }
    Ok(CarlemanAudit { reports, fitted_c })
}
