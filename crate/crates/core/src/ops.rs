//! Finite-difference differential operators on box fields.
//!
//! All first derivatives use the second-order centered stencil
//!
//! ```text
//!   d_a f(x_i) ~ (f_{i+1} - f_{i-1}) / (2 h)
//! ```
//!
//! with one-sided second-order stencils on the two outermost planes of the
//! box. Stencils along different axes commute exactly, so the discrete
//! identities `curl grad = 0` and `div curl = 0` hold to rounding, and the
//! "wide" Laplacian defined as `div(grad f)` is used wherever a later
//! divergence must cancel it exactly (gauge fixing). The compact 7-point
//! Laplacian is kept separate for the interior elliptic operator, where its
//! smaller stencil keeps the linear system better conditioned.

use crate::field::{ScalarField, VectorField};
use num_complex::Complex64;

/// Partial derivative along `axis` (0, 1 or 2), second order everywhere.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid;
    let n = g.n;
    let inv2h = 1.0 / (2.0 * g.h());
    let mut out = ScalarField::zeros(g);
    let stride = match axis {
        0 => (n + 1) * (n + 1),
        1 => n + 1,
        2 => 1,
        _ => panic!("axis out of range"),
    };
    let m = n + 1;
    for ix in 0..m {
        for iy in 0..m {
            for iz in 0..m {
                let i = [ix, iy, iz][axis];
                let idx = g.node_index(ix, iy, iz);
                let v = if i == 0 {
                    (-3.0 * f.data[idx] + 4.0 * f.data[idx + stride] - f.data[idx + 2 * stride])
                        * inv2h
                } else if i == n {
                    (3.0 * f.data[idx] - 4.0 * f.data[idx - stride] + f.data[idx - 2 * stride])
                        * inv2h
                } else {
                    (f.data[idx + stride] - f.data[idx - stride]) * inv2h
                };
                out.data[idx] = v;
            }
        }
    }
    out
}

/// Gradient as a vector field.
pub fn gradient(f: &ScalarField) -> VectorField {
    let mut out = VectorField::zeros(f.grid);
    for axis in 0..3 {
        out.comps[axis] = partial(f, axis).data;
    }
    out
}

/// Divergence of a vector field.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let mut out = ScalarField::zeros(g);
    for axis in 0..3 {
        let comp = ScalarField {
            grid: g,
            data: v.comps[axis].clone(),
        };
        let d = partial(&comp, axis);
        for (o, d) in out.data.iter_mut().zip(d.data.iter()) {
            *o += d;
        }
    }
    out
}

/// Curl of a vector field.
pub fn curl(v: &VectorField) -> VectorField {
    let g = v.grid;
    let comp = |a: usize| ScalarField {
        grid: g,
        data: v.comps[a].clone(),
    };
    let d = |a: usize, b: usize| partial(&comp(a), b);
    let mut out = VectorField::zeros(g);
    let d21 = d(2, 1);
    let d12 = d(1, 2);
    let d02 = d(0, 2);
    let d20 = d(2, 0);
    let d10 = d(1, 0);
    let d01 = d(0, 1);
    for i in 0..g.node_count() {
        out.comps[0][i] = d21.data[i] - d12.data[i];
        out.comps[1][i] = d02.data[i] - d20.data[i];
        out.comps[2][i] = d10.data[i] - d01.data[i];
    }
    out
}

/// Wide Laplacian `div(grad f)`: the exact composition of the discrete
/// first-order operators above.
pub fn laplacian_wide(f: &ScalarField) -> ScalarField {
    divergence(&gradient(f))
}

/// Compact 7-point Laplacian, one-sided (second order) on box edge planes.
pub fn laplacian_compact(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let n = g.n;
    let m = n + 1;
    let invh2 = 1.0 / (g.h() * g.h());
    let mut out = ScalarField::zeros(g);
    let strides = [(n + 1) * (n + 1), n + 1, 1usize];
    for ix in 0..m {
        for iy in 0..m {
            for iz in 0..m {
                let idx = g.node_index(ix, iy, iz);
                let pos = [ix, iy, iz];
                let mut acc = Complex64::new(0.0, 0.0);
                for axis in 0..3 {
                    let i = pos[axis];
                    let s = strides[axis];
                    acc += if i == 0 {
                        2.0 * f.data[idx] - 5.0 * f.data[idx + s] + 4.0 * f.data[idx + 2 * s]
                            - f.data[idx + 3 * s]
                    } else if i == n {
                        2.0 * f.data[idx] - 5.0 * f.data[idx - s] + 4.0 * f.data[idx - 2 * s]
                            - f.data[idx - 3 * s]
                    } else {
                        f.data[idx + s] - 2.0 * f.data[idx] + f.data[idx - s]
                    };
                }
                out.data[idx] = acc * invh2;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn gradient_exact_on_quadratics() {
        let g = GridSpec::with_default_margin(8).unwrap();
        let f = ScalarField::from_real_fn(g, |x| {
            x[0] * x[0] + 2.0 * x[1] * x[2] - 3.0 * x[2] + 1.0
        });
        let grad = gradient(&f);
        let expect = VectorField::from_real_fn(g, |x| [2.0 * x[0], 2.0 * x[2], 2.0 * x[1] - 3.0]);
        let mut err = 0.0f64;
        for a in 0..3 {
            for (u, v) in grad.comps[a].iter().zip(expect.comps[a].iter()) {
                err = err.max((u - v).norm());
            }
        }
        assert!(err < 1e-11, "gradient error {err}");
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            Complex64::new((2.0 * x[0] + x[1]).sin(), (x[2] - x[0]).cos())
        });
        let c = curl(&gradient(&f));
        assert!(c.max_abs() < 1e-11, "curl grad = {}", c.max_abs());
    }

    #[test]
    fn divergence_of_curl_vanishes() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let v = VectorField::from_fn(g, |x| {
            [
                Complex64::new((x[1] * 2.0).sin(), x[2]),
                Complex64::new(x[0] * x[2], (x[0]).cos()),
                Complex64::new(x[1] - x[0] * x[1], 0.5 * x[2] * x[0]),
            ]
        });
        let d = divergence(&curl(&v));
        assert!(d.max_abs() < 1e-10, "div curl = {}", d.max_abs());
    }

    #[test]
    fn compact_laplacian_exact_on_quadratics() {
        let g = GridSpec::with_default_margin(8).unwrap();
        let f =
            ScalarField::from_real_fn(g, |x| x[0] * x[0] - 2.0 * x[1] * x[1] + 4.0 * x[2] * x[2]);
        let lap = laplacian_compact(&f);
        let mut err = 0.0f64;
        for v in lap.data.iter() {
            err = err.max((v - Complex64::new(6.0, 0.0)).norm());
        }
        assert!(err < 1e-10, "laplacian error {err}");
    }

    #[test]
    fn wide_laplacian_is_exact_composition() {
        let g = GridSpec::with_default_margin(8).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            Complex64::new((x[0] * 3.0).sin() * x[1], x[2] * x[2] - x[0])
        });
        let a = laplacian_wide(&f);
        let b = divergence(&gradient(&f));
        let mut err = 0.0f64;
        for (u, v) in a.data.iter().zip(b.data.iter()) {
            err = err.max((u - v).norm());
        }
        assert_eq!(err, 0.0);
    }
}
