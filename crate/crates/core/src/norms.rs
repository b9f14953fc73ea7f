//! Weighted Lebesgue and Sobolev norms on box fields.
//!
//! The weighted spaces use the bracket `<x> = (1 + |x|^2)^(1/2)`:
//!
//! ```text
//!   |f|_{L2_delta}^2  = sum_j <x_j>^{2 delta} |f_j|^2 h^3
//!   |f|_{Ht_delta}^2  = P^{-3} sum_m <k_m>^{2t} |g^(k_m)|^2,   g = <x>^delta f
//!   |f|_{H-1}^2       = P2^{-3} sum_m |f^(k_m)|^2 / (1 + |k_m|^2)
//! ```
//!
//! where hats are plain box transforms; the `H^{-1}` sum may run on a
//! zero-padded box (period `P2 = pad * P`) to thin the dual lattice near the
//! origin, where the `1/(1+|k|^2)` weight concentrates. The `P^{-3}`
//! normalization makes `t = 0` reproduce the weighted `L^2` norm exactly, by
//! discrete Parseval, at every padding factor.

use crate::fft::{padded_forward, BoxFft};
use crate::field::{ScalarField, VectorField};

/// Japanese bracket `<x> = sqrt(1 + |x|^2)`.
#[inline]
pub fn bracket(x: [f64; 3]) -> f64 {
    (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn sum_weighted_sq(f: &ScalarField, delta: f64) -> f64 {
    let g = f.grid;
    let n = g.n;
    let mut acc = 0.0;
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let x = g.node_pos(ix, iy, iz);
                let w = if delta == 0.0 {
                    1.0
                } else {
                    bracket(x).powf(2.0 * delta)
                };
                acc += w * f.at(ix, iy, iz).norm_sqr();
            }
        }
    }
    acc * g.h().powi(3)
}

/// Plain `L^2` norm over the box (Riemann sum on unique nodes).
pub fn l2(f: &ScalarField) -> f64 {
    sum_weighted_sq(f, 0.0).sqrt()
}

/// Weighted norm `|f|_{L2_delta}`.
pub fn l2_delta(f: &ScalarField, delta: f64) -> f64 {
    sum_weighted_sq(f, delta).sqrt()
}

/// Componentwise `L^2` norm of a vector field.
pub fn l2_vec(v: &VectorField) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        let comp = ScalarField {
            grid: v.grid,
            data: v.comps[a].clone(),
        };
        acc += sum_weighted_sq(&comp, 0.0);
    }
    acc.sqrt()
}

/// Sup norm over all nodes.
pub fn linf(f: &ScalarField) -> f64 {
    f.max_abs()
}

/// Sobolev norm `|f|_{Ht_delta}` through the plain box transform.
pub fn ht_delta(f: &ScalarField, t: f64, delta: f64) -> f64 {
    let g = f.grid;
    let weighted = if delta == 0.0 {
        f.clone()
    } else {
        ScalarField {
            grid: g,
            data: {
                let mut d = f.data.clone();
                let m = g.n + 1;
                for ix in 0..m {
                    for iy in 0..m {
                        for iz in 0..m {
                            d[g.node_index(ix, iy, iz)] *=
                                bracket(g.node_pos(ix, iy, iz)).powf(delta);
                        }
                    }
                }
                d
            },
        }
    };
    let fft = BoxFft::new(g);
    let mut spec = fft.forward(&weighted, [0.0; 3]);
    let mut acc = 0.0;
    spec.for_each_bin(|k, v| {
        acc += bracket(k).powf(2.0 * t) * v.norm_sqr();
    });
    (acc / g.period().powi(3)).sqrt()
}

/// `H^{-1}` norm with an optional zero-padding factor (>= 1) refining the
/// dual lattice.
pub fn hminus1(f: &ScalarField, pad_factor: usize) -> f64 {
    let spec = padded_forward(f, pad_factor);
    let n2 = spec.n2;
    let freqs: Vec<f64> = (0..n2).map(|m| spec.freq(m)).collect();
    let mut acc = 0.0;
    let mut idx = 0;
    for mx in 0..n2 {
        for my in 0..n2 {
            let kxy = freqs[mx] * freqs[mx] + freqs[my] * freqs[my];
            for mz in 0..n2 {
                let ksq = kxy + freqs[mz] * freqs[mz];
                acc += spec.data[idx].norm_sqr() / (1.0 + ksq);
                idx += 1;
            }
        }
    }
    (acc / spec.period2.powi(3)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use num_complex::Complex64;

    fn bump(g: GridSpec, alpha: f64) -> ScalarField {
        let c = g.omega_center();
        ScalarField::from_real_fn(g, |x| {
            let r2 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>();
            (-alpha * r2).exp()
        })
    }

    #[test]
    fn ht_with_t_zero_reproduces_weighted_l2() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let f = ScalarField::from_fn(g, |x| Complex64::new((x[0] * 4.0).sin(), x[1] - x[2]));
        for delta in [0.0, -1.5, 2.0] {
            let a = ht_delta(&f, 0.0, delta);
            let b = l2_delta(&f, delta);
            assert!((a - b).abs() < 1e-10 * b.max(1.0), "delta={delta}: {a} vs {b}");
        }
    }

    #[test]
    fn single_lattice_mode_hminus1_closed_form() {
        let g = GridSpec::with_default_margin(8).unwrap();
        let p = g.period();
        let k0 = [
            2.0 * std::f64::consts::PI / p,
            -4.0 * std::f64::consts::PI / p,
            0.0,
        ];
        let f = ScalarField::from_fn(g, |x| {
            Complex64::from_polar(1.0, k0[0] * x[0] + k0[1] * x[1] + k0[2] * x[2])
        });
        // |f|_{L2} = P^{3/2} and the whole spectrum sits in one bin.
        let expect = p.powf(1.5) / bracket(k0);
        let got = hminus1(&f, 1);
        assert!(
            (got - expect).abs() < 1e-12 * expect,
            "got {got}, expected {expect}"
        );
    }

    #[test]
    fn padding_refines_toward_a_limit() {
        let g = GridSpec::with_default_margin(16).unwrap();
        let f = bump(g, 30.0);
        let v1 = hminus1(&f, 1);
        let v2 = hminus1(&f, 2);
        let v3 = hminus1(&f, 3);
        // The dual-lattice Riemann sum converges as the lattice thins, so
        // consecutive refinements must shrink and the tail must be small.
        let d12 = (v1 - v2).abs() / v2;
        let d23 = (v2 - v3).abs() / v3;
        assert!(d23 < d12, "refinement not contracting: {d12} -> {d23}");
        assert!(d23 < 0.05, "padded values still moving: {d23}");
    }

    #[test]
    fn gaussian_hminus1_matches_radial_quadrature() {
        // For f = exp(-alpha |x-c|^2), f^(k) = (pi/alpha)^{3/2} exp(-|k|^2/(4 alpha))
        // and |f|_{H-1}^2 = (2 pi)^{-3} * 4 pi * int_0^inf k^2 (pi/alpha)^3
        // exp(-k^2/(2 alpha)) / (1+k^2) dk.
        let alpha = 20.0;
        let g = GridSpec::with_default_margin(16).unwrap();
        let f = bump(g, alpha);
        let got = hminus1(&f, 2);
        let steps = 40_000;
        let kmax = 60.0;
        let dk = kmax / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            let k = (i as f64 + 0.5) * dk;
            integral += k * k * (-k * k / (2.0 * alpha)).exp() / (1.0 + k * k) * dk;
        }
        let expect = ((std::f64::consts::PI / alpha).powi(3) * 4.0 * std::f64::consts::PI
            * integral
            / (2.0 * std::f64::consts::PI).powi(3))
        .sqrt();
        let rel = (got - expect).abs() / expect;
        assert!(rel < 0.03, "H^-1 mismatch: got {got}, expected {expect}");
    }
}
