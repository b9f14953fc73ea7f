//! Matrix-free Krylov solvers for the complex linear systems of the
//! workbench: restarted GMRES for the non-normal conjugated systems and
//! conjugate gradients for Hermitian positive-definite ones.
//!
//! Both solvers measure convergence by the relative residual
//! `|b - A x| / |b|` in the unweighted Euclidean norm and report their final
//! state in [`SolveStats`]; callers that cannot proceed with an unconverged
//! solution escalate via [`require_converged`].

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Options for the restarted GMRES solver.
#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    /// Relative residual target.
    pub tol: f64,
    /// Total iteration cap across restarts.
    pub max_iters: usize,
    /// Krylov subspace dimension per restart cycle.
    pub restart: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-10,
            max_iters: 600,
            restart: 60,
        }
    }
}

/// Options for conjugate gradients.
#[derive(Debug, Clone, Copy)]
pub struct CgConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            tol: 1e-10,
            max_iters: 2000,
        }
    }
}

/// Final state of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Escalate an unconverged solve into an error with context.
pub fn require_converged(stats: &SolveStats, what: &str) -> Result<()> {
    if stats.converged {
        Ok(())
    } else {
        Err(Error::SolverFailure(format!(
            "{what}: no convergence after {} iterations (residual {:.3e})",
            stats.iterations, stats.residual
        )))
    }
}

#[inline]
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
fn nrm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
pub fn gmres<F>(
    apply: F,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    cfg: &GmresConfig,
) -> (Vec<Complex64>, SolveStats)
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = nrm2(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); n]);
    if bnorm == 0.0 {
        return (
            vec![Complex64::new(0.0, 0.0); n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        );
    }
    let mut total = 0usize;
    'outer: while total < cfg.max_iters {
        let ax = apply(&x);
        let mut r: Vec<Complex64> = b.iter().zip(ax.iter()).map(|(bb, aa)| bb - aa).collect();
        let beta = nrm2(&r);
        let mut res = beta / bnorm;
        if res <= cfg.tol {
            break;
        }
        for v in r.iter_mut() {
            *v /= beta;
        }
        let m = cfg.restart.min(cfg.max_iters - total).max(1);
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        // Hessenberg stored column-wise; Givens rotations (cs, sn) kept so the
        // least-squares residual is available each step.
        let mut hess: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<Complex64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let mut w = apply(&basis[k]);
            let mut col = vec![Complex64::new(0.0, 0.0); k + 2];
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(vj, &w);
                col[j] = hjk;
                for (wi, vji) in w.iter_mut().zip(vj.iter()) {
                    *wi -= hjk * vji;
                }
            }
            let hk1 = nrm2(&w);
            col[k + 1] = Complex64::new(hk1, 0.0);
            // Apply accumulated rotations to the new column.
            for j in 0..k {
                let t = cs[j].conj() * col[j] + sn[j].conj() * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            // New rotation annihilating col[k+1].
            let (c, s) = {
                let a = col[k];
                let bb = col[k + 1];
                let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
                if denom == 0.0 {
                    (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
                } else {
                    (a / denom, bb / denom)
                }
            };
            let t = c.conj() * col[k] + s.conj() * col[k + 1];
            col[k] = t;
            col[k + 1] = Complex64::new(0.0, 0.0);
            let gt = c.conj() * g[k];
            g[k + 1] = -s * g[k];
            g[k] = gt;
            cs.push(c);
            sn.push(s);
            hess.push(col);
            k_used = k + 1;
            res = g[k + 1].norm() / bnorm;
            if hk1 > 0.0 {
                for wi in w.iter_mut() {
                    *wi /= hk1;
                }
                basis.push(w);
            }
            if res <= cfg.tol || hk1 == 0.0 || total >= cfg.max_iters {
                break;
            }
        }
        // Back-substitute the triangular system and update x.
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_used {
                acc -= hess[j][i] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vji) in x.iter_mut().zip(basis[j].iter()) {
                *xi += yj * vji;
            }
        }
        if res <= cfg.tol {
            break 'outer;
        }
    }
    // Measure the true residual once at the end.
    let ax = apply(&x);
    let rfin: f64 = nrm2(
        &b.iter()
            .zip(ax.iter())
            .map(|(bb, aa)| bb - aa)
            .collect::<Vec<_>>(),
    );
    let res = rfin / bnorm;
    let converged = res <= cfg.tol * 10.0;
    (
        x,
        SolveStats {
            iterations: total,
            residual: res,
            converged,
        },
    )
}

/// Conjugate gradients for Hermitian positive-definite systems.
pub fn cg_hermitian<F>(
    apply: F,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    cfg: &CgConfig,
) -> (Vec<Complex64>, SolveStats)
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = nrm2(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); n]);
    if bnorm == 0.0 {
        return (
            vec![Complex64::new(0.0, 0.0); n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        );
    }
    let ax = apply(&x);
    let mut r: Vec<Complex64> = b.iter().zip(ax.iter()).map(|(bb, aa)| bb - aa).collect();
    let mut p = r.clone();
    let mut rho = dot(&r, &r).re;
    let mut iters = 0;
    while iters < cfg.max_iters {
        let res = rho.sqrt() / bnorm;
        if res <= cfg.tol {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            // Not positive definite along this direction; stop here and let
            // the caller decide whether the partial solution is usable.
            break;
        }
        let alpha = rho / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rho_new = dot(&r, &r).re;
        let beta = rho_new / rho;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rho = rho_new;
        iters += 1;
    }
    let res = rho.sqrt() / bnorm;
    (
        x,
        SolveStats {
            iterations: iters,
            residual: res,
            converged: res <= cfg.tol,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_complex_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn gmres_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        // Diagonally dominant, far from Hermitian.
        let mut a = random_complex_matrix(n, &mut rng);
        for i in 0..n {
            a[(i, i)] += Complex64::new(8.0, 2.0);
        }
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let apply = |x: &[Complex64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            (&a * xv).iter().copied().collect::<Vec<_>>()
        };
        let (x, stats) = gmres(apply, &b, None, &GmresConfig::default());
        assert!(stats.converged, "residual {}", stats.residual);
        let direct = a
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&b))
            .unwrap();
        let err: f64 = x
            .iter()
            .zip(direct.iter())
            .map(|(u, v)| (u - v).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "solution error {err}");
    }

    #[test]
    fn gmres_restart_path_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let mut a = random_complex_matrix(n, &mut rng);
        for i in 0..n {
            a[(i, i)] += Complex64::new(10.0, 0.0);
        }
        let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(1.0, -0.5)).collect();
        let apply = |x: &[Complex64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            (&a * xv).iter().copied().collect::<Vec<_>>()
        };
        let cfg = GmresConfig {
            restart: 8,
            max_iters: 400,
            tol: 1e-9,
        };
        let (_, stats) = gmres(apply, &b, None, &cfg);
        assert!(stats.converged, "restarted run stuck at {}", stats.residual);
        assert!(stats.iterations > 8, "should have needed at least one restart");
    }

    #[test]
    fn cg_solves_hermitian_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 50;
        let m = random_complex_matrix(n, &mut rng);
        let a = m.adjoint() * &m + DMatrix::identity(n, n).map(|v: f64| Complex64::new(v, 0.0));
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let apply = |x: &[Complex64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            (&a * xv).iter().copied().collect::<Vec<_>>()
        };
        let (x, stats) = cg_hermitian(apply, &b, None, &CgConfig::default());
        assert!(stats.converged);
        require_converged(&stats, "test system").unwrap();
        let direct = a
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&b))
            .unwrap();
        let err: f64 = x
            .iter()
            .zip(direct.iter())
            .map(|(u, v)| (u - v).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "solution error {err}");
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let b = vec![Complex64::new(0.0, 0.0); 10];
        let apply = |x: &[Complex64]| x.to_vec();
        let (x, stats) = gmres(&apply, &b, None, &GmresConfig::default());
        assert!(stats.converged);
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }
}
