//! Complex geometrical-optics (CGO) solutions of the magnetic Schrodinger
//! equation on the periodized box.
//!
//! A CGO solution has the form `u = exp(i zeta . x) (a + r)` with a complex
//! frequency satisfying `zeta . zeta = 0`, `|zeta| = sqrt(2) s`, an amplitude
//! `a = exp(i phi)` whose phase solves the transport equation for the
//! mollified potential `W# = W * chi_rho`, `rho = |zeta|^(-sigma0)`, and a
//! remainder `r` solving the conjugated equation
//!
//! ```text
//!   L_zeta r = f := -L_zeta a,
//!   L_zeta v = -lap v - 2i zeta . grad v + 2 W . D_zeta v + G v,
//!   D_zeta = -i grad + zeta,        G = W^2 - i div W + q,
//! ```
//!
//! so that `H_{W,q} u = exp(i zeta . x) L_zeta (a + r) = 0`. The free part
//! `A_zeta = lap + 2i zeta . grad` is inverted on an offset Fourier lattice
//! where its symbol `sigma(k) = -|k|^2 - 2 zeta . k` stays away from its
//! characteristic zeros; the full equation is the fixed point
//! `(I - A^{-1} K) r = -A^{-1} f` with `K = 2 W . D_zeta + G`, solved by
//! restarted GMRES.
//!
//! Frequency pairs `(zeta_1, zeta_2)` are built from a probe frequency `xi`
//! so that `zeta_1 - conj(zeta_2) = 2 xi`: the product `u_1 conj(u_2)` then
//! carries `exp(2i xi . x)`, which is what the boundary-integral estimators
//! extract. The theory's expanding cutoff `chi(x / |zeta|^theta)` is taken
//! to be identically one on the box: its radius exceeds the computational
//! domain for every slope in play, which is exactly the regime the uniform
//! bounds assume.

use crate::error::{Error, Result};
use crate::fft::BoxFft;
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::potentials::{mollify_split, PotentialPair};
use crate::solver::{gmres, GmresConfig, SolveStats};
use crate::transport::{phase_sharp, CauchyConfig, PhaseData, PlaneFrame};
use num_complex::Complex64;

/// Hard floor on the Faddeev symbol magnitude: below this the offset lattice
/// is considered to collide with the characteristic variety.
pub const SYMBOL_FLOOR: f64 = 1e-8;

/// Which boundary-data geometry the frequency pair serves.
///
/// `Full { j, k }` probes the curl component `(dW)_{jk}` and puts the
/// imaginary direction in the `(e_j, e_k)` plane; `Partial { j }` confines it
/// to the span of `e_j` and the distinguished vertical axis `e_3`, so the
/// limiting Carleman weight of the inaccessible top face points along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Full { j: usize, k: usize },
    Partial { j: usize },
}

/// A zero-energy frequency pair at probe frequency `xi` and slope `s`.
#[derive(Debug, Clone)]
pub struct FrequencyPair {
    pub s: f64,
    pub xi: [f64; 3],
    /// Unit vector orthogonal to `xi` carrying the imaginary parts.
    pub gamma_tilde: [f64; 3],
    /// Unit vector completing the orthogonal triple.
    pub gamma: [f64; 3],
    /// `g = sqrt(s^2 - |xi|^2)`.
    pub g: f64,
    /// `zeta_1 = -i s gt + g gamma + xi`, `zeta_2 = i s gt + g gamma - xi`.
    pub zeta: [[Complex64; 3]; 2],
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Build the frequency pair for probe frequency `xi != 0` and `s >= |xi|`.
///
/// The imaginary direction is `gt = (e_j xi_k - e_k xi_j)/|.|` in full mode
/// and `gt = (xi_j e_3 - xi_3 e_j)/|.|` in partial mode; `gamma` comes from
/// Gram-Schmidt of the coordinate axes against `span{gt, xi}` with the
/// deterministic tie-break order `e_1, e_2, e_3`.
pub fn frequency_pair(xi: [f64; 3], s: f64, mode: PairMode) -> Result<FrequencyPair> {
    let xn = norm3(xi);
    if xn == 0.0 {
        return Err(Error::InvalidParam("xi must be nonzero".into()));
    }
    if s < xn {
        return Err(Error::InvalidParam(format!(
            "need s >= |xi|: s = {s}, |xi| = {xn}"
        )));
    }
    let e = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let gt_raw = match mode {
        PairMode::Full { j, k } => {
            if j >= 3 || k >= 3 || j == k {
                return Err(Error::InvalidParam(format!(
                    "full-mode component ({j},{k}) out of range"
                )));
            }
            let mut v = [0.0; 3];
            for a in 0..3 {
                v[a] = e[j][a] * xi[k] - e[k][a] * xi[j];
            }
            v
        }
        PairMode::Partial { j } => {
            if j >= 2 {
                return Err(Error::InvalidParam(format!(
                    "partial-mode axis {j} must be horizontal (0 or 1)"
                )));
            }
            let mut v = [0.0; 3];
            for a in 0..3 {
                v[a] = xi[j] * e[2][a] - xi[2] * e[j][a];
            }
            v
        }
    };
    let gtn = norm3(gt_raw);
    if gtn <= 1e-12 * xn {
        return Err(Error::InvalidParam(
            "degenerate xi: both named components vanish".into(),
        ));
    }
    let gamma_tilde = [gt_raw[0] / gtn, gt_raw[1] / gtn, gt_raw[2] / gtn];
    let xh = [xi[0] / xn, xi[1] / xn, xi[2] / xn];
    let mut gamma = None;
    for cand in e {
        let mut v = cand;
        for basis in [gamma_tilde, xh] {
            let c = dot3(v, basis);
            for a in 0..3 {
                v[a] -= c * basis[a];
            }
        }
        let vn = norm3(v);
        if vn > 0.1 {
            gamma = Some([v[0] / vn, v[1] / vn, v[2] / vn]);
            break;
        }
    }
    let gamma = gamma.expect("some axis survives projection off a 2-plane");
    let g = (s * s - xn * xn).max(0.0).sqrt();
    let mut zeta = [[Complex64::new(0.0, 0.0); 3]; 2];
    for a in 0..3 {
        zeta[0][a] = Complex64::new(g * gamma[a] + xi[a], -s * gamma_tilde[a]);
        zeta[1][a] = Complex64::new(g * gamma[a] - xi[a], s * gamma_tilde[a]);
    }
    Ok(FrequencyPair {
        s,
        xi,
        gamma_tilde,
        gamma,
        g,
        zeta,
    })
}

impl FrequencyPair {
    /// `zeta_which / s`, the exact complex direction of branch `which`
    /// (1-based); its real and imaginary parts are orthonormal.
    pub fn mu(&self, which: usize) -> [Complex64; 3] {
        let z = self.zeta[which - 1];
        [z[0] / self.s, z[1] / self.s, z[2] / self.s]
    }

    /// The limiting direction `gamma + i gamma_tilde` shared by both
    /// branches as `s -> infinity`.
    pub fn mu_limit(&self) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for a in 0..3 {
            out[a] = Complex64::new(self.gamma[a], self.gamma_tilde[a]);
        }
        out
    }

    /// The transport plane frame of branch `which` centered at `center`.
    pub fn frame(&self, which: usize, center: [f64; 3]) -> Result<PlaneFrame> {
        let mu = self.mu(which);
        let alpha = [mu[0].re, mu[1].re, mu[2].re];
        let beta = [mu[0].im, mu[1].im, mu[2].im];
        PlaneFrame::new(alpha, beta, center)
    }

    /// The pair with `gamma_tilde` negated and everything else fixed. For a
    /// full-mode pair this is exactly the pair of the transposed component
    /// `(k, j)`; estimators combine the two orientations to isolate the
    /// antisymmetric part of the boundary data.
    pub fn flip_orientation(&self) -> FrequencyPair {
        let gt = [
            -self.gamma_tilde[0],
            -self.gamma_tilde[1],
            -self.gamma_tilde[2],
        ];
        let mut zeta = [[Complex64::new(0.0, 0.0); 3]; 2];
        for a in 0..3 {
            zeta[0][a] = Complex64::new(self.g * self.gamma[a] + self.xi[a], -self.s * gt[a]);
            zeta[1][a] = Complex64::new(self.g * self.gamma[a] - self.xi[a], self.s * gt[a]);
        }
        FrequencyPair {
            s: self.s,
            xi: self.xi,
            gamma_tilde: gt,
            gamma: self.gamma,
            g: self.g,
            zeta,
        }
    }
}

/// One admissible Fourier offset for a given `zeta`.
#[derive(Debug, Clone, Copy)]
pub struct OffsetChoice {
    pub offset: [f64; 3],
    /// Smallest `|sigma(k)|` over the offset lattice.
    pub min_symbol: f64,
}

/// `sigma(k) = -|k|^2 - 2 zeta . k`, the symbol of `A_zeta` on `e^(ik.x)`.
#[inline]
fn symbol(k: [f64; 3], zeta: &[Complex64; 3]) -> Complex64 {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    -Complex64::new(k2, 0.0) - 2.0 * (zeta[0] * k[0] + zeta[1] * k[1] + zeta[2] * k[2])
}

fn min_symbol_on_lattice(grid: GridSpec, zeta: &[Complex64; 3], offset: [f64; 3]) -> f64 {
    let n = grid.n;
    let mut best = f64::INFINITY;
    for mx in 0..n {
        let kx = grid.dual_freq(mx, offset[0]);
        for my in 0..n {
            let ky = grid.dual_freq(my, offset[1]);
            for mz in 0..n {
                let kz = grid.dual_freq(mz, offset[2]);
                best = best.min(symbol([kx, ky, kz], zeta).norm());
            }
        }
    }
    best
}

/// Default offset candidates: the half-offset first, then deterministic
/// variations for the automatic re-offset search.
pub fn default_offsets() -> Vec<[f64; 3]> {
    vec![
        [0.5, 0.5, 0.5],
        [0.25, 0.5, 0.5],
        [0.5, 0.25, 0.5],
        [0.5, 0.5, 0.25],
        [0.37, 0.41, 0.43],
        [0.62, 0.33, 0.47],
        [0.29, 0.57, 0.36],
        [0.44, 0.48, 0.61],
    ]
}

/// Pick the candidate offset whose lattice stays farthest from the
/// characteristic variety of `A_zeta`; collide when even the best minimum
/// symbol magnitude falls below the hard floor.
pub fn choose_offset(
    grid: GridSpec,
    zeta: &[Complex64; 3],
    candidates: &[[f64; 3]],
) -> Result<OffsetChoice> {
    let mut best: Option<OffsetChoice> = None;
    for &offset in candidates {
        let min_symbol = min_symbol_on_lattice(grid, zeta, offset);
        if best.as_ref().map_or(true, |b| min_symbol > b.min_symbol) {
            best = Some(OffsetChoice { offset, min_symbol });
        }
    }
    let best = best.ok_or_else(|| Error::InvalidParam("no offset candidates".into()))?;
    if best.min_symbol < SYMBOL_FLOOR {
        return Err(Error::OffsetCollision {
            min_symbol: best.min_symbol,
            tried: candidates.len(),
        });
    }
    Ok(best)
}

/// Apply `A_zeta^{-1}` to `g` through the offset-lattice symbol.
///
/// Errors with an offset collision when the symbol magnitude falls below the
/// floor anywhere on the lattice, instructing the caller to re-offset.
pub fn faddeev_apply_inverse(
    g: &ScalarField,
    zeta: &[Complex64; 3],
    offset: [f64; 3],
) -> Result<ScalarField> {
    let grid = g.grid;
    let fft = BoxFft::new(grid);
    let mut spec = fft.forward(g, offset);
    let mut min_abs = f64::INFINITY;
    spec.for_each_bin(|k, val| {
        let s = symbol(k, zeta);
        min_abs = min_abs.min(s.norm());
        *val /= s;
    });
    if min_abs < SYMBOL_FLOOR {
        return Err(Error::OffsetCollision {
            min_symbol: min_abs,
            tried: 1,
        });
    }
    Ok(fft.inverse(&spec))
}

/// Solver knobs for the CGO construction.
#[derive(Debug, Clone)]
pub struct CgoConfig {
    /// Mollification exponent: `W# = W * chi_rho`, `rho = |zeta|^(-sigma0)`.
    pub sigma0: f64,
    /// Cutoff exponent; the theory requires `sigma0 + theta < 1/(4n+6)`.
    pub theta: f64,
    /// Weight exponent `delta` in `(-1, 0)` for the reported norms.
    pub delta: f64,
    /// Slopes with `|zeta| < h0_inv` still run but are tagged.
    pub h0_inv: f64,
    pub gmres: GmresConfig,
    pub cauchy: CauchyConfig,
    pub offsets: Vec<[f64; 3]>,
}

impl Default for CgoConfig {
    fn default() -> Self {
        CgoConfig {
            sigma0: 0.04,
            theta: 0.01,
            delta: -0.5,
            h0_inv: 15.0,
            gmres: GmresConfig::default(),
            cauchy: CauchyConfig::default(),
            offsets: default_offsets(),
        }
    }
}

impl CgoConfig {
    /// The theorem's parameter constraint `sigma0 + theta < 1/(4n+6)` for
    /// n = 3; aggressive configs violate it deliberately to make the
    /// mollification scale visible at desk-scale slopes.
    pub fn theory_admissible(&self) -> bool {
        self.sigma0 > 0.0 && self.theta > 0.0 && self.sigma0 + self.theta < 1.0 / 18.0
    }

    /// An aggressive preset trading the theorem's constants for visible
    /// mollification decay at desk-scale `s`.
    pub fn aggressive() -> Self {
        CgoConfig {
            sigma0: 0.45,
            ..CgoConfig::default()
        }
    }
}

/// Convergence and quality diagnostics of one remainder solve.
#[derive(Debug, Clone)]
pub struct RemainderDiagnostics {
    pub offset: [f64; 3],
    pub min_symbol: f64,
    /// Krylov iterations and the preconditioned relative residual.
    pub iterations: usize,
    pub final_residual: f64,
    /// `|L_zeta r - f| / |f|` with every derivative spectral.
    pub solve_residual: f64,
    /// `|r|_{L2_delta}`.
    pub r_norm: f64,
    /// `|f|_{L2_(delta+1)}`.
    pub forcing_norm: f64,
}

/// Spectral workspace for one `(grid, zeta, offset)` triple.
struct ConjugatedOps<'a> {
    fft: &'a BoxFft,
    offset: [f64; 3],
    zeta: [Complex64; 3],
    /// `W` gathered on the unique nodes.
    w: [Vec<f64>; 3],
    /// `G = W^2 - i div W + q` gathered on the unique nodes.
    g_pot: Vec<Complex64>,
}

impl<'a> ConjugatedOps<'a> {
    fn new(
        fft: &'a BoxFft,
        pair: &PotentialPair,
        zeta: [Complex64; 3],
        offset: [f64; 3],
    ) -> Self {
        let grid = fft.grid;
        let n = grid.n;
        let mut w = [
            Vec::with_capacity(n * n * n),
            Vec::with_capacity(n * n * n),
            Vec::with_capacity(n * n * n),
        ];
        let mut g_pot = Vec::with_capacity(n * n * n);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let x = grid.node_pos(ix, iy, iz);
                    let wv = pair.w_at(x);
                    for a in 0..3 {
                        w[a].push(wv[a]);
                    }
                    let w2 = wv[0] * wv[0] + wv[1] * wv[1] + wv[2] * wv[2];
                    g_pot.push(Complex64::new(w2 + pair.q_at(x), -pair.div_w_at(x)));
                }
            }
        }
        ConjugatedOps {
            fft,
            offset,
            zeta,
            w,
            g_pot,
        }
    }

    /// Spectral gradient of gathered values on the offset lattice.
    fn spectral_grad(&self, v: &[Complex64]) -> [Vec<Complex64>; 3] {
        let field = self.fft.scatter(v);
        let spec = self.fft.forward(&field, self.offset);
        let mut out = [Vec::new(), Vec::new(), Vec::new()];
        for axis in 0..3 {
            let mut s = spec.clone();
            s.for_each_bin(|k, val| {
                *val *= Complex64::new(0.0, k[axis]);
            });
            out[axis] = self.fft.gather(&self.fft.inverse(&s));
        }
        out
    }

    /// `K v = 2 W . D_zeta v + G v` on gathered values.
    fn apply_k(&self, v: &[Complex64]) -> Vec<Complex64> {
        let grad = self.spectral_grad(v);
        let mut out = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            let mut acc = self.g_pot[i] * v[i];
            for a in 0..3 {
                let dz = Complex64::new(0.0, -1.0) * grad[a][i] + self.zeta[a] * v[i];
                acc += 2.0 * self.w[a][i] * dz;
            }
            out.push(acc);
        }
        out
    }

    /// Multiply the offset spectrum by `op(sigma(k))` nodewise.
    fn symbol_multiply(&self, v: &[Complex64], invert: bool) -> Vec<Complex64> {
        let field = self.fft.scatter(v);
        let mut spec = self.fft.forward(&field, self.offset);
        let zeta = self.zeta;
        spec.for_each_bin(|k, val| {
            let s = symbol(k, &zeta);
            if invert {
                *val /= s;
            } else {
                *val *= s;
            }
        });
        self.fft.gather(&self.fft.inverse(&spec))
    }

    /// `L_zeta v = -A_zeta v + K v` on gathered values.
    fn apply_l(&self, v: &[Complex64]) -> Vec<Complex64> {
        let av = self.symbol_multiply(v, false);
        let kv = self.apply_k(v);
        av.iter().zip(kv.iter()).map(|(a, k)| k - a).collect()
    }
}

fn l2_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Solve the conjugated remainder equation `L_zeta r = f` for branch
/// `which` of the frequency pair, through the fixed point
/// `(I - A^{-1} K) r = -A^{-1} f` on the automatically chosen offset.
pub fn remainder_solve(
    pair: &PotentialPair,
    grid: GridSpec,
    fp: &FrequencyPair,
    which: usize,
    forcing: &ScalarField,
    cfg: &CgoConfig,
) -> Result<(ScalarField, RemainderDiagnostics)> {
    if which != 1 && which != 2 {
        return Err(Error::InvalidParam(format!("branch {which} not in {{1,2}}")));
    }
    let zeta = fp.zeta[which - 1];
    let choice = choose_offset(grid, &zeta, &cfg.offsets)?;
    let fft = BoxFft::new(grid);
    let ops = ConjugatedOps::new(&fft, pair, zeta, choice.offset);

    let f_nodes = fft.gather(forcing);
    // L r = f with L = -A + K becomes (I - A^{-1} K) r = -A^{-1} f.
    let rhs: Vec<Complex64> = ops
        .symbol_multiply(&f_nodes, true)
        .iter()
        .map(|z| -z)
        .collect();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let kv = ops.apply_k(v);
        let akv = ops.symbol_multiply(&kv, true);
        v.iter().zip(akv.iter()).map(|(x, y)| x - y).collect()
    };
    let (r_nodes, stats) = gmres(apply, &rhs, None, &cfg.gmres);
    if !stats.converged {
        return Err(Error::SolverFailure(format!(
            "CGO remainder GMRES stalled at residual {:.3e} after {} iterations",
            stats.residual, stats.iterations
        )));
    }

    let f_norm = l2_of(&f_nodes);
    let solve_residual = if f_norm == 0.0 {
        0.0
    } else {
        l2_diff(&ops.apply_l(&r_nodes), &f_nodes) / f_norm
    };
    let remainder = fft.scatter(&r_nodes);
    remainder.ensure_finite("cgo remainder")?;
    let diag = RemainderDiagnostics {
        offset: choice.offset,
        min_symbol: choice.min_symbol,
        iterations: stats.iterations,
        final_residual: stats.residual,
        solve_residual,
        r_norm: crate::norms::l2_delta(&remainder, cfg.delta),
        forcing_norm: crate::norms::l2_delta(forcing, cfg.delta + 1.0),
    };
    Ok((remainder, diag))
}

fn l2_of(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One constructed CGO solution `u = exp(i zeta . x)(a + r)`.
pub struct CgoSolution {
    pub grid: GridSpec,
    pub fp: FrequencyPair,
    /// Branch index, 1 or 2.
    pub which: usize,
    pub zeta: [Complex64; 3],
    /// Mollification radius actually applied to the transport potential.
    pub rho: f64,
    pub phase: PhaseData,
    /// Amplitude `a = exp(i phi)`.
    pub amplitude: ScalarField,
    /// Remainder `r` in the offset-lattice representation.
    pub remainder: ScalarField,
    pub diagnostics: RemainderDiagnostics,
    pub stats: SolveStats,
    /// True when `|zeta| < h0_inv`: the uniform bounds are not claimed here.
    pub below_threshold: bool,
    /// False when `(sigma0, theta)` sit outside the theorem's constraint.
    pub theory_admissible: bool,
}

impl CgoSolution {
    /// `exp(i zeta . x) (a + r)` evaluated at a node.
    pub fn value_at(&self, ix: usize, iy: usize, iz: usize) -> Complex64 {
        let g = self.grid;
        let x = g.node_pos(ix, iy, iz);
        let iz_dot = Complex64::i()
            * (self.zeta[0] * x[0] + self.zeta[1] * x[1] + self.zeta[2] * x[2]);
        let idx = g.node_index(ix, iy, iz);
        iz_dot.exp() * (self.amplitude.data[idx] + self.remainder.data[idx])
    }

    /// The slow factor `a + r` as a field.
    pub fn slow_part(&self) -> ScalarField {
        let mut out = self.amplitude.clone();
        out.axpy(Complex64::new(1.0, 0.0), &self.remainder);
        out
    }
}

/// Construct the CGO solution for branch `which` (1 or 2) of a frequency
/// pair: transport phase for the mollified potential, forcing bracket with
/// transported phase derivatives and analytic potential derivatives, then
/// the remainder solve.
pub fn build_cgo(
    pair: &PotentialPair,
    grid: GridSpec,
    fp: &FrequencyPair,
    which: usize,
    cfg: &CgoConfig,
) -> Result<CgoSolution> {
    if which != 1 && which != 2 {
        return Err(Error::InvalidParam(format!("branch {which} not in {{1,2}}")));
    }
    let zeta = fp.zeta[which - 1];
    let zeta_abs = std::f64::consts::SQRT_2 * fp.s;
    let frame = fp.frame(which, grid.omega_center())?;

    // Transport phase for the mollified potential at the slope-tied scale.
    let rho = zeta_abs.powf(-cfg.sigma0);
    let w = pair.w_field(grid);
    let split = mollify_split(&w, rho);
    let phase = phase_sharp(&split.smooth, &frame, &cfg.cauchy)?;

    // Amplitude and the forcing bracket
    //   f = e^{i phi} [ i lap phi - (grad phi)^2 - 2 zeta . grad phi
    //                   - 2 W . grad phi - 2 zeta . W - W^2 + i div W - q ],
    // every phi-derivative transported, every W-derivative analytic. The
    // order-s transport cancellation happens numerically inside the bracket,
    // so no accuracy is lost to it.
    let mut amplitude = ScalarField::zeros(grid);
    let mut f_field = ScalarField::zeros(grid);
    let m = grid.nodes_per_axis();
    for ix in 0..m {
        for iy in 0..m {
            for iz in 0..m {
                let idx = grid.node_index(ix, iy, iz);
                let x = grid.node_pos(ix, iy, iz);
                let phi = phase.phi.data[idx];
                let gphi = [
                    phase.grad.comps[0][idx],
                    phase.grad.comps[1][idx],
                    phase.grad.comps[2][idx],
                ];
                let wv = pair.w_at(x);
                let w2 = wv[0] * wv[0] + wv[1] * wv[1] + wv[2] * wv[2];
                let a = (Complex64::i() * phi).exp();
                let mut bracket = Complex64::i() * phase.lap.data[idx]
                    - (gphi[0] * gphi[0] + gphi[1] * gphi[1] + gphi[2] * gphi[2])
                    - Complex64::new(w2 + pair.q_at(x), -pair.div_w_at(x));
                for axis in 0..3 {
                    bracket -= 2.0 * zeta[axis] * (gphi[axis] + wv[axis]);
                    bracket -= 2.0 * wv[axis] * gphi[axis];
                }
                amplitude.data[idx] = a;
                f_field.data[idx] = a * bracket;
            }
        }
    }

    let (remainder, diagnostics) = remainder_solve(pair, grid, fp, which, &f_field, cfg)?;
    let stats = SolveStats {
        iterations: diagnostics.iterations,
        residual: diagnostics.final_residual,
        converged: true,
    };
    Ok(CgoSolution {
        grid,
        fp: fp.clone(),
        which,
        zeta,
        rho: split.rho,
        phase,
        amplitude,
        remainder,
        diagnostics,
        stats,
        below_threshold: zeta_abs < cfg.h0_inv,
        theory_admissible: cfg.theory_admissible(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{sample_admissible_pair, PairParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys.iter()) {
            let (lx, ly) = (x.ln(), y.ln());
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn hand_checked_frequency_geometry() {
        // xi along e1 with component (1,2): gt = (e1 xi_2 - e2 xi_1)/|.|
        // = -e2, and the Gram-Schmidt fallback leaves gamma = e3.
        let fp = frequency_pair([1.0, 0.0, 0.0], 5.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        assert!((fp.gamma_tilde[1] + 1.0).abs() < 1e-12);
        assert!((fp.gamma[2] - 1.0).abs() < 1e-12);
        let g = (25.0f64 - 1.0).sqrt();
        let want0 = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 5.0),
            Complex64::new(g, 0.0),
        ];
        for a in 0..3 {
            assert!((fp.zeta[0][a] - want0[a]).norm() < 1e-12);
        }
        // s = |xi| degenerates to g = 0: zeta_1 = -i s gt + xi.
        let fp = frequency_pair([1.0, 0.0, 0.0], 1.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        assert!((fp.zeta[0][0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((fp.zeta[0][1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!(fp.zeta[0][2].norm() < 1e-12);
    }

    fn check_pair_invariants(fp: &FrequencyPair) {
        let s = fp.s;
        for l in 0..2 {
            let z = fp.zeta[l];
            let zz = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            assert!(zz.norm() < 1e-12 * s * s, "zeta.zeta = {zz}");
            let n2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            assert!((n2.sqrt() - std::f64::consts::SQRT_2 * s).abs() < 1e-12 * s);
        }
        for a in 0..3 {
            // zeta_1 - conj(zeta_2) = 2 xi and zeta_1 + conj(zeta_2)
            // = 2 g gamma - 2 i s gamma_tilde.
            let diff = fp.zeta[0][a] - fp.zeta[1][a].conj();
            assert!((diff - Complex64::new(2.0 * fp.xi[a], 0.0)).norm() < 1e-12 * s.max(1.0));
            let sum = fp.zeta[0][a] + fp.zeta[1][a].conj();
            let want = Complex64::new(2.0 * fp.g * fp.gamma[a], -2.0 * s * fp.gamma_tilde[a]);
            assert!((sum - want).norm() < 1e-12 * s.max(1.0));
        }
        assert!(dot3(fp.gamma_tilde, fp.xi).abs() < 1e-12 * norm3(fp.xi).max(1.0));
        assert!(dot3(fp.gamma_tilde, fp.gamma).abs() < 1e-12);
    }

    #[test]
    fn random_frequency_pairs_satisfy_the_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let mut tested = 0;
        while tested < 100 {
            let xi = [
                rng.gen::<f64>() * 8.0 - 4.0,
                rng.gen::<f64>() * 8.0 - 4.0,
                rng.gen::<f64>() * 8.0 - 4.0,
            ];
            if norm3(xi) < 0.1 {
                continue;
            }
            tested += 1;
            let s = norm3(xi) + rng.gen::<f64>() * 40.0;
            let j = rng.gen_range(0..2usize);
            let k = rng.gen_range(j + 1..3usize);
            for mode in [PairMode::Full { j, k }, PairMode::Partial { j }] {
                let fp = frequency_pair(xi, s, mode).unwrap();
                check_pair_invariants(&fp);
                if let PairMode::Partial { j } = mode {
                    // gt lives in the vertical plane spanned by e_j and e_3.
                    let other = 1 - j;
                    assert!(fp.gamma_tilde[other].abs() < 1e-12);
                }
                fp.frame(1, [0.5; 3]).unwrap();
                fp.frame(2, [0.5; 3]).unwrap();
            }
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        // Named components both zero.
        assert!(frequency_pair([0.0, 0.0, 1.0], 4.0, PairMode::Full { j: 0, k: 1 }).is_err());
        // s below |xi|.
        assert!(frequency_pair([3.0, 0.0, 0.0], 2.0, PairMode::Full { j: 0, k: 1 }).is_err());
        // Partial axis must be horizontal.
        assert!(frequency_pair([1.0, 0.0, 0.0], 4.0, PairMode::Partial { j: 2 }).is_err());
    }

    #[test]
    fn offset_search_avoids_characteristics_and_flags_the_origin() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let fp = frequency_pair([2.0, 0.5, -1.0], 9.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        let ok = choose_offset(g, &fp.zeta[0], &default_offsets()).unwrap();
        assert!(ok.min_symbol > 1.0, "min symbol {}", ok.min_symbol);
        // The unshifted lattice contains k = 0 where sigma vanishes.
        match choose_offset(g, &fp.zeta[0], &[[0.0, 0.0, 0.0]]) {
            Err(Error::OffsetCollision { min_symbol, .. }) => {
                assert!(min_symbol < SYMBOL_FLOOR);
            }
            other => panic!("expected offset collision, got {other:?}"),
        }
    }

    #[test]
    fn faddeev_inverse_is_exact_on_offset_lattice_modes() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let fp = frequency_pair([1.0, -0.5, 0.25], 7.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        let zeta = fp.zeta[0];
        let offset = [0.5, 0.5, 0.5];
        let k = [
            g.dual_freq(2, offset[0]),
            g.dual_freq(9, offset[1]),
            g.dual_freq(5, offset[2]),
        ];
        let mode = ScalarField::from_fn(g, |x| {
            Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
        });
        // Single mode: the inverse is division by the closed-form symbol.
        // Offset modes are anti-periodic across the box, so compare on the
        // unique nodes only.
        let fft = BoxFft::new(g);
        let inv = faddeev_apply_inverse(&mode, &zeta, offset).unwrap();
        let sig = symbol(k, &zeta);
        let mut err: f64 = 0.0;
        for (got, want) in fft.gather(&inv).iter().zip(fft.gather(&mode).iter()) {
            err = err.max((got - want / sig).norm());
        }
        assert!(err < 1e-12, "single-mode inverse error {err}");
        // Round-trip: re-applying A_zeta spectrally reproduces the input.
        let pair = PotentialPair::default();
        let ops = ConjugatedOps::new(&fft, &pair, zeta, offset);
        let back = ops.symbol_multiply(&fft.gather(&inv), false);
        let orig = fft.gather(&mode);
        let rt = l2_diff(&back, &orig) / l2_of(&orig);
        assert!(rt < 1e-10, "roundtrip error {rt}");
        // Zero input maps to zero.
        let zero = ScalarField::zeros(g);
        let z = faddeev_apply_inverse(&zero, &zeta, offset).unwrap();
        assert!(z.max_abs() == 0.0);
    }

    #[test]
    fn conjugated_operator_matches_the_analytic_identity() {
        // For u = e^{i (zeta + k) . x} the physical operator gives
        //   e^{-i zeta.x} H u = [ (k+zeta).(k+zeta) + 2 W(x).(k+zeta)
        //                         + G(x) ] e^{i k.x},
        // an exact pointwise oracle for L_zeta on one offset mode.
        let g = GridSpec::with_default_margin(12).unwrap();
        let pair = sample_admissible_pair(53, &PairParams::default());
        let fp = frequency_pair([1.0, 2.0, 0.0], 6.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        let zeta = fp.zeta[0];
        let offset = [0.5, 0.5, 0.5];
        let k = [
            g.dual_freq(3, offset[0]),
            g.dual_freq(10, offset[1]),
            g.dual_freq(6, offset[2]),
        ];
        let mode = ScalarField::from_fn(g, |x| {
            Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
        });
        let fft = BoxFft::new(g);
        let ops = ConjugatedOps::new(&fft, &pair, zeta, offset);
        let got = ops.apply_l(&fft.gather(&mode));
        let kz = [
            Complex64::new(k[0], 0.0) + zeta[0],
            Complex64::new(k[1], 0.0) + zeta[1],
            Complex64::new(k[2], 0.0) + zeta[2],
        ];
        let kz2 = kz[0] * kz[0] + kz[1] * kz[1] + kz[2] * kz[2];
        let n = g.n;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut i = 0;
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let x = g.node_pos(ix, iy, iz);
                    let wv = pair.w_at(x);
                    let w2 = wv[0] * wv[0] + wv[1] * wv[1] + wv[2] * wv[2];
                    let mut coeff = kz2 + Complex64::new(w2 + pair.q_at(x), -pair.div_w_at(x));
                    for a in 0..3 {
                        coeff += 2.0 * wv[a] * kz[a];
                    }
                    let phase = Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
                    let want = coeff * phase;
                    num += (got[i] - want).norm_sqr();
                    den += want.norm_sqr();
                    i += 1;
                }
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-10, "conjugation identity residual {rel}");
    }

    #[test]
    fn remainder_solve_handles_the_trivial_cases() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let pair = PotentialPair::default();
        let fp = frequency_pair([1.0, 0.5, 0.0], 8.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        let cfg = CgoConfig::default();
        // f = 0 -> r = 0.
        let zero = ScalarField::zeros(g);
        let (r, diag) = remainder_solve(&pair, g, &fp, 1, &zero, &cfg).unwrap();
        assert!(r.max_abs() == 0.0 && diag.iterations == 0);
        // W = 0, q = 0 -> r = -A^{-1} f in a single Krylov step.
        let f = ScalarField::from_real_fn(g, |x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.5).powi(2);
            (-12.0 * r2).exp()
        });
        let (r, diag) = remainder_solve(&pair, g, &fp, 1, &f, &cfg).unwrap();
        assert!(diag.iterations <= 2, "free solve took {} iterations", diag.iterations);
        let direct = faddeev_apply_inverse(&f, &fp.zeta[0], diag.offset).unwrap();
        let mut err: f64 = 0.0;
        for (got, want) in r.data.iter().zip(direct.data.iter()) {
            err = err.max((got + want).norm());
        }
        assert!(err < 1e-9 * direct.max_abs(), "free remainder error {err}");
    }

    #[test]
    fn remainder_norm_bound_decays_like_the_inverse_slope() {
        // |r|_{L2_delta} / |f|_{L2_(delta+1)} <= C/s for a fixed forcing:
        // the log-log slope across a dyadic sweep should be close to -1.
        let g = GridSpec::with_default_margin(12).unwrap();
        let pair = PotentialPair::default();
        let cfg = CgoConfig::default();
        let f = ScalarField::from_real_fn(g, |x| {
            let r2 = (x[0] - 0.45).powi(2) + (x[1] - 0.55).powi(2) + (x[2] - 0.5).powi(2);
            (-14.0 * r2).exp()
        });
        let slopes = [20.0, 40.0, 80.0];
        let mut ratios = Vec::new();
        for &s in &slopes {
            let fp = frequency_pair([1.0, 0.5, 0.25], s, PairMode::Full { j: 0, k: 1 }).unwrap();
            let (_, diag) = remainder_solve(&pair, g, &fp, 1, &f, &cfg).unwrap();
            ratios.push(diag.r_norm / diag.forcing_norm);
        }
        let slope = log_slope(&slopes, &ratios);
        assert!(slope <= -0.8, "norm-bound slope {slope}, ratios {ratios:?}");
    }

    #[test]
    fn krylov_restart_does_not_change_the_remainder() {
        let g = GridSpec::with_default_margin(12).unwrap();
        let pair = sample_admissible_pair(59, &PairParams::default());
        let fp = frequency_pair([1.0, -1.0, 0.5], 10.0, PairMode::Full { j: 0, k: 1 }).unwrap();
        let f = ScalarField::from_real_fn(g, |x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.45).powi(2);
            (-10.0 * r2).exp()
        });
        let mut cfg_a = CgoConfig::default();
        cfg_a.gmres.restart = 60;
        let mut cfg_b = CgoConfig::default();
        cfg_b.gmres.restart = 13;
        let (ra, _) = remainder_solve(&pair, g, &fp, 2, &f, &cfg_a).unwrap();
        let (rb, _) = remainder_solve(&pair, g, &fp, 2, &f, &cfg_b).unwrap();
        let scale = crate::norms::l2(&ra).max(1e-300);
        let mut diff = ra.clone();
        diff.axpy(Complex64::new(-1.0, 0.0), &rb);
        assert!(
            crate::norms::l2(&diff) / scale < 1e-6,
            "restart sensitivity {}",
            crate::norms::l2(&diff) / scale
        );
    }

    #[test]
    fn cgo_solves_the_conjugated_equation() {
        let g = GridSpec::with_default_margin(16).unwrap();
        let pair = sample_admissible_pair(37, &PairParams::default());
        let fp =
            frequency_pair([std::f64::consts::PI, 0.0, 0.0], 6.0, PairMode::Full { j: 0, k: 1 })
                .unwrap();
        let sol = build_cgo(&pair, g, &fp, 1, &CgoConfig::default()).unwrap();
        assert!(sol.stats.converged);
        assert!(
            sol.diagnostics.solve_residual < 1e-6,
            "conjugated residual {}",
            sol.diagnostics.solve_residual
        );
        assert!(sol.below_threshold, "s = 6 sits below the h0 threshold");
        assert!(sol.theory_admissible);
        sol.remainder.ensure_finite("cgo remainder").unwrap();
        // Zero potentials give amplitude 1 and no remainder.
        let free = build_cgo(&PotentialPair::default(), g, &fp, 1, &CgoConfig::default()).unwrap();
        let mut amp_err: f64 = 0.0;
        for v in &free.amplitude.data {
            amp_err = amp_err.max((v - Complex64::new(1.0, 0.0)).norm());
        }
        assert!(amp_err < 1e-12, "free amplitude error {amp_err}");
        assert!(free.remainder.max_abs() < 1e-12);
    }

    #[test]
    fn cgo_remainder_decays_with_s() {
        // With the aggressive mollification exponent the rough part of W
        // shrinks as the slope grows, and with it the remainder norm; the
        // theory only promises a small negative power, so the thresholds
        // are monotonicity plus a conservative slope.
        let g = GridSpec::with_default_margin(16).unwrap();
        let pair = sample_admissible_pair(41, &PairParams::default());
        let cfg = CgoConfig::aggressive();
        assert!(!cfg.theory_admissible());
        let slopes = [20.0, 40.0, 80.0];
        let mut norms = Vec::new();
        for &s in &slopes {
            let fp = frequency_pair([1.5, 0.5, 0.0], s, PairMode::Full { j: 0, k: 1 }).unwrap();
            let sol = build_cgo(&pair, g, &fp, 1, &cfg).unwrap();
            assert!(!sol.below_threshold);
            norms.push(sol.diagnostics.r_norm);
        }
        assert!(
            norms[1] <= norms[0] && norms[2] <= norms[1],
            "remainder norms not monotone: {norms:?}"
        );
        let slope = log_slope(&slopes, &norms);
        assert!(slope <= -0.2, "decay slope {slope}, norms {norms:?}");
    }
}
