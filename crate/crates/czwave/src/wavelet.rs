//! Mother wavelets, moment-normalized analyzing families, decay/smoothness
//! norms, and finite dictionaries of wavelet-class representatives.

use crate::error::{CzError, Result};
use crate::fft::HatTable;
use crate::grid::{
    derivative, laplacian, spectral_multiplier, AffinePoint, Grid, SampledFunction,
    SampledFunction2D,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default construction grid for 1-dimensional analyzing functions.
pub fn construction_grid_1d() -> Grid {
    Grid::new(1, 1.0, 4096).expect("static grid")
}

/// Default construction grid for 2-dimensional (radial) analyzing functions.
pub fn construction_grid_2d() -> Grid {
    Grid::new(2, 1.0, 256).expect("static grid")
}

/// Analysis grid on which rescaled-to-unit-scale functions are measured.
fn analysis_grid(d: usize) -> Grid {
    match d {
        1 => Grid::new(1, 16.0, 8192).expect("static grid"),
        _ => Grid::new(2, 8.0, 512).expect("static grid"),
    }
}

/// The smooth compactly supported profile `exp(1/(|x|^2 - 1/4))` on
/// `B(0, 1/2)`, sampled on `grid` (radial in dimension 2).
pub fn standard_bump(grid: Grid) -> Result<SampledFunction> {
    SampledFunction::from_fn(grid, "standard bump", |x, y| {
        let r2 = x * x + y * y;
        if r2 < 0.25 {
            (1.0 / (r2 - 0.25)).exp()
        } else {
            0.0
        }
    })
}

/// A compactly supported admissible wavelet with `2D` vanishing moments,
/// normalized so the admissibility integral equals 1.
#[derive(Debug, Clone)]
pub struct MotherWavelet {
    /// samples on the construction grid
    pub base: SampledFunction,
    /// cancellation order `D`
    pub cancellation_order: u32,
    /// admissibility integral after normalization (= 1 up to quadrature)
    pub admissibility: f64,
    /// largest moment magnitude through order `2D` (diagnostic)
    pub max_moment: f64,
    hat: HatTable,
}

fn hat_pad(d: usize) -> usize {
    if d == 1 {
        16
    } else {
        4
    }
}

impl MotherWavelet {
    pub fn dim(&self) -> usize {
        self.base.grid.dim()
    }

    pub fn hat(&self) -> &HatTable {
        &self.hat
    }

    /// Evaluate the transform of the wavelet at a frequency vector.
    pub fn hat_at(&self, xi: &[f64; 2]) -> C64 {
        self.hat.eval(xi)
    }

    /// Render the translate-dilate `phi_z = t^{-d} phi((x-w)/t)` on `target`
    /// as a band-limited projection (no aliasing even at small scales).
    pub fn sy(&self, z: AffinePoint, target: &Grid) -> Result<SampledFunction> {
        if z.t < 2.0 * target.spacing() {
            return Err(CzError::ScaleBelowResolution {
                t: z.t,
                min: 2.0 * target.spacing(),
            });
        }
        self.hat.render(target, &z.w, z.t)
    }
}

// --- exact differentiation of the canonical profile -----------------------
//
// With s = |x|^2 and u = s - 1/4, the canonical bump is b = e^{1/u} on u < 0.
// Every iterated Laplacian has the closed form P(s) u^{-M} e^{1/u} with P a
// polynomial, obtained from the recurrences
//   d/ds [P u^{-M} e^{1/u}] = (P' u^2 - M P u - P) u^{-(M+2)} e^{1/u}
//   Delta F(s) = 4 s F_ss + 2 d F_s.
// Spectral differentiation is hopeless here: the transform of b decays like
// exp(-c sqrt(xi)) while an order-8 derivative multiplies the FFT noise
// floor by xi^8, which swamps the signal.  The polynomial recurrence is
// exact and numerically stable.

/// ascending-coefficient polynomial product
pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn poly_axpy(acc: &mut Vec<f64>, c: f64, p: &[f64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (slot, &v) in acc.iter_mut().zip(p) {
        *slot += c * v;
    }
}

pub(crate) fn poly_deriv(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

pub(crate) fn poly_eval(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// `d/ds` on the representation `(P, M)`, raising the pole order by 2.
fn profile_dds(p: &[f64], m: u32) -> (Vec<f64>, u32) {
    let u = [-0.25, 1.0]; // u = s - 1/4
    let u2 = poly_mul(&u, &u);
    let mut out = poly_mul(&poly_deriv(p), &u2);
    poly_axpy(&mut out, -(m as f64), &poly_mul(p, &u));
    poly_axpy(&mut out, -1.0, p);
    (out, m + 2)
}

/// `Delta^k` of the canonical bump in dimension `d`, as `(P, M)`.
fn bump_laplacian_profile(d: usize, k: u32) -> (Vec<f64>, u32) {
    let mut p = vec![1.0];
    let mut m = 0u32;
    for _ in 0..k {
        let (p1, m1) = profile_dds(&p, m);
        let (p2, _m2) = profile_dds(&p1, m1);
        // Delta = 4 s F_ss + 2 d F_s; lift F_s to pole order m + 4 via u^2
        let u2 = poly_mul(&[-0.25, 1.0], &[-0.25, 1.0]);
        let mut out = poly_mul(&[0.0, 4.0], &p2);
        poly_axpy(&mut out, 2.0 * d as f64, &poly_mul(&p1, &u2));
        p = out;
        m += 4;
    }
    (p, m)
}

/// Evaluate `P(s) u^{-M} e^{1/u}` at squared radius `s` (0 outside support).
fn profile_value(p: &[f64], m: u32, s: f64) -> f64 {
    let u = s - 0.25;
    if u >= -1e-14 {
        return 0.0;
    }
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    poly_eval(p, s) * sign * (1.0 / u - m as f64 * (-u).ln()).exp()
}

/// Does `bump` match the canonical profile `exp(1/(|x|^2 - 1/4))` on its
/// grid (up to roundoff)?
fn is_canonical_bump(bump: &SampledFunction) -> bool {
    let g = bump.grid;
    bump.values.iter().enumerate().all(|(i, v)| {
        let x = g.node(i);
        let want = profile_value(&[1.0], 0, x[0] * x[0] + x[1] * x[1]);
        (v.re - want).abs() <= 1e-12 * (1.0 + want.abs()) && v.im == 0.0
    })
}

/// Build a mother wavelet as the iterated Laplacian of a smooth bump
/// supported in `B(0, 1/2)` (one Laplacian when `d_cancel = 0`, else `4*D`),
/// normalized to unit admissibility.  For the canonical profile the
/// derivatives are computed in closed form; other bumps fall back to
/// spectral differentiation (adequate only at low orders).
pub fn make_mother_wavelet(d_cancel: u32, bump: &SampledFunction) -> Result<MotherWavelet> {
    // support must stay inside B(0, 1/2)
    let r = bump.support_radius(1e-10);
    if r > 0.5 {
        return Err(CzError::SupportEscapes(format!(
            "bump support radius {r:.4} exceeds 1/2"
        )));
    }
    let order = 4u32.saturating_mul(d_cancel).max(1);
    let raw = if is_canonical_bump(bump) {
        let (p, m) = bump_laplacian_profile(bump.grid.dim(), order);
        SampledFunction::from_fn(bump.grid, "bump laplacian", move |x, y| {
            profile_value(&p, m, x * x + y * y)
        })?
    } else {
        laplacian(bump, order)?
    };
    let a = admissibility_constant(&raw)?;
    if a < 1e-14 {
        return Err(CzError::Degenerate(format!(
            "admissibility integral {a:.3e} of the differentiated bump is negligible"
        )));
    }
    let base = raw.scaled(C64::new(1.0 / a.sqrt(), 0.0));
    let hat = HatTable::new(&base, hat_pad(base.grid.dim()))?;
    let admissibility = admissibility_constant(&base)?;
    let mut max_moment = 0.0f64;
    let d = base.grid.dim();
    for total in 0..=(2 * d_cancel) {
        if d == 1 {
            max_moment = max_moment.max(base.moment([total, 0]).norm());
        } else {
            for a1 in 0..=total {
                max_moment = max_moment.max(base.moment([a1, total - a1]).norm());
            }
        }
    }
    Ok(MotherWavelet {
        base,
        cancellation_order: d_cancel,
        admissibility,
        max_moment,
        hat,
    })
}

/// Quadrature of the admissibility integral
/// `int_0^inf |hat(phi)(rho xi)|^2 dxi/xi`, averaged over directions
/// (`rho = +-1` in dimension 1, 8 equispaced directions in dimension 2).
pub fn admissibility_constant(phi: &SampledFunction) -> Result<f64> {
    let mean = phi.integrate().norm();
    let scale = phi.lp_norm(1.0).max(1e-300);
    if mean > 1e-8 * scale {
        return Err(CzError::Constraint(format!(
            "admissibility needs a mean-zero input (|hat(0)| = {mean:.3e}); the integrand diverges at 0"
        )));
    }
    let table = HatTable::new(phi, hat_pad(phi.grid.dim()))?;
    let xi_max = table.max_freq() * 0.98;
    let xi_min = 1e-3f64;
    let directions: Vec<[f64; 2]> = match phi.grid.dim() {
        1 => vec![[1.0, 0.0], [-1.0, 0.0]],
        _ => (0..8)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / 4.0;
                [a.cos(), a.sin()]
            })
            .collect(),
    };
    // composite Simpson in log(xi)
    let m = 16384usize; // even
    let la = xi_min.ln();
    let lb = xi_max.ln();
    let dl = (lb - la) / m as f64;
    let mut acc = 0.0;
    for i in 0..=m {
        let xi = (la + i as f64 * dl).exp();
        let mut g = 0.0;
        for dir in &directions {
            g += table.eval(&[xi * dir[0], xi * dir[1]]).norm_sqr();
        }
        g /= directions.len() as f64;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * g;
    }
    Ok(acc * dl / 3.0)
}

/// The translate-dilate action `sy(z, f) = t^{-d} f((x - w)/t)` on `f`'s own
/// grid, computed band-limited; preserves `integrate` to high accuracy.
pub fn sy(z: AffinePoint, f: &SampledFunction) -> Result<SampledFunction> {
    let g = f.grid;
    if z.t < 2.0 * g.spacing() {
        return Err(CzError::ScaleBelowResolution {
            t: z.t,
            min: 2.0 * g.spacing(),
        });
    }
    let r = f.support_radius(1e-10);
    let wmax = if g.dim() == 1 {
        z.w[0].abs()
    } else {
        (z.w[0] * z.w[0] + z.w[1] * z.w[1]).sqrt()
    };
    if wmax + z.t * r > g.half_width() {
        return Err(CzError::SupportEscapes(format!(
            "|w| + t*r = {:.3} exceeds the half-width {}",
            wmax + z.t * r,
            g.half_width()
        )));
    }
    let table = HatTable::new(f, 8)?;
    table.render(&g, &z.w, z.t)
}

/// Render `Sy_z^{-1} f = t^d f(t x + w)` on `target` from a transform table.
pub fn inverse_sy_render(table: &HatTable, z: AffinePoint, target: &Grid) -> Result<SampledFunction> {
    // hat of Sy_z^{-1} f is e^{i w xi / t} hat(f)(xi/t): a render with
    // scale 1/t and position -w/t.
    let w = [-z.w[0] / z.t, -z.w[1] / z.t];
    table.render(target, &w, 1.0 / z.t)
}

fn bracket(x: f64) -> f64 {
    1.0 + x.abs()
}

/// Dyadic Hölder offsets `{h, 2h, 4h, ...} <= 1` in units of nodes.
fn dyadic_offsets(h: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 1usize;
    while s as f64 * h <= 1.0 {
        out.push(s);
        s *= 2;
    }
    if out.is_empty() {
        out.push(1);
    }
    out
}

/// The decay + Hölder norm
/// `sup <x>^{d+eta} |f(x)| + sup_{|h|<=1} <x>^{d+eta} |f(x+h)-f(x)|/|h|^delta`,
/// with offsets taken from the dyadic set `{h, 2h, 4h, ..., ~1}` (axis-aligned
/// in dimension 2, where the bracket uses `<x> = 1 + |x|`, `x in R^2`).
pub fn star_norm(f: &SampledFunction, eta: f64, delta: f64) -> f64 {
    let g = f.grid;
    let d = g.dim();
    let h = g.spacing();
    let n = g.points_per_axis();
    let p = d as f64 + eta;
    let weight = |idx: usize| -> f64 {
        let x = g.node(idx);
        let r = if d == 1 {
            x[0].abs()
        } else {
            (x[0] * x[0] + x[1] * x[1]).sqrt()
        };
        bracket(r).powf(p)
    };
    let mut size = 0.0f64;
    for (i, v) in f.values.iter().enumerate() {
        size = size.max(weight(i) * v.norm());
    }
    let mut holder = 0.0f64;
    for s in dyadic_offsets(h) {
        let denom = (s as f64 * h).powf(delta);
        match d {
            1 => {
                for i in 0..n {
                    let j = (i + s) % n;
                    let diff = (f.values[j] - f.values[i]).norm();
                    holder = holder.max(weight(i) * diff / denom);
                }
            }
            _ => {
                for i0 in 0..n {
                    for i1 in 0..n {
                        let idx = i0 * n + i1;
                        let jx = ((i0 + s) % n) * n + i1;
                        let jy = i0 * n + (i1 + s) % n;
                        let w = weight(idx);
                        let dx = (f.values[jx] - f.values[idx]).norm();
                        let dy = (f.values[jy] - f.values[idx]).norm();
                        holder = holder.max(w * dx.max(dy) / denom);
                    }
                }
            }
        }
    }
    size + holder
}

/// Tensor-variable decay + Hölder norm over `R^{2d}` (d = 1 here), with the
/// product bracket `<(x,y)>^d (1 + |y|)^{d+eta}` — the asymmetric-bracket
/// norm specialized to zero asymmetry, comparable to the ambient
/// `<(x,y)>^{2d+eta}` bracket.
pub fn star_norm_2d(f: &SampledFunction2D, eta: f64, delta: f64) -> f64 {
    sigma_norm(f, 0.0, eta, delta)
}

/// Asymmetric-bracket norm with weight
/// `<(x,y)>^{d+sigma} (1 + |y|)^{d+eta-sigma}` (size and Hölder parts);
/// delegates to the symmetric case when `sigma > d + eta`.
pub fn sigma_norm(f: &SampledFunction2D, sigma: f64, eta: f64, delta: f64) -> f64 {
    let d = 1.0f64;
    let sigma = if sigma > d + eta { 0.0 } else { sigma };
    let g = f.grid;
    let h = g.spacing();
    let n = g.len();
    let weight = |i: usize, j: usize| -> f64 {
        let x = g.coord(i);
        let y = g.coord(j);
        let r = (x * x + y * y).sqrt();
        bracket(r).powf(d + sigma) * bracket(y).powf(d + eta - sigma)
    };
    let mut size = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            size = size.max(weight(i, j) * f.value(i, j).norm());
        }
    }
    let mut holder = 0.0f64;
    for s in dyadic_offsets(h) {
        let denom = (s as f64 * h).powf(delta);
        for i in 0..n {
            let is = (i + s) % n;
            for j in 0..n {
                let js = (j + s) % n;
                let w = weight(i, j);
                let dx = (f.value(is, j) - f.value(i, j)).norm();
                let dy = (f.value(i, js) - f.value(i, j)).norm();
                holder = holder.max(w * dx.max(dy) / denom);
            }
        }
    }
    size + holder
}

/// Parameters of a wavelet class: smoothness `k`, Hölder exponent `delta`,
/// optional fixed decay surplus `eta` (default: `|gamma|` per derivative in
/// dimension 1, `k` for tensor classes), optional asymmetry `sigma`, and
/// cancellation flags per tensor slot (`true` = moments through order `k`
/// must vanish in that slot).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletClassSpec {
    pub k: u32,
    pub delta: f64,
    pub eta: Option<f64>,
    pub sigma: Option<f64>,
    pub cancellative: [bool; 2],
}

impl WaveletClassSpec {
    /// The basic non-cancellative class of order (`k`, `delta`).
    pub fn plain(k: u32, delta: f64) -> Self {
        WaveletClassSpec {
            k,
            delta,
            eta: None,
            sigma: None,
            cancellative: [false, false],
        }
    }

    pub fn cancellative(k: u32, delta: f64) -> Self {
        WaveletClassSpec {
            cancellative: [true, false],
            ..Self::plain(k, delta)
        }
    }

    /// The rapid-decay cancellative class used for third-slot analysis:
    /// order 0, fixed surplus `2d + 1`.
    pub fn rapid_decay(delta: f64, d: usize) -> Self {
        WaveletClassSpec {
            k: 0,
            delta,
            eta: Some(2.0 * d as f64 + 1.0),
            sigma: None,
            cancellative: [true, false],
        }
    }

    fn surplus(&self, gamma_len: u32, tensor: bool) -> f64 {
        match self.eta {
            Some(e) => e,
            None if tensor => self.k as f64,
            None => gamma_len as f64,
        }
    }
}

fn moment_tolerance(l1: f64) -> f64 {
    1e-8 * (1.0 + l1)
}

/// Measured class norm of `f` viewed at the affine point `z`:
/// `max_{|gamma| <= k} t^{|gamma|} || Sy_z^{-1} d^gamma f ||_{*, eta(gamma), delta}`.
///
/// When the first cancellation flag is set and some moment of `f` through
/// order `k` exceeds tolerance, the function is not in the class and
/// `f64::INFINITY` is returned.
pub fn class_membership(f: &SampledFunction, z: AffinePoint, spec: &WaveletClassSpec) -> f64 {
    let d = f.grid.dim();
    if spec.cancellative[0] {
        let tol = moment_tolerance(f.lp_norm(1.0));
        for total in 0..=spec.k {
            let bad = if d == 1 {
                f.moment([total, 0]).norm() > tol
            } else {
                (0..=total).any(|a| f.moment([a, total - a]).norm() > tol)
            };
            if bad {
                return f64::INFINITY;
            }
        }
    }
    let target = analysis_grid(d);
    let mut best = 0.0f64;
    for total in 0..=spec.k {
        let gammas: Vec<[u32; 2]> = if d == 1 {
            vec![[total, 0]]
        } else {
            (0..=total).map(|a| [a, total - a]).collect()
        };
        for gm in gammas {
            let df = if d == 1 {
                derivative(f, gm[0])
            } else {
                spectral_multiplier(
                    f,
                    |xi| C64::new(0.0, xi[0]).powu(gm[0]) * C64::new(0.0, xi[1]).powu(gm[1]),
                    None,
                )
            };
            let df = match df {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            };
            let table = match HatTable::new(&df, 8) {
                Ok(t) => t,
                Err(_) => return f64::INFINITY,
            };
            let back = match inverse_sy_render(&table, z, &target) {
                Ok(b) => b,
                Err(_) => return f64::INFINITY,
            };
            let nrm = star_norm(&back, spec.surplus(total, false), spec.delta);
            best = best.max(z.t.powi(total as i32) * nrm);
        }
    }
    best
}

/// Square analysis grid for tensor-class measurement.
fn analysis_grid_square() -> Grid {
    Grid::new(1, 8.0, 256).expect("static grid")
}

/// Measured tensor-class norm of a two-variable function at `z` (the same
/// base point acts on both slots):
/// `max_{|gamma| <= k} t^{|gamma|} ||(Sy_z^1 Sy_z^2)^{-1} d^gamma f||` in
/// the asymmetric-bracket norm (symmetric when `sigma` is unset).
/// Cancellation flags check slot moments: flag 0 requires
/// `int x^a f(x,y) dx = 0` for all `y` and `a <= k`; flag 1 symmetrically.
pub fn class_membership_2d(f: &SampledFunction2D, z: AffinePoint, spec: &WaveletClassSpec) -> f64 {
    let g = f.grid;
    let n = f.n();
    let h = g.spacing();
    let l1 = f.values.iter().map(|v| v.norm()).sum::<f64>() * h * h;
    let tol = moment_tolerance(l1);
    for slot in 0..2 {
        if !spec.cancellative[slot] {
            continue;
        }
        for a in 0..=spec.k {
            let mut worst = 0.0f64;
            for fixed in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for run in 0..n {
                    let x = g.coord(run);
                    let v = if slot == 0 {
                        f.value(run, fixed)
                    } else {
                        f.value(fixed, run)
                    };
                    acc += v * x.powi(a as i32);
                }
                worst = worst.max((acc * h).norm());
            }
            if worst > tol {
                return f64::INFINITY;
            }
        }
    }
    // reinterpret as a function on the square so the spectral machinery and
    // the joint inverse rescaling apply verbatim
    let g2 = match Grid::new(2, g.half_width(), n) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let f2 = match SampledFunction::from_values(g2, f.values.clone()) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let target = analysis_grid_square();
    let target2 = Grid::new(2, target.half_width(), target.points_per_axis()).expect("static grid");
    let w0 = z.w[0];
    let mut best = 0.0f64;
    for total in 0..=spec.k {
        for g1 in 0..=total {
            let gm = [g1, total - g1];
            let df = match spectral_multiplier(
                &f2,
                |xi| C64::new(0.0, xi[0]).powu(gm[0]) * C64::new(0.0, xi[1]).powu(gm[1]),
                None,
            ) {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            };
            let table = match HatTable::new(&df, 4) {
                Ok(t) => t,
                Err(_) => return f64::INFINITY,
            };
            let back = match table.render(&target2, &[-w0 / z.t, -w0 / z.t], 1.0 / z.t) {
                Ok(b) => b,
                Err(_) => return f64::INFINITY,
            };
            let back2 = match SampledFunction2D::from_values(target, back.values) {
                Ok(b) => b,
                Err(_) => return f64::INFINITY,
            };
            let eta = spec.surplus(total, true);
            let nrm = match spec.sigma {
                Some(s) => sigma_norm(&back2, s, eta, spec.delta),
                None => star_norm_2d(&back2, eta, spec.delta),
            };
            best = best.max(z.t.powi(total as i32) * nrm);
        }
    }
    best
}

/// A compactly supported function whose moments reproduce the Kronecker
/// pattern `int theta^gamma(x) x^beta dx = delta_{beta,gamma}` for
/// `0 <= beta <= gamma`.
#[derive(Debug, Clone)]
pub struct GammaFamily {
    pub gamma: u32,
    pub base: SampledFunction,
    hat: HatTable,
}

impl GammaFamily {
    pub fn hat(&self) -> &HatTable {
        &self.hat
    }

    /// Render `theta^gamma_z` on a target grid.
    pub fn member_at(&self, z: AffinePoint, target: &Grid) -> Result<SampledFunction> {
        self.hat.render(target, &z.w, z.t)
    }
}

/// Solve the small Gram system for coefficients of `{bump * x^j}` enforcing
/// the moment pattern; underdetermined systems take the least-norm solution.
pub fn make_gamma_family(gamma: u32, support_radius: f64) -> Result<GammaFamily> {
    let g = construction_grid_1d();
    if !(support_radius > 0.0 && support_radius <= 0.5) {
        return Err(CzError::Constraint(format!(
            "support radius {support_radius} outside (0, 1/2]"
        )));
    }
    let profile = SampledFunction::from_fn(g, "gamma bump", |x, _| {
        let u = x / (2.0 * support_radius);
        let r2 = u * u;
        if r2 < 0.25 {
            (1.0 / (r2 - 0.25)).exp()
        } else {
            0.0
        }
    })?;
    let nterms = gamma as usize + 2;
    let neq = gamma as usize + 1;
    // moment matrix a[beta][j] = int bump(x) x^{beta + j} dx
    let mut pow_moments = vec![0.0f64; 2 * nterms];
    for (p, slot) in pow_moments.iter_mut().enumerate() {
        *slot = profile.moment([p as u32, 0]).re;
    }
    let a = |beta: usize, j: usize| pow_moments[beta + j];
    // least-norm solution: c = A^T y, (A A^T) y = e_gamma
    let mut gram = vec![vec![0.0f64; neq]; neq];
    for (b1, row) in gram.iter_mut().enumerate() {
        for (b2, slot) in row.iter_mut().enumerate() {
            *slot = (0..nterms).map(|j| a(b1, j) * a(b2, j)).sum();
        }
    }
    let mut rhs = vec![0.0f64; neq];
    rhs[gamma as usize] = 1.0;
    let y = solve_dense(&mut gram, &mut rhs).ok_or_else(|| {
        CzError::Degenerate("singular moment matrix in the gamma-family construction".into())
    })?;
    let coeff: Vec<f64> = (0..nterms)
        .map(|j| (0..neq).map(|b| a(b, j) * y[b]).sum())
        .collect();
    let base = SampledFunction::from_fn(g, "gamma member", |x, _| {
        let u = x / (2.0 * support_radius);
        let r2 = u * u;
        if r2 < 0.25 {
            let b = (1.0 / (r2 - 0.25)).exp();
            coeff
                .iter()
                .enumerate()
                .map(|(j, c)| c * x.powi(j as i32))
                .sum::<f64>()
                * b
        } else {
            0.0
        }
    })?;
    // verify the moment pattern
    for beta in 0..=gamma {
        let want = if beta == gamma { 1.0 } else { 0.0 };
        let got = base.moment([beta, 0]).re;
        if (got - want).abs() > 1e-8 {
            return Err(CzError::Degenerate(format!(
                "gamma-family residual moment |{got:.3e} - {want}| at order {beta} exceeds 1e-8"
            )));
        }
    }
    let hat = HatTable::new(&base, 16)?;
    Ok(GammaFamily { gamma, base, hat })
}

/// Gaussian elimination with partial pivoting; returns `None` on a singular
/// system.  (The systems here are tiny Gram matrices; a dependency-free
/// solver keeps the moment algebra self-contained.)
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Remove moments through order `k` from `f` using gamma-family members
/// (ascending order, so earlier corrections are not disturbed).
pub fn remove_moments(f: &SampledFunction, k: u32, fams: &[GammaFamily]) -> Result<SampledFunction> {
    let mut out = f.clone();
    for alpha in 0..=k {
        let fam = fams
            .iter()
            .find(|fm| fm.gamma == alpha)
            .ok_or_else(|| CzError::Degenerate(format!("missing gamma family of order {alpha}")))?;
        let m = out.moment([alpha, 0]);
        let member = fam.member_at(AffinePoint::new1(0.0, 1.0), &out.grid)?;
        out = out.sub(&member.scaled(m))?;
    }
    Ok(out)
}

/// One dictionary member: a sum of separable tensor terms (a single term
/// with a trivial second factor in dimension 1).  Storing members in
/// separable form keeps intrinsic-coefficient fields computable by
/// per-factor convolutions.
#[derive(Debug, Clone)]
pub struct DictMember {
    pub terms: Vec<(SampledFunction, SampledFunction)>,
    pub tensor: bool,
}

impl DictMember {
    fn scalar(f: SampledFunction) -> Self {
        let unit = SampledFunction::zeros(f.grid);
        DictMember {
            terms: vec![(f, unit)],
            tensor: false,
        }
    }

    /// First factors (the full member in the scalar case).
    pub fn first(&self) -> &SampledFunction {
        &self.terms[0].0
    }

    /// Assemble the tensor member as a function on the square grid.
    pub fn assemble_2d(&self) -> Result<SampledFunction2D> {
        let mut out = SampledFunction2D::zeros(self.terms[0].0.grid)?;
        for (a, b) in &self.terms {
            out.accumulate_outer(a, b, C64::new(1.0, 0.0));
        }
        Ok(out)
    }
}

/// A finite family of normalized class representatives standing in for the
/// intrinsic supremum over the whole class.
#[derive(Debug, Clone)]
pub struct WaveletDictionary {
    pub members: Vec<DictMember>,
    pub class: WaveletClassSpec,
    pub seed: u64,
    pub tensor: bool,
}

fn member_grid() -> Grid {
    Grid::new(1, 16.0, 1024).expect("static grid")
}

fn raw_member(rng: &mut ChaCha8Rng, idx: usize, eta_decay: f64) -> Result<SampledFunction> {
    let g = member_grid();
    let width = 0.3 + 0.7 * rng.gen::<f64>();
    let offset = -1.5 + 3.0 * rng.gen::<f64>();
    let freq = 1.0 + 5.0 * rng.gen::<f64>();
    let phase = std::f64::consts::TAU * rng.gen::<f64>();
    let bump = move |x: f64, c: f64, w: f64| {
        let u = (x - c) / (2.0 * w);
        let r2 = u * u;
        if r2 < 0.25 {
            (1.0 / (r2 - 0.25)).exp()
        } else {
            0.0
        }
    };
    match idx % 4 {
        0 => SampledFunction::from_fn(g, "bump member", move |x, _| bump(x, offset, width)),
        1 => SampledFunction::from_fn(g, "modulated member", move |x, _| {
            bump(x, offset, width) * (freq * x + phase).cos()
        }),
        2 => SampledFunction::from_fn(g, "envelope member", move |x, _| {
            (1.0 + (x - offset).abs()).powf(-(1.0 + eta_decay))
        }),
        _ => {
            let off2 = -1.5 + 3.0 * rng.gen::<f64>();
            let sgn = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            SampledFunction::from_fn(g, "two-bump member", move |x, _| {
                bump(x, offset, width) + sgn * bump(x, off2, 0.8 * width)
            })
        }
    }
}

fn normalized_scalar_member(
    rng: &mut ChaCha8Rng,
    idx: usize,
    z: AffinePoint,
    spec: &WaveletClassSpec,
    fams: &[GammaFamily],
) -> Result<SampledFunction> {
    let eta_decay = spec.surplus(0, false).max(spec.delta) + 0.25;
    let mut f = raw_member(rng, idx, eta_decay)?;
    if spec.cancellative[0] {
        f = remove_moments(&f, spec.k, fams)?;
    }
    let nrm = class_membership(&f, z, spec);
    if !nrm.is_finite() || nrm < 1e-12 {
        return Err(CzError::Degenerate(format!(
            "dictionary member {idx} has unusable class norm {nrm}"
        )));
    }
    Ok(f.scaled(C64::new(1.0 / nrm, 0.0)))
}

/// Build a seeded dictionary of `size` representatives of the class, each
/// normalized to unit measured class norm at `z`.  Member `i` is generated
/// from `seed + i`, so dictionaries of increasing size are nested and
/// dictionary suprema are monotone in `size`.  `tensor` selects
/// two-variable members (sums of separable products).
pub fn build_dictionary(
    spec: &WaveletClassSpec,
    z: AffinePoint,
    size: usize,
    seed: u64,
    tensor: bool,
) -> Result<WaveletDictionary> {
    if size == 0 {
        return Err(CzError::Constraint("dictionary size must be at least 1".into()));
    }
    let fams: Vec<GammaFamily> = (0..=spec.k)
        .map(|gm| make_gamma_family(gm, 0.4))
        .collect::<Result<_>>()?;
    let mut members = Vec::with_capacity(size);
    for i in 0..size {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        if !tensor {
            let f = normalized_scalar_member(&mut rng, i, z, spec, &fams)?;
            members.push(DictMember::scalar(f));
        } else {
            // separable member: slot factors carry the per-slot cancellation
            let spec_x = WaveletClassSpec {
                cancellative: [spec.cancellative[0], false],
                sigma: None,
                ..*spec
            };
            let spec_y = WaveletClassSpec {
                cancellative: [spec.cancellative[1], false],
                sigma: None,
                ..*spec
            };
            let fx = normalized_scalar_member(&mut rng, i, z, &spec_x, &fams)?;
            let fy = normalized_scalar_member(&mut rng, i + 1, z, &spec_y, &fams)?;
            let mut terms = vec![(fx, fy)];
            if i % 3 == 2 {
                // a genuine mixture: add a second separable term
                let gx = normalized_scalar_member(&mut rng, i + 2, z, &spec_x, &fams)?;
                let gy = normalized_scalar_member(&mut rng, i + 3, z, &spec_y, &fams)?;
                terms.push((
                    gx.scaled(C64::new(0.5, 0.0)),
                    gy,
                ));
            }
            // normalize the assembled member by its measured tensor norm at
            // the base point
            let assembled = DictMember {
                terms: terms.clone(),
                tensor: true,
            }
            .assemble_2d()?;
            let eta = spec.surplus(spec.k, true).max(spec.delta);
            let nrm = match spec.sigma {
                Some(s) => sigma_norm(&assembled, s, eta, spec.delta),
                None => star_norm_2d(&assembled, eta, spec.delta),
            };
            if nrm < 1e-12 {
                return Err(CzError::Degenerate(format!(
                    "tensor member {i} has negligible norm"
                )));
            }
            let c = C64::new(1.0 / nrm, 0.0);
            let terms = terms
                .into_iter()
                .map(|(a, b)| (a.scaled(c), b))
                .collect();
            members.push(DictMember {
                terms,
                tensor: true,
            });
        }
    }
    Ok(WaveletDictionary {
        members,
        class: *spec,
        seed,
        tensor,
    })
}
