//! Continuous wavelet analysis and synthesis, the reproducing identity, the
//! high-low convolution decomposition, and symbol-averaged wavelets.

use crate::error::{CzError, Result};
use crate::fft::{self, HatTable};
use crate::grid::{AffineGrid, AffinePoint, Grid, SampledFunction, SampledFunction2D};
use crate::wavelet::{poly_axpy, poly_deriv, poly_eval, poly_mul, MotherWavelet};
use num_complex::Complex64 as C64;

/// Wavelet coefficients `<f, phi_z>` over the cells of an affine grid,
/// stored scale-major (`values[j * num_spatial + i]`).
#[derive(Debug, Clone)]
pub struct CwtCoefficients {
    pub affine_grid: AffineGrid,
    pub values: Vec<C64>,
    pub wavelet: String,
}

/// Analyze `f` against the translate-dilates of `phi` on every cell of `ag`.
///
/// For fixed scale `t` the coefficient field `w -> <f, phi_{w,t}>` is the
/// convolution of `f` with the reflected dilate, so each scale costs one
/// spectral multiplier and one inverse transform; spatial nodes are then
/// subsampled at the grid stride.
pub fn cwt(f: &SampledFunction, phi: &MotherWavelet, ag: &AffineGrid) -> Result<CwtCoefficients> {
    let g = f.grid;
    if g.dim() != 1 || phi.dim() != 1 {
        return Err(CzError::GridMismatch(
            "wavelet analysis is implemented for dimension 1".into(),
        ));
    }
    if ag.scale(0) < 2.0 * g.spacing() {
        return Err(CzError::ScaleBelowResolution {
            t: ag.scale(0),
            min: 2.0 * g.spacing(),
        });
    }
    let n = g.len();
    let fhat = fft::forward_phys(&g, &f.values);
    let mut values = Vec::with_capacity(ag.num_cells());
    for j in 0..ag.num_scales {
        let t = ag.scale(j);
        let mut chat = vec![C64::new(0.0, 0.0); n];
        for (k, slot) in chat.iter_mut().enumerate() {
            let xi = g.freq(k);
            *slot = fhat[k] * phi.hat_at(&[-t * xi, 0.0]);
        }
        let field = fft::inverse_phys(&g, &chat);
        for i in 0..ag.num_spatial() {
            let v = field[i * ag.stride];
            if !v.is_finite() {
                return Err(CzError::Degenerate(format!(
                    "non-finite coefficient at scale index {j}, node {i}"
                )));
            }
            values.push(v);
        }
    }
    Ok(CwtCoefficients {
        affine_grid: ag.clone(),
        values,
        wavelet: format!("mother-D{}", phi.cancellation_order),
    })
}

/// Synthesize `int <f, phi_z> phi_z dmu(z)` over the truncated affine grid.
///
/// Per scale, the stride-spaced coefficients are embedded as a delta train
/// whose transform multiplies `hat(phi)(t xi)`; cells carry the invariant
/// weight `(stride h)^d ln(rho)`.
pub fn calderon_reconstruct(c: &CwtCoefficients, phi: &MotherWavelet) -> Result<SampledFunction> {
    let ag = &c.affine_grid;
    let g = ag.grid;
    let n = g.len();
    let mut out_hat = vec![C64::new(0.0, 0.0); n];
    let log_rho = ag.rho.ln();
    for j in 0..ag.num_scales {
        let t = ag.scale(j);
        let mut train = vec![C64::new(0.0, 0.0); n];
        for i in 0..ag.num_spatial() {
            train[i * ag.stride] = c.values[j * ag.num_spatial() + i];
        }
        let train_hat = fft::forward_phys(&g, &train);
        // forward_phys carries a factor h; the cell weight contributes
        // stride * h, so the net spatial factor is `stride`
        let w = ag.stride as f64 * log_rho;
        for (k, slot) in out_hat.iter_mut().enumerate() {
            let xi = g.freq(k);
            *slot += w * train_hat[k] * phi.hat_at(&[t * xi, 0.0]);
        }
    }
    let values = fft::inverse_phys(&g, &out_hat);
    SampledFunction::from_values(g, values)
}

/// Relative L² distance `|a - b|_2 / |b|_2` (absolute when `b` is null).
pub fn relative_l2_error(a: &SampledFunction, b: &SampledFunction) -> Result<f64> {
    let diff = a.sub(b)?;
    let denom = b.l2_norm();
    if denom < 1e-12 {
        Ok(diff.l2_norm())
    } else {
        Ok(diff.l2_norm() / denom)
    }
}

/// The four convolution factors of the high-low decomposition: the kernel
/// `Phi` aggregating all scales above 1, split as
/// `Phi = psi1 * psi2 + psi3 * psi4` with `psi1, psi3` compactly supported
/// smooth factors and `psi2` a full derivative (mean zero). `psi4 = Phi`
/// itself, which necessarily carries the unit admissibility mass: the
/// scales-above-`s` projection tends to the identity as `s -> 0`, so its
/// aggregate kernel cannot be mean zero.
#[derive(Debug, Clone)]
pub struct HighLowSystem {
    pub psi1: SampledFunction,
    pub psi2: SampledFunction,
    pub psi3: SampledFunction,
    pub psi4: SampledFunction,
    pub phi_kernel: SampledFunction,
    pub m: u32,
    phi_kernel_hat: HatTable,
    psi_hats: [HatTable; 4],
    mother_hat: HatTable,
}

/// Construction grid for the high-low kernels.
pub fn highlow_grid() -> Grid {
    Grid::new(1, 2.0, 8192).expect("static grid")
}

/// Polynomial coefficients of the smoothstep `S(u) = I_u(n+1, n+1)`
/// (regularized incomplete beta), a C^n monotone ramp from 0 at `u=0` to 1
/// at `u=1`.
fn smoothstep_poly(n: u32) -> Vec<f64> {
    // integrate u^n (1-u)^n term by term, then normalize by the value at 1
    let n = n as usize;
    let mut binom = vec![0.0f64; n + 1];
    binom[0] = 1.0;
    for k in 1..=n {
        binom[k] = binom[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    let mut raw = vec![0.0f64; 2 * n + 2];
    for (k, &b) in binom.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        raw[n + k + 1] = sign * b / (n + k + 1) as f64;
    }
    let norm = poly_eval(&raw, 1.0);
    raw.iter().map(|c| c / norm).collect()
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Piecewise-polynomial kernels of the anti-derivative splitting:
/// `H(x) = x^{m+1}/(m+1)!` for `x >= 0`, the smooth correction
/// `g = chi H` with `chi(x) = S(4x - 1)` ramping on `[1/4, 1/2]`,
/// `F = H - g`, and `G = D^{m+2} g`.
///
/// Everything is evaluated in the ramp variable `u = 4x - 1` via the
/// Leibniz rule; substituting `u` into `S` symbolically would inflate the
/// polynomial coefficients by `4^deg` and lose ~6 digits to cancellation.
struct SplitKernels {
    /// derivatives of the smoothstep, `s_derivs[j] = S^{(j)}` in `u`
    s_derivs: Vec<Vec<f64>>,
    m: u32,
}

impl SplitKernels {
    fn new(m: u32) -> Self {
        let s = smoothstep_poly(m + 6);
        let mut s_derivs = vec![s];
        for j in 1..=(m as usize + 2) {
            let next = poly_deriv(&s_derivs[j - 1]);
            s_derivs.push(next);
        }
        SplitKernels { s_derivs, m }
    }

    /// j-th derivative of `H` (0 for orders above `m+1`, valid for x > 0)
    fn h_deriv_at(&self, j: u32, x: f64) -> f64 {
        if j > self.m + 1 {
            0.0
        } else {
            x.powi((self.m + 1 - j) as i32) / factorial(self.m + 1 - j)
        }
    }

    fn f_at(&self, x: f64) -> f64 {
        if x < 0.0 || x >= 0.5 {
            0.0
        } else if x <= 0.25 {
            self.h_deriv_at(0, x)
        } else {
            (1.0 - poly_eval(&self.s_derivs[0], 4.0 * x - 1.0)) * self.h_deriv_at(0, x)
        }
    }

    fn g_big_at(&self, x: f64) -> f64 {
        // D^{m+2} (chi H) by Leibniz; supported on the transition band
        if !(0.25..0.5).contains(&x) {
            return 0.0;
        }
        let u = 4.0 * x - 1.0;
        let order = self.m + 2;
        (0..=order)
            .map(|j| {
                binomial(order, j)
                    * 4.0f64.powi(j as i32)
                    * poly_eval(&self.s_derivs[j as usize], u)
                    * self.h_deriv_at(order - j, x)
            })
            .sum()
    }
}

/// Cumulative profile `A(xi) = int_xi^inf |hat(phi)(rho)|^2 drho/rho`,
/// tabulated on the nonnegative frequencies of `grid` by per-interval
/// Simpson panels; `A(0)` is the admissibility integral (= 1 for a
/// normalized wavelet).  Working with `|hat(phi)|^2` keeps the deep tail
/// clean: squaring pushes the FFT noise floor to ~1e-32.
fn cumulative_admissibility(phi: &MotherWavelet, grid: &Grid) -> Vec<f64> {
    let half = grid.len() / 2;
    let dxi = std::f64::consts::PI / grid.half_width();
    let intensity = |rho: f64| phi.hat_at(&[rho, 0.0]).norm_sqr();
    let mut a = vec![0.0f64; half + 1];
    for k in (0..half).rev() {
        let lo = (k as f64 * dxi).max(1e-12);
        let hi = (k + 1) as f64 * dxi;
        // 16 Simpson panels per grid interval
        let panels = 16;
        let step = (hi - lo) / (2 * panels) as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let x0 = lo + (2 * p) as f64 * step;
            acc += step / 3.0
                * (intensity(x0) / x0
                    + 4.0 * intensity(x0 + step) / (x0 + step)
                    + intensity(x0 + 2.0 * step) / (x0 + 2.0 * step));
        }
        a[k] = a[k + 1] + acc;
    }
    a
}

/// Build the high-low system for a normalized mother wavelet (`d = 1`).
///
/// The aggregate kernel has transform `A(|xi|)`, so both `Phi` and its
/// derivative `psi2 = D^{m+2} Phi` come from one clean spectral profile;
/// `psi1 = F` and `psi3 = G` are sampled from exact piecewise polynomials.
/// The distributional splitting `delta = D^{m+2} F + G` is verified against
/// 10 localized Hermite probes before returning.
pub fn highlow_decompose(phi: &MotherWavelet, m: u32) -> Result<HighLowSystem> {
    if phi.dim() != 1 {
        return Err(CzError::GridMismatch(
            "the high-low decomposition is implemented for dimension 1".into(),
        ));
    }
    let g = highlow_grid();
    let n = g.len();
    let a = cumulative_admissibility(phi, &g);
    let a_at = |k: usize| {
        let idx = if k <= n / 2 { k } else { n - k };
        a[idx.min(n / 2)]
    };
    let mut phi_hat_vec = vec![C64::new(0.0, 0.0); n];
    let mut psi2_hat = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        let xi = g.freq(k);
        let av = a_at(k);
        phi_hat_vec[k] = C64::new(av, 0.0);
        psi2_hat[k] = C64::new(0.0, xi).powu(m + 2) * av;
    }
    let phi_kernel = SampledFunction::from_values(g, fft::inverse_phys(&g, &phi_hat_vec))?;
    let psi2 = SampledFunction::from_values(g, fft::inverse_phys(&g, &psi2_hat))?;

    let split = SplitKernels::new(m);
    let psi1 = SampledFunction::from_fn(g, "anti-derivative remainder", |x, _| split.f_at(x))?;
    let psi3 = SampledFunction::from_fn(g, "transition derivative", |x, _| split.g_big_at(x))?;

    // distributional check: <delta, p> = (-1)^{m+2} <F, p^{(m+2)}> + <G, p>
    // on 10 localized Hermite probes p_j(x) = H_j(4x) e^{-8 x^2}
    let mut herm: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 8.0]];
    for j in 2..10 {
        let mut next = poly_mul(&[0.0, 8.0], &herm[j - 1]);
        poly_axpy(&mut next, -2.0 * (j - 1) as f64, &herm[j - 2]);
        herm.push(next);
    }
    let sign = if (m + 2) % 2 == 0 { 1.0 } else { -1.0 };
    for p in &herm {
        // derivative of P e^{-8x^2} is (P' - 16 x P) e^{-8x^2}
        let mut dp = p.clone();
        for _ in 0..m + 2 {
            let mut next = poly_deriv(&dp);
            poly_axpy(&mut next, -16.0, &poly_mul(&[0.0, 1.0], &dp));
            dp = next;
        }
        let probe_deriv =
            SampledFunction::from_fn(g, "probe", |x, _| poly_eval(&dp, x) * (-8.0 * x * x).exp())?;
        let probe = SampledFunction::from_fn(g, "probe", |x, _| poly_eval(p, x) * (-8.0 * x * x).exp())?;
        let lhs = sign * psi1.pair(&probe_deriv)?.re + psi3.pair(&probe)?.re;
        let rhs = poly_eval(p, 0.0);
        let scale = 1.0 + probe_deriv.lp_norm(f64::INFINITY);
        if (lhs - rhs).abs() > 1e-7 * scale {
            return Err(CzError::Calibration {
                doublings: 0,
                ratio: (lhs - rhs).abs() / scale,
            });
        }
    }

    let phi_kernel_hat = HatTable::new(&phi_kernel, 4)?;
    let psi_hats = [
        HatTable::new(&psi1, 4)?,
        HatTable::new(&psi2, 4)?,
        HatTable::new(&psi3, 4)?,
        HatTable::new(&psi4_ref(&phi_kernel), 4)?,
    ];
    let mother_hat = HatTable::new(&phi.base, 16)?;
    Ok(HighLowSystem {
        psi1,
        psi2,
        psi3,
        psi4: phi_kernel.clone(),
        phi_kernel,
        m,
        phi_kernel_hat,
        psi_hats,
        mother_hat,
    })
}

fn psi4_ref(phi_kernel: &SampledFunction) -> SampledFunction {
    phi_kernel.clone()
}

impl HighLowSystem {
    /// Transform of the aggregate kernel at a scalar frequency.
    pub fn kernel_hat(&self, xi: f64) -> C64 {
        self.phi_kernel_hat.eval(&[xi, 0.0])
    }

    /// Transform of the j-th factor (1-based) at a scalar frequency.
    pub fn factor_hat(&self, j: usize, xi: f64) -> C64 {
        self.psi_hats[j - 1].eval(&[xi, 0.0])
    }

    /// Transform of the underlying mother wavelet at a scalar frequency.
    pub fn mother_hat(&self, xi: f64) -> C64 {
        self.mother_hat.eval(&[xi, 0.0])
    }
}

/// Convolve `f` with the `s`-dilation of the aggregate kernel; this equals
/// the `r >= s` half of the reproducing integral.
pub fn single_scale_projection(
    f: &SampledFunction,
    s: f64,
    sys: &HighLowSystem,
) -> Result<SampledFunction> {
    let g = f.grid;
    if s < 2.0 * g.spacing() {
        return Err(CzError::ScaleBelowResolution {
            t: s,
            min: 2.0 * g.spacing(),
        });
    }
    let fhat = fft::forward_phys(&g, &f.values);
    let mut out_hat = vec![C64::new(0.0, 0.0); g.len()];
    for (k, slot) in out_hat.iter_mut().enumerate() {
        let xi = g.freq(k);
        *slot = fhat[k] * sys.kernel_hat(s * xi);
    }
    SampledFunction::from_values(g, fft::inverse_phys(&g, &out_hat))
}

/// Assemble the four-term single-scale expansion of `f (x) g` over the
/// scales of `ag` and return the relative L² residual against the true
/// tensor product.
///
/// Per scale `s` the two inner integrals are convolutions, giving the
/// high field `f * refl(psi1)_s * psi2_s + f * refl(psi3)_s * psi4_s` and
/// the low field `g * refl(phi)_s * phi_s`; the residual measures both the
/// scale quadrature and the truncation of the scale range.
pub fn tensor_reproducing_check(
    f: &SampledFunction,
    g: &SampledFunction,
    sys: &HighLowSystem,
    ag: &AffineGrid,
) -> Result<f64> {
    let grid = f.grid;
    if grid != g.grid || grid.dim() != 1 {
        return Err(CzError::GridMismatch(
            "tensor check needs two functions on one 1-dimensional grid".into(),
        ));
    }
    let n = grid.len();
    let fhat = fft::forward_phys(&grid, &f.values);
    let ghat = fft::forward_phys(&grid, &g.values);
    let log_rho = ag.rho.ln();
    let mut result = SampledFunction2D::zeros(grid)?;
    for j in 0..ag.num_scales {
        let s = ag.scale(j);
        let mut hi_f = vec![C64::new(0.0, 0.0); n];
        let mut hi_g = vec![C64::new(0.0, 0.0); n];
        let mut lo_f = vec![C64::new(0.0, 0.0); n];
        let mut lo_g = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let xi = grid.freq(k);
            let hi_mult = sys.factor_hat(1, -s * xi) * sys.factor_hat(2, s * xi)
                + sys.factor_hat(3, -s * xi) * sys.factor_hat(4, s * xi);
            let low = sys.mother_hat(s * xi);
            let lo_mult = low * low; // mother is even: refl has the same hat
            hi_f[k] = fhat[k] * hi_mult;
            hi_g[k] = ghat[k] * hi_mult;
            lo_f[k] = fhat[k] * lo_mult;
            lo_g[k] = ghat[k] * lo_mult;
        }
        let hi_f = SampledFunction::from_values(grid, fft::inverse_phys(&grid, &hi_f))?;
        let hi_g = SampledFunction::from_values(grid, fft::inverse_phys(&grid, &hi_g))?;
        let lo_f = SampledFunction::from_values(grid, fft::inverse_phys(&grid, &lo_f))?;
        let lo_g = SampledFunction::from_values(grid, fft::inverse_phys(&grid, &lo_g))?;
        let c = C64::new(log_rho, 0.0);
        result.accumulate_outer(&hi_f, &lo_g, c);
        result.accumulate_outer(&lo_f, &hi_g, c);
    }
    let target = SampledFunction2D::outer(f, g)?;
    let mut diff = result;
    diff.add_scaled(&target, C64::new(-1.0, 0.0));
    let denom = target.l2_norm();
    if denom < 1e-12 {
        Ok(diff.l2_norm())
    } else {
        Ok(diff.l2_norm() / denom)
    }
}

/// Quadrature assembly of the symbol-averaged two-variable wavelet
/// `nu_z(x,y) = int_t^inf int H(u,v,w,s,t) psi_{u,s}(x) phi_{v,s}(y)
/// du dv ds/s` over the affine-grid cells with `s >= z.t`.
pub fn averaged_wavelet(
    h_symbol: &dyn Fn(f64, f64, f64, f64, f64) -> f64,
    psi: &SampledFunction,
    phi: &SampledFunction,
    z: AffinePoint,
    ag: &AffineGrid,
) -> Result<SampledFunction2D> {
    let grid = psi.grid;
    if grid != phi.grid || grid.dim() != 1 {
        return Err(CzError::GridMismatch(
            "averaging needs psi and phi on one 1-dimensional grid".into(),
        ));
    }
    let psi_hat = HatTable::new(psi, 8)?;
    let phi_hat = HatTable::new(phi, 8)?;
    let mut out = SampledFunction2D::zeros(grid)?;
    let cell = ag.cell_weight() * ag.grid.spacing() * ag.stride as f64; // du dv ds/s
    for j in 0..ag.num_scales {
        let s = ag.scale(j);
        if s < z.t {
            continue;
        }
        let psi_fields: Vec<SampledFunction> = (0..ag.num_spatial())
            .map(|i| psi_hat.render(&grid, &ag.spatial_node(i), s))
            .collect::<Result<_>>()?;
        let phi_fields: Vec<SampledFunction> = (0..ag.num_spatial())
            .map(|i| phi_hat.render(&grid, &ag.spatial_node(i), s))
            .collect::<Result<_>>()?;
        for (iu, pf) in psi_fields.iter().enumerate() {
            let u = ag.spatial_node(iu)[0];
            // aggregate the v-integral first: B_u(y) = sum_v H phi_{v,s}(y)
            let mut b_u = SampledFunction::zeros(grid);
            let mut any = false;
            for (iv, qf) in phi_fields.iter().enumerate() {
                let v = ag.spatial_node(iv)[0];
                let hval = h_symbol(u, v, z.w[0], s, z.t);
                if hval != 0.0 {
                    any = true;
                    for (slot, q) in b_u.values.iter_mut().zip(&qf.values) {
                        *slot += hval * q;
                    }
                }
            }
            if any {
                out.accumulate_outer(pf, &b_u, C64::new(cell, 0.0));
            }
        }
    }
    Ok(out)
}

/// Largest excess of `|H|` over the Hölder-decay hypothesis envelope
/// `t^delta / max{s, |u-w|, |v-w|}^{2d+delta}` on the cells of `ag`
/// (values `<= 1` mean the hypothesis holds with constant 1).
pub fn averaging_symbol_excess(
    h_symbol: &dyn Fn(f64, f64, f64, f64, f64) -> f64,
    z: AffinePoint,
    ag: &AffineGrid,
    delta: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..ag.num_scales {
        let s = ag.scale(j);
        if s < z.t {
            continue;
        }
        for iu in 0..ag.num_spatial() {
            let u = ag.spatial_node(iu)[0];
            for iv in 0..ag.num_spatial() {
                let v = ag.spatial_node(iv)[0];
                let envelope = z.t.powf(delta)
                    / s.max((u - z.w[0]).abs())
                        .max((v - z.w[0]).abs())
                        .powf(2.0 + delta);
                let ratio = h_symbol(u, v, z.w[0], s, z.t).abs() / envelope;
                worst = worst.max(ratio);
            }
        }
    }
    worst
}

/// Apply the y-direction anti-derivative multiplier `1/(i eta)` (zero at
/// `eta = 0`) row by row; meaningful on fields that are mean zero in `y`.
pub fn y_antiderivative(nu: &SampledFunction2D) -> Result<SampledFunction2D> {
    let g = nu.grid;
    let n = g.len();
    let mut out = SampledFunction2D::zeros(g)?;
    for i in 0..n {
        let row: Vec<C64> = (0..n).map(|jj| nu.value(i, jj)).collect();
        let mut row_hat = fft::forward_phys(&g, &row);
        for (k, slot) in row_hat.iter_mut().enumerate() {
            let eta = g.freq(k);
            *slot = if eta == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                *slot / C64::new(0.0, eta)
            };
        }
        let back = fft::inverse_phys(&g, &row_hat);
        for (jj, v) in back.into_iter().enumerate() {
            out.values[i * n + jj] = v;
        }
    }
    Ok(out)
}
