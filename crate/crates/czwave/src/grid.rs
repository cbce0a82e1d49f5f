//! Uniform periodic grids, sampled functions, affine-group grids, and the
//! quadrature / convolution / spectral-multiplier substrate.
//!
//! Conventions used throughout the crate:
//!
//! * spatial nodes are `x_i = -L + i*h` with `h = 2L/N`, periodic wrap;
//! * discrete frequencies are `xi_k = pi*k/L` with signed `k in [-N/2, N/2)`;
//! * the transform pair is the analyst's unnormalized one,
//!   `hat(f)(xi) = integral f(x) e^{-i x xi} dx`, realized on the grid as
//!   `hat(f)(xi_k) = h * sum_j f(x_j) e^{-i x_j xi_k}`;
//! * pairings are bilinear, `<f,g> = integral f g` (no conjugation) — all
//!   canonical analyzing functions here are real, so this agrees with the
//!   Hermitian inner product where both appear.

use crate::error::{CzError, Result};
use crate::fft;
use num_complex::Complex64 as C64;

/// A uniform periodic grid on `[-L, L)^d`, `d` = 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    l: f64,
    n: usize,
}

impl Grid {
    /// Create a grid; `n` must be an even power of two and `l > 0`.
    pub fn new(d: usize, l: f64, n: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(CzError::InvalidGrid(format!("dimension {d} (must be 1 or 2)")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(CzError::InvalidGrid(format!("half-width {l}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(CzError::InvalidGrid(format!(
                "points-per-axis {n} (must be a power of two >= 4)"
            )));
        }
        Ok(Grid { d, l, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Grid spacing `h = 2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Total number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.spacing()
    }

    /// Full coordinates of flat node index `idx` (second entry 0 when d=1).
    pub fn node(&self, idx: usize) -> [f64; 2] {
        match self.d {
            1 => [self.coord(idx), 0.0],
            _ => [self.coord(idx / self.n), self.coord(idx % self.n)],
        }
    }

    /// Signed frequency `xi_k = pi*k/L` for FFT bin `k in [0, N)`.
    pub fn freq(&self, k: usize) -> f64 {
        let ks = if k < self.n / 2 {
            k as isize
        } else {
            k as isize - self.n as isize
        };
        std::f64::consts::PI * ks as f64 / self.l
    }

    /// Largest resolved frequency, `pi/h`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Index of the node nearest to coordinate `x` (periodic wrap).
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x + self.l) / self.spacing()).round() as isize;
        i.rem_euclid(self.n as isize) as usize
    }
}

/// A complex scalar field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl SampledFunction {
    /// All-zero field.
    pub fn zeros(grid: Grid) -> Self {
        SampledFunction {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Wrap a value vector, checking length and finiteness.
    pub fn from_values(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CzError::GridMismatch(format!(
                "value vector length {} != grid size {}",
                values.len(),
                grid.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(CzError::NonFinite {
                    node: i,
                    x: grid.node(i)[..grid.dim()].to_vec(),
                    context: "from_values".into(),
                });
            }
        }
        Ok(SampledFunction { grid, values })
    }

    /// Sample a real-valued rule at every node; rejects non-finite values
    /// naming the offending node.
    pub fn from_fn(grid: Grid, context: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.node(i);
            let v = f(x[0], x[1]);
            if !v.is_finite() {
                return Err(CzError::NonFinite {
                    node: i,
                    x: x[..grid.dim()].to_vec(),
                    context: context.to_string(),
                });
            }
            values.push(C64::new(v, 0.0));
        }
        Ok(SampledFunction { grid, values })
    }

    /// Sample a complex-valued rule at every node.
    pub fn from_fn_complex(grid: Grid, context: &str, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.node(i);
            let v = f(x[0], x[1]);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(CzError::NonFinite {
                    node: i,
                    x: x[..grid.dim()].to_vec(),
                    context: context.to_string(),
                });
            }
            values.push(v);
        }
        Ok(SampledFunction { grid, values })
    }

    /// Trapezoidal quadrature of the integral: `sum(values) * h^d`.
    pub fn integrate(&self) -> C64 {
        let w = self.grid.spacing().powi(self.grid.dim() as i32);
        self.values.iter().sum::<C64>() * w
    }

    /// Bilinear pairing `<f,g> = integral f g` by grid quadrature.
    pub fn pair(&self, other: &SampledFunction) -> Result<C64> {
        if self.grid != other.grid {
            return Err(CzError::GridMismatch("pair over different grids".into()));
        }
        let w = self.grid.spacing().powi(self.grid.dim() as i32);
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<C64>()
            * w)
    }

    /// `L^2` norm by grid quadrature.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.spacing().powi(self.grid.dim() as i32);
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    /// `L^p` (quasi-)norm by grid quadrature; `p = inf` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let w = self.grid.spacing().powi(self.grid.dim() as i32);
        (self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }

    /// Moment `integral x^alpha f(x) dx` (d=1: alpha is the power of x;
    /// d=2: alpha = (a1, a2)).
    pub fn moment(&self, alpha: [u32; 2]) -> C64 {
        let w = self.grid.spacing().powi(self.grid.dim() as i32);
        let mut acc = C64::new(0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.node(i);
            let p = x[0].powi(alpha[0] as i32)
                * if self.grid.dim() == 2 {
                    x[1].powi(alpha[1] as i32)
                } else {
                    1.0
                };
            acc += v * p;
        }
        acc * w
    }

    /// Radius beyond which `|f|` stays below `tol * max|f|` (0 for the zero
    /// function).
    pub fn support_radius(&self, tol: f64) -> f64 {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        let mut r = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            if v.norm() > tol * max {
                let x = self.grid.node(i);
                let rr = match self.grid.dim() {
                    1 => x[0].abs(),
                    _ => (x[0] * x[0] + x[1] * x[1]).sqrt(),
                };
                r = r.max(rr);
            }
        }
        r
    }

    /// Periodic shift by an integer number of nodes per axis:
    /// output(x) = input(x - shift*h).
    pub fn shifted(&self, shift: [isize; 2]) -> SampledFunction {
        let n = self.grid.points_per_axis() as isize;
        let mut values = vec![C64::new(0.0, 0.0); self.values.len()];
        match self.grid.dim() {
            1 => {
                for j in 0..n {
                    let src = (j - shift[0]).rem_euclid(n) as usize;
                    values[j as usize] = self.values[src];
                }
            }
            _ => {
                for j0 in 0..n {
                    let s0 = (j0 - shift[0]).rem_euclid(n) as usize;
                    for j1 in 0..n {
                        let s1 = (j1 - shift[1]).rem_euclid(n) as usize;
                        values[(j0 * n + j1) as usize] = self.values[s0 * n as usize + s1];
                    }
                }
            }
        }
        SampledFunction {
            grid: self.grid,
            values,
        }
    }

    /// Reflection `x -> -x` (periodic index reversal).
    pub fn reflected(&self) -> SampledFunction {
        let n = self.grid.points_per_axis() as isize;
        let mut values = vec![C64::new(0.0, 0.0); self.values.len()];
        match self.grid.dim() {
            1 => {
                for j in 0..n {
                    let src = (-j).rem_euclid(n) as usize;
                    values[j as usize] = self.values[src];
                }
            }
            _ => {
                for j0 in 0..n {
                    let s0 = (-j0).rem_euclid(n) as usize;
                    for j1 in 0..n {
                        let s1 = (-j1).rem_euclid(n) as usize;
                        values[(j0 * n + j1) as usize] = self.values[s0 * n as usize + s1];
                    }
                }
            }
        }
        SampledFunction {
            grid: self.grid,
            values,
        }
    }

    pub fn scaled(&self, c: C64) -> SampledFunction {
        SampledFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &SampledFunction) -> Result<SampledFunction> {
        if self.grid != other.grid {
            return Err(CzError::GridMismatch("add over different grids".into()));
        }
        Ok(SampledFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<SampledFunction> {
        if self.grid != other.grid {
            return Err(CzError::GridMismatch("sub over different grids".into()));
        }
        Ok(SampledFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// A function of two scalar variables over the square of a 1-dimensional
/// grid — the carrier for tensor-variable analyzing functions.  Row-major:
/// `values[i*N + j] = f(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction2D {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl SampledFunction2D {
    pub fn zeros(grid: Grid) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(CzError::InvalidGrid(
                "SampledFunction2D requires a 1-dimensional base grid".into(),
            ));
        }
        Ok(SampledFunction2D {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len() * grid.len()],
        })
    }

    pub fn from_values(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(CzError::InvalidGrid(
                "SampledFunction2D requires a 1-dimensional base grid".into(),
            ));
        }
        if values.len() != grid.len() * grid.len() {
            return Err(CzError::GridMismatch(format!(
                "value vector length {} != N^2 = {}",
                values.len(),
                grid.len() * grid.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(CzError::NonFinite {
                    node: i,
                    x: vec![grid.coord(i / grid.len()), grid.coord(i % grid.len())],
                    context: "SampledFunction2D::from_values".into(),
                });
            }
        }
        Ok(SampledFunction2D { grid, values })
    }

    /// Outer product `f(x) g(y)`.
    pub fn outer(f: &SampledFunction, g: &SampledFunction) -> Result<Self> {
        if f.grid != g.grid {
            return Err(CzError::GridMismatch("outer over different grids".into()));
        }
        if f.grid.dim() != 1 {
            return Err(CzError::InvalidGrid("outer requires 1-dimensional factors".into()));
        }
        let n = f.grid.len();
        let mut values = Vec::with_capacity(n * n);
        for a in &f.values {
            for b in &g.values {
                values.push(a * b);
            }
        }
        Ok(SampledFunction2D {
            grid: f.grid,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.n() + j]
    }

    /// Quadrature of the double integral.
    pub fn integrate(&self) -> C64 {
        let w = self.grid.spacing().powi(2);
        self.values.iter().sum::<C64>() * w
    }

    /// Bilinear pairing over the square.
    pub fn pair(&self, other: &SampledFunction2D) -> Result<C64> {
        if self.grid != other.grid {
            return Err(CzError::GridMismatch("2D pair over different grids".into()));
        }
        let w = self.grid.spacing().powi(2);
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<C64>()
            * w)
    }

    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.spacing().powi(2);
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    /// Moment against `x^a y^b`.
    pub fn moment(&self, a: u32, b: u32) -> C64 {
        let n = self.n();
        let w = self.grid.spacing().powi(2);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let xa = self.grid.coord(i).powi(a as i32);
            for j in 0..n {
                acc += self.values[i * n + j] * (xa * self.grid.coord(j).powi(b as i32));
            }
        }
        acc * w
    }

    /// Moment in the second variable only: returns `x -> integral f(x,y) y^b dy`.
    pub fn moment_in_y(&self, b: u32) -> SampledFunction {
        let n = self.n();
        let h = self.grid.spacing();
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.values[i * n + j] * self.grid.coord(j).powi(b as i32);
            }
            values.push(acc * h);
        }
        SampledFunction {
            grid: self.grid,
            values,
        }
    }

    pub fn add_scaled(&mut self, other: &SampledFunction2D, c: C64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * c;
        }
    }

    /// Accumulate the outer product `c * f(x) g(y)` in place.
    pub fn accumulate_outer(&mut self, f: &SampledFunction, g: &SampledFunction, c: C64) {
        let n = self.n();
        for (i, a) in f.values.iter().enumerate() {
            let ca = c * a;
            let row = &mut self.values[i * n..(i + 1) * n];
            for (slot, b) in row.iter_mut().zip(&g.values) {
                *slot += ca * b;
            }
        }
    }
}

/// A point `z = (w, t)` of the affine group: position `w`, scale `t > 0`.
/// The second component of `w` is ignored when the ambient dimension is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePoint {
    pub w: [f64; 2],
    pub t: f64,
}

impl AffinePoint {
    pub fn new1(w: f64, t: f64) -> Self {
        AffinePoint { w: [w, 0.0], t }
    }

    pub fn new2(w: [f64; 2], t: f64) -> Self {
        AffinePoint { w, t }
    }
}

/// A truncated log-spaced discretization of the affine group over a [`Grid`]:
/// a strided spatial sub-lattice crossed with scales `t_j = t_min * rho^j`,
/// `j in [0, M)`, carrying the quadrature weight `(stride*h)^d * ln(rho)` per
/// cell for the invariant measure `dw dt/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineGrid {
    pub grid: Grid,
    pub stride: usize,
    pub t_min: f64,
    pub rho: f64,
    pub num_scales: usize,
}

impl AffineGrid {
    pub fn new(grid: Grid, stride: usize, t_min: f64, rho: f64, num_scales: usize) -> Result<Self> {
        if stride == 0 || grid.points_per_axis() % stride != 0 {
            return Err(CzError::InvalidGrid(format!(
                "stride {stride} must divide N = {}",
                grid.points_per_axis()
            )));
        }
        if t_min < 2.0 * grid.spacing() {
            return Err(CzError::ScaleBelowResolution {
                t: t_min,
                min: 2.0 * grid.spacing(),
            });
        }
        if !(rho > 1.0) {
            return Err(CzError::InvalidGrid(format!("scale ratio rho = {rho} must exceed 1")));
        }
        if num_scales == 0 {
            return Err(CzError::InvalidGrid("at least one scale required".into()));
        }
        Ok(AffineGrid {
            grid,
            stride,
            t_min,
            rho,
            num_scales,
        })
    }

    /// Convenience constructor covering `[t_min, t_max]` with `m` scales.
    pub fn spanning(grid: Grid, stride: usize, t_min: f64, t_max: f64, m: usize) -> Result<Self> {
        if !(t_max > t_min) {
            return Err(CzError::InvalidGrid(format!(
                "scale interval [{t_min}, {t_max}] is empty"
            )));
        }
        if m < 2 {
            return Err(CzError::InvalidGrid("need at least two scales to span an interval".into()));
        }
        let rho = (t_max / t_min).powf(1.0 / (m as f64 - 1.0));
        AffineGrid::new(grid, stride, t_min, rho, m)
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.t_min * self.rho.powi(j as i32)
    }

    pub fn t_max(&self) -> f64 {
        self.scale(self.num_scales - 1)
    }

    /// Number of spatial nodes per scale, `(N/stride)^d`.
    pub fn num_spatial(&self) -> usize {
        (self.grid.points_per_axis() / self.stride).pow(self.grid.dim() as u32)
    }

    pub fn num_cells(&self) -> usize {
        self.num_scales * self.num_spatial()
    }

    /// Position of spatial node `i` (strided).
    pub fn spatial_node(&self, i: usize) -> [f64; 2] {
        let k = self.grid.points_per_axis() / self.stride;
        match self.grid.dim() {
            1 => [self.grid.coord(i * self.stride), 0.0],
            _ => [
                self.grid.coord((i / k) * self.stride),
                self.grid.coord((i % k) * self.stride),
            ],
        }
    }

    /// The affine point at cell (scale j, spatial i).
    pub fn point(&self, j: usize, i: usize) -> AffinePoint {
        AffinePoint {
            w: self.spatial_node(i),
            t: self.scale(j),
        }
    }

    /// Quadrature weight of one cell: `(stride*h)^d * ln(rho)`.
    pub fn cell_weight(&self) -> f64 {
        (self.stride as f64 * self.grid.spacing()).powi(self.grid.dim() as i32) * self.rho.ln()
    }

    /// Refine the scale grid `rho -> sqrt(rho)`, doubling the scale count
    /// (minus one) over the same interval.
    pub fn refined_scales(&self) -> AffineGrid {
        AffineGrid {
            grid: self.grid,
            stride: self.stride,
            t_min: self.t_min,
            rho: self.rho.sqrt(),
            num_scales: 2 * self.num_scales - 1,
        }
    }
}

/// Quadrature of `integral f(z) dmu(z)` over the cells of an [`AffineGrid`];
/// `values` is indexed cell-major: `values[j * num_spatial + i]`.
pub fn mu_integrate(ag: &AffineGrid, values: &[C64]) -> C64 {
    assert_eq!(values.len(), ag.num_cells(), "cell count mismatch");
    values.iter().sum::<C64>() * ag.cell_weight()
}

/// Apply the Fourier multiplier `m(xi)` to `f`:
/// `output = F^{-1}[ m(xi) hat(f)(xi) ]`.
///
/// `m` receives the signed frequency vector (second entry 0 when d=1).
/// When the multiplier is singular at `xi = 0`, pass its value there through
/// `at_zero`; the input is then required to have negligible mean
/// (`|hat f(0)| <= 1e-8 * ||f||_1`-scale), otherwise the call is rejected.
pub fn spectral_multiplier(
    f: &SampledFunction,
    m: impl Fn(&[f64; 2]) -> C64,
    at_zero: Option<C64>,
) -> Result<SampledFunction> {
    let mut hat = fft::forward_phys(&f.grid, &f.values);
    if let Some(v0) = at_zero {
        let mass = hat[0].norm();
        let scale = f
            .values
            .iter()
            .map(|v| v.norm())
            .sum::<f64>()
            * f.grid.spacing().powi(f.grid.dim() as i32);
        if mass > 1e-8 * scale.max(1e-300) {
            return Err(CzError::SingularMultiplier { mass });
        }
        hat[0] *= v0;
        apply_multiplier_skip_zero(&f.grid, &mut hat, &m);
    } else {
        hat[0] *= m(&[0.0, 0.0]);
        apply_multiplier_skip_zero(&f.grid, &mut hat, &m);
    }
    let values = fft::inverse_phys(&f.grid, &hat);
    SampledFunction::from_values(f.grid, values)
}

fn apply_multiplier_skip_zero(grid: &Grid, hat: &mut [C64], m: &impl Fn(&[f64; 2]) -> C64) {
    let n = grid.points_per_axis();
    match grid.dim() {
        1 => {
            for (k, v) in hat.iter_mut().enumerate().skip(1) {
                *v *= m(&[grid.freq(k), 0.0]);
            }
        }
        _ => {
            for k0 in 0..n {
                for k1 in 0..n {
                    if k0 == 0 && k1 == 0 {
                        continue;
                    }
                    hat[k0 * n + k1] *= m(&[grid.freq(k0), grid.freq(k1)]);
                }
            }
        }
    }
}

/// Spectral derivative `d^order/dx^order` (d=1), multiplier `(i xi)^order`.
pub fn derivative(f: &SampledFunction, order: u32) -> Result<SampledFunction> {
    spectral_multiplier(
        f,
        |xi| C64::new(0.0, xi[0]).powu(order),
        None,
    )
}

/// Laplacian iterated `order` times (any dimension), multiplier `(-|xi|^2)^order`.
pub fn laplacian(f: &SampledFunction, order: u32) -> Result<SampledFunction> {
    spectral_multiplier(
        f,
        |xi| C64::new(-(xi[0] * xi[0] + xi[1] * xi[1]), 0.0).powu(order),
        None,
    )
}

/// Periodic convolution scaled by `h^d`, approximating `integral f(y) g(x-y) dy`.
pub fn convolve(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    if f.grid != g.grid {
        return Err(CzError::GridMismatch("convolve over different grids".into()));
    }
    let fh = fft::forward_phys(&f.grid, &f.values);
    let gh = fft::forward_phys(&g.grid, &g.values);
    let prod: Vec<C64> = fh.iter().zip(&gh).map(|(a, b)| a * b).collect();
    let values = fft::inverse_phys(&f.grid, &prod);
    SampledFunction::from_values(f.grid, values)
}
