//! FFT plumbing for the physical-convention transform pair, and band-limited
//! evaluation of Fourier transforms at arbitrary frequencies (`HatTable`).
//!
//! With nodes `x_j = -L + j h` and frequencies `xi_k = pi*k/L` (signed `k`),
//! `e^{-i x_j xi_k} = (-1)^k e^{-2 pi i j k / N}`, so the physical transform
//! is a phase-twisted DFT:
//!
//! `hat(f)[k] = h * (-1)^k * DFT(f)[k]`,  `f[j] = (1/h) * IDFT[(-1)^k hat[k]][j]`.

use crate::error::Result;
use crate::grid::{Grid, SampledFunction};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn rustfft::Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn fft_rows(data: &mut [C64], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
}

fn transpose(data: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = data[i * n + j];
        }
    }
    out
}

/// Raw DFT (d = 1 or 2 depending on the grid), unnormalized, no phase twist.
fn dft(grid: &Grid, values: &[C64], inverse: bool) -> Vec<C64> {
    let n = grid.points_per_axis();
    let mut data = values.to_vec();
    match grid.dim() {
        1 => {
            fft_rows(&mut data, n, inverse);
            data
        }
        _ => {
            fft_rows(&mut data, n, inverse);
            let mut t = transpose(&data, n);
            fft_rows(&mut t, n, inverse);
            transpose(&t, n)
        }
    }
}

fn twist_sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Physical-convention forward transform: `hat(f)(xi_k)` laid out in FFT
/// bin order.
pub fn forward_phys(grid: &Grid, values: &[C64]) -> Vec<C64> {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let mut out = dft(grid, values, false);
    match grid.dim() {
        1 => {
            for (k, v) in out.iter_mut().enumerate() {
                *v *= h * twist_sign(k);
            }
        }
        _ => {
            let h2 = h * h;
            for k0 in 0..n {
                for k1 in 0..n {
                    out[k0 * n + k1] *= h2 * twist_sign(k0 + k1);
                }
            }
        }
    }
    out
}

/// Physical-convention inverse transform.
pub fn inverse_phys(grid: &Grid, hat: &[C64]) -> Vec<C64> {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let mut data = hat.to_vec();
    match grid.dim() {
        1 => {
            for (k, v) in data.iter_mut().enumerate() {
                *v *= twist_sign(k);
            }
            let mut out = dft(grid, &data, true);
            let c = 1.0 / (h * n as f64);
            for v in out.iter_mut() {
                *v *= c;
            }
            out
        }
        _ => {
            for k0 in 0..n {
                for k1 in 0..n {
                    data[k0 * n + k1] *= twist_sign(k0 + k1);
                }
            }
            let mut out = dft(grid, &data, true);
            let c = 1.0 / (h * h * (n * n) as f64);
            for v in out.iter_mut() {
                *v *= c;
            }
            out
        }
    }
}

/// Band-limited representation of the Fourier transform of a decaying grid
/// function: the function is embedded in a zero-padded copy of its grid
/// (`pad` times wider), transformed once, and the resulting fine table is
/// interpolated with an 8-point Lagrange stencil to evaluate `hat(f)` at
/// arbitrary frequencies.  Frequencies beyond the table range evaluate to 0.
///
/// For a function supported in radius `r`, samples of its transform at
/// spacing `pi/(pad*L) << pi/r` determine it; the 8-point stencil keeps the
/// interpolation error near machine precision for the smooth transforms that
/// arise here.
#[derive(Debug, Clone)]
pub struct HatTable {
    dim: usize,
    n_pad: usize,
    /// frequency spacing of the table, `pi/(pad*L)`
    dxi: f64,
    /// table in signed-index order is accessed through `entry()`
    table: Vec<C64>,
    /// largest signed index usable by the interpolation stencil
    max_index: isize,
}

impl HatTable {
    /// Build the table from a sampled function; `pad >= 2`.
    pub fn new(f: &SampledFunction, pad: usize) -> Result<Self> {
        assert!(pad >= 2, "pad factor must be at least 2");
        let d = f.grid.dim();
        let n = f.grid.points_per_axis();
        let n_pad = n * pad;
        let l_pad = f.grid.half_width() * pad as f64;
        let pgrid = Grid::new(d, l_pad, n_pad)?;
        // embed: node x_i = -L + i h of the source sits at index
        // i + (pad-1)*N/2 of the padded grid (same spacing).
        let off = (pad - 1) * n / 2;
        let mut padded = vec![C64::new(0.0, 0.0); pgrid.len()];
        match d {
            1 => {
                for i in 0..n {
                    padded[i + off] = f.values[i];
                }
            }
            _ => {
                for i0 in 0..n {
                    for i1 in 0..n {
                        padded[(i0 + off) * n_pad + (i1 + off)] = f.values[i0 * n + i1];
                    }
                }
            }
        }
        let table = forward_phys(&pgrid, &padded);
        Ok(HatTable {
            dim: d,
            n_pad,
            dxi: std::f64::consts::PI / l_pad,
            table,
            max_index: n_pad as isize / 2 - 1,
        })
    }

    /// Table entry at signed index (0 outside the stored range).
    fn entry(&self, m: &[isize; 2]) -> C64 {
        let half = self.n_pad as isize / 2;
        for &mi in &m[..self.dim] {
            if mi < -half || mi >= half {
                return C64::new(0.0, 0.0);
            }
        }
        match self.dim {
            1 => {
                let k = m[0].rem_euclid(self.n_pad as isize) as usize;
                self.table[k]
            }
            _ => {
                let k0 = m[0].rem_euclid(self.n_pad as isize) as usize;
                let k1 = m[1].rem_euclid(self.n_pad as isize) as usize;
                self.table[k0 * self.n_pad + k1]
            }
        }
    }

    fn lagrange_weights(frac: f64) -> [f64; 8] {
        // nodes at offsets -3..4 relative to the base index; `frac in [0,1)`
        let mut w = [0.0f64; 8];
        for (j, wj) in w.iter_mut().enumerate() {
            let xj = j as f64 - 3.0;
            let mut num = 1.0;
            let mut den = 1.0;
            for k in 0..8 {
                if k == j {
                    continue;
                }
                let xk = k as f64 - 3.0;
                num *= frac - xk;
                den *= xj - xk;
            }
            *wj = num / den;
        }
        w
    }

    fn eval_axis(xi: f64, dxi: f64) -> (isize, [f64; 8], bool) {
        let m = xi / dxi;
        let base = m.floor() as isize;
        let frac = m - base as f64;
        if frac.abs() < 1e-12 {
            return (base, [0.0; 8], true); // exact node hit
        }
        (base, Self::lagrange_weights(frac), false)
    }

    /// Evaluate `hat(f)` at the frequency vector `xi` (second entry ignored
    /// when the source was 1-dimensional).
    pub fn eval(&self, xi: &[f64; 2]) -> C64 {
        match self.dim {
            1 => {
                let (base, w, exact) = Self::eval_axis(xi[0], self.dxi);
                if exact {
                    return self.entry(&[base, 0]);
                }
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..8 {
                    acc += self.entry(&[base + j as isize - 3, 0]) * w[j];
                }
                acc
            }
            _ => {
                let (b0, w0, e0) = Self::eval_axis(xi[0], self.dxi);
                let (b1, w1, e1) = Self::eval_axis(xi[1], self.dxi);
                match (e0, e1) {
                    (true, true) => self.entry(&[b0, b1]),
                    (true, false) => {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..8 {
                            acc += self.entry(&[b0, b1 + j as isize - 3]) * w1[j];
                        }
                        acc
                    }
                    (false, true) => {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..8 {
                            acc += self.entry(&[b0 + j as isize - 3, b1]) * w0[j];
                        }
                        acc
                    }
                    (false, false) => {
                        let mut acc = C64::new(0.0, 0.0);
                        for i in 0..8 {
                            let mut row = C64::new(0.0, 0.0);
                            for j in 0..8 {
                                row += self.entry(&[b0 + i as isize - 3, b1 + j as isize - 3])
                                    * w1[j];
                            }
                            acc += row * w0[i];
                        }
                        acc
                    }
                }
            }
        }
    }

    /// Largest frequency representable in the table.
    pub fn max_freq(&self) -> f64 {
        self.max_index as f64 * self.dxi
    }

    /// Render the translate-dilate `t^{-d} f((x - w)/t)` (whose transform is
    /// `e^{-i w xi} hat(f)(t xi)`) as a band-limited projection onto `target`.
    pub fn render(&self, target: &Grid, w: &[f64; 2], t: f64) -> Result<SampledFunction> {
        assert_eq!(target.dim(), self.dim, "dimension mismatch in render");
        let n = target.points_per_axis();
        let mut hat = vec![C64::new(0.0, 0.0); target.len()];
        match self.dim {
            1 => {
                for (k, slot) in hat.iter_mut().enumerate() {
                    let xi = target.freq(k);
                    let v = self.eval(&[t * xi, 0.0]);
                    if v.norm_sqr() != 0.0 {
                        *slot = v * C64::from_polar(1.0, -w[0] * xi);
                    }
                }
            }
            _ => {
                for k0 in 0..n {
                    let xi0 = target.freq(k0);
                    for k1 in 0..n {
                        let xi1 = target.freq(k1);
                        let v = self.eval(&[t * xi0, t * xi1]);
                        if v.norm_sqr() != 0.0 {
                            hat[k0 * n + k1] = v * C64::from_polar(1.0, -(w[0] * xi0 + w[1] * xi1));
                        }
                    }
                }
            }
        }
        let values = inverse_phys(target, &hat);
        SampledFunction::from_values(*target, values)
    }
}
