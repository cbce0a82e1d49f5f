//! Multilinear Muckenhoupt weight vectors and their characteristics,
//! weighted fractional Sobolev norms, fractional Leibniz-rule inequality
//! checks, and the annulus-decay experiment probing the sharpness of the
//! sparse exponent constraint.
//!
//! Exponent tuples live on the extended simplex `sum_j 1/p_j = 1` with
//! `1/p_j` in `[-1/2, 1]`; the pairing-side Lebesgue exponent is the dual
//! `p = p3/(p3 - 1)` and may drop below 1 (quasi-norms are computed
//! literally).

use crate::error::{CzError, Result};
use crate::fft;
use crate::grid::{derivative, spectral_multiplier, Grid, SampledFunction};
use crate::sparse::{DyadicCube, DyadicFamily};
use num_complex::Complex64 as C64;
use serde::Serialize;

// --- exponent tuples -------------------------------------------------------

/// A Hölder tuple `(p1, p2, p3)` on the extended simplex together with an
/// auxiliary integrability tuple `(r1, r2, r3)` controlling the local-norm
/// exponents `eps_j = p_j r_j / (p_j - r_j)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentTuple {
    pub p: [f64; 3],
    pub r: [f64; 3],
}

fn reciprocal(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

impl ExponentTuple {
    /// Validate simplex membership (`sum 1/p_j = 1`, each `1/p_j` in
    /// `[-1/2, 1]`) and the compatibility `r < p` slotwise (`eps_j > 0`).
    pub fn new(p: [f64; 3], r: [f64; 3]) -> Result<Self> {
        let alphas: Vec<f64> = p.iter().map(|&pj| reciprocal(pj)).collect();
        let total: f64 = alphas.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CzError::Constraint(format!(
                "exponent reciprocals sum to {total}, not 1"
            )));
        }
        if alphas.iter().any(|&a| !(-0.5..=1.0).contains(&a)) {
            return Err(CzError::Constraint(
                "exponent reciprocals must lie in [-1/2, 1]".into(),
            ));
        }
        if r.iter().any(|&rj| rj < 1.0 || rj.is_infinite()) {
            return Err(CzError::Constraint(
                "auxiliary exponents must lie in [1, infinity)".into(),
            ));
        }
        let tuple = ExponentTuple { p, r };
        for j in 0..3 {
            if tuple.epsilon(j) <= 0.0 {
                return Err(CzError::Constraint(format!(
                    "slot {} violates r < p: p = {}, r = {}",
                    j + 1,
                    p[j],
                    r[j]
                )));
            }
        }
        Ok(tuple)
    }

    /// Fill in `p3` from `1/p3 = 1 - 1/p1 - 1/p2` with `r = (1, 1, 1)`.
    pub fn holder_tuple(p1: f64, p2: f64) -> Result<Self> {
        let a3 = 1.0 - reciprocal(p1) - reciprocal(p2);
        let p3 = if a3 == 0.0 { f64::INFINITY } else { 1.0 / a3 };
        Self::new([p1, p2, p3], [1.0, 1.0, 1.0])
    }

    /// Replace the auxiliary tuple, revalidating compatibility.
    pub fn with_r(&self, r: [f64; 3]) -> Result<Self> {
        Self::new(self.p, r)
    }

    /// Local-norm exponent `eps_j = p_j r_j / (p_j - r_j)`; `r_j` when
    /// `p_j` is infinite, `infinity` when `p_j = r_j`.
    pub fn epsilon(&self, j: usize) -> f64 {
        let (p, r) = (self.p[j], self.r[j]);
        if p.is_infinite() {
            r
        } else if p == r {
            f64::INFINITY
        } else {
            p * r / (p - r)
        }
    }

    /// The pairing-side Lebesgue exponent `p = p3 / (p3 - 1)`.
    pub fn dual(&self) -> f64 {
        if self.p[2].is_infinite() {
            1.0
        } else {
            self.p[2] / (self.p[2] - 1.0)
        }
    }

    /// Membership in the restricted class: `1 < min(p1, p2) < infinity`.
    pub fn in_p_circ(&self) -> bool {
        let m = self.p[0].min(self.p[1]);
        m > 1.0 && m.is_finite()
    }
}

// --- weight vectors --------------------------------------------------------

/// A triple of positive weights multiplying to one at every node.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub v: [SampledFunction; 3],
}

impl WeightVector {
    pub fn new(v: [SampledFunction; 3]) -> Result<Self> {
        let grid = v[0].grid;
        if v.iter().any(|w| w.grid != grid) {
            return Err(CzError::GridMismatch(
                "weight components on different grids".into(),
            ));
        }
        for (j, w) in v.iter().enumerate() {
            if w.values.iter().any(|x| x.re <= 0.0 || x.im != 0.0) {
                return Err(CzError::Constraint(format!(
                    "weight component {} must be strictly positive",
                    j + 1
                )));
            }
        }
        for i in 0..grid.len() {
            let prod: f64 = v.iter().map(|w| w.values[i].re).product();
            if (prod - 1.0).abs() > 1e-10 {
                return Err(CzError::Constraint(format!(
                    "weight product at node {i} is {prod}, not 1"
                )));
            }
        }
        Ok(WeightVector { v })
    }

    /// The trivial vector `(1, 1, 1)`.
    pub fn ones(grid: Grid) -> Self {
        let one = SampledFunction::from_fn(grid, "unit weight", |_, _| 1.0).unwrap();
        WeightVector {
            v: [one.clone(), one.clone(), one],
        }
    }

    /// Power-weight vector `(|x|^a, |x|^{-a}, 1)` with the origin
    /// regularized to one grid spacing.
    pub fn power(grid: Grid, a: f64) -> Result<Self> {
        let h = grid.spacing();
        let v1 = SampledFunction::from_fn(grid, "power weight", move |x, _| {
            x.abs().max(h).powf(a)
        })?;
        let v2 = SampledFunction::from_fn(grid, "power weight", move |x, _| {
            x.abs().max(h).powf(-a)
        })?;
        let v3 = SampledFunction::from_fn(grid, "unit weight", |_, _| 1.0)?;
        Self::new([v1, v2, v3])
    }

    /// The dual weight `1 / v3` weighting the output side.
    pub fn dual_weight(&self) -> SampledFunction {
        let values = self.v[2]
            .values
            .iter()
            .map(|x| C64::new(1.0 / x.re, 0.0))
            .collect();
        SampledFunction::from_values(self.v[2].grid, values).expect("reciprocal of positive weight")
    }
}

// --- characteristics -------------------------------------------------------

/// Normalized local norm `( |Q|^{-1} int_Q g^eps )^{1/eps}` over a cube's
/// nodes; the essential supremum when `eps` is infinite.
fn local_norm(values: &[f64], q: &DyadicCube, grid: &Grid, eps: f64) -> f64 {
    let range = q.node_range(grid);
    if range.is_empty() {
        return 0.0;
    }
    if eps.is_infinite() {
        return values[range].iter().cloned().fold(0.0, f64::max);
    }
    let mean = values[range.clone()]
        .iter()
        .map(|&x| x.powf(eps))
        .sum::<f64>()
        / range.len() as f64;
    mean.powf(1.0 / eps)
}

/// Muckenhoupt characteristic `sup_Q prod_j <1/v_j>_{eps_j, Q}` over the
/// dyadic family, with `eps_j` derived from the exponent tuple.  The choice
/// `r = (1, 1, 1)` gives the plain multilinear characteristic.
pub fn ap_characteristic(
    v: &WeightVector,
    e: &ExponentTuple,
    family: &DyadicFamily,
) -> Result<f64> {
    let grid = v.v[0].grid;
    if grid != family.grid {
        return Err(CzError::GridMismatch(
            "weight vector and cube family on different grids".into(),
        ));
    }
    let recips: Vec<Vec<f64>> = v
        .v
        .iter()
        .map(|w| w.values.iter().map(|x| 1.0 / x.re).collect())
        .collect();
    let mut best = 0.0f64;
    for q in family.cubes() {
        let prod: f64 = (0..3)
            .map(|j| local_norm(&recips[j], &q, &grid, e.epsilon(j)))
            .product();
        best = best.max(prod);
    }
    Ok(best)
}

// --- weighted Sobolev norms ------------------------------------------------

/// Weighted `L^q` quadrature norm `|| f v ||_q`; quasi-norms (`q < 1`)
/// computed literally, `q = infinity` as the sup.
fn weighted_lq(f: &SampledFunction, v: &SampledFunction, q: f64) -> f64 {
    if q.is_infinite() {
        return f
            .values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| a.norm() * b.re)
            .fold(0.0, f64::max);
    }
    let h = f.grid.spacing();
    (f.values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| (a.norm() * b.re).powf(q))
        .sum::<f64>()
        * h)
        .powf(1.0 / q)
}

/// Fractional derivative `D^sigma`, the radial multiplier `|xi|^sigma`
/// (which is the identity at `sigma = 0` and kills the mean for
/// `sigma > 0`).
pub fn fractional_derivative(f: &SampledFunction, sigma: f64) -> Result<SampledFunction> {
    spectral_multiplier(f, |xi| C64::new(xi[0].abs().powf(sigma), 0.0), None)
}

/// The two flavors of the weighted Sobolev norm: the homogeneous part is
/// the `D^sigma` term alone, the inhomogeneous norm is the literal sum
/// `||(D^sigma f) v||_q + sum_{k=0}^{floor(sigma)} ||(D^k f) v||_q`.
#[derive(Debug, Clone, Serialize)]
pub struct SobolevNorm {
    pub inhomogeneous: f64,
    pub homogeneous: f64,
}

pub fn weighted_sobolev_norm(
    f: &SampledFunction,
    sigma: f64,
    q: f64,
    v: &SampledFunction,
) -> Result<SobolevNorm> {
    if sigma < 0.0 {
        return Err(CzError::Constraint("smoothness must be nonnegative".into()));
    }
    if !(q > 0.0) {
        return Err(CzError::Constraint("integrability must be positive".into()));
    }
    let homogeneous = weighted_lq(&fractional_derivative(f, sigma)?, v, q);
    let mut inhomogeneous = homogeneous;
    for k in 0..=(sigma.floor() as u32) {
        inhomogeneous += weighted_lq(&derivative(f, k)?, v, q);
    }
    Ok(SobolevNorm {
        inhomogeneous,
        homogeneous,
    })
}

// --- Leibniz-rule checks ---------------------------------------------------

/// The bilinear operation whose output is differentiated on the left-hand
/// side of the Leibniz inequality.
pub enum BilinearOp {
    /// `T(f, g) = f g`.
    PointwiseProduct,
    /// A smooth bilinear multiplier applied spectrally.
    Multiplier(Box<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl BilinearOp {
    fn apply(&self, f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
        let grid = f.grid;
        if g.grid != grid {
            return Err(CzError::GridMismatch(
                "bilinear operation over different grids".into(),
            ));
        }
        match self {
            BilinearOp::PointwiseProduct => {
                let values = f
                    .values
                    .iter()
                    .zip(&g.values)
                    .map(|(a, b)| a * b)
                    .collect();
                SampledFunction::from_values(grid, values)
            }
            BilinearOp::Multiplier(m) => {
                let fh = fft::forward_phys(&grid, &f.values);
                let gh = fft::forward_phys(&grid, &g.values);
                let n = grid.points_per_axis();
                let mut out_hat = vec![C64::new(0.0, 0.0); n];
                for (k1, fv) in fh.iter().enumerate() {
                    if fv.norm() == 0.0 {
                        continue;
                    }
                    let xi1 = grid.freq(k1);
                    for (k2, gv) in gh.iter().enumerate() {
                        let xi2 = grid.freq(k2);
                        out_hat[(k1 + k2) % n] += m(xi1, xi2) * fv * gv;
                    }
                }
                let scale = 1.0 / (2.0 * grid.half_width());
                let values = fft::inverse_phys(&grid, &out_hat)
                    .into_iter()
                    .map(|x| x * scale)
                    .collect();
                SampledFunction::from_values(grid, values)
            }
        }
    }
}

/// Outcome of one Leibniz-inequality measurement: the weighted output norm,
/// the two weighted Sobolev input norms, and their ratio.
#[derive(Debug, Clone, Serialize)]
pub struct LeibnizReport {
    pub ratio: f64,
    pub lhs: f64,
    pub f_norm: f64,
    pub g_norm: f64,
    pub sigma: f64,
    pub lebesgue_exponent: f64,
    pub exponents: [f64; 3],
    pub auxiliary: [f64; 3],
    pub degenerate: bool,
}

/// Measure the fractional Leibniz inequality
/// `|| D^sigma T(f, g) / v3 ||_p <= C ||f||_{W^{sigma,p1}(v1)}
/// ||g||_{W^{sigma,p2}(v2)}` and report the empirical ratio.
///
/// Exponent regime: the tuple must satisfy `1 < min(p1, p2) < infinity`;
/// for fractional smoothness below the dimension the auxiliary exponents
/// must satisfy `1/r1 + 1/r2 < (sigma + d)/d` strictly.
pub fn leibniz_check(
    f: &SampledFunction,
    g: &SampledFunction,
    sigma: f64,
    e: &ExponentTuple,
    v: &WeightVector,
    op: &BilinearOp,
) -> Result<LeibnizReport> {
    let d = f.grid.dim() as f64;
    if !e.in_p_circ() {
        return Err(CzError::Constraint(
            "exponents violate 1 < min{p1, p2} < infinity".into(),
        ));
    }
    if sigma < d && sigma.fract() != 0.0 {
        let lhs = 1.0 / e.r[0] + 1.0 / e.r[1];
        let rhs = (sigma + d) / d;
        if lhs >= rhs {
            return Err(CzError::Constraint(format!(
                "auxiliary exponents violate 1/r1 + 1/r2 < (sigma + d)/d: {lhs} >= {rhs}"
            )));
        }
    }
    let p = e.dual();
    let out = op.apply(f, g)?;
    let lhs = weighted_lq(&fractional_derivative(&out, sigma)?, &v.dual_weight(), p);
    let f_norm = weighted_sobolev_norm(f, sigma, e.p[0], &v.v[0])?.inhomogeneous;
    let g_norm = weighted_sobolev_norm(g, sigma, e.p[1], &v.v[1])?.inhomogeneous;
    let rhs = f_norm * g_norm;
    let degenerate = rhs == 0.0;
    Ok(LeibnizReport {
        ratio: if degenerate { 0.0 } else { lhs / rhs },
        lhs,
        f_norm,
        g_norm,
        sigma,
        lebesgue_exponent: p,
        exponents: e.p,
        auxiliary: e.r,
        degenerate,
    })
}

// --- annulus-decay sharpness experiment ------------------------------------

/// Result of the annulus-decay experiment: base-2 slope of the pairing
/// `|<D^sigma(f conj(f)), g_k>|` against `k`, the analytic decay target
/// `-sigma`, and the slope a sparse `(r1, r2, .)` bound would impose.
#[derive(Debug, Clone, Serialize)]
pub struct SharpnessReport {
    pub sigma: f64,
    pub r: [f64; 2],
    pub k_values: Vec<i32>,
    pub pairings: Vec<f64>,
    pub fitted_slope: f64,
    pub decay_target: f64,
    pub sparse_side_slope: f64,
    /// Whether the hypothetical sparse bound is consistent with the
    /// measured decay; `false` means the decay forces
    /// `d (1/r1 + 1/r2) <= d + sigma`.
    pub sparse_bound_consistent: bool,
}

/// Build a modulated wave whose envelope has smooth, compactly supported
/// spectrum, and measure the pairing of `D^sigma |envelope|^2` against the
/// dyadic annulus indicators `g_k = 1_{B(0, 2^{k+1})} - 1_{B(0, 2^k)}`.
pub fn sharpness_experiment(
    grid: Grid,
    sigma: f64,
    k_values: &[i32],
    r1: f64,
    r2: f64,
) -> Result<SharpnessReport> {
    if grid.dim() != 1 {
        return Err(CzError::Constraint(
            "the annulus experiment runs on a 1-dimensional grid".into(),
        ));
    }
    if k_values.len() < 4 {
        return Err(CzError::InsufficientSamples(format!(
            "need at least 4 annuli, got {}",
            k_values.len()
        )));
    }
    let k_max = *k_values.iter().max().unwrap();
    let l = grid.half_width();
    if 2f64.powi(k_max + 1) > l / 2.0 {
        return Err(CzError::Constraint(format!(
            "outermost annulus radius {} exceeds half the domain radius {}",
            2f64.powi(k_max + 1),
            l / 2.0
        )));
    }
    // envelope with spectrum in a smooth bump of radius 0.9
    let n = grid.points_per_axis();
    let mut hat = vec![C64::new(0.0, 0.0); n];
    for (k, slot) in hat.iter_mut().enumerate() {
        let u = grid.freq(k) / 0.9;
        if u.abs() < 1.0 {
            *slot = C64::new((1.0 - 1.0 / (1.0 - u * u)).exp(), 0.0);
        }
    }
    let phi = SampledFunction::from_values(grid, fft::inverse_phys(&grid, &hat))?;
    // modulate by the grid frequency nearest 10 so the wave keeps compact
    // spectrum; the modulus square below is modulation-invariant
    let m = (10.0 * l / std::f64::consts::PI).round();
    let xi_m = m * std::f64::consts::PI / l;
    if xi_m + 1.0 >= grid.nyquist() {
        return Err(CzError::Constraint(
            "grid too coarse to carry the modulated wave".into(),
        ));
    }
    let wave_sq = SampledFunction::from_values(
        grid,
        (0..n)
            .map(|j| {
                let x = grid.coord(j);
                let f = phi.values[j] * C64::new(0.0, xi_m * x).exp();
                C64::new(f.norm_sqr(), 0.0)
            })
            .collect(),
    )?;
    let dsf = fractional_derivative(&wave_sq, sigma)?;
    let h = grid.spacing();
    let pairings: Vec<f64> = k_values
        .iter()
        .map(|&k| {
            let (inner, outer) = (2f64.powi(k), 2f64.powi(k + 1));
            dsf.values
                .iter()
                .enumerate()
                .filter(|(j, _)| {
                    let ax = grid.coord(*j).abs();
                    ax > inner && ax <= outer
                })
                .map(|(_, v)| v)
                .sum::<C64>()
                .norm()
                * h
        })
        .collect();
    if pairings.iter().any(|&p| p <= 0.0) {
        return Err(CzError::Degenerate(
            "an annulus pairing vanished; the envelope does not reach it".into(),
        ));
    }
    // least-squares slope of log2(pairing) against k
    let xs: Vec<f64> = k_values.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = pairings.iter().map(|&p| p.log2()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let fitted_slope = cov / var;
    let d = 1.0;
    let sparse_side_slope = d - d / r1 - d / r2;
    Ok(SharpnessReport {
        sigma,
        r: [r1, r2],
        k_values: k_values.to_vec(),
        pairings,
        fitted_slope,
        decay_target: -sigma,
        sparse_side_slope,
        sparse_bound_consistent: sparse_side_slope >= fitted_slope - 0.1,
    })
}
