//! Trilinear forms over the affine group: wavelet forms, paraproducts,
//! intrinsic (dictionary-maximal) forms, and the five-parameter symbol with
//! its decay certificate.
//!
//! All pairings are bilinear (`<f, g> = int f g`, no conjugation) and all
//! affine actions use the `L^1`-normalized convention
//! `f_z(x) = t^{-d} f((x - w)/t)` for `z = (w, t)`, matching the rest of the
//! crate.  This module works in dimension 1.

use crate::error::{CzError, Result};
use crate::fft::{self, HatTable};
use crate::grid::{
    mu_integrate, spectral_multiplier, AffineGrid, AffinePoint, Grid, SampledFunction,
    SampledFunction2D,
};
use crate::wavelet::{GammaFamily, MotherWavelet, WaveletDictionary};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// How a trilinear rule `Lambda(f, g, h)` is evaluated.
#[derive(Clone)]
pub enum FormRule {
    /// `Lambda(f, g, h) = int f(x) g(x) h(x) dx`.
    PointwiseProduct,
    /// A bilinear Fourier multiplier `m(xi_1, xi_2)`:
    /// `Lambda = <T_m(f, g), h>` evaluated spectrally on the periodic grid.
    SmoothMultiplier(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
    /// A paraproduct rule with fixed symbol and families.
    Paraproduct(Arc<ParaproductRule>),
    /// A wavelet-form rule built from a two-variable analyzing family.
    WaveletForm(Arc<WaveletFormRule>),
}

/// Data for a paraproduct evaluation rule.
pub struct ParaproductRule {
    pub b: SampledFunction,
    pub gamma: (u32, u32),
    pub fams: (GammaFamily, GammaFamily),
    pub phi: MotherWavelet,
    pub ag: AffineGrid,
}

/// Data for a wavelet-form evaluation rule: the analyzing family `nu_z`
/// indexed by affine points, and the synthesis mother wavelet.
pub struct WaveletFormRule {
    pub nu: Box<dyn Fn(AffinePoint) -> Result<SampledFunction2D> + Send + Sync>,
    pub phi: MotherWavelet,
    pub ag: AffineGrid,
}

/// A trilinear rule together with the grid its arguments live on and a
/// catalog tag for reports.
#[derive(Clone)]
pub struct FormEvaluator {
    pub grid: Grid,
    pub tag: String,
    pub rule: FormRule,
}

impl FormEvaluator {
    pub fn pointwise_product(grid: Grid) -> Self {
        FormEvaluator {
            grid,
            tag: "pointwise-product".into(),
            rule: FormRule::PointwiseProduct,
        }
    }

    pub fn smooth_multiplier(
        grid: Grid,
        tag: &str,
        m: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    ) -> Self {
        FormEvaluator {
            grid,
            tag: format!("smooth-multiplier({tag})"),
            rule: FormRule::SmoothMultiplier(m),
        }
    }

    pub fn paraproduct(grid: Grid, rule: ParaproductRule) -> Self {
        FormEvaluator {
            grid,
            tag: format!("paraproduct(gamma = {:?})", rule.gamma),
            rule: FormRule::Paraproduct(Arc::new(rule)),
        }
    }

    pub fn wavelet(grid: Grid, rule: WaveletFormRule) -> Self {
        FormEvaluator {
            grid,
            tag: "wavelet-form".into(),
            rule: FormRule::WaveletForm(Arc::new(rule)),
        }
    }

    fn check_args(&self, f: &SampledFunction, g: &SampledFunction, h: &SampledFunction) -> Result<()> {
        for (name, a) in [("first", f), ("second", g), ("third", h)] {
            if a.grid != self.grid {
                return Err(CzError::GridMismatch(format!(
                    "{name} argument sampled on a different grid than the form"
                )));
            }
        }
        Ok(())
    }

    /// Evaluate `Lambda(f, g, h)`.
    pub fn evaluate(
        &self,
        f: &SampledFunction,
        g: &SampledFunction,
        h: &SampledFunction,
    ) -> Result<C64> {
        self.check_args(f, g, h)?;
        match &self.rule {
            FormRule::PointwiseProduct => {
                let hd = self.grid.spacing().powi(self.grid.dim() as i32);
                let sum: C64 = f
                    .values
                    .iter()
                    .zip(&g.values)
                    .zip(&h.values)
                    .map(|((a, b), c)| a * b * c)
                    .sum();
                Ok(sum * hd)
            }
            FormRule::SmoothMultiplier(m) => {
                if self.grid.dim() != 1 {
                    return Err(CzError::Constraint(
                        "multiplier forms are implemented in dimension 1".into(),
                    ));
                }
                let fh = fft::forward_phys(&self.grid, &f.values);
                let gh = fft::forward_phys(&self.grid, &g.values);
                let hh = fft::forward_phys(&self.grid, &h.values);
                let n = self.grid.points_per_axis();
                let mut sum = C64::new(0.0, 0.0);
                for k1 in 0..n {
                    let xi1 = self.grid.freq(k1);
                    let fv = fh[k1];
                    if fv.norm() == 0.0 {
                        continue;
                    }
                    for k2 in 0..n {
                        // frequency conservation on the periodic lattice:
                        // the third bin is -(k1 + k2) mod N
                        let k3 = (2 * n - k1 - k2) % n;
                        sum += m(xi1, self.grid.freq(k2)) * fv * gh[k2] * hh[k3];
                    }
                }
                let period = 2.0 * self.grid.half_width();
                Ok(sum / (period * period))
            }
            FormRule::Paraproduct(p) => paraproduct_form(
                &p.b,
                p.gamma,
                (&p.fams.0, &p.fams.1),
                &p.phi,
                f,
                g,
                h,
                &p.ag,
            ),
            FormRule::WaveletForm(wfr) => {
                wavelet_form(wfr.nu.as_ref(), &wfr.phi, f, g, h, &wfr.ag)
            }
        }
    }
}

/// Evaluate the wavelet form
/// `U(f, g, h) = int <f (x) g, nu_z> <h, phi_z> dmu(z)`
/// by quadrature over the affine grid.
pub fn wavelet_form(
    nu: &(dyn Fn(AffinePoint) -> Result<SampledFunction2D> + Send + Sync),
    phi: &MotherWavelet,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    ag: &AffineGrid,
) -> Result<C64> {
    if f.grid != ag.grid || g.grid != ag.grid || h.grid != ag.grid {
        return Err(CzError::GridMismatch(
            "wavelet-form arguments must live on the affine grid's base grid".into(),
        ));
    }
    let outer = SampledFunction2D::outer(f, g)?;
    let mut cells = Vec::with_capacity(ag.num_cells());
    for j in 0..ag.num_scales {
        for i in 0..ag.num_spatial() {
            let z = ag.point(j, i);
            let nu_z = nu(z)?;
            let fg = outer.pair(&nu_z)?;
            let phi_z = phi.hat().render(&h.grid, &z.w, z.t)?;
            cells.push(fg * h.pair(&phi_z)?);
        }
    }
    Ok(mu_integrate(ag, &cells))
}

/// Spectral anti-derivative of order `k` of a cancellative function
/// (`(i xi)^{-k}` on the transform side; the input must have vanishing
/// moments through order `k - 1` so the result still decays).
pub fn anti_derivative(f: &SampledFunction, k: u32) -> Result<SampledFunction> {
    if k == 0 {
        return Ok(f.clone());
    }
    for beta in 0..k {
        let m = f.moment([beta, 0]).norm();
        let tol = 1e-8 * (1.0 + f.lp_norm(1.0));
        if m > tol {
            return Err(CzError::Constraint(format!(
                "anti-derivative of order {k} needs vanishing moments through {}; \
                 moment {beta} is {m:.3e}",
                k - 1
            )));
        }
    }
    spectral_multiplier(
        f,
        |xi| (C64::new(0.0, xi[0])).powi(-(k as i32)),
        Some(C64::new(0.0, 0.0)),
    )
}

/// Evaluate the paraproduct form
/// `Pi_{b,gamma}(f, g, h) = int <b, (d^{-g1-g2} phi)_z> <f, theta_z^{g1}>
/// <g, theta_z^{g2}> <h, phi_z> dmu(z)`.
#[allow(clippy::too_many_arguments)]
pub fn paraproduct_form(
    b: &SampledFunction,
    gamma: (u32, u32),
    fams: (&GammaFamily, &GammaFamily),
    phi: &MotherWavelet,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    ag: &AffineGrid,
) -> Result<C64> {
    if fams.0.gamma != gamma.0 || fams.1.gamma != gamma.1 {
        return Err(CzError::Constraint(format!(
            "family orders ({}, {}) do not match gamma {:?}",
            fams.0.gamma, fams.1.gamma, gamma
        )));
    }
    let anti = anti_derivative(&phi.base, gamma.0 + gamma.1)?;
    let anti_tab = HatTable::new(&anti, 16)?;
    let cells: Vec<C64> = (0..ag.num_cells())
        .into_par_iter()
        .map(|c| -> Result<C64> {
            let (j, i) = (c / ag.num_spatial(), c % ag.num_spatial());
            let z = ag.point(j, i);
            let bp = b.pair(&anti_tab.render(&b.grid, &z.w, z.t)?)?;
            if bp.norm() == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            let fp = f.pair(&fams.0.member_at(z, &f.grid)?)?;
            let gp = g.pair(&fams.1.member_at(z, &g.grid)?)?;
            let hp = h.pair(&phi.hat().render(&h.grid, &z.w, z.t)?)?;
            Ok(bp * fp * gp * hp)
        })
        .collect::<Result<_>>()?;
    Ok(mu_integrate(ag, &cells))
}

/// Precomputed spectral tables for a dictionary, so intrinsic coefficients
/// can be evaluated at arbitrary affine points without re-transforming the
/// members.
pub struct IntrinsicAnalyzer {
    pub dict: WaveletDictionary,
    tables: Vec<Vec<(HatTable, Option<HatTable>)>>,
}

impl IntrinsicAnalyzer {
    pub fn new(dict: &WaveletDictionary) -> Result<Self> {
        let mut tables = Vec::with_capacity(dict.members.len());
        for member in &dict.members {
            let mut per_term = Vec::with_capacity(member.terms.len());
            for (a, b) in &member.terms {
                let ta = HatTable::new(a, 16)?;
                let tb = if member.tensor {
                    Some(HatTable::new(b, 16)?)
                } else {
                    None
                };
                per_term.push((ta, tb));
            }
            tables.push(per_term);
        }
        Ok(IntrinsicAnalyzer {
            dict: dict.clone(),
            tables,
        })
    }

    /// The intrinsic coefficient at `z`: the maximum over dictionary members
    /// of `|<f (x) g, member_z>|` (tensor members) or `|<f, member_z>|`
    /// (scalar members, `g = None`).
    pub fn coefficient(
        &self,
        f: &SampledFunction,
        g: Option<&SampledFunction>,
        z: AffinePoint,
    ) -> Result<f64> {
        if self.dict.tensor != g.is_some() {
            return Err(CzError::Constraint(
                "tensor dictionaries need two arguments; scalar dictionaries need one".into(),
            ));
        }
        let mut best = 0.0f64;
        for tabs in &self.tables {
            let mut val = C64::new(0.0, 0.0);
            for (ta, tb) in tabs {
                let fa = f.pair(&ta.render(&f.grid, &z.w, z.t)?)?;
                match (tb, g) {
                    (Some(tb), Some(g)) => {
                        val += fa * g.pair(&tb.render(&g.grid, &z.w, z.t)?)?;
                    }
                    _ => val += fa,
                }
            }
            best = best.max(val.norm());
        }
        Ok(best)
    }
}

/// One-off intrinsic coefficient (builds the member tables internally; use
/// [`IntrinsicAnalyzer`] when integrating over an affine grid).
pub fn intrinsic_coefficient(
    f: &SampledFunction,
    g: Option<&SampledFunction>,
    z: AffinePoint,
    dict: &WaveletDictionary,
) -> Result<f64> {
    IntrinsicAnalyzer::new(dict)?.coefficient(f, g, z)
}

fn intrinsic_integral(
    ag: &AffineGrid,
    cell: impl Fn(AffinePoint) -> Result<f64> + Sync,
) -> Result<f64> {
    let cells: Vec<f64> = (0..ag.num_cells())
        .into_par_iter()
        .map(|c| cell(ag.point(c / ag.num_spatial(), c % ag.num_spatial())))
        .collect::<Result<_>>()?;
    Ok(cells.iter().sum::<f64>() * ag.cell_weight())
}

/// The intrinsic maximal form
/// `MSS(f, g, h) = int Psi_z(f, g) Psi_z^{S0}(h) dmu(z)`,
/// where the first factor maximizes over a tensor dictionary with first-slot
/// cancellation and the second over a rapid-decay cancellative scalar
/// dictionary.
pub fn mss_form(
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    pair_dict: &WaveletDictionary,
    rapid_dict: &WaveletDictionary,
    ag: &AffineGrid,
) -> Result<f64> {
    let pa = IntrinsicAnalyzer::new(pair_dict)?;
    let ra = IntrinsicAnalyzer::new(rapid_dict)?;
    intrinsic_integral(ag, |z| {
        Ok(pa.coefficient(f, Some(g), z)? * ra.coefficient(h, None, z)?)
    })
}

/// The intrinsic paraproduct form
/// `pi_b(f, g, h) = int Psi_z^{S0}(b) Psi_z(f, g) Psi_z^{S0}(h) dmu(z)`
/// with a fully cancellative tensor dictionary for the middle factor.
pub fn pi_b_form(
    b: &SampledFunction,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    pair_dict: &WaveletDictionary,
    rapid_dict: &WaveletDictionary,
    ag: &AffineGrid,
) -> Result<f64> {
    let pa = IntrinsicAnalyzer::new(pair_dict)?;
    let ra = IntrinsicAnalyzer::new(rapid_dict)?;
    intrinsic_integral(ag, |z| {
        let bz = ra.coefficient(b, None, z)?;
        if bz == 0.0 {
            return Ok(0.0);
        }
        Ok(bz * pa.coefficient(f, Some(g), z)? * ra.coefficient(h, None, z)?)
    })
}

fn fractional_derivative(f: &SampledFunction, sigma: f64) -> Result<SampledFunction> {
    spectral_multiplier(
        f,
        |xi| C64::new(xi[0].abs().powf(sigma), 0.0),
        None,
    )
}

/// The asymmetric-decay variant
/// `MSS^sigma(h, g, f) = int sup_nu <h (x) g, nu_z> Psi_z^{S0}(D^sigma f) dmu`,
/// where the tensor dictionary is normalized in the sigma-weighted norm.
#[allow(clippy::too_many_arguments)]
pub fn msssig_form(
    h: &SampledFunction,
    g: &SampledFunction,
    f: &SampledFunction,
    sigma: f64,
    pair_dict: &WaveletDictionary,
    rapid_dict: &WaveletDictionary,
    ag: &AffineGrid,
) -> Result<f64> {
    if pair_dict.class.sigma != Some(sigma) {
        return Err(CzError::Constraint(format!(
            "tensor dictionary was built with sigma {:?}, expected {sigma}",
            pair_dict.class.sigma
        )));
    }
    let df = fractional_derivative(f, sigma)?;
    let pa = IntrinsicAnalyzer::new(pair_dict)?;
    let ra = IntrinsicAnalyzer::new(rapid_dict)?;
    intrinsic_integral(ag, |z| {
        Ok(pa.coefficient(h, Some(g), z)? * ra.coefficient(&df, None, z)?)
    })
}

/// Sigma-weighted intrinsic paraproduct:
/// `pi_b^sigma(f, g, h) = int Psi_z^{S0}(b) Psi_z^{sigma}(f, g) Psi_z^{S0}(h)`.
#[allow(clippy::too_many_arguments)]
pub fn pi_b_sigma_form(
    b: &SampledFunction,
    f: &SampledFunction,
    g: &SampledFunction,
    h: &SampledFunction,
    sigma: f64,
    pair_dict: &WaveletDictionary,
    rapid_dict: &WaveletDictionary,
    ag: &AffineGrid,
) -> Result<f64> {
    if pair_dict.class.sigma != Some(sigma) {
        return Err(CzError::Constraint(format!(
            "tensor dictionary was built with sigma {:?}, expected {sigma}",
            pair_dict.class.sigma
        )));
    }
    pi_b_form(b, f, g, h, pair_dict, rapid_dict, ag)
}

// --- the five-parameter symbol ---------------------------------------------

/// Region of the `(u, v, s)` fiber over a reference point `(w, t)`:
/// far (`max{|u-w|, |v-w|} >= 3s`), near (`s <= 3t`), or high-low
/// (`max <= 3s`, `s >= 3t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Far,
    Near,
    HighLow,
}

/// Classify `(u, v, s)` relative to `(w, t)`; callers guarantee `s >= t`.
pub fn region(u: f64, v: f64, w: f64, s: f64, t: f64) -> Region {
    let m = (u - w).abs().max((v - w).abs());
    if m >= 3.0 * s {
        Region::Far
    } else if s <= 3.0 * t {
        Region::Near
    } else {
        Region::HighLow
    }
}

/// Evaluation context for the symbol: the trilinear rule, spectral tables of
/// the two analyzing profiles, the synthesis mother wavelet, the Taylor
/// orders, and the moment-normalized families used for the Taylor
/// coefficients.
pub struct UpsilonContext {
    pub lambda: FormEvaluator,
    psi: HatTable,
    phi: HatTable,
    mother: MotherWavelet,
    pub k1: u32,
    pub k2: u32,
    fams: Vec<GammaFamily>,
}

impl UpsilonContext {
    pub fn new(
        lambda: FormEvaluator,
        psi: &SampledFunction,
        phi: &SampledFunction,
        mother: &MotherWavelet,
        k1: u32,
        k2: u32,
        fams: Vec<GammaFamily>,
    ) -> Result<Self> {
        let need = k1.max(k2);
        for gm in 0..=need {
            if !fams.iter().any(|f| f.gamma == gm) {
                return Err(CzError::Constraint(format!(
                    "missing moment family of order {gm} (need all orders through {need})"
                )));
            }
        }
        Ok(UpsilonContext {
            lambda,
            psi: HatTable::new(psi, 16)?,
            phi: HatTable::new(phi, 16)?,
            mother: mother.clone(),
            k1,
            k2,
            fams,
        })
    }

    fn family(&self, gamma: u32) -> &GammaFamily {
        self.fams
            .iter()
            .find(|f| f.gamma == gamma)
            .expect("checked at construction")
    }

    /// Taylor truncation `P_k(x) = sum_{gamma <= k} <arg, theta^gamma_{w,t}>
    /// ((x - w)/t)^gamma` sampled on the evaluation grid (`P_{-1} = 0` by
    /// convention when `k` is `None`).
    fn taylor(
        &self,
        arg: &SampledFunction,
        k: Option<u32>,
        w: f64,
        t: f64,
    ) -> Result<SampledFunction> {
        let grid = self.lambda.grid;
        let k = match k {
            None => return Ok(SampledFunction::zeros(grid)),
            Some(k) => k,
        };
        let mut coeff = Vec::with_capacity(k as usize + 1);
        for gm in 0..=k {
            let theta = self.family(gm).member_at(AffinePoint::new1(w, t), &grid)?;
            coeff.push(arg.pair(&theta)?);
        }
        SampledFunction::from_fn_complex(grid, "taylor truncation", |x, _| {
            let y = (x - w) / t;
            let mut p = C64::new(0.0, 0.0);
            let mut pw = 1.0;
            for c in &coeff {
                p += c * pw;
                pw *= y;
            }
            p
        })
    }

    /// Evaluate the symbol at `(u, v, w, s, t)`; requires `s >= t`.
    pub fn value(&self, u: f64, v: f64, w: f64, s: f64, t: f64) -> Result<C64> {
        if !(s >= t) {
            return Err(CzError::Constraint(format!(
                "symbol requires s >= t (got s = {s}, t = {t})"
            )));
        }
        let grid = self.lambda.grid;
        let psi_us = self.psi.render(&grid, &[u, 0.0], s)?;
        let phi_vs = self.phi.render(&grid, &[v, 0.0], s)?;
        let phi_wt = self.mother.hat().render(&grid, &[w, 0.0], t)?;
        let main = self.lambda.evaluate(&psi_us, &phi_vs, &phi_wt)?;
        if region(u, v, w, s, t) != Region::HighLow {
            return Ok(main);
        }
        let p1 = self.taylor(&psi_us, Some(self.k1), w, t)?;
        let p2 = self.taylor(&phi_vs, Some(self.k2), w, t)?;
        let p1m = self.taylor(&psi_us, self.k1.checked_sub(1), w, t)?;
        let p2m = self.taylor(&phi_vs, self.k2.checked_sub(1), w, t)?;
        let corr = self.lambda.evaluate(&p1, &p2, &phi_wt)?
            + self
                .lambda
                .evaluate(&p1m, &phi_vs.sub(&p2)?, &phi_wt)?
            - self
                .lambda
                .evaluate(&psi_us.sub(&p1)?, &p2m, &phi_wt)?;
        Ok(main - corr)
    }
}

/// One-off evaluation of the symbol (builds the spectral tables internally;
/// use [`UpsilonContext`] for repeated evaluation).
#[allow(clippy::too_many_arguments)]
pub fn upsilon(
    lambda: FormEvaluator,
    psi: &SampledFunction,
    phi: &SampledFunction,
    mother: &MotherWavelet,
    u: f64,
    v: f64,
    w: f64,
    s: f64,
    t: f64,
    k1: u32,
    k2: u32,
    fams: Vec<GammaFamily>,
) -> Result<C64> {
    UpsilonContext::new(lambda, psi, phi, mother, k1, k2, fams)?.value(u, v, w, s, t)
}

/// One sampled value of the symbol.
#[derive(Debug, Clone, Serialize)]
pub struct UpsilonSample {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub s: f64,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub region: Region,
}

/// A seeded sample of the symbol over all three regions.
#[derive(Debug, Clone, Serialize)]
pub struct UpsilonField {
    pub samples: Vec<UpsilonSample>,
    pub orders: (u32, u32),
    pub reference: (f64, f64),
    pub seed: u64,
}

/// Sample the symbol at `n` points of a seeded Latin-hypercube design over
/// log-spaced `(s/t, |u-w|/t, |v-w|/t)`; offsets get random signs.  Sample
/// ordering is deterministic (parallel evaluation preserves it).
pub fn sample_upsilon_field(
    ctx: &UpsilonContext,
    reference: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<UpsilonField> {
    let (w, t) = reference;
    if !(t > 0.0) {
        return Err(CzError::Constraint(format!("reference scale {t} must be positive")));
    }
    let half = ctx.lambda.grid.half_width();
    let s_hi = (half / (4.0 * t)).max(2.0);
    let off_lo = 0.5;
    let off_hi = (half / (2.0 * t)).max(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perms: Vec<Vec<usize>> = Vec::new();
    for _ in 0..3 {
        let mut p: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the seeded stream
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            p.swap(i, j);
        }
        perms.push(p);
    }
    let stratum = |p: usize, lo: f64, hi: f64, jitter: f64| -> f64 {
        let u = (p as f64 + jitter) / n as f64;
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    };
    let mut params = Vec::with_capacity(n);
    for i in 0..n {
        let js: f64 = rng.gen();
        let ju: f64 = rng.gen();
        let jv: f64 = rng.gen();
        let su: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let sv: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let s = t * stratum(perms[0][i], 1.0, s_hi, js);
        let u = w + su * t * stratum(perms[1][i], off_lo, off_hi, ju);
        let v = w + sv * t * stratum(perms[2][i], off_lo, off_hi, jv);
        params.push((u, v, s));
    }
    let samples: Vec<UpsilonSample> = params
        .par_iter()
        .map(|&(u, v, s)| -> Result<UpsilonSample> {
            let val = ctx.value(u, v, w, s, t)?;
            Ok(UpsilonSample {
                u,
                v,
                w,
                s,
                t,
                re: val.re,
                im: val.im,
                region: region(u, v, w, s, t),
            })
        })
        .collect::<Result<_>>()?;
    Ok(UpsilonField {
        samples,
        orders: (ctx.k1, ctx.k2),
        reference,
        seed,
    })
}

/// Result of the log-log decay fit of a sampled symbol field.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCertificate {
    /// fitted slope of `ln |value|` against `ln max{s, |u-w|, |v-w|}`
    pub slope: f64,
    /// the slope the decay bound predicts: `-(2d + k1 + k2 + eta)`
    pub target: f64,
    /// empirical constant: `max |value| * max{s,|u-w|,|v-w|}^{2d+k1+k2+eta}
    /// / t^{k1+k2+eta}`
    pub constant: f64,
    pub eta: f64,
    /// samples per region (far, near, high-low)
    pub region_counts: [usize; 3],
    /// set when the field is identically negligible and no fit is possible
    pub degenerate: bool,
}

/// Fit the decay law to a sampled field.  Requires at least 8 samples in
/// each region; a field of (near-)zeros yields a degenerate-fit flag rather
/// than an error.
pub fn upsilon_decay_certificate(field: &UpsilonField, eta: f64) -> Result<DecayCertificate> {
    let mut counts = [0usize; 3];
    for s in &field.samples {
        match s.region {
            Region::Far => counts[0] += 1,
            Region::Near => counts[1] += 1,
            Region::HighLow => counts[2] += 1,
        }
    }
    if counts.iter().any(|&c| c < 8) {
        return Err(CzError::InsufficientSamples(format!(
            "need at least 8 samples per region, got (far, near, high-low) = {counts:?}"
        )));
    }
    let d = 1.0;
    let (k1, k2) = (field.orders.0 as f64, field.orders.1 as f64);
    let power = 2.0 * d + k1 + k2 + eta;
    let target = -power;
    let t = field.reference.1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut constant = 0.0f64;
    for s in &field.samples {
        let mag = C64::new(s.re, s.im).norm();
        let dist = s
            .s
            .max((s.u - s.w).abs())
            .max((s.v - s.w).abs());
        if mag > 1e-300 {
            xs.push(dist.ln());
            ys.push(mag.ln());
            constant = constant.max(mag * dist.powf(power) / t.powf(k1 + k2 + eta));
        }
    }
    let n = xs.len() as f64;
    let degenerate = xs.len() < 2 || {
        let mx = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() < 1e-12
    };
    if degenerate {
        return Ok(DecayCertificate {
            slope: 0.0,
            target,
            constant,
            eta,
            region_counts: counts,
            degenerate: true,
        });
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    Ok(DecayCertificate {
        slope: sxy / sxx,
        target,
        constant,
        eta,
        region_counts: counts,
        degenerate: false,
    })
}
