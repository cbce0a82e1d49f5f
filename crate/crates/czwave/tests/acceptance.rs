//! End-to-end acceptance gate: one test per criterion, each printing a
//! single PASS/FAIL line (visible with `--nocapture`) before asserting.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use czwave::config::parse_config;
use czwave::experiments::run_experiment;
use czwave::forms::{anti_derivative, paraproduct_form};
use czwave::grid::{AffineGrid, AffinePoint, Grid, SampledFunction};
use czwave::sparse::{
    certify_domination, maximal_function, DyadicCube, DyadicFamily, IntrinsicFormKind,
};
use czwave::transform::{
    calderon_reconstruct, cwt, highlow_decompose, relative_l2_error, single_scale_projection,
    tensor_reproducing_check,
};
use czwave::wavelet::{
    admissibility_constant, build_dictionary, construction_grid_1d, make_gamma_family,
    make_mother_wavelet, standard_bump, MotherWavelet, WaveletClassSpec,
};
use czwave::weights::{
    ap_characteristic, leibniz_check, sharpness_experiment, BilinearOp, ExponentTuple,
    WeightVector,
};
use czwave::CzError;

fn verdict(criterion: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("{tag} {criterion}: {detail}");
    assert!(passed, "{criterion}: {detail}");
}

fn mother(d_cancel: u32) -> MotherWavelet {
    let bump = standard_bump(construction_grid_1d()).unwrap();
    make_mother_wavelet(d_cancel, &bump).unwrap()
}

fn eval_grid() -> Grid {
    Grid::new(1, 16.0, 256).unwrap()
}

fn seeded_field(grid: Grid, seed: u64) -> SampledFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::new();
    for _ in 0..3 {
        let c = -4.0 + 8.0 * rng.gen::<f64>();
        let wdt = 0.5 + 2.0 * rng.gen::<f64>();
        let frq = 3.0 * rng.gen::<f64>();
        let amp = -1.0 + 2.0 * rng.gen::<f64>();
        parts.push((c, wdt, frq, amp));
    }
    SampledFunction::from_fn(grid, "seeded field", move |x, _| {
        parts
            .iter()
            .map(|(c, w, q, a)| a * (-((x - c) / w).powi(2)).exp() * (q * x).cos())
            .sum()
    })
    .unwrap()
}

#[test]
fn criterion_01_admissibility_and_moments() {
    let start = Instant::now();
    let w = mother(1);
    let constant = admissibility_constant(&w.base).unwrap();
    let worst_moment = (0..=2u32)
        .map(|k| w.base.moment([k, 0]).norm())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (constant - 1.0).abs() <= 1e-6 && worst_moment < 1e-8 && elapsed < 5.0;
    verdict(
        "criterion-01 admissibility",
        ok,
        &format!(
            "constant {constant:.9}, worst moment {worst_moment:.2e}, {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_02_calderon_reconstruction() {
    let start = Instant::now();
    let w = mother(0);
    let g = Grid::new(1, 16.0, 1024).unwrap();
    let f = SampledFunction::from_fn(g, "probe", |x, _| x * (-x * x).exp()).unwrap();
    let ag = AffineGrid::spanning(g, 1, 0.25, 4096.0, 48).unwrap();
    let err = relative_l2_error(
        &calderon_reconstruct(&cwt(&f, &w, &ag).unwrap(), &w).unwrap(),
        &f,
    )
    .unwrap();
    let fine = ag.refined_scales();
    let err_fine = relative_l2_error(
        &calderon_reconstruct(&cwt(&f, &w, &fine).unwrap(), &w).unwrap(),
        &f,
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = err < 0.02 && err_fine < err && elapsed < 60.0;
    verdict(
        "criterion-02 reconstruction",
        ok,
        &format!("error {err:.5}, refined {err_fine:.5}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_03_highlow_identity() {
    let start = Instant::now();
    let w = mother(0);
    let sys = highlow_decompose(&w, 2).unwrap();
    let g = Grid::new(1, 16.0, 1024).unwrap();
    let f = SampledFunction::from_fn(g, "probe", |x, _| x * (-x * x).exp()).unwrap();
    let ag = AffineGrid::spanning(g, 1, 0.25, 4096.0, 48).unwrap();
    let rec = calderon_reconstruct(&cwt(&f, &w, &ag).unwrap(), &w).unwrap();
    let proj = single_scale_projection(&f, 0.25, &sys).unwrap();
    let gap = relative_l2_error(&proj, &rec).unwrap();

    let kernel_h = sys.phi_kernel.grid.spacing();
    let support = [&sys.psi1, &sys.psi2, &sys.psi3, &sys.phi_kernel]
        .iter()
        .map(|p| p.support_radius(1e-10))
        .fold(0.0, f64::max);
    // psi2 is a full derivative, hence mean zero; psi4 = Phi carries the
    // unit admissibility mass (the projection tends to the identity)
    let mean = sys.psi2.integrate().norm();
    let mass = sys.phi_kernel.integrate().re;
    let elapsed = start.elapsed().as_secs_f64();
    let ok = gap < 0.02
        && support <= 1.0 + kernel_h
        && mean < 1e-8
        && (mass - 1.0).abs() < 1e-5
        && elapsed < 120.0;
    verdict(
        "criterion-03 high-low",
        ok,
        &format!(
            "gap {gap:.5}, support {support:.4}, psi2 mean {mean:.2e}, kernel mass {mass:.6}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_04_tensor_reproducing_formula() {
    let start = Instant::now();
    let w = mother(0);
    let sys = highlow_decompose(&w, 2).unwrap();
    let g = eval_grid();
    let f = seeded_field(g, 41);
    let h = seeded_field(g, 42);
    let ag = AffineGrid::spanning(g, 8, 0.25, 512.0, 60).unwrap();
    let residual = tensor_reproducing_check(&f, &h, &sys, &ag).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = residual < 0.05 && elapsed < 600.0;
    verdict(
        "criterion-04 tensor",
        ok,
        &format!("residual {residual:.5}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_05_wavelet_averaging() {
    let text = "\
[experiment]
name = averaging
seed = 3
[grid]
points = 128
[params]
base_points = 5
variation = 0.2
";
    let cfg = parse_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, dir.path()).unwrap();
    let spread = outcome.report["spread"].as_f64().unwrap();
    let ok = outcome.all_passed();
    verdict(
        "criterion-05 averaging",
        ok,
        &format!("star-norm spread {spread:.4} over 5 base points"),
    );
}

#[test]
fn criterion_06_upsilon_decay() {
    let text = "\
[experiment]
name = upsilon
seed = 2024
[grid]
points = 256
[params]
samples = 500
eta = 0.5
slope_threshold = -2
";
    let cfg = parse_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, dir.path()).unwrap();
    let slope = outcome.report["slope"].as_f64().unwrap();
    let target = outcome.report["target"].as_f64().unwrap();
    let ok = outcome.all_passed() && target == -2.5;
    verdict(
        "criterion-06 upsilon",
        ok,
        &format!("slope {slope:.3} (target {target}), disjoint far-region value vanished"),
    );
}

#[test]
fn criterion_07_paraproduct_testing_identities() {
    let w = mother(0);
    let g = eval_grid();
    let ag = AffineGrid::spanning(g, 2, 0.25, 512.0, 68).unwrap();
    let fam0 = make_gamma_family(0, 0.4).unwrap();
    let fam1 = make_gamma_family(1, 0.4).unwrap();
    let b = SampledFunction::from_fn(g, "b", |x, _| {
        (0.7 * x).cos() * (-(x / 5.0).powi(2)).exp()
    })
    .unwrap();
    // spectrum bounded away from zero, so the scale weights of the
    // anti-derivative factor decay fast and domain truncation at large
    // scales stays negligible
    let b_osc = SampledFunction::from_fn(g, "b osc", |x, _| {
        (1.5 * x).cos() * (-(x / 5.0).powi(2)).exp()
    })
    .unwrap();
    let h_even = SampledFunction::from_fn(g, "h even", |x, _| {
        (1.1 * x).cos() * (-(x / 4.0).powi(2)).exp()
    })
    .unwrap();
    // odd, hence exactly mean zero, so its anti-derivative is defined and
    // pairs non-trivially with the even function b
    let h_odd = SampledFunction::from_fn(g, "h odd", |x, _| {
        (1.1 * x).sin() * (-(x / 4.0).powi(2)).exp()
    })
    .unwrap();
    let ones = SampledFunction::from_fn(g, "one", |_, _| 1.0).unwrap();
    // first-order monomial; the family members integrate it to exactly t
    // wherever their support stays inside the domain, and the weight
    // factors are negligible where it does not
    let ramp = SampledFunction::from_fn(g, "ramp", |x, _| x).unwrap();

    // gamma = (0, 0): the form collapses to <b, h>
    let got0 =
        paraproduct_form(&b, (0, 0), (&fam0, &fam0), &w, &ones, &ones, &h_even, &ag).unwrap();
    let want0 = b.pair(&h_even).unwrap();
    let rel0 = (got0 - want0).norm() / want0.norm();

    // gamma = (1, 0): the form collapses to <b, d^{-1} h>
    let got1 =
        paraproduct_form(&b_osc, (1, 0), (&fam1, &fam0), &w, &ramp, &ones, &h_odd, &ag).unwrap();
    let want1 = b_osc.pair(&anti_derivative(&h_odd, 1).unwrap()).unwrap();
    let rel1 = (got1 - want1).norm() / want1.norm();

    // adjoint testing: the last slot pairs against a mean-zero wavelet
    let adj = paraproduct_form(&b, (0, 0), (&fam0, &fam0), &w, &h_even, &ones, &ones, &ag)
        .unwrap()
        .norm();

    let ok = rel0 <= 0.01 && rel1 <= 0.01 && adj < 1e-6;
    verdict(
        "criterion-07 paraproduct",
        ok,
        &format!("relative errors {rel0:.4} / {rel1:.4}, adjoint {adj:.2e}"),
    );
}

#[test]
fn criterion_08_sparse_certification() {
    let grid = eval_grid();
    let z0 = AffinePoint::new1(0.0, 1.0);
    let mut pair_spec = WaveletClassSpec::cancellative(0, 0.75);
    pair_spec.eta = Some(0.75);
    let pair = build_dictionary(&pair_spec, z0, 3, 7, true).unwrap();
    let rapid =
        build_dictionary(&WaveletClassSpec::rapid_decay(0.75, 1), z0, 3, 107, false).unwrap();
    let max_dict = build_dictionary(&WaveletClassSpec::plain(0, 0.75), z0, 2, 9, false).unwrap();
    let ag = AffineGrid::spanning(grid, 32, 1.0, 8.0, 4).unwrap();

    let mut constants = Vec::new();
    for i in 0..20u64 {
        let f1 = seeded_field(grid, 300 + i);
        let f2 = seeded_field(grid, 320 + i);
        let f3 = seeded_field(grid, 340 + i);
        // build_sparse_collection re-verifies containment, disjointness,
        // and the half-density bound before returning
        let report = certify_domination(
            IntrinsicFormKind::Mss,
            &f1,
            &f2,
            &f3,
            [1.0, 1.0, 1.0],
            &pair,
            &rapid,
            &max_dict,
            &ag,
            2,
        )
        .unwrap();
        assert!(!report.degenerate, "triple {i} degenerate");
        constants.push(report.empirical_constant);
    }
    let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().cloned().fold(0.0, f64::max);

    // the sigma-form exponent precondition is enforced by rejection
    let f = seeded_field(grid, 1);
    let rejected = matches!(
        certify_domination(
            IntrinsicFormKind::MssSigma(0.5),
            &f,
            &f,
            &f,
            [1.0, 1.0, 1.0],
            &pair,
            &rapid,
            &max_dict,
            &ag,
            1,
        ),
        Err(CzError::Constraint(_))
    );

    let ok = lo > 0.0 && hi / lo < 50.0 && rejected;
    verdict(
        "criterion-08 sparse certification",
        ok,
        &format!(
            "20 collections verified; C_emp spread {:.2} (limit 50); sigma precondition rejected: {rejected}",
            hi / lo
        ),
    );
}

/// Unit-mass kernel with an exact power tail `1/(pi (1 + x^2))` (decay
/// surplus 1), rendered analytically at the affine point `(w, t)`.
fn power_kernel(grid: Grid, w: f64, t: f64) -> SampledFunction {
    SampledFunction::from_fn(grid, "power kernel", move |x, _| {
        let u = (x - w) / t;
        1.0 / (std::f64::consts::PI * t * (1.0 + u * u))
    })
    .unwrap()
}

#[test]
fn criterion_09_localization_constants() {
    let grid = eval_grid();
    let eta = 1.0;

    // far-field coefficient bound along scaling rays d = kappa * t
    let q = DyadicCube {
        generation: 6,
        corner: 20,
    };
    let (side, center) = (q.side(&grid), q.center(&grid));
    let range = q.node_range(&grid);
    let f = SampledFunction::from_fn(grid, "f", move |x, _| {
        if x >= -6.0 && x < -6.0 + 0.5 {
            1.0 + 0.2 * (3.0 * x).sin()
        } else {
            0.0
        }
    })
    .unwrap();
    let avg = range.clone().map(|j| f.values[j].re.abs()).sum::<f64>() / range.len() as f64;
    let mut far_constants = Vec::new();
    for &kappa in &[5.0, 8.0] {
        for &t in &[0.5, 1.0, 2.0] {
            let w = center + kappa * t;
            let theta = power_kernel(grid, w, t);
            let val = f.pair(&theta).unwrap().norm();
            let dist = (w - center).abs();
            let bound = avg * side * t.powf(eta) / t.max(dist).powf(1.0 + eta);
            far_constants.push(val / bound);
        }
    }

    // mean-zero gain along a single ray (both sides), delta = 1
    let mut fz_vals = vec![C64::new(0.0, 0.0); grid.len()];
    for j in range.clone() {
        fz_vals[j] = C64::new((grid.coord(j) - center) / side, 0.0);
    }
    let mean = range.clone().map(|j| fz_vals[j]).sum::<C64>() / range.len() as f64;
    for j in range.clone() {
        fz_vals[j] -= mean;
    }
    let fz = SampledFunction::from_values(grid, fz_vals).unwrap();
    let avg_z = range.clone().map(|j| fz.values[j].re.abs()).sum::<f64>() / range.len() as f64;
    let mut zero_constants = Vec::new();
    for &sign in &[1.0, -1.0] {
        for &t in &[0.5, 1.0, 2.0] {
            let w = center + sign * 6.0 * t;
            let theta = power_kernel(grid, w, t);
            let val = fz.pair(&theta).unwrap().norm();
            let dist = (w - center).abs();
            let bound = avg_z * side.powf(2.0) * t.powf(eta - 1.0) / t.max(dist).powf(1.0 + eta);
            zero_constants.push(val / bound);
        }
    }

    // outside mass controlled by the maximal function, w inside Q
    let q3 = DyadicCube {
        generation: 3,
        corner: 2,
    };
    let (side3, center3) = (q3.side(&grid), q3.center(&grid));
    let mask3 = q3.dilate_mask(&grid, 3.0);
    let fout = SampledFunction::from_values(
        grid,
        mask3
            .iter()
            .map(|&inside| C64::new(if inside { 0.0 } else { 1.0 }, 0.0))
            .collect(),
    )
    .unwrap();
    let family = DyadicFamily::finest(grid).unwrap();
    let m = maximal_function(&fout, &family).unwrap();
    let inf_m = q3
        .node_range(&grid)
        .map(|j| m.values[j].re)
        .fold(f64::MAX, f64::min);
    let mut out_constants = Vec::new();
    for &w in &[center3 - 1.0, center3, center3 + 1.0] {
        for &t in &[0.25, 0.5, 1.0] {
            let theta = power_kernel(grid, w, t);
            let val = fout.pair(&theta).unwrap().norm();
            let bound = (t / side3).powf(eta) * inf_m;
            out_constants.push(val / bound);
        }
    }

    let spread = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(0.0, f64::max);
        hi / lo
    };
    let (s1, s2, s3) = (
        spread(&far_constants),
        spread(&zero_constants),
        spread(&out_constants),
    );

    // disjoint-family tail sums over 100 random configurations
    let delta = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let mut worst_sum = 0.0f64;
    for _ in 0..100 {
        let mut leaves: Vec<DyadicCube> = Vec::new();
        let mut stack = vec![DyadicCube::root()];
        while let Some(c) = stack.pop() {
            if c.generation < 6 && rng.gen::<f64>() < 0.55 {
                let [a, b] = c.children();
                stack.push(a);
                stack.push(b);
            } else {
                leaves.push(c);
            }
        }
        let w = grid.coord(rng.gen_range(0..grid.len()));
        let t = (rng.gen::<f64>() * (8.0f64 / 0.1).ln()).exp() * 0.1;
        let sum: f64 = leaves
            .iter()
            .filter(|c| !c.dilate_contains(&grid, 3.0, w))
            .map(|c| {
                let l = c.side(&grid);
                let dist = {
                    let raw = (w - c.center(&grid)).abs();
                    raw.min(2.0 * grid.half_width() - raw)
                };
                c.measure(&grid) * l.min(t).powf(delta) / dist.powf(1.0 + delta)
            })
            .sum();
        worst_sum = worst_sum.max(sum);
    }

    let ok = s1 < 1.2 && s2 < 1.2 && s3 < 1.2 && worst_sum < 40.0;
    verdict(
        "criterion-09 localization",
        ok,
        &format!(
            "constant spreads {s1:.3} / {s2:.3} / {s3:.3} (limit 1.2), worst tail sum {worst_sum:.2}"
        ),
    );
}

#[test]
fn criterion_10_weight_characteristics() {
    let grid = eval_grid();
    let family = DyadicFamily::new(grid, 3).unwrap();
    let e = ExponentTuple::holder_tuple(4.0, 4.0).unwrap();

    let unit = ap_characteristic(&WeightVector::ones(grid), &e, &family).unwrap();

    let v = WeightVector::power(grid, 0.3).unwrap();
    let characteristic = ap_characteristic(&v, &e, &family).unwrap();
    let mut oracle = 0.0f64;
    for q in family.cubes() {
        let range = q.node_range(&grid);
        let mut prod = 1.0;
        for j in 0..3 {
            let eps = e.epsilon(j);
            let mean = range
                .clone()
                .map(|i| v.v[j].values[i].re.recip().powf(eps))
                .sum::<f64>()
                / range.len() as f64;
            prod *= mean.powf(1.0 / eps);
        }
        oracle = oracle.max(prod);
    }

    let mut jensen_min = f64::INFINITY;
    for i in 0..30u64 {
        let b1 = seeded_field(grid, 9000 + 2 * i);
        let b2 = seeded_field(grid, 9001 + 2 * i);
        let w1: Vec<C64> = b1.values.iter().map(|v| C64::new((0.4 * v.re).exp(), 0.0)).collect();
        let w2: Vec<C64> = b2.values.iter().map(|v| C64::new((0.4 * v.re).exp(), 0.0)).collect();
        let w3: Vec<C64> = w1
            .iter()
            .zip(&w2)
            .map(|(a, b)| C64::new(1.0 / (a.re * b.re), 0.0))
            .collect();
        let vec = WeightVector::new([
            SampledFunction::from_values(grid, w1).unwrap(),
            SampledFunction::from_values(grid, w2).unwrap(),
            SampledFunction::from_values(grid, w3).unwrap(),
        ])
        .unwrap();
        jensen_min = jensen_min.min(ap_characteristic(&vec, &e, &family).unwrap());
    }

    let ok = unit == 1.0
        && (characteristic - oracle).abs() <= 1e-10 * oracle
        && jensen_min >= 1.0 - 1e-10;
    verdict(
        "criterion-10 weights",
        ok,
        &format!(
            "unit {unit}, power vs oracle gap {:.2e}, Jensen minimum {jensen_min:.6}",
            (characteristic - oracle).abs()
        ),
    );
}

#[test]
fn criterion_11_leibniz_inequality() {
    let grid = eval_grid();
    let e = ExponentTuple::holder_tuple(4.0, 4.0).unwrap();
    let ones = WeightVector::ones(grid);

    // sigma = 0 unweighted: the ratio is the plain Hoelder quotient
    let f = seeded_field(grid, 50);
    let g = seeded_field(grid, 51);
    let report = leibniz_check(&f, &g, 0.0, &e, &ones, &BilinearOp::PointwiseProduct).unwrap();
    let product = SampledFunction::from_values(
        grid,
        f.values.iter().zip(&g.values).map(|(a, b)| a * b).collect(),
    )
    .unwrap();
    let oracle = product.lp_norm(2.0) / (4.0 * f.lp_norm(4.0) * g.lp_norm(4.0));
    let gap = (report.ratio - oracle).abs();

    // sigma = 0.5 ensemble stability
    let e_frac = e.with_r([1.5, 1.5, 1.0]).unwrap();
    let mut ratios = Vec::new();
    for i in 0..20u64 {
        let f = seeded_field(grid, 1000 + i);
        let g = seeded_field(grid, 1100 + i);
        let r = leibniz_check(&f, &g, 0.5, &e_frac, &ones, &BilinearOp::PointwiseProduct).unwrap();
        ratios.push(r.ratio);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);

    let ok = gap <= 1e-10 && lo > 0.0 && hi / lo < 20.0;
    verdict(
        "criterion-11 leibniz",
        ok,
        &format!("Hoelder oracle gap {gap:.2e}, ensemble spread {:.2} (limit 20)", hi / lo),
    );
}

#[test]
fn criterion_12_sharpness() {
    let start = Instant::now();
    let grid = Grid::new(1, 16384.0, 262144).unwrap();
    let ks = [4, 5, 6, 7, 8];
    let mut detail = Vec::new();
    let mut ok = true;
    for sigma in [0.25, 0.5, 1.0] {
        let report = sharpness_experiment(grid, sigma, &ks, 2.0, 2.0).unwrap();
        let hit = (report.fitted_slope - report.decay_target).abs() <= 0.1;
        ok &= hit && report.sparse_bound_consistent;
        detail.push(format!("sigma {sigma}: slope {:.3}", report.fitted_slope));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 60.0;
    verdict(
        "criterion-12 sharpness",
        ok,
        &format!("{}, {elapsed:.1}s", detail.join(", ")),
    );
}

#[test]
fn criterion_13_determinism() {
    let text = "\
[experiment]
name = sparse-certify
seed = 11
[grid]
points = 256
[params]
depth = 1
pair_dict_size = 2
max_dict_size = 1
";
    let cfg = parse_config(text).unwrap();
    let mut payloads = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&cfg, dir.path()).unwrap();
        let mut files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let blob: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect();
        payloads.push(blob);
    }
    let ok = payloads[0] == payloads[1] && payloads[0].len() >= 2;
    verdict(
        "criterion-13 determinism",
        ok,
        &format!(
            "{} output files byte-identical across reruns",
            payloads[0].len()
        ),
    );
}
