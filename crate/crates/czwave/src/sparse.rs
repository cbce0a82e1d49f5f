//! Dyadic decomposition of the periodic domain, discrete maximal functions,
//! and the stopping-time construction of sparse cube collections, together
//! with sparse-form values and empirical domination certificates.
//!
//! Everything here works in dimension 1 on the periodic grid.  Cube measures
//! and density statements are exact node-count statements (`count * h`), so
//! the collection invariants can be checked without quadrature error.

use crate::error::{CzError, Result};
use crate::fft::HatTable;
use crate::forms::{mss_form, msssig_form, pi_b_form, pi_b_sigma_form};
use crate::grid::{convolve, AffineGrid, Grid, SampledFunction};
use crate::wavelet::WaveletDictionary;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

/// Distance between `a` and `b` on the circle of circumference `2 L`.
fn periodic_distance(grid: &Grid, a: f64, b: f64) -> f64 {
    let circ = 2.0 * grid.half_width();
    let d = (a - b).rem_euclid(circ);
    d.min(circ - d)
}

// --- dyadic cubes ----------------------------------------------------------

/// A dyadic interval of the domain `[-L, L)`: generation `g` splits the
/// domain into `2^g` congruent pieces, `corner` indexes them left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DyadicCube {
    pub generation: u32,
    pub corner: u64,
}

impl DyadicCube {
    /// The whole domain.
    pub fn root() -> Self {
        DyadicCube {
            generation: 0,
            corner: 0,
        }
    }

    /// Side length `2 L / 2^g`.
    pub fn side(&self, grid: &Grid) -> f64 {
        2.0 * grid.half_width() / (1u64 << self.generation) as f64
    }

    /// Left endpoint.
    pub fn corner_x(&self, grid: &Grid) -> f64 {
        -grid.half_width() + self.corner as f64 * self.side(grid)
    }

    /// Center `c(Q)`.
    pub fn center(&self, grid: &Grid) -> f64 {
        self.corner_x(grid) + 0.5 * self.side(grid)
    }

    /// The two children one generation down.
    pub fn children(&self) -> [DyadicCube; 2] {
        let g = self.generation + 1;
        [
            DyadicCube {
                generation: g,
                corner: 2 * self.corner,
            },
            DyadicCube {
                generation: g,
                corner: 2 * self.corner + 1,
            },
        ]
    }

    /// Whether `other` is contained in `self` (equality included).  Two
    /// dyadic cubes are either disjoint or one contains the other.
    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        other.generation >= self.generation
            && (other.corner >> (other.generation - self.generation)) == self.corner
    }

    /// Grid node indices whose coordinate lies in `[corner_x, corner_x + side)`.
    /// Consecutive cubes of one generation partition `0..n`.
    pub fn node_range(&self, grid: &Grid) -> std::ops::Range<usize> {
        let n = grid.points_per_axis() as u64;
        let g = self.generation;
        let ceil_div = |num: u64| -> usize { (num + (1u64 << g) - 1) as usize >> g };
        ceil_div(self.corner * n)..ceil_div((self.corner + 1) * n)
    }

    /// Number of grid nodes in the cube.
    pub fn node_count(&self, grid: &Grid) -> usize {
        self.node_range(grid).len()
    }

    /// Measure `|Q|` as a node-count statement: `count * h`.
    pub fn measure(&self, grid: &Grid) -> f64 {
        self.node_count(grid) as f64 * grid.spacing()
    }

    /// Whether `x` lies in the concentric dilate `factor * Q` (periodic).
    pub fn dilate_contains(&self, grid: &Grid, factor: f64, x: f64) -> bool {
        let half = 0.5 * factor * self.side(grid);
        periodic_distance(grid, x, self.center(grid)) <= half * (1.0 + 1e-12)
    }

    /// Node mask of the dilate `factor * Q`, clipped to the periodic domain.
    pub fn dilate_mask(&self, grid: &Grid, factor: f64) -> Vec<bool> {
        (0..grid.len())
            .map(|j| self.dilate_contains(grid, factor, grid.coord(j)))
            .collect()
    }
}

/// The family of all dyadic cubes of generations `0..=max_generation` on a
/// one-dimensional grid.
#[derive(Debug, Clone, Copy)]
pub struct DyadicFamily {
    pub grid: Grid,
    pub max_generation: u32,
}

impl DyadicFamily {
    pub fn new(grid: Grid, max_generation: u32) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(CzError::Constraint(
                "dyadic decomposition requires a 1-dimensional grid".into(),
            ));
        }
        if (1u64 << max_generation) > grid.points_per_axis() as u64 {
            return Err(CzError::Constraint(format!(
                "generation {max_generation} splits finer than the {} grid nodes",
                grid.points_per_axis()
            )));
        }
        Ok(DyadicFamily {
            grid,
            max_generation,
        })
    }

    /// The deepest family whose finest cubes still hold at least four nodes.
    pub fn finest(grid: Grid) -> Result<Self> {
        let mut g = 0u32;
        while (1u64 << (g + 1)) * 4 <= grid.points_per_axis() as u64 {
            g += 1;
        }
        Self::new(grid, g)
    }

    /// All cubes in canonical (generation, corner) order.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.max_generation).flat_map(|g| {
            (0..(1u64 << g)).map(move |k| DyadicCube {
                generation: g,
                corner: k,
            })
        })
    }

    /// The cube of generation `g` containing grid node `j`.
    pub fn cube_of_node(&self, j: usize, g: u32) -> DyadicCube {
        let n = self.grid.points_per_axis() as u64;
        DyadicCube {
            generation: g,
            corner: (j as u64) * (1u64 << g) / n,
        }
    }
}

// --- maximal functions -----------------------------------------------------

/// Dyadic Hardy--Littlewood maximal function: at each node, the largest
/// average `<|f|>_Q` over family cubes containing the node.
pub fn maximal_function(f: &SampledFunction, family: &DyadicFamily) -> Result<SampledFunction> {
    if f.grid != family.grid {
        return Err(CzError::GridMismatch(
            "maximal function over a foreign grid".into(),
        ));
    }
    let n = f.grid.len();
    let mags: Vec<f64> = f.values.iter().map(|v| v.norm()).collect();
    let mut out = vec![0.0f64; n];
    for g in 0..=family.max_generation {
        for k in 0..(1u64 << g) {
            let q = DyadicCube {
                generation: g,
                corner: k,
            };
            let range = q.node_range(&f.grid);
            if range.is_empty() {
                continue;
            }
            let avg = mags[range.clone()].iter().sum::<f64>() / range.len() as f64;
            for j in range {
                out[j] = out[j].max(avg);
            }
        }
    }
    SampledFunction::from_values(f.grid, out.into_iter().map(|v| C64::new(v, 0.0)).collect())
}

/// The sub-trilinear intrinsic maximal function
/// `M(f1, f2, f3)(w) = max_t prod_i Psi_{w,t}(f_i)`, where `Psi_{w,t}(f)` is
/// the dictionary maximum of `|<f, theta_{w,t}>|` over a scalar
/// (noncancellative) dictionary and `t` runs over `scales`.
///
/// Coefficients at all nodes of one scale are computed in one pass as a
/// periodic cross-correlation, so the cost is one FFT per (member, scale).
pub fn intrinsic_maximal(
    f1: &SampledFunction,
    f2: &SampledFunction,
    f3: &SampledFunction,
    dict: &WaveletDictionary,
    scales: &[f64],
) -> Result<SampledFunction> {
    if dict.tensor {
        return Err(CzError::Constraint(
            "the intrinsic maximal function uses a scalar dictionary".into(),
        ));
    }
    let grid = f1.grid;
    if f2.grid != grid || f3.grid != grid {
        return Err(CzError::GridMismatch(
            "intrinsic maximal arguments on different grids".into(),
        ));
    }
    if scales.is_empty() {
        return Err(CzError::Constraint("no scales for the maximal function".into()));
    }
    let tables: Vec<HatTable> = dict
        .members
        .iter()
        .map(|m| HatTable::new(m.first(), 16))
        .collect::<Result<_>>()?;
    let fs = [f1, f2, f3];
    let n = grid.len();
    let per_scale: Vec<Vec<f64>> = scales
        .par_iter()
        .map(|&t| -> Result<Vec<f64>> {
            let mut slot = [vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]];
            for table in &tables {
                let theta = table.render(&grid, &[0.0, 0.0], t)?;
                let kernel = theta.reflected();
                for (i, f) in fs.iter().enumerate() {
                    let corr = convolve(f, &kernel)?;
                    for (s, v) in slot[i].iter_mut().zip(&corr.values) {
                        *s = s.max(v.norm());
                    }
                }
            }
            Ok((0..n).map(|j| slot[0][j] * slot[1][j] * slot[2][j]).collect())
        })
        .collect::<Result<_>>()?;
    let best: Vec<C64> = (0..n)
        .map(|j| {
            let m = per_scale.iter().map(|s| s[j]).fold(0.0f64, f64::max);
            C64::new(m, 0.0)
        })
        .collect();
    SampledFunction::from_values(grid, best)
}

// --- sparse collections ----------------------------------------------------

/// One collection entry: a cube and its carved major subset `E_Q`.
#[derive(Debug, Clone, Serialize)]
pub struct SparseEntry {
    pub cube: DyadicCube,
    /// Grid node indices of `E_Q`.
    pub nodes: Vec<usize>,
}

/// A collection of dyadic cubes with pairwise disjoint subsets `E_Q` in `Q`
/// of node density above one half.
#[derive(Debug, Clone, Serialize)]
pub struct SparseCollection {
    #[serde(skip)]
    pub grid: Grid,
    pub entries: Vec<SparseEntry>,
}

impl SparseCollection {
    /// Check the three defining invariants exactly, in node counts:
    /// `E_Q` inside `Q`, `|E_Q| > |Q| / 2`, and pairwise disjointness.
    pub fn verify(&self) -> Result<()> {
        let mut taken = vec![false; self.grid.len()];
        for entry in &self.entries {
            let range = entry.cube.node_range(&self.grid);
            for &j in &entry.nodes {
                if !range.contains(&j) {
                    return Err(CzError::Constraint(format!(
                        "node {j} of E_Q escapes its cube {:?}",
                        entry.cube
                    )));
                }
                if taken[j] {
                    return Err(CzError::Constraint(format!(
                        "node {j} belongs to two carved sets"
                    )));
                }
                taken[j] = true;
            }
            if 2 * entry.nodes.len() <= range.len() {
                return Err(CzError::Constraint(format!(
                    "carved set of {:?} has density {} / {}",
                    entry.cube,
                    entry.nodes.len(),
                    range.len()
                )));
            }
        }
        Ok(())
    }
}

/// Mean of `|f|` over the nodes of a mask; zero for an empty mask.
fn masked_average(f: &SampledFunction, mask: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (v, &m) in f.values.iter().zip(mask) {
        if m {
            sum += v.norm();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn windowed(f: &SampledFunction, mask: &[bool]) -> SampledFunction {
    let values = f
        .values
        .iter()
        .zip(mask)
        .map(|(v, &m)| if m { *v } else { C64::new(0.0, 0.0) })
        .collect();
    SampledFunction::from_values(f.grid, values).expect("windowing keeps values finite")
}

/// Find the level set `E = { M > C * base }` by doubling `C` from 1 until
/// `E` covers strictly less than half of the `target_count` reference nodes,
/// up to `max_doublings` doublings.
fn calibrate_level_set(
    m: &[f64],
    base: f64,
    target_count: usize,
    max_doublings: u32,
) -> Result<Vec<bool>> {
    let mut c = 1.0f64;
    for _ in 0..=max_doublings {
        let mask: Vec<bool> = m.iter().map(|&v| v > c * base).collect();
        let count = mask.iter().filter(|&&b| b).count();
        if 2 * count < target_count {
            return Ok(mask);
        }
        c *= 2.0;
    }
    let count = m.iter().filter(|&&v| v > c / 2.0 * base).count();
    Err(CzError::Calibration {
        doublings: max_doublings,
        ratio: count as f64 / target_count.max(1) as f64,
    })
}

/// Maximal dyadic cubes `Q` strictly below `q0` whose ninefold dilate lies
/// entirely inside the level set, scanned coarse to fine so no selected cube
/// sits inside another.
fn select_maximal_cubes(
    grid: &Grid,
    q0: DyadicCube,
    e_mask: &[bool],
    max_generation: u32,
) -> Vec<DyadicCube> {
    let mut selected: Vec<DyadicCube> = Vec::new();
    for g in (q0.generation + 1)..=max_generation {
        let first = q0.corner << (g - q0.generation);
        let count = 1u64 << (g - q0.generation);
        for k in first..first + count {
            let q = DyadicCube {
                generation: g,
                corner: k,
            };
            if q.node_range(grid).is_empty() {
                continue;
            }
            if selected.iter().any(|s| s.contains_cube(&q)) {
                continue;
            }
            let mut inside = true;
            let mut any = false;
            for j in 0..grid.len() {
                if q.dilate_contains(grid, 9.0, grid.coord(j)) {
                    any = true;
                    if !e_mask[j] {
                        inside = false;
                        break;
                    }
                }
            }
            if any && inside {
                selected.push(q);
            }
        }
    }
    selected
}

const MAX_DOUBLINGS: u32 = 40;

/// Default recursion depth; deeper levels fall below quadrature resolution.
pub const DEFAULT_MAX_DEPTH: u32 = 5;

fn build_recursive(
    fs: [&SampledFunction; 3],
    q0: DyadicCube,
    dict: &WaveletDictionary,
    scales: &[f64],
    family: &DyadicFamily,
    depth: u32,
) -> Result<Vec<SparseEntry>> {
    let grid = fs[0].grid;
    let all_nodes: Vec<usize> = q0.node_range(&grid).collect();
    // window the inputs to the threefold dilate; the construction only ever
    // sees f_i 1_{3 Q0}
    let mask3 = q0.dilate_mask(&grid, 3.0);
    let wins: Vec<SampledFunction> = fs.iter().map(|f| windowed(f, &mask3)).collect();
    let base: f64 = wins.iter().map(|f| masked_average(f, &mask3)).product();
    if depth == 0 || base == 0.0 {
        return Ok(vec![SparseEntry {
            cube: q0,
            nodes: all_nodes,
        }]);
    }
    let m = intrinsic_maximal(&wins[0], &wins[1], &wins[2], dict, scales)?;
    let m_vals: Vec<f64> = m.values.iter().map(|v| v.re).collect();
    let e_mask = calibrate_level_set(&m_vals, base, all_nodes.len(), MAX_DOUBLINGS)?;
    let selected = select_maximal_cubes(&grid, q0, &e_mask, family.max_generation);
    let carved: Vec<usize> = all_nodes
        .iter()
        .copied()
        .filter(|&j| !selected.iter().any(|q| q.node_range(&grid).contains(&j)))
        .collect();
    let mut entries = vec![SparseEntry {
        cube: q0,
        nodes: carved,
    }];
    let children: Vec<Vec<SparseEntry>> = selected
        .par_iter()
        .map(|&q| {
            build_recursive(
                [&wins[0], &wins[1], &wins[2]],
                q,
                dict,
                scales,
                family,
                depth - 1,
            )
        })
        .collect::<Result<_>>()?;
    for sub in children {
        entries.extend(sub);
    }
    Ok(entries)
}

/// Stopping-time construction of a sparse collection below `q0`.
///
/// Each level windows the inputs to `3 Q`, calibrates the level-set
/// threshold by doubling until the level set covers under half of `Q`,
/// selects the maximal dyadic cubes whose ninefold dilates sit inside the
/// level set, carves `E_Q = Q` minus the selected cubes, and recurses into
/// the selected cubes up to `max_depth` levels.
pub fn build_sparse_collection(
    f1: &SampledFunction,
    f2: &SampledFunction,
    f3: &SampledFunction,
    q0: DyadicCube,
    dict: &WaveletDictionary,
    scales: &[f64],
    max_depth: u32,
) -> Result<SparseCollection> {
    let grid = f1.grid;
    let family = DyadicFamily::finest(grid)?;
    if f2.grid != grid || f3.grid != grid {
        return Err(CzError::GridMismatch(
            "sparse collection inputs on different grids".into(),
        ));
    }
    if q0.node_range(&grid).is_empty() {
        return Err(CzError::Constraint("root cube holds no grid nodes".into()));
    }
    let mut entries = build_recursive([f1, f2, f3], q0, dict, scales, &family, max_depth)?;
    entries.sort_by_key(|e| (e.cube.generation, e.cube.corner));
    let collection = SparseCollection { grid, entries };
    collection.verify()?;
    Ok(collection)
}

// --- sparse form values ----------------------------------------------------

/// Normalized cube average `<f>_{p,Q} = |Q|^{-1/p} ||f||_{L^p(Q)}`; the
/// limit `p = infinity` is the max of `|f|` over the cube.
fn cube_average(f: &SampledFunction, q: &DyadicCube, p: f64) -> f64 {
    let range = q.node_range(&f.grid);
    if range.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return f.values[range].iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let h = f.grid.spacing();
    let measure = range.len() as f64 * h;
    let sum: f64 = f.values[range].iter().map(|v| v.norm().powf(p)).sum::<f64>() * h;
    measure.powf(-1.0 / p) * sum.powf(1.0 / p)
}

/// The sparse form `sum_Q |Q| <f1>_{p1,Q} <f2>_{p2,Q} <f3>_{p3,Q}`.
pub fn sparse_form_value(
    collection: &SparseCollection,
    f1: &SampledFunction,
    f2: &SampledFunction,
    f3: &SampledFunction,
    p: [f64; 3],
) -> Result<f64> {
    for (f, name) in [(f1, "first"), (f2, "second"), (f3, "third")] {
        if f.grid != collection.grid {
            return Err(CzError::GridMismatch(format!(
                "{name} argument lives on a foreign grid"
            )));
        }
    }
    if p.iter().any(|&pi| pi < 1.0) {
        return Err(CzError::Constraint(
            "sparse-form exponents must lie in [1, infinity]".into(),
        ));
    }
    Ok(collection
        .entries
        .iter()
        .map(|e| {
            e.cube.measure(&collection.grid)
                * cube_average(f1, &e.cube, p[0])
                * cube_average(f2, &e.cube, p[1])
                * cube_average(f3, &e.cube, p[2])
        })
        .sum())
}

// --- domination certificates -----------------------------------------------

/// Which intrinsic form a certificate measures.  The sigma variants carry
/// the decay-asymmetry parameter; the paraproduct variants carry the symbol.
pub enum IntrinsicFormKind<'a> {
    Mss,
    PiB(&'a SampledFunction),
    MssSigma(f64),
    PiBSigma(&'a SampledFunction, f64),
}

impl IntrinsicFormKind<'_> {
    fn sigma(&self) -> Option<f64> {
        match self {
            IntrinsicFormKind::MssSigma(s) | IntrinsicFormKind::PiBSigma(_, s) => Some(*s),
            _ => None,
        }
    }
}

/// Outcome of one domination experiment: the form value, the sparse-form
/// value over a freshly built collection, and their ratio.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub form_value: f64,
    pub sparse_value: f64,
    pub empirical_constant: f64,
    pub exponents: [f64; 3],
    pub sigma: Option<f64>,
    pub cube_count: usize,
    pub degenerate: bool,
}

/// Evaluate the requested intrinsic form, build a sparse collection for the
/// same triple, and report the empirical domination constant
/// `form / sparse`.  Sigma variants require `1/p2 + 1/p3 < (sigma + d)/d`
/// strictly; a zero triple (or a vanishing sparse value) is flagged
/// degenerate instead of dividing by zero.
#[allow(clippy::too_many_arguments)]
pub fn certify_domination(
    kind: IntrinsicFormKind,
    f1: &SampledFunction,
    f2: &SampledFunction,
    f3: &SampledFunction,
    p: [f64; 3],
    pair_dict: &WaveletDictionary,
    rapid_dict: &WaveletDictionary,
    max_dict: &WaveletDictionary,
    ag: &AffineGrid,
    max_depth: u32,
) -> Result<DominationReport> {
    let d = f1.grid.dim() as f64;
    if let Some(sigma) = kind.sigma() {
        let lhs = 1.0 / p[1] + 1.0 / p[2];
        let rhs = (sigma + d) / d;
        if lhs >= rhs {
            return Err(CzError::Constraint(format!(
                "exponents violate 1/p2 + 1/p3 < (sigma + d)/d: {lhs} >= {rhs}"
            )));
        }
    }
    let form_value = match &kind {
        IntrinsicFormKind::Mss => mss_form(f1, f2, f3, pair_dict, rapid_dict, ag)?,
        IntrinsicFormKind::PiB(b) => pi_b_form(b, f1, f2, f3, pair_dict, rapid_dict, ag)?,
        IntrinsicFormKind::MssSigma(s) => {
            msssig_form(f1, f2, f3, *s, pair_dict, rapid_dict, ag)?
        }
        IntrinsicFormKind::PiBSigma(b, s) => {
            pi_b_sigma_form(b, f1, f2, f3, *s, pair_dict, rapid_dict, ag)?
        }
    };
    let scales: Vec<f64> = (0..ag.num_scales).map(|j| ag.scale(j)).collect();
    let collection = build_sparse_collection(
        f1,
        f2,
        f3,
        DyadicCube::root(),
        max_dict,
        &scales,
        max_depth,
    )?;
    let sparse_value = sparse_form_value(&collection, f1, f2, f3, p)?;
    let degenerate = sparse_value == 0.0;
    Ok(DominationReport {
        form_value,
        sparse_value,
        empirical_constant: if degenerate {
            0.0
        } else {
            form_value / sparse_value
        },
        exponents: p,
        sigma: kind.sigma(),
        cube_count: collection.entries.len(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AffinePoint;
    use crate::wavelet::{build_dictionary, WaveletClassSpec};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval_grid() -> Grid {
        Grid::new(1, 16.0, 256).unwrap()
    }

    fn random_field(grid: Grid, seed: u64) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts = Vec::new();
        for _ in 0..3 {
            let c = -4.0 + 8.0 * rng.gen::<f64>();
            let wdt = 0.5 + 2.0 * rng.gen::<f64>();
            let frq = 3.0 * rng.gen::<f64>();
            let amp = -1.0 + 2.0 * rng.gen::<f64>();
            parts.push((c, wdt, frq, amp));
        }
        SampledFunction::from_fn(grid, "random field", move |x, _| {
            parts
                .iter()
                .map(|(c, w, q, a)| a * (-((x - c) / w).powi(2)).exp() * (q * x).cos())
                .sum()
        })
        .unwrap()
    }

    fn scalar_dict(size: usize, seed: u64) -> WaveletDictionary {
        let z0 = AffinePoint::new1(0.0, 1.0);
        build_dictionary(&WaveletClassSpec::plain(0, 0.75), z0, size, seed, false).unwrap()
    }

    fn scales() -> Vec<f64> {
        vec![1.0, 2.0, 4.0, 8.0]
    }

    fn indicator(grid: Grid, q: &DyadicCube) -> SampledFunction {
        let range = q.node_range(&grid);
        let values = (0..grid.len())
            .map(|j| {
                if range.contains(&j) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        SampledFunction::from_values(grid, values).unwrap()
    }

    // --- dyadic geometry ---------------------------------------------------

    #[test]
    fn dyadic_cubes_nest_or_are_disjoint() {
        let grid = eval_grid();
        let family = DyadicFamily::new(grid, 4).unwrap();
        let cubes: Vec<DyadicCube> = family.cubes().collect();
        for a in &cubes {
            for b in &cubes {
                let ra = a.node_range(&grid);
                let rb = b.node_range(&grid);
                let overlap = ra.start.max(rb.start) < ra.end.min(rb.end);
                let comparable = a.contains_cube(b) || b.contains_cube(a);
                assert_eq!(
                    overlap, comparable,
                    "cubes {a:?} and {b:?} must be disjoint or comparable"
                );
            }
        }
    }

    #[test]
    fn children_partition_their_parent() {
        let grid = eval_grid();
        for g in 0..5u32 {
            for k in 0..(1u64 << g) {
                let q = DyadicCube {
                    generation: g,
                    corner: k,
                };
                let [a, b] = q.children();
                assert_eq!(a.node_range(&grid).start, q.node_range(&grid).start);
                assert_eq!(a.node_range(&grid).end, b.node_range(&grid).start);
                assert_eq!(b.node_range(&grid).end, q.node_range(&grid).end);
                assert_abs_diff_eq!(
                    a.measure(&grid) + b.measure(&grid),
                    q.measure(&grid),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn node_cube_lookup_is_consistent() {
        let grid = eval_grid();
        let family = DyadicFamily::new(grid, 5).unwrap();
        for g in 0..=5u32 {
            for j in (0..grid.len()).step_by(7) {
                let q = family.cube_of_node(j, g);
                assert!(q.node_range(&grid).contains(&j), "node {j} generation {g}");
            }
        }
    }

    // --- maximal functions -------------------------------------------------

    #[test]
    fn maximal_function_of_cube_indicator() {
        let grid = eval_grid();
        let family = DyadicFamily::new(grid, 4).unwrap();
        let q = DyadicCube {
            generation: 2,
            corner: 1,
        };
        let f = indicator(grid, &q);
        let m = maximal_function(&f, &family).unwrap();
        let range = q.node_range(&grid);
        for j in 0..grid.len() {
            if range.contains(&j) {
                assert_abs_diff_eq!(m.values[j].re, 1.0, epsilon = 1e-12);
            } else {
                assert!(m.values[j].re < 1.0, "node {j} outside the cube");
            }
        }
    }

    #[test]
    fn maximal_function_dominates_finest_averages_and_kills_zero() {
        let grid = eval_grid();
        let family = DyadicFamily::finest(grid).unwrap();
        let f = random_field(grid, 11);
        let m = maximal_function(&f, &family).unwrap();
        for j in 0..grid.len() {
            let q = family.cube_of_node(j, family.max_generation);
            let range = q.node_range(&grid);
            let avg = f.values[range.clone()].iter().map(|v| v.norm()).sum::<f64>()
                / range.len() as f64;
            assert!(m.values[j].re >= avg - 1e-12);
        }
        let zero = SampledFunction::zeros(grid);
        let mz = maximal_function(&zero, &family).unwrap();
        assert!(mz.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn intrinsic_maximal_zero_and_homogeneous() {
        let grid = eval_grid();
        let dict = scalar_dict(2, 5);
        let f1 = random_field(grid, 21);
        let f2 = random_field(grid, 22);
        let f3 = random_field(grid, 23);
        let zero = SampledFunction::zeros(grid);
        let mz = intrinsic_maximal(&f1, &zero, &f3, &dict, &scales()).unwrap();
        assert!(mz.values.iter().all(|v| v.norm() == 0.0));

        let m = intrinsic_maximal(&f1, &f2, &f3, &dict, &scales()).unwrap();
        let ms = intrinsic_maximal(
            &f1.scaled(C64::new(-2.5, 0.0)),
            &f2,
            &f3,
            &dict,
            &scales(),
        )
        .unwrap();
        for (a, b) in m.values.iter().zip(&ms.values) {
            assert_abs_diff_eq!(2.5 * a.re, b.re, epsilon = 1e-10 * (1.0 + a.re.abs()));
        }
    }

    #[test]
    fn intrinsic_maximal_monotone_under_dictionary_enlargement() {
        let grid = eval_grid();
        let small = scalar_dict(2, 5);
        let large = scalar_dict(5, 5);
        let f1 = random_field(grid, 31);
        let f2 = random_field(grid, 32);
        let f3 = random_field(grid, 33);
        let ms = intrinsic_maximal(&f1, &f2, &f3, &small, &scales()).unwrap();
        let ml = intrinsic_maximal(&f1, &f2, &f3, &large, &scales()).unwrap();
        for (s, l) in ms.values.iter().zip(&ml.values) {
            assert!(s.re <= l.re + 1e-12, "{} vs {}", s.re, l.re);
        }
    }

    // --- the stopping-time construction ------------------------------------

    #[test]
    fn smooth_triple_collection_passes_invariants() {
        let grid = eval_grid();
        let dict = scalar_dict(2, 9);
        let f1 = SampledFunction::from_fn(grid, "bump", |x, _| (-((x + 2.0) / 2.0).powi(2)).exp())
            .unwrap();
        let f2 =
            SampledFunction::from_fn(grid, "bump", |x, _| (-(x / 1.5).powi(2)).exp()).unwrap();
        let f3 = SampledFunction::from_fn(grid, "bump", |x, _| (-((x - 3.0) / 2.0).powi(2)).exp())
            .unwrap();
        let collection =
            build_sparse_collection(&f1, &f2, &f3, DyadicCube::root(), &dict, &scales(), 2)
                .unwrap();
        collection.verify().unwrap();
        assert!(!collection.entries.is_empty());
        for pair in collection.entries.windows(2) {
            let a = (pair[0].cube.generation, pair[0].cube.corner);
            let b = (pair[1].cube.generation, pair[1].cube.corner);
            assert!(a <= b, "entries must come in canonical order");
        }
    }

    #[test]
    fn zero_depth_returns_the_root_alone() {
        let grid = eval_grid();
        let dict = scalar_dict(2, 9);
        let f = random_field(grid, 41);
        let collection =
            build_sparse_collection(&f, &f, &f, DyadicCube::root(), &dict, &scales(), 0).unwrap();
        assert_eq!(collection.entries.len(), 1);
        assert_eq!(collection.entries[0].cube, DyadicCube::root());
        assert_eq!(collection.entries[0].nodes.len(), grid.len());
    }

    #[test]
    fn concentrated_support_yields_concentrated_level_set() {
        let grid = eval_grid();
        let dict = scalar_dict(2, 9);
        let spike_center = 1.5;
        let f = SampledFunction::from_fn(grid, "spike", move |x, _| {
            (-((x - spike_center) / 0.15).powi(2)).exp()
        })
        .unwrap();
        let m = intrinsic_maximal(&f, &f, &f, &dict, &scales()).unwrap();
        let base = masked_average(&f, &vec![true; grid.len()]).powi(3);
        let m_vals: Vec<f64> = m.values.iter().map(|v| v.re).collect();
        let e_mask = calibrate_level_set(&m_vals, base, grid.len(), MAX_DOUBLINGS).unwrap();
        let (mut near, mut total) = (0usize, 0usize);
        for (j, &inside) in e_mask.iter().enumerate() {
            if inside {
                total += 1;
                if periodic_distance(&grid, grid.coord(j), spike_center) <= 4.0 {
                    near += 1;
                }
            }
        }
        assert!(total > 0, "the level set must not be empty for a genuine spike");
        assert!(
            near as f64 >= 0.9 * total as f64,
            "level set concentrates near the spike: {near} of {total}"
        );

        let collection =
            build_sparse_collection(&f, &f, &f, DyadicCube::root(), &dict, &scales(), 2).unwrap();
        let root_entry = &collection.entries[0];
        assert_eq!(root_entry.cube, DyadicCube::root());
        assert!(2 * root_entry.nodes.len() > grid.len());
    }

    #[test]
    fn calibration_failure_reports_the_level_set_ratio() {
        let n = 200usize;
        let m: Vec<f64> = (0..n)
            .map(|j| if j % 5 < 3 { f64::INFINITY } else { 0.0 })
            .collect();
        let err = calibrate_level_set(&m, 1.0, n, MAX_DOUBLINGS).unwrap_err();
        match err {
            CzError::Calibration { doublings, ratio } => {
                assert_eq!(doublings, MAX_DOUBLINGS);
                assert_abs_diff_eq!(ratio, 0.6, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    // --- sparse form values ------------------------------------------------

    #[test]
    fn sparse_value_vanishes_with_any_zero_argument() {
        let grid = eval_grid();
        let dict = scalar_dict(2, 9);
        let f = random_field(grid, 51);
        let collection =
            build_sparse_collection(&f, &f, &f, DyadicCube::root(), &dict, &scales(), 1).unwrap();
        let zero = SampledFunction::zeros(grid);
        let v = sparse_form_value(&collection, &f, &zero, &f, [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_cube_of_indicators_gives_the_cube_measure() {
        let grid = eval_grid();
        let q = DyadicCube {
            generation: 3,
            corner: 5,
        };
        let collection = SparseCollection {
            grid,
            entries: vec![SparseEntry {
                cube: q,
                nodes: q.node_range(&grid).collect(),
            }],
        };
        collection.verify().unwrap();
        let f = indicator(grid, &q);
        let v = sparse_form_value(&collection, &f, &f, &f, [1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v, q.measure(&grid), epsilon = 1e-12);
    }

    #[test]
    fn sparse_value_is_monotone_in_the_exponents() {
        let grid = eval_grid();
        let collection = SparseCollection {
            grid,
            entries: vec![SparseEntry {
                cube: DyadicCube::root(),
                nodes: (0..grid.len()).collect(),
            }],
        };
        let pairs = [
            ([1.0, 1.0, 1.0], [2.0, 1.0, 1.0]),
            ([1.0, 1.0, 1.0], [1.5, 2.0, f64::INFINITY]),
            ([1.0, 2.0, 3.0], [2.0, 2.0, 4.0]),
        ];
        for seed in 0..10u64 {
            let f1 = random_field(grid, 500 + seed);
            let f2 = random_field(grid, 600 + seed);
            let f3 = random_field(grid, 700 + seed);
            for (lo, hi) in pairs {
                let a = sparse_form_value(&collection, &f1, &f2, &f3, lo).unwrap();
                let b = sparse_form_value(&collection, &f1, &f2, &f3, hi).unwrap();
                assert!(a <= b + 1e-10, "seed {seed}: {a} > {b} for {lo:?} vs {hi:?}");
            }
        }
    }

    // --- domination certificates -------------------------------------------

    fn mss_dicts(seed: u64) -> (WaveletDictionary, WaveletDictionary) {
        let z0 = AffinePoint::new1(0.0, 1.0);
        let mut spec = WaveletClassSpec::cancellative(0, 0.75);
        spec.eta = Some(0.75);
        let pair = build_dictionary(&spec, z0, 3, seed, true).unwrap();
        let rapid =
            build_dictionary(&WaveletClassSpec::rapid_decay(0.75, 1), z0, 3, seed + 100, false)
                .unwrap();
        (pair, rapid)
    }

    #[test]
    fn mss_domination_constant_is_stable_across_an_ensemble() {
        let grid = eval_grid();
        let ag = AffineGrid::spanning(grid, 32, 1.0, 8.0, 4).unwrap();
        let (pair, rapid) = mss_dicts(7);
        let max_dict = scalar_dict(2, 9);
        let mut constants = Vec::new();
        for seed in 0..20u64 {
            let f1 = random_field(grid, 300 + seed);
            let f2 = random_field(grid, 320 + seed);
            let f3 = random_field(grid, 340 + seed);
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
            assert!(!report.degenerate, "seed {seed} unexpectedly degenerate");
            assert!(report.empirical_constant.is_finite() && report.empirical_constant > 0.0);
            constants.push(report.empirical_constant);
        }
        let max = constants.iter().cloned().fold(f64::MIN, f64::max);
        let min = constants.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            max / min < 50.0,
            "empirical constants spread too widely: {min} .. {max}"
        );
    }

    #[test]
    fn sigma_exponents_outside_the_admissible_range_are_rejected() {
        let grid = eval_grid();
        let ag = AffineGrid::spanning(grid, 32, 1.0, 8.0, 4).unwrap();
        let (pair, rapid) = mss_dicts(7);
        let max_dict = scalar_dict(2, 9);
        let f = random_field(grid, 71);
        // 1/p2 + 1/p3 = 5/3 >= (0.4 + 1)/1
        let err = certify_domination(
            IntrinsicFormKind::MssSigma(0.4),
            &f,
            &f,
            &f,
            [1.0, 1.2, 1.2],
            &pair,
            &rapid,
            &max_dict,
            &ag,
            1,
        )
        .unwrap_err();
        match err {
            CzError::Constraint(msg) => assert!(msg.contains("1/p2 + 1/p3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_triple_reports_degenerate() {
        let grid = eval_grid();
        let ag = AffineGrid::spanning(grid, 32, 1.0, 8.0, 4).unwrap();
        let (pair, rapid) = mss_dicts(7);
        let max_dict = scalar_dict(2, 9);
        let zero = SampledFunction::zeros(grid);
        let report = certify_domination(
            IntrinsicFormKind::Mss,
            &zero,
            &zero,
            &zero,
            [1.0, 1.0, 1.0],
            &pair,
            &rapid,
            &max_dict,
            &ag,
            2,
        )
        .unwrap();
        assert!(report.degenerate);
        assert_eq!(report.empirical_constant, 0.0);
        assert_eq!(report.form_value, 0.0);
    }

    // --- localization bounds for class representatives ---------------------

    struct Localized {
        grid: Grid,
        theta: HatTable,
        eta: f64,
        delta: f64,
    }

    fn localized_setup() -> Localized {
        let grid = eval_grid();
        let z0 = AffinePoint::new1(0.0, 1.0);
        let dict =
            build_dictionary(&WaveletClassSpec::rapid_decay(0.5, 1), z0, 1, 77, false).unwrap();
        Localized {
            grid,
            theta: HatTable::new(dict.members[0].first(), 16).unwrap(),
            eta: 3.0,
            delta: 0.5,
        }
    }

    #[test]
    fn localized_coefficients_decay_away_from_the_cube() {
        let s = localized_setup();
        let q = DyadicCube {
            generation: 3,
            corner: 4,
        };
        let side = q.side(&s.grid);
        let center = q.center(&s.grid);
        let f = random_field(s.grid, 81);
        let mask: Vec<bool> = {
            let range = q.node_range(&s.grid);
            (0..s.grid.len()).map(|j| range.contains(&j)).collect()
        };
        let fq = windowed(&f, &mask);
        let avg = masked_average(&f, &mask);
        let mut max_ratio = 0.0f64;
        for w in [-10.0, -6.0, 9.0, 12.0, -14.0] {
            assert!((w - center).abs() > 1.5 * side, "w must stay outside 3Q");
            for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let theta = s.theta.render(&s.grid, &[w, 0.0], t).unwrap();
                let val = fq.pair(&theta).unwrap().norm();
                let dist = (w - center).abs();
                let bound =
                    avg * side * t.powf(s.eta) / t.max(dist).powf(1.0 + s.eta);
                if bound > 0.0 {
                    max_ratio = max_ratio.max(val / bound);
                }
            }
        }
        assert!(
            max_ratio < 50.0,
            "far-field coefficient bound violated: ratio {max_ratio}"
        );
    }

    #[test]
    fn mean_zero_inputs_gain_the_extra_cancellation_factor() {
        let s = localized_setup();
        let q = DyadicCube {
            generation: 3,
            corner: 4,
        };
        let side = q.side(&s.grid);
        let center = q.center(&s.grid);
        let f = random_field(s.grid, 82);
        let range = q.node_range(&s.grid);
        let mask: Vec<bool> = (0..s.grid.len()).map(|j| range.contains(&j)).collect();
        let mut fq = windowed(&f, &mask);
        // remove the cube mean so the coefficient gains the oscillation factor
        let mean = fq.values[range.clone()].iter().sum::<C64>() / range.len() as f64;
        for j in range {
            fq.values[j] -= mean;
        }
        let avg = masked_average(&fq, &mask);
        let mut max_ratio = 0.0f64;
        for w in [-10.0, -6.0, 9.0, 12.0] {
            for t in [0.5, 1.0, 2.0, 4.0] {
                let theta = s.theta.render(&s.grid, &[w, 0.0], t).unwrap();
                let val = fq.pair(&theta).unwrap().norm();
                let dist = (w - center).abs();
                let bound = avg * side.powf(1.0 + s.delta) * t.powf(s.eta - s.delta)
                    / t.max(dist).powf(1.0 + s.eta);
                if bound > 0.0 {
                    max_ratio = max_ratio.max(val / bound);
                }
            }
        }
        assert!(
            max_ratio < 50.0,
            "mean-zero coefficient bound violated: ratio {max_ratio}"
        );
    }

    #[test]
    fn outside_mass_is_controlled_by_the_maximal_function() {
        let s = localized_setup();
        let q = DyadicCube {
            generation: 3,
            corner: 4,
        };
        let side = q.side(&s.grid);
        let f = random_field(s.grid, 83);
        let mask3 = q.dilate_mask(&s.grid, 3.0);
        let outside: Vec<bool> = mask3.iter().map(|&m| !m).collect();
        let fout = windowed(&f, &outside);
        let family = DyadicFamily::finest(s.grid).unwrap();
        let m = maximal_function(&fout, &family).unwrap();
        let inf_m = q
            .node_range(&s.grid)
            .map(|j| m.values[j].re)
            .fold(f64::MAX, f64::min);
        let mut max_ratio = 0.0f64;
        for w in [q.center(&s.grid) - 1.0, q.center(&s.grid), q.center(&s.grid) + 1.0] {
            for t in [0.25, 0.5, 1.0, 2.0] {
                let theta = s.theta.render(&s.grid, &[w, 0.0], t).unwrap();
                let val = fout.pair(&theta).unwrap().norm();
                let bound = (t / side).powf(s.eta) * inf_m;
                if bound > 0.0 {
                    max_ratio = max_ratio.max(val / bound);
                }
            }
        }
        assert!(
            max_ratio < 50.0,
            "outside-mass bound violated: ratio {max_ratio}"
        );
    }

    #[test]
    fn disjoint_family_tail_sums_stay_bounded() {
        let grid = eval_grid();
        let delta = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(424242);
        for config in 0..100 {
            // random disjoint dyadic family by recursive splitting
            let mut leaves: Vec<DyadicCube> = Vec::new();
            let mut stack = vec![DyadicCube::root()];
            while let Some(q) = stack.pop() {
                if q.generation < 6 && rng.gen::<f64>() < 0.55 {
                    let [a, b] = q.children();
                    stack.push(a);
                    stack.push(b);
                } else {
                    leaves.push(q);
                }
            }
            let w = grid.coord(rng.gen_range(0..grid.len()));
            let t = (rng.gen::<f64>() * (8.0f64 / 0.1).ln()).exp() * 0.1;
            let sum: f64 = leaves
                .iter()
                .filter(|q| !q.dilate_contains(&grid, 3.0, w))
                .map(|q| {
                    let l = q.side(&grid);
                    let dist = periodic_distance(&grid, w, q.center(&grid));
                    q.measure(&grid) * l.min(t).powf(delta) / dist.powf(1.0 + delta)
                })
                .sum();
            assert!(
                sum < 40.0,
                "config {config}: tail sum {sum} exceeds the uniform bound"
            );
        }
    }
}
