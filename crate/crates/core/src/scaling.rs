//! High-density / slow-rate rescaling of the Richardson growth process:
//! empirical jump kernels on a Poisson sample, the limiting uniform-in-ball
//! kernels, cube-grained comparison statistics, and the convergence
//! experiment against the spatial branching process.
//!
//! Conventions: the disk graph of the growth run keeps the strict `< r` edge
//! rule; the neighbor counts and kernels use the closed `<= r` rule. The two
//! conventions differ on a measure-zero boundary and a conformance test
//! checks they agree on generic samples.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cells::{dist2, CellGrid};
use crate::error::{Error, Result};
use crate::fpp::PassageSpec;
use crate::params::unit_ball_volume;
use crate::point_process::{sample_ppp, PointSet, Window};
use crate::seeds::{derive, edge_key, splitmix64};
use crate::stats;

/// Guard on the occupied-set size for kernel evaluations.
pub const MAX_OCCUPIED: usize = 64;

/// Parameters of a rescaled growth run: the sample has intensity
/// `alpha * lambda`, passage times are `Exp(lambda_i / alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleParams {
    pub alpha: f64,
    pub lambda: f64,
    pub lambda_i: f64,
    pub radius: f64,
    pub dim: usize,
    pub half_width: f64,
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("lambda_i", self.lambda_i),
            ("radius", self.radius),
            ("half_width", self.half_width),
        ] {
            if !crate::params::positive_finite(v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.dim < 2 {
            return Err(Error::InvalidParameter("dim must be >= 2".into()));
        }
        Ok(())
    }
}

/// Index of the half-open cube `delta z + [-delta/2, delta/2)^d` containing `y`.
pub fn cube_index(y: &[f64], delta: f64) -> Vec<i64> {
    y.iter().map(|c| (c / delta + 0.5).floor() as i64).collect()
}

fn validate_occupied(ps: &PointSet, occupied: &[usize]) -> Result<()> {
    if occupied.is_empty() {
        return Err(Error::InvalidParameter("occupied set is empty".into()));
    }
    if occupied.len() > MAX_OCCUPIED {
        return Err(Error::InvalidParameter(format!(
            "occupied set of size {} exceeds the guard ({MAX_OCCUPIED})",
            occupied.len()
        )));
    }
    let mut seen = HashSet::new();
    for &i in occupied {
        if i >= ps.len() {
            return Err(Error::InvalidParameter(format!(
                "occupied index {i} is not a point of the sample"
            )));
        }
        if !seen.insert(i) {
            return Err(Error::InvalidParameter(format!(
                "occupied index {i} repeated"
            )));
        }
    }
    Ok(())
}

/// Multiplicities of eligible next points: for each sample point `y` outside
/// the occupied set, the number of occupied points within distance `<= r`.
fn neighbor_multiplicities(
    ps: &PointSet,
    grid: &CellGrid,
    occupied: &[usize],
) -> HashMap<usize, u32> {
    let in_s: HashSet<usize> = occupied.iter().copied().collect();
    let mut mult: HashMap<usize, u32> = HashMap::new();
    for &x in occupied {
        for id in grid.points_within(ps, ps.point(x), grid.cell_side(), false) {
            let id = id as usize;
            if !in_s.contains(&id) {
                *mult.entry(id).or_insert(0) += 1;
            }
        }
    }
    mult
}

/// Count, with multiplicity, of sample points within `<= r` of the occupied
/// set, excluding the set itself. Evaluates both the per-occupied-point sum
/// and the per-outside-point sum and checks they agree.
pub fn n_alpha(ps: &PointSet, occupied: &[usize], radius: f64) -> Result<u64> {
    validate_occupied(ps, occupied)?;
    let grid = CellGrid::build(ps, radius);
    let in_s: HashSet<usize> = occupied.iter().copied().collect();
    // sum over occupied x of |ball(x) \ S|
    let mut by_occupied = 0u64;
    for &x in occupied {
        by_occupied += grid
            .points_within(ps, ps.point(x), radius, false)
            .iter()
            .filter(|&&id| !in_s.contains(&(id as usize)))
            .count() as u64;
    }
    // sum over outside y of |{x in S : |x - y| <= r}|
    let r2 = radius * radius;
    let mut by_outside = 0u64;
    for y in 0..ps.len() {
        if in_s.contains(&y) {
            continue;
        }
        by_outside += occupied
            .iter()
            .filter(|&&x| dist2(ps.point(x), ps.point(y)) <= r2)
            .count() as u64;
    }
    if by_occupied != by_outside {
        return Err(Error::Integrity(format!(
            "neighbor-count identity broken: {by_occupied} vs {by_outside}"
        )));
    }
    Ok(by_occupied)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KernelProvenance {
    Empirical { alpha: f64 },
    Limit,
}

/// Cube-grained masses of a spatial jump kernel over the cube collection of
/// side `delta`, plus the temporal rate of the paired exponential kernel.
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub delta: f64,
    pub dim: usize,
    pub masses: BTreeMap<Vec<i64>, f64>,
    /// Monte Carlo standard errors for limit-kernel cubes (empty otherwise).
    pub se: BTreeMap<Vec<i64>, f64>,
    pub temporal_rate: f64,
    /// Flat coordinates of the conditioning source set.
    pub source: Vec<f64>,
    pub provenance: KernelProvenance,
}

impl KernelEstimate {
    pub fn mass_sum(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn mass(&self, cube: &[i64]) -> f64 {
        self.masses.get(cube).copied().unwrap_or(0.0)
    }

    /// CSV export: cube index coordinates, mass, standard error.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let cols: Vec<String> = (0..self.dim).map(|a| format!("cube_z{a}")).collect();
        writeln!(w, "{},mass,se", cols.join(","))?;
        for (cube, mass) in &self.masses {
            let idx: Vec<String> = cube.iter().map(|z| z.to_string()).collect();
            let se = self
                .se
                .get(cube)
                .map(|s| format!("{s}"))
                .unwrap_or_default();
            writeln!(w, "{},{mass},{se}", idx.join(","))?;
        }
        Ok(())
    }
}

/// Empirical spatial kernel of the next jump given the occupied set: cube
/// masses proportional to neighbor multiplicity, and the temporal rate
/// `N lambda_i / alpha`. Errors with [`Error::NoNeighbor`] when the kernel is
/// undefined.
pub fn empirical_spatial_kernel(
    ps: &PointSet,
    occupied: &[usize],
    radius: f64,
    delta: f64,
    alpha: f64,
    lambda_i: f64,
) -> Result<KernelEstimate> {
    validate_occupied(ps, occupied)?;
    if ![delta, radius, alpha, lambda_i].iter().all(|&v| crate::params::positive_finite(v)) {
        return Err(Error::InvalidParameter(
            "kernel needs positive radius, delta, alpha, lambda_i".into(),
        ));
    }
    let grid = CellGrid::build(ps, radius);
    let mult = neighbor_multiplicities(ps, &grid, occupied);
    let total: u64 = mult.values().map(|&m| m as u64).sum();
    if total == 0 {
        return Err(Error::NoNeighbor);
    }
    // accumulate in point order so the floating-point sums are reproducible
    let mut entries: Vec<(usize, u32)> = mult.into_iter().collect();
    entries.sort_unstable_by_key(|&(y, _)| y);
    let mut masses: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (y, m) in entries {
        *masses.entry(cube_index(ps.point(y), delta)).or_insert(0.0) +=
            m as f64 / total as f64;
    }
    let sum: f64 = masses.values().sum();
    for v in masses.values_mut() {
        *v /= sum;
    }
    let mut source = Vec::with_capacity(occupied.len() * ps.dim());
    for &x in occupied {
        source.extend_from_slice(ps.point(x));
    }
    Ok(KernelEstimate {
        delta,
        dim: ps.dim(),
        masses,
        se: BTreeMap::new(),
        temporal_rate: total as f64 * lambda_i / alpha,
        source,
        provenance: KernelProvenance::Empirical { alpha },
    })
}

/// Limit spatial kernel of the branching process: the uniform mixture of
/// balls around the source points, integrated over cubes. Cubes entirely
/// inside or outside a ball are handled exactly; boundary cubes use
/// stratified (jittered-grid) Monte Carlo with `mc_samples` draws and a
/// reported standard error. The temporal rate is
/// `|S| v_d r^d lambda lambda_i`.
pub fn limit_spatial_kernel(
    source: &[Vec<f64>],
    radius: f64,
    delta: f64,
    mc_samples: usize,
    lambda: f64,
    lambda_i: f64,
    seed: u64,
) -> Result<KernelEstimate> {
    if source.is_empty() {
        return Err(Error::InvalidParameter("source set is empty".into()));
    }
    if source.len() > MAX_OCCUPIED {
        return Err(Error::InvalidParameter(format!(
            "source set of size {} exceeds the guard ({MAX_OCCUPIED})",
            source.len()
        )));
    }
    if !crate::params::positive_finite(delta) || !crate::params::positive_finite(radius) || mc_samples == 0 {
        return Err(Error::InvalidParameter(
            "limit kernel needs positive radius, delta, mc_samples".into(),
        ));
    }
    let dim = source[0].len();
    if source.iter().any(|x| x.len() != dim) {
        return Err(Error::InvalidParameter(
            "source points must share one dimension".into(),
        ));
    }
    let norm = source.len() as f64 * unit_ball_volume(dim) * radius.powi(dim as i32);
    let grid_per_axis = (mc_samples as f64).powf(1.0 / dim as f64).floor().max(1.0) as usize;
    let r2 = radius * radius;

    let mut masses: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut variances: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (xi, x) in source.iter().enumerate() {
        // cubes whose closure can intersect the ball around x
        let lo: Vec<i64> = (0..dim)
            .map(|a| ((x[a] - radius) / delta + 0.5).floor() as i64 - 1)
            .collect();
        let hi: Vec<i64> = (0..dim)
            .map(|a| ((x[a] + radius) / delta + 0.5).floor() as i64 + 1)
            .collect();
        let mut cube = lo.clone();
        'cubes: loop {
            // classify the cube against the ball around x
            let mut near2 = 0.0f64;
            let mut far2 = 0.0f64;
            for a in 0..dim {
                let lo_edge = cube[a] as f64 * delta - delta / 2.0;
                let hi_edge = cube[a] as f64 * delta + delta / 2.0;
                let near = if x[a] < lo_edge {
                    lo_edge - x[a]
                } else if x[a] > hi_edge {
                    x[a] - hi_edge
                } else {
                    0.0
                };
                let far = (x[a] - lo_edge).abs().max((x[a] - hi_edge).abs());
                near2 += near * near;
                far2 += far * far;
            }
            let volume = if far2 <= r2 {
                Some((delta.powi(dim as i32), 0.0))
            } else if near2 >= r2 {
                None
            } else {
                // stratified jittered-grid sample of the cube
                let mut rng = ChaCha8Rng::seed_from_u64(stratum_seed(seed, xi, &cube));
                let cells = grid_per_axis.pow(dim as u32);
                let sub = delta / grid_per_axis as f64;
                let mut inside = 0usize;
                let mut idx = vec![0usize; dim];
                for _ in 0..cells {
                    let mut p = vec![0.0; dim];
                    for a in 0..dim {
                        let jitter: f64 = rng.random();
                        p[a] = cube[a] as f64 * delta - delta / 2.0
                            + (idx[a] as f64 + jitter) * sub;
                    }
                    if dist2(&p, x) <= r2 {
                        inside += 1;
                    }
                    for a in (0..dim).rev() {
                        idx[a] += 1;
                        if idx[a] < grid_per_axis {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
                let frac = inside as f64 / cells as f64;
                // conservative (crude-MC) error bound for the stratified draw
                let se = (frac * (1.0 - frac) / cells as f64).sqrt() * delta.powi(dim as i32);
                Some((frac * delta.powi(dim as i32), se))
            };
            if let Some((vol, se)) = volume {
                if vol > 0.0 || se > 0.0 {
                    *masses.entry(cube.clone()).or_insert(0.0) += vol / norm;
                    *variances.entry(cube.clone()).or_insert(0.0) += (se / norm).powi(2);
                }
            }
            for a in (0..dim).rev() {
                cube[a] += 1;
                if cube[a] <= hi[a] {
                    break;
                }
                if a == 0 {
                    break 'cubes;
                }
                cube[a] = lo[a];
            }
        }
    }
    masses.retain(|_, v| *v > 0.0);
    // renormalize away the Monte Carlo drift so masses sum to one exactly
    let sum: f64 = masses.values().sum();
    for v in masses.values_mut() {
        *v /= sum;
    }
    let se = variances
        .into_iter()
        .filter(|(k, _)| masses.contains_key(k))
        .map(|(k, v)| (k, v.sqrt()))
        .collect();
    Ok(KernelEstimate {
        delta,
        dim,
        masses,
        se,
        temporal_rate: norm * lambda * lambda_i,
        source: source.iter().flatten().copied().collect(),
        provenance: KernelProvenance::Limit,
    })
}

fn stratum_seed(seed: u64, source_index: usize, cube: &[i64]) -> u64 {
    let mut h = splitmix64(seed ^ (source_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for &z in cube {
        h = splitmix64(h ^ (z as u64));
    }
    h
}

/// Total-variation distance between two cube-grained kernels at a common
/// cube side. The union of charged cubes is walked in sorted order so the
/// floating-point sum is reproducible.
pub fn cube_tv_distance(a: &KernelEstimate, b: &KernelEstimate) -> Result<f64> {
    if a.delta != b.delta || a.dim != b.dim {
        return Err(Error::InvalidParameter(
            "kernels must share the cube side and dimension".into(),
        ));
    }
    let keys: std::collections::BTreeSet<&Vec<i64>> =
        a.masses.keys().chain(b.masses.keys()).collect();
    Ok(keys.into_iter().map(|k| (a.mass(k) - b.mass(k)).abs()).sum())
}

/// Result of the cube-regularity check: every cube inside the ball must hold
/// a point count within relative error `delta` of its mean.
#[derive(Debug, Clone, Serialize)]
pub struct RegReport {
    pub holds: bool,
    pub worst_deviation: f64,
    pub cubes_checked: usize,
}

pub fn reg_check(ps: &PointSet, ell: f64, delta: f64) -> Result<RegReport> {
    if !crate::params::positive_finite(ell) || !crate::params::positive_finite(delta) {
        return Err(Error::InvalidParameter(
            "reg_check needs positive ell and delta".into(),
        ));
    }
    if ell > ps.window().half_width() {
        return Err(Error::InvalidParameter(format!(
            "ball radius {ell} does not fit inside the window"
        )));
    }
    let dim = ps.dim();
    let expected = ps.intensity() * delta.powi(dim as i32);
    let mut counts: HashMap<Vec<i64>, u64> = HashMap::new();
    for p in ps.iter_points() {
        *counts.entry(cube_index(p, delta)).or_insert(0) += 1;
    }
    let zmax = (ell / delta).ceil() as i64 + 1;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut cube = vec![-zmax; dim];
    'outer: loop {
        // qualify: the cube closure lies inside the closed ball of radius ell
        let far2: f64 = cube
            .iter()
            .map(|&z| {
                let far = (z as f64 * delta).abs() + delta / 2.0;
                far * far
            })
            .sum();
        if far2 <= ell * ell {
            checked += 1;
            let count = counts.get(&cube).copied().unwrap_or(0);
            let dev = (count as f64 / expected - 1.0).abs();
            worst = worst.max(dev);
        }
        for a in (0..dim).rev() {
            cube[a] += 1;
            if cube[a] <= zmax {
                break;
            }
            if a == 0 {
                break 'outer;
            }
            cube[a] = -zmax;
        }
    }
    if checked == 0 {
        return Err(Error::InvalidParameter(format!(
            "no cube of side {delta} fits inside the ball of radius {ell}"
        )));
    }
    Ok(RegReport {
        holds: worst < delta,
        worst_deviation: worst,
        cubes_checked: checked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Sample the point process, grow by first-passage percolation with
    /// exponential weights, read jumps off the trace.
    Direct,
    /// Iterate the empirical jump kernel directly on the same sample.
    KernelChain,
}

/// One jump of a rescaled run: waiting time since the previous jump and the
/// location acquired.
#[derive(Debug, Clone)]
pub struct Jump {
    pub wait: f64,
    pub location: Vec<f64>,
}

/// First `k` jumps of the rescaled growth process on one sample.
#[derive(Debug, Clone)]
pub struct RescaledRun {
    pub alpha: f64,
    /// Location of the starting vertex (the sample point nearest the origin).
    pub z0: Vec<f64>,
    pub jumps: Vec<Jump>,
    pub completed: bool,
    /// Number of jumps achieved before the chain ran out of neighbors.
    pub extinct_at: Option<usize>,
    pub seed: u64,
}

/// Runs the rescaled growth process for `k` jumps. Both modes condition on
/// the same kind of sample; they must agree in distribution.
///
/// The starting vertex is the sample point nearest the origin. At the
/// intensities where the rescaling is studied the largest component holds
/// all but an exponentially small fraction of points, so no component check
/// is run here; a chain that runs out of neighbors is flagged incomplete
/// instead of silently truncated.
pub fn rescaled_richardson_run(
    scale: &ScaleParams,
    k: usize,
    seed: u64,
    mode: RunMode,
) -> Result<RescaledRun> {
    scale.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if scale.half_width < (k as f64 + 1.0) * scale.radius {
        return Err(Error::InvalidParameter(format!(
            "half_width {} cannot contain {k} jumps of radius {}",
            scale.half_width, scale.radius
        )));
    }
    let window = Window::centered(scale.dim, scale.half_width)?;
    let ps = sample_ppp(scale.alpha * scale.lambda, &window, derive(seed, 0))?;
    if ps.is_empty() {
        return Err(Error::Subcritical {
            fraction: 0.0,
            floor: 0.0,
        });
    }
    let grid = CellGrid::build(&ps, scale.radius);
    let origin = vec![0.0; scale.dim];
    let (q0, _) = grid.nearest(&ps, &origin, |_| true).unwrap();
    let q0 = q0 as usize;
    let z0 = ps.point(q0).to_vec();

    let jumps = match mode {
        RunMode::Direct => direct_growth(scale, &ps, &grid, q0, derive(seed, 1), k),
        RunMode::KernelChain => kernel_chain(scale, &ps, &grid, q0, derive(seed, 1), k),
    };
    let completed = jumps.len() == k;
    Ok(RescaledRun {
        alpha: scale.alpha,
        z0,
        extinct_at: (!completed).then_some(jumps.len()),
        jumps,
        completed,
        seed,
    })
}

/// Lazy first-passage growth from `source`: neighbors are enumerated from
/// the cell grid on demand and each edge weight is drawn through the keyed
/// mixer, so the full adjacency is never materialized.
fn direct_growth(
    scale: &ScaleParams,
    ps: &PointSet,
    grid: &CellGrid,
    source: usize,
    weight_seed: u64,
    k: usize,
) -> Vec<Jump> {
    let rate = scale.lambda_i / scale.alpha;
    let spec = PassageSpec::Exponential { rate };
    let r2 = scale.radius * scale.radius;
    let mut settled = vec![false; ps.len()];
    let mut best = vec![f64::INFINITY; ps.len()];
    let mut heap = std::collections::BinaryHeap::new();
    best[source] = 0.0;
    heap.push(std::cmp::Reverse((ordered(0.0), source as u32)));
    let mut jumps = Vec::with_capacity(k);
    let mut last_time = 0.0f64;
    while let Some(std::cmp::Reverse((t_bits, v))) = heap.pop() {
        let v = v as usize;
        if settled[v] {
            continue;
        }
        settled[v] = true;
        let t = f64::from_bits(t_bits);
        if v != source {
            jumps.push(Jump {
                wait: t - last_time,
                location: ps.point(v).to_vec(),
            });
            last_time = t;
            if jumps.len() == k {
                return jumps;
            }
        }
        let p = ps.point(v);
        grid.for_candidates(p, scale.radius, |w| {
            let w = w as usize;
            if w == v || settled[w] {
                return;
            }
            // growth graph keeps the strict edge rule
            if dist2(ps.point(w), p) < r2 {
                let tau = spec.draw(edge_key(weight_seed, v, w));
                let cand = t + tau;
                if cand < best[w] {
                    best[w] = cand;
                    heap.push(std::cmp::Reverse((ordered(cand), w as u32)));
                }
            }
        });
    }
    jumps
}

fn ordered(t: f64) -> u64 {
    // nonnegative finite times order correctly through their bit patterns
    t.to_bits()
}

/// Jump-chain sampler: waits are exponential in the neighbor count, the next
/// location is chosen with probability proportional to its multiplicity.
fn kernel_chain(
    scale: &ScaleParams,
    ps: &PointSet,
    grid: &CellGrid,
    source: usize,
    chain_seed: u64,
    k: usize,
) -> Vec<Jump> {
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);
    let mut in_s: HashSet<usize> = HashSet::from([source]);
    let mut mult: HashMap<usize, u32> = HashMap::new();
    let absorb = |point: usize, mult: &mut HashMap<usize, u32>, in_s: &HashSet<usize>| {
        for id in grid.points_within(ps, ps.point(point), scale.radius, false) {
            let id = id as usize;
            if !in_s.contains(&id) {
                *mult.entry(id).or_insert(0) += 1;
            }
        }
    };
    absorb(source, &mut mult, &in_s);
    let mut jumps = Vec::with_capacity(k);
    for _ in 0..k {
        let total: u64 = mult.values().map(|&m| m as u64).sum();
        if total == 0 {
            return jumps;
        }
        let rate = total as f64 * scale.lambda_i / scale.alpha;
        let wait = exp_draw(&mut rng, rate);
        // deterministic candidate order: ascending point id
        let mut candidates: Vec<(usize, u32)> = mult.iter().map(|(&y, &m)| (y, m)).collect();
        candidates.sort_unstable_by_key(|&(y, _)| y);
        let mut pick = (rng.random::<f64>() * total as f64) as u64;
        let mut chosen = candidates[candidates.len() - 1].0;
        for (y, m) in candidates {
            if (pick as i64) < m as i64 {
                chosen = y;
                break;
            }
            pick -= m as u64;
        }
        jumps.push(Jump {
            wait,
            location: ps.point(chosen).to_vec(),
        });
        in_s.insert(chosen);
        mult.remove(&chosen);
        absorb(chosen, &mut mult, &in_s);
    }
    jumps
}

fn exp_draw<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

/// Uniform draw from the ball of radius `r` around `center`, by rejection
/// from the bounding cube.
fn uniform_in_ball<R: Rng>(rng: &mut R, center: &[f64], r: f64) -> Vec<f64> {
    let d = center.len();
    loop {
        let offset: Vec<f64> = (0..d)
            .map(|_| r * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        if offset.iter().map(|o| o * o).sum::<f64>() < r * r {
            return center.iter().zip(&offset).map(|(c, o)| c + o).collect();
        }
    }
}

/// The limiting spatial branching process: every node births offspring at
/// rate `v_d r^d lambda lambda_i`, placed uniformly in the ball around the
/// parent. All nodes stay live forever.
#[derive(Debug, Clone)]
pub struct BranchingTree {
    pub dim: usize,
    /// Flat node positions; node 0 is the root at the origin.
    pub positions: Vec<f64>,
    /// Parent of each node (`None` for the root).
    pub parents: Vec<Option<usize>>,
    /// Absolute birth times, strictly increasing; 0 for the root.
    pub birth_times: Vec<f64>,
}

impl BranchingTree {
    pub fn len(&self) -> usize {
        self.birth_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.birth_times.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Jump-chain view: `(wait, location)` of each birth after the root.
    pub fn jumps(&self) -> Vec<Jump> {
        (1..self.len())
            .map(|i| Jump {
                wait: self.birth_times[i] - self.birth_times[i - 1],
                location: self.position(i).to_vec(),
            })
            .collect()
    }
}

/// Event-driven run of the branching process for `k` births. This is
/// exactly the limit-kernel chain: with `m` live nodes the next birth comes
/// after an `Exp(m v_d r^d lambda lambda_i)` wait, the parent is uniform
/// among live nodes, and the child is uniform in the parent's ball.
pub fn branching_run(
    lambda: f64,
    lambda_i: f64,
    radius: f64,
    dim: usize,
    k: usize,
    seed: u64,
) -> Result<BranchingTree> {
    if ![lambda, lambda_i, radius].iter().all(|&v| crate::params::positive_finite(v)) || dim < 2 {
        return Err(Error::InvalidParameter(
            "branching_run needs positive rates and radius, dim >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_rate = unit_ball_volume(dim) * radius.powi(dim as i32) * lambda * lambda_i;
    let mut tree = BranchingTree {
        dim,
        positions: vec![0.0; dim],
        parents: vec![None],
        birth_times: vec![0.0],
    };
    let mut t = 0.0;
    for _ in 0..k {
        let m = tree.len();
        t += exp_draw(&mut rng, m as f64 * node_rate);
        let parent = rng.random_range(0..m);
        let child = uniform_in_ball(&mut rng, tree.position(parent), radius);
        tree.positions.extend_from_slice(&child);
        tree.parents.push(Some(parent));
        tree.birth_times.push(t);
    }
    Ok(tree)
}

/// The limit-kernel chain as a bare `(wait, location)` sequence. Consumes
/// randomness exactly like [`branching_run`], so matched seeds produce the
/// same jumps.
pub fn limit_kernel_chain(
    lambda: f64,
    lambda_i: f64,
    radius: f64,
    dim: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Jump>> {
    Ok(branching_run(lambda, lambda_i, radius, dim, k, seed)?.jumps())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub statistic: String,
    pub coordinate: usize,
    pub value: f64,
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], w: &mut W) -> Result<()> {
    writeln!(w, "alpha,statistic,coordinate,value")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.alpha, row.statistic, row.coordinate, row.value
        )?;
    }
    Ok(())
}

/// Convergence experiment: for each `alpha`, `n_runs` rescaled growth runs
/// against `n_ref` branching runs, compared coordinate by coordinate —
/// Kolmogorov–Smirnov on each inter-jump time, energy distance on each jump
/// location, the median starting displacement, and the halting rate.
///
/// Run seeds are shared across the alpha grid (common random numbers), which
/// stabilizes the monotone trends the experiment reports.
pub fn convergence_experiment(
    base: &ScaleParams,
    alpha_grid: &[f64],
    k: usize,
    n_runs: usize,
    n_ref: usize,
    root_seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if alpha_grid.is_empty() || !alpha_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "alpha grid must be nonempty and increasing".into(),
        ));
    }
    if n_runs == 0 || n_ref == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "n_runs, n_ref, and k must be positive".into(),
        ));
    }
    // branching reference sample
    let refs: Vec<BranchingTree> = (0..n_ref)
        .into_par_iter()
        .map(|j| {
            branching_run(
                base.lambda,
                base.lambda_i,
                base.radius,
                base.dim,
                k,
                derive(root_seed, 0x0052_4546 + j as u64),
            )
        })
        .collect::<Result<_>>()?;
    let ref_t: Vec<Vec<f64>> = (1..=k)
        .map(|i| refs.iter().map(|t| t.birth_times[i] - t.birth_times[i - 1]).collect())
        .collect();
    let ref_z: Vec<Vec<f64>> = (1..=k)
        .map(|i| refs.iter().flat_map(|t| t.position(i).to_vec()).collect())
        .collect();

    let mut rows = Vec::new();
    for &alpha in alpha_grid {
        let scale = ScaleParams {
            alpha,
            ..base.clone()
        };
        let runs: Vec<RescaledRun> = (0..n_runs)
            .into_par_iter()
            .map(|j| rescaled_richardson_run(&scale, k, derive(root_seed, j as u64), RunMode::Direct))
            .collect::<Result<_>>()?;
        let halt_rate =
            runs.iter().filter(|r| !r.completed).count() as f64 / n_runs as f64;
        let z0_norms: Vec<f64> = runs
            .iter()
            .map(|r| r.z0.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect();
        rows.push(ConvergenceRow {
            alpha,
            statistic: "median_z0_norm".into(),
            coordinate: 0,
            value: stats::median(&z0_norms),
        });
        rows.push(ConvergenceRow {
            alpha,
            statistic: "halt_rate".into(),
            coordinate: 0,
            value: halt_rate,
        });
        for i in 1..=k {
            let t_i: Vec<f64> = runs
                .iter()
                .filter(|r| r.jumps.len() >= i)
                .map(|r| r.jumps[i - 1].wait)
                .collect();
            let z_i: Vec<f64> = runs
                .iter()
                .filter(|r| r.jumps.len() >= i)
                .flat_map(|r| r.jumps[i - 1].location.clone())
                .collect();
            if t_i.is_empty() {
                continue;
            }
            rows.push(ConvergenceRow {
                alpha,
                statistic: "ks_t".into(),
                coordinate: i,
                value: stats::ks_statistic(&t_i, &ref_t[i - 1]),
            });
            rows.push(ConvergenceRow {
                alpha,
                statistic: "energy_z".into(),
                coordinate: i,
                value: stats::energy_distance(&z_i, &ref_z[i - 1], base.dim),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn palm_sample(alpha: f64, half_width: f64, seed: u64) -> PointSet {
        let w = Window::centered(2, half_width).unwrap();
        let ps = sample_ppp(alpha, &w, seed).unwrap();
        ps.with_inserted_point(&[0.0, 0.0]).unwrap()
    }

    #[test]
    fn cube_index_is_the_half_open_cube() {
        assert_eq!(cube_index(&[0.0, 0.0], 0.5), vec![0, 0]);
        assert_eq!(cube_index(&[0.24, -0.24], 0.5), vec![0, 0]);
        // right edge belongs to the next cube, left edge to this one
        assert_eq!(cube_index(&[0.25, 0.0], 0.5), vec![1, 0]);
        assert_eq!(cube_index(&[-0.25, 0.0], 0.5), vec![0, 0]);
        assert_eq!(cube_index(&[0.9, -1.3], 0.5), vec![2, -3]);
    }

    #[test]
    fn n_alpha_handcrafted_cases() {
        let w = Window::centered(2, 5.0).unwrap();
        // isolated occupied point
        let ps = PointSet::from_parts(vec![0.0, 0.0, 3.0, 3.0], w.clone(), 1.0, 0).unwrap();
        assert_eq!(n_alpha(&ps, &[0], 1.0).unwrap(), 0);

        // one outside point within r of both occupied points counts twice
        let ps =
            PointSet::from_parts(vec![-0.5, 0.0, 0.5, 0.0, 0.0, 0.4], w.clone(), 1.0, 0).unwrap();
        assert_eq!(n_alpha(&ps, &[0, 1], 1.0).unwrap(), 2);

        // the boundary is closed: distance exactly r counts
        let ps = PointSet::from_parts(vec![0.0, 0.0, 1.0, 0.0], w, 1.0, 0).unwrap();
        assert_eq!(n_alpha(&ps, &[0], 1.0).unwrap(), 1);
    }

    #[test]
    fn n_alpha_guards() {
        let ps = palm_sample(1.0, 3.0, 1);
        let origin = ps.len() - 1;
        assert!(n_alpha(&ps, &[], 1.0).is_err());
        assert!(n_alpha(&ps, &[origin, origin], 1.0).is_err());
        assert!(n_alpha(&ps, &[ps.len()], 1.0).is_err());
    }

    #[test]
    fn empirical_kernel_unit_mass_and_rate() {
        let w = Window::centered(2, 5.0).unwrap();
        // exactly one eligible point: unit mass on its cube
        let ps = PointSet::from_parts(vec![0.0, 0.0, 0.6, 0.0], w, 1.0, 0).unwrap();
        let k = empirical_spatial_kernel(&ps, &[0], 1.0, 0.5, 100.0, 1.0).unwrap();
        assert_eq!(k.masses.len(), 1);
        assert!((k.mass(&[1, 0]) - 1.0).abs() < 1e-12);
        assert!((k.temporal_rate - 1.0 / 100.0).abs() < 1e-15);

        // no eligible point: the kernel is undefined
        let w = Window::centered(2, 5.0).unwrap();
        let ps = PointSet::from_parts(vec![0.0, 0.0, 3.0, 3.0], w, 1.0, 0).unwrap();
        assert!(matches!(
            empirical_spatial_kernel(&ps, &[0], 1.0, 0.5, 100.0, 1.0),
            Err(Error::NoNeighbor)
        ));
    }

    #[test]
    fn empirical_kernel_masses_sum_to_one() {
        for seed in 0..5 {
            let ps = palm_sample(200.0, 2.0, 100 + seed);
            let origin = ps.len() - 1;
            let k = empirical_spatial_kernel(&ps, &[origin], 1.0, 0.25, 200.0, 1.0).unwrap();
            assert!((k.mass_sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_kernel_exact_cases() {
        // a cube much wider than the ball carries all the mass
        let k = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 4.0, 256, 1.0, 1.0, 7).unwrap();
        assert_eq!(k.masses.len(), 1);
        assert!((k.mass(&[0, 0]) - 1.0).abs() < 1e-12);
        assert!((k.temporal_rate - std::f64::consts::PI).abs() < 1e-12);

        // fully inside cube: exact area ratio 0.25 / pi
        let k = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.5, 4096, 1.0, 1.0, 7).unwrap();
        let want = 0.25 / std::f64::consts::PI;
        assert!(
            (k.mass(&[0, 0]) - want).abs() < 5e-4,
            "inner cube mass {} vs {want}",
            k.mass(&[0, 0])
        );
        assert!((k.mass_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn limit_kernel_reflection_symmetry() {
        let k = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.25, 4096, 1.0, 1.0, 11).unwrap();
        for (cube, mass) in &k.masses {
            let mirrored = vec![-cube[0], cube[1]];
            let twin = k.mass(&mirrored);
            assert!(
                (mass - twin).abs() < 5e-3,
                "cube {cube:?} mass {mass} vs mirror {twin}"
            );
        }
    }

    #[test]
    fn tv_distance_basics() {
        let a = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.5, 1024, 1.0, 1.0, 1).unwrap();
        assert_eq!(cube_tv_distance(&a, &a).unwrap(), 0.0);

        // disjoint single-cube kernels: total variation 2
        let w = Window::centered(2, 8.0).unwrap();
        let ps1 = PointSet::from_parts(vec![0.0, 0.0, 0.6, 0.0], w.clone(), 1.0, 0).unwrap();
        let k1 = empirical_spatial_kernel(&ps1, &[0], 1.0, 0.5, 1.0, 1.0).unwrap();
        let ps2 = PointSet::from_parts(vec![0.0, 0.0, -4.6, 0.0, -4.0, 0.0], w, 1.0, 0).unwrap();
        let k2 = empirical_spatial_kernel(&ps2, &[1], 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(cube_tv_distance(&k1, &k2).unwrap(), 2.0);

        // mismatched cube side is a parameter error
        let b = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.25, 1024, 1.0, 1.0, 1).unwrap();
        assert!(cube_tv_distance(&a, &b).is_err());
    }

    #[test]
    fn kernel_and_tv_are_bitwise_reproducible() {
        // hash-map iteration order must never leak into the float sums
        let build = || {
            let ps = palm_sample(300.0, 2.0, 42);
            let origin = ps.len() - 1;
            let emp = empirical_spatial_kernel(&ps, &[origin], 1.0, 0.25, 300.0, 1.0).unwrap();
            let lim =
                limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.25, 1024, 1.0, 1.0, 7).unwrap();
            let tv = cube_tv_distance(&emp, &lim).unwrap();
            (emp, tv)
        };
        let (emp_a, tv_a) = build();
        let (emp_b, tv_b) = build();
        assert_eq!(tv_a.to_bits(), tv_b.to_bits());
        for (k, v) in &emp_a.masses {
            assert_eq!(v.to_bits(), emp_b.masses[k].to_bits(), "cube {k:?}");
        }
    }

    #[test]
    fn tv_triangle_inequality() {
        let mk = |seed: u64| {
            let ps = palm_sample(50.0, 2.0, seed);
            let origin = ps.len() - 1;
            empirical_spatial_kernel(&ps, &[origin], 1.0, 0.25, 50.0, 1.0).unwrap()
        };
        let (a, b, c) = (mk(1), mk(2), mk(3));
        let ab = cube_tv_distance(&a, &b).unwrap();
        let bc = cube_tv_distance(&b, &c).unwrap();
        let ac = cube_tv_distance(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn reg_check_handcrafted_failure() {
        // an empty qualifying cube forces deviation 1 >= delta
        let w = Window::centered(2, 3.0).unwrap();
        // all mass far from the origin cube
        let ps = PointSet::from_parts(
            vec![2.0, 2.0, -2.0, 2.0, 2.0, -2.0, -2.0, -2.0],
            w,
            10.0,
            0,
        )
        .unwrap();
        let report = reg_check(&ps, 1.0, 0.5).unwrap();
        assert!(!report.holds);
        assert!((report.worst_deviation - 1.0).abs() < 1e-12);
        assert!(report.cubes_checked > 0);
    }

    #[test]
    fn reg_check_holds_at_high_intensity() {
        let w = Window::centered(2, 3.0).unwrap();
        let ps = sample_ppp(10_000.0, &w, 404).unwrap();
        let report = reg_check(&ps, 2.0, 0.5).unwrap();
        assert!(report.holds, "worst deviation {}", report.worst_deviation);
        assert!(reg_check(&ps, 10.0, 0.5).is_err(), "ball must fit the box");
    }

    #[test]
    fn rescaled_run_structure() {
        let scale = ScaleParams {
            alpha: 50.0,
            lambda: 1.0,
            lambda_i: 1.0,
            radius: 1.0,
            dim: 2,
            half_width: 6.0,
        };
        for mode in [RunMode::Direct, RunMode::KernelChain] {
            let run = rescaled_richardson_run(&scale, 4, 9, mode).unwrap();
            assert!(run.completed);
            assert_eq!(run.jumps.len(), 4);
            // starting vertex is the point nearest the origin
            let norm0: f64 = run.z0.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!(norm0 < 0.5, "q(o) unexpectedly far at alpha 50: {norm0}");
            // first jump is within one ball of the start
            let d1 = dist2(&run.jumps[0].location, &run.z0).sqrt();
            assert!(d1 <= scale.radius + 1e-12);
            assert!(run.jumps.iter().all(|j| j.wait > 0.0));
        }
    }

    #[test]
    fn rescaled_run_flags_extinction() {
        // intensity so low the start is almost surely isolated
        let scale = ScaleParams {
            alpha: 0.01,
            lambda: 1.0,
            lambda_i: 1.0,
            radius: 1.0,
            dim: 2,
            half_width: 8.0,
        };
        let mut saw_incomplete = false;
        for seed in 0..10 {
            match rescaled_richardson_run(&scale, 3, seed, RunMode::Direct) {
                Ok(run) if !run.completed => {
                    assert!(run.extinct_at.unwrap() < 3);
                    saw_incomplete = true;
                }
                Ok(_) => {}
                Err(Error::Subcritical { .. }) => saw_incomplete = true,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(saw_incomplete);
    }

    #[test]
    fn branching_tree_structure() {
        let tree = branching_run(1.0, 1.0, 1.0, 2, 50, 77).unwrap();
        assert_eq!(tree.len(), 51);
        assert_eq!(tree.position(0), &[0.0, 0.0]);
        assert_eq!(tree.birth_times[0], 0.0);
        assert!(tree.birth_times.windows(2).all(|w| w[0] < w[1]));
        for i in 1..tree.len() {
            let parent = tree.parents[i].unwrap();
            assert!(parent < i, "parent must be born earlier");
            let d = dist2(tree.position(i), tree.position(parent)).sqrt();
            assert!(d < 1.0, "child {i} at distance {d} from its parent");
        }
    }

    #[test]
    fn branching_matches_limit_chain_with_matched_seeds() {
        let tree = branching_run(1.3, 0.7, 1.5, 2, 20, 5).unwrap();
        let chain = limit_kernel_chain(1.3, 0.7, 1.5, 2, 20, 5).unwrap();
        let tree_jumps = tree.jumps();
        assert_eq!(tree_jumps.len(), chain.len());
        for (a, b) in tree_jumps.iter().zip(&chain) {
            assert_eq!(a.wait.to_bits(), b.wait.to_bits());
            assert_eq!(a.location, b.location);
        }
    }

    #[test]
    fn temporal_rates_satisfy_the_sum_identity() {
        // limit kernel: rate = |S| * single-node rate, exactly
        let one = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.5, 256, 2.0, 3.0, 1).unwrap();
        let two = limit_spatial_kernel(
            &[vec![0.0, 0.0], vec![0.3, 0.1]],
            1.0,
            0.5,
            256,
            2.0,
            3.0,
            1,
        )
        .unwrap();
        assert_eq!(two.temporal_rate.to_bits(), (2.0 * one.temporal_rate).to_bits());

        // empirical kernel: rate = N * lambda_i / alpha, exactly
        let ps = palm_sample(100.0, 2.0, 8);
        let origin = ps.len() - 1;
        let n = n_alpha(&ps, &[origin], 1.0).unwrap();
        let k = empirical_spatial_kernel(&ps, &[origin], 1.0, 0.25, 100.0, 0.5).unwrap();
        assert_eq!(k.temporal_rate.to_bits(), (n as f64 * 0.5 / 100.0).to_bits());
    }

    #[test]
    fn product_kernel_samples_are_uncorrelated() {
        // the jump chain draws location and wait independently: the sample
        // correlation between |y| and the wait is statistically zero
        let scale = ScaleParams {
            alpha: 100.0,
            lambda: 1.0,
            lambda_i: 1.0,
            radius: 1.0,
            dim: 2,
            half_width: 4.0,
        };
        let mut norms = Vec::new();
        let mut waits = Vec::new();
        for seed in 0..800 {
            let run = rescaled_richardson_run(&scale, 1, seed, RunMode::KernelChain).unwrap();
            norms.push(dist2(&run.jumps[0].location, &run.z0).sqrt());
            waits.push(run.jumps[0].wait);
        }
        let rho = stats::pearson(&norms, &waits);
        let z = rho.abs() * (norms.len() as f64).sqrt();
        assert!(z < 2.58, "correlation z-score {z} rejects independence at 1%");
    }

    #[test]
    fn convergence_rows_have_the_right_shape() {
        let base = ScaleParams {
            alpha: 1.0,
            lambda: 1.0,
            lambda_i: 1.0,
            radius: 1.0,
            dim: 2,
            half_width: 4.0,
        };
        let rows = convergence_experiment(&base, &[20.0, 60.0], 2, 40, 60, 3).unwrap();
        // per alpha: median_z0_norm, halt_rate, and (ks_t, energy_z) per coordinate
        assert_eq!(rows.len(), 2 * (2 + 2 * 2));
        let mut csv = Vec::new();
        write_convergence_csv(&rows, &mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("alpha,statistic,coordinate,value"));
        assert!(convergence_experiment(&base, &[60.0, 20.0], 2, 10, 10, 3).is_err());
    }

    #[test]
    fn strict_and_closed_edge_rules_agree_on_generic_samples() {
        // the boundary |x - y| = r has measure zero: on sampled points the
        // two conventions produce identical neighborhoods
        let w = Window::centered(2, 4.0).unwrap();
        let ps = sample_ppp(30.0, &w, 2024).unwrap();
        let grid = CellGrid::build(&ps, 1.0);
        for i in (0..ps.len()).step_by(7) {
            let strict = grid.points_within(&ps, ps.point(i), 1.0, true);
            let closed = grid.points_within(&ps, ps.point(i), 1.0, false);
            assert_eq!(strict, closed);
        }
    }
}
