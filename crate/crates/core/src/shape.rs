//! Time-constant and shape estimation, plus the zero-time bond-percolation
//! experiment.
//!
//! The directional estimator runs independent `(direction, seed)` replicas
//! (the annealed view); a quenched mode that fixes one graph and varies the
//! weight seed is available behind a flag. Statistical thresholds consumed by
//! the test suites are pinned from recorded pilot runs, not computed here.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpp::{
    assign_passage_times, check_a1, check_a2, first_passage, EdgeWeightSource, PassageField,
    PassageSpec,
};
use crate::geograph::{build_rgg, for_grid_probes, Geograph};
use crate::params::{positive_finite, unit_ball_volume, ModelParams, SUBCRITICAL_FLOOR};
use crate::point_process::{sample_ppp, Window};
use crate::seeds::derive;
use crate::stats;

/// Fraction of replicas that may fail the supercritical check before the
/// whole experiment aborts.
pub const FAILURE_QUOTA: f64 = 0.2;

/// Lower bound for the critical open probability of zero-time bond
/// percolation: `1 / (v_d r^d lambda)`.
pub fn pc_lower_bound(lambda: f64, radius: f64, dim: usize) -> Result<f64> {
    if !positive_finite(lambda) || !positive_finite(radius) || dim < 2 {
        return Err(Error::InvalidParameter(
            "pc_lower_bound needs positive lambda and radius, dim >= 2".into(),
        ));
    }
    Ok(1.0 / (unit_ball_volume(dim) * radius.powi(dim as i32) * lambda))
}

/// Equally spaced unit directions: `count` on the circle for d = 2, the 26
/// normalized lattice directions for d = 3.
pub fn default_directions(dim: usize, count_2d: usize) -> Vec<Vec<f64>> {
    match dim {
        2 => (0..count_2d)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / count_2d as f64;
                vec![angle.cos(), angle.sin()]
            })
            .collect(),
        3 => {
            let mut out = Vec::new();
            for x in -1i32..=1 {
                for y in -1i32..=1 {
                    for z in -1i32..=1 {
                        if (x, y, z) == (0, 0, 0) {
                            continue;
                        }
                        let norm = ((x * x + y * y + z * z) as f64).sqrt();
                        out.push(vec![x as f64 / norm, y as f64 / norm, z as f64 / norm]);
                    }
                }
            }
            out
        }
        d => panic!("no default direction set for dimension {d}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// A fresh point set, graph, and weight realization per (direction, seed).
    Annealed,
    /// One graph for the whole experiment; only the weight seed varies.
    Quenched,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    pub direction: usize,
    pub radius: f64,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Directional time-constant profile. `mu_hat[u]` is the mean of
/// `T(o, s u) / s` at the largest radius; the isotropy statistic is
/// `(max - min) / median` of the directional means, and `phi_hat` inverts
/// the median.
#[derive(Debug, Clone)]
pub struct ShapeProfile {
    pub directions: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub mu_se: Vec<f64>,
    pub isotropy: f64,
    pub phi_hat: f64,
    pub table: Vec<ProfileRow>,
    /// values[direction][radius][seed]; failed replicas leave `None`.
    pub values: Vec<Vec<Vec<Option<f64>>>>,
    pub warnings: Vec<String>,
    pub failed_replicas: usize,
    pub total_replicas: usize,
}

impl ShapeProfile {
    /// Directional spread `(max - min) / median` of per-direction means at
    /// the given radius index, restricted to the given seed subset (for
    /// bootstrap resampling).
    pub fn spread_at(&self, radius_index: usize, seed_subset: &[usize]) -> f64 {
        let means: Vec<f64> = self
            .values
            .iter()
            .map(|per_dir| {
                let vals: Vec<f64> = seed_subset
                    .iter()
                    .filter_map(|&s| per_dir[radius_index][s])
                    .collect();
                stats::mean(&vals)
            })
            .collect();
        let max = means.iter().cloned().fold(f64::MIN, f64::max);
        let min = means.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / stats::median(&means)
    }

    /// CSV export with one row per (direction, radius).
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let d = self.directions.first().map_or(0, |u| u.len());
        let comps: Vec<String> = (0..d).map(|a| format!("u{a}")).collect();
        writeln!(w, "direction,{},s,mean,se,n", comps.join(","))?;
        for row in &self.table {
            let u: Vec<String> = self.directions[row.direction]
                .iter()
                .map(|c| format!("{c}"))
                .collect();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.direction,
                u.join(","),
                row.radius,
                row.mean,
                row.se,
                row.n
            )?;
        }
        Ok(())
    }
}

fn check_conditions(params: &ModelParams, warnings: &mut Vec<String>) -> Result<()> {
    let a1 = check_a1(&params.passage, params.lambda, params.radius, params.dim)?;
    if !a1.satisfied {
        warnings.push(format!(
            "zero-atom condition violated: P(tau=0) = {} >= threshold {}",
            a1.atom, a1.threshold
        ));
    }
    let a2 = check_a2(&params.passage, params.dim)?;
    if !a2.satisfied {
        warnings.push("moment condition violated".into());
    }
    Ok(())
}

/// Runs the directional time-constant experiment: for each direction and
/// seed, a replica produces `T(o, s u) / s` for every `s` in `s_list`; means
/// aggregate at the largest radius.
pub fn directional_constants(
    params: &ModelParams,
    directions: &[Vec<f64>],
    s_list: &[f64],
    n_seeds: usize,
    root_seed: u64,
    mode: EstimatorMode,
) -> Result<ShapeProfile> {
    params.validate()?;
    if directions.is_empty() || s_list.is_empty() || n_seeds == 0 {
        return Err(Error::InvalidParameter(
            "need directions, radii, and at least one seed".into(),
        ));
    }
    if !s_list.windows(2).all(|w| w[0] < w[1]) || s_list[0] <= 0.0 {
        return Err(Error::InvalidParameter(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    let s_max = *s_list.last().unwrap();
    if s_max > (1.0 - params.margin) * params.half_width {
        return Err(Error::InvalidParameter(format!(
            "largest radius {s_max} exceeds the inner box limit"
        )));
    }
    let mut warnings = Vec::new();
    check_conditions(params, &mut warnings)?;

    let window = Window::centered(params.dim, params.half_width)?;
    let center = vec![0.0; params.dim];

    // replica result: per direction, per radius, the ratio T/s
    type Replica = Option<Vec<Vec<f64>>>;
    let run_replica = |graph_seed: u64, weight_seed: u64, dirs: &[Vec<f64>]| -> Result<Replica> {
        let ps = sample_ppp(params.lambda, &window, graph_seed)?;
        let g = build_rgg(ps, params.radius)?;
        if g.giant_fraction() < SUBCRITICAL_FLOOR {
            return Ok(None);
        }
        let weights = assign_passage_times(&params.passage, weight_seed)?;
        let q0 = g.nearest_giant_vertex(&center)?;
        let field = first_passage(&g, &weights, q0)?;
        let mut out = Vec::with_capacity(dirs.len());
        for u in dirs {
            let mut per_radius = Vec::with_capacity(s_list.len());
            for &s in s_list {
                let target: Vec<f64> = u.iter().map(|c| c * s).collect();
                let qt = g.nearest_giant_vertex(&target)?;
                let t = field.time(qt).ok_or_else(|| {
                    Error::Integrity("giant target unreachable from giant source".into())
                })?;
                per_radius.push(t / s);
            }
            out.push(per_radius);
        }
        Ok(Some(out))
    };

    // values[dir][radius][seed]
    let mut values = vec![vec![vec![None; n_seeds]; s_list.len()]; directions.len()];
    let mut failed = 0usize;
    let total;
    match mode {
        EstimatorMode::Annealed => {
            total = directions.len() * n_seeds;
            let results: Vec<(usize, usize, Result<Replica>)> = (0..total)
                .into_par_iter()
                .map(|task| {
                    let dir = task / n_seeds;
                    let seed_idx = task % n_seeds;
                    let task_seed = derive(root_seed, task as u64);
                    let rep = run_replica(
                        derive(task_seed, 0),
                        derive(task_seed, 1),
                        std::slice::from_ref(&directions[dir]),
                    );
                    (dir, seed_idx, rep)
                })
                .collect();
            for (dir, seed_idx, rep) in results {
                match rep? {
                    Some(rows) => {
                        for (si, &v) in rows[0].iter().enumerate() {
                            values[dir][si][seed_idx] = Some(v);
                        }
                    }
                    None => failed += 1,
                }
            }
        }
        EstimatorMode::Quenched => {
            total = n_seeds;
            let graph_seed = derive(root_seed, u64::MAX);
            let results: Vec<(usize, Result<Replica>)> = (0..n_seeds)
                .into_par_iter()
                .map(|seed_idx| {
                    let rep = run_replica(
                        graph_seed,
                        derive(root_seed, seed_idx as u64),
                        directions,
                    );
                    (seed_idx, rep)
                })
                .collect();
            for (seed_idx, rep) in results {
                match rep? {
                    Some(rows) => {
                        for (dir, per_radius) in rows.iter().enumerate() {
                            for (si, &v) in per_radius.iter().enumerate() {
                                values[dir][si][seed_idx] = Some(v);
                            }
                        }
                    }
                    None => failed += 1,
                }
            }
        }
    }
    if (failed as f64) > FAILURE_QUOTA * total as f64 {
        return Err(Error::SubcriticalQuota {
            failed,
            total,
            quota: FAILURE_QUOTA * 100.0,
        });
    }

    let mut table = Vec::new();
    for (dir, per_dir) in values.iter().enumerate() {
        for (si, per_seed) in per_dir.iter().enumerate() {
            let vals: Vec<f64> = per_seed.iter().filter_map(|v| *v).collect();
            table.push(ProfileRow {
                direction: dir,
                radius: s_list[si],
                mean: stats::mean(&vals),
                se: stats::std_err(&vals),
                n: vals.len(),
            });
        }
    }
    let last = s_list.len() - 1;
    let mu_hat: Vec<f64> = (0..directions.len())
        .map(|dir| {
            table
                .iter()
                .find(|r| r.direction == dir && r.radius == s_list[last])
                .unwrap()
                .mean
        })
        .collect();
    let mu_se: Vec<f64> = (0..directions.len())
        .map(|dir| {
            table
                .iter()
                .find(|r| r.direction == dir && r.radius == s_list[last])
                .unwrap()
                .se
        })
        .collect();
    let max = mu_hat.iter().cloned().fold(f64::MIN, f64::max);
    let min = mu_hat.iter().cloned().fold(f64::MAX, f64::min);
    let med = stats::median(&mu_hat);
    Ok(ShapeProfile {
        directions: directions.to_vec(),
        radii: s_list.to_vec(),
        mu_hat,
        mu_se,
        isotropy: (max - min) / med,
        phi_hat: 1.0 / med,
        table,
        values,
        warnings,
        failed_replicas: failed,
        total_replicas: total,
    })
}

/// Shape error of a growth snapshot against the ball of radius
/// `phi_hat * t`: the smallest `eps` with
/// `(1 - eps) B <= reached region <= (1 + eps) B` on the probe grid.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeErrorReport {
    pub epsilon: f64,
    pub eps_in: f64,
    pub eps_out: f64,
    pub ball_radius: f64,
    pub probes_total: usize,
    pub probes_reached: usize,
}

pub fn shape_error(
    field: &PassageField,
    phi_hat: f64,
    t: f64,
    pitch: f64,
    inner_fraction: f64,
) -> Result<ShapeErrorReport> {
    if !positive_finite(phi_hat) || !positive_finite(t) || !positive_finite(pitch) {
        return Err(Error::InvalidParameter(
            "shape_error needs positive phi_hat, t, and pitch".into(),
        ));
    }
    let g = field.graph();
    let ball = phi_hat * t;
    let inner = g.points().window().shrink(inner_fraction);
    let center = g.points().window().center().to_vec();
    let mut eps_in = 0.0f64;
    let mut eps_out = 0.0f64;
    let mut total = 0usize;
    let mut reached_probes = 0usize;
    for_grid_probes(&inner, pitch, |probe| {
        total += 1;
        let norm = crate::cells::dist2(probe, &center).sqrt();
        let reached = g
            .nearest_giant_vertex(probe)
            .ok()
            .and_then(|q| field.time(q))
            .is_some_and(|tq| tq <= t);
        if reached {
            reached_probes += 1;
            eps_out = eps_out.max((norm / ball - 1.0).max(0.0));
        } else if norm < ball {
            eps_in = eps_in.max(1.0 - norm / ball);
        }
    });
    if reached_probes == 0 {
        return Err(Error::Integrity(
            "empty reached set: no probe lies in the growth region".into(),
        ));
    }
    Ok(ShapeErrorReport {
        epsilon: eps_in.max(eps_out),
        eps_in,
        eps_out,
        ball_radius: ball,
        probes_total: total,
        probes_reached: reached_probes,
    })
}

/// Sizes of the zero-weight (open) clusters inside the giant component, and
/// the largest one as a fraction of the giant.
pub fn open_cluster_fraction<W: EdgeWeightSource>(g: &Geograph, weights: &W) -> Result<f64> {
    let giant = g.giant().ok_or(Error::Subcritical {
        fraction: 0.0,
        floor: 0.0,
    })?;
    let n = g.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let p = parent[x as usize];
            parent[x as usize] = parent[p as usize];
            x = p;
        }
        x
    }
    for u in 0..n {
        if g.labels()[u] != giant {
            continue;
        }
        for &v in g.neighbors(u) {
            if (u as u32) < v && weights.weight(u, v as usize) == 0.0 {
                let (ru, rv) = (find(&mut parent, u as u32), find(&mut parent, v));
                if ru != rv {
                    parent[ru as usize] = rv;
                }
            }
        }
    }
    let mut sizes = std::collections::HashMap::new();
    for v in 0..n {
        if g.labels()[v] == giant {
            *sizes.entry(find(&mut parent, v as u32)).or_insert(0usize) += 1;
        }
    }
    let largest = sizes.values().copied().max().unwrap_or(0);
    Ok(largest as f64 / g.giant_size() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct PercSizeRow {
    pub half_width: f64,
    pub fractions: Vec<f64>,
    pub median_fraction: f64,
}

/// Zero-time bond percolation report. `p` is the open probability
/// `P(tau = 0)`; edges share one uniform per edge across the whole sweep, so
/// the open set is pointwise monotone in `p`.
#[derive(Debug, Clone, Serialize)]
pub struct PercolationReport {
    pub p: f64,
    pub threshold: f64,
    pub sizes: Vec<PercSizeRow>,
}

pub fn bond_percolation(
    lambda: f64,
    radius: f64,
    dim: usize,
    p: f64,
    half_widths: &[f64],
    n_seeds: usize,
    root_seed: u64,
) -> Result<PercolationReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "open probability must lie in [0, 1], got {p}"
        )));
    }
    let threshold = pc_lower_bound(lambda, radius, dim)?;
    let mut sizes = Vec::with_capacity(half_widths.len());
    for (li, &half_width) in half_widths.iter().enumerate() {
        let fractions: Vec<f64> = (0..n_seeds)
            .into_par_iter()
            .map(|seed_idx| {
                let seed = derive(root_seed, (li * n_seeds + seed_idx) as u64);
                let window = Window::centered(dim, half_width)?;
                let ps = sample_ppp(lambda, &window, derive(seed, 0))?;
                let g = build_rgg(ps, radius)?;
                let weights = assign_passage_times(
                    &PassageSpec::Bernoulli { zero_prob: p },
                    derive(seed, 1),
                )?;
                open_cluster_fraction(&g, &weights)
            })
            .collect::<Result<_>>()?;
        let median_fraction = stats::median(&fractions);
        sizes.push(PercSizeRow {
            half_width,
            fractions,
            median_fraction,
        });
    }
    Ok(PercolationReport {
        p,
        threshold,
        sizes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeErrorRow {
    pub seed_index: usize,
    pub t: f64,
    pub epsilon: f64,
    pub eps_in: f64,
    pub eps_out: f64,
}

/// Per-seed shape errors at a list of times, with the time constant
/// self-calibrated on each replica at a large radius.
#[derive(Debug, Clone)]
pub struct ShapeErrorTable {
    pub phi_per_seed: Vec<Option<f64>>,
    pub rows: Vec<ShapeErrorRow>,
    pub warnings: Vec<String>,
    pub failed_replicas: usize,
}

impl ShapeErrorTable {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "seed_index,t,epsilon,eps_in,eps_out")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.seed_index, r.t, r.epsilon, r.eps_in, r.eps_out
            )?;
        }
        Ok(())
    }
}

/// Runs `n_seeds` independent growth replicas and reports the shape error at
/// each time in `t_list`. The time constant for each replica is estimated
/// from its own field as the mean of `T(o, s u) / s` over `cal_directions`
/// directions at radius `cal_radius` (the largest scale the box affords,
/// where the estimate is closest to its limit). Seeds are processed
/// sequentially: each replica at these sizes holds a large graph.
pub fn shape_error_experiment(
    params: &ModelParams,
    n_seeds: usize,
    t_list: &[f64],
    pitch: f64,
    cal_directions: usize,
    cal_radius: f64,
    root_seed: u64,
) -> Result<ShapeErrorTable> {
    params.validate()?;
    if t_list.is_empty() || t_list.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidParameter("t_list must be positive".into()));
    }
    if cal_radius > (1.0 - params.margin) * params.half_width {
        return Err(Error::InvalidParameter(
            "calibration radius exceeds the inner box".into(),
        ));
    }
    let mut warnings = Vec::new();
    check_conditions(params, &mut warnings)?;
    let window = Window::centered(params.dim, params.half_width)?;
    let center = vec![0.0; params.dim];
    let directions = default_directions(params.dim, cal_directions);
    let inner_fraction = 1.0 - params.margin;

    let mut rows = Vec::new();
    let mut phi_per_seed = Vec::with_capacity(n_seeds);
    let mut failed = 0usize;
    for seed_idx in 0..n_seeds {
        let task_seed = derive(root_seed, seed_idx as u64);
        let ps = sample_ppp(params.lambda, &window, derive(task_seed, 0))?;
        let g = build_rgg(ps, params.radius)?;
        if g.giant_fraction() < SUBCRITICAL_FLOOR {
            failed += 1;
            phi_per_seed.push(None);
            continue;
        }
        let weights = assign_passage_times(&params.passage, derive(task_seed, 1))?;
        let q0 = g.nearest_giant_vertex(&center)?;
        let field = first_passage(&g, &weights, q0)?;
        let mut ratios = Vec::with_capacity(directions.len());
        for u in &directions {
            let target: Vec<f64> = u.iter().map(|c| c * cal_radius).collect();
            let qt = g.nearest_giant_vertex(&target)?;
            let t = field
                .time(qt)
                .ok_or_else(|| Error::Integrity("calibration target unreached".into()))?;
            ratios.push(t / cal_radius);
        }
        let phi = 1.0 / stats::mean(&ratios);
        phi_per_seed.push(Some(phi));

        // one probe sweep updates the error at every requested time
        let mut eps_in = vec![0.0f64; t_list.len()];
        let mut eps_out = vec![0.0f64; t_list.len()];
        let mut any_reached = vec![false; t_list.len()];
        let inner = g.points().window().shrink(inner_fraction);
        for_grid_probes(&inner, pitch, |probe| {
            let norm = crate::cells::dist2(probe, &center).sqrt();
            let time = g
                .nearest_giant_vertex(probe)
                .ok()
                .and_then(|q| field.time(q));
            for (ti, &t) in t_list.iter().enumerate() {
                let ball = phi * t;
                match time {
                    Some(tq) if tq <= t => {
                        any_reached[ti] = true;
                        eps_out[ti] = eps_out[ti].max((norm / ball - 1.0).max(0.0));
                    }
                    _ => {
                        if norm < ball {
                            eps_in[ti] = eps_in[ti].max(1.0 - norm / ball);
                        }
                    }
                }
            }
        });
        for (ti, &t) in t_list.iter().enumerate() {
            if !any_reached[ti] {
                return Err(Error::Integrity(format!(
                    "empty reached set at t = {t} for seed {seed_idx}"
                )));
            }
            rows.push(ShapeErrorRow {
                seed_index: seed_idx,
                t,
                epsilon: eps_in[ti].max(eps_out[ti]),
                eps_in: eps_in[ti],
                eps_out: eps_out[ti],
            });
        }
    }
    if (failed as f64) > FAILURE_QUOTA * n_seeds as f64 {
        return Err(Error::SubcriticalQuota {
            failed,
            total: n_seeds,
            quota: FAILURE_QUOTA * 100.0,
        });
    }
    Ok(ShapeErrorTable {
        phi_per_seed,
        rows,
        warnings,
        failed_replicas: failed,
    })
}

/// Fraction of giant vertices inside `B_{delta t}(o)` whose passage time from
/// the source reaches `t` (far-growth diagnostic; the frequency must decay as
/// `t` grows).
pub fn far_growth_exceedance(field: &PassageField, delta: f64, t: f64) -> Result<f64> {
    let g = field.graph();
    let center = g.points().window().center().to_vec();
    let ball = delta * t;
    let mut total = 0usize;
    let mut exceed = 0usize;
    for v in 0..g.len() {
        if !g.in_giant(v) {
            continue;
        }
        if crate::cells::dist2(g.points().point(v), &center) >= ball * ball {
            continue;
        }
        total += 1;
        match field.time(v) {
            Some(tv) if tv >= t => exceed += 1,
            None => exceed += 1,
            _ => {}
        }
    }
    if total == 0 {
        return Err(Error::Integrity("no giant vertices inside the ball".into()));
    }
    Ok(exceed as f64 / total as f64)
}
