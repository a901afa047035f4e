//! Experiment orchestration: dispatches a parsed configuration to the owning
//! module, writes CSV/NDJSON/SVG outputs into one directory, and records a
//! manifest. Replica tasks run on a bounded worker pool and results are
//! merged in replica order, so reruns of the same manifest are byte-identical.

use std::path::Path;
use std::time::Instant;

use crate::config::{
    ExperimentConfig, FppConfig, PercConfig, PppConfig, RggConfig, ScaleConfig, ScaleTask,
    ShapeConfig, ShapeTask,
};
use crate::error::{Error, Result};
use crate::fpp::{assign_passage_times, first_passage, growth_trace, EdgeWeightSource};
use crate::geograph::build_rgg;
use crate::manifest::{sha256_hex, OutputWriter, RunManifest};
use crate::params::ModelParams;
use crate::point_process::{sample_ppp, Window};
use crate::scaling::{
    convergence_experiment, empirical_spatial_kernel, limit_spatial_kernel, write_convergence_csv,
    cube_tv_distance, ScaleParams,
};
use crate::seeds::derive;
use crate::shape::{
    bond_percolation, directional_constants, default_directions, shape_error_experiment,
};
use crate::svg::SvgScene;

/// Runs one experiment into `out_dir`, returning the manifest (also written
/// as `manifest.json`). `threads` bounds the worker pool; the default is the
/// machine's core count.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunManifest> {
    run_experiment_with(cfg, out_dir, threads, None)
}

/// [`run_experiment`] with an optional filename for the primary output.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
    primary_name: Option<String>,
) -> Result<RunManifest> {
    let started = Instant::now();
    let mut writer = OutputWriter::new(out_dir)?.with_primary_name(primary_name);
    let mut warnings = Vec::new();
    let mut replica_seeds = Vec::new();
    let mut run = || -> Result<()> {
        match cfg {
            ExperimentConfig::Ppp(c) => run_ppp(c, &mut writer, &mut replica_seeds),
            ExperimentConfig::Rgg(c) => run_rgg(c, &mut writer, &mut replica_seeds, &mut warnings),
            ExperimentConfig::Fpp(c) => run_fpp(c, &mut writer, &mut replica_seeds, &mut warnings),
            ExperimentConfig::Shape(c) => {
                run_shape(c, &mut writer, &mut replica_seeds, &mut warnings)
            }
            ExperimentConfig::Perc(c) => run_perc(c, &mut writer, &mut replica_seeds),
            ExperimentConfig::Scale(c) => run_scale(c, &mut writer, &mut replica_seeds),
        }
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(run)?
        }
        None => run()?,
    }
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind().to_string(),
        config_hash: sha256_hex(cfg.to_canonical_json()?.as_bytes()),
        root_seed: cfg.root_seed(),
        replica_seeds,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        warnings,
        outputs: writer.into_records(),
    };
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

fn run_ppp(c: &PppConfig, out: &mut OutputWriter, seeds: &mut Vec<u64>) -> Result<()> {
    let window = Window::centered(c.d, c.half_width)?;
    let ps = sample_ppp(c.lambda, &window, c.seed)?;
    seeds.push(c.seed);
    let mut buf = Vec::new();
    ps.write_ndjson(&mut buf)?;
    out.write("points.ndjson", "points.v1", &buf)
}

fn run_rgg(
    c: &RggConfig,
    out: &mut OutputWriter,
    seeds: &mut Vec<u64>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let window = Window::centered(c.d, c.half_width)?;
    let ps = sample_ppp(c.lambda, &window, c.seed)?;
    seeds.push(c.seed);
    let g = build_rgg(ps, c.r)?;
    warnings.extend(g.warnings().iter().cloned());
    let mut buf = Vec::new();
    g.write_ndjson(&mut buf)?;
    out.write("graph.ndjson", "graph.v1", &buf)?;
    if c.svg {
        let svg = SvgScene::new(&g)?.render();
        out.write("graph.svg", "svg.v1", svg.as_bytes())?;
    }
    Ok(())
}

fn run_fpp(
    c: &FppConfig,
    out: &mut OutputWriter,
    seeds: &mut Vec<u64>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let window = Window::centered(c.d, c.half_width)?;
    if c.source.len() != c.d {
        return Err(Error::Config("source point has the wrong dimension".into()));
    }
    let ps = sample_ppp(c.lambda, &window, derive(c.seed, 0))?;
    seeds.extend([derive(c.seed, 0), derive(c.seed, 1)]);
    let g = build_rgg(ps, c.r)?;
    warnings.extend(g.warnings().iter().cloned());
    let weights = assign_passage_times(&c.passage, derive(c.seed, 1))?;
    let source = g.nearest_giant_vertex(&c.source)?;
    let field = first_passage(&g, &weights, source)?;
    let mut buf = Vec::new();
    field.write_csv(&mut buf)?;
    out.write("field.csv", "field.v1", &buf)?;
    let trace = growth_trace(&field);
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    out.write("trace.csv", "trace.v1", &buf)?;
    if let Some(t) = c.svg_time {
        let svg = SvgScene::new(&g)?.with_reached(&field, t).render();
        out.write("reached.svg", "svg.v1", svg.as_bytes())?;
    }
    Ok(())
}

fn shape_model(c: &ShapeConfig) -> ModelParams {
    ModelParams {
        lambda: c.lambda,
        radius: c.r,
        dim: c.d,
        half_width: c.half_width,
        passage: c.passage,
        margin: c.margin,
    }
}

fn run_shape(
    c: &ShapeConfig,
    out: &mut OutputWriter,
    seeds: &mut Vec<u64>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let params = shape_model(c);
    match c.task {
        ShapeTask::Profile => {
            let directions = default_directions(c.d, c.directions);
            let profile = directional_constants(
                &params,
                &directions,
                &c.s_list,
                c.n_seeds,
                c.seed,
                c.mode.into(),
            )?;
            warnings.extend(profile.warnings.iter().cloned());
            seeds.extend((0..(directions.len() * c.n_seeds)).map(|t| derive(c.seed, t as u64)));
            let mut buf = Vec::new();
            profile.write_csv(&mut buf)?;
            out.write("profile.csv", "shape_profile.v1", &buf)?;
            let summary = serde_json::json!({
                "phi_hat": profile.phi_hat,
                "isotropy": profile.isotropy,
                "mu_hat": profile.mu_hat,
                "mu_se": profile.mu_se,
                "failed_replicas": profile.failed_replicas,
                "total_replicas": profile.total_replicas,
            });
            out.write(
                "summary.json",
                "shape_summary.v1",
                serde_json::to_string_pretty(&summary)?.as_bytes(),
            )
        }
        ShapeTask::Error => {
            if c.t_list.is_empty() {
                return Err(Error::Config("error task needs t_list".into()));
            }
            let pitch = c
                .pitch
                .unwrap_or(c.r * crate::fpp::DEFAULT_PROBE_PITCH_FRACTION);
            let cal_radius = *c.s_list.last().ok_or_else(|| {
                Error::Config("error task needs s_list for phi calibration".into())
            })?;
            let table = shape_error_experiment(
                &params,
                c.n_seeds,
                &c.t_list,
                pitch,
                c.directions,
                cal_radius,
                c.seed,
            )?;
            warnings.extend(table.warnings.iter().cloned());
            seeds.extend((0..c.n_seeds).map(|t| derive(c.seed, t as u64)));
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            out.write("error.csv", "shape_error.v1", &buf)?;
            if c.svg && c.d == 2 {
                // snapshot of the first successful replica at the last time
                let seed_idx = table
                    .phi_per_seed
                    .iter()
                    .position(|p| p.is_some())
                    .ok_or_else(|| Error::Integrity("no successful replica".into()))?;
                let phi = table.phi_per_seed[seed_idx].unwrap();
                let t = *c.t_list.last().unwrap();
                let eps = table
                    .rows
                    .iter()
                    .find(|r| r.seed_index == seed_idx && r.t == t)
                    .map(|r| r.epsilon)
                    .unwrap_or(0.0);
                let task_seed = derive(c.seed, seed_idx as u64);
                let window = Window::centered(c.d, c.half_width)?;
                let ps = sample_ppp(c.lambda, &window, derive(task_seed, 0))?;
                let g = build_rgg(ps, c.r)?;
                let weights = assign_passage_times(&c.passage, derive(task_seed, 1))?;
                let q0 = g.nearest_giant_vertex(&vec![0.0; c.d])?;
                let field = first_passage(&g, &weights, q0)?;
                let ball = phi * t;
                let svg = SvgScene::new(&g)?
                    .with_reached(&field, t)
                    .with_circles(vec![(1.0 - eps) * ball, ball, (1.0 + eps) * ball])
                    .render();
                out.write("shape.svg", "svg.v1", svg.as_bytes())?;
            }
            Ok(())
        }
    }
}

fn run_perc(c: &PercConfig, out: &mut OutputWriter, seeds: &mut Vec<u64>) -> Result<()> {
    let mut buf = String::from("p,half_width,median_fraction,mean_fraction,n_seeds,threshold\n");
    for (pi, &p) in c.p_grid.iter().enumerate() {
        let report = bond_percolation(
            c.lambda,
            c.r,
            c.d,
            p,
            &c.half_widths,
            c.n_seeds,
            derive(c.seed, pi as u64),
        )?;
        for row in &report.sizes {
            buf.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p,
                row.half_width,
                row.median_fraction,
                crate::stats::mean(&row.fractions),
                row.fractions.len(),
                report.threshold
            ));
        }
        seeds.push(derive(c.seed, pi as u64));
    }
    out.write("perc.csv", "perc.v1", buf.as_bytes())?;
    if let Some(p) = c.svg_p {
        if c.d == 2 {
            let half = c
                .half_widths
                .iter()
                .cloned()
                .fold(f64::MAX, f64::min)
                .min(60.0);
            let window = Window::centered(2, half)?;
            let ps = sample_ppp(c.lambda, &window, derive(c.seed, 0xF1))?;
            let g = build_rgg(ps, c.r)?;
            let weights = assign_passage_times(
                &crate::fpp::PassageSpec::Bernoulli { zero_prob: p },
                derive(c.seed, 0xF2),
            )?;
            let open: Vec<(u32, u32)> = g
                .edges()
                .filter(|&(u, v)| weights.weight(u as usize, v as usize) == 0.0)
                .collect();
            let svg = SvgScene::new(&g)?.with_open_edges(open).render();
            out.write("perc.svg", "svg.v1", svg.as_bytes())?;
        }
    }
    Ok(())
}

fn run_scale(c: &ScaleConfig, out: &mut OutputWriter, seeds: &mut Vec<u64>) -> Result<()> {
    match c.task {
        ScaleTask::Kernels => {
            let alpha = c
                .alpha
                .ok_or_else(|| Error::Config("kernels task needs alpha".into()))?;
            let delta = c
                .delta
                .ok_or_else(|| Error::Config("kernels task needs delta".into()))?;
            let window = Window::centered(c.d, c.half_width)?;
            let ps = sample_ppp(alpha * c.lambda, &window, derive(c.seed, 0))?
                .with_inserted_point(&vec![0.0; c.d])?;
            seeds.push(derive(c.seed, 0));
            let origin = ps.len() - 1;
            let empirical =
                empirical_spatial_kernel(&ps, &[origin], c.r, delta, alpha, c.lambda_i)?;
            let limit = limit_spatial_kernel(
                &[vec![0.0; c.d]],
                c.r,
                delta,
                c.mc_samples,
                c.lambda,
                c.lambda_i,
                derive(c.seed, 1),
            )?;
            let tv = cube_tv_distance(&empirical, &limit)?;
            let mut buf = Vec::new();
            empirical.write_csv(&mut buf)?;
            out.write("k.csv", "kernel.v1", &buf)?;
            let mut buf = Vec::new();
            limit.write_csv(&mut buf)?;
            out.write("k_limit.csv", "kernel.v1", &buf)?;
            let summary = serde_json::json!({
                "alpha": alpha,
                "delta": delta,
                "tv_distance": tv,
                "empirical_rate": empirical.temporal_rate,
                "limit_rate": limit.temporal_rate,
            });
            out.write(
                "summary.json",
                "scale_kernels_summary.v1",
                serde_json::to_string_pretty(&summary)?.as_bytes(),
            )
        }
        ScaleTask::Converge => {
            if c.alphas.is_empty() {
                return Err(Error::Config("converge task needs alphas".into()));
            }
            let k = c.k.unwrap_or(1);
            let runs = c
                .runs
                .ok_or_else(|| Error::Config("converge task needs runs".into()))?;
            let base = ScaleParams {
                alpha: c.alphas[0],
                lambda: c.lambda,
                lambda_i: c.lambda_i,
                radius: c.r,
                dim: c.d,
                half_width: c.half_width,
            };
            let rows = convergence_experiment(&base, &c.alphas, k, runs, c.n_ref, c.seed)?;
            seeds.extend((0..runs).map(|j| derive(c.seed, j as u64)));
            let mut buf = Vec::new();
            write_convergence_csv(&rows, &mut buf)?;
            out.write("conv.csv", "conv.v1", &buf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_temp(cfg: &ExperimentConfig) -> (tempfile::TempDir, RunManifest) {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = run_experiment(cfg, tmp.path(), Some(2)).unwrap();
        (tmp, manifest)
    }

    #[test]
    fn ppp_run_is_byte_identical_on_rerun() {
        let cfg = ExperimentConfig::from_json(r#"{"kind":"ppp","lambda":1.0,"box":10.0,"seed":1}"#)
            .unwrap();
        let (dir_a, a) = run_to_temp(&cfg);
        let (dir_b, b) = run_to_temp(&cfg);
        assert_eq!(a.output_digests(), b.output_digests());
        assert_eq!(a.config_hash, b.config_hash);
        let bytes_a = std::fs::read(dir_a.path().join("points.ndjson")).unwrap();
        let bytes_b = std::fs::read(dir_b.path().join("points.ndjson")).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert!(dir_a.path().join("manifest.json").exists());
    }

    #[test]
    fn rgg_run_writes_graph_and_svg() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"rgg","lambda":1.0,"r":1.5,"box":15.0,"seed":3,"svg":true}"#,
        )
        .unwrap();
        let (dir, manifest) = run_to_temp(&cfg);
        assert!(dir.path().join("graph.ndjson").exists());
        assert!(dir.path().join("graph.svg").exists());
        assert_eq!(manifest.outputs.len(), 2);
    }

    #[test]
    fn fpp_run_writes_field_and_trace() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"fpp","lambda":1.0,"r":2.0,"d":2,"box":15.0,
                "passage":{"family":"exponential","rate":1.0},"seed":7,"source":[0.0,0.0],
                "svg_time":2.0}"#,
        )
        .unwrap();
        let (dir, manifest) = run_to_temp(&cfg);
        let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
        assert!(field.starts_with("vertex_id,x0,x1,reached,t"));
        let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert!(trace.starts_with("k,s,psi,z0,z1"));
        assert!(dir.path().join("reached.svg").exists());
        assert_eq!(manifest.kind, "fpp");
        // r = 2 exceeds a tenth of the half-width 15: warning in the manifest
        assert!(manifest.warnings.iter().any(|w| w.contains("radius")));
    }

    #[test]
    fn shape_profile_run_with_a1_warning() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"shape","task":"profile","lambda":1.0,"r":2.0,"box":30.0,
                "passage":{"family":"bernoulli","zero_prob":0.5},"seed":5,
                "directions":4,"s_list":[10.0,20.0],"n_seeds":3}"#,
        )
        .unwrap();
        let (dir, manifest) = run_to_temp(&cfg);
        assert!(dir.path().join("profile.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        assert!(
            manifest.warnings.iter().any(|w| w.contains("zero-atom")),
            "expected the zero-atom warning, got {:?}",
            manifest.warnings
        );
    }

    #[test]
    fn perc_run_schema() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"perc","lambda":1.0,"r":2.0,"p_grid":[0.0,0.5,1.0],
                "half_widths":[15.0],"n_seeds":3,"seed":9,"svg_p":1.0}"#,
        )
        .unwrap();
        let (dir, _) = run_to_temp(&cfg);
        let csv = std::fs::read_to_string(dir.path().join("perc.csv")).unwrap();
        assert!(csv.starts_with("p,half_width,median_fraction"));
        assert_eq!(csv.lines().count(), 1 + 3);
        assert!(dir.path().join("perc.svg").exists());
        // endpoints: p=0 gives singletons, p=1 gives the whole giant
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with("1,"));
        let median: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(median, 1.0);
    }

    #[test]
    fn scale_kernels_run() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"scale","task":"kernels","lambda":1.0,"lambda_i":1.0,"r":1.0,
                "box":2.0,"seed":2,"alpha":200.0,"delta":0.25,"mc_samples":1024}"#,
        )
        .unwrap();
        let (dir, _) = run_to_temp(&cfg);
        let k = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
        assert!(k.starts_with("cube_z0,cube_z1,mass,se"));
        assert!(dir.path().join("k_limit.csv").exists());
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        let tv = summary["tv_distance"].as_f64().unwrap();
        assert!(tv > 0.0 && tv < 2.0);
    }

    #[test]
    fn scale_converge_run() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"scale","task":"converge","lambda":1.0,"lambda_i":1.0,"r":1.0,
                "box":3.0,"seed":2,"alphas":[20.0,60.0],"k":1,"runs":50,"n_ref":100}"#,
        )
        .unwrap();
        let (dir, _) = run_to_temp(&cfg);
        let csv = std::fs::read_to_string(dir.path().join("conv.csv")).unwrap();
        assert!(csv.starts_with("alpha,statistic,coordinate,value"));
        // two alphas, each with median_z0_norm, halt_rate, ks_t, energy_z
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
    }

    #[test]
    fn config_errors_carry_exit_code_two() {
        let err = ExperimentConfig::from_json(r#"{"kind":"ppp","lambda":1.0}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        // missing required field for the converge task
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"scale","task":"converge","lambda":1.0,"lambda_i":1.0,"r":1.0,
                "box":3.0,"seed":2,"alphas":[20.0]}"#,
        )
        .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let err = run_experiment(&cfg, tmp.path(), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
