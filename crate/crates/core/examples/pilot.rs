//! Pilot runs for the statistical thresholds pinned in
//! `tests/fixtures/acceptance_pins.json`. Every value printed here comes
//! from the same procedures the acceptance suite runs, with recorded seeds,
//! so re-running this binary reproduces the fixture file's provenance.

use std::time::Instant;

use fpplab::fpp::*;
use fpplab::geograph::build_rgg;
use fpplab::point_process::*;
use fpplab::scaling::*;
use fpplab::seeds::derive;
use fpplab::shape::*;
use fpplab::stats;
use fpplab::ModelParams;
use rand::SeedableRng;

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let want = |name: &str| which.is_empty() || which.iter().any(|w| w == name);

    if want("c3") {
        let t = Instant::now();
        let w = Window::centered(2, 10.0).unwrap();
        for n in [1usize, 2, 3] {
            let mut counts = Vec::new();
            for i in 0..400u64 {
                let ps = sample_ppp(1.0, &w, derive(301, i))
                    .unwrap()
                    .with_inserted_point(&[0.0, 0.0])
                    .unwrap();
                let g = build_rgg(ps, 1.0).unwrap();
                let origin = g.len() - 1;
                counts.push(g.count_self_avoiding_paths(origin, n).unwrap() as f64);
            }
            let m = stats::mean(&counts);
            let se = stats::std_err(&counts);
            let target = std::f64::consts::PI.powi(n as i32);
            println!(
                "c3 n={n}: mean {m:.4} target {target:.4} |z| = {:.2}",
                (m - target).abs() / se
            );
        }
        println!("c3 elapsed {:?}", t.elapsed());
    }

    if want("c4") {
        let t = Instant::now();
        let w = Window::centered(2, 50.0).unwrap();
        let dirs = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let mut min_rho = f64::MAX;
        let mut per_dir: Vec<Vec<f64>> = vec![Vec::new(); 4];
        for i in 0..30u64 {
            let ps = sample_ppp(1.0, &w, derive(401, i)).unwrap();
            let g = build_rgg(ps, 2.0).unwrap();
            let est = g.estimate_stretch_factor(&dirs, &[20.0, 40.0], 0.1).unwrap();
            min_rho = min_rho.min(est.rho_hat);
            for s in &est.table {
                if s.radius == 40.0 {
                    per_dir[s.direction].push(s.ratio);
                }
            }
        }
        println!("c4 min rho_hat {min_rho:.4} (bound 0.5)");
        for pair in [(0, 1), (2, 3)] {
            let (a, b) = (&per_dir[pair.0], &per_dir[pair.1]);
            let gap = (stats::mean(a) - stats::mean(b)).abs();
            let band = stats::std_err(a) + stats::std_err(b);
            println!("c4 +/-u gap {gap:.4} vs band {band:.4} ratio {:.2}", gap / band);
        }
        println!("c4 elapsed {:?}", t.elapsed());
    }

    if want("c5") {
        let t = Instant::now();
        let params = ModelParams {
            lambda: 1.0,
            radius: 2.0,
            dim: 2,
            half_width: 67.0,
            passage: PassageSpec::Exponential { rate: 1.0 },
            margin: 0.1,
        };
        for root in [501u64, 502, 503] {
            let profile = directional_constants(
                &params,
                &default_directions(2, 16),
                &[20.0, 60.0],
                40,
                root,
                EstimatorMode::Annealed,
            )
            .unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive(root, 777));
            let mut wins = 0;
            let resamples = 200;
            for _ in 0..resamples {
                let idx = stats::bootstrap_indices(&mut rng, 40);
                if profile.spread_at(1, &idx) < profile.spread_at(0, &idx) {
                    wins += 1;
                }
            }
            println!(
                "c5 root {root}: isotropy {:.4} phi {:.3} bootstrap {wins}/{resamples}",
                profile.isotropy, profile.phi_hat
            );
        }
        println!("c5 elapsed {:?}", t.elapsed());
    }

    if want("c6") {
        let t = Instant::now();
        let params = ModelParams {
            lambda: 1.0,
            radius: 2.0,
            dim: 2,
            half_width: 560.0,
            passage: PassageSpec::Exponential { rate: 1.0 },
            margin: 0.1,
        };
        let table =
            shape_error_experiment(&params, 30, &[10.0, 40.0], 1.0, 16, 495.0, 601).unwrap();
        let mut wins = 0;
        for seed in 0..30 {
            let e10 = table
                .rows
                .iter()
                .find(|r| r.seed_index == seed && r.t == 10.0)
                .unwrap();
            let e40 = table
                .rows
                .iter()
                .find(|r| r.seed_index == seed && r.t == 40.0)
                .unwrap();
            if e40.epsilon < e10.epsilon {
                wins += 1;
            }
            if seed < 5 {
                println!(
                    "c6 seed {seed}: eps(10) = {:.4} eps(40) = {:.4}",
                    e10.epsilon, e40.epsilon
                );
            }
        }
        println!("c6 eps(40) < eps(10) in {wins}/30 seeds; elapsed {:?}", t.elapsed());
    }

    if want("c7") {
        let t = Instant::now();
        let report =
            bond_percolation(1.0, 2.0, 2, 0.04, &[50.0, 100.0, 200.0], 20, 701).unwrap();
        for row in &report.sizes {
            println!(
                "c7 L={}: median {:.5} mean {:.5}",
                row.half_width,
                row.median_fraction,
                stats::mean(&row.fractions)
            );
        }
        println!("c7 elapsed {:?}", t.elapsed());
    }

    if want("c8") {
        let t = Instant::now();
        let w = Window::centered(2, 3.0).unwrap();
        let mut vals = Vec::new();
        for i in 0..200u64 {
            let ps = sample_ppp(100.0, &w, derive(801, i))
                .unwrap()
                .with_inserted_point(&[0.0, 0.0])
                .unwrap();
            let origin = ps.len() - 1;
            vals.push(n_alpha(&ps, &[origin], 1.0).unwrap() as f64);
        }
        let m = stats::mean(&vals);
        let se = stats::std_err(&vals);
        let target = 100.0 * std::f64::consts::PI;
        println!("c8 mean {m:.3} target {target:.3} |z| = {:.2}; elapsed {:?}", (m - target).abs() / se, t.elapsed());
    }

    if want("c9") {
        let t = Instant::now();
        let limit = limit_spatial_kernel(&[vec![0.0, 0.0]], 1.0, 0.25, 4096, 1.0, 1.0, 901).unwrap();
        let w = Window::centered(2, 2.0).unwrap();
        for alpha in [100.0, 1000.0, 10000.0] {
            let mut tvs = Vec::new();
            for i in 0..30u64 {
                let ps = sample_ppp(alpha, &w, derive(902, i))
                    .unwrap()
                    .with_inserted_point(&[0.0, 0.0])
                    .unwrap();
                let origin = ps.len() - 1;
                let emp =
                    empirical_spatial_kernel(&ps, &[origin], 1.0, 0.25, alpha, 1.0).unwrap();
                tvs.push(cube_tv_distance(&emp, &limit).unwrap());
            }
            println!("c9 alpha {alpha}: median TV {:.4}", stats::median(&tvs));
        }
        println!("c9 elapsed {:?}", t.elapsed());
    }

    if want("c10") {
        let t = Instant::now();
        let w = Window::centered(2, 3.0).unwrap();
        for alpha in [100.0, 1000.0, 10000.0] {
            let mut holds = 0;
            for i in 0..40u64 {
                let ps = sample_ppp(alpha, &w, derive(1001, i)).unwrap();
                if reg_check(&ps, 2.0, 0.5).unwrap().holds {
                    holds += 1;
                }
            }
            println!("c10 alpha {alpha}: holds {holds}/40");
        }
        println!("c10 elapsed {:?}", t.elapsed());
    }

    if want("c11") {
        let t = Instant::now();
        let mut t1 = Vec::new();
        let mut sector_shell = vec![0u64; 32];
        for i in 0..10_000u64 {
            let tree = branching_run(1.0, 1.0, 1.0, 2, 1, derive(1101, i)).unwrap();
            t1.push(tree.birth_times[1]);
            let z = tree.position(1);
            let angle = z[1].atan2(z[0]).rem_euclid(2.0 * std::f64::consts::PI);
            let sector = ((angle / (2.0 * std::f64::consts::PI) * 8.0) as usize).min(7);
            let rr = (z[0] * z[0] + z[1] * z[1]).sqrt();
            let shell = ((rr * rr * 4.0) as usize).min(3); // equal-area shells
            sector_shell[shell * 8 + sector] += 1;
        }
        let m = stats::mean(&t1);
        let se = stats::std_err(&t1);
        let target = 1.0 / std::f64::consts::PI;
        let p = stats::chi_square_uniform_p(&sector_shell);
        println!(
            "c11 T1 mean {m:.5} target {target:.5} |z| = {:.2}; chi2 p = {p:.4}; elapsed {:?}",
            (m - target).abs() / se,
            t.elapsed()
        );
    }

    if want("c12") {
        let t = Instant::now();
        let base = ScaleParams {
            alpha: 10.0,
            lambda: 1.0,
            lambda_i: 1.0,
            radius: 1.0,
            dim: 2,
            half_width: 3.0,
        };
        for root in 1..=10u64 {
            let rows =
                convergence_experiment(&base, &[10.0, 100.0, 1000.0], 1, 500, 20_000, root)
                    .unwrap();
            let get = |stat: &str| -> Vec<f64> {
                rows.iter()
                    .filter(|r| r.statistic == stat)
                    .map(|r| r.value)
                    .collect()
            };
            let ks = get("ks_t");
            let en = get("energy_z");
            let z0 = get("median_z0_norm");
            let ok = |v: &[f64]| v.windows(2).all(|w| w[0] > w[1]);
            println!(
                "c12 root {root}: ks {ks:.4?} {} energy {en:.6?} {} z0 {z0:.4?} {}",
                if ok(&ks) { "DEC" } else { "FLAT" },
                if ok(&en) { "DEC" } else { "FLAT" },
                if ok(&z0) { "DEC" } else { "FLAT" },
            );
        }
        println!("c12 elapsed {:?}", t.elapsed());
    }

    if want("c13") {
        let t = Instant::now();
        let scale = ScaleParams {
            alpha: 1000.0,
            lambda: 1.0,
            lambda_i: 1.0,
            radius: 1.0,
            dim: 2,
            half_width: 3.0,
        };
        for root in [1301u64, 1302, 1303] {
            let direct: Vec<f64> = (0..500u64)
                .map(|j| {
                    rescaled_richardson_run(&scale, 1, derive(root, j), RunMode::Direct)
                        .unwrap()
                        .jumps[0]
                        .wait
                })
                .collect();
            let chain: Vec<f64> = (0..500u64)
                .map(|j| {
                    rescaled_richardson_run(&scale, 1, derive(root, 10_000 + j), RunMode::KernelChain)
                        .unwrap()
                        .jumps[0]
                        .wait
                })
                .collect();
            let d = stats::ks_statistic(&direct, &chain);
            let p = stats::ks_p_value(d, 500, 500);
            println!("c13 root {root}: KS {d:.4} p {p:.4}");
        }
        println!("c13 elapsed {:?}", t.elapsed());
    }
}
