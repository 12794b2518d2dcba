//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rpmem::geometry::{
    ball_cover, dist_to_cone, doubling_constant_exact, induced_norm_rational, min_norm_point_polytope, Cone,
    PointSet, Polytope,
};
use rpmem::linalg::Vector;
use rpmem::membership::exact::{separate, ExactVerdict};
use rpmem::membership::{Margin, SetInstance};
use rpmem::montecarlo::{
    estimate_failure, generate, reproduce_ifp_float, small_norm_rates, wilson_interval, ExperimentConfig,
    InstanceSpec, WILSON_Z_99,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    check(start.elapsed() <= limit, format!("took {:.1?}, limit {limit:?}", start.elapsed()))
}

fn tail_bound_dominance() -> Outcome {
    let start = Instant::now();
    let rows = small_norm_rates(&[3, 5, 10, 20], &[0.1, 0.3, 0.5], 1_000_000, 1).map_err(|e| e.to_string())?;
    for r in &rows {
        check(r.rate <= r.bound, format!("k={} delta={}: rate {} > bound {}", r.k, r.delta, r.rate, r.bound))?;
    }
    within(Duration::from_secs(60), start)?;
    let worst = rows.iter().map(|r| r.rate / r.bound).fold(0.0, f64::max);
    Ok(format!("{} cells, max rate/bound {worst:.3}", rows.len()))
}

fn finite_threshold() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut k = 0;
    for seed in 0..20 {
        let spec = InstanceSpec::Finite { m: 50, size: 1000, d: 1.0, spread: 3.0, seed };
        let mut cfg = ExperimentConfig::new(spec, 2000, 0.05);
        cfg.tau_ratio = Some(0.1);
        cfg.master_seed = 1000 + seed;
        let r = estimate_failure(&cfg).map_err(|e| e.to_string())?;
        check(
            r.dominated_by(0.05),
            format!("instance {seed}: rate {} exceeds 0.05 + {}", r.rate, r.half_width()),
        )?;
        worst = worst.max(r.rate);
        k = r.metadata.k;
    }
    within(Duration::from_secs(300), start)?;
    Ok(format!("20 instances x 2000 trials at k={k}, max NotSeparated rate {worst}"))
}

/// Compile-time guard: only types with exact equality can carry the verdict.
fn assert_exact_type<T: Eq + std::hash::Hash>() {}

fn integer_specs(box_upper: Option<i64>) -> Vec<InstanceSpec> {
    let mut specs = Vec::new();
    for n in [3, 5] {
        for b_bound in [2, 4] {
            for (i, odd_entries) in [1, 2].into_iter().enumerate() {
                specs.push(InstanceSpec::Integer {
                    n,
                    b_bound,
                    rows: 3,
                    odd_entries,
                    box_upper,
                    seed: 10 * n as u64 + b_bound + i as u64,
                });
            }
        }
    }
    specs
}

fn integer_fiber_exact() -> Outcome {
    let start = Instant::now();
    assert_exact_type::<ExactVerdict>();
    let mut lowest = 1.0f64;
    for spec in integer_specs(None) {
        let mut cfg = ExperimentConfig::new(spec.clone(), 1000, 0.1);
        cfg.master_seed = 7;
        let r = estimate_failure(&cfg).map_err(|e| e.to_string())?;
        let separated = 1.0 - r.rate;
        check(
            separated >= 0.9 - r.half_width(),
            format!("{spec:?}: separated {separated} < 0.9 - {}", r.half_width()),
        )?;
        lowest = lowest.min(separated);

        // the decision path yields an exact margin
        let g = generate(&spec).map_err(|e| e.to_string())?;
        let SetInstance::Integer(f) = &g.instance else { unreachable!() };
        let t = rpmem::linalg::sample_projection(rpmem::linalg::ProjectionSpec::rademacher(
            f.rows() - 1,
            r.metadata.k,
            3,
        ))
        .map_err(|e| e.to_string())?;
        let verdict = separate(f, t.as_signs().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let dec = rpmem::membership::decide_integer_exact(f, &t).map_err(|e| e.to_string())?;
        check(
            matches!(dec.margin, Margin::Exact(_) | Margin::Unbounded),
            format!("non-exact margin {:?}", dec.margin),
        )?;
        check(
            matches!(verdict, ExactVerdict::Separated { .. } | ExactVerdict::NotSeparated { .. } | ExactVerdict::EmptyFiber),
            format!("infeasible instance reported as {verdict:?}"),
        )?;
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("8 instances x 1000 seeds, min separated rate {lowest}"))
}

fn ifp_float_pathology() -> Outcome {
    let mut lines = Vec::new();
    for spec in integer_specs(Some(5)) {
        let mut cfg = ExperimentConfig::new(spec.clone(), 1000, 0.1);
        cfg.master_seed = 7;
        let r = reproduce_ifp_float(&cfg).map_err(|e| e.to_string())?;
        let q = &r.relative_gap;
        check(
            [q.min, q.p50, q.max].iter().all(|v| v.is_finite() && *v >= 0.0),
            format!("bad gap quantiles {q:?}"),
        )?;
        check(r.tolerances.len() == 3, "tolerance grid missing".into())?;
        let (lo, hi) = wilson_interval(r.exact.separated, r.exact.trials, WILSON_Z_99);
        check(
            r.exact.rate >= 0.9 - (hi - lo) / 2.0,
            format!("exact companion separated only {}", r.exact.rate),
        )?;
        let InstanceSpec::Integer { n, b_bound, .. } = spec else { unreachable!() };
        lines.push(format!(
            "n={n} B={b_bound} |box|={} gap/scale min={:.3e} p50={:.3e} below1e-6={} exact={}",
            r.lattice_size, q.min, q.p50, r.tolerances[0].fraction, r.exact.rate
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    Ok(format!("{} instances reported, exact path separated on all", lines.len()))
}

fn polytope_and_cone() -> Outcome {
    let start = Instant::now();
    let mut summary = Vec::new();
    let mut specs = vec![
        InstanceSpec::Polytope { m: 4, vertices: 2, height: 1.0, spread: 0.3, seed: 1 },
        InstanceSpec::Polytope { m: 5, vertices: 3, height: 0.5, spread: 0.2, seed: 2 },
        InstanceSpec::Cone { m: 3, generators: 1, d: 1.0, seed: 3 },
        InstanceSpec::Cone { m: 4, generators: 2, d: 1.0, seed: 4 },
        InstanceSpec::Cone { m: 4, generators: 2, d: 0.95, seed: 5 },
    ];
    for (i, spec) in specs.drain(..).enumerate() {
        let mut cfg = ExperimentConfig::new(spec.clone(), 2000, 0.05);
        cfg.master_seed = 500 + i as u64;
        let r = estimate_failure(&cfg).map_err(|e| e.to_string())?;
        let separated = 1.0 - r.rate;
        check(
            separated >= 0.95 - r.half_width(),
            format!("{spec:?}: separated {separated} < 0.95 - {}", r.half_width()),
        )?;
        summary.push(format!("{}@k={}:{separated}", r.metadata.class, r.metadata.k));
    }
    within(Duration::from_secs(300), start)?;
    Ok(summary.join(", "))
}

fn fixtures() -> Vec<PointSet> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for size in 2..=12 {
        for dim in 1..=3 {
            let rows = (0..size).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            out.push(PointSet::from_rows(rows).unwrap());
        }
    }
    let grid: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i)]).collect();
    out.push(PointSet::from_rows(grid).unwrap());
    let square: Vec<Vec<f64>> = (0..9).map(|i| vec![f64::from(i % 3), f64::from(i / 3)]).collect();
    out.push(PointSet::from_rows(square).unwrap());
    let cube: Vec<Vec<f64>> =
        (0..8).map(|i| vec![f64::from(i & 1), f64::from(i >> 1 & 1), f64::from(i >> 2 & 1)]).collect();
    out.push(PointSet::from_rows(cube).unwrap());
    let geometric: Vec<Vec<f64>> = (0..12).map(|i| vec![2f64.powi(i)]).collect();
    out.push(PointSet::from_rows(geometric).unwrap());
    out
}

fn ball_cover_bound() -> Outcome {
    let mut covers = 0;
    let mut slowest = Duration::ZERO;
    for (fi, set) in fixtures().iter().enumerate() {
        let t0 = Instant::now();
        let lambda = doubling_constant_exact(set).map_err(|e| e.to_string())?;
        slowest = slowest.max(t0.elapsed());
        check(t0.elapsed() <= Duration::from_secs(60), format!("fixture {fi}: exact cover took {:?}", t0.elapsed()))?;
        for p in set.iter() {
            let far = set.iter().map(|x| x.dist(p)).fold(0.0, f64::max);
            if far == 0.0 {
                continue;
            }
            for r in [far, far / 2.0] {
                for (ratio, levels) in [(2.0, 1u32), (4.0, 2), (8.0, 3)] {
                    let eps = r / ratio;
                    let c = ball_cover(set, p, r, eps).map_err(|e| e.to_string())?;
                    check(c.levels == levels, format!("fixture {fi}: levels {} != {levels}", c.levels))?;
                    let limit = lambda.pow(levels);
                    check(
                        c.center_indices.len() as u64 <= limit,
                        format!("fixture {fi}: {} balls > {lambda}^{levels}", c.center_indices.len()),
                    )?;
                    for x in set.iter().filter(|x| x.dist_sq(p) <= r * r) {
                        check(
                            c.centers.iter().any(|s| s.dist_sq(x) <= eps * eps),
                            format!("fixture {fi}: point {x:?} uncovered"),
                        )?;
                    }
                    covers += 1;
                }
            }
        }
    }
    Ok(format!("{covers} covers within lambda^levels, slowest exact lambda {slowest:.1?}"))
}

fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn smallest_singular_value(cols: &[Vec<f64>]) -> f64 {
    let m = cols[0].len();
    let g = nalgebra::DMatrix::from_fn(m, cols.len(), |r, c| cols[c][r]);
    g.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_poly = 0.0f64;
    for i in 0..50 {
        let n = 1 + i % 4;
        let m = 2 + i % 3;
        let verts: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let poly = Polytope::new(PointSet::from_rows(verts.clone()).unwrap());
        let got = min_norm_point_polytope(&Vector::new(b.clone()).unwrap(), &poly, 1e-12)
            .map_err(|e| e.to_string())?
            .distance;
        let oracle = common::grid_polytope_distance(&b, &verts);
        worst_poly = worst_poly.max((got - oracle).abs());
        check((got - oracle).abs() <= 1e-6, format!("polytope {i}: solver {got}, grid {oracle}"))?;
    }
    let mut worst_cone = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let n = 1 + done % 4;
        let m = n + done % 2;
        let gens: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, m.max(2))).collect();
        let sigma = smallest_singular_value(&gens);
        if sigma < 0.2 {
            continue;
        }
        let b: Vec<f64> = (0..m.max(2)).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cone = Cone::new(PointSet::from_rows(gens.clone()).unwrap());
        let got = dist_to_cone(&Vector::new(b.clone()).unwrap(), &cone, 1e-12).map_err(|e| e.to_string())?.distance;
        // the projection has norm at most |b|, so its coefficients are
        // bounded by |b| / sigma_min
        let oracle = common::grid_cone_distance(&b, &gens, 1.01 * b_norm / sigma);
        worst_cone = worst_cone.max((got - oracle).abs());
        check((got - oracle).abs() <= 1e-6, format!("cone {done}: solver {got}, grid {oracle}"))?;
        done += 1;
    }
    let mut exact = 0;
    for i in 0..40 {
        let n = 1 + i % 4;
        let m = 2 + i % 3;
        let gens: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| f64::from(rng.random_range(-4i8..=4))).collect()).collect();
        if gens.iter().all(|g| g.iter().all(|v| *v == 0.0)) {
            continue;
        }
        let weights: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0u8..=3))).collect();
        let x: Vec<f64> = (0..m).map(|r| gens.iter().zip(&weights).map(|(g, w)| g[r] * w).sum()).collect();
        let gset = PointSet::from_rows(gens.clone()).unwrap();
        let got = induced_norm_rational(&Vector::new(x.clone()).unwrap(), &gset).map_err(|e| e.to_string())?;
        let xr: Vec<_> = x.iter().map(|&v| common::to_rational(v)).collect();
        let gr: Vec<Vec<_>> = gens.iter().map(|g| g.iter().map(|&v| common::to_rational(v)).collect()).collect();
        let oracle = common::induced_norm_bfs(&xr, &gr).ok_or("x should lie in the cone")?;
        check(got == oracle, format!("induced norm {i}: {got} vs {oracle}"))?;
        exact += 1;
    }
    Ok(format!(
        "50 polytopes (max err {worst_poly:.1e}), 50 cones (max err {worst_cone:.1e}), {exact} exact induced norms"
    ))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let points = write("points.csv", "# dim=3\n1,2,3\n0.5,-1,2\n4,0,0\n0,0,1\n");
    let finite = write("finite.json", r#"{"points": [[1,0,0],[0,1,0],[0,0,2]], "query": [0.1,0.2,0.3]}"#);
    let poly = write("poly.json", r#"{"vertices": [[1,0,0],[2,1,0]], "query": [0,0,0]}"#);
    let cone = write("cone.json", r#"{"generators": [[1,0,0],[0,1,0]], "query": [0,0,1]}"#);
    let integer = write("int.json", r#"{"A": [[1,1,1],[2,2,2]], "b": [2,3], "positive_row": 0}"#);
    let failure = write(
        "failure.json",
        r#"{"instance": {"class": "finite", "m": 5, "size": 20, "d": 1.0, "seed": 3}, "trials": 200, "delta": 0.1}"#,
    );
    let ifp = write(
        "ifp.json",
        r#"{"instance": {"class": "integer", "n": 3, "b_bound": 2, "rows": 2, "box_upper": 3, "seed": 1}, "trials": 50, "delta": 0.1}"#,
    );
    let calibrate = write("cal.json", r#"{"class": "synthetic", "k_grid": [1, 2, 3], "trials": 500}"#);
    let invocations: Vec<Vec<&str>> = vec![
        vec!["bounds", "finite", "--size", "1000", "--delta", "0.01", "--tau", "0.1", "--d", "1"],
        vec!["bounds", "cone", "--n", "2", "--d", "1", "--mu-a", "1.4142135623730951", "--target", "0.95"],
        vec!["project", "--input", &points, "--k", "2", "--dist", "gaussian", "--seed", "5"],
        vec!["project", "--input", &points, "--k", "3", "--dist", "rademacher", "--scale", "--seed", "5"],
        vec!["decide", "finite", "--input", &finite, "--tau", "0.01", "--seed", "9"],
        vec!["decide", "polytope", "--input", &poly, "--seed", "9"],
        vec!["decide", "cone", "--input", &cone, "--seed", "9"],
        vec!["decide", "integer", "--input", &integer, "--seed", "42"],
        vec!["doubling", "--input", &points, "--exact"],
        vec!["experiment", "failure", "--config", &failure, "--seed", "1"],
        vec!["experiment", "ifp-float", "--config", &ifp, "--seed", "1"],
        vec!["experiment", "calibrate", "--config", &calibrate, "--seed", "1"],
    ];
    let exe = env!("CARGO_BIN_EXE_rpmem");
    for args in &invocations {
        let run = || Command::new(exe).args(args).env_remove("RPMEM_SEED").output().unwrap();
        let (a, b) = (run(), run());
        check(a.status.code() == Some(0), format!("{args:?} exited {:?}: {}", a.status, String::from_utf8_lossy(&a.stderr)))?;
        check(a.stdout == b.stdout && a.status == b.status, format!("{args:?} differs between runs"))?;
        check(!a.stdout.is_empty(), format!("{args:?} printed nothing"))?;
    }
    Ok(format!("{} invocations byte-identical", invocations.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("tail-bound dominance", tail_bound_dominance),
        ("finite threshold", finite_threshold),
        ("integer fiber, exact Rademacher", integer_fiber_exact),
        ("floating-point IFP pathology", ifp_float_pathology),
        ("polytope and cone", polytope_and_cone),
        ("ball cover bound", ball_cover_bound),
        ("geometry oracle equivalence", oracle_equivalence),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({secs:.1} s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1} s) {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
