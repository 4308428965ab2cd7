//! Acceptance suite: each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use softhand::config::{RunConfig, Stream};
use softhand::control::{invert, objective, pressures_from_u, run_benchmark, train_forward};
use softhand::demo::{synth_demo, Template};
use softhand::geodesic::{Geodesics, MeshGraph};
use softhand::geometry::Point3;
use softhand::mesh::Finger;
use softhand::mlp::{relative_error, Mlp};
use softhand::pipeline::{assign_stage, run_pipeline};
use softhand::sim::{sample_dataset, Plant, PressureCommand, SpineFinger};
use softhand::stage1::{allocate, allocate_fingers, match_cost, match_fingers, WorkspaceEnvelope};
use softhand::stage2::{run_stage2, weighted_adjustment, RetargetedTrajectory};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn controller_ordering() -> Outcome {
    let (_, _, result) = run_benchmark(&RunConfig::default()).map_err(|e| e.to_string())?;
    let rmse = |name: &str| result.summary_for(name).map(|s| s.rmse_mm).ok_or(format!("no {name} summary"));
    let ours = rmse("inverse_mlp")?;
    let mut baselines = Vec::new();
    for name in ["linear", "knn", "direct_mlp"] {
        baselines.push((name, rmse(name)?));
    }
    let detail = format!(
        "inverse_mlp {ours:.3} mm; {}",
        baselines.iter().map(|(n, r)| format!("{n} {r:.3}")).collect::<Vec<_>>().join(", ")
    );
    for (name, r) in &baselines {
        ensure(ours < *r, || format!("{detail}: not below {name}"))?;
    }
    let best = baselines.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let reduction = 1.0 - ours / best;
    ensure(reduction >= 0.2, || format!("{detail}: {:.1}% below best baseline, need 20%", 100.0 * reduction))?;
    Ok(format!("{detail} ({:.1}% below best baseline)", 100.0 * reduction))
}

// ---------------------------------------------------------------- 2

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive optimum with the lexicographically greatest optimal counts.
fn brute_allocation(loads: &[f64], n: usize) -> (f64, Vec<usize>) {
    let active: Vec<usize> = (0..loads.len()).filter(|&i| loads[i] > 0.0).collect();
    let mut best = (f64::INFINITY, Vec::new());
    for comp in compositions(n, active.len()) {
        let mut counts = vec![0; loads.len()];
        for (&i, &c) in active.iter().zip(&comp) {
            counts[i] = c;
        }
        let obj = active.iter().map(|&i| loads[i] / counts[i] as f64).fold(0.0, f64::max);
        if obj < best.0 || (obj == best.0 && counts > best.1) {
            best = (obj, counts);
        }
    }
    best
}

fn allocation_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut named = 0;
    for case in 0..500 {
        let len = rng.random_range(1..=6);
        let mut loads: Vec<f64> = (0..len)
            .map(|_| match rng.random_range(0..4) {
                0 => 0.0,
                1 => rng.random_range(1..5) as f64,
                _ => rng.random_range(0.01..10.0),
            })
            .collect();
        if loads.iter().all(|l| *l == 0.0) {
            loads[0] = 1.0;
        }
        let active = loads.iter().filter(|l| **l > 0.0).count();
        let n = rng.random_range(active..=8.max(active));
        let (obj, counts) = brute_allocation(&loads, n);
        let a = allocate(&loads, n).map_err(|e| format!("case {case}: {e}"))?;
        ensure(a.objective == obj && a.counts == counts, || {
            format!("case {case}: loads {loads:?}, n {n}: got {:?}/{}, expected {counts:?}/{obj}", a.counts, a.objective)
        })?;
        if len <= Finger::ALL.len() {
            let map: BTreeMap<Finger, f64> = Finger::ALL.into_iter().zip(loads.iter().copied()).collect();
            let f = allocate_fingers(&map, n).map_err(|e| e.to_string())?;
            let got: Vec<usize> = f.counts.values().copied().take(len).collect();
            ensure(got == counts && f.objective == obj, || format!("case {case}: named allocation {got:?}"))?;
            named += 1;
        }
    }
    Ok(format!("500 instances exact ({named} also through named fingers)"))
}

// ---------------------------------------------------------------- 3

fn random_envelope(rng: &mut ChaCha8Rng) -> WorkspaceEnvelope {
    let centre = Point3::new(rng.random_range(0.0..0.1), rng.random_range(0.0..0.1), rng.random_range(0.0..0.05));
    let spread = rng.random_range(0.0..0.04);
    let points = (0..rng.random_range(1..5))
        .map(|_| centre + Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * spread)
        .collect();
    WorkspaceEnvelope::from_points(points).expect("finite points")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn hungarian_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let perms: Vec<Vec<Vec<usize>>> = (0..=7).map(permutations).collect();
    let mut penalized = 0;
    for case in 0..500 {
        let n = rng.random_range(1..=7);
        let mut fingers = Finger::ALL.to_vec();
        fingers.shuffle(&mut rng);
        fingers.truncate(rng.random_range(1..=n.min(5)));
        let mut allocation: BTreeMap<Finger, usize> = fingers.iter().map(|f| (*f, 1)).collect();
        for _ in fingers.len()..n {
            *allocation.get_mut(fingers.choose(&mut rng).unwrap()).unwrap() += 1;
        }
        let human: BTreeMap<Finger, WorkspaceEnvelope> = fingers.iter().map(|f| (*f, random_envelope(&mut rng))).collect();
        let robot: Vec<WorkspaceEnvelope> = (0..n).map(|_| random_envelope(&mut rng)).collect();
        let beta = match case % 3 {
            0 => 0.0,
            1 => rng.random_range(0.0..0.2),
            _ => 1e6,
        };
        let slots: Vec<Finger> = allocation.iter().flat_map(|(f, &k)| std::iter::repeat_n(*f, k)).collect();
        let cost: Vec<Vec<f64>> = robot
            .iter()
            .map(|r| slots.iter().map(|f| match_cost(r, &human[f], beta)).collect())
            .collect();
        if beta > 0.0 && robot.iter().any(|r| human.values().any(|h| !r.overlaps(h))) {
            penalized += 1;
        }
        let best = perms[n]
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let m = match_fingers(&robot, &human, &allocation, beta).map_err(|e| format!("case {case}: {e}"))?;
        ensure((m.total_cost - best).abs() <= 1e-12 * best.abs().max(1.0), || {
            format!("case {case}: n {n}, beta {beta}: total {} vs enumeration {best}", m.total_cost)
        })?;
    }
    Ok(format!("500 instances up to 7x7 ({penalized} with a penalized disjoint pair)"))
}

// ---------------------------------------------------------------- 4

fn random_connected_mesh(rng: &mut ChaCha8Rng) -> (Vec<Point3>, Vec<[usize; 3]>) {
    let n = rng.random_range(3..=40);
    let pts: Vec<Point3> = (0..n)
        .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    // Every new vertex joins a triangle with two earlier ones, so the graph
    // stays connected; extra triangles add cycles.
    let mut tris = vec![[0, 1, 2]];
    for v in 3..n {
        let a = rng.random_range(0..v);
        let mut b = rng.random_range(0..v - 1);
        if b >= a {
            b += 1;
        }
        tris.push([a, b, v]);
    }
    for _ in 0..rng.random_range(0..n) {
        let mut t = [0; 3];
        let picks = rand::seq::index::sample(rng, n, 3);
        for (k, i) in picks.iter().enumerate() {
            t[k] = i;
        }
        tris.push(t);
    }
    (pts, tris)
}

fn floyd_warshall(graph: &MeshGraph) -> Vec<Vec<f64>> {
    let n = graph.vertex_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (a, b, w) in graph.edges() {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn geodesic_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let (pts, tris) = random_connected_mesh(&mut rng);
        let graph = MeshGraph::from_triangles(&pts, &tris);
        ensure(graph.component_count() == 1, || format!("case {case}: generator produced a disconnected mesh"))?;
        let oracle = floyd_warshall(&graph);
        let geo = Geodesics::new(graph, pts.clone());
        let n = pts.len();
        let d: Vec<Vec<f64>> = (0..n).map(|i| geo.field(i).unwrap().distances.clone()).collect();
        for i in 0..n {
            ensure(d[i][i] == 0.0, || format!("case {case}: d({i},{i}) = {}", d[i][i]))?;
            for j in 0..n {
                let err = (d[i][j] - oracle[i][j]).abs();
                worst = worst.max(err);
                ensure(err <= 1e-12, || format!("case {case}: d({i},{j}) = {} vs {}", d[i][j], oracle[i][j]))?;
                ensure((d[i][j] - d[j][i]).abs() <= 1e-12, || format!("case {case}: asymmetric at ({i},{j})"))?;
                ensure(i == j || d[i][j] > 0.0, || format!("case {case}: zero distance between {i} and {j}"))?;
                for k in 0..n {
                    ensure(d[i][k] <= d[i][j] + d[j][k] + 1e-12, || format!("case {case}: triangle ({i},{j},{k})"))?;
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs over 100 meshes, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

fn stage2_contract() -> Outcome {
    let cfg = RunConfig::default();
    let dmax = cfg.retarget.delta_max;
    let mut checked = 0;
    for template in Template::ALL {
        let name = template.name();
        let demo = synth_demo(name, 7, 6).map_err(|e| e.to_string())?;
        let assignment = assign_stage(&demo, &cfg).map_err(|e| e.to_string())?;
        let full = run_stage2(&demo, &assignment, &cfg.retarget).map_err(|e| e.to_string())?;
        for (t, (frame, out)) in demo.frames().iter().zip(&full.frames).enumerate() {
            for g in &out.fingers {
                ensure(g.delta.norm() <= dmax, || format!("{name} frame {t}: |delta| {}", g.delta.norm()))?;
                if frame.contacts.is_empty() {
                    ensure(g.delta == Point3::zeros() && g.sum_w == 0.0, || format!("{name} frame {t}: nonzero delta without contacts"))?;
                }
                checked += 1;
            }
        }
        let n = demo.frames().len();
        for k in [2, 3, n / 2, n - 1] {
            let prefix = run_stage2(&demo.truncated(k).map_err(|e| e.to_string())?, &assignment, &cfg.retarget).map_err(|e| e.to_string())?;
            let expected = RetargetedTrajectory {
                frames: full.frames[..k].to_vec(),
                ..full.clone()
            };
            ensure(prefix.to_json_string() == expected.to_json_string(), || format!("{name}: prefix {k} JSON differs"))?;
            ensure(prefix.to_csv_string() == expected.to_csv_string(), || format!("{name}: prefix {k} CSV differs"))?;
        }
    }

    let s = Point3::zeros();
    let contacts = [(Point3::new(0.004, 0.0, 0.0), 2.0), (Point3::new(0.0, 0.004, 0.0), 1.0)];
    let a = weighted_adjustment(&s, &contacts, 1e-9, 0.01);
    let hand = Point3::new(0.008 / 3.0, 0.004 / 3.0, 0.0);
    ensure((a.delta - hand).norm() < 1e-6, || format!("two-contact example gave {:?}", a.delta))?;
    let c = weighted_adjustment(&s, &contacts, 1e-9, 0.001);
    ensure((c.delta.norm() - 0.001).abs() < 1e-12, || format!("clamped norm {}", c.delta.norm()))?;
    ensure((c.delta.normalize() - hand.normalize()).norm() < 1e-12, || "clamp changed direction".into())?;
    Ok(format!("{checked} fingertip deltas over 3 templates; prefixes byte-identical; worked example within 1e-6"))
}

// ---------------------------------------------------------------- 6

fn gradient_fidelity() -> Outcome {
    let cfg = RunConfig::default();
    let plant = SpineFinger::new(cfg.spine, cfg.limits().unwrap()).unwrap();
    let data = sample_dataset(&plant, 400, 6, 3e-4).map_err(|e| e.to_string())?;
    let train = softhand::config::TrainConfig {
        epochs: 40,
        ..cfg.train
    };
    let model = train_forward(&data, plant.limits, &train, 6).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;

    // Forward model Jacobian, step 1e-5 in standardized input units.
    let sigma = &model.model.input.std;
    for case in 0..50 {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..50.0));
        let (_, jac) = model.jacobian(&p);
        for k in 0..3 {
            let h = 1e-5 * sigma[k];
            let (mut hi, mut lo) = (p, p);
            hi[k] += h;
            lo[k] -= h;
            let (fh, fl) = (model.predict(&hi), model.predict(&lo));
            let fd: Vec<f64> = (0..3).map(|r| (fh[r] - fl[r]) / (2.0 * h)).collect();
            let col: Vec<f64> = (0..3).map(|r| jac[r][k]).collect();
            let e = relative_error(&col, &fd);
            worst = worst.max(e);
            ensure(e < 1e-4, || format!("model case {case}, input {k}: relative error {e:.2e}"))?;
        }
    }

    // Untrained network with random weights, Jacobian in its own units.
    for case in 0..50 {
        let net = Mlp::new(&[3, 64, 64, 3], &mut rng).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, jac) = net.jacobian(&x);
        for k in 0..3 {
            let (mut hi, mut lo) = (x.clone(), x.clone());
            hi[k] += 1e-5;
            lo[k] -= 1e-5;
            let (fh, fl) = (net.forward(&hi), net.forward(&lo));
            let fd: Vec<f64> = (0..3).map(|r| (fh[r] - fl[r]) / 2e-5).collect();
            let col: Vec<f64> = (0..3).map(|r| jac[r][k]).collect();
            let e = relative_error(&col, &fd);
            worst = worst.max(e);
            ensure(e < 1e-4, || format!("random net case {case}, input {k}: relative error {e:.2e}"))?;
        }
    }

    // Planar objective through the sigmoid reparameterisation.
    for case in 0..50 {
        let u: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let d_ref = [rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.0];
        let (_, grad) = objective(&model, &u, &d_ref);
        let fd: Vec<f64> = (0..3)
            .map(|k| {
                let (mut hi, mut lo) = (u, u);
                hi[k] += 1e-5;
                lo[k] -= 1e-5;
                (objective(&model, &hi, &d_ref).0 - objective(&model, &lo, &d_ref).0) / 2e-5
            })
            .collect();
        let e = relative_error(&grad, &fd);
        worst = worst.max(e);
        ensure(e < 1e-4, || format!("objective case {case}: relative error {e:.2e} at u {u:?}"))?;
        let p = pressures_from_u(&u, &model.limits);
        ensure(p.iter().all(|v| *v > 0.0 && *v < 50.0), || format!("objective case {case}: pressure {p:?} on the boundary"))?;
    }
    Ok(format!("150 configurations, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- 7

fn inverse_self_consistency() -> Outcome {
    let cfg = RunConfig::default();
    let plant = SpineFinger::new(cfg.spine, cfg.limits().unwrap()).unwrap();
    let data = sample_dataset(&plant, cfg.benchmark.samples, cfg.seed_for(Stream::Dataset), 0.0).map_err(|e| e.to_string())?;
    let model = train_forward(&data, plant.limits, &cfg.train, cfg.seed_for(Stream::Training)).map_err(|e| e.to_string())?;
    let v = model.metadata.train.validation_rmse.clone().ok_or("no validation split")?;
    let planar_val = v[0].hypot(v[1]) * 1e3;
    ensure(planar_val < 0.5, || format!("forward model planar validation RMSE {planar_val:.3} mm"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let p0: [f64; 3] = std::array::from_fn(|_| rng.random_range(5.0..45.0));
        let d0 = plant.displacement(&p0);
        let sol = invert(&model, &[d0.x, d0.y, d0.z], None, &cfg.invert).map_err(|e| e.to_string())?;
        let d = plant.displacement(&sol.pressure);
        let err = (d.x - d0.x).hypot(d.y - d0.y) * 1e3;
        worst = worst.max(err);
        ensure(err < 0.5, || format!("case {case}: p0 {p0:?} executed error {err:.3} mm"))?;
    }
    Ok(format!("model validation {planar_val:.3} mm; 100 targets, worst executed error {worst:.3} mm"))
}

// ---------------------------------------------------------------- 8

fn list_files(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn pipeline_determinism() -> Outcome {
    let mut cfg = RunConfig {
        seed: 11,
        ..RunConfig::default()
    };
    cfg.demo.template = "twist".into();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(&cfg, None, a.path()).map_err(|e| e.to_string())?;
    run_pipeline(&cfg, None, b.path()).map_err(|e| e.to_string())?;
    let (fa, fb) = (list_files(a.path()), list_files(b.path()));
    ensure(fa == fb, || "runs produced different file sets".into())?;
    for f in &fa {
        let same = std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap();
        ensure(same, || format!("{} differs between runs", f.display()))?;
    }
    Ok(format!("{} files byte-identical", fa.len()))
}

// ---------------------------------------------------------------- 9

fn simulator_symmetry() -> Outcome {
    let cfg = RunConfig::default();
    let limits = cfg.limits().unwrap();
    let plant = SpineFinger::new(cfg.spine, limits).unwrap();
    let (s, c) = (2.0 * std::f64::consts::PI / 3.0).sin_cos();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(limits.min..=limits.max));
        let cmd = PressureCommand::new(p, &limits).map_err(|e| e.to_string())?;
        let d0 = plant.displacement(&cmd.0);
        let d1 = plant.displacement(&cmd.rotated().0);
        let (x, y) = (c * d0.x - s * d0.y, s * d0.x + c * d0.y);
        let err = (x - d1.x).abs().max((y - d1.y).abs());
        worst = worst.max(err);
        ensure(err < 1e-9, || format!("case {case}: rotation error {err:.2e} at {p:?}"))?;

        let q = p[0];
        let d = plant.displacement(&[q, q, q]);
        ensure(d.x == 0.0 && d.y == 0.0 && d.z == 0.0, || format!("equal pressures {q} gave {d:?}"))?;
    }
    Ok(format!("1000 pressures, max rotation error {worst:.1e}; equal pressures exactly straight"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("controller ordering", controller_ordering, Some(Duration::from_secs(300))),
        ("allocation optimality", allocation_optimality, Some(Duration::from_secs(10))),
        ("hungarian optimality", hungarian_optimality, Some(Duration::from_secs(10))),
        ("geodesic correctness", geodesic_correctness, Some(Duration::from_secs(30))),
        ("stage-2 contract", stage2_contract, None),
        ("gradient fidelity", gradient_fidelity, None),
        ("inverse self-consistency", inverse_self_consistency, None),
        ("end-to-end determinism", pipeline_determinism, None),
        ("simulator symmetry", simulator_symmetry, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, budget) {
            if elapsed > limit {
                outcome = Err(format!("{detail}; took {elapsed:.1?}, budget {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{elapsed:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{elapsed:.1?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
