//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwqnet::NetworkDoc;
use pwqnet_core::eval::{feature_hq_prime, feature_hv};
use pwqnet_core::piecewise::{Piece, PieceFn};
use pwqnet_core::train::{self, Topology, TrainConfig};
use pwqnet_core::verify::{self, Reference};
use pwqnet_core::{
    build, mpc, oracle, showcase, FeatureMap, Interval, Matrix, MpcProblem, PwqFunction, Quadratic, ReluNetwork,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

fn max_diff(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn v1() -> PwqFunction {
    mpc::solve_value(&MpcProblem::example(1)).unwrap().value
}

fn explicit_solution() -> Outcome {
    let start = Instant::now();
    let stages = mpc::dp_solve(&MpcProblem::example(1)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let v = &stages[1].value;
    ensure(v.len() == 3, || format!("{} regions, expected 3", v.len()))?;
    let want = [
        (-5.0 / 3.0, -1.0, 11.0, 12.0, 6.0),
        (-1.0, 1.0, 5.0, 0.0, 0.0),
        (1.0, 5.0 / 3.0, 11.0, -12.0, 6.0),
    ];
    let mut worst = 0.0f64;
    for (p, w) in v.pieces().iter().zip(want) {
        let got = [p.region.lower(), p.region.upper(), p.f.s, p.f.l, p.f.c];
        worst = worst.max(max_diff(&got, &[w.0, w.1, w.2, w.3, w.4]));
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!("3 regions, max deviation {worst:.1e}, {elapsed:.1?}"))
}

fn quadratic_block() -> Outcome {
    let net = build::build_quadratic_net(v1().pieces()).map_err(|e| e.to_string())?;
    let [l1, l2] = net.layers() else {
        return Err("expected one hidden layer".into());
    };
    let w1 = [-8.0 / 3.0, -1.0, 0.0, -1.0, 8.0 / 3.0, -1.0];
    let a1 = [-5.0 / 3.0, 1.0, -5.0 / 3.0];
    let w2 = [-11.0, -5.0, -11.0];
    let worst = max_diff(l1.w.as_slice(), &w1)
        .max(max_diff(&l1.a, &a1))
        .max(max_diff(l2.w.as_slice(), &w2))
        .max(max_diff(&l2.a, &[0.0]));
    ensure(worst < 1e-12, || format!("parameters deviate by {worst:e}"))?;
    Ok(format!("W1, a1, W2, a2 match to {worst:.1e}"))
}

fn residual_block() -> Outcome {
    let v = v1();
    let rnet = build::build_residual_net(v.pieces()).map_err(|e| e.to_string())?;
    let out = &rnet.layers()[1];
    let worst = max_diff(out.w.as_slice(), &[52.0 / 3.0, 0.0, 52.0 / 3.0]).max(max_diff(&out.a, &[5.0]));
    ensure(worst < 1e-12, || format!("residual output layer deviates by {worst:e}"))?;
    let vnet = build::build_value_net(v.pieces()).map_err(|e| e.to_string())?;
    ensure(vnet.hidden_widths() == vec![6], || format!("width {:?}", vnet.hidden_widths()))?;
    let dom = Interval::new(-5.0 / 3.0, 5.0 / 3.0).unwrap();
    let mut err = 0.0f64;
    for x in dom.linspace(10_000) {
        let want = v.eval(x).map_err(|e| e.to_string())?;
        err = err.max((vnet.forward_scalar(&[x]).unwrap() - want).abs());
    }
    ensure(err < 1e-9, || format!("stacked net error {err:e}"))?;
    Ok(format!("W_delta/a_delta match to {worst:.1e}; width 6, max grid error {err:.1e}"))
}

fn l_matrix() -> Outcome {
    let p = MpcProblem::example(2);
    let l = build::l_matrix_for(&p);
    let want = Matrix::from_rows(&[
        [6.0 / 5.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 36.0 / 25.0, 0.0, 1.0, 12.0 / 5.0],
        [0.0, 19.0 / 5.0, 0.0, 1.0, 0.0],
    ])
    .unwrap();
    let dev = l.entries.max_abs_diff(&want).ok_or("L has the wrong shape")?;
    ensure(dev < 1e-12, || format!("L deviates by {dev:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (x, u) = (rng.gen_range(-10.0..10.0), rng.gen_range(-1.0..1.0));
        let mut hq = feature_hv(&[p.successor(x, u)]);
        hq.push(p.stage_cost(x, u));
        let lifted = l.entries.mul_vec(&feature_hq_prime(&[x], &[u])).unwrap();
        worst = worst.max(max_diff(&lifted, &hq));
    }
    ensure(worst < 1e-12, || format!("h_q vs L h'_q differ by {worst:e}"))?;
    Ok(format!("L matches to {dev:.1e}; lifting error {worst:.1e} on 1000 points"))
}

fn q_net_exactness() -> Outcome {
    let start = Instant::now();
    let spec = mpc::q_function_spec(&MpcProblem::example(2)).map_err(|e| e.to_string())?;
    let net = build::build_full_q_net(&spec.problem, spec.v_prev.pieces()).map_err(|e| e.to_string())?;
    ensure(net.hidden_widths() == vec![7], || format!("width {:?}", net.hidden_widths()))?;
    let xs = mpc::predecessor_set(&spec.problem, &spec.v_prev.domain()).ok_or("no feasible states")?;
    let mut worst = 0.0f64;
    let mut points = 0;
    for x in xs.linspace(200) {
        for u in spec.problem.u_set.linspace(200) {
            // independent recomputation: l(x, u) + V_1(6/5 x + u)
            let Ok(q) = mpc::q_eval(&spec, x, u) else { continue };
            points += 1;
            worst = worst.max((net.forward_scalar(&[x, u]).unwrap() - q).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(points > 10_000, || format!("only {points} feasible grid points"))?;
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    within_budget(elapsed, Duration::from_secs(5))?;
    Ok(format!("width 7, max error {worst:.1e} over {points} feasible points, {elapsed:.1?}"))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut summary = Vec::new();
    for horizon in 1..=3 {
        let problem = MpcProblem::example(horizon);
        let stage = mpc::solve_value(&problem).map_err(|e| e.to_string())?;
        let f = stage.feasible;
        let mut rng = ChaCha8Rng::seed_from_u64(60 + horizon as u64);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x = rng.gen_range(f.lower()..=f.upper());
            let dp = stage.value.eval(x).unwrap();
            let bf = oracle::brute_force_value(&problem, x, 21);
            let gap = (dp - bf).abs();
            ensure(gap < 1e-6, || format!("N = {horizon}, x = {x}: dp {dp} vs grid search {bf}"))?;
            worst = worst.max(gap);
        }
        summary.push(format!("N={horizon}: {worst:.1e}"));
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(60))?;
    Ok(format!("{} ({elapsed:.1?})", summary.join(", ")))
}

fn showcase_2d() -> Outcome {
    let printed_w1 = [
        [-1.0, 0.0, -1.0, 1.0, 0.0],
        [0.0, -1.0, 0.0, -1.0, -1.0],
        [-1.0, 0.0, -1.0, -1.0, 0.0],
        [0.0, -1.0, 0.0, 1.0, -1.0],
        [0.0, 1.0, 0.0, -1.0, -1.0],
        [1.0, 0.0, -1.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0, -1.0],
        [1.0, 0.0, -1.0, 1.0, 0.0],
    ];
    let printed_w2 = [-1.0, -1.0, -1.0, -1.0, -0.5, -0.5, -0.5, -0.5];
    let net = showcase::build_showcase_net();
    let w1 = Matrix::from_rows(&printed_w1).unwrap();
    let dev = net.layers()[0]
        .w
        .max_abs_diff(&w1)
        .ok_or("W1 has the wrong shape")?
        .max(max_diff(net.layers()[1].w.as_slice(), &printed_w2))
        .max(max_diff(&net.layers()[0].a, &[0.0; 8]))
        .max(max_diff(&net.layers()[1].a, &[0.0]));
    ensure(dev < 1e-12, || format!("parameters deviate by {dev:e}"))?;
    let reports = showcase::verify_showcase();
    for r in &reports {
        ensure(r.pass, || format!("{} failed: {:e} at {:?} {}", r.check, r.max_error, r.location, r.detail))?;
    }
    let residual = reports.iter().find(|r| r.check == "showcase_residual_pwa").ok_or("missing residual check")?;
    ensure(residual.max_error < 1e-9, || format!("second difference {:e}", residual.max_error))?;
    Ok(format!(
        "{} checks pass; second differences {:.1e}; W1/W2 match to {dev:.1e}",
        reports.len(),
        residual.max_error
    ))
}

fn learning_experiment() -> Outcome {
    let start = Instant::now();
    let topologies = train::reference_topologies();
    let counts: Vec<usize> = topologies.iter().map(Topology::param_count).collect();
    ensure(counts == [36, 43, 50, 57, 49, 51, 57], || format!("parameter counts {counts:?}"))?;

    let spec = mpc::q_function_spec(&MpcProblem::example(2)).map_err(|e| e.to_string())?;
    let data = train::sample_dataset(&spec, 2000, 42).map_err(|e| e.to_string())?;

    let exact = build::build_full_q_net(&spec.problem, spec.v_prev.pieces()).map_err(|e| e.to_string())?;
    let exact_rmse = train::rmse(&exact, &data).map_err(|e| e.to_string())?;
    ensure(exact_rmse < 1e-6, || format!("exact-init RMSE {exact_rmse:e}"))?;

    let rows = train::experiment(&topologies, &data, 20, 0, TrainConfig::default()).map_err(|e| e.to_string())?;
    let lifted = &rows[2];
    ensure(lifted.topology.widths == [7], || "row order changed".into())?;
    for baseline in &rows[4..] {
        ensure(lifted.mean_rmse < baseline.mean_rmse, || {
            format!(
                "h'_q [7] mean RMSE {:.4} not below (x,u) {:?} mean {:.4}",
                lifted.mean_rmse, baseline.topology.widths, baseline.mean_rmse
            )
        })?;
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(600))?;
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{:?}={:.3}", r.topology.widths, r.mean_rmse))
        .collect();
    Ok(format!(
        "params {counts:?}; exact-init RMSE {exact_rmse:.1e}; mean RMSE over 20 trials {} ({elapsed:.0?})",
        table.join(" ")
    ))
}

fn random_convex_pwq(rng: &mut ChaCha8Rng) -> PwqFunction {
    let mut lo = rng.gen_range(-3.0..0.0);
    let mut value = rng.gen_range(-2.0..2.0);
    let mut slope: f64 = rng.gen_range(-3.0..3.0);
    let mut pieces = Vec::new();
    for _ in 0..rng.gen_range(1..7) {
        let hi = lo + rng.gen_range(0.1..1.5);
        let s = rng.gen_range(0.0..4.0);
        slope += rng.gen_range(0.0..2.0);
        let l = slope - 2.0 * s * lo;
        let q = Quadratic::new(s, l, value - s * lo * lo - l * lo);
        pieces.push(Piece::new(Interval::new(lo, hi).unwrap(), q));
        value = q.eval(hi);
        slope = q.derivative(hi);
        lo = hi;
    }
    PwqFunction::new(pieces).unwrap()
}

fn gradient_check(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let topo = Topology::new(FeatureMap::Identity { dim: 2 }, vec![4, 3]);
    let fm = topo.feature_map;
    let mut layers = train::init_network(&topo, rng).into_layers();
    for l in &mut layers {
        l.a.iter_mut().for_each(|a| *a = rng.gen_range(-0.5..0.5));
    }
    let net = ReluNetwork::new(fm, layers).unwrap();
    let feats: Vec<Vec<f64>> = (0..10)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let targets: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, grad) = train::loss_and_gradient(&net, &feats, &targets);
    let delta = 1e-6;
    let mut worst = 0.0f64;
    for (li, layer) in net.layers().iter().enumerate() {
        let nw = layer.w.as_slice().len();
        for p in 0..nw + layer.a.len() {
            let shifted = |by: f64| {
                let mut ls = net.clone().into_layers();
                if p < nw {
                    ls[li].w.as_mut_slice()[p] += by;
                } else {
                    ls[li].a[p - nw] += by;
                }
                train::mse(&ReluNetwork::new(fm, ls).unwrap(), &feats, &targets)
            };
            let numeric = (shifted(delta) - shifted(-delta)) / (2.0 * delta);
            let analytic = if p < nw { grad.w[li][p] } else { grad.a[li][p - nw] };
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    Ok(worst)
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..25 {
        let v = random_convex_pwq(&mut rng);
        let qnet = build::build_quadratic_net(v.pieces()).map_err(|e| e.to_string())?;
        let regions: Vec<Interval> = v.pieces().iter().map(|p| p.region).collect();
        let r = verify::check_residual_pwa(
            |x| Some(v.eval(x[0]).ok()? - qnet.forward_scalar(x).ok()?),
            &regions,
            verify::DEFAULT_STEP,
            verify::DEFAULT_SECOND_DIFF_TOL,
        )
        .map_err(|e| e.to_string())?;
        ensure(r.pass, || format!("instance {i}: second difference {:e}", r.max_error))?;
    }

    let mut worst_grad = 0.0f64;
    for _ in 0..10 {
        worst_grad = worst_grad.max(gradient_check(&mut rng)?);
    }
    ensure(worst_grad < 1e-4, || format!("gradient relative error {worst_grad:e}"))?;

    let spec = mpc::q_function_spec(&MpcProblem::example(2)).unwrap();
    let mut nets = vec![
        build::build_value_net(v1().pieces()).unwrap(),
        build::build_full_q_net(&spec.problem, spec.v_prev.pieces()).unwrap(),
        showcase::build_showcase_net(),
    ];
    for t in train::reference_topologies() {
        nets.push(train::init_network(&t, &mut rng));
    }
    for net in &nets {
        let doc = NetworkDoc::new(net, BTreeMap::from([("k".into(), "v".into())]));
        let back = NetworkDoc::from_json(&doc.to_json()).map_err(|e| e.to_string())?;
        let net2 = back.to_network().map_err(|e| e.to_string())?;
        let bits = |n: &ReluNetwork| -> Vec<u64> {
            n.layers()
                .iter()
                .flat_map(|l| l.w.as_slice().iter().chain(&l.a).map(|v| v.to_bits()))
                .collect()
        };
        ensure(bits(net) == bits(&net2) && net2.feature_map() == net.feature_map(), || {
            "round trip changed a network".into()
        })?;
    }
    let v = v1();
    ensure(verify::check_exact(&nets[0], Reference::Value(&v), 100, 1e-9).pass, || {
        "value net failed after serialization checks".into()
    })?;
    Ok(format!(
        "25 residual instances pass; gradient rel. error {worst_grad:.1e}; {} networks round-trip bit-exactly",
        nets.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("explicit solution reproduction", explicit_solution),
        ("quadratic block parameters", quadratic_block),
        ("residual block and stacked value net", residual_block),
        ("L matrix", l_matrix),
        ("Q-net exactness", q_net_exactness),
        ("oracle equivalence", oracle_equivalence),
        ("2-D showcase", showcase_2d),
        ("learning experiment", learning_experiment),
        ("property suites", property_suites),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} — {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {}: FAIL  {name} — {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
