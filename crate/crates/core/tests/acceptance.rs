//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use itertools::Itertools;
use ofl_core::algorithms::{potential, subset_potential_argmax};
use ofl_core::arrival::ArrivalModel;
use ofl_core::harness::{
    estimate, instrument_analysis, service_cost_by_distance, sweep, write_csv, EstimateReport, ExperimentSpec,
    InstanceSource, OptMode, SweepAxis,
};
use ofl_core::instance::{fotakis_delta, gen_clique, gen_fotakis, gen_star, star_delta};
use ofl_core::offline::{default_candidates, solve_exact, DEFAULT_BUDGET};
use ofl_core::rng::seeded;
use ofl_core::{run_fotakis, GeneratorParams, Instance, MetricSpace, OpeningRule, Point, TieBreak};
use rand::Rng;

type Outcome = (bool, Vec<String>);
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("star closed form under uniform order", star_closed_form),
        ("star ratio trends toward 4", star_tightness),
        ("clique closed form and coin-outcome oracle", clique_closed_form),
        ("random-order upper bound on every family", upper_bound_compliance),
        ("q-sweep limits and crossover at q = 1/2", q_sweep_shape),
        ("potential algorithm on the lower-bound instance", fotakis_exact),
        ("i.i.d. lower-bound construction", iid_lower_bound),
        ("rho-partial random-order bounds", partial_bounds),
        ("analysis instrumentation inequalities", instrumentation),
        (
            "offline solver, potential argmax and service-cost oracles",
            oracle_equivalence,
        ),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (pass, details) = check();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {name} ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
        for d in details {
            println!("    {d}");
        }
        failed += usize::from(!pass);
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn generated(params: GeneratorParams, arrival: ArrivalModel, rule: OpeningRule, trials: usize) -> ExperimentSpec {
    ExperimentSpec::new(InstanceSource::Generator(params), arrival, rule)
        .trials(trials)
        .seed(2024)
}

fn given(instance: &Instance, arrival: ArrivalModel, rule: OpeningRule, trials: usize) -> ExperimentSpec {
    ExperimentSpec::new(InstanceSource::Given(Box::new(instance.clone())), arrival, rule)
        .trials(trials)
        .seed(2024)
}

fn run(spec: &ExperimentSpec) -> EstimateReport {
    estimate(spec).unwrap_or_else(|e| panic!("{}: {e}", spec.id))
}

fn within(mean: f64, stderr: f64, target: f64) -> bool {
    (mean - target).abs() <= 3.0 * stderr + 1e-9
}

/// `1 + (k-1)(g + (1-g) 2 delta)` with `g = min(2 q delta, 1)`: after the
/// first arrival every leaf is `2 delta` from every open facility.
fn star_prediction(k: usize, q: f64) -> f64 {
    let delta = 1.0 / (4.0 * (k as f64).sqrt());
    let g = (q * 2.0 * delta).min(1.0);
    1.0 + (k - 1) as f64 * (g + (1.0 - g) * 2.0 * delta)
}

fn star_closed_form() -> Outcome {
    let mut ok = true;
    let mut out = Vec::new();
    for k in [16, 100, 2500] {
        let r = run(&generated(
            GeneratorParams::Star { k },
            ArrivalModel::UniformRandom,
            OpeningRule::MEYERSON,
            10_000,
        )
        .opt_mode(OptMode::Analytic));
        let delta = star_delta(k);
        let predicted = 1.0 + (k - 1) as f64 * (4.0 * delta - 4.0 * delta * delta);
        let pass = within(r.mean_cost, r.stderr, predicted);
        ok &= pass;
        out.push(format!(
            "k={k}: mean {:.5} +- {:.5}, predicted {predicted:.5}",
            r.mean_cost, r.stderr
        ));
    }
    (ok, out)
}

fn star_tightness() -> Outcome {
    let k = 10_000;
    let r = run(&generated(
        GeneratorParams::Star { k },
        ArrivalModel::UniformRandom,
        OpeningRule::MEYERSON,
        1000,
    )
    .opt_mode(OptMode::Analytic));
    let opt = 1.0 + k as f64 * star_delta(k);
    let predicted = star_prediction(k, 1.0) / opt;
    let ratio = r.mean_cost / opt;
    (
        ratio >= 3.8 && (r.opt_value - opt).abs() < 1e-12,
        vec![format!(
            "k={k}: ratio {ratio:.4} +- {:.4} vs OPT bound {opt}, prediction {predicted:.4}",
            r.ratio_stderr
        )],
    )
}

/// Exact expected cost of a linear rule on a fixed order, by recursion over
/// every coin outcome. Facilities open at demand locations.
fn expected_cost(dist: &[Vec<f64>], order: &[usize], open: &mut Vec<usize>, q: f64) -> f64 {
    let Some((&v, rest)) = order.split_first() else {
        return 0.0;
    };
    let d = open.iter().map(|&o| dist[v][o]).fold(f64::INFINITY, f64::min);
    let p = if d.is_finite() { (q * d).min(1.0) } else { 1.0 };
    let mut total = 0.0;
    if p > 0.0 {
        open.push(v);
        total += p * (1.0 + expected_cost(dist, rest, open, q));
        open.pop();
    }
    if p < 1.0 {
        total += (1.0 - p) * (d + expected_cost(dist, rest, open, q));
    }
    total
}

fn clique_oracle(delta: f64, k: usize, q: f64) -> f64 {
    let dist: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| if a == b { 0.0 } else { delta }).collect())
        .collect();
    let demands: Vec<usize> = (0..k).flat_map(|a| std::iter::repeat_n(a, k)).collect();
    let orders: Vec<Vec<usize>> = demands.iter().copied().permutations(demands.len()).collect();
    orders
        .iter()
        .map(|o| expected_cost(&dist, o, &mut Vec::new(), q))
        .sum::<f64>()
        / orders.len() as f64
}

fn clique_prediction(delta: f64, k: usize, q: f64) -> f64 {
    let g = (q * delta).min(1.0);
    1.0 + (k - 1) as f64 * (g + (1.0 - g) * delta) * (1.0 - (1.0 - g).powi(k as i32)) / g
}

fn clique_closed_form() -> Outcome {
    let mut ok = true;
    let mut out = Vec::new();
    for (delta, k) in [(0.5, 2), (0.1, 10), (0.05, 20)] {
        for q in [0.5, 1.0] {
            let r = run(&generated(
                GeneratorParams::Clique { delta, k },
                ArrivalModel::UniformRandom,
                OpeningRule::clamped(q),
                20_000,
            ));
            let predicted = clique_prediction(delta, k, q);
            let pass = within(r.mean_cost, r.stderr, predicted);
            ok &= pass;
            out.push(format!(
                "delta={delta} k={k} q={q}: mean {:.5} +- {:.5}, predicted {predicted:.5}",
                r.mean_cost, r.stderr
            ));
        }
    }
    let oracle = clique_oracle(0.5, 2, 1.0);
    let r = run(&generated(
        GeneratorParams::Clique { delta: 0.5, k: 2 },
        ArrivalModel::UniformRandom,
        OpeningRule::MEYERSON,
        20_000,
    ));
    let pass = (oracle - 2.125).abs() < 1e-12 && within(r.mean_cost, r.stderr, oracle);
    ok &= pass;
    out.push(format!(
        "coin-outcome oracle {oracle}, mean {:.5} +- {:.5}",
        r.mean_cost, r.stderr
    ));
    (ok, out)
}

/// One fixed demand multiset drawn from the i.i.d. construction.
fn drawn_subset_iid(n: usize) -> Instance {
    let family = ofl_core::instance::gen_subset_iid(n).unwrap();
    let m = family.template.space().base_count();
    let mut rng = seeded(77);
    let points = (0..family.draws).map(|_| Point::Base(rng.gen_range(0..m))).collect();
    family.template.with_demands(points).unwrap()
}

fn upper_bound_compliance() -> Outcome {
    let mut instances: Vec<(String, Instance)> = vec![
        ("star k=16".into(), gen_star(16).unwrap()),
        ("star k=20".into(), gen_star(20).unwrap()),
        ("clique 0.5,2".into(), gen_clique(0.5, 2).unwrap()),
        ("clique 0.1,10".into(), gen_clique(0.1, 10).unwrap()),
        ("clique 0.05,20".into(), gen_clique(0.05, 20).unwrap()),
        ("subset_iid n=10 draw".into(), drawn_subset_iid(10)),
        ("fotakis n=17".into(), gen_fotakis(17).unwrap().0),
    ];
    instances.push(("subset_iid n=50 draw".into(), drawn_subset_iid(50)));
    let mut ok = true;
    let mut out = Vec::new();
    for (name, inst) in &instances {
        for q in [0.25, 0.5, 1.0] {
            let r = run(&given(
                inst,
                ArrivalModel::UniformRandom,
                OpeningRule::clamped(q),
                10_000,
            ));
            let b = &r.bound_checks[0];
            let pass = b.name == "random_order" && b.pass && r.opt_kind == ofl_core::instance::OptKind::Exact;
            ok &= pass;
            out.push(format!(
                "{name} q={q}: ratio {:.4} +- {:.4} (exact OPT {:.4}) <= {:.4}{}",
                r.ratio,
                r.ratio_stderr,
                r.opt_value,
                b.value,
                if pass { "" } else { "  VIOLATED" }
            ));
        }
    }
    (ok, out)
}

fn q_sweep_shape() -> Outcome {
    let mut ok = true;
    let mut out = Vec::new();
    let grid: Vec<f64> = (5..=20).map(|i| i as f64 * 0.05).collect();
    let star = generated(
        GeneratorParams::Star { k: 10_000 },
        ArrivalModel::UniformRandom,
        OpeningRule::clamped(0.5),
        300,
    )
    .opt_mode(OptMode::Analytic)
    .id("star");
    let clique = generated(
        GeneratorParams::Clique { delta: 0.05, k: 400 },
        ArrivalModel::UniformRandom,
        OpeningRule::clamped(0.5),
        20,
    )
    .opt_mode(OptMode::Analytic)
    .id("clique");
    let star_rows = sweep(&star, &SweepAxis::Q(grid.clone())).unwrap();
    let clique_rows = sweep(&clique, &SweepAxis::Q(grid.clone())).unwrap();

    let mut csv = Vec::new();
    write_csv(&mut csv, &[star_rows.clone(), clique_rows.clone()].concat()).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (id, q_col, ratio_col, bound_col) = (col("experiment_id"), col("q"), col("ratio"), col("bound_value"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    let series = |prefix: &str| -> Vec<(f64, f64, f64)> {
        rows.iter()
            .filter(|r| r[id].starts_with(prefix))
            .map(|r| {
                (
                    r[q_col].parse().unwrap(),
                    r[ratio_col].parse().unwrap(),
                    r[bound_col].parse().unwrap(),
                )
            })
            .collect()
    };
    let (s, c) = (series("star/"), series("clique/"));

    for &(q, ratio, _) in s.iter().filter(|r| [0.25, 0.5, 1.0].contains(&r.0)) {
        let limit = 2.0 * (1.0 + q);
        let pass = ratio <= limit && ratio >= 0.95 * limit;
        ok &= pass;
        out.push(format!(
            "star k=10000 q={q}: ratio {ratio:.4}, limit 2(1+q) = {limit:.4}"
        ));
    }
    for &(q, ratio, _) in c.iter().filter(|r| [0.25, 0.5, 1.0].contains(&r.0)) {
        let limit = 1.0 + 1.0 / q;
        let pass = ratio <= limit && ratio >= 0.95 * limit;
        ok &= pass;
        out.push(format!(
            "clique delta=0.05 k=400 q={q}: ratio {ratio:.4}, limit 1+1/q = {limit:.4}"
        ));
    }
    // the star ratio rises toward its limit as k grows
    let small = run(&generated(
        GeneratorParams::Star { k: 100 },
        ArrivalModel::UniformRandom,
        OpeningRule::MEYERSON,
        2000,
    )
    .opt_mode(OptMode::Analytic));
    let large = s.iter().find(|r| r.0 == 1.0).unwrap().1;
    ok &= small.ratio < large;
    out.push(format!(
        "star q=1: ratio {:.4} at k=100 < {large:.4} at k=10000",
        small.ratio
    ));

    let worst: Vec<(f64, f64)> = s.iter().zip(&c).map(|(a, b)| (a.0, a.1.max(b.1))).collect();
    let (q_emp, w) = worst.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let (q_bound, bmin) = s.iter().map(|r| (r.0, r.2)).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let pass = (q_emp - 0.5).abs() <= 0.1 + 1e-12 && (q_bound - 0.5).abs() < 1e-12;
    ok &= pass;
    out.push(format!(
        "max(star, clique) ratio is smallest at q={q_emp:.2} ({w:.4}); bound column is smallest at q={q_bound:.2} ({bmin})"
    ));
    (ok, out)
}

fn fotakis_exact() -> Outcome {
    let mut ok = true;
    let mut out = Vec::new();
    for n in [5, 17, 37] {
        let (inst, order) = gen_fotakis(n).unwrap();
        let record = run_fotakis(&inst, &order, TieBreak::AdversarialSubset).unwrap();
        let delta = 1.0 / ((n - 1) as f64).sqrt();
        assert_eq!(delta, fotakis_delta(n));
        let m = (n - 1) as f64;
        let predicted = 1.0 + m * 1.5 * delta - m * delta * delta / 4.0;
        let facilities = 1.0 + m * delta / 2.0;
        let opt = 1.0 + n as f64 * delta / 2.0;
        let ratio = record.grand_total / opt;
        let pass = (record.grand_total - predicted).abs() <= 1e-9
            && (record.facilities.len() as f64 - facilities).abs() < 1e-9
            && (n != 37 || ratio >= 2.0);
        ok &= pass;
        out.push(format!(
            "n={n}: cost {} (predicted {predicted}), {} facilities (predicted {facilities}), ratio {ratio:.4}",
            record.grand_total,
            record.facilities.len()
        ));
    }
    (ok, out)
}

fn iid_lower_bound() -> Outcome {
    let n = 50;
    let mut ok = true;
    let mut out = Vec::new();
    for rule in [OpeningRule::MEYERSON, OpeningRule::clamped(0.5)] {
        let r = run(&generated(
            GeneratorParams::SubsetIid { n },
            ArrivalModel::Iid { distribution: None, n },
            rule,
            500,
        ));
        let bound = 2.0 - 6.0 / (n as f64 + 2.0);
        let cost_ok = r.mean_cost >= (n - 1) as f64 - 3.0 * r.stderr;
        let opt_ok = r.opt_value <= 1.0 + n as f64 / 2.0 + 1e-9;
        let ratio_ok = r.ratio >= bound - 3.0 * r.ratio_stderr - 1e-9;
        let check_ok = r.bound_checks.iter().any(|b| b.name == "iid_lower" && b.pass);
        ok &= cost_ok && opt_ok && ratio_ok && check_ok;
        out.push(format!(
            "q={}: mean cost {:.3} +- {:.3} (>= {}), mean OPT {:.4} (<= {}), ratio {:.4} [{:.4}, {:.4}] vs {bound:.4}",
            rule.q().unwrap(),
            r.mean_cost,
            r.stderr,
            n - 1,
            r.opt_value,
            1.0 + n as f64 / 2.0,
            r.ratio,
            r.ratio_ci_low,
            r.ratio_ci_high
        ));
    }
    (ok, out)
}

fn partial_bounds() -> Outcome {
    let instances = [
        ("star k=16", gen_star(16).unwrap()),
        ("clique 0.1,10", gen_clique(0.1, 10).unwrap()),
        ("clique 0.05,20", gen_clique(0.05, 20).unwrap()),
    ];
    let mut ok = true;
    let mut out = Vec::new();
    for (name, inst) in &instances {
        for rho in [0.5, 0.9] {
            for interleaver in ["cluster-blocks", "round-robin"] {
                let models = [
                    ArrivalModel::PartialRandom {
                        rho,
                        adversarial_subsets: None,
                        interleaver: interleaver.into(),
                    },
                    ArrivalModel::PartialRandomRandomAdv {
                        rho,
                        interleaver: interleaver.into(),
                    },
                ];
                for model in models {
                    let label = model.name();
                    let r = run(&given(inst, model, OpeningRule::clamped(0.5), 10_000));
                    let b = &r.bound_checks[0];
                    ok &= b.pass;
                    out.push(format!(
                        "{name} rho={rho} {interleaver} {label}: ratio {:.4} +- {:.4} <= {} {:.4}{}",
                        r.ratio,
                        r.ratio_stderr,
                        b.name,
                        b.value,
                        if b.pass { "" } else { "  VIOLATED" }
                    ));
                }
            }
        }
    }
    (ok, out)
}

fn random_explicit(points: usize, demands: usize, seed: u64) -> Instance {
    let mut rng = seeded(seed);
    let xy: Vec<(f64, f64)> = (0..points).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let distances = xy
        .iter()
        .map(|a| {
            xy.iter()
                .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                .collect()
        })
        .collect();
    let space = MetricSpace::Explicit { n: points, distances };
    let demands = (0..demands).map(|_| Point::Base(rng.gen_range(0..points))).collect();
    Instance::new(space, demands, 0.2 + 1.3 * rng.gen::<f64>()).unwrap()
}

fn instrumentation() -> Outcome {
    let instances = [
        ("star k=20", gen_star(20).unwrap()),
        ("random 10-point", random_explicit(10, 20, 5)),
    ];
    let mut ok = true;
    let mut out = Vec::new();
    for (name, inst) in &instances {
        for q in [0.5, 1.0] {
            let s = instrument_analysis(inst, OpeningRule::clamped(q), 100_000, 11).unwrap();
            ok &= s.all_pass();
            for (j, c) in s.clusters.iter().enumerate() {
                out.push(format!(
                    "{name} q={q} cluster {j} (size {}): E|C_T|d*_vT - E sum d* = {:.5} +- {:.5}; E sum p - 2q E sum d* = {:.5} +- {:.5} (<= 1){}",
                    c.size,
                    c.expected_distance_gap.mean,
                    c.expected_distance_gap.stderr,
                    c.opening_gap.mean,
                    c.opening_gap.stderr,
                    if c.expected_distance_pass && c.opening_pass { "" } else { "  VIOLATED" }
                ));
            }
        }
    }
    (ok, out)
}

fn enumerated_opt(dist: &[Vec<f64>], demands: &[usize], f: f64) -> f64 {
    let n = dist.len();
    (1u32..1 << n)
        .map(|mask| {
            let open: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            open.len() as f64 * f
                + demands
                    .iter()
                    .map(|&v| open.iter().map(|&o| dist[v][o]).fold(f64::INFINITY, f64::min))
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn subset_dist(delta: f64, a: &Point, b: &Point) -> f64 {
    match (a, b) {
        _ if a == b => 0.0,
        (Point::Subset(i), Point::Base(j)) | (Point::Base(j), Point::Subset(i)) if i.contains(j) => delta / 2.0,
        _ => delta,
    }
}

fn oracle_equivalence() -> Outcome {
    let mut ok = true;
    let mut out = Vec::new();
    let mut rng = seeded(99);

    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let points = rng.gen_range(1..=8);
        let demands = rng.gen_range(1..=10);
        let inst = random_explicit(points, demands, 1000 + t);
        let MetricSpace::Explicit { distances, .. } = inst.space() else {
            unreachable!()
        };
        let idx: Vec<usize> = inst.demands().iter().map(|p| p.base_index().unwrap()).collect();
        let oracle = enumerated_opt(distances, &idx, inst.facility_cost());
        let solved = solve_exact(&inst, &default_candidates(&inst), DEFAULT_BUDGET)
            .unwrap()
            .total;
        worst = worst.max((oracle - solved).abs());
    }
    ok &= worst <= 1e-9;
    out.push(format!(
        "solve_exact vs enumeration on 50 instances: max difference {worst:e}"
    ));

    let mut mismatches = 0;
    let mut cases = 0;
    for m in 2..=8 {
        for subset_size in 1..=m {
            for _ in 0..20 {
                let delta = 0.1 + 0.8 * rng.gen::<f64>();
                let space = MetricSpace::SubsetPoints { m, subset_size, delta };
                let mut all: Vec<Point> = (0..m).map(Point::Base).collect();
                all.extend((0..m).combinations(subset_size).map(Point::Subset));
                let served: Vec<(Point, f64)> = (0..rng.gen_range(0..=2 * m))
                    .map(|_| {
                        let p = if rng.gen_bool(0.8) {
                            Point::Base(rng.gen_range(0..m))
                        } else {
                            all[rng.gen_range(m..all.len())].clone()
                        };
                        (p, 2.0 * rng.gen::<f64>())
                    })
                    .collect();
                let refs: Vec<(&Point, f64)> = served.iter().map(|(p, d)| (p, *d)).collect();
                let oracle = |z: &Point| -> f64 {
                    served
                        .iter()
                        .map(|(v, d)| (d - subset_dist(delta, z, v)).max(0.0))
                        .sum()
                };
                let best = all.iter().map(oracle).fold(f64::NEG_INFINITY, f64::max);
                let (point, value) = subset_potential_argmax(&space, &refs).unwrap();
                cases += 1;
                let lowest = all.iter().find(|z| oracle(z) >= best - 1e-12).unwrap();
                if (value - best).abs() > 1e-12
                    || (oracle(&point) - best).abs() > 1e-12
                    || (potential(&space, &point, &refs) - best).abs() > 1e-12
                    || &point != lowest
                {
                    mismatches += 1;
                }
            }
        }
    }
    ok &= mismatches == 0;
    out.push(format!(
        "subset potential argmax vs enumeration (m <= 8): {mismatches} mismatches in {cases} cases"
    ));

    for (delta, k) in [(0.5, 3), (0.1, 10)] {
        for q in [0.5, 1.0] {
            let inst = gen_clique(delta, k).unwrap();
            let buckets = service_cost_by_distance(&inst, OpeningRule::clamped(q), 20_000, 3).unwrap();
            for b in buckets {
                let d = b.distance;
                let p = if d.is_finite() { (q * d).min(1.0) } else { 1.0 };
                let predicted = if d.is_finite() { p + (1.0 - p) * d } else { 1.0 };
                let pass = within(b.observed.mean, b.observed.stderr, predicted);
                ok &= pass;
                out.push(format!(
                    "clique {delta},{k} q={q} d={d}: service cost {:.5} +- {:.5} over {} rounds, p + (1-p)d = {predicted:.5}",
                    b.observed.mean, b.observed.stderr, b.observed.n
                ));
            }
        }
    }
    (ok, out)
}
