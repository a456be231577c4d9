//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topopt::diagnostics::{check_gradient, components, elements_at_nodes, history_csv, sweep_epsilon};
use topopt::fem::{solve_linear, FemSpace, HeatModel, MechModel, SolverKind};
use topopt::grid::{resolve_boundary, Edge, FieldKind, LoadCase, SegmentKind};
use topopt::material::{ConductivityInterp, ElasticInterp};
use topopt::optimizer::{project_volume, ConstraintMode, OptimizationResult};
use topopt::oracle::{
    closed_form_elastic_ke, dense_assemble, dense_solve, perimeter_double_sum, perimeter_zero_extended,
    projection_bruteforce,
};
use topopt::perimeter::{c_g_constant, perimeter_value};
use topopt::problems::{builtin, Overrides, Problem, ProblemConfig};
use topopt::{ElasticMaterial, Grid, GridSpec, HeatMaterial, KernelSpec, Segment};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configured(name: &str, o: Overrides) -> ProblemConfig {
    let mut c = builtin(name).expect("builtin");
    o.apply(&mut c).expect("overrides");
    c
}

fn built(name: &str, o: Overrides) -> Problem {
    configured(name, o).build().expect("build")
}

fn run(cfg: &ProblemConfig) -> (OptimizationResult<f64>, Duration) {
    let t = Instant::now();
    let p = cfg.build().expect("build");
    let r = p.optimize(cfg.initial_design().expect("initial design"), |_, _| {});
    (r, t.elapsed())
}

fn is_binary(chi: &[f64]) -> bool {
    chi.iter().all(|&c| c == 0.0 || c == 1.0)
}

/// Reciprocity defects seen by the runs of other criteria.
#[derive(Default)]
struct Shared {
    reciprocity: Vec<(String, f64)>,
    volume_violation: f64,
}

impl Shared {
    fn record(&mut self, label: &str, r: &OptimizationResult<f64>) {
        self.reciprocity.push((label.to_string(), r.stats.max_reciprocity_error));
        self.volume_violation = self.volume_violation.max(r.stats.max_volume_violation);
    }
}

fn gradient_consistency() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["mech1", "heat"] {
        let t = Instant::now();
        // the perimeter enters through a subgradient, which finite differences cannot check
        let p = built(name, Overrides { nx: Some(12), gamma: Some(0.0), ..Default::default() });
        let rep = match &p {
            Problem::Mech(m) => check_gradient(m, 20, 1e-5, 2024),
            Problem::Heat(h) => check_gradient(h, 20, 1e-5, 2024),
        }
        .map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        ok &= rep.max_rel_error < 1e-4 && secs < 30.0;
        parts.push(format!("{name}: max rel err {:.2e} in {secs:.1}s", rep.max_rel_error));
    }
    check(ok, parts.join("; "))
}

fn penalty_equivalence() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_split = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for lambda in [0.6, 1.0, 25.0] {
        let Problem::Mech(m) = built("mech1", Overrides { nx: Some(16), lambda: Some(lambda), ..Default::default() })
        else {
            unreachable!()
        };
        for _ in 0..3 {
            let chi: Vec<f64> = (0..256).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
            let snap = m.snapshot(&chi).map_err(|e| e.to_string())?;
            let b = m.eval_l(&snap, &snap).map_err(|e| e.to_string())?;
            let scale = b.total.abs();
            worst_res = worst_res.max(b.penalty.abs() / scale);
            let j_tilde = b.physical;
            worst_split = worst_split.max((b.total - (j_tilde + b.perimeter_term)).abs() / scale);
        }
    }
    check(
        worst_res <= 1e-7 && worst_split <= 1e-7,
        format!("max residual/|L| {worst_res:.2e}, max |L - (J~ + perimeter)|/|L| {worst_split:.2e}"),
    )
}

fn reciprocity(shared: &Shared) -> Outcome {
    let worst = shared.reciprocity.iter().fold(0.0f64, |m, (_, e)| m.max(*e));
    let which = shared.reciprocity.iter().filter(|(_, e)| *e > 0.0).count();
    check(
        worst <= 1e-8 && which > 0,
        format!("max |l_in(v) - l_out(u)|/|l_out(u)| = {worst:.2e} over {which} mechanism runs"),
    )
}

fn convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for name in ["mech1", "heat"] {
        let p = built(name, Overrides { nx: Some(12), ..Default::default() });
        let grid = p.grid().clone();
        let params = *p.params();
        let n = grid.n_elems();
        let weight = params.gamma / params.eps;
        let rand_field = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.0..1.0)).collect() };
        let base = rand_field(&mut rng);
        // L with frozen inner variables; the perimeter in its convex defining form
        let eval: Box<dyn Fn(&[f64]) -> Result<f64, String>> = match &p {
            Problem::Mech(m) => {
                let frozen = m.snapshot(&base).map_err(|e| e.to_string())?;
                let m = m.clone();
                let grid = grid.clone();
                Box::new(move |chi| {
                    let fresh = m.snapshot(chi).map_err(|e| e.to_string())?;
                    let b = m.eval_l(&frozen, &fresh).map_err(|e| e.to_string())?;
                    Ok(b.physical + b.penalty + weight * perimeter_zero_extended(&grid, chi, params.eps))
                })
            }
            Problem::Heat(h) => {
                let frozen = h.snapshot(&base).map_err(|e| e.to_string())?;
                let h = h.clone();
                let grid = grid.clone();
                Box::new(move |chi| {
                    let fresh = h.snapshot(chi).map_err(|e| e.to_string())?;
                    let b = h.eval_l(&frozen, &fresh).map_err(|e| e.to_string())?;
                    Ok(b.physical + b.penalty + weight * perimeter_zero_extended(&grid, chi, params.eps))
                })
            }
        };
        let mut local = f64::NEG_INFINITY;
        for _ in 0..100 {
            let a = rand_field(&mut rng);
            let b = rand_field(&mut rng);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (la, lb, lm) = (eval(&a)?, eval(&b)?, eval(&mid)?);
            let excess = (lm - 0.5 * (la + lb)) / lm.abs().max(la.abs()).max(lb.abs());
            local = local.max(excess);
        }
        worst = worst.max(local);
        parts.push(format!("{name}: max relative midpoint excess {local:.2e}"));
    }
    check(worst <= 1e-10, format!("100 pairs each; {}", parts.join("; ")))
}

fn monotone_descent(shared: &mut Shared) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, nx, ny) in [("mech1", 100, 100), ("mech2", 120, 60)] {
        let cfg = configured(name, Overrides { nx: Some(nx), ny: Some(ny), ..Default::default() });
        let (r, t) = run(&cfg);
        shared.record(name, &r);
        let beta = cfg.penalty.beta.expect("beta");
        let volume = r.design.iter().sum::<f64>() / r.design.len() as f64;
        let iters = r.history.len();
        let good = iters >= 100
            && r.is_monotone()
            && is_binary(&r.design)
            && volume <= beta + 1e-12
            && t.as_secs_f64() < 600.0;
        ok &= good;
        parts.push(format!(
            "{name} {nx}x{ny}: {iters} iterations ({}), monotone {}, binary {}, volume {volume:.4} <= {beta}, {:.0}s",
            r.termination.reason(),
            r.is_monotone(),
            is_binary(&r.design),
            t.as_secs_f64()
        ));
    }
    check(ok, parts.join("; "))
}

fn projection(shared: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for trial in 0..1000 {
        let n = rng.gen_range(1..=10_000);
        let beta = rng.gen_range(0.01..0.99);
        // every third field has heavy ties
        let field: Vec<f64> = if trial % 3 == 0 {
            (0..n).map(|_| rng.gen_range(0..5) as f64 * 0.25).collect()
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect()
        };
        for mode in [ConstraintMode::Inequality, ConstraintMode::Equality] {
            if project_volume(&field, beta, mode) != projection_bruteforce(&field, beta, mode) {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0 && shared.volume_violation == 0.0,
        format!(
            "{mismatches} mismatches over 2000 projections; max volume violation in runs {:.1e}",
            shared.volume_violation
        ),
    )
}

fn perimeter() -> Outcome {
    let grid = Grid::unit(32, 32).map_err(|e| e.to_string())?;
    let k = KernelSpec::for_grid(&grid, grid.h()).map_err(|e| e.to_string())?;
    let margin = k.radius() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let chi: Vec<f64> = (0..grid.n_elems())
            .map(|e| {
                let (i, j) = grid.elem_ij(e);
                let inside = (margin..32 - margin).contains(&i) && (margin..32 - margin).contains(&j);
                if inside && rng.gen_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let fast = perimeter_value(&grid, &chi, &k).map_err(|e| e.to_string())?;
        worst = worst.max((fast - perimeter_double_sum(&grid, &chi, grid.h())).abs());
    }
    let c_g = c_g_constant(4.0);
    let sweep = sweep_epsilon(400, 0.3, &[0.04, 0.02, 0.01]).map_err(|e| e.to_string())?;
    let best = sweep.iter().map(|p| (p.ratio - 1.0).abs()).fold(f64::INFINITY, f64::min);
    check(
        worst <= 1e-10 && best < 0.05 && (c_g - (2.0 * PI).sqrt()).abs() <= 1e-3,
        format!("oracle gap {worst:.1e}; best |ratio - 1| {best:.2e}; C_G {c_g:.6}"),
    )
}

fn heat_benchmark(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut trials = Vec::new();
    let mut parts = Vec::new();
    for p in [1.0, 0.5, 0.1, -0.1, -1.0] {
        let cfg = configured("heat", Overrides { nx: Some(150), p: Some(p), ..Default::default() });
        let (r, _) = run(&cfg);
        shared.record(&format!("heat p={p}"), &r);
        let problem = cfg.build().expect("build");
        let Problem::Heat(h) = &problem else { unreachable!() };
        let grid = problem.grid();
        let nodes: Vec<usize> = h.model().boundary().dirichlet.iter().map(|&(d, _)| d).collect();
        let comps = components(grid, &r.design);
        let touching = comps.touching(&elements_at_nodes(grid, &nodes));
        let connected = comps.count() == 1 && touching.len() == 1;
        ok &= r.is_monotone() && connected;
        trials.push(r.stats.total_trials);
        parts.push(format!(
            "p={p}: {} iters, monotone {}, {} components ({} at the sink), {} trials",
            r.history.len(),
            r.is_monotone(),
            comps.count(),
            touching.len(),
            r.stats.total_trials
        ));
    }
    let ordered = trials.windows(2).all(|w| w[1] <= w[0]);
    let secs = start.elapsed().as_secs_f64();
    check(ok && ordered && secs < 900.0, format!("{}; trials non-increasing {ordered}; {secs:.0}s", parts.join("; ")))
}

fn determinism(shared: &mut Shared) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["mech1", "mech2", "heat"] {
        let cfg = configured(name, Overrides { nx: Some(40), max_iters: Some(15), ..Default::default() });
        let (a, _) = run(&cfg);
        let (b, _) = run(&cfg);
        shared.record(name, &a);
        let same = history_csv(&a.history) == history_csv(&b.history) && a.design == b.design;
        ok &= same && !a.history.is_empty();
        parts.push(format!("{name}: {} rows identical {same}", a.history.len()));
    }
    check(ok, parts.join("; "))
}

fn fem_verification() -> Outcome {
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // patch test
    let (e, nu, s) = (7.0, 0.3, 2.5);
    let grid = Grid::new(GridSpec::new(6, 4, 1.5, 1.0)).map_err(|e| e.to_string())?;
    let bcs = vec![
        Segment::full(Edge::Left, SegmentKind::RollerNormal),
        Segment::full(Edge::Bottom, SegmentKind::RollerNormal),
        Segment::full(Edge::Right, SegmentKind::Traction { load: LoadCase::In, value: [s, 0.0] }),
    ];
    let mat = ElasticMaterial::new(e, 1e-3 * e, nu, ElasticInterp::LinearCompliance).map_err(|e| e.to_string())?;
    let model = MechModel::new(&grid, mat, &bcs, SolverKind::Direct).map_err(|e| e.to_string())?;
    let st = model.solve(&vec![1.0; grid.n_elems()]).map_err(|e| e.to_string())?;
    let patch = (0..grid.n_nodes())
        .map(|n| {
            let [x, y] = grid.node_coords(n);
            (st.u[2 * n] - s * x / e).abs().max((st.u[2 * n + 1] + nu * s * y / e).abs())
        })
        .fold(0.0, f64::max);

    // 1D heat parabola
    let (kappa, q, lx) = (3.0, 5.0, 2.0);
    let grid = Grid::new(GridSpec::new(16, 4, lx, 0.5)).map_err(|e| e.to_string())?;
    let bcs = vec![
        Segment::full(Edge::Left, SegmentKind::Temperature { value: 0.0 }),
        Segment::full(Edge::Right, SegmentKind::Temperature { value: 0.0 }),
    ];
    let hm = HeatMaterial::new(kappa, 1.0, q, 100.0, ConductivityInterp::Linear).map_err(|e| e.to_string())?;
    let heat = HeatModel::new(&grid, hm, &bcs, SolverKind::Direct).map_err(|e| e.to_string())?;
    let t = heat.solve(&vec![1.0; grid.n_elems()], 0.1).map_err(|e| e.to_string())?.t_star;
    let heat_err = (0..grid.n_nodes())
        .filter_map(|n| {
            let x = grid.node_coords(n)[0];
            let exact = q * x * (lx - x) / (2.0 * kappa);
            (exact > 0.0).then(|| (t[n] - exact).abs() / exact)
        })
        .fold(0.0, f64::max);

    // dense oracle with variable coefficients
    let grid = Grid::unit(12, 10).map_err(|e| e.to_string())?;
    let coeff: Vec<f64> = (0..grid.n_elems()).map(|e| 1e-3 + (e % 5) as f64).collect();
    let bcs = vec![
        Segment::full(Edge::Left, SegmentKind::Clamp),
        Segment::new(Edge::Right, 0.3, 0.7, SegmentKind::Traction { load: LoadCase::In, value: [1.0, -0.5] }),
    ];
    let res = resolve_boundary(&grid, &bcs, FieldKind::Vector).map_err(|e| e.to_string())?;
    let f = res.load_vector(grid.n_nodes(), FieldKind::Vector, LoadCase::In);
    let k = FemSpace::elastic(&grid, 0.3).assemble(&coeff).map_err(|e| e.to_string())?;
    let dense = dense_assemble(&grid, &coeff, &closed_form_elastic_ke(0.3));
    let oracle = dense_solve(&dense, &f, &res.dirichlet).map_err(|e| e.to_string())?;
    let mut dense_err = 0.0f64;
    for kind in [SolverKind::Direct, SolverKind::Pcg] {
        let x = solve_linear(&k, &f, &res.dirichlet, kind).map_err(|e| e.to_string())?;
        let diff: Vec<f64> = x.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        dense_err = dense_err.max(max_abs(&diff) / max_abs(&oracle));
    }
    check(
        patch <= 1e-9 && heat_err <= 1e-8 && dense_err <= 1e-9,
        format!("patch {patch:.1e}; 1D heat {heat_err:.1e}; dense oracle ({} dofs) {dense_err:.1e}", oracle.len()),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => Err(format!(
            "panicked: {}",
            e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
        )),
    }
}

fn main() {
    // the harness runs under `cargo test`, which passes filter arguments; they are ignored
    let mut shared = Shared::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut step = |id: usize, label: &'static str, f: &mut dyn FnMut(&mut Shared) -> Outcome| {
        eprintln!("criterion {id}: {label} ...");
        let t = Instant::now();
        let out = guarded(AssertUnwindSafe(|| f(&mut shared)));
        eprintln!("criterion {id} done in {:.1}s", t.elapsed().as_secs_f64());
        results.push((id, label, out));
    };
    step(1, "gradient consistency", &mut |_| gradient_consistency());
    step(2, "penalty equivalence", &mut |_| penalty_equivalence());
    step(4, "convexity", &mut |_| convexity());
    step(5, "monotone descent", &mut |s| monotone_descent(s));
    step(7, "perimeter", &mut |_| perimeter());
    step(8, "heat benchmark", &mut |s| heat_benchmark(s));
    step(9, "determinism", &mut |s| determinism(s));
    step(10, "fem verification", &mut |_| fem_verification());
    step(3, "reciprocity", &mut |s| reciprocity(s));
    step(6, "projection", &mut |s| projection(s));
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, label, out) in &results {
        match out {
            Ok(d) => println!("PASS criterion {id} ({label}): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {id} ({label}): {d}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
