//! End-to-end acceptance checks. Runs every criterion in order and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! `ACCEPTANCE_ONLY=1,5,9` restricts the run to the listed criteria.

use std::f64::consts::{E, PI};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topodeflate::config::RunConfig;
use topodeflate::deflation::{
    compose_chain, dist_sq_top_derivative, fraction_dist, fraction_dist_sq, penalty_value, PenaltyParams,
};
use topodeflate::fem::assembly::p2_mass_apply_component;
use topodeflate::fem::{assemble_stokes_darcy, solve, BoundaryConditions, FemSpace, ScalarFieldP1, VectorFieldP2};
use topodeflate::levelset::{bisect_shift, check_optimality, sphere_update, LevelSet, VolumeCase, VolumeConstraint};
use topodeflate::mesh::{generate_rect_mesh, BoundaryRules, BoundaryTag, Mesh, TrianglePattern};
use topodeflate::physics::{Problem, ProblemSpec};
use topodeflate::runner::{run, RunOptions};
use topodeflate::toy::{deflate_scalar, rastrigin, rastrigin_prime, ScalarProblem};
use topodeflate::vtk::read_vtk_file;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lib<T>(r: topodeflate::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn square(n: usize, pattern: TrianglePattern) -> Arc<Mesh> {
    Arc::new(generate_rect_mesh(1.0, 1.0, n, n, pattern, BoundaryRules::AllWall).unwrap())
}

fn random_field(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> ScalarFieldP1 {
    let values = (0..mesh.n_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarFieldP1::new(mesh.clone(), values).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn c1_penalty() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut zero_ok = true;
    for &(gamma, delta) in &[(0.7, 1e6), (0.25, 5e-3), (1.0, 300.0), (2.5, 1.0)] {
        let p = PenaltyParams { gamma, delta };
        worst = worst.max(rel(penalty_value(0.0, &p), delta / E));
        worst = worst.max(rel(penalty_value(gamma / 2f64.sqrt(), &p), delta * (-2.0f64).exp()));
        zero_ok &= [gamma, gamma * 1.0001, 2.0 * gamma, 1e3].iter().all(|&d| penalty_value(d, &p) == 0.0);
    }
    check(worst <= 1e-12 && zero_ok, format!("max relative error {worst:.2e}, zero beyond gamma: {zero_ok}"))
}

fn c2_distance_flips() -> Outcome {
    let mesh = square(16, TrianglePattern::Right);
    let areas = mesh.element_areas();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut flips = 0;
    for _ in 0..4 {
        let fa: Vec<f64> = (0..areas.len()).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        let fb: Vec<f64> = (0..areas.len()).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        let base = lib(fraction_dist_sq(&mesh, &fa, &fb))?;
        for e in 0..areas.len() {
            let mut flipped = fa.clone();
            flipped[e] = 1.0 - fa[e];
            let after = lib(fraction_dist_sq(&mesh, &flipped, &fb))?;
            let expected = areas[e] * (1.0 - 2.0 * fa[e]) * (1.0 - 2.0 * fb[e]);
            flips += 1;
            if after - base != expected {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches over {flips} flips"))
}

fn c3_chain_rule() -> Outcome {
    let mesh = square(32, TrianglePattern::Right);
    let areas = mesh.element_areas();
    let total = mesh.total_area();
    if areas.iter().any(|&a| a > 1e-3 * total) {
        return Err("mesh too coarse".into());
    }
    let tilde = LevelSet::new(lib(ScalarFieldP1::from_fn(mesh.clone(), |p| {
        (p[0] - 0.45).hypot(p[1] - 0.55) - 0.3
    }))?);
    // current shape: a different blob, rounded to whole elements
    let omega = LevelSet::new(lib(ScalarFieldP1::from_fn(mesh.clone(), |p| {
        (p[0] - 0.6).abs().max((p[1] - 0.4).abs()) - 0.25
    }))?);
    let fa: Vec<f64> = omega.fractions().iter().map(|f| f.round()).collect();
    let ft = tilde.fractions();
    let j = lib(fraction_dist_sq(&mesh, &fa, ft))?;
    let f = |z: f64| z * z;
    let chain = compose_chain(&lib(dist_sq_top_derivative(&tilde))?, j, |z| 2.0 * z);
    let psi_t = tilde.psi().values();
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let signs: Vec<bool> = tri.iter().map(|&v| psi_t[v] < 0.0).collect();
        if !(signs.iter().all(|&s| s) || signs.iter().all(|&s| !s)) {
            continue;
        }
        if tri.iter().any(|&v| psi_t[v] == 0.0) {
            continue;
        }
        let mut flipped = fa.clone();
        flipped[e] = 1.0 - fa[e];
        let j_flip = lib(fraction_dist_sq(&mesh, &flipped, ft))?;
        let brute = (f(j_flip) - f(j)) / areas[e] * (1.0 - 2.0 * fa[e]);
        for &v in tri {
            worst = worst.max(rel(chain.values()[v], brute));
        }
        tested += 1;
    }
    check(worst <= 0.05 && tested > 0, format!("{tested} elements, max relative deviation {worst:.2e}"))
}

/// Central differences of the objective in `alpha[e]` against the analytic
/// sensitivity, on the 20 elements with the largest mean vertex speed.
fn fd_check(problem: &Problem, ls: &LevelSet) -> Result<(f64, usize), String> {
    let alpha = problem.alpha_from_fractions(ls.fractions());
    let ev = lib(problem.evaluate(&alpha))?;
    let sens = problem.alpha_sensitivity(&ev.flow, &ev.adjoint);
    let mesh = problem.mesh();
    let mut order: Vec<(f64, usize)> = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(e, tri)| {
            let s: f64 = tri
                .iter()
                .map(|&v| {
                    let u = ev.flow.u.at_vertex(v);
                    u[0].hypot(u[1])
                })
                .sum();
            (s, e)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut worst: f64 = 0.0;
    for &(_, e) in order.iter().take(20) {
        let h = 1e-3 * alpha[e];
        let mut plus = alpha.clone();
        plus[e] += h;
        let mut minus = alpha.clone();
        minus[e] -= h;
        let fd = (lib(problem.evaluate_objective(&plus))? - lib(problem.evaluate_objective(&minus))?) / (2.0 * h);
        worst = worst.max(rel(sens[e], fd));
    }
    Ok((worst, 20))
}

fn c4_sensitivities() -> Outcome {
    let dp_mesh = Arc::new(lib(generate_rect_mesh(1.5, 1.0, 32, 21, TrianglePattern::Right, BoundaryRules::DoublePipe))?);
    let dp = lib(Problem::new(ProblemSpec::double_pipe(dp_mesh.clone())))?;
    let dp_ls = LevelSet::new(lib(ScalarFieldP1::from_fn(dp_mesh, |p| {
        (p[1] - 0.25).abs().min((p[1] - 0.75).abs()) - 0.1 - 0.05 * (3.0 * p[0]).sin()
    }))?);
    let (dp_err, n) = fd_check(&dp, &dp_ls)?;

    let bp_mesh = Arc::new(lib(generate_rect_mesh(1.0, 1.0, 12, 12, TrianglePattern::Crossed, BoundaryRules::Bipolar))?);
    let bp = lib(Problem::new(ProblemSpec::bipolar(bp_mesh.clone())))?;
    let bp_ls = LevelSet::new(lib(ScalarFieldP1::from_fn(bp_mesh, |p| (p[1] - 0.5).abs() - 0.3 + 0.1 * p[0]))?);
    let (bp_err, _) = fd_check(&bp, &bp_ls)?;
    check(
        dp_err <= 0.01 && bp_err <= 0.01,
        format!("{n} elements each; max relative error double pipe {dp_err:.2e}, bipolar {bp_err:.2e}"),
    )
}

fn c5_sphere_update() -> Outcome {
    let mesh = square(12, TrianglePattern::Right);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_norm: f64 = 0.0;
    let mut worst_full: f64 = 0.0;
    for _ in 0..100 {
        let ls = lib(LevelSet::new(random_field(&mesh, &mut rng)).normalized())?;
        let g = random_field(&mesh, &mut rng);
        let kappa = rng.random_range(1e-3..1.0);
        let next = lib(sphere_update(&ls, &g, kappa))?;
        worst_norm = worst_norm.max((next.norm() - 1.0).abs());
        let full = lib(sphere_update(&ls, &g, 1.0))?;
        let unit = g.scale(1.0 / LevelSet::new(g.clone()).norm());
        let d = full.psi().values().iter().zip(unit.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_full = worst_full.max(d);
    }
    check(
        worst_norm <= 1e-10 && worst_full <= 1e-10,
        format!("100 draws; max |norm - 1| {worst_norm:.2e}, max deviation at kappa = 1 {worst_full:.2e}"),
    )
}

fn c6_bisection() -> Outcome {
    let mesh = square(20, TrianglePattern::Crossed);
    let total = mesh.total_area();
    let tol = 1e-4 * total;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_err: f64 = 0.0;
    let mut worst_steps = 0;
    let mut failures = 0;
    for _ in 0..50 {
        let ls = LevelSet::new(random_field(&mesh, &mut rng));
        let target = rng.random_range(0.02..0.98) * total;
        match bisect_shift(&ls, target, tol) {
            Ok(s) => {
                let err = (s.level_set.volume() - target).abs();
                worst_err = worst_err.max(err);
                worst_steps = worst_steps.max(s.steps);
                if err > tol || s.steps > 60 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    check(failures == 0, format!("50 cases, {failures} failures; max error {worst_err:.2e}, max steps {worst_steps}"))
}

fn c7_poiseuille() -> Outcome {
    let length = 2.0;
    let mut worst_u: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for pattern in [TrianglePattern::Right, TrianglePattern::Crossed] {
        let mesh = Arc::new(lib(generate_rect_mesh(length, 1.0, 8, 4, pattern, BoundaryRules::Channel { length }))?);
        let profile = |y: f64| 4.0 * y * (1.0 - y);
        let bc = BoundaryConditions::new()
            .dirichlet(BoundaryTag::Inflow, move |p| [profile(p[1]), 0.0])
            .no_slip(BoundaryTag::Wall)
            .natural(BoundaryTag::Outflow);
        let alpha = vec![0.0; mesh.n_triangles()];
        let x = lib(solve(&lib(assemble_stokes_darcy(mesh.clone(), &alpha, &bc, false))?))?;
        let space = FemSpace::new(mesh.clone());
        let nu = space.n_velocity_dofs();
        for node in 0..space.n_p2_nodes() {
            let p = space.p2_node_point(node);
            worst_u = worst_u.max((x[2 * node] - profile(p[1])).abs()).max(x[2 * node + 1].abs());
        }
        for (v, pt) in mesh.vertices().iter().enumerate() {
            worst_p = worst_p.max((x[nu + v] - 8.0 * (length - pt[0])).abs());
        }
    }
    check(
        worst_u <= 1e-10 && worst_p <= 1e-10,
        format!("max error velocity {worst_u:.2e}, pressure {worst_p:.2e}"),
    )
}

fn integral(space: &FemSpace, u: &VectorFieldP2, c: usize) -> f64 {
    p2_mass_apply_component(space, u.values(), c).iter().sum()
}

fn l2_diff(space: &FemSpace, a: &VectorFieldP2, b: &VectorFieldP2) -> f64 {
    let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let mut s = 0.0;
    for c in 0..2 {
        let md = p2_mass_apply_component(space, &d, c);
        s += md.iter().enumerate().map(|(node, m)| m * d[2 * node + c]).sum::<f64>();
    }
    s.sqrt()
}

fn c8_smoothing() -> Outcome {
    let mesh = Arc::new(lib(generate_rect_mesh(1.0, 1.0, 16, 16, TrianglePattern::Crossed, BoundaryRules::Bipolar))?);
    let space = FemSpace::new(mesh.clone());
    let problem_at = |dt: f64| Problem::new(ProblemSpec { dt, ..ProblemSpec::bipolar(mesh.clone()) });

    let p = lib(problem_at(1e-3))?;
    let constant = lib(VectorFieldP2::from_fn(mesh.clone(), |_| [0.7, -1.3]))?;
    let sc = lib(p.smooth_field(&constant))?;
    let const_err = sc.values().iter().zip(constant.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let wavy = lib(VectorFieldP2::from_fn(mesh.clone(), |x| {
        [(PI * x[0]).cos() * (PI * x[1]).cos() + 0.3, x[0] * x[1] * x[1]]
    }))?;
    let sw = lib(p.smooth_field(&wavy))?;
    let mean_err = (0..2).map(|c| rel(integral(&space, &sw, c), integral(&space, &wavy, c))).fold(0.0, f64::max);

    let mode = lib(VectorFieldP2::from_fn(mesh.clone(), |x| [(PI * x[0]).cos() * (PI * x[1]).cos(), 0.0]))?;
    let dts = [1e-2, 1e-3, 1e-4];
    let mut diffs = Vec::new();
    for dt in dts {
        let s = lib(lib(problem_at(dt))?.smooth_field(&mode))?;
        diffs.push(l2_diff(&space, &s, &mode));
    }
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 3.0, ly.iter().sum::<f64>() / 3.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    check(
        const_err <= 1e-10 && mean_err <= 1e-10 && slope >= 0.9,
        format!("constant error {const_err:.2e}, mean relative error {mean_err:.2e}, dt slope {slope:.3}"),
    )
}

/// Local minimizers of the Rastrigin function on its search interval, by
/// grid scan and bisection on the derivative.
fn rastrigin_oracle() -> Vec<f64> {
    let (lo, hi) = (-5.12, 5.12);
    let n = 10_000;
    let x = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
    let mut minima = Vec::new();
    for i in 1..n {
        if rastrigin(x(i)) < rastrigin(x(i - 1)) && rastrigin(x(i)) <= rastrigin(x(i + 1)) {
            let (mut a, mut b) = (x(i - 1), x(i + 1));
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if rastrigin_prime(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            minima.push(0.5 * (a + b));
        }
    }
    minima
}

fn c9_rastrigin() -> Outcome {
    let cfg = lib(RunConfig::preset("rastrigin-demo"))?;
    let start = Instant::now();
    let run = lib(deflate_scalar(&ScalarProblem::rastrigin(), cfg.toy.x0, &lib(cfg.penalty_params())?, 10))?;
    let elapsed = start.elapsed();
    let oracle = rastrigin_oracle();
    let worst = run
        .minimizers
        .iter()
        .map(|m| oracle.iter().map(|o| (m.x - o).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let mut xs: Vec<f64> = run.minimizers.iter().map(|m| m.x).collect();
    xs.sort_by(f64::total_cmp);
    let distinct = 1 + xs.windows(2).filter(|w| w[1] - w[0] > 1e-3).count();
    check(
        distinct >= 5 && worst <= 1e-3 && elapsed < Duration::from_secs(5),
        format!(
            "{distinct} distinct minimizers, max distance to oracle {worst:.2e} ({} oracle minima), {:.3} s",
            oracle.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Level sets of the minimizers written by a run, in manifest order.
fn load_minimizers(dir: &Path, mesh: &Arc<Mesh>, files: &[String]) -> Result<Vec<LevelSet>, String> {
    files
        .iter()
        .map(|f| {
            let data = lib(read_vtk_file(dir.join(f)))?;
            if !data.mesh.same_as(mesh) {
                return Err(format!("{f}: mesh differs from the run mesh"));
            }
            let psi = data.point_scalars.get("psi").ok_or(format!("{f}: no psi field"))?.clone();
            Ok(LevelSet::new(lib(ScalarFieldP1::new(mesh.clone(), psi))?))
        })
        .collect()
}

/// File name and `(volume, J_total)` rows of one history file.
type History = (String, Vec<(f64, f64)>);

fn histories(dir: &Path) -> Result<Vec<History>, String> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !(name.starts_with("round_") && name.ends_with(".csv")) {
            continue;
        }
        let mut reader = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| format!("{name}: {e}"));
            rows.push((num(5)?, num(3)?));
        }
        out.push((name, rows));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Greedy subset of minimizers that are pairwise at least `min_dist` apart.
fn spread_subset(sets: &[LevelSet], min_dist: f64) -> Result<Vec<usize>, String> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..sets.len() {
        let mut far = true;
        for &j in &chosen {
            if lib(fraction_dist(&sets[i], &sets[j]))? < min_dist {
                far = false;
                break;
            }
        }
        if far {
            chosen.push(i);
        }
    }
    Ok(chosen)
}

fn c10_double_pipe() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = lib(RunConfig::preset("double-pipe-desk"))?;
    cfg.output.dir = dir.path().to_path_buf();
    let start = Instant::now();
    let summary = lib(run(&cfg, &RunOptions::default(), &mut std::io::stderr()))?;
    let elapsed = start.elapsed();

    let mesh = lib(cfg.build_mesh())?;
    let total = mesh.total_area();
    let files: Vec<String> = summary.manifest.iter().map(|r| r.vtk_file.clone()).collect();
    let sets = load_minimizers(dir.path(), &mesh, &files)?;
    let spread = spread_subset(&sets, 0.7)?;

    let mut worst_vol: f64 = 0.0;
    let mut non_monotone = Vec::new();
    let hist = histories(dir.path())?;
    for (name, rows) in &hist {
        for (vol, _) in rows {
            worst_vol = worst_vol.max((vol - 0.5).abs());
        }
        if rows.windows(2).any(|w| w[1].1 > w[0].1) {
            non_monotone.push(name.clone());
        }
    }
    check(
        spread.len() >= 3
            && worst_vol <= 1e-4 * total
            && non_monotone.is_empty()
            && elapsed < Duration::from_secs(30 * 60),
        format!(
            "{} minimizers, {} pairwise >= 0.7 apart; {} histories, max volume error {worst_vol:.2e}, \
             non-monotone {non_monotone:?}; {:.0} s",
            summary.minimizers,
            spread.len(),
            hist.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c11_bipolar() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = lib(RunConfig::preset("bipolar-desk"))?;
    cfg.output.dir = dir.path().to_path_buf();
    let start = Instant::now();
    let summary = lib(run(&cfg, &RunOptions::default(), &mut std::io::stderr()))?;
    let elapsed = start.elapsed();

    let mut reader = csv::Reader::from_path(dir.path().join("manifest.csv")).map_err(|e| e.to_string())?;
    let header_ok = reader.headers().map_err(|e| e.to_string())?.iter().any(|h| h == "constraint_gap_pct");
    let mut gaps = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        gaps.push(rec[2].parse::<f64>().map_err(|e| format!("manifest gap: {e}"))?);
    }
    let improves = gaps.len() >= 2 && gaps[1..].iter().any(|&g| g <= gaps[0]);
    check(
        summary.minimizers >= 2 && header_ok && improves && elapsed < Duration::from_secs(30 * 60),
        format!("{} minimizers, gaps {gaps:?} %; {:.0} s", summary.minimizers, elapsed.as_secs_f64()),
    )
}

fn c12_optimality() -> Outcome {
    let mesh = square(8, TrianglePattern::Right);
    let ls = LevelSet::new(lib(ScalarFieldP1::from_fn(mesh.clone(), |p| p[0] - 0.55))?);
    let vol = ls.volume();
    let shifted = |c: f64| ls.psi().map(|v| v + c);
    let up = shifted(0.3);
    let down = shifted(-0.3);
    let same = ls.psi().clone();
    let flipped = ls.psi().scale(-1.0);
    let lower = VolumeConstraint::Bounds { lower: vol, upper: 0.9 };
    let interior = VolumeConstraint::Bounds { lower: 0.1, upper: 0.9 };
    let upper = VolumeConstraint::Bounds { lower: 0.1, upper: vol };
    let scenarios = [
        ("at lower, matching", lower, VolumeCase::AtLower, &up, true),
        ("at lower, violating", lower, VolumeCase::AtLower, &down, false),
        ("interior, matching", interior, VolumeCase::Interior, &same, true),
        ("interior, violating", interior, VolumeCase::Interior, &flipped, false),
        ("at upper, matching", upper, VolumeCase::AtUpper, &down, true),
        ("at upper, violating", upper, VolumeCase::AtUpper, &up, false),
    ];
    let mut wrong = Vec::new();
    for (name, constraint, case, g, expect) in scenarios {
        let report = lib(check_optimality(&ls, g, constraint, 1e-9, 1e-12))?;
        if report.case != case || report.passed() != expect {
            wrong.push(name);
        }
    }
    check(wrong.is_empty(), format!("6 scenarios, misclassified: {wrong:?}"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "penalty closed forms", c1_penalty),
        (2, "distance flips", c2_distance_flips),
        (3, "chain rule", c3_chain_rule),
        (4, "sensitivities vs finite differences", c4_sensitivities),
        (5, "sphere update", c5_sphere_update),
        (6, "volume bisection", c6_bisection),
        (7, "Poiseuille flow", c7_poiseuille),
        (8, "smoothing step", c8_smoothing),
        (9, "Rastrigin deflation", c9_rastrigin),
        (10, "double pipe desk run", c10_double_pipe),
        (11, "bipolar plate desk run", c11_bipolar),
        (12, "optimality checker", c12_optimality),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:2} PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:2} FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
