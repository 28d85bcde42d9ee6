//! Acceptance criteria for the laboratory, one line per criterion.
//!
//! Runs as a plain binary so the verdict lines are always printed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use dphase::ccp::{ccp_quotient_trace, make_bubbles};
use dphase::config::{RunConfig, Scenario};
use dphase::ledger::Ledger;
use dphase::mesh::{DomainMesh, Interval};
use dphase::modular::{luxemburg_norm, ModularSpec};
use dphase::rng::seeded;
use dphase::scenario;
use dphase::search::{decay_study, sl_level_audit, solve_concave_convex, StopReason};
use dphase::verify::{bubble_setup, run_suite, SuiteConfig};
use rand::Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn luxemburg_oracles() -> Verdict {
    let mut rng = seeded(11);
    let mesh = DomainMesh::new(&[Interval::new(0.0, 1.0)], &[129]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p: f64 = rng.random_range(1.1..6.0);
        let u: Vec<f64> = (0..mesh.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let spec = ModularSpec::unweighted(vec![p; mesh.len()]).map_err(|e| e.to_string())?;
        let norm = luxemburg_norm(&mesh, &spec, &u).map_err(|e| e.to_string())?;
        let lp: f64 = u.iter().zip(mesh.weights()).map(|(x, w)| w * x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        worst = worst.max(rel(norm, lp));
    }
    let n = mesh.len();
    let spec =
        ModularSpec::two_term(vec![1.0; n], vec![2.0; n], vec![1.0; n], vec![4.0; n]).map_err(|e| e.to_string())?;
    for _ in 0..200 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let norm = luxemburg_norm(&mesh, &spec, &u).map_err(|e| e.to_string())?;
        let m2: f64 = u.iter().zip(mesh.weights()).map(|(x, w)| w * x * x).sum();
        let m4: f64 = u.iter().zip(mesh.weights()).map(|(x, w)| w * x.powi(4)).sum();
        let tau = (0.5 * (m2 + (m2 * m2 + 4.0 * m4).sqrt())).sqrt();
        worst = worst.max(rel(norm, tau));
    }
    for c in [0.01, 0.5, 1.0, 7.0, 300.0] {
        let norm = luxemburg_norm(&mesh, &spec, &vec![c; n]).map_err(|e| e.to_string())?;
        worst = worst.max(rel(norm, 1.27201965 * c).max(rel(norm, c / ((5f64.sqrt() - 1.0) / 2.0).sqrt())));
    }
    // The 8-digit factor itself only carries ~1e-9 relative accuracy.
    if worst <= 1e-9 {
        Ok(format!("worst relative error {worst:.2e}"))
    } else {
        Err(format!("worst relative error {worst:.2e} exceeds 1e-9"))
    }
}

fn suite_properties(cfg: &RunConfig, samples: usize, suite: &str, keep: impl Fn(&str) -> bool) -> Verdict {
    let sc = SuiteConfig::new(cfg.seed, samples, None, &[suite.to_string()]).map_err(|e| e.to_string())?;
    let report = run_suite(&sc, cfg).map_err(|e| e.to_string())?;
    let picked: Vec<_> = report.results.iter().filter(|r| keep(&r.property)).collect();
    if picked.is_empty() {
        return Err(format!("suite {suite} produced no matching properties"));
    }
    let failed: Vec<String> = picked
        .iter()
        .filter(|r| !r.passed)
        .map(|r| {
            format!("{} ({} of {} failed, worst margin {:.3e})", r.property, r.failures, r.samples, r.worst_margin)
        })
        .collect();
    let total: usize = picked.iter().map(|r| r.samples).sum();
    if failed.is_empty() {
        Ok(format!("{} properties, {total} samples", picked.len()))
    } else {
        Err(failed.join("; "))
    }
}

fn inequality_suites() -> Verdict {
    let cfg = config("cc-1d.toml");
    suite_properties(&cfg, 10_000, "inequalities", |_| true)
}

fn gradient_consistency() -> Verdict {
    let a = suite_properties(&config("cc-1d.toml"), 20, "gradients", |p| p.starts_with("gradient-"))?;
    let b = suite_properties(&config("sl-1d.toml"), 20, "gradients", |p| p.starts_with("gradient-"))?;
    Ok(format!("cc-1d {a}; sl-1d {b}"))
}

fn ledger_closed_forms() -> Verdict {
    let cfg = config("cc-1d.toml");
    let msg = suite_properties(&cfg, 1, "ledger", |_| true)?;
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let ledger = Ledger::build(&problem, cfg.seed, &[]).map_err(|e| e.to_string())?;
    let ls = ledger.lambda_star().map_err(|e| e.to_string())?;
    if ledger.k0 > 0.0 && ls > 0.0 {
        Ok(format!("{msg}; K0 = {:.4e}, lambda* = {ls:.4e}", ledger.k0))
    } else {
        Err(format!("K0 = {}, lambda* = {ls}", ledger.k0))
    }
}

fn truncation_identities() -> Verdict {
    suite_properties(&config("cc-1d.toml"), 1, "gradients", |p| p.starts_with("truncation-"))
}

fn concave_convex_solve() -> Verdict {
    let cfg = config("cc-1d.toml");
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let ledger = Ledger::build(&problem, cfg.seed, &[]).map_err(|e| e.to_string())?;
    let lambda = 0.5 * ledger.lambda_star().map_err(|e| e.to_string())?;
    let rep =
        solve_concave_convex(&problem, &ledger, lambda, &cfg.solver.options(), cfg.seed).map_err(|e| e.to_string())?;
    let (t1, _) = ledger.roots(lambda).map_err(|e| e.to_string())?;
    let cap = t1.powf(ledger.p_minus);
    let detail = format!(
        "T = {:.3e}, |grad| = {:.3e}, {} iterations, int A = {:.3e} < {cap:.3e}",
        rep.final_energy(),
        rep.grad_norm,
        rep.iterations,
        rep.a_integral
    );
    let ok = rep.final_energy() < 0.0
        && rep.grad_norm <= 1e-6
        && rep.iterations <= 5000
        && rep.stop == StopReason::Converged
        && rep.a_integral < cap;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn decay_trend() -> Verdict {
    let cfg = config("cc-1d.toml");
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let ledger = Ledger::build(&problem, cfg.seed, &[]).map_err(|e| e.to_string())?;
    let ls = ledger.lambda_star().map_err(|e| e.to_string())?;
    let grid: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|d| ls / d).collect();
    let rows = decay_study(&problem, &ledger, &grid, &cfg.solver.options(), cfg.seed).map_err(|e| e.to_string())?;
    let norms: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let detail = format!("norms [{}]", sci(&norms));
    let ok =
        rows.iter().all(|r| !r.gap) && norms.windows(2).all(|w| w[1] < w[0]) && norms.last().is_some_and(|&n| n < 1e-2);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn superlinear_audit() -> Verdict {
    let cfg = config("sl-1d.toml");
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let ledger = Ledger::build(&problem, cfg.seed, &[]).map_err(|e| e.to_string())?;
    let audit = sl_level_audit(&problem, &ledger, None, 0.5, 3, cfg.seed).map_err(|e| e.to_string())?;
    let levels: Vec<f64> = audit.rows.iter().map(|r| r.level).collect();
    let detail = format!("theta = {:.3e}, levels [{}]", audit.theta, sci(&levels));
    if audit.rows.len() == 3 && audit.passed() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ccp_shadow() -> Verdict {
    let cfg = config("ccp-2d.toml");
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let (x0, s) = bubble_setup(&problem, &cfg).map_err(|e| e.to_string())?;
    let fam = make_bubbles(&problem.mesh, &x0, &[0.25, 0.125, 0.0625], s).map_err(|e| e.to_string())?;
    let ledger = Ledger::build(&problem, cfg.seed, &fam.bubbles).map_err(|e| e.to_string())?;
    let trace = ccp_quotient_trace(&problem, &fam, ledger.s_hat).map_err(|e| e.to_string())?;
    let margins_ok = trace.rows.iter().all(|r| r.margin >= -0.05 * r.rhs);
    let spread = trace.mu_stability().ok_or("fewer than two radii")?;
    let margins: Vec<f64> = trace.rows.iter().map(|r| r.margin).collect();
    let detail = format!("margins {margins:.3?}, mu spread {:.1}%", 100.0 * spread);
    if margins_ok && spread <= 0.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("output dir") {
        let path = entry.expect("dir entry").path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        out.insert(name, fs::read(&path).expect("report file"));
    }
    out
}

fn determinism() -> Verdict {
    let plan: [(&str, &[Scenario]); 3] = [
        ("cc-1d.toml", &[Scenario::Validate, Scenario::Ledger, Scenario::SolveCc, Scenario::Decay, Scenario::Verify]),
        ("sl-1d.toml", &[Scenario::Validate, Scenario::Ledger, Scenario::SolveSl, Scenario::Verify]),
        ("ccp-2d.toml", &[Scenario::Validate, Scenario::Ledger, Scenario::Ccp, Scenario::Verify]),
    ];
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = 0;
    let mut files = 0;
    for (name, scenarios) in plan {
        for &sc in scenarios {
            let mut cfg = config(name);
            cfg.scenario = sc;
            let suites = (name == "ccp-2d.toml").then(|| vec!["ccp".to_string()]);
            let mut snaps = Vec::new();
            for rep in 0..2 {
                let dir: PathBuf = root.path().join(format!("{name}-{}-{rep}", sc.as_str()));
                scenario::run(&cfg, &dir, suites.as_deref()).map_err(|e| format!("{name} {}: {e}", sc.as_str()))?;
                snaps.push(snapshot(&dir));
            }
            if snaps[0] != snaps[1] {
                let diff: Vec<&String> = snaps[0].keys().filter(|k| snaps[0].get(*k) != snaps[1].get(*k)).collect();
                return Err(format!("{name} {} differs in {diff:?}", sc.as_str()));
            }
            let n = snaps[0].keys().filter(|k| k.ends_with(".csv") || k.ends_with(".json")).count();
            if n == 0 {
                return Err(format!("{name} {} wrote no reports", sc.as_str()));
            }
            runs += 1;
            files += n;
        }
    }
    Ok(format!("{runs} scenario runs, {files} CSV/JSON reports identical"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("luxemburg norm oracles", luxemburg_oracles),
        ("inequality suites", inequality_suites),
        ("gradient consistency", gradient_consistency),
        ("ledger closed forms", ledger_closed_forms),
        ("truncation identities", truncation_identities),
        ("concave-convex solve", concave_convex_solve),
        ("decay trend", decay_trend),
        ("superlinear audit", superlinear_audit),
        ("ccp shadow", ccp_shadow),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
