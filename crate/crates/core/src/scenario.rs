//! Scenario orchestration and report files.
//!
//! Every scenario writes fixed file names inside the output directory and nothing
//! else. Reports carry no timings, so reruns with one seed are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ccp::{ccp_quotient_trace, make_bubbles};
use crate::config::{RunConfig, Scenario};
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::mesh::write_nodal_csv;
use crate::search::{decay_study, sl_level_audit, solve_concave_convex, StopReason};
use crate::verify::{bubble_setup, run_suite, SuiteConfig};

/// Threshold on the last norm of the decay grid.
pub const DECAY_FINAL_BOUND: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub scenario: Scenario,
    /// All scenario assertions held.
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
    summary: String,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new(), summary: String::new() })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, data)?;
        self.files.push(path);
        Ok(())
    }

    fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.table(name, None, rows)
    }

    /// Writes `header` explicitly, so an empty table still documents its columns.
    fn table<T: Serialize>(&mut self, name: &str, header: Option<&[&str]>, rows: &[T]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(header.is_none()).from_writer(Vec::new());
        if let Some(h) = header {
            w.write_record(h).map_err(|e| Error::Io(e.to_string()))?;
        }
        for r in rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let data = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.bytes(name, &data)
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.summary, "{key}: {value}");
    }

    fn ledger(&mut self, ledger: &Ledger) -> Result<()> {
        let report = ledger.report()?;
        self.bytes("ledger.json", report.to_json()?.as_bytes())?;
        self.rows("ledger.csv", &report.entries)
    }

    fn finish(mut self, scenario: Scenario, passed: bool) -> Result<Outcome> {
        self.line("passed", passed);
        let summary = format!("scenario: {}\n{}", scenario.as_str(), self.summary);
        let path = self.dir.join("summary.txt");
        fs::write(&path, &summary)?;
        self.files.push(path);
        Ok(Outcome { scenario, passed, files: self.files, summary })
    }
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    energy: f64,
}

/// Runs the configured scenario. `suites` overrides `[verify] suites`.
pub fn run(cfg: &RunConfig, out_dir: &Path, suites: Option<&[String]>) -> Result<Outcome> {
    let mut w = Writer::new(out_dir)?;
    w.line("seed", cfg.seed);
    let scenario = cfg.scenario;
    let passed = match scenario {
        Scenario::Validate => {
            let report = cfg.validate()?;
            w.table("violations.csv", Some(&["condition", "node", "excess"]), &report.violations)?;
            w.table("lipschitz.csv", Some(&["field", "estimate"]), &report.lipschitz)?;
            w.line("violations", report.violations.len());
            if let Some(v) = report.violations.first() {
                w.finish(scenario, false)?;
                return Err(Error::config(
                    "fields",
                    format!("hypothesis `{}` fails at node {} by {}", v.condition, v.node, v.excess),
                ));
            }
            true
        }
        Scenario::Ledger => {
            let problem = cfg.problem()?;
            let ledger = Ledger::build(&problem, cfg.seed, &[])?;
            w.ledger(&ledger)?;
            w.line("K0", ledger.k0);
            if let Some(win) = &ledger.window {
                w.line("lambda_star", win.lambda_star);
            }
            true
        }
        Scenario::SolveCc => {
            let problem = cfg.problem()?;
            let ledger = Ledger::build(&problem, cfg.seed, &[])?;
            w.ledger(&ledger)?;
            let lambda = match cfg.solve_cc.lambda {
                Some(l) => l,
                None => cfg.solve_cc.lambda_fraction * ledger.lambda_star()?,
            };
            let rep = solve_concave_convex(&problem, &ledger, lambda, &cfg.solver.options(), cfg.seed)?;
            let trace: Vec<TraceRow> =
                rep.energies.iter().enumerate().map(|(i, &e)| TraceRow { iteration: i, energy: e }).collect();
            w.rows("energy_trace.csv", &trace)?;
            let mut sol = Vec::new();
            write_nodal_csv(&problem.mesh, &[("u", &rep.u)], &mut sol)?;
            w.bytes("solution.csv", &sol)?;
            w.line("lambda", lambda);
            w.line("iterations", rep.iterations);
            w.line("final_energy", rep.final_energy());
            w.line("grad_norm", rep.grad_norm);
            w.line("a_integral", rep.a_integral);
            w.line("stop", format!("{:?}", rep.stop));
            w.line("reached_negative_level", rep.reached_negative_level);
            w.line("containment_ok", rep.containment_ok.unwrap_or(false));
            w.line("ps_level_ok", rep.ps_level_ok.unwrap_or(false));
            rep.stop == StopReason::Converged && rep.reached_negative_level && rep.containment_ok == Some(true)
        }
        Scenario::Decay => {
            let problem = cfg.problem()?;
            let ledger = Ledger::build(&problem, cfg.seed, &[])?;
            w.ledger(&ledger)?;
            let ls = ledger.lambda_star()?;
            let grid: Vec<f64> = cfg.decay.fractions.iter().map(|f| f * ls).collect();
            let rows = decay_study(&problem, &ledger, &grid, &cfg.solver.options(), cfg.seed)?;
            w.rows("decay.csv", &rows)?;
            let solved: Vec<_> = rows.iter().filter(|r| !r.gap).collect();
            let decreasing = solved.windows(2).all(|p| p[1].norm < p[0].norm);
            let last_small = solved.last().is_none_or(|r| r.norm < DECAY_FINAL_BOUND);
            let contained = rows.iter().all(|r| r.gap || r.containment_ok);
            w.line("rows", rows.len());
            w.line("gaps", rows.len() - solved.len());
            w.line("strictly_decreasing", decreasing);
            w.line("final_norm_below_bound", last_small);
            w.line("containment_ok", contained);
            decreasing && last_small && contained
        }
        Scenario::SolveSl => {
            let problem = cfg.problem()?;
            let ledger = Ledger::build(&problem, cfg.seed, &[])?;
            w.ledger(&ledger)?;
            let s = &cfg.solve_sl;
            let audit = sl_level_audit(&problem, &ledger, s.theta, s.theta_fraction, s.k_pairs, cfg.seed)?;
            w.rows("levels.csv", &audit.rows)?;
            w.line("theta", audit.theta);
            w.line("theta1", audit.theta1);
            w.line("k_pairs", audit.rows.len());
            audit.passed()
        }
        Scenario::Ccp => {
            let problem = cfg.problem()?;
            let (x0, s) = bubble_setup(&problem, cfg)?;
            let fam = make_bubbles(&problem.mesh, &x0, &cfg.ccp.eps, s)?;
            let ledger = Ledger::build(&problem, cfg.seed, &fam.bubbles)?;
            w.ledger(&ledger)?;
            let trace = ccp_quotient_trace(&problem, &fam, ledger.s_hat)?;
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            w.bytes("ccp.csv", &buf)?;
            w.line("s", s);
            w.line("s_hat", trace.s_hat);
            let stable = trace.mu_stability();
            if let Some(v) = stable {
                w.line("mu_spread", v);
            }
            w.line("margins_ok", trace.passed());
            trace.passed() && stable.is_none_or(|v| v <= 0.10)
        }
        Scenario::Verify => {
            let names = suites.map(|s| s.to_vec()).unwrap_or_else(|| cfg.verify.suites.clone());
            let sc = SuiteConfig::new(cfg.seed, cfg.verify.samples, cfg.verify.tolerance, &names)?;
            let report = run_suite(&sc, cfg)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            w.bytes("verify.csv", &buf)?;
            w.bytes("verify.json", report.to_json()?.as_bytes())?;
            let failed = report.results.iter().filter(|r| !r.passed).count();
            w.line("properties", report.results.len());
            w.line("failed", failed);
            report.passed()
        }
    };
    w.finish(scenario, passed)
}
