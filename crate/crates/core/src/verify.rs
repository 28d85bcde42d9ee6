//! Seeded property suites over a configured problem.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::ccp::{ccp_quotient_trace, make_bubbles, MARGIN_SLACK};
use crate::config::RunConfig;
use crate::energy::{Functional, Problem};
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::mesh::{magnitude, Point};
use crate::modular::{
    check_norm_modular, holder_pairing, luxemburg_norm, pow, young_check_with, ModularSpec, NormBranch,
};
use crate::rng::{low_mode_field, seeded, smoothed_noise, LabRng};
use crate::search::{
    box_sine_mode, descend, seed_from_eigen_subspace, solve_concave_convex, DescentOptions, StopReason,
};

pub const ALL_SUITES: [&str; 5] = ["inequalities", "gradients", "ledger", "solver", "ccp"];

/// Default slack on inequality margins.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Relative agreement required between analytic and finite-difference derivatives.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
const GRADIENT_SAMPLES: usize = 20;
const TRUNCATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Inequalities,
    Gradients,
    Ledger,
    Solver,
    Ccp,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "inequalities" => Ok(Suite::Inequalities),
            "gradients" => Ok(Suite::Gradients),
            "ledger" => Ok(Suite::Ledger),
            "solver" => Ok(Suite::Solver),
            "ccp" => Ok(Suite::Ccp),
            other => Err(Error::Usage(format!("unknown suite `{other}`; expected one of {}", ALL_SUITES.join(", ")))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        ALL_SUITES[*self as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Instances per inequality property.
    pub samples: usize,
    pub tolerance: f64,
    pub suites: Vec<Suite>,
}

impl SuiteConfig {
    pub fn new(seed: u64, samples: usize, tolerance: Option<f64>, names: &[String]) -> Result<Self> {
        if samples == 0 {
            return Err(Error::config("verify.samples", "must be at least 1"));
        }
        let tolerance = tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance > 0.0) {
            return Err(Error::config("verify.tolerance", "must be positive"));
        }
        let mut suites = names.iter().map(|n| Suite::parse(n)).collect::<Result<Vec<_>>>()?;
        suites.sort();
        suites.dedup();
        if suites.is_empty() {
            return Err(Error::Usage("no suite selected".into()));
        }
        Ok(SuiteConfig { seed, samples, tolerance, suites })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub suite: String,
    pub property: String,
    pub samples: usize,
    pub failures: usize,
    /// Smallest signed margin seen (negative beyond the tolerance means failure).
    pub worst_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.results {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Accumulates margins of one property; a sample fails when its margin is below `-tol`.
struct Tally {
    suite: Suite,
    property: &'static str,
    tol: f64,
    samples: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(suite: Suite, property: &'static str, tol: f64) -> Self {
        Tally { suite, property, tol, samples: 0, failures: 0, worst: f64::INFINITY }
    }

    fn margin(&mut self, m: f64) {
        self.samples += 1;
        if !(m >= -self.tol) {
            self.failures += 1;
        }
        self.worst = if m.is_nan() { f64::NEG_INFINITY } else { self.worst.min(m) };
    }

    fn check(&mut self, ok: bool) {
        self.margin(if ok { 0.0 } else { -1.0 });
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            suite: self.suite.as_str().to_string(),
            property: self.property.to_string(),
            samples: self.samples,
            failures: self.failures,
            worst_margin: if self.samples == 0 { 0.0 } else { self.worst },
            passed: self.samples > 0 && self.failures == 0,
        }
    }
}

/// `(big - small) / max(|big|, |small|, 1)`.
fn rel_margin(small: f64, big: f64) -> f64 {
    (big - small) / big.abs().max(small.abs()).max(1.0)
}

fn log_uniform(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Smooth random exponent field with values in `[lo, hi]`.
fn random_exponent(problem: &Problem, rng: &mut LabRng, lo: f64, hi: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let shift: f64 = rng.random_range(-1.0..1.0);
    smoothed_noise(&problem.mesh, rng, 1.0)
        .into_iter()
        .map(|v| mid + half * (0.5 * v + 0.5 * shift).clamp(-1.0, 1.0))
        .collect()
}

fn random_function(problem: &Problem, rng: &mut LabRng) -> Vec<f64> {
    if rng.random_bool(0.5) {
        smoothed_noise(&problem.mesh, rng, 1.0)
    } else {
        low_mode_field(&problem.mesh, rng, 5)
    }
}

pub fn run_suite(cfg: &SuiteConfig, run: &RunConfig) -> Result<SuiteReport> {
    let problem = run.problem()?;
    let mut results = Vec::new();
    let mut ledger: Option<Ledger> = None;
    for &suite in &cfg.suites {
        // Every suite draws from its own stream so selection does not change outcomes.
        let mut rng = seeded(cfg.seed ^ ((suite as u64 + 1) << 32));
        match suite {
            Suite::Inequalities => inequalities(cfg, &problem, &mut rng, &mut results)?,
            Suite::Gradients => gradients(&problem, run, &mut rng, &mut results)?,
            Suite::Ledger => {
                let l = ledger_for(&mut ledger, &problem, run)?;
                ledger_suite(l, &mut results)?
            }
            Suite::Solver => {
                let l = ledger_for(&mut ledger, &problem, run)?.clone();
                solver_suite(&problem, &l, run, &mut rng, &mut results)?
            }
            Suite::Ccp => ccp_suite(&problem, run, &mut results)?,
        }
    }
    Ok(SuiteReport { seed: cfg.seed, results })
}

fn ledger_for<'a>(slot: &'a mut Option<Ledger>, problem: &Problem, run: &RunConfig) -> Result<&'a Ledger> {
    if slot.is_none() {
        *slot = Some(Ledger::build(problem, run.seed, &[])?);
    }
    Ok(slot.as_ref().expect("ledger was just built"))
}

fn inequalities(cfg: &SuiteConfig, p: &Problem, rng: &mut LabRng, out: &mut Vec<PropertyResult>) -> Result<()> {
    let s = Suite::Inequalities;
    let tol = cfg.tolerance;
    let mesh = &p.mesh;

    let mut young = Tally::new(s, "young", tol);
    for _ in 0..cfg.samples {
        let a = log_uniform(rng, 1e-3, 1e3);
        let b = log_uniform(rng, 1e-3, 1e3);
        let eps = log_uniform(rng, 1e-2, 1e2);
        let m = rng.random_range(1.1..6.0);
        let m_minus = rng.random_range(1.05..m);
        let (lhs, mid, rhs) = young_check_with(a, b, eps, m, m_minus)?;
        young.margin(rel_margin(lhs, mid).min(rel_margin(mid, rhs)));
    }
    out.push(young.finish());

    let mut holder = Tally::new(s, "holder", tol);
    for _ in 0..cfg.samples {
        let m = random_exponent(p, rng, 1.2, 5.0);
        let weight: Vec<f64> = random_exponent(p, rng, 0.0, 2.0);
        let u = random_function(p, rng);
        let v = random_function(p, rng);
        let (lhs, rhs) = holder_pairing(mesh, &u, &v, &m, &weight)?;
        holder.margin(rel_margin(lhs, rhs));
    }
    out.push(holder.finish());

    let mut sandwich = Tally::new(s, "norm-modular", tol);
    let mut branches = [false; 3];
    for i in 0..cfg.samples {
        let r = random_exponent(p, rng, 1.1, 3.0);
        let gap = rng.random_range(0.1..2.0);
        let sv: Vec<f64> = r.iter().map(|x| x + gap).collect();
        let c = random_exponent(p, rng, 0.0, 2.0);
        let spec = ModularSpec::two_term(vec![1.0; mesh.len()], r, c, sv)?;
        let u0 = random_function(p, rng);
        let u: Vec<f64> = match i % 3 {
            0 => {
                let n = luxemburg_norm(mesh, &spec, &u0)?;
                if n == 0.0 {
                    u0
                } else {
                    u0.iter().map(|v| v / n).collect()
                }
            }
            _ => {
                let scale = log_uniform(rng, 1e-2, 1e2);
                u0.iter().map(|v| scale * v).collect()
            }
        };
        let rep = check_norm_modular(mesh, &spec, &u)?;
        branches[match rep.branch {
            NormBranch::Below => 0,
            NormBranch::Unit => 1,
            NormBranch::Above => 2,
        }] = true;
        sandwich.margin(rep.worst_margin());
    }
    out.push(sandwich.finish());
    let mut coverage = Tally::new(s, "norm-modular-branches", tol);
    coverage.check(cfg.samples < 3 || branches.iter().all(|&b| b));
    out.push(coverage.finish());

    let k = &p.kirchhoff;
    let mt0 = k.m_t0();
    let m0 = k.m0();
    let mut kb = Tally::new(s, "kirchhoff-bounds", tol);
    for _ in 0..cfg.samples {
        let t = rng.random_range(0.0..(10.0 * k.t0.max(k.tau0)));
        let v = k.m_trunc(t);
        let hat = k.m_hat(t);
        kb.margin(rel_margin(m0, v).min(rel_margin(v, mt0)));
        kb.margin(rel_margin(m0 * t, hat).min(rel_margin(hat, mt0 * t)));
    }
    out.push(kb.finish());

    let mut poincare = Tally::new(s, "poincare-positivity", 0.0);
    for _ in 0..cfg.samples {
        let u = random_function(p, rng);
        let g = mesh.gradient(&u)?;
        let f = &p.fields;
        let num: f64 = (0..u.len()).map(|k| mesh.weights()[k] * pow(magnitude(&g[k]), f.p[k])).sum();
        let den: f64 = (0..u.len()).map(|k| mesh.weights()[k] * pow(u[k].abs(), f.p[k])).sum();
        if den > 0.0 {
            poincare.check(num / den > 0.0);
        }
    }
    out.push(poincare.finish());
    Ok(())
}

/// Smallest relative gap between `⟨∇E(u), v⟩` and Richardson-extrapolated central
/// differences over a ladder of steps.
fn fd_error(p: &Problem, fun: &Functional, u: &[f64], v: &[f64]) -> Result<f64> {
    let an = p.pairing(&p.gradient(fun, u)?, v);
    let central = |h: f64| -> Result<f64> {
        let up: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let dn: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - h * b).collect();
        Ok((p.energy(fun, &up)? - p.energy(fun, &dn)?) / (2.0 * h))
    };
    let mut best = f64::INFINITY;
    for h in [1e-2, 1e-3, 1e-4, 1e-5] {
        let (d1, d2) = (central(h)?, central(0.5 * h)?);
        for fd in [d2, (4.0 * d2 - d1) / 3.0] {
            let scale = an.abs().max(fd.abs());
            let err = if scale == 0.0 { 0.0 } else { (fd - an).abs() / scale };
            best = best.min(err);
        }
    }
    Ok(best)
}

fn gradients(p: &Problem, run: &RunConfig, rng: &mut LabRng, out: &mut Vec<PropertyResult>) -> Result<()> {
    let s = Suite::Gradients;
    let pm = p.fields.extrema().p_minus;
    let lambda = run.solve_cc.lambda.unwrap_or(0.05);
    let mut tallies = [
        Tally::new(s, "gradient-phi-lambda", 0.0),
        Tally::new(s, "gradient-t-lambda", 0.0),
        Tally::new(s, "gradient-psi-theta", 0.0),
    ];
    for _ in 0..GRADIENT_SAMPLES {
        // Interior-positive u and smooth v keep the probe away from the kinks of
        // |t|^σ at u = 0 and of |ξ|^p at ξ = 0, where differences converge slowly.
        let amp = log_uniform(rng, 0.05, 1.0);
        let tilt = low_mode_field(&p.mesh, rng, 4);
        let u: Vec<f64> = box_sine_mode(&p.mesh).iter().zip(&tilt).map(|(b, t)| amp * b * (0.5 * t).exp()).collect();
        let v = low_mode_field(&p.mesh, rng, 4);
        let ia = p.a_integral(&u)?;
        // Put the cutoff band around ∫𝓐 so every part of T_λ is exercised.
        let t1 = (rng.random_range(0.3..1.5) * ia).powf(1.0 / pm);
        let funs = [
            Functional::PhiLambda { lambda },
            Functional::TLambda { lambda, t1 },
            Functional::PsiTheta { theta: rng.random_range(0.1..1.0) },
        ];
        for (t, fun) in tallies.iter_mut().zip(&funs) {
            t.margin(GRADIENT_TOLERANCE - fd_error(p, fun, &u, &v)?);
        }
    }
    out.extend(tallies.into_iter().map(Tally::finish));

    // T_λ against Φ_λ in the three regimes of ∫𝓐 relative to the band [L, 2L].
    let mut regimes = [
        Tally::new(s, "truncation-below-band", 0.0),
        Tally::new(s, "truncation-in-band", 0.0),
        Tally::new(s, "truncation-above-band", 0.0),
    ];
    for i in 0..TRUNCATION_SAMPLES {
        let u = low_mode_field(&p.mesh, rng, 4);
        let ia = p.a_integral(&u)?;
        let ratio = match i % 3 {
            0 => rng.random_range(0.05..0.95),
            1 => rng.random_range(1.05..1.95),
            _ => rng.random_range(2.05..20.0),
        };
        let t1 = (ia / ratio).powf(1.0 / pm);
        let (lo, hi) = p.cutoff_band(t1);
        let parts = p.parts(&u)?;
        let phi = p.energy_from_parts(&Functional::PhiLambda { lambda }, &parts);
        let tl = p.energy_from_parts(&Functional::TLambda { lambda, t1 }, &parts);
        if parts.a < lo {
            regimes[0].check(tl == phi);
        } else if parts.a > hi {
            regimes[2].check(tl == p.kirchhoff.m_hat(parts.a));
        } else {
            regimes[1].check(tl >= phi);
        }
    }
    out.extend(regimes.into_iter().map(Tally::finish));
    Ok(())
}

fn ledger_suite(l: &Ledger, out: &mut Vec<PropertyResult>) -> Result<()> {
    let s = Suite::Ledger;
    let mut basics = Tally::new(s, "k0-positive", 0.0);
    basics.check(l.k0 > 0.0);
    out.push(basics.finish());
    let mut order = Tally::new(s, "exponent-ordering", 0.0);
    order.check(l.n1 <= l.n2 && l.tau1 <= l.tau2);
    out.push(order.finish());

    if l.beta < l.r1_minus {
        let mut mono = Tally::new(s, "ps-level-sl-decreasing", 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let theta = 10f64.powf(-6.0 + 0.2 * i as f64);
            let v = l.ps_level_sl(theta);
            mono.check(v < prev);
            prev = v;
        }
        out.push(mono.finish());
        let mut feas = Tally::new(s, "theta1-feasible", 0.0);
        for r in [1.5, 2.0, 10.0, 100.0] {
            let t = l.theta1(r)?;
            feas.check(t > 0.0 && t <= l.c_upper_star(r)? && l.c_lower_star(r)? < l.ps_level_sl(t));
        }
        out.push(feas.finish());
    }

    let Some(w) = &l.window else { return Ok(()) };
    let prof = &w.profile;
    let mut closed = Tally::new(s, "lambda3-grid-oracle", 0.0);
    let hi = 4.0 * prof.t_star;
    let mut gmax = f64::NEG_INFINITY;
    let mut targ = 0.0;
    for i in 1..=1_000_000 {
        let t = hi * i as f64 / 1e6;
        let v = prof.h(t);
        if v > gmax {
            gmax = v;
            targ = t;
        }
    }
    closed.margin(1e-6 - (gmax - prof.lambda3).abs() / prof.lambda3);
    closed.margin(1e-6 - (prof.h(prof.t_star) - prof.lambda3).abs() / prof.lambda3);
    closed.margin(1e-3 - (targ - prof.t_star).abs() / prof.t_star);
    out.push(closed.finish());

    let mut resid = Tally::new(s, "root-residuals", 0.0);
    let mut signs = Tally::new(s, "g-lambda-sign-pattern", 0.0);
    let mut mono = Tally::new(s, "t1-increasing", 0.0);
    let mut prev = 0.0;
    for i in 1..=10 {
        let lambda = prof.lambda3 * i as f64 / 11.0;
        let (t1, t2) = l.roots(lambda)?;
        resid.margin(1e-9 - l.g_lambda(lambda, t1)?.abs());
        resid.margin(1e-9 - l.g_lambda(lambda, t2)?.abs());
        signs.check(t1 < prof.t_star && prof.t_star < t2);
        for t in [0.5 * t1, 0.99 * t1, 1.5 * t2] {
            signs.check(l.g_lambda(lambda, t)? < 0.0);
        }
        for t in [(t1 * t2).sqrt(), 0.5 * (t1 + t2)] {
            signs.check(l.g_lambda(lambda, t)? > 0.0);
        }
        mono.check(t1 > prev);
        prev = t1;
    }
    out.push(resid.finish());
    out.push(signs.finish());
    out.push(mono.finish());

    let mut window = Tally::new(s, "lambda-star-positive", 0.0);
    window.check(w.lambda_star > 0.0);
    window.check(w.lambda_star <= w.lambda1.min(w.lambda2).min(w.lambda3).min(w.lambda4));
    window.check(l.roots(w.lambda4 * (1.0 - 1e-9)).map(|r| r.0 < w.b4).unwrap_or(false));
    out.push(window.finish());
    if w.lambda_star2.is_finite() {
        let mut zero = Tally::new(s, "ps-level-cc-vanishes-at-lambda-star2", 0.0);
        zero.margin(1e-9 - l.ps_level_cc(w.lambda_star2).abs() / l.q_level.max(1.0));
        zero.check(l.ps_level_cc(0.5 * w.lambda_star2) > 0.0);
        out.push(zero.finish());
    }
    Ok(())
}

fn solver_suite(
    p: &Problem,
    l: &Ledger,
    run: &RunConfig,
    rng: &mut LabRng,
    out: &mut Vec<PropertyResult>,
) -> Result<()> {
    let s = Suite::Solver;
    let opts = run.solver.options();
    let mut monotone = Tally::new(s, "energy-monotone", 0.0);
    let mut trace = Tally::new(s, "zero-trace", 0.0);
    if let Some(w) = &l.window {
        let lambda = run.solve_cc.lambda.unwrap_or(run.solve_cc.lambda_fraction * w.lambda_star);
        let rep = solve_concave_convex(p, l, lambda, &opts, run.seed)?;
        monotone.check(rep.energies.windows(2).all(|e| e[1] <= e[0]));
        trace.check((0..p.mesh.len()).all(|k| !p.mesh.is_boundary(k) || rep.u[k] == 0.0));

        let mut reach = Tally::new(s, "negative-level-with-containment", 0.0);
        reach.check(rep.reached_negative_level && rep.containment_ok == Some(true));
        out.push(reach.finish());

        let mut conv = Tally::new(s, "converged", 0.0);
        conv.check(rep.stop == StopReason::Converged);
        out.push(conv.finish());

        // Weak-form residual against random test directions.
        let (t1, _) = l.roots(lambda)?;
        let fun = Functional::TLambda { lambda, t1 };
        let g = p.gradient(&fun, &rep.u)?;
        if rep.grad_norm <= opts.tol {
            let mut weak = Tally::new(s, "weak-residual", 0.0);
            for _ in 0..10 {
                let v = smoothed_noise(&p.mesh, rng, 1.0);
                weak.margin(opts.tol * p.mesh.l2_norm(&v) - p.pairing(&g, &v).abs());
            }
            out.push(weak.finish());
        }

        // Odd reactions make the functional even: the mirrored start mirrors the run.
        let short = DescentOptions { max_iters: 50, ..opts };
        let r = &p.reaction;
        let phi = seed_from_eigen_subspace(p, &r.ball_center, r.ball_radius, 1)?.remove(0);
        let u0: Vec<f64> = phi.iter().map(|v| 1e-3 * v).collect();
        let m0: Vec<f64> = u0.iter().map(|v| -v).collect();
        let a = descend(p, &fun, &u0, &short, None, run.seed)?;
        let b = descend(p, &fun, &m0, &short, None, run.seed)?;
        let mut even = Tally::new(s, "mirror-symmetry", 0.0);
        even.check(a.energies.len() == b.energies.len());
        for (x, y) in a.energies.iter().zip(&b.energies) {
            even.margin(1e-12 - (x - y).abs() / x.abs().max(1e-300));
        }
        out.push(even.finish());
    } else {
        let r = &p.reaction;
        let phi = seed_from_eigen_subspace(p, &r.ball_center, r.ball_radius, 1)?.remove(0);
        let fun = Functional::PsiTheta { theta: run.solve_sl.theta.unwrap_or(1e-3) };
        let u0: Vec<f64> = phi.iter().map(|v| 0.5 * v).collect();
        let rep = descend(p, &fun, &u0, &DescentOptions { max_iters: 50, ..opts }, None, run.seed)?;
        monotone.check(rep.energies.windows(2).all(|e| e[1] <= e[0]));
        trace.check((0..p.mesh.len()).all(|k| !p.mesh.is_boundary(k) || rep.u[k] == 0.0));
    }
    out.push(monotone.finish());
    out.push(trace.finish());
    Ok(())
}

/// Bubble center and amplitude exponent configured for `run`.
pub fn bubble_setup(p: &Problem, run: &RunConfig) -> Result<(Point, f64)> {
    let x0 = match &run.ccp.center {
        Some(c) => {
            if c.len() != p.mesh.dim() {
                return Err(Error::config("ccp.center", "dimension mismatch"));
            }
            let mut x = [0.0; 2];
            x[..c.len()].copy_from_slice(c);
            x
        }
        None => p.mesh.center(),
    };
    let k = p.mesh.nearest_node(&x0);
    let p0 = p.fields.p[k];
    let s = run.ccp.s.unwrap_or((p.fields.ambient_n - p0) / p0);
    Ok((x0, s))
}

fn ccp_suite(p: &Problem, run: &RunConfig, out: &mut Vec<PropertyResult>) -> Result<()> {
    let s = Suite::Ccp;
    let (x0, sexp) = bubble_setup(p, run)?;
    let fam = make_bubbles(&p.mesh, &x0, &run.ccp.eps, sexp)?;
    let ledger = Ledger::build(p, run.seed, &fam.bubbles)?;
    let trace = ccp_quotient_trace(p, &fam, ledger.s_hat)?;

    let mut margin = Tally::new(s, "ccp-margin", 0.0);
    let mut local = Tally::new(s, "ccp-localized-margin", 0.0);
    let mut support = Tally::new(s, "mass-localization", 0.0);
    for row in &trace.rows {
        margin.margin((row.margin + MARGIN_SLACK * row.rhs) / row.rhs.max(1e-300));
        local.margin((row.local_margin + MARGIN_SLACK * row.local_rhs) / row.local_rhs.max(1e-300));
        support.margin(row.nu_fraction - 0.99);
        support.check(row.correction == 0.0);
    }
    out.push(margin.finish());
    out.push(local.finish());
    out.push(support.finish());

    if p.fields.ambient_n == p.mesh.dim() as f64 {
        let mut stab = Tally::new(s, "mu-mass-stability", 0.0);
        if let Some(v) = trace.mu_stability() {
            stab.margin(0.10 - v);
        }
        out.push(stab.finish());
    }

    let zero = crate::ccp::BubbleFamily {
        center: x0,
        eps: run.ccp.eps.clone(),
        s: sexp,
        bubbles: vec![vec![0.0; p.mesh.len()]; run.ccp.eps.len()],
    };
    let zt = ccp_quotient_trace(p, &zero, ledger.s_hat)?;
    let mut z = Tally::new(s, "zero-family", 0.0);
    z.check(zt.rows.iter().all(|r| r.mu_mass == 0.0 && r.nu_mass == 0.0 && r.lhs == 0.0 && r.rhs == 0.0));
    out.push(z.finish());

    // Translation covariance applies to constant coefficients only.
    let f = &p.fields;
    let constant = [&f.p, &f.q, &f.a, &f.c1, &f.c2, &f.r1, &f.r2].iter().all(|t| t.iter().all(|v| *v == t[0]));
    if constant {
        let mut shifted = x0;
        shifted[0] += p.mesh.spacing()[0];
        if let Ok(fam2) = make_bubbles(&p.mesh, &shifted, &run.ccp.eps, sexp) {
            let t2 = ccp_quotient_trace(p, &fam2, ledger.s_hat)?;
            let mut tc = Tally::new(s, "translation-covariance", 0.0);
            for (a, b) in trace.rows.iter().zip(&t2.rows) {
                for (x, y) in [(a.mu_mass, b.mu_mass), (a.nu_mass, b.nu_mass), (a.margin, b.margin)] {
                    tc.margin(1e-10 - (x - y).abs() / x.abs().max(1.0));
                }
            }
            out.push(tc.finish());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_and_sample_counts() {
        assert!(matches!(Suite::parse("bogus"), Err(Error::Usage(_))));
        assert_eq!(Suite::parse("ccp").unwrap().as_str(), "ccp");
        let names: Vec<String> = ALL_SUITES.iter().map(|s| s.to_string()).collect();
        assert!(matches!(SuiteConfig::new(1, 0, None, &names), Err(Error::Config { .. })));
        assert!(SuiteConfig::new(1, 5, Some(-1.0), &names).is_err());
        let c = SuiteConfig::new(1, 5, None, &["ledger".into(), "inequalities".into()]).unwrap();
        assert_eq!(c.suites, vec![Suite::Inequalities, Suite::Ledger]);
    }
}
