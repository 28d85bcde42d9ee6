//! Eigen-subspace seeds, monotone descent, and the decay and level studies.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::energy::{Functional, Problem};
use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::mesh::{magnitude, DomainMesh, Point};
use crate::modular::{luxemburg_norm, ModularSpec};
use crate::rng::seeded;

/// Largest node set handed to the dense eigensolver.
pub const EIGEN_NODE_CAP: usize = 2500;

/// Lowest `k` eigenpairs of the discrete Dirichlet Laplacian (3-/5-point stencil) on the
/// interior nodes of the open ball `B(center, radius)`, zero-extended and normalized in
/// the quadrature 2-norm.
pub fn ball_eigenfunctions(
    mesh: &DomainMesh,
    center: &Point,
    radius: f64,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if k == 0 {
        return Err(Error::Domain("at least one eigenfunction is required".into()));
    }
    let nodes: Vec<usize> =
        (0..mesh.len()).filter(|&i| !mesh.is_boundary(i) && mesh.distance(i, center) < radius).collect();
    if nodes.is_empty() {
        return Err(Error::DegenerateBall { radius });
    }
    if k > nodes.len() {
        return Err(Error::Domain(format!(
            "{k} eigenfunctions requested but the ball holds {} interior nodes",
            nodes.len()
        )));
    }
    if nodes.len() > EIGEN_NODE_CAP {
        return Err(Error::Resource(format!(
            "ball holds {} nodes, dense eigensolve is capped at {EIGEN_NODE_CAP}",
            nodes.len()
        )));
    }
    let mut index = vec![usize::MAX; mesh.len()];
    for (i, &n) in nodes.iter().enumerate() {
        index[n] = i;
    }
    let nx = mesh.nodes_per_axis()[0];
    let m = nodes.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &n) in nodes.iter().enumerate() {
        for axis in 0..mesh.dim() {
            let h2 = mesh.spacing()[axis].powi(2);
            a[(i, i)] += 2.0 / h2;
            let (stride, pos, len) = if axis == 0 { (1, n % nx, nx) } else { (nx, n / nx, mesh.nodes_per_axis()[1]) };
            for nb in
                [pos.checked_sub(1).map(|_| n - stride), (pos + 1 < len).then(|| n + stride)].into_iter().flatten()
            {
                if index[nb] != usize::MAX {
                    a[(i, index[nb])] -= 1.0 / h2;
                }
            }
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values = Vec::with_capacity(k);
    let mut funcs = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let col = eig.eigenvectors.column(j);
        let mut u = vec![0.0; mesh.len()];
        for (i, &n) in nodes.iter().enumerate() {
            u[n] = col[i];
        }
        // Fix the sign so the largest entry is positive.
        let big = u.iter().cloned().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
        let norm = mesh.l2_norm(&u);
        let s = big.signum() / norm;
        u.iter_mut().for_each(|v| *v *= s);
        values.push(eig.eigenvalues[j]);
        funcs.push(u);
    }
    Ok((values, funcs))
}

/// Product of first sine modes over the box; the principal discrete Dirichlet mode.
pub fn box_sine_mode(mesh: &DomainMesh) -> Vec<f64> {
    let ivs = mesh.intervals().to_vec();
    let mut u = mesh.sample(|x| {
        (0..mesh.dim()).map(|a| ((x[a] - ivs[a].lo) / ivs[a].len() * std::f64::consts::PI).sin()).product()
    });
    for (k, v) in u.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *v = 0.0;
        }
    }
    u
}

/// `‖∇u‖_𝓗`, the norm of the solution space.
pub fn solution_norm(problem: &Problem, spec: &ModularSpec, u: &[f64]) -> Result<f64> {
    let g: Vec<f64> = problem.mesh.gradient(u)?.iter().map(magnitude).collect();
    luxemburg_norm(&problem.mesh, spec, &g)
}

/// Rescales `u` so that `‖∇u‖_𝓗 = 1`.
pub fn normalize_solution_norm(problem: &Problem, spec: &ModularSpec, u: &[f64]) -> Result<Vec<f64>> {
    let n = solution_norm(problem, spec, u)?;
    if n == 0.0 {
        return Err(Error::Numeric("cannot normalize the zero function".into()));
    }
    Ok(u.iter().map(|v| v / n).collect())
}

/// Seeds spanning `X_k`: the first `k` ball eigenfunctions with `‖∇·‖_𝓗 = 1`.
pub fn seed_from_eigen_subspace(problem: &Problem, center: &Point, radius: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    let spec = ModularSpec::h_cal(&problem.fields)?;
    let (_, funcs) = ball_eigenfunctions(&problem.mesh, center, radius, k)?;
    funcs.iter().map(|u| normalize_solution_norm(problem, &spec, u)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentOptions {
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub tol: f64,
    /// Upper bound on the trial step length.
    pub step_cap: f64,
    /// Scale the search direction by `1 / (1 + a(x))`.
    pub preconditioned: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iters: 5000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            tol: 1e-6,
            step_cap: 1e6,
            preconditioned: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub energies: Vec<f64>,
    /// Quadrature 2-norm of the nodal gradient.
    pub grad_norm: f64,
    pub a_integral: f64,
    pub stop: StopReason,
    pub reached_negative_level: bool,
    /// `∫𝓐 < t1^{p⁻}` at the final iterate (`T_λ` runs only).
    pub containment_ok: Option<bool>,
    /// Final energy below the supplied compactness threshold.
    pub ps_level_ok: Option<bool>,
    #[serde(skip)]
    pub u: Vec<f64>,
    pub seed: u64,
}

impl SolverReport {
    pub fn final_energy(&self) -> f64 {
        *self.energies.last().unwrap_or(&f64::NAN)
    }
}

/// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
pub fn descend(
    problem: &Problem,
    fun: &Functional,
    u0: &[f64],
    opts: &DescentOptions,
    ps_level: Option<f64>,
    seed: u64,
) -> Result<SolverReport> {
    let mesh = &problem.mesh;
    if u0.iter().enumerate().any(|(k, &v)| mesh.is_boundary(k) && v != 0.0) {
        return Err(Error::Domain("initial iterate does not vanish on the boundary".into()));
    }
    let precond: Vec<f64> =
        problem.fields.a.iter().map(|a| if opts.preconditioned { 1.0 / (1.0 + a) } else { 1.0 }).collect();

    let mut u = u0.to_vec();
    let (mut e, mut g) = problem.energy_and_gradient(fun, &u)?;
    let mut energies = vec![e];
    let mut gnorm = mesh.l2_norm(&g);
    let mut step = 1.0f64;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if gnorm <= opts.tol {
            stop = StopReason::Converged;
            break;
        }
        let d: Vec<f64> = g.iter().zip(&precond).map(|(gk, pk)| -gk * pk).collect();
        let slope = mesh.inner(&g, &d);
        if let Some((u_prev, g_prev)) = &prev {
            let s: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
            let sy = mesh.inner(&s, &y);
            let ss = mesh.inner(&s, &s);
            if sy > 0.0 && ss > 0.0 {
                step = ss / sy;
            }
        }
        step = step.clamp(1e-300, opts.step_cap);
        let mut accepted = None;
        for _ in 0..200 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            match problem.energy_and_gradient(fun, &trial) {
                Ok((et, gt)) if et <= e + opts.armijo_c * step * slope => {
                    accepted = Some((trial, et, gt));
                    break;
                }
                Ok(_) | Err(Error::Overflow { .. }) => step *= opts.backtrack,
                Err(err) => return Err(err),
            }
        }
        let Some((trial, et, gt)) = accepted else {
            stop = StopReason::Stagnation;
            break;
        };
        if !et.is_finite() {
            return Err(Error::Numeric(format!("non-finite energy at iteration {iterations}")));
        }
        prev = Some((std::mem::replace(&mut u, trial), std::mem::replace(&mut g, gt)));
        e = et;
        energies.push(e);
        gnorm = mesh.l2_norm(&g);
        iterations += 1;
    }
    if stop == StopReason::MaxIterations && gnorm <= opts.tol {
        stop = StopReason::Converged;
    }

    let a_integral = problem.a_integral(&u)?;
    let reached_negative_level = e < 0.0;
    let containment_ok = match *fun {
        Functional::TLambda { t1, .. } => {
            let (lo, _) = problem.cutoff_band(t1);
            let ok = a_integral < lo;
            if reached_negative_level && !ok {
                return Err(Error::Verification(format!(
                    "negative level reached with ∫A = {a_integral} outside t1^p- = {lo}"
                )));
            }
            Some(ok)
        }
        _ => None,
    };
    Ok(SolverReport {
        iterations,
        energies,
        grad_norm: gnorm,
        a_integral,
        stop,
        reached_negative_level,
        containment_ok,
        ps_level_ok: ps_level.map(|c| e < c),
        u,
        seed,
    })
}

/// Scales `phi` to the amplitude on a log grid minimizing the functional.
pub fn best_amplitude(problem: &Problem, fun: &Functional, phi: &[f64]) -> Result<(f64, f64)> {
    let mut best = (0.0, 0.0);
    for i in 0..=400 {
        let s = 10f64.powf(-12.0 + 13.0 * i as f64 / 400.0);
        let u: Vec<f64> = phi.iter().map(|v| s * v).collect();
        match problem.energy(fun, &u) {
            Ok(e) if e < best.1 => best = (s, e),
            Ok(_) | Err(Error::Overflow { .. }) => {}
            Err(err) => return Err(err),
        }
    }
    Ok(best)
}

/// Descent on `T_λ` from the best negative-energy multiple of the first ball mode.
pub fn solve_concave_convex(
    problem: &Problem,
    ledger: &Ledger,
    lambda: f64,
    opts: &DescentOptions,
    seed: u64,
) -> Result<SolverReport> {
    let (t1, _) = ledger.roots(lambda)?;
    let fun = Functional::TLambda { lambda, t1 };
    let r = &problem.reaction;
    let phi = seed_from_eigen_subspace(problem, &r.ball_center, r.ball_radius, 1)?.remove(0);
    let (s, _) = best_amplitude(problem, &fun, &phi)?;
    let s = if s == 0.0 { 1e-6 } else { s };
    let u0: Vec<f64> = phi.iter().map(|v| s * v).collect();
    descend(problem, &fun, &u0, opts, Some(ledger.ps_level_cc(lambda)), seed)
}

/// One row of the decay study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub lambda: f64,
    pub t1: f64,
    pub norm: f64,
    pub a_integral: f64,
    /// `∫𝓐 < t1^{p⁻}`.
    pub containment_ok: bool,
    /// Norm bound implied by the containment.
    pub envelope: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// The run failed to reach a negative level.
    pub gap: bool,
}

/// Solves on each `λ` of the grid and records `‖u_λ‖`.
pub fn decay_study(
    problem: &Problem,
    ledger: &Ledger,
    lambdas: &[f64],
    opts: &DescentOptions,
    seed: u64,
) -> Result<Vec<DecayRow>> {
    let spec = ModularSpec::h_cal(&problem.fields)?;
    let ex = *problem.fields.extrema();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (t1, _) = ledger.roots(lambda)?;
        let rep = solve_concave_convex(problem, ledger, lambda, opts, seed)?;
        let norm = solution_norm(problem, &spec, &rep.u)?;
        // ∫𝓗 <= q⁺ ∫𝓐 < q⁺ t1^{p⁻}, then the norm-modular sandwich.
        let bound = ex.q_plus * t1.powf(ex.p_minus);
        let envelope = bound.powf(1.0 / ex.q_plus).max(bound.powf(1.0 / ex.p_minus));
        rows.push(DecayRow {
            lambda,
            t1,
            norm,
            a_integral: rep.a_integral,
            containment_ok: rep.containment_ok.unwrap_or(false),
            envelope,
            energy: rep.final_energy(),
            grad_norm: rep.grad_norm,
            iterations: rep.iterations,
            gap: !rep.reached_negative_level,
        });
    }
    Ok(rows)
}

/// One row of the superlinear level audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub k: usize,
    pub r_k: f64,
    /// Surrogate min-max level: max of `Ψ_θ` over sampled rays of `X_k` up to `R_k`.
    pub level: f64,
    pub ps_level: f64,
    pub c_lower_star: f64,
    pub positive: bool,
    pub increasing: bool,
    pub below_ps_level: bool,
    pub below_c_lower_star: bool,
}

impl LevelRow {
    pub fn passed(&self) -> bool {
        self.positive && self.increasing && self.below_ps_level && self.below_c_lower_star
    }
}

/// Random unit directions added per dimension of `X_k`.
const EXTRA_DIRECTIONS: usize = 4;

/// Smallest amplitude on a geometric grid where `Ψ₀(t d) < 0`.
fn sign_change_radius(problem: &Problem, d: &[f64]) -> Result<f64> {
    let fun = Functional::PsiTheta { theta: 0.0 };
    let mut t = 1e-3;
    while t < 1e9 {
        let u: Vec<f64> = d.iter().map(|v| t * v).collect();
        match problem.energy(&fun, &u) {
            Ok(e) if e < 0.0 => return Ok(t),
            Ok(_) => {}
            Err(Error::Overflow { .. }) => return Ok(t),
            Err(err) => return Err(err),
        }
        t *= 1.02;
    }
    Err(Error::Numeric("Ψ₀ stays nonnegative along a seed direction".into()))
}

/// Max of `Ψ_θ(t d)` over `t ∈ [0, r]`: grid scan then golden-section refinement.
fn ray_max(problem: &Problem, fun: &Functional, d: &[f64], r: f64) -> Result<f64> {
    let eval = |t: f64| -> Result<f64> {
        let u: Vec<f64> = d.iter().map(|v| t * v).collect();
        problem.energy(fun, &u)
    };
    let n = 400;
    let mut best = (0.0, 0.0);
    for i in 0..=n {
        let t = r * i as f64 / n as f64;
        let e = eval(t)?;
        if e > best.1 {
            best = (t, e);
        }
    }
    let h = r / n as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(r));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - phi * (b - a);
        let d2 = a + phi * (b - a);
        if eval(c)? > eval(d2)? {
            b = d2;
        } else {
            a = c;
        }
    }
    Ok(best.1.max(eval(0.5 * (a + b))?))
}

/// Outcome of the superlinear audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelAudit {
    pub theta: f64,
    /// `θ1` at the largest radius.
    pub theta1: f64,
    pub rows: Vec<LevelRow>,
}

impl LevelAudit {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(LevelRow::passed)
    }
}

/// Audits surrogate levels of `Ψ_θ` on nested direction sets of `X_1 ⊂ … ⊂ X_K`.
///
/// Radii `R_k` come from sign changes of `Ψ₀`. Without an explicit `theta` the audit
/// runs at `theta_fraction · θ1(R_K)`.
pub fn sl_level_audit(
    problem: &Problem,
    ledger: &Ledger,
    theta: Option<f64>,
    theta_fraction: f64,
    k_pairs: usize,
    seed: u64,
) -> Result<LevelAudit> {
    if k_pairs == 0 {
        let theta = theta.unwrap_or(0.0);
        return Ok(LevelAudit { theta, theta1: f64::NAN, rows: Vec::new() });
    }
    let r = &problem.reaction;
    let basis = seed_from_eigen_subspace(problem, &r.ball_center, r.ball_radius, k_pairs)?;
    let spec = ModularSpec::h_cal(&problem.fields)?;
    let mut rng = seeded(seed);

    // Nested direction sets and their radii.
    let mut directions: Vec<Vec<f64>> = Vec::new();
    let mut sets = Vec::with_capacity(k_pairs);
    let mut r_prev = 1.0f64;
    for k in 1..=k_pairs {
        directions.push(basis[k - 1].clone());
        for _ in 0..EXTRA_DIRECTIONS {
            let mut u = vec![0.0; problem.mesh.len()];
            for b in basis.iter().take(k) {
                let c: f64 = rng.random_range(-1.0..=1.0);
                u.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            if u.iter().any(|v| *v != 0.0) {
                directions.push(normalize_solution_norm(problem, &spec, &u)?);
            }
        }
        let mut raw = 0.0f64;
        for d in &directions {
            raw = raw.max(sign_change_radius(problem, d)?);
        }
        let r_k = (1.1 * raw).max(1.1).max(r_prev);
        sets.push((directions.len(), r_k));
        r_prev = r_k;
    }
    let theta1 = ledger.theta1(r_prev)?;
    let theta = theta.unwrap_or(theta_fraction * theta1);
    let fun = Functional::PsiTheta { theta };
    let ps_level = ledger.ps_level_sl(theta);

    let mut rows: Vec<LevelRow> = Vec::new();
    let mut level_prev = f64::NEG_INFINITY;
    for (i, &(count, r_k)) in sets.iter().enumerate() {
        let mut level = f64::NEG_INFINITY;
        for d in &directions[..count] {
            level = level.max(ray_max(problem, &fun, d, r_k)?);
        }
        let c_low = ledger.c_lower_star(r_k)?;
        rows.push(LevelRow {
            k: i + 1,
            r_k,
            level,
            ps_level,
            c_lower_star: c_low,
            positive: level > 0.0,
            increasing: level > level_prev,
            below_ps_level: level < ps_level,
            below_c_lower_star: level <= c_low,
        });
        level_prev = level;
    }
    Ok(LevelAudit { theta, theta1, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Interval;

    #[test]
    fn half_sine_on_a_sub_interval() {
        let m = DomainMesh::new(&[Interval::new(0.0, 1.0)], &[129]).unwrap();
        let (vals, f) = ball_eigenfunctions(&m, &[0.5, 0.0], 0.25, 3).unwrap();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        let first = &f[0];
        for (k, &v) in first.iter().enumerate() {
            let x = m.coord(k)[0];
            if !(x > 0.25 && x < 0.75) {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0);
            }
        }
        // Dirichlet eigenvalue of an interval of length 1/2 is 4π².
        let exact = 4.0 * std::f64::consts::PI.powi(2);
        assert!((vals[0] - exact).abs() < 0.01 * exact);
        for i in 0..3 {
            for j in 0..3 {
                let ip = m.inner(&f[i], &f[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-8);
            }
        }
        assert!(ball_eigenfunctions(&m, &[0.5, 0.0], 0.02, 10).is_err());
    }

    #[test]
    fn eigenfunctions_in_two_dimensions() {
        let iv = Interval::new(0.0, 1.0);
        let m = DomainMesh::new(&[iv, iv], &[21, 21]).unwrap();
        let (vals, f) = ball_eigenfunctions(&m, &[0.5, 0.5], 0.3, 3).unwrap();
        assert!(vals[0] < vals[1]);
        // The second and third modes are degenerate by symmetry.
        assert!((vals[1] - vals[2]).abs() < 1e-6 * vals[1]);
        assert!(m.inner(&f[0], &f[1]).abs() < 1e-8);
    }
}
