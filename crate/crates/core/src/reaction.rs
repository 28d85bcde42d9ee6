//! Reaction catalogue `f`, its primitive `F`, growth constants, and the critical term `B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{extrema, ExponentField, FieldSpec};
use crate::mesh::{DomainMesh, Point};
use crate::modular::{pow, signed_pow};
use crate::smooth::{gauss_legendre, plateau};

/// Catalogue entry and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReactionKind {
    /// `c1 |t|^{δ-2} t + c2 |t|^{p-2} t`.
    CcPower { c1: f64, c2: f64, delta: FieldSpec },
    /// `c1 |t|^{δ-2} t log^κ(e + |t|) + c2 |t|^{m-2} t`.
    CcLog { c1: f64, c2: f64, delta: FieldSpec, kappa: FieldSpec, m: FieldSpec },
    /// `c1 |t|^{n-2} t` with `n = φ δ + (1 - φ) m`.
    CcInterp { c1: f64, delta: FieldSpec, m: FieldSpec, center: Vec<f64>, eps0: f64 },
    /// `c1 |t|^{δ-2} t + c2 |t|^{q⁺-2} t`.
    SlPower { c1: f64, c2: f64, delta: FieldSpec },
    /// `c1 |t|^{δ-2} t + c2 |t|^{m-2} t` with `m < p`.
    SlSub { c1: f64, c2: f64, delta: FieldSpec, m: FieldSpec },
    /// `c1 |t|^{n-2} t` with `n = φ δ + (1 - φ) q⁺`.
    SlInterp { c1: f64, delta: FieldSpec, center: Vec<f64>, eps0: f64 },
}

/// `[reaction]` section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionConfig {
    #[serde(flatten)]
    pub kind: ReactionKind,
    /// Center of the ball `B`; defaults to the domain center.
    #[serde(default)]
    pub ball_center: Option<Vec<f64>>,
    /// Radius of `B`; defaults to a quarter of the shortest side.
    #[serde(default)]
    pub ball_radius: Option<f64>,
    /// Superlinear parameter β; defaults to `q⁺`.
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    ConcaveConvex,
    Superlinear,
}

/// How a constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Empirical,
    SampledMajorant,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Empirical => "empirical",
            Provenance::SampledMajorant => "sampled-majorant",
        }
    }
}

/// Growth constants of the reaction. Concave-convex constants are absent for
/// superlinear entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c5: Option<f64>,
    pub c6: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
struct PowerTerm {
    coef: f64,
    exp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct LogTerm {
    coef: f64,
    delta: Vec<f64>,
    kappa: Vec<f64>,
}

/// A catalogued reaction sampled on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub family: Family,
    pub name: &'static str,
    powers: Vec<PowerTerm>,
    log: Option<LogTerm>,
    /// Sublinear exponent σ (concave-convex) or δ (superlinear).
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub constants: GrowthConstants,
    pub beta: f64,
    /// Constant majorant `e` of `β F - f t`, clipped at 0.
    pub e: f64,
    pub ball_center: Point,
    pub ball_radius: f64,
    pub ball_nodes: Vec<usize>,
}

// Dyadic Gauss-Legendre rule for ∫₀¹ g(y) dy with a mild singularity at 0.
struct DyadicRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

const DYADIC_LEVELS: usize = 52;

impl DyadicRule {
    fn new() -> Self {
        let (x, w) = gauss_legendre(10);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for j in 0..DYADIC_LEVELS {
            let hi = 0.5f64.powi(j as i32);
            let lo = 0.5 * hi;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * (hi - lo) * (xi + 1.0));
                weights.push(0.5 * (hi - lo) * wi);
            }
        }
        DyadicRule { nodes, weights }
    }
}

thread_local! {
    static DYADIC: DyadicRule = DyadicRule::new();
}

impl LogTerm {
    fn f(&self, k: usize, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.coef * signed_pow(t, self.delta[k]) * pow((std::f64::consts::E + a).ln(), self.kappa[k])
    }

    /// `c1 |t|^δ / δ ∫₀¹ log^κ(e + |t| y^{1/δ}) dy`, from the substitution `s = |t| y^{1/δ}`.
    fn primitive(&self, k: usize, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        let (d, kap) = (self.delta[k], self.kappa[k]);
        let g = |y: f64| pow((std::f64::consts::E + a * pow(y, 1.0 / d)).ln(), kap);
        let integral = DYADIC.with(|rule| {
            let body: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&y, &w)| w * g(y)).sum();
            // The remaining piece [0, 2^-52] is bounded by its endpoint value.
            body + 0.5f64.powi(DYADIC_LEVELS as i32) * g(0.5f64.powi(DYADIC_LEVELS as i32 + 1))
        });
        self.coef * pow(a, d) / d * integral
    }
}

fn ball_of(mesh: &DomainMesh, center: &Option<Vec<f64>>, radius: Option<f64>) -> Result<(Point, f64)> {
    let c = match center {
        Some(v) => {
            if v.len() != mesh.dim() {
                return Err(Error::config("reaction.ball_center", "dimension mismatch"));
            }
            let mut p = [0.0; 2];
            p[..v.len()].copy_from_slice(v);
            p
        }
        None => mesh.center(),
    };
    let shortest = mesh.intervals().iter().map(|iv| iv.len()).fold(f64::INFINITY, f64::min);
    let r = radius.unwrap_or(0.25 * shortest);
    if !(r > 0.0) {
        return Err(Error::config("reaction.ball_radius", "must be positive"));
    }
    if !mesh.contains(&c) {
        return Err(Error::config("reaction.ball_center", "outside the domain"));
    }
    Ok((c, r))
}

fn point_of(v: &[f64], mesh: &DomainMesh, key: &str) -> Result<Point> {
    if v.len() != mesh.dim() {
        return Err(Error::config(key, "dimension mismatch"));
    }
    let mut p = [0.0; 2];
    p[..v.len()].copy_from_slice(v);
    Ok(p)
}

/// Radial cutoff equal to 1 on `B_{ε0}(x0)` and 0 outside `B_{1.5 ε0}(x0)`.
fn interp_exponent(mesh: &DomainMesh, center: &Point, eps0: f64, inner: &[f64], outer: &[f64]) -> Vec<f64> {
    (0..mesh.len())
        .map(|k| {
            let phi = plateau(mesh.distance(k, center), eps0, 1.5 * eps0);
            phi * inner[k] + (1.0 - phi) * outer[k]
        })
        .collect()
}

/// Log-spaced sample magnitudes in `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Sample magnitudes used for sampled checks and majorants on `[0, hi]`.
pub fn magnitude_samples(hi: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=400).map(|i| hi * i as f64 / 400.0).collect();
    t.extend(log_grid(1e-6, hi, 200));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

const MAJORANT_SAFETY: f64 = 1.05;

impl Reaction {
    pub fn build(mesh: &DomainMesh, fields: &ExponentField, cfg: &ReactionConfig) -> Result<Self> {
        let ex = *fields.extrema();
        let n = mesh.len();
        let (ball_center, ball_radius) = ball_of(mesh, &cfg.ball_center, cfg.ball_radius)?;
        let positive = |v: f64, key: &str| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, "must be positive"));
            }
            Ok(())
        };
        let nonneg = |v: f64, key: &str| -> Result<()> {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(key, "must be nonnegative"));
            }
            Ok(())
        };
        let alpha_cc = vec![0.5 * (ex.q_plus + ex.r1_minus); n];

        let mut ball = (ball_center, ball_radius);
        let (family, name, powers, log, sigma, alpha, constants);
        match &cfg.kind {
            ReactionKind::CcPower { c1, c2, delta } => {
                positive(*c1, "reaction.c1")?;
                nonneg(*c2, "reaction.c2")?;
                let d = delta.sample(mesh, "reaction.delta")?;
                let (d_minus, _) = extrema(&d);
                family = Family::ConcaveConvex;
                name = "cc-power";
                powers = vec![PowerTerm { coef: *c1, exp: d.clone() }, PowerTerm { coef: *c2, exp: fields.p.clone() }];
                log = None;
                let d_plus_ball = ball_max(mesh, &d, &ball)?;
                constants = GrowthConstants {
                    c1: c1 + c2,
                    c2: Some(c1 / d_minus),
                    c3: Some(c2 / ex.p_minus),
                    c4: Some(c1 * (ex.r1_minus / d_minus - 1.0)),
                    c5: Some(c2 * (ex.r1_minus / ex.p_minus - 1.0).max(0.0)),
                    c6: Some(c1 / d_plus_ball),
                    provenance: Provenance::ClosedForm,
                };
                sigma = d;
                alpha = alpha_cc;
            }
            ReactionKind::CcLog { c1, c2, delta, kappa, m } => {
                positive(*c1, "reaction.c1")?;
                nonneg(*c2, "reaction.c2")?;
                let d = delta.sample(mesh, "reaction.delta")?;
                let kap = kappa.sample(mesh, "reaction.kappa")?;
                let mm = m.sample(mesh, "reaction.m")?;
                if kap.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::config("reaction.kappa", "must be positive"));
                }
                if (0..n).any(|k| d[k] > mm[k] || mm[k] > fields.p[k]) {
                    return Err(Error::config("reaction.m", "needs delta <= m <= p"));
                }
                let (d_minus, _) = extrema(&d);
                let (m_minus, _) = extrema(&mm);
                let (_, kap_plus) = extrema(&kap);
                let lt = LogTerm { coef: *c1, delta: d.clone(), kappa: kap.clone() };
                // |t| <= 1: log^κ(e + |t|) <= log(e + 1)^{κ⁺}.
                let l1 = pow((std::f64::consts::E + 1.0).ln(), kap_plus);
                // |t| >= 1: sup of log^κ(e + t) t^{δ - p}, sampled.
                let mut s = 0.0f64;
                let mut growth = 0.0f64;
                let ts = log_grid(1.0, 1e8, 400);
                let small = log_grid(1e-8, 1.0, 200);
                for k in 0..n {
                    for &t in &ts {
                        let v = pow((std::f64::consts::E + t).ln(), kap[k]) * pow(t, d[k] - fields.p[k]);
                        s = s.max(v);
                    }
                    for &t in ts.iter().chain(&small) {
                        let v = lt.f(k, t) / (1.0 + pow(t, alpha_cc[k] - 1.0));
                        growth = growth.max(v);
                    }
                }
                let s = s * MAJORANT_SAFETY;
                let r = ex.r1_minus;
                let lin = c2 / m_minus;
                let lin4 = c2 * (r / m_minus - 1.0).max(0.0);
                family = Family::ConcaveConvex;
                name = "cc-log";
                let d_plus_ball = ball_max(mesh, &d, &ball)?;
                constants = GrowthConstants {
                    c1: growth * MAJORANT_SAFETY + c2,
                    c2: Some(c1 * l1 / d_minus + lin),
                    c3: Some(c1 * s / d_minus + lin),
                    c4: Some(r * c1 * l1 / d_minus + lin4),
                    c5: Some(r * c1 * s / d_minus + lin4),
                    c6: Some(c1 / d_plus_ball),
                    provenance: Provenance::SampledMajorant,
                };
                powers = vec![PowerTerm { coef: *c2, exp: mm }];
                log = Some(lt);
                sigma = d;
                alpha = alpha_cc;
            }
            ReactionKind::CcInterp { c1, delta, m, center, eps0 } => {
                positive(*c1, "reaction.c1")?;
                positive(*eps0, "reaction.eps0")?;
                let x0 = point_of(center, mesh, "reaction.center")?;
                let d = delta.sample(mesh, "reaction.delta")?;
                let mm = m.sample(mesh, "reaction.m")?;
                if (0..n).any(|k| d[k] > mm[k] || mm[k] > fields.p[k]) {
                    return Err(Error::config("reaction.m", "needs delta <= m <= p"));
                }
                let nn = interp_exponent(mesh, &x0, *eps0, &d, &mm);
                let (n_minus, _) = extrema(&nn);
                ball = (x0, *eps0);
                let d_plus_ball = ball_max(mesh, &d, &ball)?;
                family = Family::ConcaveConvex;
                name = "cc-interp";
                constants = GrowthConstants {
                    c1: *c1,
                    c2: Some(c1 / n_minus),
                    c3: Some(c1 / n_minus),
                    c4: Some(c1 * (ex.r1_minus / n_minus - 1.0)),
                    c5: Some(c1 * (ex.r1_minus / n_minus - 1.0)),
                    c6: Some(c1 / d_plus_ball),
                    provenance: Provenance::ClosedForm,
                };
                powers = vec![PowerTerm { coef: *c1, exp: nn }];
                log = None;
                sigma = d;
                alpha = alpha_cc;
            }
            ReactionKind::SlPower { c1, c2, delta } => {
                positive(*c1, "reaction.c1")?;
                nonneg(*c2, "reaction.c2")?;
                let d = delta.sample(mesh, "reaction.delta")?;
                family = Family::Superlinear;
                name = "sl-power";
                powers =
                    vec![PowerTerm { coef: *c1, exp: d.clone() }, PowerTerm { coef: *c2, exp: vec![ex.q_plus; n] }];
                log = None;
                alpha = superlinear_alpha(&d, &ex);
                constants = superlinear_constants(c1 + c2);
                sigma = d;
            }
            ReactionKind::SlSub { c1, c2, delta, m } => {
                positive(*c1, "reaction.c1")?;
                nonneg(*c2, "reaction.c2")?;
                let d = delta.sample(mesh, "reaction.delta")?;
                let mm = m.sample(mesh, "reaction.m")?;
                if (0..n).any(|k| !(mm[k] < fields.p[k]) || !(mm[k] > 1.0)) {
                    return Err(Error::config("reaction.m", "needs 1 < m < p"));
                }
                family = Family::Superlinear;
                name = "sl-sub";
                powers = vec![PowerTerm { coef: *c1, exp: d.clone() }, PowerTerm { coef: *c2, exp: mm }];
                log = None;
                alpha = superlinear_alpha(&d, &ex);
                constants = superlinear_constants(c1 + c2);
                sigma = d;
            }
            ReactionKind::SlInterp { c1, delta, center, eps0 } => {
                positive(*c1, "reaction.c1")?;
                positive(*eps0, "reaction.eps0")?;
                let x0 = point_of(center, mesh, "reaction.center")?;
                let d = delta.sample(mesh, "reaction.delta")?;
                let nn = interp_exponent(mesh, &x0, *eps0, &d, &vec![ex.q_plus; n]);
                ball = (x0, *eps0);
                family = Family::Superlinear;
                name = "sl-interp";
                alpha = superlinear_alpha(&nn, &ex);
                powers = vec![PowerTerm { coef: *c1, exp: nn }];
                log = None;
                constants = superlinear_constants(*c1);
                sigma = d;
            }
        }

        for (k, d) in sigma.iter().enumerate() {
            if !(*d > 1.0) {
                return Err(Error::config("reaction.delta", format!("must exceed 1 (node {k})")));
            }
        }
        if family == Family::Superlinear {
            let (_, a_plus) = extrema(&alpha);
            if !(a_plus < ex.r1_minus) {
                return Err(Error::config("reaction.delta", "growth exponent must stay below r1-"));
            }
        }
        let beta = cfg.beta.unwrap_or(ex.q_plus);
        if family == Family::Superlinear && !(beta >= ex.q_plus && beta < ex.r1_minus) {
            return Err(Error::config("reaction.beta", "must lie in [q+, r1-)"));
        }
        let ball_nodes: Vec<usize> =
            mesh.nodes_within(&ball.0, ball.1).into_iter().filter(|&k| !mesh.is_boundary(k)).collect();
        if ball_nodes.is_empty() {
            return Err(Error::DegenerateBall { radius: ball.1 });
        }
        let mut reaction = Reaction {
            family,
            name,
            powers,
            log,
            sigma,
            alpha,
            constants,
            beta,
            e: 0.0,
            ball_center: ball.0,
            ball_radius: ball.1,
            ball_nodes,
        };
        if family == Family::Superlinear {
            reaction.e = reaction.sampled_e(n);
        }
        Ok(reaction)
    }

    /// Sampled maximum of `β F - f t` over nodes and `|t| <= 10³`, clipped at 0.
    fn sampled_e(&self, n: usize) -> f64 {
        let ts = magnitude_samples(1e3);
        let mut e = 0.0f64;
        for k in 0..n {
            for &t in &ts {
                e = e.max(self.beta * self.primitive(k, t) - self.f(k, t) * t);
            }
        }
        e
    }

    /// `f(x_k, t)`.
    #[inline]
    pub fn f(&self, k: usize, t: f64) -> f64 {
        let mut v = 0.0;
        for term in &self.powers {
            if term.coef != 0.0 {
                v += term.coef * signed_pow(t, term.exp[k]);
            }
        }
        if let Some(l) = &self.log {
            v += l.f(k, t);
        }
        v
    }

    /// `F(x_k, t) = ∫₀ᵗ f(x_k, s) ds`.
    #[inline]
    pub fn primitive(&self, k: usize, t: f64) -> f64 {
        let a = t.abs();
        let mut v = 0.0;
        for term in &self.powers {
            if term.coef != 0.0 {
                v += term.coef * pow(a, term.exp[k]) / term.exp[k];
            }
        }
        if let Some(l) = &self.log {
            v += l.primitive(k, t);
        }
        v
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        extrema(&self.sigma)
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        extrema(&self.alpha)
    }
}

fn ball_max(mesh: &DomainMesh, v: &[f64], ball: &(Point, f64)) -> Result<f64> {
    crate::fields::local_extrema_over_ball(mesh, v, &ball.0, ball.1).map(|(_, hi)| hi)
}

fn superlinear_alpha(d: &[f64], ex: &crate::fields::Extrema) -> Vec<f64> {
    let (_, d_plus) = extrema(d);
    vec![d_plus.max(0.5 * (ex.q_plus + ex.r1_minus)); d.len()]
}

fn superlinear_constants(c1: f64) -> GrowthConstants {
    GrowthConstants { c1, c2: None, c3: None, c4: None, c5: None, c6: None, provenance: Provenance::ClosedForm }
}

/// Critical term `B(x, t) = c1 |t|^{r1-2} t + c2 a^{r2/q} |t|^{r2-2} t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalTerm {
    c1: Vec<f64>,
    r1: Vec<f64>,
    c2_eff: Vec<f64>,
    r2: Vec<f64>,
}

impl CriticalTerm {
    pub fn new(fields: &ExponentField) -> Self {
        let c2_eff = (0..fields.len()).map(|k| fields.c2[k] * pow(fields.a[k], fields.r2[k] / fields.q[k])).collect();
        CriticalTerm { c1: fields.c1.clone(), r1: fields.r1.clone(), c2_eff, r2: fields.r2.clone() }
    }

    #[inline]
    pub fn b(&self, k: usize, t: f64) -> f64 {
        let mut v = self.c1[k] * signed_pow(t, self.r1[k]);
        if self.c2_eff[k] != 0.0 {
            v += self.c2_eff[k] * signed_pow(t, self.r2[k]);
        }
        v
    }

    /// `B̂(x, t) = c1 |t|^{r1} / r1 + c2 a^{r2/q} |t|^{r2} / r2`.
    #[inline]
    pub fn b_hat(&self, k: usize, t: f64) -> f64 {
        let a = t.abs();
        let mut v = self.c1[k] * pow(a, self.r1[k]) / self.r1[k];
        if self.c2_eff[k] != 0.0 {
            v += self.c2_eff[k] * pow(a, self.r2[k]) / self.r2[k];
        }
        v
    }
}

/// Outcome of one sampled structural check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionCheck {
    pub name: String,
    pub passed: bool,
    /// Worst signed margin (negative means violated).
    pub worst: f64,
}

/// Relative error of the centered difference of `F` against `f`.
fn primitive_error(r: &Reaction, k: usize, t: f64) -> f64 {
    let h = 1e-5 * t.abs().max(1e-3);
    let fd = (r.primitive(k, t + h) - r.primitive(k, t - h)) / (2.0 * h);
    let f = r.f(k, t);
    (fd - f).abs() / f.abs().max(1e-300)
}

/// Samples the structural hypotheses of the reaction and critical term.
pub fn check_reaction(
    mesh: &DomainMesh,
    fields: &ExponentField,
    r: &Reaction,
    crit: &CriticalTerm,
) -> Vec<ReactionCheck> {
    let ex = fields.extrema();
    let n = mesh.len();
    let nodes: Vec<usize> = (0..n).step_by((n / 64).max(1)).collect();
    let ts = magnitude_samples(10.0);
    let mut out = Vec::new();
    let mut push = |name: &str, worst: f64| {
        out.push(ReactionCheck { name: name.into(), passed: worst >= -1e-12, worst });
    };

    let mut odd = f64::INFINITY;
    let mut growth = f64::INFINITY;
    let mut deriv = f64::INFINITY;
    let mut bderiv = f64::INFINITY;
    for &k in &nodes {
        for &t in &ts {
            let scale = r.f(k, t).abs().max(1.0);
            odd = odd.min(-(r.f(k, -t) + r.f(k, t)).abs() / scale);
            let c1 = r.constants.c1;
            growth = growth.min(c1 * (1.0 + pow(t, r.alpha[k] - 1.0)) - r.f(k, t).abs());
            if t > 1e-4 {
                deriv = deriv.min(1e-6 - primitive_error(r, k, t));
                let h = 1e-5 * t;
                let fd = (crit.b_hat(k, t + h) - crit.b_hat(k, t - h)) / (2.0 * h);
                let b = crit.b(k, t);
                bderiv = bderiv.min(1e-6 - (fd - b).abs() / b.abs().max(1e-300));
            }
        }
    }
    push("oddness", odd);
    push("growth bound", growth);
    push("primitive derivative", deriv);
    push("critical primitive derivative", bderiv);
    let bzero = nodes.iter().map(|&k| -crit.b_hat(k, 0.0).abs()).fold(0.0, f64::min);
    push("critical primitive at zero", bzero);
    let (a_minus, a_plus) = r.alpha_range();
    push("q+ < alpha-", a_minus - ex.q_plus - 1e-12);
    push("alpha < r1", (0..n).map(|k| fields.r1[k] - r.alpha[k]).fold(f64::INFINITY, f64::min) - 1e-12);
    let _ = a_plus;

    match r.family {
        Family::ConcaveConvex => {
            let (_, s_plus) = r.sigma_range();
            push("sigma+ < p-", ex.p_minus - s_plus - 1e-12);
            let c = &r.constants;
            let (c2, c3, c4, c5, c6) = (c.c2.unwrap(), c.c3.unwrap(), c.c4.unwrap(), c.c5.unwrap(), c.c6.unwrap());
            let mut upper = f64::INFINITY;
            let mut ar = f64::INFINITY;
            let mut lower = f64::INFINITY;
            for &k in &nodes {
                for &t in &ts {
                    let big = r.primitive(k, t);
                    let rhs = c2 * pow(t, r.sigma[k]) + c3 * pow(t, fields.p[k]);
                    upper = upper.min((rhs - big).min(big) / rhs.max(1.0));
                    let lhs = ex.r1_minus * big - r.f(k, t) * t;
                    let rhs = c4 * pow(t, r.sigma[k]) + c5 * pow(t, fields.p[k]);
                    ar = ar.min((rhs - lhs) / rhs.abs().max(1.0));
                }
            }
            for &k in &r.ball_nodes {
                for &t in &ts {
                    let big = r.primitive(k, t);
                    lower = lower.min((big - c6 * pow(t, r.sigma[k])) / big.max(1.0));
                }
            }
            push("0 <= F <= C2|t|^sigma + C3|t|^p", upper);
            push("r1- F - f t <= C4|t|^sigma + C5|t|^p", ar);
            push("C6|t|^sigma <= F on B", lower);
        }
        Family::Superlinear => {
            push("q+ <= beta", r.beta - ex.q_plus);
            push("beta < r1-", ex.r1_minus - r.beta - 1e-12);
            let mut f5 = f64::INFINITY;
            for &k in &nodes {
                for &t in &magnitude_samples(1e3) {
                    let v = r.beta * r.primitive(k, t) - r.f(k, t) * t;
                    f5 = f5.min((r.e - v) / v.abs().max(1.0) + 1e-12);
                }
            }
            push("beta F - f t <= e", f5);
            let q_ball = r.ball_nodes.iter().map(|&k| fields.q[k]).fold(f64::NEG_INFINITY, f64::max);
            let mut trend = f64::INFINITY;
            for &k in &r.ball_nodes {
                let vals: Vec<f64> =
                    [10.0, 100.0, 1000.0].iter().map(|&t| r.primitive(k, t) / pow(t, q_ball)).collect();
                trend = trend.min((vals[1] - vals[0]).min(vals[2] - vals[1]));
            }
            // Strictly increasing is required, so a flat trend fails.
            out.push(ReactionCheck {
                name: "F / |t|^{q_B+} increasing on B".into(),
                passed: trend > 0.0,
                worst: trend,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldsConfig;
    use crate::mesh::Interval;

    fn setup() -> (DomainMesh, ExponentField) {
        let m = DomainMesh::new(&[Interval::new(0.0, 1.0)], &[33]).unwrap();
        let cfg = FieldsConfig {
            p: FieldSpec::constant(2.0),
            q: FieldSpec::constant(2.4),
            a: FieldSpec::constant(1.0),
            c1: FieldSpec::constant(1.0),
            c2: FieldSpec::constant(1.0),
            r1: FieldSpec::Critical,
            r2: FieldSpec::Matched,
        };
        let f = ExponentField::build(&m, &cfg, 4, true).unwrap();
        (m, f)
    }

    fn rc(kind: ReactionKind) -> ReactionConfig {
        ReactionConfig { kind, ball_center: None, ball_radius: None, beta: None }
    }

    fn all_pass(m: &DomainMesh, f: &ExponentField, r: &Reaction) {
        let checks = check_reaction(m, f, r, &CriticalTerm::new(f));
        for c in &checks {
            assert!(c.passed, "{}: {c:?}", r.name);
        }
    }

    #[test]
    fn concave_convex_catalogue_passes_checks() {
        let (m, f) = setup();
        let d = FieldSpec::Affine { base: 1.3, slope: vec![0.2] };
        for kind in [
            ReactionKind::CcPower { c1: 1.0, c2: 0.5, delta: d.clone() },
            ReactionKind::CcLog {
                c1: 1.0,
                c2: 0.5,
                delta: d.clone(),
                kappa: FieldSpec::constant(1.5),
                m: FieldSpec::constant(1.8),
            },
            ReactionKind::CcInterp {
                c1: 1.0,
                delta: FieldSpec::constant(1.4),
                m: FieldSpec::constant(1.9),
                center: vec![0.5],
                eps0: 0.2,
            },
        ] {
            let r = Reaction::build(&m, &f, &rc(kind)).unwrap();
            assert_eq!(r.family, Family::ConcaveConvex);
            all_pass(&m, &f, &r);
        }
    }

    #[test]
    fn superlinear_catalogue_passes_checks() {
        let (m, f) = setup();
        for kind in [
            ReactionKind::SlPower { c1: 1.0, c2: 1.0, delta: FieldSpec::constant(3.0) },
            ReactionKind::SlInterp { c1: 1.0, delta: FieldSpec::constant(3.0), center: vec![0.5], eps0: 0.2 },
        ] {
            let r = Reaction::build(&m, &f, &rc(kind)).unwrap();
            // Exact zero up to roundoff where the exponent equals q+.
            assert!(r.e < 1e-6);
            all_pass(&m, &f, &r);
        }
        let r = Reaction::build(
            &m,
            &f,
            &rc(ReactionKind::SlSub { c1: 1.0, c2: 0.5, delta: FieldSpec::constant(3.0), m: FieldSpec::constant(1.5) }),
        )
        .unwrap();
        assert!(r.e > 0.0);
        all_pass(&m, &f, &r);
    }

    #[test]
    fn cc_power_constants() {
        let (m, f) = setup();
        let r =
            Reaction::build(&m, &f, &rc(ReactionKind::CcPower { c1: 2.0, c2: 0.0, delta: FieldSpec::constant(1.5) }))
                .unwrap();
        let c = &r.constants;
        assert_eq!(c.c1, 2.0);
        assert!((c.c2.unwrap() - 2.0 / 1.5).abs() < 1e-15);
        assert_eq!(c.c3, Some(0.0));
        assert!((c.c4.unwrap() - 2.0 * (4.0 / 1.5 - 1.0)).abs() < 1e-12);
        assert_eq!(c.c5, Some(0.0));
    }

    #[test]
    fn log_primitive_matches_fine_quadrature() {
        let (m, f) = setup();
        let r = Reaction::build(
            &m,
            &f,
            &rc(ReactionKind::CcLog {
                c1: 1.0,
                c2: 0.0,
                delta: FieldSpec::constant(1.5),
                kappa: FieldSpec::constant(2.0),
                m: FieldSpec::constant(1.8),
            }),
        )
        .unwrap();
        let t = 3.0;
        let n = 2_000_000;
        let h = t / n as f64;
        let quad: f64 = (0..n).map(|i| r.f(5, (i as f64 + 0.5) * h) * h).sum();
        assert!((quad - r.primitive(5, t)).abs() < 1e-8 * quad);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let (m, f) = setup();
        assert!(matches!(
            Reaction::build(&m, &f, &rc(ReactionKind::CcPower { c1: 0.0, c2: 0.0, delta: FieldSpec::constant(1.5) })),
            Err(Error::Config { .. })
        ));
        let mut cfg = rc(ReactionKind::SlPower { c1: 1.0, c2: 0.0, delta: FieldSpec::constant(3.0) });
        cfg.beta = Some(5.0);
        assert!(Reaction::build(&m, &f, &cfg).is_err());
    }

    #[test]
    fn critical_term_primitive() {
        let (_, f) = setup();
        let c = CriticalTerm::new(&f);
        assert_eq!(c.b_hat(0, 0.0), 0.0);
        assert_eq!(c.b(0, 0.0), 0.0);
        let t = 0.7;
        let h = 1e-6;
        let fd = (c.b_hat(3, t + h) - c.b_hat(3, t - h)) / (2.0 * h);
        assert!((fd - c.b(3, t)).abs() < 1e-8);
        assert_eq!(c.b(3, -t), -c.b(3, t));
    }
}
