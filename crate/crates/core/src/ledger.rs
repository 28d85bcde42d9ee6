//! Explicit constants and thresholds: empirical embedding constants, the
//! concave-convex window `λ*`, the root pair of `g_λ`, and compactness levels.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::fields::extrema;
use crate::mesh::{magnitude, DomainMesh, Point};
use crate::modular::{luxemburg_norm, pow, signed_pow, ModularSpec};
use crate::reaction::{Family, Provenance};
use crate::rng::{low_mode_field, seeded};
use crate::search::box_sine_mode;
use crate::smooth::plateau;

/// Divisor applied to the sampled Sobolev quotient.
pub const S_SAFETY: f64 = 1.05;
/// Multiplier applied to sampled embedding ratios.
pub const EMBEDDING_SAFETY: f64 = 1.25;
/// Random low-mode starts in the estimation family.
pub const RANDOM_STARTS: usize = 20;
const KAPPA_ITERS: usize = 200;

/// Zero-trace bump `η(|x - x0| / r)` with plateau on the half radius.
pub fn bump(mesh: &DomainMesh, x0: &Point, r: f64) -> Vec<f64> {
    let mut u: Vec<f64> = (0..mesh.len()).map(|k| plateau(mesh.distance(k, x0) / r, 0.5, 1.0)).collect();
    for (k, v) in u.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *v = 0.0;
        }
    }
    u
}

/// Multi-start family: random low modes, the box sine mode, and centered bumps at
/// dyadic radii that are resolved (`r >= 4h`) and fit inside the box.
pub fn estimation_family(mesh: &DomainMesh, seed: u64, extras: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    let mut family: Vec<Vec<f64>> = (0..RANDOM_STARTS).map(|_| low_mode_field(mesh, &mut rng, 4)).collect();
    family.push(box_sine_mode(mesh));
    let center = mesh.center();
    let side = mesh.intervals().iter().map(|iv| iv.len()).fold(f64::INFINITY, f64::min);
    for j in 1..=4 {
        let r = side / 2f64.powi(j);
        let fits = (0..mesh.dim()).all(|a| {
            let iv = mesh.intervals()[a];
            center[a] - r >= iv.lo && center[a] + r <= iv.hi
        });
        if r >= 4.0 * mesh.max_spacing() && fits {
            family.push(bump(mesh, &center, r));
        }
    }
    family.extend(extras.iter().cloned());
    family.retain(|u| u.iter().any(|v| *v != 0.0));
    family
}

fn rayleigh(mesh: &DomainMesh, p: &[f64], u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let g = mesh.gradient(u)?;
    let w = mesh.weights();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut flux = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let m = magnitude(&g[k]);
        num += w[k] * pow(m, p[k]);
        den += w[k] * pow(u[k].abs(), p[k]);
        let c = if m > 0.0 { w[k] * p[k] * pow(m, p[k] - 2.0) } else { 0.0 };
        flux.push([c * g[k][0], c * g[k][1]]);
    }
    if !(den > 0.0) {
        return Err(Error::Numeric("degenerate start in the quotient".into()));
    }
    let r = num / den;
    let dn = mesh.gradient_adjoint(&flux)?;
    let grad = (0..u.len())
        .map(|k| if mesh.is_boundary(k) { 0.0 } else { (dn[k] / w[k] - r * p[k] * signed_pow(u[k], p[k])) / den })
        .collect();
    Ok((r, grad))
}

/// Upper estimate of `inf ∫|∇φ|^p / ∫|φ|^p` by normalized gradient descent from every
/// start, followed by an amplitude sweep. Returns the quotient and its witness.
pub fn estimate_kappa1(mesh: &DomainMesh, p: &[f64], family: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in family {
        let Ok((mut r, mut g)) = rayleigh(mesh, p, start) else { continue };
        let mut u = start.clone();
        let mut step = 0.1;
        for _ in 0..KAPPA_ITERS {
            let gn = mesh.l2_norm(&g);
            if !(gn > 0.0) {
                break;
            }
            let un = mesh.l2_norm(&u);
            let mut accepted = false;
            for _ in 0..60 {
                let s = step * un / gn;
                let trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - s * b).collect();
                if let Ok((rt, gt)) = rayleigh(mesh, p, &trial) {
                    if rt <= r - 1e-4 * s * gn * gn {
                        u = trial;
                        r = rt;
                        g = gt;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            step = (step * 2.0).min(1.0);
        }
        for i in 0..=60 {
            let s = 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0);
            let v: Vec<f64> = u.iter().map(|x| s * x).collect();
            if let Ok((rs, _)) = rayleigh(mesh, p, &v) {
                if rs < r {
                    r = rs;
                    u = v;
                }
            }
        }
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, u));
        }
    }
    best.ok_or_else(|| Error::Numeric("every start of the quotient search is degenerate".into()))
}

/// Raw sampled constants before safety factors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSamples {
    /// `min ‖∇φ‖_𝓗 / ‖φ‖_𝓑`.
    pub s_hat: f64,
    /// `max max(‖u‖_σ, ‖u‖_𝓑) / ‖u‖`.
    pub c8_raw: f64,
    /// `max ‖u‖_α / ‖u‖`.
    pub c_alpha_raw: f64,
}

pub fn estimate_embeddings(problem: &Problem, family: &[Vec<f64>]) -> Result<EmbeddingSamples> {
    let mesh = &problem.mesh;
    let h = ModularSpec::h_cal(&problem.fields)?;
    let b = ModularSpec::b_cal(&problem.fields)?;
    let sigma = ModularSpec::unweighted(problem.reaction.sigma.clone())?;
    let alpha = ModularSpec::unweighted(problem.reaction.alpha.clone())?;
    let mut s_hat = f64::INFINITY;
    let mut c8_raw = 0.0f64;
    let mut c_alpha_raw = 0.0f64;
    for u in family {
        let grad: Vec<f64> = mesh.gradient(u)?.iter().map(magnitude).collect();
        let n = luxemburg_norm(mesh, &h, &grad)?;
        let nb = luxemburg_norm(mesh, &b, u)?;
        if !(n > 0.0) || !(nb > 0.0) {
            continue;
        }
        s_hat = s_hat.min(n / nb);
        let ns = luxemburg_norm(mesh, &sigma, u)?;
        c8_raw = c8_raw.max(ns.max(nb) / n);
        c_alpha_raw = c_alpha_raw.max(luxemburg_norm(mesh, &alpha, u)? / n);
    }
    if !s_hat.is_finite() {
        return Err(Error::Numeric("every start of the embedding search is degenerate".into()));
    }
    Ok(EmbeddingSamples { s_hat, c8_raw, c_alpha_raw })
}

/// `K₀ = (m0/q⁺ - M(t0)/r1⁻) / 4`.
pub fn k0(m0: f64, m_t0: f64, q_plus: f64, r1_minus: f64) -> Result<f64> {
    let v = 0.25 * (m0 / q_plus - m_t0 / r1_minus);
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config("kirchhoff.t0", format!("K0 = {v} is not positive")))
    }
}

/// `h(t) = a0 t^{q⁺-σ⁻} - b0 t^{r1⁻-σ⁻}`, whose level sets give the roots of `g_λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootProfile {
    pub a0: f64,
    pub b0: f64,
    pub q_plus: f64,
    pub sigma_minus: f64,
    pub r1_minus: f64,
    pub t_star: f64,
    pub lambda3: f64,
}

impl RootProfile {
    pub fn new(a0: f64, b0: f64, q_plus: f64, sigma_minus: f64, r1_minus: f64) -> Result<Self> {
        if !(sigma_minus < q_plus && q_plus < r1_minus) {
            return Err(Error::Domain(format!("need sigma- < q+ < r1-, got {sigma_minus}, {q_plus}, {r1_minus}")));
        }
        if !(a0 > 0.0 && b0 > 0.0) {
            return Err(Error::Domain("a0 and b0 must be positive".into()));
        }
        let (q, s, r) = (q_plus, sigma_minus, r1_minus);
        let t_star = ((q - s) * a0 / ((r - s) * b0)).powf(1.0 / (r - q));
        let lambda3 = a0 * (r - q) / (r - s) * t_star.powf(q - s);
        Ok(RootProfile { a0, b0, q_plus, sigma_minus, r1_minus, t_star, lambda3 })
    }

    pub fn h(&self, t: f64) -> f64 {
        self.a0 * t.powf(self.q_plus - self.sigma_minus) - self.b0 * t.powf(self.r1_minus - self.sigma_minus)
    }

    fn bisect(&self, lambda: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.h(mid) < lambda) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `t1 < t* < t2` with `h(t_i) = λ`.
    pub fn roots(&self, lambda: f64) -> Result<(f64, f64)> {
        if !(lambda > 0.0) || lambda >= self.lambda3 {
            return Err(Error::NoRoots { lambda, lambda3: self.lambda3 });
        }
        let t1 = self.bisect(lambda, 0.0, self.t_star, true);
        let mut t_max = 2.0 * self.t_star;
        while self.h(t_max) >= lambda {
            t_max *= 2.0;
        }
        let t2 = self.bisect(lambda, self.t_star, t_max, false);
        Ok((t1, t2))
    }
}

/// Ledger value serialized as a number, or `"inf"` for an unbounded threshold.
mod value_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected value string `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEntry {
    pub name: String,
    #[serde(with = "value_serde")]
    pub value: f64,
    pub provenance: Provenance,
}

pub const LEDGER_SCHEMA: &str = "dphase-ledger/1";

/// Flat serialized ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerReport {
    pub schema: String,
    pub entries: Vec<LedgerEntry>,
}

impl LedgerReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: LedgerReport = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if r.schema != LEDGER_SCHEMA {
            return Err(Error::Parse(format!("unsupported ledger schema `{}`", r.schema)));
        }
        if let Some(e) = r.entries.iter().find(|e| e.value.is_nan() || e.value == f64::NEG_INFINITY) {
            return Err(Error::Parse(format!("entry `{}` has no finite value", e.name)));
        }
        Ok(r)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }
}

/// Concave-convex thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda_star1: f64,
    pub lambda_star2: f64,
    pub lambda_star: f64,
    pub profile: RootProfile,
    /// Upper bound `t1(λ)` must stay under for `λ < λ₄`.
    pub b4: f64,
    pub a_young: f64,
    pub b_young: f64,
    /// `K` of the Young optimization.
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    pub family: Family,
    pub growth_provenance: Provenance,
    pub kappa1_hat: f64,
    pub s_hat: f64,
    /// `S_hat / 1.05`, used downstream.
    pub s: f64,
    pub c8_raw: f64,
    pub c8: f64,
    pub c_alpha: f64,
    pub c1: f64,
    pub c9: f64,
    pub m0: f64,
    pub t0: f64,
    pub m_t0: f64,
    pub k0: f64,
    pub p_minus: f64,
    pub q_plus: f64,
    pub r1_minus: f64,
    pub r2_plus: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub alpha_plus: f64,
    pub ell_minus: f64,
    pub ell_plus: f64,
    pub norm_one_ell_conj: f64,
    pub n1: f64,
    pub n2: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// `K₀ min{S^{n1}, S^{n2}} min{m0^{τ1}, m0^{τ2}}`.
    pub q_level: f64,
    pub beta: f64,
    pub e: f64,
    pub volume: f64,
    pub window: Option<Window>,
}

/// `t^{n}` extremum pair `min{t^{a}, t^{b}}`.
fn min_pow(t: f64, a: f64, b: f64) -> f64 {
    t.powf(a).min(t.powf(b))
}

impl Ledger {
    /// Estimates the empirical constants on the standard family plus `extras`, then
    /// evaluates every closed form.
    pub fn build(problem: &Problem, seed: u64, extras: &[Vec<f64>]) -> Result<Self> {
        let mesh = &problem.mesh;
        let f = &problem.fields;
        let ex = *f.extrema();
        let family = estimation_family(mesh, seed, extras);
        let (kappa1_hat, _) = estimate_kappa1(mesh, &f.p, &family)?;
        let emb = estimate_embeddings(problem, &family)?;
        let r = &problem.reaction;
        let kir = &problem.kirchhoff;
        let (sigma_minus, sigma_plus) = r.sigma_range();
        let (_, alpha_plus) = r.alpha_range();

        let s = emb.s_hat / S_SAFETY;
        let c8 = (EMBEDDING_SAFETY * emb.c8_raw).max(1.0);
        let c_alpha = EMBEDDING_SAFETY * emb.c_alpha_raw;
        let c1 = r.constants.c1;
        let c9 = c1 * c_alpha.powf(alpha_plus);
        let m0 = kir.m0();
        let m_t0 = kir.m_t0();
        let k0 = k0(m0, m_t0, ex.q_plus, ex.r1_minus)?;

        let ps = f.p_star();
        let qs = f.q_star();
        let n = mesh.len();
        let (n1, _) = extrema(&(0..n).map(|k| f.p[k] * qs[k] / (qs[k] - f.p[k])).collect::<Vec<_>>());
        let (_, n2) = extrema(&(0..n).map(|k| f.q[k] * ps[k] / (ps[k] - f.q[k])).collect::<Vec<_>>());
        let (tau1, _) = extrema(&(0..n).map(|k| f.p[k] / (qs[k] - f.p[k])).collect::<Vec<_>>());
        let (_, tau2) = extrema(&(0..n).map(|k| f.q[k] / (ps[k] - f.q[k])).collect::<Vec<_>>());

        let ell: Vec<f64> = (0..n).map(|k| f.p[k] / r.sigma[k]).collect();
        let (ell_minus, ell_plus) = extrema(&ell);
        let conj: Vec<f64> = ell.iter().map(|l| l / (l - 1.0)).collect();
        let norm_one_ell_conj = if ell_minus > 1.0 {
            luxemburg_norm(mesh, &ModularSpec::unweighted(conj)?, &vec![1.0; n])?
        } else {
            f64::INFINITY
        };
        let q_level = k0 * min_pow(s, n1, n2) * min_pow(m0, tau1, tau2);

        let mut ledger = Ledger {
            family: r.family,
            growth_provenance: r.constants.provenance,
            kappa1_hat,
            s_hat: emb.s_hat,
            s,
            c8_raw: emb.c8_raw,
            c8,
            c_alpha,
            c1,
            c9,
            m0,
            t0: kir.t0,
            m_t0,
            k0,
            p_minus: ex.p_minus,
            q_plus: ex.q_plus,
            r1_minus: ex.r1_minus,
            r2_plus: ex.r2_plus,
            sigma_minus,
            sigma_plus,
            alpha_plus,
            ell_minus,
            ell_plus,
            norm_one_ell_conj,
            n1,
            n2,
            tau1,
            tau2,
            q_level,
            beta: r.beta,
            e: r.e,
            volume: mesh.volume(),
            window: None,
        };
        if let (Some(c2), Some(c3), Some(c4), Some(c5)) =
            (r.constants.c2, r.constants.c3, r.constants.c4, r.constants.c5)
        {
            ledger.window = Some(ledger.window(c2, c3, c4, c5)?);
        }
        Ok(ledger)
    }

    fn window(&self, c2: f64, c3: f64, c4: f64, c5: f64) -> Result<Window> {
        let (q, r1, pm) = (self.q_plus, self.r1_minus, self.p_minus);
        let lambda1 = if c4 + c5 > 0.0 { self.kappa1_hat * r1 * self.k0 / (c4 + c5) } else { f64::INFINITY };
        let lambda2 = if c3 > 0.0 { self.m0 * self.kappa1_hat / (2.0 * q * c3) } else { f64::INFINITY };
        let a0 = self.m0 / (2.0 * q * c2 * self.c8.powf(self.sigma_plus));
        let b0 = self.c8.powf(self.r2_plus - self.sigma_plus) / (c2 * r1);
        let profile = RootProfile::new(a0, b0, q, self.sigma_minus, r1)?;

        let b4 = (2.0 * q)
            .powf(-1.0 / pm)
            .min((profile.t_star.powf(q) / (2.0 * q)).powf(1.0 / pm))
            .min(self.t0.powf(1.0 / pm));
        // t1 increases with λ, so bisect on the predicate t1(λ) < b4.
        let (mut lo, mut hi) = (0.0, profile.lambda3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if profile.roots(mid)?.0 < b4 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda4 = lo;

        let a_young = self.k0 * self.kappa1_hat;
        let b_young = 2.0 * c4 / r1 * self.norm_one_ell_conj;
        let young_k =
            |l: f64| l.powf(-l / (l - 1.0)) * (l - 1.0) * a_young.powf(-1.0 / (l - 1.0)) * b_young.powf(l / (l - 1.0));
        let k = if b_young == 0.0 { 0.0 } else { young_k(self.ell_minus).max(young_k(self.ell_plus)) };
        let lambda_star2 = if k == 0.0 {
            f64::INFINITY
        } else {
            [self.ell_minus, self.ell_plus]
                .iter()
                .map(|l| (self.q_level / k).powf((l - 1.0) / l))
                .fold(f64::INFINITY, f64::min)
        };
        let lambda_star1 = lambda1.min(lambda2).min(profile.lambda3).min(lambda4);
        let lambda_star = lambda_star1.min(lambda_star2);
        if !(lambda_star > 0.0) {
            return Err(Error::config("reaction", "the concave-convex window is empty"));
        }
        Ok(Window {
            c2,
            c3,
            c4,
            c5,
            lambda1,
            lambda2,
            lambda3: profile.lambda3,
            lambda4,
            lambda_star1,
            lambda_star2,
            lambda_star,
            profile,
            b4,
            a_young,
            b_young,
            k,
        })
    }

    fn require_window(&self) -> Result<&Window> {
        self.window
            .as_ref()
            .ok_or_else(|| Error::config("reaction.kind", "concave-convex thresholds need a concave-convex reaction"))
    }

    pub fn lambda_star(&self) -> Result<f64> {
        Ok(self.require_window()?.lambda_star)
    }

    pub fn roots(&self, lambda: f64) -> Result<(f64, f64)> {
        self.require_window()?.profile.roots(lambda)
    }

    /// `g_λ(t) = m0 t^{q⁺}/(2q⁺) - λ C2 C8^{σ⁺} t^{σ⁻} - C8^{r2⁺} t^{r1⁻}/r1⁻`.
    pub fn g_lambda(&self, lambda: f64, t: f64) -> Result<f64> {
        let w = self.require_window()?;
        Ok(self.m0 / (2.0 * self.q_plus) * t.powf(self.q_plus)
            - lambda * w.c2 * self.c8.powf(self.sigma_plus) * t.powf(self.sigma_minus)
            - self.c8.powf(self.r2_plus) / self.r1_minus * t.powf(self.r1_minus))
    }

    /// Compactness threshold of the concave-convex functional.
    pub fn ps_level_cc(&self, lambda: f64) -> f64 {
        let k = self.window.as_ref().map_or(0.0, |w| w.k);
        let e = |l: f64| lambda.powf(l / (l - 1.0));
        self.q_level - k * e(self.ell_minus).max(e(self.ell_plus))
    }

    /// Compactness threshold of `Ψ_θ`.
    pub fn ps_level_sl(&self, theta: f64) -> f64 {
        (1.0 / self.beta - 1.0 / self.r1_minus)
            * min_pow(self.s, self.n1, self.n2)
            * min_pow(theta, -self.tau1, -self.tau2)
            - self.e * self.volume / self.beta
    }

    /// Upper bound `C_*(R)` of the level on a ball of radius `R` in `X_k`.
    pub fn c_lower_star(&self, r: f64) -> Result<f64> {
        if !(r > 1.0) {
            return Err(Error::Domain(format!("R = {r} must exceed 1")));
        }
        Ok(r.powf(self.q_plus) / self.p_minus
            + 2.0 * self.c9 * r.powf(self.alpha_plus)
            + 2.0 * self.c1 * (self.volume + 1.0)
            + 1.0 / self.p_minus)
    }

    /// `C*(R) = r1⁻ R^{p⁻-r2⁺} / (2q⁺(1 + S^{-r2⁺}))`.
    pub fn c_upper_star(&self, r: f64) -> Result<f64> {
        if !(r > 1.0) {
            return Err(Error::Domain(format!("R = {r} must exceed 1")));
        }
        Ok(self.r1_minus / (2.0 * self.q_plus * (1.0 + self.s.powf(-self.r2_plus)))
            * r.powf(self.p_minus - self.r2_plus))
    }

    /// Largest feasible `θ` with `θ <= C*(R)` and `C_*(R) < ps_level_sl(θ)`.
    pub fn theta1(&self, r: f64) -> Result<f64> {
        let lower = self.c_lower_star(r)?;
        let cap = self.c_upper_star(r)?;
        if !(1.0 / self.beta > 1.0 / self.r1_minus) {
            return Err(Error::config("reaction.beta", "beta must be below r1-"));
        }
        let feasible = |t: f64| lower < self.ps_level_sl(t);
        if feasible(cap) {
            return Ok(cap);
        }
        let mut lo = cap;
        let mut steps = 0;
        while !feasible(lo) {
            lo *= 0.5;
            steps += 1;
            if steps > 2000 || lo == 0.0 {
                return Err(Error::Numeric("no feasible theta found".into()));
            }
        }
        let mut hi = (2.0 * lo).min(cap);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Flat report with provenance tags. Functions of `λ` are sampled at `λ*/2`.
    pub fn report(&self) -> Result<LedgerReport> {
        use Provenance::{ClosedForm as C, Empirical as E};
        let g = self.growth_provenance;
        let mut entries = Vec::new();
        let mut put = |name: &str, value: f64, provenance: Provenance| {
            entries.push(LedgerEntry { name: name.to_string(), value, provenance });
        };
        put("kappa1_hat", self.kappa1_hat, E);
        put("S_hat", self.s_hat, E);
        put("S", self.s, E);
        put("C8_hat", self.c8, E);
        put("C_alpha_hat", self.c_alpha, E);
        put("C1", self.c1, g);
        put("C9", self.c9, E);
        put("m0", self.m0, C);
        put("t0", self.t0, C);
        put("M_t0", self.m_t0, C);
        put("K0", self.k0, C);
        put("n1", self.n1, C);
        put("n2", self.n2, C);
        put("tau1", self.tau1, C);
        put("tau2", self.tau2, C);
        put("beta", self.beta, C);
        put("e", self.e, g);
        if let Some(w) = &self.window {
            put("C2", w.c2, g);
            put("C3", w.c3, g);
            put("C4", w.c4, g);
            put("C5", w.c5, g);
            put("a0", w.profile.a0, E);
            put("b0", w.profile.b0, E);
            put("t_star", w.profile.t_star, E);
            put("ell_minus", self.ell_minus, C);
            put("ell_plus", self.ell_plus, C);
            put("norm_one_ell_conj", self.norm_one_ell_conj, C);
            put("lambda1", w.lambda1, E);
            put("lambda2", w.lambda2, E);
            put("lambda3", w.lambda3, E);
            put("lambda4", w.lambda4, E);
            put("K", w.k, E);
            put("lambda_star1", w.lambda_star1, E);
            put("lambda_star2", w.lambda_star2, E);
            put("lambda_star", w.lambda_star, E);
            let half = 0.5 * w.lambda_star;
            let (t1, t2) = w.profile.roots(half)?;
            put("t1_of_lambda_star_half", t1, E);
            put("t2_of_lambda_star_half", t2, E);
            put("ps_level_cc_of_lambda_star_half", self.ps_level_cc(half), E);
        }
        if self.beta < self.r1_minus {
            put("ps_level_sl_of_theta_one", self.ps_level_sl(1.0), E);
            put("C_star_of_R2", self.c_lower_star(2.0)?, E);
            put("C_upperstar_of_R2", self.c_upper_star(2.0)?, E);
            put("theta1_of_R2", self.theta1(2.0)?, E);
        }
        Ok(LedgerReport { schema: LEDGER_SCHEMA.to_string(), entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Interval;

    fn grid_max(p: &RootProfile) -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 1..=1_000_000 {
            let t = 10.0 * i as f64 / 1e6;
            let v = p.h(t);
            if v > best.1 {
                best = (t, v);
            }
        }
        best
    }

    #[test]
    fn k0_example_and_sign() {
        assert!((k0(1.0, 1.0, 4.0, 6.0).unwrap() - 1.0 / 48.0).abs() < 1e-15);
        assert!(matches!(k0(1.0, 2.0, 4.0, 6.0), Err(Error::Config { key, .. }) if key == "kirchhoff.t0"));
    }

    #[test]
    fn profile_matches_grid_maximum() {
        let p = RootProfile::new(1.0, 1.0, 4.0, 2.0, 6.0).unwrap();
        assert!((p.lambda3 - 0.25).abs() < 1e-12);
        assert!((p.t_star - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((p.h(p.t_star) - p.lambda3).abs() < 1e-10);
        let (_, gmax) = grid_max(&p);
        assert!((gmax - p.lambda3).abs() < 1e-6 * p.lambda3);
        let p2 = RootProfile::new(2.0, 1.0, 4.0, 2.0, 6.0).unwrap();
        assert!((grid_max(&p2).1 / gmax - 4.0).abs() < 1e-6);
        assert!(RootProfile::new(1.0, 1.0, 4.0, 5.0, 6.0).is_err());
    }

    #[test]
    fn roots_bracket_and_merge() {
        let p = RootProfile::new(1.0, 1.0, 4.0, 2.0, 6.0).unwrap();
        let (t1, t2) = p.roots(0.999 * p.lambda3).unwrap();
        assert!(t1 < p.t_star && p.t_star < t2);
        assert!((t1 - p.t_star).abs() < 1e-3 * 20.0 && (t2 - p.t_star).abs() < 1e-3 * 20.0);
        let mut prev = 0.0;
        for i in 1..10 {
            let l = p.lambda3 * i as f64 / 10.0;
            let (a, b) = p.roots(l).unwrap();
            assert!((p.h(a) - l).abs() < 1e-12 && (p.h(b) - l).abs() < 1e-12);
            assert!(a > prev);
            prev = a;
        }
        assert!(matches!(p.roots(p.lambda3), Err(Error::NoRoots { .. })));
    }

    #[test]
    fn kappa1_recovers_the_dirichlet_eigenvalue() {
        let m = DomainMesh::new(&[Interval::new(0.0, 1.0)], &[129]).unwrap();
        let fam = estimation_family(&m, 1, &[]);
        let (k, _) = estimate_kappa1(&m, &vec![2.0; m.len()], &fam).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((k - pi2).abs() < 0.02 * pi2, "{k}");
        let m2 = DomainMesh::new(&[Interval::new(0.0, 2.0)], &[129]).unwrap();
        let fam2 = estimation_family(&m2, 1, &[]);
        let (k2, _) = estimate_kappa1(&m2, &vec![2.0; m2.len()], &fam2).unwrap();
        assert!((k / k2 - 4.0).abs() < 0.02 * 4.0);
    }

    #[test]
    fn report_json_round_trips() {
        let r = LedgerReport {
            schema: LEDGER_SCHEMA.into(),
            entries: vec![
                LedgerEntry { name: "a".into(), value: 0.1 + 0.2, provenance: Provenance::Empirical },
                LedgerEntry { name: "b".into(), value: f64::INFINITY, provenance: Provenance::ClosedForm },
            ],
        };
        let s = r.to_json().unwrap();
        assert!(s.contains("\"inf\""));
        let back = LedgerReport::from_json(&s).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), s);
        assert!(LedgerReport::from_json("{\"schema\":\"x\",\"entries\":[]}").is_err());
    }
}
