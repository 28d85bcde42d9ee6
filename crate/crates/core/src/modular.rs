//! Musielak-Orlicz modulars, Luxemburg norms and the inequality toolbox.

use crate::error::{Error, Result};
use crate::fields::{extrema, ExponentField};
use crate::mesh::DomainMesh;

/// `t^m` for `t >= 0` computed as `exp(m ln t)`, with `0^m = 0`.
#[inline]
pub fn pow(t: f64, m: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (m * t.ln()).exp()
    }
}

/// `|t|^{m-2} t`, continuously extended by 0 at `t = 0`.
#[inline]
pub fn signed_pow(t: f64, m: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * pow(t.abs(), m - 1.0)
    }
}

/// Generalized power integrand `Φ(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModularSpec {
    /// `w(x) t^{m(x)}`.
    WeightedSingle { m: Vec<f64>, w: Vec<f64> },
    /// `b(x) t^{r(x)} + c(x) t^{s(x)}` with `r < s`.
    TwoTerm { b: Vec<f64>, r: Vec<f64>, c: Vec<f64>, s: Vec<f64> },
}

impl ModularSpec {
    pub fn single(m: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if m.len() != w.len() {
            return Err(Error::Shape { expected: m.len(), found: w.len() });
        }
        for (k, (&mk, &wk)) in m.iter().zip(&w).enumerate() {
            if !(mk >= 1.0) {
                return Err(Error::Domain(format!("exponent {mk} below 1 at node {k}")));
            }
            if !(wk >= 0.0) {
                return Err(Error::Domain(format!("negative weight {wk} at node {k}")));
            }
        }
        Ok(ModularSpec::WeightedSingle { m, w })
    }

    pub fn unweighted(m: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; m.len()];
        Self::single(m, w)
    }

    pub fn two_term(b: Vec<f64>, r: Vec<f64>, c: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        let n = b.len();
        for len in [r.len(), c.len(), s.len()] {
            if len != n {
                return Err(Error::Shape { expected: n, found: len });
            }
        }
        for k in 0..n {
            if !(r[k] < s[k]) {
                return Err(Error::Domain(format!(
                    "two-term exponents need r < s, got {} and {} at node {k}",
                    r[k], s[k]
                )));
            }
            if !(b[k] > 0.0) || !(c[k] >= 0.0) {
                return Err(Error::Domain(format!("two-term weights need b > 0 and c >= 0 at node {k}")));
            }
            if !(r[k] >= 1.0) {
                return Err(Error::Domain(format!("exponent {} below 1 at node {k}", r[k])));
            }
        }
        Ok(ModularSpec::TwoTerm { b, r, c, s })
    }

    /// `𝓗(x, t) = t^p + a t^q`.
    pub fn h_cal(f: &ExponentField) -> Result<Self> {
        Self::two_term(vec![1.0; f.len()], f.p.clone(), f.a.clone(), f.q.clone())
    }

    /// `𝓐(x, t) = t^p / p + a t^q / q`.
    pub fn a_cal(f: &ExponentField) -> Result<Self> {
        let b = f.p.iter().map(|p| 1.0 / p).collect();
        let c = f.a.iter().zip(&f.q).map(|(a, q)| a / q).collect();
        Self::two_term(b, f.p.clone(), c, f.q.clone())
    }

    /// `𝓑(x, t) = c1 t^{r1} + c2 a^{r2/q} t^{r2}`.
    pub fn b_cal(f: &ExponentField) -> Result<Self> {
        let c = (0..f.len()).map(|k| f.c2[k] * pow(f.a[k], f.r2[k] / f.q[k])).collect();
        Self::two_term(f.c1.clone(), f.r1.clone(), c, f.r2.clone())
    }

    /// `𝓖*(x, t) = t^{p*} + a^{q*/q} t^{q*}`.
    pub fn g_star(f: &ExponentField) -> Result<Self> {
        let (ps, qs) = (f.p_star(), f.q_star());
        let c = (0..f.len()).map(|k| pow(f.a[k], qs[k] / f.q[k])).collect();
        Self::two_term(vec![1.0; f.len()], ps, c, qs)
    }

    pub fn len(&self) -> usize {
        match self {
            ModularSpec::WeightedSingle { m, .. } => m.len(),
            ModularSpec::TwoTerm { b, .. } => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(r⁻, s⁺)`: the smallest and largest exponent that actually contributes.
    pub fn exponent_range(&self) -> (f64, f64) {
        match self {
            ModularSpec::WeightedSingle { m, .. } => extrema(m),
            ModularSpec::TwoTerm { r, s, c, .. } => {
                let r_minus = extrema(r).0;
                let active: Vec<f64> = s.iter().zip(c).filter(|(_, &ck)| ck > 0.0).map(|(&sk, _)| sk).collect();
                let s_plus = if active.is_empty() { extrema(r).1 } else { extrema(&active).1 };
                (r_minus, s_plus.max(extrema(r).1))
            }
        }
    }

    /// `Φ(x_k, t)` for `t >= 0`.
    #[inline]
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        match self {
            ModularSpec::WeightedSingle { m, w } => w[k] * pow(t, m[k]),
            ModularSpec::TwoTerm { b, r, c, s } => {
                let first = b[k] * pow(t, r[k]);
                if c[k] == 0.0 {
                    first
                } else {
                    first + c[k] * pow(t, s[k])
                }
            }
        }
    }

    /// `∂Φ/∂t (x_k, t)` for `t >= 0`.
    #[inline]
    pub fn eval_derivative(&self, k: usize, t: f64) -> f64 {
        match self {
            ModularSpec::WeightedSingle { m, w } => w[k] * m[k] * pow(t, m[k] - 1.0),
            ModularSpec::TwoTerm { b, r, c, s } => b[k] * r[k] * pow(t, r[k] - 1.0) + c[k] * s[k] * pow(t, s[k] - 1.0),
        }
    }
}

/// Quadrature value of `∫ Φ(x, |u|) dx`.
pub fn modular(mesh: &DomainMesh, spec: &ModularSpec, u: &[f64]) -> Result<f64> {
    modular_scaled(mesh, spec, u, 1.0)
}

/// `∫ Φ(x, |u| / tau) dx`.
fn modular_scaled(mesh: &DomainMesh, spec: &ModularSpec, u: &[f64], tau: f64) -> Result<f64> {
    if u.len() != mesh.len() || spec.len() != mesh.len() {
        return Err(Error::Shape { expected: mesh.len(), found: u.len().min(spec.len()) });
    }
    let w = mesh.weights();
    let mut acc = 0.0;
    for k in 0..u.len() {
        if !u[k].is_finite() {
            return Err(Error::NonFinite { field: "u".into(), node: k });
        }
        let v = spec.eval(k, u[k].abs() / tau);
        if !v.is_finite() {
            return Err(Error::Overflow { node: k });
        }
        acc += w[k] * v;
    }
    if !acc.is_finite() {
        return Err(Error::Overflow { node: u.len().saturating_sub(1) });
    }
    Ok(acc)
}

const MAX_BRACKET_STEPS: usize = 200;

/// Luxemburg norm `inf{τ > 0 : ρ(u/τ) <= 1}` by bracketing and bisection.
pub fn luxemburg_norm(mesh: &DomainMesh, spec: &ModularSpec, u: &[f64]) -> Result<f64> {
    let interior_zero = (0..u.len().min(mesh.len())).all(|k| mesh.is_boundary(k) || u[k] == 0.0);
    if u.len() == mesh.len() && interior_zero {
        return Ok(0.0);
    }
    let rho = modular(mesh, spec, u)?;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let (r_minus, _) = spec.exponent_range();
    let f = |tau: f64| -> Result<f64> {
        match modular_scaled(mesh, spec, u, tau) {
            Ok(v) => Ok(v - 1.0),
            // Overflow at tiny τ means the modular is far above 1.
            Err(Error::Overflow { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let tau0 = pow(rho, 1.0 / r_minus);
    let tau0 = if tau0.is_finite() && tau0 > 0.0 { tau0 } else { 1.0 };

    let (mut lo, mut hi);
    if f(tau0)? > 0.0 {
        lo = tau0;
        hi = tau0;
        let mut steps = 0;
        loop {
            hi *= 2.0;
            steps += 1;
            if f(hi)? <= 0.0 {
                break;
            }
            lo = hi;
            if steps >= MAX_BRACKET_STEPS {
                return Err(Error::Numeric("Luxemburg bracket not found".into()));
            }
        }
    } else {
        hi = tau0;
        lo = tau0;
        let mut steps = 0;
        loop {
            lo *= 0.5;
            steps += 1;
            if f(lo)? > 0.0 {
                break;
            }
            hi = lo;
            if steps >= MAX_BRACKET_STEPS {
                return Err(Error::Numeric("Luxemburg bracket not found".into()));
            }
        }
    }
    // Bisection to adjacent floating-point numbers, well below the 1e-10 target.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which side of 1 the norm falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormBranch {
    Below,
    Unit,
    Above,
}

/// Both sides of the norm-modular sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct NormModularReport {
    pub norm: f64,
    pub modular: f64,
    pub branch: NormBranch,
    pub lower: f64,
    pub upper: f64,
    /// `(modular - lower) / max(1, modular)`.
    pub lower_margin: f64,
    /// `(upper - modular) / max(1, modular)`.
    pub upper_margin: f64,
}

impl NormModularReport {
    pub fn worst_margin(&self) -> f64 {
        self.lower_margin.min(self.upper_margin)
    }
}

/// Evaluates `‖u‖^{s⁺} <= ρ(u) <= ‖u‖^{r⁻}` for `‖u‖ < 1`, the reversed chain for
/// `‖u‖ > 1`, and `ρ(u) = 1` at `‖u‖ = 1`.
pub fn check_norm_modular(mesh: &DomainMesh, spec: &ModularSpec, u: &[f64]) -> Result<NormModularReport> {
    let norm = luxemburg_norm(mesh, spec, u)?;
    let rho = modular(mesh, spec, u)?;
    let (r_minus, s_plus) = spec.exponent_range();
    let branch = if (norm - 1.0).abs() <= 1e-14 {
        NormBranch::Unit
    } else if norm < 1.0 {
        NormBranch::Below
    } else {
        NormBranch::Above
    };
    let (lower, upper) = match branch {
        NormBranch::Below => (pow(norm, s_plus), pow(norm, r_minus)),
        NormBranch::Above => (pow(norm, r_minus), pow(norm, s_plus)),
        NormBranch::Unit => (1.0, 1.0),
    };
    let scale = rho.max(1.0);
    let (lower_margin, upper_margin) = ((rho - lower) / scale, (upper - rho) / scale);
    Ok(NormModularReport { norm, modular: rho, branch, lower, upper, lower_margin, upper_margin })
}

/// `(|∫ u v dμ|, 2 ‖u‖_{m} ‖v‖_{m'})` with `dμ = weight dx`.
pub fn holder_pairing(mesh: &DomainMesh, u: &[f64], v: &[f64], m: &[f64], weight: &[f64]) -> Result<(f64, f64)> {
    if let Some(k) = m.iter().position(|&mk| !(mk > 1.0)) {
        return Err(Error::Domain(format!("Hölder exponent must exceed 1, got {} at node {k}", m[k])));
    }
    let conj: Vec<f64> = m.iter().map(|&mk| mk / (mk - 1.0)).collect();
    let lhs = {
        let w = mesh.weights();
        (0..u.len()).map(|k| w[k] * weight[k] * u[k] * v[k]).sum::<f64>().abs()
    };
    let nu = luxemburg_norm(mesh, &ModularSpec::single(m.to_vec(), weight.to_vec())?, u)?;
    let nv = luxemburg_norm(mesh, &ModularSpec::single(conj, weight.to_vec())?, v)?;
    Ok((lhs, 2.0 * nu * nv))
}

/// `(ab, first majorant, second majorant)` of the ε-Young inequality with `m⁻ = m`.
pub fn young_check(a: f64, b: f64, eps: f64, m: f64) -> Result<(f64, f64, f64)> {
    young_check_with(a, b, eps, m, m)
}

/// As [`young_check`] with an explicit lower exponent `m_minus <= m` in the last term.
pub fn young_check_with(a: f64, b: f64, eps: f64, m: f64, m_minus: f64) -> Result<(f64, f64, f64)> {
    if !(m > 1.0) || !(m_minus > 1.0) {
        return Err(Error::Domain(format!("Young exponent must exceed 1, got {m}")));
    }
    if !(a >= 0.0 && b >= 0.0 && eps > 0.0) {
        return Err(Error::Domain("Young arguments need a, b >= 0 and eps > 0".into()));
    }
    let conj = m / (m - 1.0);
    let bm = pow(b, conj);
    let lhs = a * b;
    let mid = eps * pow(a, m) / m + (m - 1.0) / m * pow(eps, -1.0 / (m - 1.0)) * bm;
    let rhs = eps * pow(a, m) + (1.0 + pow(eps, -1.0 / (m_minus - 1.0))) * bm;
    Ok((lhs, mid, rhs))
}

/// `∫ |Φ(x,|f_n|) - Φ(x,|f_n - f|) - Φ(x,|f|)| dx` for each member of the sequence.
pub fn brezis_lieb_deviation(mesh: &DomainMesh, spec: &ModularSpec, seq: &[Vec<f64>], f: &[f64]) -> Result<Vec<f64>> {
    let w = mesh.weights();
    seq.iter()
        .map(|fnv| {
            if fnv.len() != mesh.len() || f.len() != mesh.len() {
                return Err(Error::Shape { expected: mesh.len(), found: fnv.len() });
            }
            let mut acc = 0.0;
            for k in 0..mesh.len() {
                let d = spec.eval(k, fnv[k].abs()) - spec.eval(k, (fnv[k] - f[k]).abs()) - spec.eval(k, f[k].abs());
                acc += w[k] * d.abs();
            }
            Ok(acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Interval;

    fn line(n: usize) -> DomainMesh {
        DomainMesh::new(&[Interval::new(0.0, 1.0)], &[n]).unwrap()
    }

    fn h_const(n: usize, p: f64, q: f64, a: f64) -> ModularSpec {
        ModularSpec::two_term(vec![1.0; n], vec![p; n], vec![a; n], vec![q; n]).unwrap()
    }

    #[test]
    fn modular_examples() {
        let m = line(11);
        let ones = vec![1.0; 11];
        assert!((modular(&m, &h_const(11, 2.0, 3.0, 0.0), &ones).unwrap() - 1.0).abs() < 1e-14);
        let twos = vec![2.0; 11];
        assert!((modular(&m, &h_const(11, 2.0, 3.0, 1.0), &twos).unwrap() - 12.0).abs() < 1e-12);
        let m = line(201);
        let b = ModularSpec::two_term(vec![1.0; 201], vec![4.0; 201], vec![0.0; 201], vec![5.0; 201]).unwrap();
        let x = m.sample(|x| x[0]);
        assert!((modular(&m, &b, &x).unwrap() - 0.2).abs() < 1e-4);
    }

    #[test]
    fn norm_examples() {
        let m = line(51);
        let u = m.sample(|x| (3.0 * x[0]).sin() + 0.3);
        let l2 = m.integrate(&u.iter().map(|v| v * v).collect::<Vec<_>>()).unwrap().sqrt();
        let n = luxemburg_norm(&m, &h_const(51, 2.0, 3.0, 0.0), &u).unwrap();
        assert!((n - l2).abs() <= 1e-12 * l2);
        assert_eq!(luxemburg_norm(&m, &h_const(51, 2.0, 3.0, 0.0), &vec![0.0; 51]).unwrap(), 0.0);
        let c = 0.7;
        let n = luxemburg_norm(&m, &h_const(51, 2.0, 4.0, 1.0), &vec![c; 51]).unwrap();
        let exact = c * ((1.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((n - exact).abs() <= 1e-12 * exact);
        assert!((exact / c - 1.27201965).abs() < 1e-8);
    }

    #[test]
    fn boundary_only_data_has_zero_norm() {
        let m = line(5);
        let u = vec![3.0, 0.0, 0.0, 0.0, -1.0];
        assert_eq!(luxemburg_norm(&m, &h_const(5, 2.0, 3.0, 1.0), &u).unwrap(), 0.0);
    }

    #[test]
    fn norm_modular_sandwich_branches() {
        let m = line(41);
        let spec = h_const(41, 2.0, 4.0, 1.0);
        for scale in [0.1, 0.9, 3.0, 50.0] {
            let u = m.sample(|x| scale * (1.0 + x[0]));
            let rep = check_norm_modular(&m, &spec, &u).unwrap();
            assert!(rep.worst_margin() >= -1e-12, "{rep:?}");
        }
        let u = m.sample(|x| 1.0 + x[0]);
        let n = luxemburg_norm(&m, &spec, &u).unwrap();
        let unit: Vec<f64> = u.iter().map(|v| v / n).collect();
        let rep = check_norm_modular(&m, &spec, &unit).unwrap();
        assert_eq!(rep.branch, NormBranch::Unit);
        assert!((rep.modular - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_examples() {
        let m = line(21);
        let u = m.sample(|x| x[0] * (1.0 - x[0]));
        let two = vec![2.0; 21];
        let w = vec![1.0; 21];
        assert_eq!(holder_pairing(&m, &u, &[0.0; 21], &two, &w).unwrap(), (0.0, 0.0));
        let (lhs, rhs) = holder_pairing(&m, &u, &u, &two, &w).unwrap();
        assert!((rhs - 2.0 * lhs).abs() < 1e-12 * rhs);
        assert!(holder_pairing(&m, &u, &u, &[1.0; 21], &w).is_err());
    }

    #[test]
    fn young_examples() {
        assert_eq!(young_check(1.0, 1.0, 1.0, 2.0).unwrap(), (1.0, 1.0, 3.0));
        let (l, mid, r) = young_check(0.0, 2.0, 0.5, 3.0).unwrap();
        assert!(l == 0.0 && mid > 0.0 && r > 0.0);
        assert!(young_check(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn brezis_lieb_examples() {
        let m = line(31);
        let spec = h_const(31, 2.0, 3.0, 1.0);
        let f = m.sample(|x| (std::f64::consts::PI * x[0]).sin());
        let same = vec![f.clone(); 3];
        assert!(brezis_lieb_deviation(&m, &spec, &same, &f).unwrap().iter().all(|&d| d < 1e-15));
        let g = m.sample(|x| x[0]);
        let seq: Vec<Vec<f64>> = (1..=40).map(|n| f.iter().zip(&g).map(|(a, b)| a + b / n as f64).collect()).collect();
        let dev = brezis_lieb_deviation(&m, &spec, &seq, &f).unwrap();
        assert!(dev.windows(2).skip(5).all(|w| w[1] <= w[0]));
        let bump = m.sample(|x| (-(x[0] - 0.3).powi(2) * 50.0).exp());
        let zero = vec![0.0; 31];
        assert_eq!(brezis_lieb_deviation(&m, &spec, &[bump], &zero).unwrap(), vec![0.0]);
    }

    proptest::proptest! {
        #[test]
        fn norm_is_homogeneous(c in -20.0f64..20.0, k in 1u32..5) {
            let m = line(17);
            let spec = h_const(17, 1.7, 3.1, 0.5);
            let u = m.sample(|x| (k as f64 * 3.0 * x[0]).sin() + 0.2);
            let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
            let n = luxemburg_norm(&m, &spec, &u).unwrap();
            let nc = luxemburg_norm(&m, &spec, &cu).unwrap();
            proptest::prop_assert!((nc - c.abs() * n).abs() <= 1e-9 * (c.abs() * n).max(1e-300));
        }

        #[test]
        fn young_chain_holds(a in 0.0f64..10.0, b in 0.0f64..10.0, e in 0.01f64..10.0, mm in 1.05f64..6.0) {
            let (l, mid, r) = young_check(a, b, e, mm).unwrap();
            proptest::prop_assert!(l <= mid * (1.0 + 1e-12) + 1e-12);
            proptest::prop_assert!(mid <= r * (1.0 + 1e-12) + 1e-12);
        }
    }
}
