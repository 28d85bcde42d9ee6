//! Variable exponents and weights sampled on a mesh, with hypothesis checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{DomainMesh, Point};

/// Relative tolerance for the exact identities among exponents.
pub const IDENTITY_TOL: f64 = 1e-10;

pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= IDENTITY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Closed-form descriptor of a scalar field over the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `base + slope · x`.
    Affine {
        base: f64,
        slope: Vec<f64>,
    },
    /// `base + height · exp(-|x - center|² / width²)`.
    Bump {
        base: f64,
        height: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Explicit nodal table in mesh order.
    Nodal {
        values: Vec<f64>,
    },
    /// The critical exponent of the matching base field (`p*` for r1, `q*` for r2).
    Critical,
    /// `r2 = q* - p* + r1`; only meaningful for r2.
    Matched,
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        FieldSpec::Constant { value }
    }

    /// Samples a closed-form descriptor. `Critical` and `Matched` are resolved by
    /// [`ExponentField::build`] and are rejected here.
    pub fn sample(&self, mesh: &DomainMesh, name: &str) -> Result<Vec<f64>> {
        let dim = mesh.dim();
        let check_len = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != dim {
                return Err(Error::config(
                    format!("{name}.{what}"),
                    format!("expected {dim} components, found {}", v.len()),
                ));
            }
            Ok(())
        };
        let values = match self {
            FieldSpec::Constant { value } => vec![*value; mesh.len()],
            FieldSpec::Affine { base, slope } => {
                check_len(slope, "slope")?;
                mesh.sample(|x| base + (0..dim).map(|a| slope[a] * x[a]).sum::<f64>())
            }
            FieldSpec::Bump { base, height, center, width } => {
                check_len(center, "center")?;
                if *width <= 0.0 {
                    return Err(Error::config(format!("{name}.width"), "must be positive"));
                }
                mesh.sample(|x| {
                    let d2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                    base + height * (-d2 / (width * width)).exp()
                })
            }
            FieldSpec::Nodal { values } => {
                if values.len() != mesh.len() {
                    return Err(Error::config(
                        format!("{name}.values"),
                        format!("expected {} nodal values, found {}", mesh.len(), values.len()),
                    ));
                }
                values.clone()
            }
            FieldSpec::Critical | FieldSpec::Matched => {
                return Err(Error::config(name, "derived exponent kinds are only allowed for r1 and r2"))
            }
        };
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { field: name.into(), node: k });
            }
        }
        Ok(values)
    }
}

/// Descriptors for every coefficient of the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    pub p: FieldSpec,
    pub q: FieldSpec,
    pub a: FieldSpec,
    pub c1: FieldSpec,
    pub c2: FieldSpec,
    pub r1: FieldSpec,
    pub r2: FieldSpec,
}

/// Minimum and maximum of a nodal table.
pub fn extrema(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `N h / (N - h)` nodewise.
pub fn critical_exponent(h: &[f64], n: f64) -> Result<Vec<f64>> {
    h.iter()
        .enumerate()
        .map(|(k, &v)| {
            if !v.is_finite() {
                Err(Error::NonFinite { field: "h".into(), node: k })
            } else if v >= n {
                Err(Error::Domain(format!("h = {v} at node {k} is not below N = {n}")))
            } else {
                Ok(n * v / (n - v))
            }
        })
        .collect()
}

/// Min and max of `h` over the nodes within `eps` of `x0`.
pub fn local_extrema_over_ball(mesh: &DomainMesh, h: &[f64], x0: &Point, eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {eps}")));
    }
    if !mesh.contains(x0) {
        return Err(Error::Domain(format!("center {x0:?} lies outside the domain")));
    }
    if h.len() != mesh.len() {
        return Err(Error::Shape { expected: mesh.len(), found: h.len() });
    }
    let nodes = mesh.nodes_within(x0, eps);
    if nodes.is_empty() {
        return Err(Error::DegenerateBall { radius: eps });
    }
    let vals: Vec<f64> = nodes.iter().map(|&k| h[k]).collect();
    Ok(extrema(&vals))
}

/// Cached extrema of the exponent tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrema {
    pub p_minus: f64,
    pub p_plus: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    pub r1_minus: f64,
    pub r1_plus: f64,
    pub r2_minus: f64,
    pub r2_plus: f64,
}

/// Nodal coefficient tables of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    pub ambient_n: f64,
    pub critical: bool,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub a: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    extrema: Extrema,
}

fn node_star(v: f64, n: f64) -> f64 {
    n * v / (n - v)
}

impl ExponentField {
    /// Samples every descriptor and resolves derived exponents.
    pub fn build(mesh: &DomainMesh, cfg: &FieldsConfig, ambient_n: usize, critical: bool) -> Result<Self> {
        if ambient_n < 1 {
            return Err(Error::config("domain.ambient_n", "must be at least 1"));
        }
        let n = ambient_n as f64;
        let p = cfg.p.sample(mesh, "p")?;
        let q = cfg.q.sample(mesh, "q")?;
        let a = cfg.a.sample(mesh, "a")?;
        let c1 = cfg.c1.sample(mesh, "c1")?;
        let c2 = cfg.c2.sample(mesh, "c2")?;
        let star = |h: &[f64], name: &str| -> Result<Vec<f64>> {
            critical_exponent(h, n).map_err(|e| Error::config(name, e.to_string()))
        };
        let r1 = match &cfg.r1 {
            FieldSpec::Critical => star(&p, "p")?,
            FieldSpec::Matched => return Err(Error::config("r1", "`matched` is only valid for r2")),
            other => other.sample(mesh, "r1")?,
        };
        let r2 = match &cfg.r2 {
            FieldSpec::Critical => star(&q, "q")?,
            FieldSpec::Matched => {
                let ps = star(&p, "p")?;
                let qs = star(&q, "q")?;
                (0..mesh.len()).map(|k| qs[k] - ps[k] + r1[k]).collect()
            }
            other => other.sample(mesh, "r2")?,
        };
        Ok(Self::from_tables(n, critical, p, q, a, c1, c2, r1, r2))
    }

    /// Wraps already sampled tables.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tables(
        ambient_n: f64,
        critical: bool,
        p: Vec<f64>,
        q: Vec<f64>,
        a: Vec<f64>,
        c1: Vec<f64>,
        c2: Vec<f64>,
        r1: Vec<f64>,
        r2: Vec<f64>,
    ) -> Self {
        let (p_minus, p_plus) = extrema(&p);
        let (q_minus, q_plus) = extrema(&q);
        let (r1_minus, r1_plus) = extrema(&r1);
        let (r2_minus, r2_plus) = extrema(&r2);
        ExponentField {
            ambient_n,
            critical,
            p,
            q,
            a,
            c1,
            c2,
            r1,
            r2,
            extrema: Extrema { p_minus, p_plus, q_minus, q_plus, r1_minus, r1_plus, r2_minus, r2_plus },
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn extrema(&self) -> &Extrema {
        &self.extrema
    }

    pub fn p_star(&self) -> Vec<f64> {
        self.p.iter().map(|&v| node_star(v, self.ambient_n)).collect()
    }

    pub fn q_star(&self) -> Vec<f64> {
        self.q.iter().map(|&v| node_star(v, self.ambient_n)).collect()
    }

    /// Nodes where `r1 = p*` within tolerance.
    pub fn critical_set(&self) -> Vec<usize> {
        let n = self.ambient_n;
        (0..self.len()).filter(|&k| self.p[k] < n && approx_eq(self.r1[k], node_star(self.p[k], n))).collect()
    }

    /// Largest finite-difference slope of a table, reported for information only.
    pub fn lipschitz_estimate(mesh: &DomainMesh, values: &[f64]) -> f64 {
        mesh.gradient(values).map(|g| g.iter().map(crate::mesh::magnitude).fold(0.0, f64::max)).unwrap_or(f64::NAN)
    }

    fn tables(&self) -> [(&'static str, &[f64]); 7] {
        [
            ("p", &self.p),
            ("q", &self.q),
            ("a", &self.a),
            ("c1", &self.c1),
            ("c2", &self.c2),
            ("r1", &self.r1),
            ("r2", &self.r2),
        ]
    }
}

/// One violated hypothesis with its worst node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub condition: String,
    pub node: usize,
    /// Amount by which the condition fails at `node` (positive).
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Informational slopes of `a`, `p`, `q`.
    pub lipschitz: Vec<(String, f64)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural hypothesis nodewise; an empty violation list means all hold.
pub fn validate_hypotheses(mesh: &DomainMesh, fields: &ExponentField) -> Result<ValidationReport> {
    if mesh.nodes_per_axis().iter().any(|&n| n < 2) {
        return Err(Error::Domain("validation needs at least 2 nodes per axis".into()));
    }
    for (name, table) in fields.tables() {
        if table.len() != mesh.len() {
            return Err(Error::Shape { expected: mesh.len(), found: table.len() });
        }
        if let Some(k) = table.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: name.into(), node: k });
        }
    }

    let n = fields.ambient_n;
    // Each check returns the positive excess when the condition fails at a node.
    type Check<'a> = (&'static str, Box<dyn Fn(usize) -> f64 + 'a>);
    let f = fields;
    let checks: Vec<Check> = vec![
        ("a >= 0", Box::new(|k| -f.a[k])),
        ("1 < p", Box::new(|k| 1.0 - f.p[k])),
        ("p < q", Box::new(|k| f.p[k] - f.q[k])),
        ("q < N", Box::new(|k| f.q[k] - n)),
        ("q/p < 1+1/N", Box::new(|k| f.q[k] / f.p[k] - (1.0 + 1.0 / n))),
        ("c1 > 0", Box::new(|k| -f.c1[k])),
        ("c2 >= 0", Box::new(|k| -f.c2[k])),
        ("q < r1", Box::new(|k| f.q[k] - f.r1[k])),
        (
            "r1 <= p*",
            Box::new(|k| {
                if f.p[k] >= n {
                    return f64::INFINITY;
                }
                let ps = node_star(f.p[k], n);
                if approx_eq(f.r1[k], ps) {
                    -1.0
                } else {
                    f.r1[k] - ps
                }
            }),
        ),
        (
            "p* - r1 = q* - r2",
            Box::new(|k| {
                if f.p[k] >= n || f.q[k] >= n {
                    return f64::INFINITY;
                }
                let lhs = node_star(f.p[k], n) - f.r1[k];
                let rhs = node_star(f.q[k], n) - f.r2[k];
                let scale = f.r1[k].abs().max(f.r2[k].abs()).max(1.0);
                let gap = (lhs - rhs).abs();
                if gap <= IDENTITY_TOL * scale {
                    -1.0
                } else {
                    gap
                }
            }),
        ),
    ];

    let mut report = ValidationReport::default();
    for (name, check) in &checks {
        let mut worst: Option<(usize, f64)> = None;
        for k in 0..mesh.len() {
            let e = check(k);
            // Strict inequalities fail at equality, so 0 counts as a violation.
            let failed = match *name {
                "a >= 0" | "c2 >= 0" => e > 0.0,
                "p* - r1 = q* - r2" | "r1 <= p*" => e > 0.0,
                _ => e >= 0.0,
            };
            if failed && worst.is_none_or(|(_, w)| e > w) {
                worst = Some((k, e));
            }
        }
        if let Some((node, excess)) = worst {
            report.violations.push(Violation { condition: name.to_string(), node, excess });
        }
    }
    if fields.critical && fields.critical_set().is_empty() {
        report.violations.push(Violation { condition: "critical set nonempty".into(), node: 0, excess: 1.0 });
    }
    for (name, table) in [("a", &fields.a), ("p", &fields.p), ("q", &fields.q)] {
        report.lipschitz.push((name.into(), ExponentField::lipschitz_estimate(mesh, table)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Interval;

    fn cfg(p: FieldSpec, q: FieldSpec) -> FieldsConfig {
        FieldsConfig {
            p,
            q,
            a: FieldSpec::constant(1.0),
            c1: FieldSpec::constant(1.0),
            c2: FieldSpec::constant(1.0),
            r1: FieldSpec::Critical,
            r2: FieldSpec::Critical,
        }
    }

    fn line(n: usize) -> DomainMesh {
        DomainMesh::new(&[Interval::new(0.0, 1.0)], &[n]).unwrap()
    }

    #[test]
    fn reference_fields_pass() {
        let m = line(33);
        let f = ExponentField::build(&m, &cfg(FieldSpec::constant(2.0), FieldSpec::constant(2.4)), 4, true).unwrap();
        let rep = validate_hypotheses(&m, &f).unwrap();
        assert!(rep.is_ok(), "{:?}", rep.violations);
        assert_eq!(f.critical_set().len(), 33);
    }

    #[test]
    fn ratio_violation_is_reported() {
        let m = line(9);
        let f = ExponentField::build(&m, &cfg(FieldSpec::constant(2.0), FieldSpec::constant(2.6)), 4, true).unwrap();
        let rep = validate_hypotheses(&m, &f).unwrap();
        assert!(rep.violations.iter().any(|v| v.condition == "q/p < 1+1/N"));
    }

    #[test]
    fn affine_exponent_passes_in_three_dimensions() {
        let m = line(101);
        let p = FieldSpec::Affine { base: 2.0, slope: vec![0.2] };
        let q = FieldSpec::Affine { base: 2.1, slope: vec![0.2] };
        let f = ExponentField::build(&m, &cfg(p, q), 3, true).unwrap();
        let rep = validate_hypotheses(&m, &f).unwrap();
        assert!(rep.is_ok(), "{:?}", rep.violations);
        let lip = rep.lipschitz.iter().find(|(n, _)| n == "p").unwrap().1;
        assert!((lip - 0.2).abs() < 1e-9);
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(&[2.0], 4.0).unwrap(), vec![4.0]);
        assert_eq!(critical_exponent(&[3.0], 4.0).unwrap(), vec![12.0]);
        let v = critical_exponent(&[2.1], 3.0).unwrap()[0];
        assert!((v - 7.0).abs() < 1e-12);
        assert!(matches!(critical_exponent(&[4.0], 4.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ball_extrema() {
        let m = line(101);
        let h = m.sample(|x| x[0]);
        let (lo, hi) = local_extrema_over_ball(&m, &h, &[0.5, 0.0], 0.1).unwrap();
        assert!((lo - 0.4).abs() < 1e-9 && (hi - 0.6).abs() < 1e-9);
        let (lo, hi) = local_extrema_over_ball(&m, &h, &[0.5, 0.0], 10.0).unwrap();
        assert_eq!((lo, hi), (0.0, 1.0));
        let c = vec![3.0; 101];
        assert_eq!(local_extrema_over_ball(&m, &c, &[0.2, 0.0], 0.05).unwrap(), (3.0, 3.0));
        let coarse = line(3);
        assert!(matches!(
            local_extrema_over_ball(&coarse, &[0.0; 3], &[0.25, 0.0], 0.1),
            Err(Error::DegenerateBall { .. })
        ));
    }

    #[test]
    fn matched_r2_identity_is_exact() {
        let m = line(21);
        let mut c =
            cfg(FieldSpec::Affine { base: 1.8, slope: vec![0.1] }, FieldSpec::Affine { base: 2.0, slope: vec![0.1] });
        c.r1 = FieldSpec::Affine { base: 3.0, slope: vec![0.0] };
        c.r2 = FieldSpec::Matched;
        let f = ExponentField::build(&m, &c, 4, false).unwrap();
        let (ps, qs) = (f.p_star(), f.q_star());
        for k in 0..m.len() {
            assert_eq!(f.r2[k], qs[k] - ps[k] + f.r1[k]);
        }
        assert!(validate_hypotheses(&m, &f).unwrap().is_ok());
    }

    #[test]
    fn non_finite_field_is_a_data_error() {
        let m = line(5);
        let mut f =
            ExponentField::build(&m, &cfg(FieldSpec::constant(2.0), FieldSpec::constant(2.4)), 4, true).unwrap();
        f.q[3] = f64::NAN;
        assert_eq!(validate_hypotheses(&m, &f), Err(Error::NonFinite { field: "q".into(), node: 3 }));
    }

    proptest::proptest! {
        #[test]
        fn critical_exponent_is_monotone(a in 1.0f64..3.9, d in 0.0f64..1.0) {
            let b = (a + d).min(3.95);
            let s = critical_exponent(&[a, b], 4.0).unwrap();
            proptest::prop_assert!(s[0] <= s[1]);
        }

        #[test]
        fn validation_is_idempotent(q in 2.05f64..2.7) {
            let m = line(7);
            let f = ExponentField::build(
                &m, &cfg(FieldSpec::constant(2.0), FieldSpec::constant(q)), 4, true).unwrap();
            proptest::prop_assert_eq!(validate_hypotheses(&m, &f), validate_hypotheses(&m, &f));
        }
    }
}
