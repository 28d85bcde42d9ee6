//! Bubble families concentrating at a point and the finite-ε shadow of the
//! concentration-compactness inequality.

use std::io::Write;

use serde::Serialize;

use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::fields::local_extrema_over_ball;
use crate::mesh::{magnitude, DomainMesh, Point};
use crate::modular::{pow, ModularSpec};
use crate::smooth::plateau;

/// Bubbles narrower than this many mesh spacings are rejected.
pub const MIN_SPACINGS: f64 = 4.0;
/// Relative slack allowed on the margin, since `S` is sampled.
pub const MARGIN_SLACK: f64 = 0.05;

/// Radial profile `η`: 1 on `|y| <= 1/2`, 0 for `|y| >= 1`, quintic in between.
pub fn eta(r: f64) -> f64 {
    plateau(r, 0.5, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleFamily {
    pub center: Point,
    pub eps: Vec<f64>,
    pub s: f64,
    pub bubbles: Vec<Vec<f64>>,
}

/// `u_ε(x) = ε^{-s} η(|x - x0| / ε)` for every `ε` in the list.
pub fn make_bubbles(mesh: &DomainMesh, x0: &Point, eps: &[f64], s: f64) -> Result<BubbleFamily> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("amplitude exponent {s} must be nonnegative")));
    }
    let min = MIN_SPACINGS * mesh.max_spacing();
    let mut bubbles = Vec::with_capacity(eps.len());
    for &e in eps {
        if !(e > 0.0) {
            return Err(Error::Domain(format!("bubble radius {e} must be positive")));
        }
        if e < min {
            return Err(Error::Resolution { eps: e, min });
        }
        let fits = (0..mesh.dim()).all(|a| {
            let iv = mesh.intervals()[a];
            x0[a] - e >= iv.lo - 1e-12 && x0[a] + e <= iv.hi + 1e-12
        });
        if !fits {
            return Err(Error::Domain(format!("bubble of radius {e} leaves the domain")));
        }
        let amp = e.powf(-s);
        let mut u: Vec<f64> = (0..mesh.len()).map(|k| amp * eta(mesh.distance(k, x0) / e)).collect();
        for (k, v) in u.iter_mut().enumerate() {
            if mesh.is_boundary(k) {
                *v = 0.0;
            }
        }
        // Plateau invariants on the discrete profile.
        for (k, &v) in u.iter().enumerate() {
            let d = mesh.distance(k, x0);
            let ok = if d >= e {
                v == 0.0
            } else if d <= 0.5 * e {
                v == amp || mesh.is_boundary(k)
            } else {
                true
            };
            if !ok {
                return Err(Error::Verification(format!("bubble plateau violated at node {k}")));
            }
        }
        bubbles.push(u);
    }
    Ok(BubbleFamily { center: *x0, eps: eps.to_vec(), s, bubbles })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub eps: f64,
    pub mu_mass: f64,
    pub nu_mass: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Share of `∫𝓑(u)` carried by nodes inside the closed ball.
    pub nu_fraction: f64,
    /// `ν(B_{ε/2})`.
    pub nu_half: f64,
    pub local_lhs: f64,
    pub local_rhs: f64,
    /// `‖u ∇φ‖_𝓗` for the pure bubble, identically zero.
    pub correction: f64,
    pub local_margin: f64,
}

impl TraceRow {
    pub fn passed(&self) -> bool {
        self.margin >= -MARGIN_SLACK * self.rhs && self.local_margin >= -MARGIN_SLACK * self.local_rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationTrace {
    pub center: Point,
    pub s: f64,
    pub s_hat: f64,
    pub rows: Vec<TraceRow>,
}

impl ConcentrationTrace {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(TraceRow::passed)
    }

    /// Relative spread of `mu_mass` over the two smallest radii.
    pub fn mu_stability(&self) -> Option<f64> {
        let mut rows: Vec<&TraceRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        let [a, b, ..] = rows.as_slice() else { return None };
        Some((a.mu_mass - b.mu_mass).abs() / a.mu_mass.max(b.mu_mass))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ball_integral(mesh: &DomainMesh, x0: &Point, r: f64, f: impl Fn(usize) -> f64) -> f64 {
    mesh.nodes_within(x0, r).into_iter().map(|k| mesh.weights()[k] * f(k)).sum()
}

/// Ball masses and both forms of the inequality for every bubble.
pub fn ccp_quotient_trace(problem: &Problem, family: &BubbleFamily, s_hat: f64) -> Result<ConcentrationTrace> {
    let mesh = &problem.mesh;
    let f = &problem.fields;
    let h = ModularSpec::h_cal(f)?;
    let b = ModularSpec::b_cal(f)?;
    let x0 = family.center;
    let k0 = mesh.nearest_node(&x0);
    let (p0, q0) = (f.p[k0], f.q[k0]);
    let (ps0, qs0) = (f.p_star()[k0], f.q_star()[k0]);
    let mut rows = Vec::with_capacity(family.bubbles.len());
    for (&e, u) in family.eps.iter().zip(&family.bubbles) {
        let grad: Vec<f64> = mesh.gradient(u)?.iter().map(magnitude).collect();
        let mu = ball_integral(mesh, &x0, e, |k| h.eval(k, grad[k]));
        let nu = ball_integral(mesh, &x0, e, |k| b.eval(k, u[k]));
        let nu_total = mesh.integrate(&(0..u.len()).map(|k| b.eval(k, u[k])).collect::<Vec<_>>())?;
        let lhs = s_hat * pow(nu, 1.0 / ps0).min(pow(nu, 1.0 / qs0));
        let rhs = pow(mu, 1.0 / p0).max(pow(mu, 1.0 / q0));

        let nu_half = ball_integral(mesh, &x0, 0.5 * e, |k| b.eval(k, u[k]));
        let (r1m, _) = local_extrema_over_ball(mesh, &f.r1, &x0, e)?;
        let (_, r2p) = local_extrema_over_ball(mesh, &f.r2, &x0, e)?;
        let (pm, _) = local_extrema_over_ball(mesh, &f.p, &x0, e)?;
        let (_, qp) = local_extrema_over_ball(mesh, &f.q, &x0, e)?;
        let correction = 0.0;
        let local_lhs = s_hat * pow(nu_half, 1.0 / r1m).min(pow(nu_half, 1.0 / r2p));
        let local_rhs = pow(mu, 1.0 / pm).max(pow(mu, 1.0 / qp)) + correction;
        rows.push(TraceRow {
            eps: e,
            mu_mass: mu,
            nu_mass: nu,
            lhs,
            rhs,
            margin: rhs - lhs,
            nu_fraction: if nu_total > 0.0 { nu / nu_total } else { 1.0 },
            nu_half,
            local_lhs,
            local_rhs,
            correction,
            local_margin: local_rhs - local_lhs,
        });
    }
    Ok(ConcentrationTrace { center: x0, s: family.s, s_hat, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Interval;

    fn mesh2(n: usize) -> DomainMesh {
        let iv = Interval::new(0.0, 1.0);
        DomainMesh::new(&[iv, iv], &[n, n]).unwrap()
    }

    #[test]
    fn bubble_profile_and_resolution() {
        let m = mesh2(65);
        let fam = make_bubbles(&m, &[0.5, 0.5], &[0.25, 0.125], 0.5).unwrap();
        let c = m.nearest_node(&[0.5, 0.5]);
        assert_eq!(fam.bubbles[0][c], 0.25f64.powf(-0.5));
        assert_eq!(fam.bubbles[1][c], 0.125f64.powf(-0.5));
        assert!(matches!(make_bubbles(&m, &[0.5, 0.5], &[0.03], 0.0), Err(Error::Resolution { .. })));
        assert!(make_bubbles(&m, &[0.1, 0.5], &[0.25], 0.0).is_err());
    }

    #[test]
    fn shrinking_support_loses_mass() {
        let m = mesh2(65);
        let fam = make_bubbles(&m, &[0.5, 0.5], &[0.25, 0.125, 0.0625], 0.0).unwrap();
        let mass: Vec<f64> = fam.bubbles.iter().map(|u| m.integrate(u).unwrap()).collect();
        assert!(mass[0] > mass[1] && mass[1] > mass[2]);
    }
}
