//! Discrete energies `Φ_λ`, `T_λ`, `Ψ_θ` and their nodal derivative fields.

use crate::error::{Error, Result};
use crate::fields::ExponentField;
use crate::kirchhoff::KirchhoffSpec;
use crate::mesh::{magnitude, DomainMesh, Vector};
use crate::modular::pow;
use crate::reaction::{CriticalTerm, Reaction};
use crate::smooth::{plateau, plateau_derivative};

/// `|ξ|^{p-2} ξ + a |ξ|^{q-2} ξ`, equal to 0 at `ξ = 0`.
pub fn flux_a(p: f64, q: f64, a: f64, xi: &Vector) -> Vector {
    let r = magnitude(xi);
    if r == 0.0 {
        return [0.0; 2];
    }
    let s = pow(r, p - 2.0) + if a == 0.0 { 0.0 } else { a * pow(r, q - 2.0) };
    [s * xi[0], s * xi[1]]
}

/// `𝓐(x, ξ) = |ξ|^p / p + a |ξ|^q / q` as a function of `|ξ|`.
#[inline]
pub fn a_density(p: f64, q: f64, a: f64, r: f64) -> f64 {
    let first = pow(r, p) / p;
    if a == 0.0 {
        first
    } else {
        first + a * pow(r, q) / q
    }
}

/// All data of one discretized problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: DomainMesh,
    pub fields: ExponentField,
    pub kirchhoff: KirchhoffSpec,
    pub reaction: Reaction,
    pub critical: CriticalTerm,
}

/// Integrals entering every functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// `∫ 𝓐(x, ∇u)`.
    pub a: f64,
    /// `∫ F(x, u)`.
    pub f: f64,
    /// `∫ B̂(x, u)`.
    pub b: f64,
}

/// Which functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// `M̂₀(∫𝓐) - λ ∫F - ∫B̂`.
    PhiLambda { lambda: f64 },
    /// `M̂₀(∫𝓐) - φ(∫𝓐)(λ ∫F + ∫B̂)` with `φ = 1` below `t1^{p⁻}`.
    TLambda { lambda: f64, t1: f64 },
    /// `∫𝓐 - ∫F - θ ∫B̂`.
    PsiTheta { theta: f64 },
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is not finite")))
    }
}

impl Problem {
    pub fn new(mesh: DomainMesh, fields: ExponentField, kirchhoff: KirchhoffSpec, reaction: Reaction) -> Self {
        let critical = CriticalTerm::new(&fields);
        Problem { mesh, fields, kirchhoff, reaction, critical }
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.mesh.len() {
            return Err(Error::Shape { expected: self.mesh.len(), found: u.len() });
        }
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "u".into(), node: k });
        }
        Ok(())
    }

    /// `∫ 𝓐(x, ∇u)`.
    pub fn a_integral(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        let g = self.mesh.gradient(u)?;
        let f = &self.fields;
        let w = self.mesh.weights();
        let mut acc = 0.0;
        for (k, gk) in g.iter().enumerate() {
            let v = a_density(f.p[k], f.q[k], f.a[k], magnitude(gk));
            if !v.is_finite() {
                return Err(Error::Overflow { node: k });
            }
            acc += w[k] * v;
        }
        Ok(acc)
    }

    pub fn parts(&self, u: &[f64]) -> Result<EnergyParts> {
        let a = self.a_integral(u)?;
        let w = self.mesh.weights();
        let (mut fi, mut bi) = (0.0, 0.0);
        for k in 0..u.len() {
            let fv = self.reaction.primitive(k, u[k]);
            let bv = self.critical.b_hat(k, u[k]);
            if !fv.is_finite() || !bv.is_finite() {
                return Err(Error::Overflow { node: k });
            }
            fi += w[k] * fv;
            bi += w[k] * bv;
        }
        Ok(EnergyParts { a, f: fi, b: bi })
    }

    /// Nodal representation of `v ↦ ∫ A(x, ∇u)·∇v` in the quadrature pairing.
    pub fn a_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let g = self.mesh.gradient(u)?;
        let f = &self.fields;
        let w = self.mesh.weights();
        let weighted: Vec<Vector> = g
            .iter()
            .enumerate()
            .map(|(k, gk)| {
                let fl = flux_a(f.p[k], f.q[k], f.a[k], gk);
                [w[k] * fl[0], w[k] * fl[1]]
            })
            .collect();
        let mut out = self.mesh.gradient_adjoint(&weighted)?;
        for (k, v) in out.iter_mut().enumerate() {
            *v = if self.mesh.is_boundary(k) { 0.0 } else { *v / w[k] };
        }
        Ok(out)
    }

    /// Interior nodal values of `f(x, u)` and `B(x, u)`.
    fn reaction_fields(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut fv = vec![0.0; u.len()];
        let mut bv = vec![0.0; u.len()];
        for k in 0..u.len() {
            if !self.mesh.is_boundary(k) {
                fv[k] = self.reaction.f(k, u[k]);
                bv[k] = self.critical.b(k, u[k]);
            }
        }
        (fv, bv)
    }

    pub fn energy(&self, fun: &Functional, u: &[f64]) -> Result<f64> {
        let parts = self.parts(u)?;
        finite(self.energy_from_parts(fun, &parts), "energy")
    }

    pub fn energy_from_parts(&self, fun: &Functional, p: &EnergyParts) -> f64 {
        match *fun {
            // Same grouping as T_λ so the two agree bitwise below the cutoff band.
            Functional::PhiLambda { lambda } => self.kirchhoff.m_hat(p.a) - (lambda * p.f + p.b),
            Functional::TLambda { lambda, t1 } => {
                let (lo, hi) = self.cutoff_band(t1);
                self.kirchhoff.m_hat(p.a) - plateau(p.a, lo, hi) * (lambda * p.f + p.b)
            }
            Functional::PsiTheta { theta } => p.a - p.f - theta * p.b,
        }
    }

    /// `[t1^{p⁻}, 2 t1^{p⁻}]`, the transition band of the `T_λ` cutoff.
    pub fn cutoff_band(&self, t1: f64) -> (f64, f64) {
        let lo = pow(t1, self.fields.extrema().p_minus);
        (lo, 2.0 * lo)
    }

    pub fn gradient(&self, fun: &Functional, u: &[f64]) -> Result<Vec<f64>> {
        self.energy_and_gradient(fun, u).map(|(_, g)| g)
    }

    /// Energy and nodal gradient in one pass.
    pub fn energy_and_gradient(&self, fun: &Functional, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let parts = self.parts(u)?;
        let ga = self.a_gradient(u)?;
        let (fv, bv) = self.reaction_fields(u);
        let (ca, cf, cb) = match *fun {
            Functional::PhiLambda { lambda } => (self.kirchhoff.m_trunc(parts.a), lambda, 1.0),
            Functional::TLambda { lambda, t1 } => {
                let (lo, hi) = self.cutoff_band(t1);
                let phi = plateau(parts.a, lo, hi);
                let dphi = plateau_derivative(parts.a, lo, hi);
                let tail = lambda * parts.f + parts.b;
                (self.kirchhoff.m_trunc(parts.a) - dphi * tail, phi * lambda, phi)
            }
            Functional::PsiTheta { theta } => (1.0, 1.0, theta),
        };
        let g: Vec<f64> = (0..u.len()).map(|k| ca * ga[k] - cf * fv[k] - cb * bv[k]).collect();
        if let Some(k) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Overflow { node: k });
        }
        let e = finite(self.energy_from_parts(fun, &parts), "energy")?;
        Ok((e, g))
    }

    /// Quadrature pairing `⟨g, v⟩ = Σ w g v`.
    pub fn pairing(&self, g: &[f64], v: &[f64]) -> f64 {
        self.mesh.inner(g, v)
    }
}
