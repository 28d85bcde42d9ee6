//! Kirchhoff factor `M`, its truncation `M₀` and the antiderivative `M̂₀`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catalogue of Kirchhoff factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KirchhoffKind {
    Constant {
        m0: f64,
    },
    /// `m0 + kappa t`.
    Affine {
        m0: f64,
        kappa: f64,
    },
    /// `m0 + kappa min(t, tau0 / 2)`.
    Saturating {
        m0: f64,
        kappa: f64,
    },
}

/// Grid resolution of the `t0` scan.
const T0_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KirchhoffSpec {
    pub kind: KirchhoffKind,
    pub tau0: f64,
    pub t0: f64,
}

impl KirchhoffSpec {
    /// Picks the largest grid `t0` in `(0, min(τ₀, 1))` with `M(t0) q⁺ <= 0.99 m0 r1⁻`.
    pub fn new(kind: KirchhoffKind, tau0: f64, q_plus: f64, r1_minus: f64) -> Result<Self> {
        let probe = KirchhoffSpec { kind, tau0, t0: 0.0 };
        probe.check_kind()?;
        let m0 = probe.m0();
        let top = tau0.min(1.0);
        let t0 = (1..T0_GRID)
            .rev()
            .map(|i| top * i as f64 / T0_GRID as f64)
            .find(|&t| probe.m(t) * q_plus <= 0.99 * m0 * r1_minus)
            .ok_or_else(|| Error::config("kirchhoff.t0", "no t0 satisfies M(t0) q+ < m0 r1-"))?;
        Ok(KirchhoffSpec { kind, tau0, t0 })
    }

    /// Uses a caller-chosen `t0`, checking `M(t0) q⁺ < m0 r1⁻`.
    pub fn with_t0(kind: KirchhoffKind, tau0: f64, t0: f64, q_plus: f64, r1_minus: f64) -> Result<Self> {
        let spec = KirchhoffSpec { kind, tau0, t0 };
        spec.check_kind()?;
        if !(t0 > 0.0 && t0 < tau0.min(1.0)) {
            return Err(Error::config("kirchhoff.t0", "must lie in (0, min(tau0, 1))"));
        }
        if !(spec.m(t0) * q_plus < spec.m0() * r1_minus) {
            return Err(Error::config("kirchhoff.t0", "M(t0) q+ < m0 r1- fails"));
        }
        Ok(spec)
    }

    fn check_kind(&self) -> Result<()> {
        if !(self.tau0 > 0.0) || !self.tau0.is_finite() {
            return Err(Error::config("kirchhoff.tau0", "must be positive"));
        }
        let (m0, kappa) = match self.kind {
            KirchhoffKind::Constant { m0 } => (m0, 0.0),
            KirchhoffKind::Affine { m0, kappa } | KirchhoffKind::Saturating { m0, kappa } => (m0, kappa),
        };
        if !(m0 > 0.0) || !m0.is_finite() {
            return Err(Error::config("kirchhoff.m0", "must be positive"));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::config("kirchhoff.kappa", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn m0(&self) -> f64 {
        match self.kind {
            KirchhoffKind::Constant { m0 }
            | KirchhoffKind::Affine { m0, .. }
            | KirchhoffKind::Saturating { m0, .. } => m0,
        }
    }

    /// `M(t)`.
    pub fn m(&self, t: f64) -> f64 {
        match self.kind {
            KirchhoffKind::Constant { m0 } => m0,
            KirchhoffKind::Affine { m0, kappa } => m0 + kappa * t,
            KirchhoffKind::Saturating { m0, kappa } => m0 + kappa * t.min(0.5 * self.tau0),
        }
    }

    /// `∫₀ᵗ M(s) ds`.
    fn m_antiderivative(&self, t: f64) -> f64 {
        match self.kind {
            KirchhoffKind::Constant { m0 } => m0 * t,
            KirchhoffKind::Affine { m0, kappa } => m0 * t + 0.5 * kappa * t * t,
            KirchhoffKind::Saturating { m0, kappa } => {
                let c = 0.5 * self.tau0;
                if t <= c {
                    m0 * t + 0.5 * kappa * t * t
                } else {
                    m0 * t + 0.5 * kappa * c * c + kappa * c * (t - c)
                }
            }
        }
    }

    /// `M(t0)`.
    pub fn m_t0(&self) -> f64 {
        self.m(self.t0)
    }

    /// Truncation `M₀(t) = M(min(t, t0))`.
    pub fn m_trunc(&self, t: f64) -> f64 {
        self.m(t.min(self.t0))
    }

    /// `M̂₀(t) = ∫₀ᵗ M₀(s) ds`.
    pub fn m_hat(&self, t: f64) -> f64 {
        if t <= self.t0 {
            self.m_antiderivative(t)
        } else {
            self.m_antiderivative(self.t0) + self.m_t0() * (t - self.t0)
        }
    }
}
