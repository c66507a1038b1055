//! Gaussian states with prescribed first and second moments.
//!
//! A covariance matrix `V` with `ν = sqrt(det V) >= ħ/2` is the thermal
//! state of the quadratic Hamiltonian `H_G = ½ Xᵀ (V/ν)⁻¹ X` at the inverse
//! temperature `β = ln((2ν/ħ + 1)/(2ν/ħ - 1)) / ħ`, with
//! `X = (q - q0, p - p0)`. The state is built by exponentiating `H_G` on
//! whatever basis `q` and `p` live in.

use crate::basis::StateMatrix;
use crate::error::{QbeError, Result};
use crate::linalg::{self, c, CMatrix};
use crate::operators::CanonicalPair;

/// Relative slack on `ν = ħ/2` below which a state is treated as pure.
pub const PURE_TOL: f64 = 1e-10;

/// Means and symmetrized central second moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

impl GaussianMoments {
    /// Pure Gaussian with `cov_qp = squeeze ħ/2` and the momentum variance
    /// that saturates the Robertson-Schrödinger bound.
    pub fn pure(mean_q: f64, mean_p: f64, var_q: f64, squeeze: f64, hbar: f64) -> Result<Self> {
        if !(var_q.is_finite() && var_q > 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "var_q",
                reason: format!("must be finite and > 0, got {var_q}"),
            });
        }
        Ok(GaussianMoments {
            mean_q,
            mean_p,
            var_q,
            var_p: hbar * hbar * (1.0 + squeeze * squeeze) / (4.0 * var_q),
            cov_qp: squeeze * hbar / 2.0,
        })
    }

    /// Scales the covariance by `factor >= 1`, making the state mixed.
    pub fn mixed(self, factor: f64) -> Self {
        GaussianMoments {
            var_q: self.var_q * factor,
            var_p: self.var_p * factor,
            cov_qp: self.cov_qp * factor,
            ..self
        }
    }

    /// `var_q var_p - cov_qp²`.
    pub fn rs_determinant(&self) -> f64 {
        self.var_q * self.var_p - self.cov_qp * self.cov_qp
    }

    /// Symplectic eigenvalue `ν`.
    pub fn symplectic_eigenvalue(&self) -> f64 {
        self.rs_determinant().max(0.0).sqrt()
    }

    /// Purity `ħ / 2ν` of the Gaussian state with these moments.
    pub fn purity(&self, hbar: f64) -> f64 {
        hbar / (2.0 * self.symplectic_eigenvalue())
    }

    pub fn is_physical(&self, hbar: f64) -> bool {
        self.var_q > 0.0
            && self.var_p > 0.0
            && self.symplectic_eigenvalue() >= 0.5 * hbar * (1.0 - PURE_TOL)
    }
}

/// `½ Xᵀ M X` with `M = (V/ν)⁻¹` and symmetrized cross term.
fn reference_hamiltonian(m: &GaussianMoments, pair: &CanonicalPair) -> CMatrix {
    let nu = m.symplectic_eigenvalue();
    let (a, b, cq) = (m.var_q / nu, m.var_p / nu, m.cov_qp / nu);
    let d = pair.q.dim();
    let id = linalg::identity(d);
    let q = pair.q.matrix() - &(&id * c(m.mean_q));
    let p = pair.p.matrix() - &(&id * c(m.mean_p));
    let qq = q.dot(&q);
    let pp = p.dot(&p);
    let qp = q.dot(&p) + p.dot(&q);
    (qq * c(b) + pp * c(a) - qp * c(cq)) * c(0.5)
}

/// The Gaussian state with the given moments on the basis of `pair`.
pub fn gaussian_state(m: &GaussianMoments, pair: &CanonicalPair, hbar: f64) -> Result<StateMatrix> {
    if !m.is_physical(hbar) {
        return Err(QbeError::InvalidParameter {
            name: "covariance",
            reason: format!(
                "var_q var_p - cov_qp^2 = {:e} violates the uncertainty bound {:e}",
                m.rs_determinant(),
                hbar * hbar / 4.0
            ),
        });
    }
    let h = reference_hamiltonian(m, pair);
    let (vals, vecs) = linalg::eigh(&h)?;
    let x = 2.0 * m.symplectic_eigenvalue() / hbar;
    let rho = if x - 1.0 <= PURE_TOL {
        let psi = vecs.column(0).to_owned();
        let mut r = CMatrix::zeros((vals.len(), vals.len()));
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                r[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        r
    } else {
        let beta = ((x + 1.0) / (x - 1.0)).ln() / hbar;
        let e0 = vals[0];
        let r = linalg::reconstruct(&vals, &vecs, |e| c((-beta * (e - e0)).exp()));
        let tr = linalg::trace(&r).re;
        r.mapv(|z| z / tr)
    };
    StateMatrix::rho(pair.q.basis().clone(), linalg::hermitize(&rho))
}
