//! Scalar measurements on density-like matrices.

use std::fmt::Write as _;

use crate::error::Result;
use crate::gaussian::{gaussian_state, GaussianMoments};
use crate::linalg::{self, CMatrix};
use crate::operators::CanonicalPair;
use crate::superop::Superoperator;

/// Minimum eigenvalue of the Hermitized matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min_eig: f64,
    pub is_positive: bool,
}

/// `is_positive` iff `min_eig >= -tol * Tr ρ`.
pub fn positivity_report(rho: &CMatrix, tol: f64) -> Result<PositivityReport> {
    let min_eig = min_eigenvalue(rho)?;
    let tr = linalg::trace(rho).re;
    Ok(PositivityReport {
        min_eig,
        is_positive: min_eig >= -tol * tr.abs(),
    })
}

pub fn min_eigenvalue(rho: &CMatrix) -> Result<f64> {
    Ok(linalg::eigvalsh(rho)?[0])
}

/// `Re Tr ρ²`.
pub fn purity(rho: &CMatrix) -> f64 {
    let n = rho.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (rho[[i, j]] * rho[[j, i]]).re;
        }
    }
    acc
}

/// `d Tr ρ²/dt = 2 Re Tr(ρ G(ρ))`.
pub fn purity_rate<G: Superoperator + ?Sized>(g: &G, rho: &CMatrix) -> f64 {
    let dr = g.apply(rho);
    2.0 * linalg::trace(&rho.dot(&dr)).re
}

/// Means, variances and the symmetrized covariance, normalized by the
/// trace of `rho`.
pub fn gaussian_moments(rho: &CMatrix, pair: &CanonicalPair) -> GaussianMoments {
    let q = pair.q.matrix();
    let p = pair.p.matrix();
    let tr = linalg::trace(rho).re;
    let ev = |a: &CMatrix| linalg::trace(&rho.dot(a)).re / tr;
    let mean_q = ev(q);
    let mean_p = ev(p);
    let qq = ev(&q.dot(q));
    let pp = ev(&p.dot(p));
    let qp = 0.5 * ev(&(q.dot(p) + p.dot(q)));
    GaussianMoments {
        mean_q,
        mean_p,
        var_q: qq - mean_q * mean_q,
        var_p: pp - mean_p * mean_p,
        cov_qp: qp - mean_q * mean_p,
    }
}

/// Trace distance to the Gaussian state with matching moments, or `None`
/// when the moments violate the uncertainty relation.
pub fn gaussianity_defect(rho: &CMatrix, pair: &CanonicalPair, hbar: f64) -> Result<Option<f64>> {
    let m = gaussian_moments(rho, pair);
    if !m.is_physical(hbar) {
        return Ok(None);
    }
    let reference = gaussian_state(&m, pair, hbar)?;
    let tr = linalg::trace(rho).re;
    let normalized = rho.mapv(|z| z / tr);
    Ok(Some(trace_distance(&normalized, reference.matrix())?))
}

/// `½ ‖ρ - ς‖₁` of the Hermitized difference.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let diff = linalg::hermitize(&(a - b));
    Ok(0.5
        * linalg::eigvalsh(&diff)?
            .iter()
            .map(|v| v.abs())
            .sum::<f64>())
}

/// `‖G(σ)‖₁ / ‖σ‖₁`.
pub fn stationarity_residual<G: Superoperator + ?Sized>(g: &G, sigma: &CMatrix) -> Result<f64> {
    let out = g.apply(sigma);
    Ok(linalg::trace_norm(&out)? / linalg::trace_norm(sigma)?)
}

pub const CSV_HEADER: &str =
    "t,trace_re,trace_im,purity,min_eig,herm_defect,mean_q,mean_p,var_q,var_p,cov_qp,D_approx,gauss_defect";

/// One sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub trace_re: f64,
    pub trace_im: f64,
    pub purity: f64,
    pub min_eig: f64,
    pub herm_defect: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
    pub d_approx: Option<f64>,
    pub gauss_defect: Option<f64>,
}

impl DiagnosticsRow {
    /// Measures `state`; moments are normalized by its trace, purity and
    /// eigenvalues are not.
    pub fn measure(t: f64, state: &CMatrix, pair: &CanonicalPair) -> Result<Self> {
        let tr = linalg::trace(state);
        let m = gaussian_moments(state, pair);
        Ok(DiagnosticsRow {
            t,
            trace_re: tr.re,
            trace_im: tr.im,
            purity: purity(state),
            min_eig: min_eigenvalue(state)?,
            herm_defect: linalg::hermiticity_defect_abs(state),
            mean_q: m.mean_q,
            mean_p: m.mean_p,
            var_q: m.var_q,
            var_p: m.var_p,
            cov_qp: m.cov_qp,
            d_approx: None,
            gauss_defect: None,
        })
    }

    pub fn with_d_approx(mut self, d: f64) -> Self {
        self.d_approx = Some(d);
        self
    }

    pub fn with_gauss_defect(mut self, g: Option<f64>) -> Self {
        self.gauss_defect = g;
        self
    }

    pub fn values(&self) -> [(&'static str, Option<f64>); 13] {
        [
            ("t", Some(self.t)),
            ("trace_re", Some(self.trace_re)),
            ("trace_im", Some(self.trace_im)),
            ("purity", Some(self.purity)),
            ("min_eig", Some(self.min_eig)),
            ("herm_defect", Some(self.herm_defect)),
            ("mean_q", Some(self.mean_q)),
            ("mean_p", Some(self.mean_p)),
            ("var_q", Some(self.var_q)),
            ("var_p", Some(self.var_p)),
            ("cov_qp", Some(self.cov_qp)),
            ("D_approx", self.d_approx),
            ("gauss_defect", self.gauss_defect),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (i, (_, v)) in self.values().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format_value(*v));
        }
        s
    }
}

/// Twelve significant digits in scientific notation, `nan` when absent.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) if !x.is_nan() => format!("{x:.11e}"),
        _ => "nan".to_string(),
    }
}

pub fn rows_to_csv(rows: &[DiagnosticsRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 200);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv());
    }
    s
}
