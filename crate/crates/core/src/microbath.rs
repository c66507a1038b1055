//! A system coupled to a few explicit bath oscillators, evolved exactly.
//!
//! The total Hamiltonian is
//! `H_T = H + Σ ħω_j(b_j†b_j + ½) + ħq Σ κ_j(b_j + b_j†) + ħq² Σ κ_j²/ω_j`,
//! built on the product basis `system ⊗ mode_1 ⊗ ... ⊗ mode_n`. With so few
//! modes there is no true dissipation; comparisons only make sense before
//! the first recurrence.

use std::f64::consts::PI;

use crate::basis::{BasisSpec, Operator, StateMatrix};
use crate::error::{QbeError, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::operators::{operator_function_real, partial_trace};
use crate::params::PhysParams;
use crate::superop::CONDITION_CAP;

/// Largest total Hilbert dimension handled.
pub const MAX_TOTAL_DIM: usize = 4096;
/// Largest thermal population a mode may have above its truncation.
pub const THERMAL_TAIL_TOL: f64 = 1e-3;

/// One bath oscillator with frequency `omega` and coupling `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub omega: f64,
    pub kappa: f64,
}

impl BathMode {
    /// `k_j = 2ħκ_j²/ω_j`
    pub fn spring(&self, hbar: f64) -> f64 {
        2.0 * hbar * self.kappa * self.kappa / self.omega
    }

    /// `m_j = 2ħκ_j²/ω_j³`
    pub fn mass(&self, hbar: f64) -> f64 {
        self.spring(hbar) / (self.omega * self.omega)
    }
}

/// A discretized Ohmic bath.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub n_modes: usize,
    pub per_mode_dim: usize,
    pub coupling: f64,
    pub omega_max: f64,
}

impl BathSpec {
    pub fn new(n_modes: usize, per_mode_dim: usize, coupling: f64, omega_max: f64) -> Result<Self> {
        let spec = BathSpec {
            n_modes,
            per_mode_dim,
            coupling,
            omega_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.n_modes) {
            return Err(QbeError::InvalidParameter {
                name: "bath.n_modes",
                reason: format!("must be in 1..=4, got {}", self.n_modes),
            });
        }
        if !(3..=8).contains(&self.per_mode_dim) {
            return Err(QbeError::InvalidParameter {
                name: "bath.per_mode_dim",
                reason: format!("must be in 3..=8, got {}", self.per_mode_dim),
            });
        }
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "bath.C",
                reason: format!("must be finite and > 0, got {}", self.coupling),
            });
        }
        if !(self.omega_max.is_finite() && self.omega_max > 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "bath.omega_max",
                reason: format!("must be finite and > 0, got {}", self.omega_max),
            });
        }
        Ok(())
    }

    pub fn modes(&self) -> Result<Vec<BathMode>> {
        ohmic_discretization(self.coupling, self.omega_max, self.n_modes)
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.per_mode_dim; self.n_modes]
    }

    /// Shortest recurrence time `2π/Δω` of the discretization.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI * self.n_modes as f64 / self.omega_max
    }
}

/// Midpoint rule for `κ²(ω) g(ω) = (C/2π) ω` on `(0, ω_max]`.
pub fn ohmic_discretization(
    coupling: f64,
    omega_max: f64,
    n_modes: usize,
) -> Result<Vec<BathMode>> {
    if n_modes == 0 {
        return Err(QbeError::InvalidParameter {
            name: "bath.n_modes",
            reason: "need at least one mode".into(),
        });
    }
    if !(omega_max.is_finite() && omega_max > 0.0) || !(coupling.is_finite() && coupling >= 0.0) {
        return Err(QbeError::InvalidParameter {
            name: "bath",
            reason: format!("need omega_max > 0 and C >= 0, got {omega_max} and {coupling}"),
        });
    }
    let dw = omega_max / n_modes as f64;
    Ok((1..=n_modes)
        .map(|j| {
            let omega = (j as f64 - 0.5) * dw;
            BathMode {
                omega,
                kappa: (coupling / (2.0 * PI) * omega * dw).sqrt(),
            }
        })
        .collect())
}

/// Thermal population of levels `>= dim` of an oscillator.
pub fn thermal_tail(omega: f64, dim: usize, hbar: f64, kt: f64) -> f64 {
    (-(dim as f64) * hbar * omega / kt).exp()
}

/// Refuses modes whose thermal population above the truncation exceeds
/// [`THERMAL_TAIL_TOL`].
pub fn check_truncation(modes: &[BathMode], dims: &[usize], params: &PhysParams) -> Result<()> {
    for (j, (m, &d)) in modes.iter().zip(dims).enumerate() {
        let population = thermal_tail(m.omega, d, params.hbar, params.kt());
        if population > THERMAL_TAIL_TOL {
            return Err(QbeError::BathTruncation {
                mode: j,
                dim: d,
                population,
            });
        }
    }
    Ok(())
}

fn check_total_dim(dims: &[usize]) -> Result<usize> {
    let dim = dims.iter().product();
    if dim > MAX_TOTAL_DIM {
        return Err(QbeError::TotalDimension {
            dim,
            cap: MAX_TOTAL_DIM,
        });
    }
    Ok(dim)
}

fn lowering(d: usize) -> CMatrix {
    let mut b = CMatrix::zeros((d, d));
    for n in 1..d {
        b[[n - 1, n]] = c((n as f64).sqrt());
    }
    b
}

/// `I ⊗ ... ⊗ op ⊗ ... ⊗ I` with `op` in slot `pos`.
fn embed(op: &CMatrix, pos: usize, dims: &[usize]) -> CMatrix {
    dims.iter()
        .enumerate()
        .fold(linalg::identity(1), |acc, (k, &d)| {
            if k == pos {
                linalg::kron(&acc, op)
            } else {
                linalg::kron(&acc, &linalg::identity(d))
            }
        })
}

fn product_of(system: &BasisSpec, modes: &[BathMode], dims: &[usize]) -> BasisSpec {
    let mut factors = vec![system.clone()];
    factors.extend(modes.iter().zip(dims).map(|(m, &d)| BasisSpec::Fock {
        dim: d,
        omega_ref: m.omega,
    }));
    BasisSpec::Product(factors)
}

fn check_modes(modes: &[BathMode], dims: &[usize]) -> Result<()> {
    if modes.len() != dims.len() {
        return Err(QbeError::DimensionMismatch(format!(
            "{} modes but {} mode dimensions",
            modes.len(),
            dims.len()
        )));
    }
    if let Some(m) = modes
        .iter()
        .find(|m| !(m.omega > 0.0 && m.kappa.is_finite()))
    {
        return Err(QbeError::InvalidParameter {
            name: "bath mode",
            reason: format!("need omega > 0 and finite kappa, got {m:?}"),
        });
    }
    Ok(())
}

/// The total Hamiltonian on `system ⊗ modes`; `H` itself when there are
/// no modes.
pub fn total_hamiltonian(
    h: &Operator,
    q: &Operator,
    modes: &[BathMode],
    dims: &[usize],
    hbar: f64,
) -> Result<Operator> {
    crate::basis::same_basis(h.basis(), q.basis())?;
    check_modes(modes, dims)?;
    if modes.is_empty() {
        return Ok(h.clone());
    }
    let mut all = vec![h.dim()];
    all.extend_from_slice(dims);
    let total = check_total_dim(&all)?;
    let mut ht = embed(h.matrix(), 0, &all);
    let qs = q.matrix();
    let counter: f64 = modes.iter().map(|m| m.kappa * m.kappa / m.omega).sum();
    ht = ht + embed(&qs.dot(qs), 0, &all) * c(hbar * counter);
    let q_full = embed(qs, 0, &all);
    for (j, (m, &d)) in modes.iter().zip(dims).enumerate() {
        let b = lowering(d);
        let bd = linalg::dagger(&b);
        let number = bd.dot(&b) + linalg::identity(d) * c(0.5);
        ht = ht + embed(&number, j + 1, &all) * c(hbar * m.omega);
        let x = embed(&(&b + &bd), j + 1, &all);
        ht = ht + q_full.dot(&x) * c(hbar * m.kappa);
    }
    debug_assert_eq!(ht.nrows(), total);
    Operator::hermitian(product_of(h.basis(), modes, dims), linalg::hermitize(&ht))
}

/// Gibbs state of one truncated mode.
fn mode_thermal(mode: &BathMode, d: usize, params: &PhysParams) -> CMatrix {
    let x = params.hbar * mode.omega / params.kt();
    let w: Vec<f64> = (0..d).map(|n| (-(n as f64) * x).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut m = CMatrix::zeros((d, d));
    for (n, wn) in w.iter().enumerate() {
        m[[n, n]] = c(wn / z);
    }
    m
}

/// `ρ0 ⊗ ρ_r,can` with per-mode Gibbs states.
pub fn product_initial_state(
    rho0: &StateMatrix,
    modes: &[BathMode],
    dims: &[usize],
    params: &PhysParams,
) -> Result<StateMatrix> {
    check_modes(modes, dims)?;
    let mut all = vec![rho0.dim()];
    all.extend_from_slice(dims);
    check_total_dim(&all)?;
    let m = modes
        .iter()
        .zip(dims)
        .fold(rho0.matrix().clone(), |acc, (mode, &d)| {
            linalg::kron(&acc, &mode_thermal(mode, d, params))
        });
    StateMatrix::rho(product_of(rho0.basis(), modes, dims), linalg::hermitize(&m))
}

fn shifted_exp(h: &Operator, sign: f64, kt: f64) -> Result<Operator> {
    let vals = linalg::eigvalsh(h.matrix())?;
    let (e_min, e_max) = (vals[0], vals[vals.len() - 1]);
    let condition = ((e_max - e_min) / (2.0 * kt)).exp();
    if !(condition <= CONDITION_CAP) {
        return Err(QbeError::Conditioning {
            e_min,
            e_max,
            condition,
        });
    }
    let anchor = if sign > 0.0 { e_max } else { e_min };
    operator_function_real(h, |e| (sign * (e - anchor) / (2.0 * kt)).exp())
}

/// `e^{-H_T/2kT} e^{H/2kT} (σ0 ⊗ 1) e^{H/2kT} e^{-H_T/2kT}`, normalized.
pub fn correlated_initial_state(
    sigma0: &StateMatrix,
    h_t: &Operator,
    h: &Operator,
    params: &PhysParams,
) -> Result<StateMatrix> {
    crate::basis::same_basis(sigma0.basis(), h.basis())?;
    let s = sigma0.matrix();
    let min = linalg::eigvalsh(&linalg::hermitize(s))?[0];
    if min < -crate::models::SIGMA_POSITIVITY_TOL * linalg::trace(s).re.abs() {
        return Err(QbeError::NotPositive { eigenvalue: min });
    }
    let up = shifted_exp(h, 1.0, params.kt())?;
    let down = shifted_exp(h_t, -1.0, params.kt())?;
    let inner = up.matrix().dot(s).dot(up.matrix());
    let rest = h_t.dim() / h.dim();
    if rest * h.dim() != h_t.dim() {
        return Err(QbeError::DimensionMismatch(format!(
            "system dimension {} does not divide total dimension {}",
            h.dim(),
            h_t.dim()
        )));
    }
    let lifted = linalg::kron(&inner, &linalg::identity(rest));
    let total = down.matrix().dot(&lifted).dot(down.matrix());
    let tr = linalg::trace(&total).re;
    if !(tr >= crate::models::MIN_TRACE) {
        return Err(QbeError::Normalization { trace: tr });
    }
    StateMatrix::rho(
        h_t.basis().clone(),
        linalg::hermitize(&total).mapv(|z| z / tr),
    )
}

/// Unitary evolution under a fixed total Hamiltonian, diagonalized once.
#[derive(Debug, Clone)]
pub struct ExactEvolution {
    basis: BasisSpec,
    energies: ndarray::Array1<f64>,
    vecs: CMatrix,
    vecs_dag: CMatrix,
    hbar: f64,
}

impl ExactEvolution {
    pub fn new(h_t: &Operator, hbar: f64) -> Result<Self> {
        check_total_dim(&[h_t.dim()])?;
        let (energies, vecs) = linalg::eigh(h_t.matrix())?;
        Ok(ExactEvolution {
            basis: h_t.basis().clone(),
            vecs_dag: linalg::dagger(&vecs),
            energies,
            vecs,
            hbar,
        })
    }

    /// `e^{-iH_T t/ħ} ρ e^{iH_T t/ħ}`.
    pub fn evolve(&self, rho: &CMatrix, t: f64) -> CMatrix {
        let framed = self.vecs_dag.dot(rho).dot(&self.vecs);
        let e = &self.energies;
        let hbar = self.hbar;
        let rotated = CMatrix::from_shape_fn(framed.raw_dim(), |(i, j)| {
            framed[[i, j]] * C64::from_polar(1.0, -(e[i] - e[j]) * t / hbar)
        });
        self.vecs.dot(&rotated).dot(&self.vecs_dag)
    }

    /// Reduced system states at each time.
    pub fn reduce(&self, rho_t0: &StateMatrix, times: &[f64]) -> Result<Vec<StateMatrix>> {
        crate::basis::same_basis(&self.basis, rho_t0.basis())?;
        let dims = self.basis.factor_dims();
        times
            .iter()
            .map(|&t| {
                let full =
                    StateMatrix::unnormalized(self.basis.clone(), self.evolve(rho_t0.matrix(), t))?;
                let red = partial_trace(&full, &dims, 0)?;
                StateMatrix::rho(red.basis().clone(), linalg::hermitize(red.matrix()))
            })
            .collect()
    }
}

/// `ρ(t) = Tr_r[e^{-iH_T t/ħ} ρ_T0 e^{iH_T t/ħ}]` at every time.
pub fn exact_reduce(
    rho_t0: &StateMatrix,
    h_t: &Operator,
    times: &[f64],
    hbar: f64,
) -> Result<Vec<StateMatrix>> {
    ExactEvolution::new(h_t, hbar)?.reduce(rho_t0, times)
}
