//! Canonical operators, potentials, operator functions, tensor products,
//! partial traces and the Fock/grid change of basis.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::basis::{same_basis, BasisSpec, Operator, StateMatrix};
use crate::error::{QbeError, Result};
use crate::linalg::{self, c, CMatrix, C64, I, ZERO};
use crate::params::PhysParams;

/// Round-trip threshold for [`basis_change`].
pub const RESOLUTION_TOL: f64 = 1e-6;
/// Allowed probability in the outer tenth of a grid box.
pub const BOUNDARY_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FockOperators {
    pub q: Operator,
    pub p: Operator,
    /// Truncated lowering operator.
    pub a: Operator,
}

#[derive(Debug, Clone)]
pub struct GridOperators {
    pub q: Operator,
    pub p: Operator,
}

/// Position and momentum for either kind of single-particle basis.
#[derive(Debug, Clone)]
pub struct CanonicalPair {
    pub q: Operator,
    pub p: Operator,
}

/// Ladder-operator construction of `q` and `p` on a Fock basis.
pub fn build_fock_operators(basis: &BasisSpec, params: &PhysParams) -> Result<FockOperators> {
    let (dim, omega) = match *basis {
        BasisSpec::Fock { dim, omega_ref } => (dim, omega_ref),
        _ => {
            return Err(QbeError::RepresentationMismatch {
                expected: "fock",
                found: basis.kind_name().to_string(),
            })
        }
    };
    basis.validate()?;
    let mut a = CMatrix::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = c((n as f64).sqrt());
    }
    let ad = linalg::dagger(&a);
    let q_scale = (params.hbar / (2.0 * params.mass * omega)).sqrt();
    let p_scale = (params.hbar * params.mass * omega / 2.0).sqrt();
    let q = (&a + &ad).mapv(|z| z * q_scale);
    let p = (&ad - &a).mapv(|z| z * I * p_scale);
    Ok(FockOperators {
        q: Operator::hermitian(basis.clone(), q)?,
        p: Operator::hermitian(basis.clone(), p)?,
        a: Operator::new(basis.clone(), a)?,
    })
}

/// Position (diagonal) and spectrally differentiated momentum on a
/// periodic grid. The unpaired Nyquist mode of an even grid is given zero
/// momentum, which keeps `p` purely imaginary and antisymmetric.
pub fn build_grid_operators(basis: &BasisSpec, params: &PhysParams) -> Result<GridOperators> {
    let n = match *basis {
        BasisSpec::Grid { n, .. } => n,
        _ => {
            return Err(QbeError::RepresentationMismatch {
                expected: "grid",
                found: basis.kind_name().to_string(),
            })
        }
    };
    basis.validate()?;
    let x = basis.points().unwrap();
    let dx = basis.spacing().unwrap();
    let q = Array2::from_diag(&x.mapv(c));
    let length = n as f64 * dx;
    let modes: Vec<i64> = (0..n as i64)
        .map(|m| {
            if m < (n as i64 + 1) / 2 {
                m
            } else {
                m - n as i64
            }
        })
        .filter(|&m| !(n % 2 == 0 && m == -(n as i64) / 2))
        .collect();
    // p_{jl} depends only on j - l
    let mut kernel = vec![ZERO; 2 * n - 1];
    for (idx, slot) in kernel.iter_mut().enumerate() {
        let s = idx as f64 - (n as f64 - 1.0);
        let mut acc = ZERO;
        for &m in &modes {
            let k = 2.0 * PI * m as f64 / length;
            let phase = 2.0 * PI * m as f64 * s / n as f64;
            acc += C64::new(0.0, phase).exp() * k;
        }
        *slot = acc * (params.hbar / n as f64);
    }
    let p = Array2::from_shape_fn((n, n), |(j, l)| kernel[j + n - 1 - l]);
    Ok(GridOperators {
        q: Operator::hermitian(basis.clone(), q)?,
        p: Operator::hermitian(basis.clone(), p)?,
    })
}

/// `q` and `p` for a Fock or grid basis.
pub fn canonical_pair(basis: &BasisSpec, params: &PhysParams) -> Result<CanonicalPair> {
    match basis {
        BasisSpec::Fock { .. } => {
            let ops = build_fock_operators(basis, params)?;
            Ok(CanonicalPair { q: ops.q, p: ops.p })
        }
        BasisSpec::Grid { .. } => {
            let ops = build_grid_operators(basis, params)?;
            Ok(CanonicalPair { q: ops.q, p: ops.p })
        }
        BasisSpec::Product(_) => Err(QbeError::UnsupportedRepresentation(
            "canonical operators on a product basis",
        )),
    }
}

/// `U f(Λ) U†` for Hermitian `H = U Λ U†`. Non-finite values of `f` are
/// domain errors.
pub fn operator_function<F: Fn(f64) -> C64>(h: &Operator, f: F) -> Result<Operator> {
    let defect = h.hermiticity_defect();
    if defect > crate::basis::OPERATOR_HERMITICITY_TOL {
        return Err(QbeError::NotHermitian { defect });
    }
    let (vals, vecs) = linalg::eigh(h.matrix())?;
    if let Some(&v) = vals.iter().find(|&&v| !f(v).is_finite()) {
        return Err(QbeError::Domain { eigenvalue: v });
    }
    let m = linalg::reconstruct(&vals, &vecs, &f);
    Ok(Operator::new(h.basis().clone(), m)?.try_hermitian())
}

/// Real-valued [`operator_function`]; the result is flagged Hermitian.
pub fn operator_function_real<F: Fn(f64) -> f64>(h: &Operator, f: F) -> Result<Operator> {
    let out = operator_function(h, |x| c(f(x)))?;
    Operator::hermitian(out.basis().clone(), linalg::hermitize(out.matrix()))
}

/// Polynomial potential `V(q) = sum_j c_j q^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub coefficients: Vec<f64>,
    /// Drop the kinetic term when building the Hamiltonian.
    pub recoilless: bool,
}

impl PotentialSpec {
    pub fn free() -> Self {
        PotentialSpec {
            coefficients: vec![],
            recoilless: false,
        }
    }

    /// `m omega^2 q^2 / 2`.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        PotentialSpec {
            coefficients: vec![0.0, 0.0, 0.5 * mass * omega * omega],
            recoilless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.coefficients.iter().find(|x| !x.is_finite()) {
            return Err(QbeError::InvalidParameter {
                name: "potential.coefficients",
                reason: format!("non-finite coefficient {bad}"),
            });
        }
        Ok(())
    }

    pub fn is_free(&self) -> bool {
        self.coefficients.iter().all(|&x| x == 0.0)
    }
}

/// Horner evaluation of the potential on `q`.
pub fn potential_operator(spec: &PotentialSpec, q: &Operator) -> Result<Operator> {
    spec.validate()?;
    let d = q.dim();
    let mut v = CMatrix::zeros((d, d));
    for &coef in spec.coefficients.iter().rev() {
        v = v.dot(q.matrix());
        for i in 0..d {
            v[[i, i]] += coef;
        }
    }
    Operator::hermitian(q.basis().clone(), linalg::hermitize(&v))
}

/// `p^2/2m + V(q)`, or just `V(q)` in the recoilless limit.
pub fn hamiltonian(
    spec: &PotentialSpec,
    pair: &CanonicalPair,
    params: &PhysParams,
) -> Result<Operator> {
    same_basis(pair.q.basis(), pair.p.basis())?;
    let v = potential_operator(spec, &pair.q)?;
    if spec.recoilless {
        return Ok(v);
    }
    let p = pair.p.matrix();
    let kinetic = p.dot(p).mapv(|z| z / (2.0 * params.mass));
    Operator::hermitian(
        v.basis().clone(),
        linalg::hermitize(&(kinetic + v.matrix())),
    )
}

/// Kronecker product on the product basis.
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator> {
    let basis = product_basis(a.basis(), b.basis());
    let m = linalg::kron(a.matrix(), b.matrix());
    let op = Operator::new(basis, m)?;
    Ok(if a.is_hermitian() && b.is_hermitian() {
        op.try_hermitian()
    } else {
        op
    })
}

/// Tensor product of two states, keeping the role of the first.
pub fn tensor_states(a: &StateMatrix, b: &StateMatrix) -> Result<StateMatrix> {
    let basis = product_basis(a.basis(), b.basis());
    let m = linalg::kron(a.matrix(), b.matrix());
    Ok(StateMatrix::unnormalized(basis, m)?.with_role(a.role()))
}

pub(crate) fn product_basis(a: &BasisSpec, b: &BasisSpec) -> BasisSpec {
    let mut factors = match a {
        BasisSpec::Product(f) => f.clone(),
        other => vec![other.clone()],
    };
    match b {
        BasisSpec::Product(f) => factors.extend(f.iter().cloned()),
        other => factors.push(other.clone()),
    }
    BasisSpec::Product(factors)
}

/// Reduced matrix on factor `keep` of a product with dimensions `dims`.
pub fn partial_trace(rho_t: &StateMatrix, dims: &[usize], keep: usize) -> Result<StateMatrix> {
    let m = linalg::partial_trace_keep(rho_t.matrix(), dims, keep)?;
    let basis = match rho_t.basis() {
        BasisSpec::Product(f) if f.len() == dims.len() => f[keep].clone(),
        _ => BasisSpec::Fock {
            dim: dims[keep],
            omega_ref: 1.0,
        },
    };
    Ok(StateMatrix::unnormalized(basis, m)?.with_role(rho_t.role()))
}

/// Normalized Hermite functions `phi_0..phi_{dim-1}` at `x` for oscillator
/// length `ell`, by the stable three-term recurrence.
pub fn hermite_functions(x: f64, ell: f64, dim: usize) -> Vec<f64> {
    let xi = x / ell;
    let mut out = vec![0.0; dim];
    if dim == 0 {
        return out;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * xi * xi).exp() / ell.sqrt();
    if dim > 1 {
        out[1] = 2.0_f64.sqrt() * xi * out[0];
    }
    for n in 1..dim.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] =
            (2.0 / (nf + 1.0)).sqrt() * xi * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
    out
}

/// Rectangular `n_grid x dim` matrix of Hermite functions at the grid
/// points with `sqrt(dx)` quadrature weights.
pub fn hermite_matrix(fock: &BasisSpec, grid: &BasisSpec, params: &PhysParams) -> Result<CMatrix> {
    let (dim, omega) = match *fock {
        BasisSpec::Fock { dim, omega_ref } => (dim, omega_ref),
        _ => {
            return Err(QbeError::RepresentationMismatch {
                expected: "fock",
                found: fock.kind_name().into(),
            })
        }
    };
    let x = grid.points().ok_or(QbeError::RepresentationMismatch {
        expected: "grid",
        found: grid.kind_name().into(),
    })?;
    let w = grid.spacing().unwrap().sqrt();
    let ell = (params.hbar / (params.mass * omega)).sqrt();
    let mut phi = CMatrix::zeros((x.len(), dim));
    for (j, &xj) in x.iter().enumerate() {
        for (n, v) in hermite_functions(xj, ell, dim).into_iter().enumerate() {
            phi[[j, n]] = c(v * w);
        }
    }
    Ok(phi)
}

/// Conjugates `A` from a Fock basis to a grid basis or back. The grid must
/// resolve every retained Hermite function: the Fock round trip error
/// `max |Φ†Φ - I|` must not exceed [`RESOLUTION_TOL`].
pub fn basis_change(a: &Operator, to: &BasisSpec, params: &PhysParams) -> Result<Operator> {
    let from = a.basis();
    let (fock, grid, forward) = match (from, to) {
        (BasisSpec::Fock { .. }, BasisSpec::Grid { .. }) => (from, to, true),
        (BasisSpec::Grid { .. }, BasisSpec::Fock { .. }) => (to, from, false),
        _ if from == to => return Ok(a.clone()),
        _ => {
            return Err(QbeError::UnsupportedRepresentation(
                "basis change other than Fock <-> grid",
            ))
        }
    };
    to.validate()?;
    let phi = hermite_matrix(fock, grid, params)?;
    let phid = linalg::dagger(&phi);
    let gram = phid.dot(&phi);
    let err = linalg::max_abs(&(gram - linalg::identity(fock.dim())));
    if err > RESOLUTION_TOL {
        return Err(QbeError::Resolution {
            error: err,
            threshold: RESOLUTION_TOL,
        });
    }
    let m = if forward {
        phi.dot(a.matrix()).dot(&phid)
    } else {
        phid.dot(a.matrix()).dot(&phi)
    };
    let out = Operator::new(to.clone(), m)?;
    Ok(if a.is_hermitian() {
        out.try_hermitian()
    } else {
        out
    })
}

/// Same as [`basis_change`] for states, keeping the role.
pub fn change_state_basis(
    s: &StateMatrix,
    to: &BasisSpec,
    params: &PhysParams,
) -> Result<StateMatrix> {
    let op = Operator::new(s.basis().clone(), s.matrix().clone())?;
    let out = basis_change(&op, to, params)?;
    Ok(StateMatrix::unnormalized(to.clone(), out.into_matrix())?.with_role(s.role()))
}

/// Probability in the outer tenth of a grid box (5% at each edge).
pub fn boundary_mass(rho: &CMatrix, basis: &BasisSpec) -> Option<f64> {
    let n = match basis {
        BasisSpec::Grid { n, .. } => *n,
        _ => return None,
    };
    let edge = ((n as f64) * 0.05).ceil() as usize;
    let total = linalg::trace(rho).re;
    let mut mass = 0.0;
    for j in (0..edge).chain(n - edge..n) {
        mass += rho[[j, j]].re;
    }
    Some(if total != 0.0 { mass / total } else { mass })
}

/// Logs a warning when a grid state leaks into the box edges.
pub fn check_boundary(rho: &CMatrix, basis: &BasisSpec) -> Option<f64> {
    let mass = boundary_mass(rho, basis)?;
    if mass > BOUNDARY_MASS_TOL {
        log::warn!("boundary mass {mass:.3e} exceeds {BOUNDARY_MASS_TOL:.0e}; enlarge the grid");
    }
    Some(mass)
}

/// Column vector from a wavefunction sampled on the grid.
pub fn sample_on_grid<F: Fn(f64) -> C64>(basis: &BasisSpec, f: F) -> Option<Array1<C64>> {
    basis.points().map(|x| x.mapv(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, ONE};
    use ndarray::Array1;

    fn unit() -> PhysParams {
        PhysParams::natural(1.0, 1.0, 0.1, 10.0).unwrap()
    }

    #[test]
    fn fock_dim2_position() {
        let b = BasisSpec::fock(2, 1.0).unwrap();
        let ops = build_fock_operators(&b, &unit()).unwrap();
        let s = 0.5_f64.sqrt();
        assert!((ops.q.matrix()[[0, 1]] - c(s)).norm() < 1e-15);
        assert!((ops.q.matrix()[[1, 0]] - c(s)).norm() < 1e-15);
        assert!(ops.q.matrix()[[0, 0]].norm() < 1e-15);
    }

    #[test]
    fn fock_dim3_position_entry() {
        let b = BasisSpec::fock(3, 1.0).unwrap();
        let ops = build_fock_operators(&b, &unit()).unwrap();
        assert!((ops.q.matrix()[[1, 2]] - ONE).norm() < 1e-15);
        assert!((ops.q.matrix()[[2, 1]] - ONE).norm() < 1e-15);
    }

    #[test]
    fn truncated_commutator_is_exact() {
        let params = PhysParams::new(0.7, 1.0, 1.9, 1.0, 0.1, 1.0).unwrap();
        for d in [2usize, 5, 17] {
            for omega in [1.0, 0.37] {
                let b = BasisSpec::fock(d, omega).unwrap();
                let ops = build_fock_operators(&b, &params).unwrap();
                let comm = linalg::commutator(ops.q.matrix(), ops.p.matrix());
                let mut expected = CMatrix::zeros((d, d));
                for i in 0..d {
                    expected[[i, i]] = I * params.hbar;
                }
                expected[[d - 1, d - 1]] = -I * params.hbar * (d as f64 - 1.0);
                assert!(max_abs(&(comm - expected)) < 1e-13);
            }
        }
    }

    #[test]
    fn non_fock_basis_is_rejected() {
        let g = BasisSpec::grid(-1.0, 1.0, 8).unwrap();
        assert!(matches!(
            build_fock_operators(&g, &unit()),
            Err(QbeError::RepresentationMismatch { .. })
        ));
        let f = BasisSpec::fock(4, 1.0).unwrap();
        assert!(build_grid_operators(&f, &unit()).is_err());
    }

    #[test]
    fn grid_position_is_the_grid() {
        let b = BasisSpec::grid(-5.0, 5.0, 64).unwrap();
        let ops = build_grid_operators(&b, &unit()).unwrap();
        let x = b.points().unwrap();
        for j in 0..64 {
            assert!((ops.q.matrix()[[j, j]] - c(x[j])).norm() < 1e-15);
        }
        assert!(ops.p.is_hermitian());
    }

    #[test]
    fn plane_waves_are_momentum_eigenvectors() {
        let b = BasisSpec::grid(-5.0, 5.0, 64).unwrap();
        let hbar = 1.3;
        let params = PhysParams::new(hbar, 1.0, 1.0, 1.0, 0.1, 1.0).unwrap();
        let ops = build_grid_operators(&b, &params).unwrap();
        for m in [-7i32, -1, 0, 3, 31] {
            let k = 2.0 * PI * m as f64 / 10.0;
            let col = sample_on_grid(&b, |x| C64::new(0.0, k * x).exp()).unwrap();
            let out = ops.p.matrix().dot(&col);
            let err = (&out - &col.mapv(|z| z * hbar * k))
                .iter()
                .fold(0.0_f64, |a, z| a.max(z.norm()));
            assert!(err < 1e-10, "m = {m}: {err}");
        }
    }

    #[test]
    fn spectral_commutator_on_gaussian() {
        let b = BasisSpec::grid(-10.0, 10.0, 128).unwrap();
        let ops = build_grid_operators(&b, &unit()).unwrap();
        let col = sample_on_grid(&b, |x| c((-x * x / 2.0).exp())).unwrap();
        let comm = linalg::commutator(ops.q.matrix(), ops.p.matrix());
        let resid = comm.dot(&col) - col.mapv(|z| z * I);
        let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let worst = resid.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        assert!(worst / norm <= 1e-6, "{worst}");
    }

    #[test]
    fn exp_of_diagonal_operator() {
        let b = BasisSpec::fock(2, 1.0).unwrap();
        let h = Operator::hermitian(
            b,
            Array2::from_diag(&Array1::from(vec![c(0.0), c(2.0_f64.ln())])),
        )
        .unwrap();
        let e = operator_function_real(&h, f64::exp).unwrap();
        assert!((e.matrix()[[0, 0]] - ONE).norm() < 1e-14);
        assert!((e.matrix()[[1, 1]] - c(2.0)).norm() < 1e-13);
    }

    #[test]
    fn exp_then_log_round_trip() {
        let b = BasisSpec::fock(12, 1.0).unwrap();
        let ops = build_fock_operators(&b, &unit()).unwrap();
        let h = hamiltonian(
            &PotentialSpec::harmonic(1.0, 1.0),
            &CanonicalPair {
                q: ops.q.clone(),
                p: ops.p.clone(),
            },
            &unit(),
        )
        .unwrap();
        let h = Operator::hermitian(b.clone(), h.matrix() + ops.q.matrix()).unwrap();
        let e = operator_function_real(&h, f64::exp).unwrap();
        let back = operator_function_real(&e, f64::ln).unwrap();
        assert!(max_abs(&(back.matrix() - h.matrix())) < 1e-10);
    }

    #[test]
    fn log_of_negative_is_domain_error() {
        let b = BasisSpec::fock(2, 1.0).unwrap();
        let h = Operator::hermitian(b, Array2::from_diag(&Array1::from(vec![c(-1.0), c(1.0)])))
            .unwrap();
        assert!(matches!(
            operator_function_real(&h, f64::ln),
            Err(QbeError::Domain { .. })
        ));
    }

    #[test]
    fn non_hermitian_function_argument_is_rejected() {
        let b = BasisSpec::fock(3, 1.0).unwrap();
        let ops = build_fock_operators(&b, &unit()).unwrap();
        assert!(matches!(
            operator_function_real(&ops.a, f64::exp),
            Err(QbeError::NotHermitian { .. })
        ));
    }

    #[test]
    fn thermal_factor_on_grid() {
        let b = BasisSpec::grid(-4.0, 4.0, 16).unwrap();
        let ops = build_grid_operators(&b, &unit()).unwrap();
        let q2 = ops.q.compose(&ops.q).unwrap().try_hermitian();
        let f = operator_function_real(&q2, |e| (-e / 2.0).exp()).unwrap();
        let x = b.points().unwrap();
        for j in 0..16 {
            assert!((f.matrix()[[j, j]].re - (-x[j] * x[j] / 2.0).exp()).abs() < 1e-13);
        }
        assert!(max_abs(&(f.matrix() - &Array2::from_diag(&f.matrix().diag().to_owned()))) < 1e-13);
    }

    #[test]
    fn exp_plus_minus_is_identity() {
        // spectral radius close to 50 in an exactly known eigenbasis
        let b = BasisSpec::fock(20, 1.0).unwrap();
        let ops = build_fock_operators(&b, &unit()).unwrap();
        let pair = CanonicalPair { q: ops.q, p: ops.p };
        let h = hamiltonian(&PotentialSpec::harmonic(1.0, 1.0), &pair, &unit()).unwrap();
        let h = Operator::hermitian(b.clone(), h.matrix() * c(2.5)).unwrap();
        let ep = operator_function_real(&h, f64::exp).unwrap();
        let em = operator_function_real(&h, |x| (-x).exp()).unwrap();
        let prod = ep.matrix().dot(em.matrix());
        assert!(max_abs(&(prod - linalg::identity(20))) < 1e-10);
    }

    #[test]
    fn potential_examples() {
        let b = BasisSpec::fock(40, 1.0).unwrap();
        let ops = build_fock_operators(&b, &unit()).unwrap();
        let zero = potential_operator(&PotentialSpec::free(), &ops.q).unwrap();
        assert_eq!(max_abs(zero.matrix()), 0.0);
        let zero2 = potential_operator(
            &PotentialSpec {
                coefficients: vec![0.0],
                recoilless: false,
            },
            &ops.q,
        )
        .unwrap();
        assert_eq!(max_abs(zero2.matrix()), 0.0);
        let shift = potential_operator(
            &PotentialSpec {
                coefficients: vec![2.5],
                recoilless: false,
            },
            &ops.q,
        )
        .unwrap();
        assert!(max_abs(&(shift.matrix() - linalg::identity(40) * c(2.5))) < 1e-15);

        let pair = CanonicalPair {
            q: ops.q.clone(),
            p: ops.p.clone(),
        };
        let h = hamiltonian(
            &PotentialSpec {
                coefficients: vec![0.0, 0.0, 0.5],
                recoilless: false,
            },
            &pair,
            &unit(),
        )
        .unwrap();
        let e = linalg::eigvalsh(h.matrix()).unwrap();
        for n in 0..=10 {
            assert!((e[n] - (n as f64 + 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn physics_is_independent_of_omega_ref() {
        // anharmonic ground energy, two representation frequencies
        let spec = PotentialSpec {
            coefficients: vec![0.0, 0.0, 0.5, 0.0, 0.1],
            recoilless: false,
        };
        let energies: Vec<f64> = [1.0, 1.6]
            .iter()
            .map(|&w| {
                let b = BasisSpec::fock(60, w).unwrap();
                let ops = build_fock_operators(&b, &unit()).unwrap();
                let pair = CanonicalPair { q: ops.q, p: ops.p };
                let h = hamiltonian(&spec, &pair, &unit()).unwrap();
                linalg::eigvalsh(h.matrix()).unwrap()[0]
            })
            .collect();
        assert!((energies[0] - energies[1]).abs() < 1e-8, "{energies:?}");
    }

    #[test]
    fn tensor_product_identities() {
        let b2 = BasisSpec::fock(2, 1.0).unwrap();
        let b3 = BasisSpec::fock(3, 1.0).unwrap();
        let i6 = tensor_product(&Operator::identity(&b2), &Operator::identity(&b3)).unwrap();
        assert!(max_abs(&(i6.matrix() - linalg::identity(6))) == 0.0);
        assert_eq!(i6.basis().factor_dims(), vec![2, 3]);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let b2 = BasisSpec::fock(2, 1.0).unwrap();
        let prod = product_basis(&b2, &b2);
        let s = 0.5_f64.sqrt();
        let psi = Array1::from(vec![c(s), ZERO, ZERO, c(s)]);
        let bell = StateMatrix::pure(prod, &psi).unwrap();
        for keep in 0..2 {
            let r = partial_trace(&bell, &[2, 2], keep).unwrap();
            assert!(max_abs(&(r.matrix() - linalg::identity(2) * c(0.5))) < 1e-15);
        }
        assert!(partial_trace(&bell, &[2, 3], 0).is_err());
    }

    #[test]
    fn ground_projector_kernel_on_grid() {
        let fock = BasisSpec::fock(12, 1.0).unwrap();
        let grid = BasisSpec::grid(-8.0, 8.0, 96).unwrap();
        let mut proj = CMatrix::zeros((12, 12));
        proj[[0, 0]] = ONE;
        let p0 = Operator::hermitian(fock, proj).unwrap();
        let k = basis_change(&p0, &grid, &unit()).unwrap();
        let x = grid.points().unwrap();
        let dx = grid.spacing().unwrap();
        let mut worst = 0.0_f64;
        for i in 0..96 {
            for j in 0..96 {
                if x[i].abs() > 3.0 || x[j].abs() > 3.0 {
                    continue;
                }
                let exact = dx * (-(x[i] * x[i] + x[j] * x[j]) / 2.0).exp() / PI.sqrt();
                worst = worst.max(((k.matrix()[[i, j]].re - exact) / exact).abs());
            }
        }
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn fock_round_trip_and_position() {
        let params = unit();
        let fock = BasisSpec::fock(16, 1.0).unwrap();
        let grid = BasisSpec::grid(-10.0, 10.0, 128).unwrap();
        let id = Operator::identity(&fock);
        let there = basis_change(&id, &grid, &params).unwrap();
        let back = basis_change(&there, &fock, &params).unwrap();
        assert!(max_abs(&(back.matrix() - linalg::identity(16))) < 1e-8);

        let fops = build_fock_operators(&fock, &params).unwrap();
        let gops = build_grid_operators(&grid, &params).unwrap();
        let q_back = basis_change(&gops.q, &fock, &params).unwrap();
        assert!(max_abs(&(q_back.matrix() - fops.q.matrix())) < 1e-6);
    }

    #[test]
    fn coarse_grid_fails_resolution() {
        let fock = BasisSpec::fock(30, 1.0).unwrap();
        let grid = BasisSpec::grid(-3.0, 3.0, 16).unwrap();
        assert!(matches!(
            basis_change(&Operator::identity(&fock), &grid, &unit()),
            Err(QbeError::Resolution { .. })
        ));
    }

    #[test]
    fn boundary_mass_detects_leakage() {
        let b = BasisSpec::grid(-5.0, 5.0, 40).unwrap();
        let centered = sample_on_grid(&b, |x| c((-x * x).exp())).unwrap();
        let edge = sample_on_grid(&b, |x| c((-(x + 4.8) * (x + 4.8)).exp())).unwrap();
        let s1 = StateMatrix::pure(b.clone(), &centered).unwrap();
        let s2 = StateMatrix::pure(b.clone(), &edge).unwrap();
        assert!(boundary_mass(s1.matrix(), &b).unwrap() < 1e-8);
        assert!(check_boundary(s2.matrix(), &b).unwrap() > 0.1);
    }
}
