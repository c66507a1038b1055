//! Truncated representations of the system Hilbert space and the matrix
//! types that live on them.

use ndarray::Array1;

use crate::error::{QbeError, Result};
use crate::linalg::{self, CMatrix};

/// Relative Hermiticity tolerance for operators.
pub const OPERATOR_HERMITICITY_TOL: f64 = 1e-12;
/// Relative Hermiticity tolerance for density-like states.
pub const STATE_HERMITICITY_TOL: f64 = 1e-10;

/// A truncated basis for a Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    /// Number states `|0>, ..., |dim-1>` of an oscillator with reference
    /// frequency `omega_ref`. The frequency only fixes the length scale of
    /// the ladder operators.
    Fock { dim: usize, omega_ref: f64 },
    /// Uniform periodic position grid `x_j = x_min + j dx`, `dx = (x_max - x_min)/n`.
    Grid { x_min: f64, x_max: f64, n: usize },
    /// Tensor product, first factor most significant.
    Product(Vec<BasisSpec>),
}

impl BasisSpec {
    pub fn fock(dim: usize, omega_ref: f64) -> Result<Self> {
        let b = BasisSpec::Fock { dim, omega_ref };
        b.validate()?;
        Ok(b)
    }

    pub fn grid(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let b = BasisSpec::Grid { x_min, x_max, n };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BasisSpec::Fock { dim, omega_ref } => {
                if dim < 2 {
                    return Err(QbeError::BasisTooSmall(format!("Fock dim {dim} < 2")));
                }
                if !(omega_ref.is_finite() && omega_ref > 0.0) {
                    return Err(QbeError::InvalidBasis(format!(
                        "omega_ref must be > 0, got {omega_ref}"
                    )));
                }
            }
            BasisSpec::Grid { x_min, x_max, n } => {
                if n < 4 {
                    return Err(QbeError::BasisTooSmall(format!("grid n {n} < 4")));
                }
                if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
                    return Err(QbeError::InvalidBasis(format!(
                        "grid needs x_max > x_min, got [{x_min}, {x_max}]"
                    )));
                }
            }
            BasisSpec::Product(ref factors) => {
                if factors.is_empty() {
                    return Err(QbeError::InvalidBasis("empty product basis".into()));
                }
                for f in factors {
                    f.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            BasisSpec::Fock { dim, .. } => *dim,
            BasisSpec::Grid { n, .. } => *n,
            BasisSpec::Product(f) => f.iter().map(BasisSpec::dim).product(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BasisSpec::Fock { .. } => "fock",
            BasisSpec::Grid { .. } => "grid",
            BasisSpec::Product(_) => "product",
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, BasisSpec::Grid { .. })
    }

    /// Grid spacing, `None` for other bases.
    pub fn spacing(&self) -> Option<f64> {
        match *self {
            BasisSpec::Grid { x_min, x_max, n } => Some((x_max - x_min) / n as f64),
            _ => None,
        }
    }

    /// Grid points, `None` for other bases.
    pub fn points(&self) -> Option<Array1<f64>> {
        match *self {
            BasisSpec::Grid { x_min, n, .. } => {
                let dx = self.spacing().unwrap();
                Some(Array1::from_shape_fn(n, |j| x_min + j as f64 * dx))
            }
            _ => None,
        }
    }

    /// Factor dimensions for product bases, `[dim]` otherwise.
    pub fn factor_dims(&self) -> Vec<usize> {
        match self {
            BasisSpec::Product(f) => f.iter().map(BasisSpec::dim).collect(),
            b => vec![b.dim()],
        }
    }
}

/// A dense operator on a truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    basis: BasisSpec,
    matrix: CMatrix,
    hermitian: bool,
}

impl Operator {
    pub fn new(basis: BasisSpec, matrix: CMatrix) -> Result<Self> {
        check_shape(&basis, &matrix)?;
        Ok(Operator {
            basis,
            matrix,
            hermitian: false,
        })
    }

    /// Builds an operator flagged Hermitian. Defects up to
    /// [`OPERATOR_HERMITICITY_TOL`] are symmetrized away, larger ones are errors.
    pub fn hermitian(basis: BasisSpec, matrix: CMatrix) -> Result<Self> {
        check_shape(&basis, &matrix)?;
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > OPERATOR_HERMITICITY_TOL {
            return Err(QbeError::NotHermitian { defect });
        }
        Ok(Operator {
            basis,
            matrix: linalg::hermitize(&matrix),
            hermitian: true,
        })
    }

    pub fn identity(basis: &BasisSpec) -> Self {
        Operator {
            basis: basis.clone(),
            matrix: linalg::identity(basis.dim()),
            hermitian: true,
        }
    }

    pub fn zeros(basis: &BasisSpec) -> Self {
        let d = basis.dim();
        Operator {
            basis: basis.clone(),
            matrix: CMatrix::zeros((d, d)),
            hermitian: true,
        }
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Checks the flag against the matrix, returning the relative defect.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            basis: self.basis.clone(),
            matrix: linalg::dagger(&self.matrix),
            hermitian: self.hermitian,
        }
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        same_basis(&self.basis, &other.basis)?;
        Operator::new(self.basis.clone(), self.matrix.dot(&other.matrix))
    }

    /// Attempts to flag the result Hermitian; falls back to a plain operator.
    pub fn try_hermitian(self) -> Operator {
        if linalg::hermiticity_defect(&self.matrix) <= OPERATOR_HERMITICITY_TOL {
            Operator {
                matrix: linalg::hermitize(&self.matrix),
                hermitian: true,
                basis: self.basis,
            }
        } else {
            self
        }
    }
}

/// What a density-like matrix stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Physical reduced density operator, unit trace.
    Rho,
    /// Bare operator sigma of the positive evolution.
    Sigma,
    Unnormalized,
}

/// A density-like matrix. Positivity is never enforced here; violating it is
/// a measured outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    basis: BasisSpec,
    matrix: CMatrix,
    role: Role,
}

impl StateMatrix {
    /// Unit-trace Hermitian state (checked to 1e-10 relative).
    pub fn rho(basis: BasisSpec, matrix: CMatrix) -> Result<Self> {
        check_shape(&basis, &matrix)?;
        let matrix = checked_hermitian(matrix)?;
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(QbeError::InvalidParameter {
                name: "rho",
                reason: format!("trace must be 1, got {tr}"),
            });
        }
        Ok(StateMatrix {
            basis,
            matrix,
            role: Role::Rho,
        })
    }

    /// Hermitian bare state, any trace.
    pub fn sigma(basis: BasisSpec, matrix: CMatrix) -> Result<Self> {
        check_shape(&basis, &matrix)?;
        let matrix = checked_hermitian(matrix)?;
        Ok(StateMatrix {
            basis,
            matrix,
            role: Role::Sigma,
        })
    }

    pub fn unnormalized(basis: BasisSpec, matrix: CMatrix) -> Result<Self> {
        check_shape(&basis, &matrix)?;
        Ok(StateMatrix {
            basis,
            matrix,
            role: Role::Unnormalized,
        })
    }

    /// `matrix / Tr matrix` as a [`Role::Rho`] state.
    pub fn normalized(&self) -> Result<Self> {
        let tr = linalg::trace(&self.matrix).re;
        if tr.abs() < 1e-12 {
            return Err(QbeError::Normalization { trace: tr });
        }
        StateMatrix::rho(
            self.basis.clone(),
            linalg::hermitize(&self.matrix) / linalg::c(tr),
        )
    }

    /// Pure state `|psi><psi| / <psi|psi>`.
    pub fn pure(basis: BasisSpec, psi: &Array1<linalg::C64>) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(QbeError::Normalization { trace: 0.0 });
        }
        let d = psi.len();
        let m = CMatrix::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj() / norm2);
        StateMatrix::rho(basis, m)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> linalg::C64 {
        linalg::trace(&self.matrix)
    }
}

fn checked_hermitian(matrix: CMatrix) -> Result<CMatrix> {
    let defect = linalg::hermiticity_defect(&matrix);
    if defect > STATE_HERMITICITY_TOL {
        return Err(QbeError::NotHermitian { defect });
    }
    Ok(linalg::hermitize(&matrix))
}

fn check_shape(basis: &BasisSpec, m: &CMatrix) -> Result<()> {
    let d = basis.dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(QbeError::DimensionMismatch(format!(
            "matrix is {}x{}, basis dimension is {}",
            m.nrows(),
            m.ncols(),
            d
        )));
    }
    Ok(())
}

pub(crate) fn same_basis(a: &BasisSpec, b: &BasisSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(QbeError::BasisMismatch)
    }
}
