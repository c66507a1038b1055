//! Linear maps on density-like matrices.
//!
//! A [`Generator`] is stored structurally, as an effective Hamiltonian `K`
//! plus weighted dissipator brackets, and is applied with ordinary matrix
//! products. Dense [`SuperoperatorMatrix`] forms are only built for
//! exponentials, spectra and Choi tests.
//!
//! Vectorization is column stacking throughout: `vec(A)[i + j d] = A[i, j]`,
//! so `vec(L σ R) = (Rᵀ ⊗ L) vec(σ)`.

use ndarray::{Array1, Array2};

use crate::basis::{same_basis, BasisSpec, Operator, StateMatrix};
use crate::error::{QbeError, Result};
use crate::linalg::{self, c, CMatrix, C64, I};
use crate::params::PhysParams;

/// Default cap on the number of rows of a dense superoperator (`d <= 64`).
pub const DEFAULT_SUPEROP_CAP: usize = 4096;
/// Maximum condition number of `exp(H / 2kT)` accepted by the tilde transform.
pub const CONDITION_CAP: f64 = 1e12;
/// Relative tolerance of the complete-positivity test.
pub const CP_TOL: f64 = 1e-8;

/// Anything that acts linearly on `d x d` matrices.
pub trait Superoperator {
    fn dim(&self) -> usize;
    fn apply(&self, sigma: &CMatrix) -> CMatrix;

    /// Dense `d² x d²` matrix, by probing unless overridden.
    fn dense(&self) -> Result<CMatrix> {
        probe_matrix(self, DEFAULT_SUPEROP_CAP)
    }
}

/// `{A, ρ, B} = B A† ρ + ρ B A† - 2 A† ρ B`.
pub fn bracket(a: &CMatrix, rho: &CMatrix, b: &CMatrix) -> CMatrix {
    let ad = linalg::dagger(a);
    let bad = b.dot(&ad);
    bad.dot(rho) + rho.dot(&bad) - ad.dot(rho).dot(b) * c(2.0)
}

/// The dissipator bracket on typed operands.
pub fn dissipator_bracket(a: &Operator, rho: &StateMatrix, b: &Operator) -> Result<StateMatrix> {
    same_basis(a.basis(), rho.basis())?;
    same_basis(b.basis(), rho.basis())?;
    StateMatrix::unnormalized(
        rho.basis().clone(),
        bracket(a.matrix(), rho.matrix(), b.matrix()),
    )
}

/// One term `σ ↦ -weight {A, σ, B}`.
#[derive(Debug, Clone)]
pub struct BracketTerm {
    pub weight: C64,
    pub a: CMatrix,
    pub b: CMatrix,
    a_dag: CMatrix,
    b_a_dag: CMatrix,
}

impl BracketTerm {
    fn new(weight: C64, a: CMatrix, b: CMatrix) -> Self {
        let a_dag = linalg::dagger(&a);
        let b_a_dag = b.dot(&a_dag);
        BracketTerm {
            weight,
            a,
            b,
            a_dag,
            b_a_dag,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.a == self.b
    }
}

/// `σ ↦ (1/ħi)(Kσ - σK†) - Σ w {A, σ, B}`.
///
/// `K` may be non-Hermitian; the trace of `σ` is then not conserved.
#[derive(Debug, Clone)]
pub struct Generator {
    basis: BasisSpec,
    hbar: f64,
    hamiltonian: Option<CMatrix>,
    hamiltonian_dag: Option<CMatrix>,
    brackets: Vec<BracketTerm>,
}

impl Generator {
    /// The zero generator.
    pub fn new(basis: &BasisSpec, hbar: f64) -> Self {
        Generator {
            basis: basis.clone(),
            hbar,
            hamiltonian: None,
            hamiltonian_dag: None,
            brackets: Vec::new(),
        }
    }

    /// `[H, ·]/ħi`.
    pub fn commutator(h: &Operator, hbar: f64) -> Self {
        Generator::new(h.basis(), hbar).with_hamiltonian_matrix(h.matrix().clone())
    }

    pub fn with_hamiltonian(self, k: &Operator) -> Result<Self> {
        same_basis(&self.basis, k.basis())?;
        Ok(self.with_hamiltonian_matrix(k.matrix().clone()))
    }

    /// Adds `k` to the Hamiltonian slot.
    pub fn with_hamiltonian_matrix(mut self, k: CMatrix) -> Self {
        let total = match self.hamiltonian.take() {
            Some(old) => old + k,
            None => k,
        };
        self.hamiltonian_dag = Some(linalg::dagger(&total));
        self.hamiltonian = Some(total);
        self
    }

    pub fn with_bracket(self, weight: C64, a: &Operator, b: &Operator) -> Result<Self> {
        same_basis(&self.basis, a.basis())?;
        same_basis(&self.basis, b.basis())?;
        Ok(self.with_bracket_matrices(weight, a.matrix().clone(), b.matrix().clone()))
    }

    pub fn with_bracket_matrices(mut self, weight: C64, a: CMatrix, b: CMatrix) -> Self {
        self.brackets.push(BracketTerm::new(weight, a, b));
        self
    }

    /// Sum of two generators on the same basis.
    pub fn plus(mut self, other: &Generator) -> Result<Self> {
        same_basis(&self.basis, &other.basis)?;
        if let Some(k) = &other.hamiltonian {
            let k = k * c(other.hbar / self.hbar);
            self = self.with_hamiltonian_matrix(k);
        }
        self.brackets.extend(other.brackets.iter().cloned());
        Ok(self)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn hamiltonian(&self) -> Option<&CMatrix> {
        self.hamiltonian.as_ref()
    }

    pub fn brackets(&self) -> &[BracketTerm] {
        &self.brackets
    }

    pub fn has_hermitian_hamiltonian(&self) -> bool {
        self.hamiltonian
            .as_ref()
            .is_none_or(|k| linalg::hermiticity_defect(k) <= 1e-12)
    }

    /// Hermitian `K` and every bracket diagonal with a real non-negative
    /// weight.
    pub fn is_lindblad_form(&self) -> bool {
        self.has_hermitian_hamiltonian()
            && self
                .brackets
                .iter()
                .all(|t| t.is_diagonal() && t.weight.im == 0.0 && t.weight.re >= 0.0)
    }

    pub fn apply_state(&self, sigma: &StateMatrix) -> Result<StateMatrix> {
        same_basis(&self.basis, sigma.basis())?;
        StateMatrix::unnormalized(self.basis.clone(), self.apply(sigma.matrix()))
    }

    /// The same map as a list of `L σ R` products.
    pub fn to_sandwich(&self) -> SandwichMap {
        let d = self.basis.dim();
        let mut terms = Vec::new();
        let pref = c(1.0) / (I * self.hbar);
        if let (Some(k), Some(kd)) = (&self.hamiltonian, &self.hamiltonian_dag) {
            terms.push(SandwichTerm::left(k * pref));
            terms.push(SandwichTerm::right(kd * (-pref)));
        }
        for t in &self.brackets {
            terms.push(SandwichTerm::left(&t.b_a_dag * (-t.weight)));
            terms.push(SandwichTerm::right(&t.b_a_dag * (-t.weight)));
            terms.push(SandwichTerm::both(
                &t.a_dag * (c(2.0) * t.weight),
                t.b.clone(),
            ));
        }
        SandwichMap { dim: d, terms }
    }

    /// Dense matrix form, refused above `DEFAULT_SUPEROP_CAP` rows.
    pub fn to_matrix(&self) -> Result<SuperoperatorMatrix> {
        self.to_matrix_capped(DEFAULT_SUPEROP_CAP)
    }

    pub fn to_matrix_capped(&self, cap: usize) -> Result<SuperoperatorMatrix> {
        let m = self.to_sandwich().dense(cap)?;
        Ok(SuperoperatorMatrix {
            basis: self.basis.clone(),
            matrix: m,
        })
    }
}

impl Superoperator for Generator {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        let d = sigma.nrows();
        let mut out = CMatrix::zeros((d, d));
        if let (Some(k), Some(kd)) = (&self.hamiltonian, &self.hamiltonian_dag) {
            out = (k.dot(sigma) - sigma.dot(kd)) / (I * self.hbar);
        }
        for t in &self.brackets {
            let br = t.b_a_dag.dot(sigma) + sigma.dot(&t.b_a_dag)
                - t.a_dag.dot(sigma).dot(&t.b) * c(2.0);
            out = out - br * t.weight;
        }
        out
    }

    fn dense(&self) -> Result<CMatrix> {
        Ok(self.to_matrix()?.matrix)
    }
}

/// `L σ R` with either side possibly the identity.
#[derive(Debug, Clone)]
pub struct SandwichTerm {
    pub left: Option<CMatrix>,
    pub right: Option<CMatrix>,
}

impl SandwichTerm {
    pub fn left(l: CMatrix) -> Self {
        SandwichTerm {
            left: Some(l),
            right: None,
        }
    }

    pub fn right(r: CMatrix) -> Self {
        SandwichTerm {
            left: None,
            right: Some(r),
        }
    }

    pub fn both(l: CMatrix, r: CMatrix) -> Self {
        SandwichTerm {
            left: Some(l),
            right: Some(r),
        }
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        match (&self.left, &self.right) {
            (Some(l), Some(r)) => l.dot(sigma).dot(r),
            (Some(l), None) => l.dot(sigma),
            (None, Some(r)) => sigma.dot(r),
            (None, None) => sigma.clone(),
        }
    }
}

/// `σ ↦ Σ L_a σ R_a`.
#[derive(Debug, Clone)]
pub struct SandwichMap {
    dim: usize,
    terms: Vec<SandwichTerm>,
}

impl SandwichMap {
    pub fn new(dim: usize, terms: Vec<SandwichTerm>) -> Self {
        SandwichMap { dim, terms }
    }

    pub fn terms(&self) -> &[SandwichTerm] {
        &self.terms
    }

    /// `Σ R_aᵀ ⊗ L_a`.
    pub fn dense(&self, cap: usize) -> Result<CMatrix> {
        let d = self.dim;
        check_cap(d, cap)?;
        let id = linalg::identity(d);
        let mut m = Array2::zeros((d * d, d * d));
        for t in &self.terms {
            let l = t.left.as_ref().unwrap_or(&id);
            let rt = t
                .right
                .as_ref()
                .map_or_else(|| id.clone(), |r| r.t().to_owned());
            m += &linalg::kron(&rt, l);
        }
        Ok(m)
    }
}

impl Superoperator for SandwichMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(sigma.raw_dim());
        for t in &self.terms {
            out += &t.apply(sigma);
        }
        out
    }

    fn dense(&self) -> Result<CMatrix> {
        SandwichMap::dense(self, DEFAULT_SUPEROP_CAP)
    }
}

fn check_cap(d: usize, cap: usize) -> Result<()> {
    if d * d > cap {
        Err(QbeError::SizeCap { dim: d, cap })
    } else {
        Ok(())
    }
}

/// Builds the dense matrix of any superoperator by applying it to every
/// matrix unit. Slow; meant as an independent check.
pub fn probe_matrix<S: Superoperator + ?Sized>(op: &S, cap: usize) -> Result<CMatrix> {
    let d = op.dim();
    check_cap(d, cap)?;
    let mut m = Array2::zeros((d * d, d * d));
    for j in 0..d {
        for i in 0..d {
            let mut unit = CMatrix::zeros((d, d));
            unit[[i, j]] = c(1.0);
            let col = linalg::vectorize(&op.apply(&unit));
            m.column_mut(i + j * d).assign(&col);
        }
    }
    Ok(m)
}

/// Dense `d² x d²` form of a superoperator in the column-stacking convention.
#[derive(Debug, Clone)]
pub struct SuperoperatorMatrix {
    pub basis: BasisSpec,
    pub matrix: CMatrix,
}

impl SuperoperatorMatrix {
    pub fn new(basis: BasisSpec, matrix: CMatrix) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d * d || matrix.ncols() != d * d {
            return Err(QbeError::DimensionMismatch(format!(
                "superoperator is {}x{}, expected {}",
                matrix.nrows(),
                matrix.ncols(),
                d * d
            )));
        }
        Ok(SuperoperatorMatrix { basis, matrix })
    }

    pub fn from_map<S: Superoperator + ?Sized>(basis: &BasisSpec, op: &S) -> Result<Self> {
        Ok(SuperoperatorMatrix {
            basis: basis.clone(),
            matrix: probe_matrix(op, DEFAULT_SUPEROP_CAP)?,
        })
    }

    pub fn identity(basis: &BasisSpec) -> Self {
        let d = basis.dim();
        SuperoperatorMatrix {
            basis: basis.clone(),
            matrix: linalg::identity(d * d),
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperoperatorMatrix) -> Result<Self> {
        same_basis(&self.basis, &other.basis)?;
        Ok(SuperoperatorMatrix {
            basis: self.basis.clone(),
            matrix: self.matrix.dot(&other.matrix),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        SuperoperatorMatrix {
            basis: self.basis.clone(),
            matrix: &self.matrix * c(s),
        }
    }

    pub fn apply_state(&self, sigma: &StateMatrix) -> Result<StateMatrix> {
        same_basis(&self.basis, sigma.basis())?;
        StateMatrix::unnormalized(self.basis.clone(), self.apply(sigma.matrix()))
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        Ok(linalg::eigvals(&self.matrix)?.to_vec())
    }
}

impl Superoperator for SuperoperatorMatrix {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        let d = sigma.nrows();
        linalg::unvectorize(&self.matrix.dot(&linalg::vectorize(sigma)), d)
    }

    fn dense(&self) -> Result<CMatrix> {
        Ok(self.matrix.clone())
    }
}

/// `exp(t M)`. Hermitian matrices (e.g. pure position dephasing) take the
/// eigendecomposition route, everything else scaling-and-squaring Padé.
pub fn superop_exp(m: &SuperoperatorMatrix, t: f64) -> Result<SuperoperatorMatrix> {
    if !t.is_finite() {
        return Err(QbeError::InvalidParameter {
            name: "t",
            reason: format!("must be finite, got {t}"),
        });
    }
    if t == 0.0 {
        return Ok(SuperoperatorMatrix::identity(&m.basis));
    }
    let matrix = if linalg::hermiticity_defect(&m.matrix) <= 1e-14 {
        let (vals, vecs) = linalg::eigh(&m.matrix)?;
        let top = vals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(t * v));
        if top > 700.0 {
            return Err(QbeError::Overflow {
                norm: linalg::one_norm(&m.matrix) * t.abs(),
            });
        }
        linalg::reconstruct(&vals, &vecs, |v| c((t * v).exp()))
    } else {
        linalg::expm(&(&m.matrix * c(t)))?
    };
    Ok(SuperoperatorMatrix {
        basis: m.basis.clone(),
        matrix,
    })
}

/// Thermal congruence `S(σ) = e^{H/2kT} σ e^{H/2kT}` and its inverse.
///
/// Everything is evaluated in the eigenbasis of `H`, where `S` is diagonal
/// scaling `σ'_ij ↦ e^{(E_i + E_j)/2kT} σ'_ij`. Forming `e^{±H/2kT}` as dense
/// matrices would cost a factor of the condition number in accuracy.
#[derive(Debug, Clone)]
pub struct ThermalSandwich {
    basis: BasisSpec,
    frame: CMatrix,
    frame_dag: CMatrix,
    energies: Array1<f64>,
    kt: f64,
    condition: f64,
}

impl ThermalSandwich {
    pub fn new(h: &Operator, params: &PhysParams) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect > crate::basis::OPERATOR_HERMITICITY_TOL {
            return Err(QbeError::NotHermitian { defect });
        }
        let (energies, frame) = linalg::eigh(h.matrix())?;
        let e_min = energies[0];
        let e_max = energies[energies.len() - 1];
        let condition = ((e_max - e_min) / (2.0 * params.kt())).exp();
        if !(condition <= CONDITION_CAP) {
            return Err(QbeError::Conditioning {
                e_min,
                e_max,
                condition,
            });
        }
        Ok(ThermalSandwich {
            basis: h.basis().clone(),
            frame_dag: linalg::dagger(&frame),
            frame,
            energies,
            kt: params.kt(),
            condition,
        })
    }

    /// Condition number of `e^{H/2kT}`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// Eigenvalues of `H`, ascending.
    pub fn energies(&self) -> &Array1<f64> {
        &self.energies
    }

    /// Columns are the eigenvectors of `H`.
    pub fn frame(&self) -> &CMatrix {
        &self.frame
    }

    pub fn to_frame(&self, a: &CMatrix) -> CMatrix {
        self.frame_dag.dot(a).dot(&self.frame)
    }

    pub fn from_frame(&self, a: &CMatrix) -> CMatrix {
        self.frame.dot(a).dot(&self.frame_dag)
    }

    /// `e^{s H / 2kT}` as a dense matrix.
    pub fn half_power(&self, s: f64) -> CMatrix {
        let kt = self.kt;
        linalg::reconstruct(&self.energies, &self.frame, |e| {
            c((s * e / (2.0 * kt)).exp())
        })
    }

    /// `e^{H/2kT}`
    pub fn up(&self) -> CMatrix {
        self.half_power(1.0)
    }

    /// `e^{-H/2kT}`
    pub fn down(&self) -> CMatrix {
        self.half_power(-1.0)
    }

    fn scale_frame(&self, a: &CMatrix, sign: f64) -> CMatrix {
        let e = &self.energies;
        let two_kt = 2.0 * self.kt;
        CMatrix::from_shape_fn(a.raw_dim(), |(i, j)| {
            a[[i, j]] * (sign * (e[i] + e[j]) / two_kt).exp()
        })
    }

    /// `S` on a matrix already in the eigenbasis of `H`.
    pub fn apply_in_frame(&self, a: &CMatrix) -> CMatrix {
        self.scale_frame(a, 1.0)
    }

    pub fn apply_inverse_in_frame(&self, a: &CMatrix) -> CMatrix {
        self.scale_frame(a, -1.0)
    }

    /// `S(σ)`
    pub fn apply(&self, sigma: &CMatrix) -> CMatrix {
        self.from_frame(&self.apply_in_frame(&self.to_frame(sigma)))
    }

    /// `S⁻¹(σ)`
    pub fn apply_inverse(&self, sigma: &CMatrix) -> CMatrix {
        self.from_frame(&self.apply_inverse_in_frame(&self.to_frame(sigma)))
    }

    /// `e^{-H/2kT} L e^{H/2kT}` in the frame.
    fn conjugate_left(&self, l: &CMatrix) -> CMatrix {
        let e = &self.energies;
        let two_kt = 2.0 * self.kt;
        let lf = self.to_frame(l);
        CMatrix::from_shape_fn(lf.raw_dim(), |(i, j)| {
            lf[[i, j]] * ((e[j] - e[i]) / two_kt).exp()
        })
    }

    /// `e^{H/2kT} R e^{-H/2kT}` in the frame.
    fn conjugate_right(&self, r: &CMatrix) -> CMatrix {
        let e = &self.energies;
        let two_kt = 2.0 * self.kt;
        let rf = self.to_frame(r);
        CMatrix::from_shape_fn(rf.raw_dim(), |(i, j)| {
            rf[[i, j]] * ((e[i] - e[j]) / two_kt).exp()
        })
    }

    /// Dense `vec`-space matrix of the frame change `σ ↦ U σ U†`.
    fn frame_superop(&self) -> CMatrix {
        linalg::kron(&self.frame.mapv(|z| z.conj()), &self.frame)
    }
}

/// `σ ↦ S⁻¹(G(S(σ)))` for a thermal sandwich `S`, possibly plus untransformed
/// terms. Stored as products in the eigenbasis of `H`.
#[derive(Debug, Clone)]
pub struct TildeMap {
    sandwich: ThermalSandwich,
    map: SandwichMap,
}

impl TildeMap {
    pub fn sandwich(&self) -> &ThermalSandwich {
        &self.sandwich
    }

    /// The map expressed in the eigenbasis of `H`.
    pub fn frame_map(&self) -> &SandwichMap {
        &self.map
    }

    /// Adds `g` without conjugation; `L̃_rev = L_rev` makes this the natural
    /// way to attach the reversible part.
    pub fn with_untransformed(mut self, g: &Generator) -> Result<Self> {
        same_basis(&self.sandwich.basis, g.basis())?;
        let s = &self.sandwich;
        for t in g.to_sandwich().terms {
            self.map.terms.push(SandwichTerm {
                left: t.left.map(|l| s.to_frame(&l)),
                right: t.right.map(|r| s.to_frame(&r)),
            });
        }
        Ok(self)
    }

    pub fn to_matrix(&self) -> Result<SuperoperatorMatrix> {
        let inner = self.map.dense(DEFAULT_SUPEROP_CAP)?;
        let w = self.sandwich.frame_superop();
        let matrix = w.dot(&inner).dot(&linalg::dagger(&w));
        Ok(SuperoperatorMatrix {
            basis: self.sandwich.basis.clone(),
            matrix,
        })
    }
}

impl Superoperator for TildeMap {
    fn dim(&self) -> usize {
        self.map.dim
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        let s = &self.sandwich;
        s.from_frame(&self.map.apply(&s.to_frame(sigma)))
    }

    fn dense(&self) -> Result<CMatrix> {
        Ok(self.to_matrix()?.matrix)
    }
}

/// Conjugates every product `L σ R` of `g` into
/// `(e^{-H/2kT} L e^{H/2kT}) σ (e^{H/2kT} R e^{-H/2kT})`.
pub fn tilde_transform(g: &Generator, h: &Operator, params: &PhysParams) -> Result<TildeMap> {
    same_basis(g.basis(), h.basis())?;
    let sandwich = ThermalSandwich::new(h, params)?;
    let terms = g
        .to_sandwich()
        .terms
        .into_iter()
        .map(|t| SandwichTerm {
            left: t.left.map(|l| sandwich.conjugate_left(&l)),
            right: t.right.map(|r| sandwich.conjugate_right(&r)),
        })
        .collect();
    Ok(TildeMap {
        map: SandwichMap {
            dim: g.basis().dim(),
            terms,
        },
        sandwich,
    })
}

/// Choi matrix `Σ_ij |i><j| ⊗ Φ(|i><j|)`, index `(i d + k, j d + l)`.
pub fn choi_matrix(m: &SuperoperatorMatrix) -> CMatrix {
    let d = m.basis.dim();
    let mut choi = Array2::zeros((d * d, d * d));
    for i in 0..d {
        for j in 0..d {
            let col = i + j * d;
            for k in 0..d {
                for l in 0..d {
                    choi[[i * d + k, j * d + l]] = m.matrix[[k + l * d, col]];
                }
            }
        }
    }
    choi
}

/// Outcome of a complete-positivity test.
#[derive(Debug, Clone, Copy)]
pub struct CpReport {
    pub min_eig: f64,
    pub trace: f64,
    pub hermiticity_defect: f64,
    pub is_cp: bool,
}

/// A map is reported non-CP only if its Choi matrix has an eigenvalue
/// below `-CP_TOL * Tr(Choi)`.
pub fn cp_report(m: &SuperoperatorMatrix) -> Result<CpReport> {
    let choi = choi_matrix(m);
    let defect = linalg::hermiticity_defect(&choi);
    let vals = linalg::eigvalsh(&choi)?;
    let trace = linalg::trace(&choi).re;
    let min_eig = vals[0];
    Ok(CpReport {
        min_eig,
        trace,
        hermiticity_defect: defect,
        is_cp: min_eig >= -CP_TOL * trace.abs(),
    })
}
