//! Concrete Brownian generators and the positivity-preserving pipeline.
//!
//! * [`standard_qbe_generator`]: the standard equation with the bracket
//!   weights `CkT/2ħ` on `(q, q)` and `±iC/8m` on `(p, q)`, `(q, p)`.
//! * [`brownian_dissipator`]: `L_ir = -(CkT/2ħ){q, ·, q}`.
//! * [`sigma_generator`]: `L_rev + L̃_ir`, the evolution of the bare state.
//! * [`positive_evolution`]: `ρ(t) ∝ e^{ηL_ir} σ(t)`.

use log::warn;

use crate::basis::{same_basis, BasisSpec, Operator, Role, StateMatrix};
use crate::diagnostics::{gaussianity_defect, DiagnosticsRow};
use crate::error::{QbeError, Result};
use crate::evolution::{conjugated_propagate_with, propagate_matrix, IntegratorConfig, Trajectory};
use crate::linalg::{self, c, CMatrix, C64, I};
use crate::operators::{operator_function_real, CanonicalPair};
use crate::params::PhysParams;
use crate::superop::{
    probe_matrix, superop_exp, tilde_transform, Generator, Superoperator, SuperoperatorMatrix,
    ThermalSandwich, TildeMap, DEFAULT_SUPEROP_CAP,
};

/// Largest amplification the inverse eta-map may apply.
pub const AMPLIFICATION_CAP: f64 = 1e12;
/// Relative tolerance on negative eigenvalues of an initial bare state.
pub const SIGMA_POSITIVITY_TOL: f64 = 1e-10;
/// Minimum eigenvalue below which a recovered `σ(0)` is rejected.
pub const DOMAIN_TOL: f64 = 1e-8;
/// Traces below this cannot be normalized.
pub const MIN_TRACE: f64 = 1e-12;

/// The standard quantum Brownian generator with `H' = H`.
pub fn standard_qbe_generator(
    params: &PhysParams,
    q: &Operator,
    p: &Operator,
    h: &Operator,
) -> Result<Generator> {
    same_basis(q.basis(), p.basis())?;
    let w = params.coupling / (8.0 * params.mass);
    Generator::commutator(h, params.hbar)
        .with_bracket(c(params.dephasing_rate()), q, q)?
        .with_bracket(C64::new(0.0, w), p, q)?
        .with_bracket(C64::new(0.0, -w), q, p)
}

/// `L_ir = -(CkT/2ħ){q, ·, q}`.
pub fn brownian_dissipator(params: &PhysParams, q: &Operator) -> Generator {
    Generator::new(q.basis(), params.hbar).with_bracket_matrices(
        c(params.dephasing_rate()),
        q.matrix().clone(),
        q.matrix().clone(),
    )
}

/// `L_rev + L_ir`, a Lindblad generator.
pub fn brownian_lindblad(params: &PhysParams, q: &Operator, h: &Operator) -> Result<Generator> {
    Generator::commutator(h, params.hbar).plus(&brownian_dissipator(params, q))
}

/// `e^{t L}` as a dense matrix for a generator within the size cap.
pub fn generator_exp(g: &Generator, t: f64) -> Result<SuperoperatorMatrix> {
    superop_exp(&g.to_matrix()?, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `e^{ηL_ir}`
    Forward,
    /// `e^{-ηL_ir}`
    Inverse,
}

/// `e^{±ηL_ir}` as a Hadamard multiplier in the eigenbasis of `q`.
///
/// On a grid that eigenbasis is the grid itself and the map is the closed
/// form `σ(x, x') ↦ exp(∓s (x - x')²) σ(x, x')` with `s = ηCkT/2ħ`. On a
/// Fock basis the truncated `q` is diagonalized first; forward application
/// then equals `superop_exp(η L_ir)` exactly.
#[derive(Debug, Clone)]
pub struct EtaMap {
    basis: BasisSpec,
    positions: Vec<f64>,
    frame: Option<CMatrix>,
    strength: f64,
}

impl EtaMap {
    pub fn new(q: &Operator, params: &PhysParams) -> Result<Self> {
        Self::with_strength(q, params.eta_strength())
    }

    /// Uses `s` in place of `ηCkT/2ħ`; `s = 0` is the identity map.
    pub fn with_strength(q: &Operator, strength: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "eta strength",
                reason: format!("must be finite and >= 0, got {strength}"),
            });
        }
        let basis = q.basis().clone();
        let (positions, frame) = match &basis {
            BasisSpec::Grid { .. } => (basis.points().unwrap_or_default().to_vec(), None),
            BasisSpec::Fock { .. } => {
                let (vals, vecs) = linalg::eigh(q.matrix())?;
                (vals.to_vec(), Some(vecs))
            }
            BasisSpec::Product(_) => {
                return Err(QbeError::UnsupportedRepresentation(
                    "the eta-map on a product basis",
                ))
            }
        };
        Ok(EtaMap {
            basis,
            positions,
            frame,
            strength,
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// `exp(s (x_max - x_min)²)`, the largest factor the inverse applies.
    pub fn amplification(&self) -> f64 {
        match self.basis {
            BasisSpec::Grid { x_min, x_max, .. } => {
                (self.strength * (x_max - x_min) * (x_max - x_min)).exp()
            }
            _ => f64::INFINITY,
        }
    }

    fn check_inverse(&self) -> Result<()> {
        if !self.basis.is_grid() {
            return Err(QbeError::UnsupportedRepresentation(
                "the inverse eta-map outside a grid basis",
            ));
        }
        let amplification = self.amplification();
        if !(amplification <= AMPLIFICATION_CAP) {
            return Err(QbeError::IllPosed {
                amplification,
                cap: AMPLIFICATION_CAP,
            });
        }
        Ok(())
    }

    fn multiply(&self, a: &CMatrix, sign: f64) -> CMatrix {
        let x = &self.positions;
        let s = self.strength;
        CMatrix::from_shape_fn(a.raw_dim(), |(i, j)| {
            let dx = x[i] - x[j];
            a[[i, j]] * (sign * s * dx * dx).exp()
        })
    }

    fn act(&self, a: &CMatrix, dir: Direction) -> CMatrix {
        let sign = match dir {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        };
        match &self.frame {
            None => self.multiply(a, sign),
            Some(u) => {
                let ud = linalg::dagger(u);
                let framed = ud.dot(a).dot(u);
                u.dot(&self.multiply(&framed, sign)).dot(&ud)
            }
        }
    }

    pub fn forward(&self, a: &CMatrix) -> CMatrix {
        self.act(a, Direction::Forward)
    }

    pub fn inverse(&self, a: &CMatrix) -> Result<CMatrix> {
        self.check_inverse()?;
        Ok(self.act(a, Direction::Inverse))
    }

    pub fn apply_state(&self, sigma: &StateMatrix, dir: Direction) -> Result<StateMatrix> {
        same_basis(&self.basis, sigma.basis())?;
        let out = match dir {
            Direction::Forward => self.forward(sigma.matrix()),
            Direction::Inverse => self.inverse(sigma.matrix())?,
        };
        StateMatrix::unnormalized(self.basis.clone(), out)
    }

    /// Dense matrix of the map in the given direction.
    pub fn to_matrix(&self, dir: Direction) -> Result<SuperoperatorMatrix> {
        if dir == Direction::Inverse {
            self.check_inverse()?;
        }
        let op = Directed { map: self, dir };
        SuperoperatorMatrix::new(self.basis.clone(), probe_matrix(&op, DEFAULT_SUPEROP_CAP)?)
    }
}

struct Directed<'a> {
    map: &'a EtaMap,
    dir: Direction,
}

impl Superoperator for Directed<'_> {
    fn dim(&self) -> usize {
        self.map.basis.dim()
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        self.map.act(sigma, self.dir)
    }
}

/// `e^{±ηL_ir} σ` on the basis of `σ`.
pub fn eta_map(sigma: &StateMatrix, params: &PhysParams, dir: Direction) -> Result<StateMatrix> {
    let pair = crate::operators::canonical_pair(sigma.basis(), params)?;
    EtaMap::new(&pair.q, params)?.apply_state(sigma, dir)
}

/// `e^{ηL_ir}` by dense exponentiation of the dissipator matrix.
pub fn eta_superoperator(params: &PhysParams, q: &Operator) -> Result<SuperoperatorMatrix> {
    generator_exp(&brownian_dissipator(params, q), params.eta())
}

/// How `L̃_ir` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// Conjugation by `e^{±H/2kT}` through the eigenbasis of `H`.
    ExactSandwich,
    /// `e^{-H/2kT} q e^{H/2kT}` replaced by `q - [H, q]/2kT`.
    FirstOrderGamma,
}

impl std::str::FromStr for SigmaMode {
    type Err = QbeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact-sandwich" => Ok(SigmaMode::ExactSandwich),
            "first-order" | "first-order-gamma" => Ok(SigmaMode::FirstOrderGamma),
            other => Err(QbeError::InvalidParameter {
                name: "sigma_mode",
                reason: format!(
                    "unknown mode {other:?}; expected exact-sandwich or first-order-gamma"
                ),
            }),
        }
    }
}

/// `L_rev + L̃_ir` in either mode.
#[derive(Debug, Clone)]
pub enum SigmaGenerator {
    Exact(TildeMap),
    FirstOrder(Generator),
}

impl SigmaGenerator {
    pub fn to_matrix(&self) -> Result<SuperoperatorMatrix> {
        match self {
            SigmaGenerator::Exact(t) => t.to_matrix(),
            SigmaGenerator::FirstOrder(g) => g.to_matrix(),
        }
    }
}

impl Superoperator for SigmaGenerator {
    fn dim(&self) -> usize {
        match self {
            SigmaGenerator::Exact(t) => t.dim(),
            SigmaGenerator::FirstOrder(g) => g.dim(),
        }
    }

    fn apply(&self, sigma: &CMatrix) -> CMatrix {
        match self {
            SigmaGenerator::Exact(t) => t.apply(sigma),
            SigmaGenerator::FirstOrder(g) => g.apply(sigma),
        }
    }

    fn dense(&self) -> Result<CMatrix> {
        Ok(self.to_matrix()?.matrix)
    }
}

/// The generator of the bare state `σ(t)`.
///
/// In first-order mode, with `B = q - [H, q]/2kT`,
/// `L̃_ir σ = -D(B²σ + σB†² - 2BσB†)` is stored as a non-Hermitian
/// Hamiltonian `-iħD(B² - B†B)` plus one bracket on `A = B†`, `D = CkT/2ħ`.
/// For `H = p²/2m + V(q)` this gives `B = q + iγp`.
pub fn sigma_generator(
    h: &Operator,
    params: &PhysParams,
    q: &Operator,
    mode: SigmaMode,
) -> Result<SigmaGenerator> {
    same_basis(h.basis(), q.basis())?;
    let rev = Generator::commutator(h, params.hbar);
    match mode {
        SigmaMode::ExactSandwich => {
            let ir = tilde_transform(&brownian_dissipator(params, q), h, params)?;
            Ok(SigmaGenerator::Exact(ir.with_untransformed(&rev)?))
        }
        SigmaMode::FirstOrderGamma => {
            let d = params.dephasing_rate();
            let hq = linalg::commutator(h.matrix(), q.matrix());
            let b = q.matrix() - &hq.mapv(|z| z / (2.0 * params.kt()));
            let bd = linalg::dagger(&b);
            let m = b.dot(&b) - bd.dot(&b);
            let k = m * (-I * params.hbar * d);
            Ok(SigmaGenerator::FirstOrder(
                rev.with_hamiltonian_matrix(k)
                    .with_bracket_matrices(c(d), bd.clone(), bd),
            ))
        }
    }
}

/// The free-particle bare-state generator as a literal transcription:
/// `K = p²/2m̄ + (Cħ/4m)(qp + pq) + Cħ²/4im` and one bracket of weight
/// `CkT/2ħ` on `A = B = q - γip`.
pub fn free_particle_sigma_generator(
    params: &PhysParams,
    q: &Operator,
    p: &Operator,
) -> Result<Generator> {
    same_basis(q.basis(), p.basis())?;
    let (qm, pm) = (q.matrix(), p.matrix());
    let hbar = params.hbar;
    let cp = params.coupling;
    let m = params.mass;
    let dim = q.dim();
    let mut k = pm.dot(pm) * (params.inv_mbar() * 0.5);
    k = k + (qm.dot(pm) + pm.dot(qm)) * c(cp * hbar / (4.0 * m));
    let constant = c(cp * hbar * hbar / (4.0 * m)) / I;
    for i in 0..dim {
        k[[i, i]] += constant;
    }
    let a = qm - &pm.mapv(|z| z * I * params.gamma());
    Ok(Generator::new(q.basis(), hbar)
        .with_hamiltonian_matrix(k)
        .with_bracket_matrices(c(params.dephasing_rate()), a.clone(), a))
}

/// `e^{-H/kT} / Tr e^{-H/kT}`.
pub fn canonical_sigma(h: &Operator, params: &PhysParams) -> Result<StateMatrix> {
    let (vals, _) = linalg::eigh(h.matrix())?;
    let e0 = vals[0];
    let kt = params.kt();
    let w = operator_function_real(h, |e| (-(e - e0) / kt).exp())?;
    let z = linalg::trace(w.matrix()).re;
    StateMatrix::sigma(h.basis().clone(), w.matrix().mapv(|x| x / z))
}

fn require_positive(sigma: &CMatrix) -> Result<()> {
    let min = linalg::eigvalsh(&linalg::hermitize(sigma))?[0];
    let tr = linalg::trace(sigma).re;
    if min < -SIGMA_POSITIVITY_TOL * tr.abs() {
        return Err(QbeError::NotPositive { eigenvalue: min });
    }
    Ok(())
}

/// Normalizes `a` to a density matrix, refusing traces below [`MIN_TRACE`].
fn normalize(basis: &BasisSpec, a: &CMatrix) -> Result<(StateMatrix, f64)> {
    let tr = linalg::trace(a).re;
    if !(tr >= MIN_TRACE) {
        return Err(QbeError::Normalization { trace: tr });
    }
    let rho = linalg::hermitize(a).mapv(|z| z / tr);
    Ok((StateMatrix::rho(basis.clone(), rho)?, tr))
}

/// Samples of the positivity-preserving evolution.
#[derive(Debug, Clone)]
pub struct PositiveEvolution {
    pub times: Vec<f64>,
    /// Bare states, never renormalized.
    pub sigma: Vec<StateMatrix>,
    /// `e^{ηL_ir} σ(t)` normalized to unit trace.
    pub rho: Vec<StateMatrix>,
    /// `Tr[e^{ηL_ir} σ(t)]`.
    pub d_approx: Vec<f64>,
}

impl PositiveEvolution {
    fn from_sigma(times: Vec<f64>, sigma: Vec<StateMatrix>, eta: &EtaMap) -> Result<Self> {
        let mut rho = Vec::with_capacity(sigma.len());
        let mut d_approx = Vec::with_capacity(sigma.len());
        for s in &sigma {
            let (r, tr) = normalize(s.basis(), &eta.forward(s.matrix()))?;
            rho.push(r);
            d_approx.push(tr);
        }
        Ok(PositiveEvolution {
            times,
            sigma,
            rho,
            d_approx,
        })
    }

    /// Trajectory of `ρ(t)` with `D_approx` filled in, and the gaussianity
    /// defect when `gauss` is set.
    pub fn trajectory(&self, pair: &CanonicalPair, hbar: f64, gauss: bool) -> Result<Trajectory> {
        let mut traj = Trajectory::new(self.times.clone(), self.rho.clone());
        traj.rows = self
            .times
            .iter()
            .zip(&self.rho)
            .zip(&self.d_approx)
            .map(|((&t, r), &d)| {
                let row = DiagnosticsRow::measure(t, r.matrix(), pair)?.with_d_approx(d);
                Ok(if gauss {
                    row.with_gauss_defect(gaussianity_defect(r.matrix(), pair, hbar)?)
                } else {
                    row
                })
            })
            .collect::<Result<_>>()?;
        Ok(traj)
    }
}

/// `σ(t) = S⁻¹ e^{t(L_rev + L_ir)} S σ0` followed by
/// `ρ(t) = e^{ηL_ir} σ(t) / Tr[e^{ηL_ir} σ(t)]`.
pub fn positive_evolution(
    sigma0: &StateMatrix,
    params: &PhysParams,
    h: &Operator,
    q: &Operator,
    cfg: &IntegratorConfig,
) -> Result<PositiveEvolution> {
    same_basis(sigma0.basis(), h.basis())?;
    require_positive(sigma0.matrix())?;
    let sandwich = ThermalSandwich::new(h, params)?;
    let image = linalg::trace(&sandwich.apply(sigma0.matrix())).re;
    if !image.is_finite() {
        return Err(QbeError::Overflow { norm: image });
    }
    let lindblad = brownian_lindblad(params, q, h)?;
    let traj = conjugated_propagate_with(sigma0, &sandwich, &lindblad, cfg)?;
    let eta = EtaMap::new(q, params)?;
    PositiveEvolution::from_sigma(traj.times, traj.states, &eta)
}

/// [`positive_evolution`] with `σ(t)` integrated directly under `g`.
pub fn positive_evolution_direct<G: Superoperator + ?Sized>(
    sigma0: &StateMatrix,
    params: &PhysParams,
    g: &G,
    q: &Operator,
    cfg: &IntegratorConfig,
) -> Result<PositiveEvolution> {
    same_basis(sigma0.basis(), q.basis())?;
    require_positive(sigma0.matrix())?;
    let sigma = propagate_matrix(g, sigma0.matrix(), cfg)?
        .into_iter()
        .map(|m| Ok(StateMatrix::unnormalized(sigma0.basis().clone(), m)?.with_role(Role::Sigma)))
        .collect::<Result<_>>()?;
    let eta = EtaMap::new(q, params)?;
    PositiveEvolution::from_sigma(cfg.sample_times.clone(), sigma, &eta)
}

/// A bare initial state recovered from a density matrix.
#[derive(Debug, Clone)]
pub struct SigmaInit {
    pub sigma: StateMatrix,
    pub min_eig: f64,
}

/// `σ(0) ∝ e^{-ηL_ir} ρ(0)`, normalized, on a grid basis.
pub fn initialize_sigma_from_rho(rho0: &StateMatrix, params: &PhysParams) -> Result<SigmaInit> {
    let pair = crate::operators::canonical_pair(rho0.basis(), params)?;
    initialize_sigma_with(rho0, &EtaMap::new(&pair.q, params)?)
}

/// [`initialize_sigma_from_rho`] with a prebuilt map.
pub fn initialize_sigma_with(rho0: &StateMatrix, eta: &EtaMap) -> Result<SigmaInit> {
    let raw = eta.inverse(rho0.matrix())?;
    let (normalized, _) = normalize(rho0.basis(), &raw)?;
    let min_eig = linalg::eigvalsh(normalized.matrix())?[0];
    if min_eig < -DOMAIN_TOL {
        return Err(QbeError::DomainViolation { min_eig });
    }
    if min_eig < 0.0 {
        warn!("recovered sigma(0) has a slightly negative eigenvalue {min_eig:e}");
    }
    let sigma = normalized.with_role(Role::Sigma);
    Ok(SigmaInit { sigma, min_eig })
}
