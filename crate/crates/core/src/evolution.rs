//! Time propagation of density-like matrices under time-independent
//! generators.

use std::str::FromStr;

use log::debug;

use crate::basis::{BasisSpec, Operator, StateMatrix};
use crate::diagnostics::DiagnosticsRow;
use crate::error::{QbeError, Result};
use crate::linalg::{self, c, CMatrix};
use crate::operators::CanonicalPair;
use crate::params::PhysParams;
use crate::superop::{
    superop_exp, Generator, SandwichMap, SandwichTerm, Superoperator, SuperoperatorMatrix,
    ThermalSandwich,
};

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-12;
/// Maximum growth of the relative Hermiticity defect in one accepted step.
pub const HERMITICITY_STEP_TOL: f64 = 1e-9;
/// Relative change below which a headline scalar counts as converged.
pub const CONVERGENCE_TOL: f64 = 0.01;
const MAX_STEPS: usize = 2_000_000;
/// Largest Fock dimension for which expm is the default method.
pub const EXPM_DEFAULT_MAX_DIM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// One superoperator exponential per distinct sample gap.
    Expm,
    /// Dormand-Prince 5(4) on the structurally applied generator.
    RkAdaptive,
}

impl Method {
    /// expm for small Fock bases, rk-adaptive for grids and everything larger.
    pub fn default_for(basis: &BasisSpec) -> Method {
        match basis {
            BasisSpec::Fock { dim, .. } if *dim <= EXPM_DEFAULT_MAX_DIM => Method::Expm,
            _ => Method::RkAdaptive,
        }
    }
}

impl FromStr for Method {
    type Err = QbeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expm" => Ok(Method::Expm),
            "rk" | "rk-adaptive" | "rk45" => Ok(Method::RkAdaptive),
            other => Err(QbeError::InvalidParameter {
                name: "integrator.method",
                reason: format!("unknown method {other:?}; expected expm or rk-adaptive"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub sample_times: Vec<f64>,
}

impl IntegratorConfig {
    pub fn new(method: Method, sample_times: Vec<f64>) -> Result<Self> {
        let cfg = IntegratorConfig {
            method,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            max_step: f64::INFINITY,
            sample_times,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rk(sample_times: Vec<f64>) -> Result<Self> {
        Self::new(Method::RkAdaptive, sample_times)
    }

    pub fn expm(sample_times: Vec<f64>) -> Result<Self> {
        Self::new(Method::Expm, sample_times)
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Result<Self> {
        self.rtol = rtol;
        self.atol = atol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_step(mut self, max_step: f64) -> Result<Self> {
        self.max_step = max_step;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "integrator.rtol",
                reason: format!(
                    "tolerances must be > 0, got rtol={} atol={}",
                    self.rtol, self.atol
                ),
            });
        }
        if !(self.max_step > 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "integrator.max_step",
                reason: format!("must be > 0, got {}", self.max_step),
            });
        }
        if self.sample_times.is_empty() {
            return Err(QbeError::InvalidParameter {
                name: "integrator.sample_times",
                reason: "no sample times".into(),
            });
        }
        if !(self.sample_times[0] >= 0.0) {
            return Err(QbeError::InvalidParameter {
                name: "integrator.sample_times",
                reason: format!("must start at t >= 0, got {}", self.sample_times[0]),
            });
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(QbeError::InvalidParameter {
                name: "integrator.sample_times",
                reason: "must be strictly increasing".into(),
            });
        }
        if self.sample_times.iter().any(|t| !t.is_finite()) {
            return Err(QbeError::InvalidParameter {
                name: "integrator.sample_times",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

/// `n` evenly spaced times from 0 to `t_end` inclusive.
pub fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// Result of [`convergence_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceVerdict {
    pub passed: bool,
    pub entries: Vec<ConvergenceEntry>,
    /// Set when one of the runs failed outright.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceEntry {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    pub rel_change: f64,
}

/// Sampled states of one run plus their diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateMatrix>,
    pub rows: Vec<DiagnosticsRow>,
    pub verdict: Option<ConvergenceVerdict>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateMatrix>) -> Self {
        Trajectory {
            times,
            states,
            rows: Vec::new(),
            verdict: None,
        }
    }

    /// Fills one diagnostics row per sample.
    pub fn measure(&mut self, pair: &CanonicalPair) -> Result<()> {
        self.rows = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| DiagnosticsRow::measure(t, s.matrix(), pair))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Propagates `s0` from `t = 0` to every sample time.
pub fn propagate<G: Superoperator + ?Sized>(
    g: &G,
    s0: &StateMatrix,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mats = propagate_matrix(g, s0.matrix(), cfg)?;
    let states = mats
        .into_iter()
        .map(|m| Ok(StateMatrix::unnormalized(s0.basis().clone(), m)?.with_role(s0.role())))
        .collect::<Result<_>>()?;
    Ok(Trajectory::new(cfg.sample_times.clone(), states))
}

/// [`propagate`] on bare matrices.
pub fn propagate_matrix<G: Superoperator + ?Sized>(
    g: &G,
    y0: &CMatrix,
    cfg: &IntegratorConfig,
) -> Result<Vec<CMatrix>> {
    cfg.validate()?;
    if g.dim() != y0.nrows() || y0.nrows() != y0.ncols() {
        return Err(QbeError::DimensionMismatch(format!(
            "generator acts on {}x{} matrices, state is {}x{}",
            g.dim(),
            g.dim(),
            y0.nrows(),
            y0.ncols()
        )));
    }
    match cfg.method {
        Method::Expm => propagate_expm(g, y0, &cfg.sample_times),
        Method::RkAdaptive => propagate_rk(g, y0, cfg),
    }
}

fn propagate_expm<G: Superoperator + ?Sized>(
    g: &G,
    y0: &CMatrix,
    times: &[f64],
) -> Result<Vec<CMatrix>> {
    let d = y0.nrows();
    let basis = BasisSpec::Fock {
        dim: d,
        omega_ref: 1.0,
    };
    let m = SuperoperatorMatrix {
        basis,
        matrix: g.dense()?,
    };
    let mut cache: Vec<(f64, SuperoperatorMatrix)> = Vec::new();
    let mut v = linalg::vectorize(y0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &ts in times {
        let gap = ts - t;
        if gap > 0.0 {
            let idx = cache
                .iter()
                .position(|(h, _)| (h - gap).abs() <= 1e-13 * gap.max(1.0));
            let idx = match idx {
                Some(i) => i,
                None => {
                    debug!("expm for gap {gap}");
                    cache.push((gap, superop_exp(&m, gap)?));
                    cache.len() - 1
                }
            };
            v = cache[idx].1.matrix.dot(&v);
        }
        t = ts;
        out.push(linalg::unvectorize(&v, d));
    }
    Ok(out)
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rel_herm_defect(y: &CMatrix) -> f64 {
    let scale = linalg::max_abs(y);
    if scale == 0.0 {
        0.0
    } else {
        linalg::hermiticity_defect_abs(y) / scale
    }
}

/// One Dormand-Prince step: the 5th-order solution, the derivative there
/// and the embedded error estimate.
fn dopri_step<G: Superoperator + ?Sized>(
    g: &G,
    y: &CMatrix,
    k1: &CMatrix,
    h: f64,
) -> (CMatrix, CMatrix, CMatrix) {
    let mut k: Vec<CMatrix> = Vec::with_capacity(7);
    k.push(k1.clone());
    let mut ys = y.clone();
    for row in A.iter() {
        ys = y.clone();
        for (kj, &a) in k.iter().zip(row.iter()) {
            if a != 0.0 {
                ys.scaled_add(c(h * a), kj);
            }
        }
        k.push(g.apply(&ys));
    }
    let mut err = CMatrix::zeros(y.raw_dim());
    for (kj, &e) in k.iter().zip(E.iter()) {
        if e != 0.0 {
            err.scaled_add(c(h * e), kj);
        }
    }
    let k7 = k.pop().unwrap_or_default();
    (ys, k7, err)
}

fn propagate_rk<G: Superoperator + ?Sized>(
    g: &G,
    y0: &CMatrix,
    cfg: &IntegratorConfig,
) -> Result<Vec<CMatrix>> {
    let mut y = y0.clone();
    let mut t = 0.0_f64;
    let mut k1 = g.apply(&y);
    let mut h = initial_step(&y, &k1, cfg);
    let mut out = Vec::with_capacity(cfg.sample_times.len());
    let mut steps = 0usize;
    for &ts in &cfg.sample_times {
        while t < ts {
            let remaining = ts - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let (ys, k7, err) = dopri_step(g, &y, &k1, step);
            steps += 1;
            let mut acc = 0.0;
            for ((e, a), b) in err.iter().zip(y.iter()).zip(ys.iter()) {
                let sc = cfg.atol + cfg.rtol * a.norm().max(b.norm());
                acc += (e.norm() / sc).powi(2);
            }
            let err_norm = (acc / err.len() as f64).sqrt();
            let herm_ok = rel_herm_defect(&ys) - rel_herm_defect(&y) <= HERMITICITY_STEP_TOL;
            if err_norm <= 1.0 && herm_ok {
                t = if last { ts } else { t + step };
                y = ys;
                k1 = k7;
                let fac = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a step shortened to hit a sample time says little about h
                if !last || fac < 1.0 {
                    h = (step * fac).min(cfg.max_step);
                }
            } else {
                let fac = if herm_ok && err_norm.is_finite() {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.25
                };
                h = step * fac;
            }
            if h < 1e-13 * t.abs().max(1e-3) || steps > MAX_STEPS {
                return Err(QbeError::Stiffness { t, h });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step(y: &CMatrix, f: &CMatrix, cfg: &IntegratorConfig) -> f64 {
    let d0 = linalg::frobenius_norm(y);
    let d1 = linalg::frobenius_norm(f);
    let span = cfg.sample_times.last().copied().unwrap_or(1.0).max(1e-12);
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h.min(cfg.max_step).min(span).max(1e-12 * span)
}

/// `σ(t) = S⁻¹ e^{tL} S σ0` for a thermal sandwich `S` built from `h`.
///
/// The propagation runs in the eigenbasis of `h`, where `S` is a diagonal
/// scaling; the returned states are in the original basis.
pub fn conjugated_propagate(
    sigma0: &StateMatrix,
    h: &Operator,
    params: &PhysParams,
    lindblad: &Generator,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let s = ThermalSandwich::new(h, params)?;
    conjugated_propagate_with(sigma0, &s, lindblad, cfg)
}

/// [`conjugated_propagate`] with a prebuilt sandwich.
pub fn conjugated_propagate_with(
    sigma0: &StateMatrix,
    s: &ThermalSandwich,
    lindblad: &Generator,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let framed = SandwichMap::new(
        lindblad.basis().dim(),
        lindblad
            .to_sandwich()
            .terms()
            .iter()
            .map(|t| SandwichTerm {
                left: t.left.as_ref().map(|l| s.to_frame(l)),
                right: t.right.as_ref().map(|r| s.to_frame(r)),
            })
            .collect(),
    );
    let x0 = s.apply_in_frame(&s.to_frame(sigma0.matrix()));
    let xs = propagate_matrix(&framed, &x0, cfg)?;
    let states = xs
        .iter()
        .map(|x| {
            let sigma = s.from_frame(&s.apply_inverse_in_frame(x));
            Ok(StateMatrix::unnormalized(sigma0.basis().clone(), sigma)?
                .with_role(crate::basis::Role::Sigma))
        })
        .collect::<Result<_>>()?;
    Ok(Trajectory::new(cfg.sample_times.clone(), states))
}

/// Runs `run` at truncation `n` and `2n` and compares every named scalar.
pub fn convergence_check<F>(run: F, n: usize) -> ConvergenceVerdict
where
    F: Fn(usize) -> Result<Vec<(String, f64)>>,
{
    let (coarse, fine) = match (run(n), run(2 * n)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return ConvergenceVerdict {
                passed: false,
                entries: Vec::new(),
                note: Some(e.to_string()),
            }
        }
    };
    let mut entries = Vec::new();
    let mut passed = true;
    for (name, a) in coarse {
        let b = fine
            .iter()
            .find(|(n2, _)| *n2 == name)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN);
        let scale = a.abs().max(b.abs());
        let rel_change = if a == b { 0.0 } else { (a - b).abs() / scale };
        if !(rel_change < CONVERGENCE_TOL) {
            passed = false;
        }
        entries.push(ConvergenceEntry {
            name,
            coarse: a,
            fine: b,
            rel_change,
        });
    }
    ConvergenceVerdict {
        passed,
        entries,
        note: None,
    }
}
