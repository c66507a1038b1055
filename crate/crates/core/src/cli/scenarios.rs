//! The preset experiments. Each one measures a trajectory, a few headline
//! scalars and the assertions that decide the exit code.

use crate::basis::{BasisSpec, Role, StateMatrix};
use crate::diagnostics::{
    gaussianity_defect, min_eigenvalue, purity, stationarity_residual, trace_distance,
    DiagnosticsRow,
};
use crate::error::{QbeError, Result};
use crate::evolution::{convergence_check, propagate, IntegratorConfig};
use crate::gaussian::{gaussian_state, GaussianMoments};
use crate::linalg::{self, c, CMatrix};
use crate::microbath::{
    correlated_initial_state, product_initial_state, total_hamiltonian, BathSpec, ExactEvolution,
};
use crate::models::{
    brownian_dissipator, canonical_sigma, eta_superoperator, free_particle_sigma_generator,
    generator_exp, positive_evolution, sigma_generator, standard_qbe_generator, Direction, EtaMap,
    SigmaMode,
};
use crate::operators::{canonical_pair, change_state_basis, hamiltonian, CanonicalPair};
use crate::params::PhysParams;
use crate::superop::{cp_report, superop_exp, Superoperator};

use super::config::{BathConfig, InitialState, RunConfig, Scenario};
use super::report::{Relation, Report};

/// Minimum eigenvalue that counts as a positivity violation.
pub const VIOLATION_TOL: f64 = 1e-6;
/// Positivity and purity slack for the positive pipeline.
pub const POSITIVITY_TOL: f64 = 1e-8;
pub const STATIONARITY_TOL: f64 = 1e-8;
pub const CROSSREP_TOL: f64 = 1e-6;
pub const TRACE_RATE_TOL: f64 = 1e-6;
pub const GAUSSIANITY_TOL: f64 = 1e-4;

pub fn run_scenario(cfg: &RunConfig) -> Result<Report> {
    match cfg.scenario {
        Scenario::Violate => violate(cfg),
        Scenario::Positive => positive(cfg),
        Scenario::Stationary => stationary(cfg),
        Scenario::FreeParticleConsistency => free_particle(cfg),
        Scenario::RecoillessTrace => recoilless(cfg),
        Scenario::EtaCrossRep => crossrep(cfg),
        Scenario::ChoiAudit => choi_audit(cfg),
        Scenario::MicrobathCompare => microbath_compare(cfg),
        Scenario::JoltCompare => jolt_compare(cfg),
    }
}

struct Setup {
    pair: CanonicalPair,
    h: crate::basis::Operator,
    state: StateMatrix,
}

fn setup(cfg: &RunConfig, basis: &BasisSpec) -> Result<Setup> {
    let pair = canonical_pair(basis, &cfg.params)?;
    let h = hamiltonian(&cfg.potential, &pair, &cfg.params)?;
    let state = initial_state(cfg, &pair, &h)?;
    Ok(Setup { pair, h, state })
}

fn initial_state(
    cfg: &RunConfig,
    pair: &CanonicalPair,
    h: &crate::basis::Operator,
) -> Result<StateMatrix> {
    let hbar = cfg.params.hbar;
    match cfg.initial_state {
        InitialState::Gaussian {
            mean_q,
            mean_p,
            var_q,
            squeeze,
            mixing,
        } => {
            let m = GaussianMoments::pure(mean_q, mean_p, var_q, squeeze, hbar)?.mixed(mixing);
            gaussian_state(&m, pair, hbar)
        }
        InitialState::Canonical => canonical_sigma(h, &cfg.params),
        InitialState::Fock { n } => {
            let d = pair.q.dim();
            let mut m = CMatrix::zeros((d, d));
            m[[n, n]] = c(1.0);
            StateMatrix::rho(pair.q.basis().clone(), m)
        }
    }
}

/// Same basis with twice the resolution: doubled Fock dimension, or doubled
/// extent at fixed spacing.
fn doubled(basis: &BasisSpec) -> Result<BasisSpec> {
    match *basis {
        BasisSpec::Fock { dim, omega_ref } => BasisSpec::fock(2 * dim, omega_ref),
        BasisSpec::Grid { x_min, x_max, n } => {
            let half = 0.5 * (x_max - x_min);
            BasisSpec::grid(x_min - half, x_max + half, 2 * n)
        }
        BasisSpec::Product(_) => Err(QbeError::UnsupportedRepresentation("resolution doubling")),
    }
}

fn min_over(rows: &[DiagnosticsRow], f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
    rows.iter().map(f).fold(f64::INFINITY, f64::min)
}

fn max_over(rows: &[DiagnosticsRow], f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
    rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

fn violate(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let g = standard_qbe_generator(&cfg.params, &s.pair.q, &s.pair.p, &s.h)?;
    let mut traj = propagate(&g, &s.state, &cfg.integrator)?;
    traj.measure(&s.pair)?;
    let first = traj.rows.iter().position(|r| r.min_eig < -VIOLATION_TOL);
    let before = &traj.rows[..first.unwrap_or(traj.rows.len())];
    let purity_before = max_over(before, |r| r.purity);
    let t_violation = first.map_or(f64::NAN, |k| traj.rows[k].t);
    report.measure("min_eig_min", min_over(&traj.rows, |r| r.min_eig));
    report.measure("first_violation_t", t_violation);
    report.measure("purity_max_before_violation", purity_before);
    if let (Some(k), true) = (first, cfg.extras.convergence) {
        let t = traj.rows[k].t;
        report.convergence = Some(convergence_check(
            |scale| {
                let basis = if scale == 1 {
                    cfg.basis.clone()
                } else {
                    doubled(&cfg.basis)?
                };
                let s = setup(cfg, &basis)?;
                let g = standard_qbe_generator(&cfg.params, &s.pair.q, &s.pair.p, &s.h)?;
                let ic = IntegratorConfig {
                    sample_times: vec![0.0, t],
                    ..cfg.integrator.clone()
                };
                let out = propagate(&g, &s.state, &ic)?;
                let last = out.states[1].matrix();
                Ok(vec![
                    ("min_eig".into(), min_eigenvalue(last)?),
                    ("purity".into(), purity(last)),
                ])
            },
            1,
        ));
    }
    report.check(
        "min_eig_min",
        min_over(&traj.rows, |r| r.min_eig),
        Relation::Below,
        -VIOLATION_TOL,
    );
    report.check(
        "purity_max_before_violation",
        purity_before,
        Relation::Above,
        1.0 + VIOLATION_TOL,
    );
    if let Some(v) = &report.convergence {
        report.check(
            "converged",
            if v.passed { 1.0 } else { 0.0 },
            Relation::AtLeast,
            1.0,
        );
    }
    report.rows = traj.rows;
    Ok(report)
}

fn positive(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let ev = positive_evolution(&s.state, &cfg.params, &s.h, &s.pair.q, &cfg.integrator)?;
    let traj = ev.trajectory(&s.pair, cfg.params.hbar, true)?;
    let min_eig = min_over(&traj.rows, |r| r.min_eig);
    let max_purity = max_over(&traj.rows, |r| r.purity);
    report.measure("min_eig_min", min_eig);
    report.measure("purity_max", max_purity);
    report.check("min_eig_min", min_eig, Relation::AtLeast, -POSITIVITY_TOL);
    report.check(
        "purity_max",
        max_purity,
        Relation::AtMost,
        1.0 + POSITIVITY_TOL,
    );
    report.rows = traj.rows;
    Ok(report)
}

fn stationary(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::new(cfg.scenario.name());
    let residual_at = |basis: &BasisSpec| -> Result<f64> {
        let s = setup(cfg, basis)?;
        let g = sigma_generator(&s.h, &cfg.params, &s.pair.q, SigmaMode::ExactSandwich)?;
        stationarity_residual(&g, s.state.matrix())
    };
    let residual = residual_at(&cfg.basis)?;
    let residual_fine = residual_at(&doubled(&cfg.basis)?)?;
    let s = setup(cfg, &cfg.basis)?;
    let ev = positive_evolution(&s.state, &cfg.params, &s.h, &s.pair.q, &cfg.integrator)?;
    let drift = ev
        .rho
        .iter()
        .map(|r| trace_distance(r.matrix(), ev.rho[0].matrix()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.measure("residual", residual);
    report.measure("residual_doubled_truncation", residual_fine);
    report.measure("drift_max", drift);
    report.check("residual", residual, Relation::AtMost, STATIONARITY_TOL);
    report.check(
        "residual_doubled_truncation",
        residual_fine,
        Relation::AtMost,
        STATIONARITY_TOL,
    );
    report.check("drift_max", drift, Relation::AtMost, STATIONARITY_TOL);
    report.rows = ev.trajectory(&s.pair, cfg.params.hbar, false)?.rows;
    Ok(report)
}

fn free_particle(cfg: &RunConfig) -> Result<Report> {
    if !cfg.potential.is_free() || cfg.potential.recoilless {
        return Err(QbeError::InvalidParameter {
            name: "potential",
            reason: "freeparticle-consistency needs V = 0 with the kinetic term".into(),
        });
    }
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let p = &cfg.params;
    let g = free_particle_sigma_generator(p, &s.pair.q, &s.pair.p)?;
    let traj = propagate(&g, &s.state, &cfg.integrator)?;
    let p2 = s.pair.p.matrix().dot(s.pair.p.matrix());
    let mut worst_rate = 0.0f64;
    let mut rows = Vec::with_capacity(traj.len());
    for (&t, sigma) in traj.times.iter().zip(&traj.states) {
        let m = sigma.matrix();
        let tr = linalg::trace(m).re;
        let direct = linalg::trace(&g.apply(m)).re;
        let formula = p.coupling * p.hbar / (2.0 * p.mass)
            * (linalg::trace(&p2.dot(m)).re / (p.mass * p.kt()) - tr);
        let scale = direct.abs().max(formula.abs()).max(f64::MIN_POSITIVE);
        worst_rate = worst_rate.max((direct - formula).abs() / scale);
        let rho = m.mapv(|z| z / tr);
        rows.push(
            DiagnosticsRow::measure(t, &rho, &s.pair)?
                .with_d_approx(tr)
                .with_gauss_defect(gaussianity_defect(&rho, &s.pair, p.hbar)?),
        );
    }
    let gauss = max_over(&rows, |r| r.gauss_defect.unwrap_or(f64::NAN));
    report.measure("trace_rate_rel_err_max", worst_rate);
    report.measure("gauss_defect_max", gauss);
    report.check(
        "trace_rate_rel_err_max",
        worst_rate,
        Relation::AtMost,
        TRACE_RATE_TOL,
    );
    report.check("gauss_defect_max", gauss, Relation::AtMost, GAUSSIANITY_TOL);
    report.rows = rows;
    Ok(report)
}

fn recoilless(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let ev = positive_evolution(&s.state, &cfg.params, &s.h, &s.pair.q, &cfg.integrator)?;
    let d0 = ev.d_approx[0];
    let spread = ev
        .d_approx
        .iter()
        .map(|d| (d - d0).abs())
        .fold(0.0, f64::max)
        / d0.abs();
    report.measure("d_approx_initial", d0);
    report.measure("d_approx_rel_spread", spread);
    report.check(
        "d_approx_rel_spread",
        spread,
        Relation::AtMost,
        POSITIVITY_TOL,
    );
    report.rows = ev.trajectory(&s.pair, cfg.params.hbar, false)?.rows;
    Ok(report)
}

fn crossrep(cfg: &RunConfig) -> Result<Report> {
    if !matches!(cfg.basis, BasisSpec::Fock { .. }) {
        return Err(QbeError::RepresentationMismatch {
            expected: "fock basis",
            found: cfg.basis.kind_name().into(),
        });
    }
    let grid = cfg
        .extras
        .crossrep_grid
        .clone()
        .ok_or(QbeError::InvalidBasis(
            "eta-crossrep needs a [crossrep] grid".into(),
        ))?;
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let grid_pair = canonical_pair(&grid, &cfg.params)?;
    let via_fock = eta_superoperator(&cfg.params, &s.pair.q)?.apply_state(&s.state)?;
    let mapped = change_state_basis(&via_fock, &grid, &cfg.params)?;
    let on_grid = change_state_basis(&s.state, &grid, &cfg.params)?;
    let closed = EtaMap::new(&grid_pair.q, &cfg.params)?.forward(on_grid.matrix());
    let distance = trace_distance(mapped.matrix(), &closed)?;
    report.measure("eta", cfg.params.eta());
    report.measure("trace_distance", distance);
    report.check("trace_distance", distance, Relation::AtMost, CROSSREP_TOL);
    let tr = via_fock.trace().re;
    report.rows = vec![DiagnosticsRow::measure(0.0, via_fock.matrix(), &s.pair)?.with_d_approx(tr)];
    Ok(report)
}

fn choi_audit(cfg: &RunConfig) -> Result<Report> {
    let choi = cfg.extras.choi.clone().ok_or(QbeError::InvalidBasis(
        "choi-audit needs a [choi] section".into(),
    ))?;
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let p = &cfg.params;

    let ir = brownian_dissipator(p, &s.pair.q);
    let mut lindblad = f64::INFINITY;
    for &t in &choi.times {
        let r = cp_report(&generator_exp(&ir, t)?)?;
        report.measure(format!("choi.dissipator.t={t}"), r.min_eig / r.trace);
        lindblad = lindblad.min(r.min_eig / r.trace);
    }

    let standard = standard_qbe_generator(p, &s.pair.q, &s.pair.p, &s.h)?;
    let mut eq_min = f64::INFINITY;
    for &t in &choi.times {
        let r = cp_report(&generator_exp(&standard, t)?)?;
        report.measure(format!("choi.standard.t={t}"), r.min_eig);
        eq_min = eq_min.min(r.min_eig);
    }

    let gp = canonical_pair(&choi.grid, p)?;
    let gh = hamiltonian(&cfg.potential, &gp, p)?;
    let tilde = sigma_generator(&gh, p, &gp.q, SigmaMode::ExactSandwich)?.to_matrix()?;
    let mut composite = f64::INFINITY;
    for &strength in &choi.strengths {
        let eta = EtaMap::with_strength(&gp.q, strength)?;
        let forward = eta.to_matrix(Direction::Forward)?;
        let inverse = eta.to_matrix(Direction::Inverse)?;
        for &t in &choi.times {
            let m = forward
                .compose(&superop_exp(&tilde, t)?)?
                .compose(&inverse)?;
            let r = cp_report(&m)?;
            report.measure(
                format!("choi.composite.strength={strength}.t={t}"),
                r.min_eig / r.trace,
            );
            composite = composite.min(r.min_eig / r.trace);
        }
    }
    report.check(
        "dissipator_min_relative",
        lindblad,
        Relation::AtLeast,
        -crate::superop::CP_TOL,
    );
    report.check("standard_min", eq_min, Relation::Below, -VIOLATION_TOL);
    report.check(
        "composite_min_relative",
        composite,
        Relation::Below,
        -crate::superop::CP_TOL,
    );

    let mut traj = propagate(&standard, &s.state, &cfg.integrator)?;
    traj.measure(&s.pair)?;
    report.rows = traj.rows;
    Ok(report)
}

struct BathSystem {
    exact: ExactEvolution,
    correlated: StateMatrix,
    product: StateMatrix,
    recurrence: f64,
}

fn bath_system(params: &PhysParams, bath: &BathConfig, s: &Setup) -> Result<BathSystem> {
    let spec = BathSpec::new(
        bath.n_modes,
        bath.per_mode_dim,
        params.coupling,
        params.omega_max,
    )?;
    let modes = spec.modes()?;
    let dims = spec.dims();
    crate::microbath::check_truncation(&modes, &dims, params)?;
    let h_t = total_hamiltonian(&s.h, &s.pair.q, &modes, &dims, params.hbar)?;
    let exact = ExactEvolution::new(&h_t, params.hbar)?;
    let correlated = correlated_initial_state(&s.state, &h_t, &s.h, params)?;
    let rho_c = exact.reduce(&correlated, &[0.0])?.remove(0);
    let product = product_initial_state(&rho_c, &modes, &dims, params)?;
    Ok(BathSystem {
        exact,
        correlated,
        product,
        recurrence: spec.recurrence_time(),
    })
}

fn with_coupling(p: &PhysParams, coupling: f64) -> Result<PhysParams> {
    PhysParams::new(p.hbar, p.k, p.mass, p.temperature, coupling, p.omega_max)
}

fn bath_config(cfg: &RunConfig) -> Result<BathConfig> {
    cfg.extras
        .bath
        .clone()
        .ok_or(QbeError::InvalidBasis("needs a [bath] section".into()))
}

fn reduced_rows(
    states: &[StateMatrix],
    times: &[f64],
    pair: &CanonicalPair,
) -> Result<Vec<DiagnosticsRow>> {
    times
        .iter()
        .zip(states)
        .map(|(&t, s)| DiagnosticsRow::measure(t, s.matrix(), pair))
        .collect()
}

fn microbath_compare(cfg: &RunConfig) -> Result<Report> {
    let bath = bath_config(cfg)?;
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let sigma0 = s.state.clone().with_role(Role::Sigma);
    let mut distances = Vec::new();
    let mut min_eig = f64::INFINITY;
    let mut rows = Vec::new();
    let mut recurrence = f64::NAN;
    for (k, factor) in [1.0, 0.5, 0.25].into_iter().enumerate() {
        let params = with_coupling(&cfg.params, cfg.params.coupling * factor)?;
        let sys = bath_system(&params, &bath, &s)?;
        recurrence = sys.recurrence;
        let exact_t = sys
            .exact
            .reduce(&sys.correlated, &[bath.t_compare])?
            .remove(0);
        let ic = IntegratorConfig {
            sample_times: vec![0.0, bath.t_compare],
            ..cfg.integrator.clone()
        };
        let predicted = positive_evolution(&sigma0, &params, &s.h, &s.pair.q, &ic)?;
        let d = trace_distance(exact_t.matrix(), predicted.rho[1].matrix())?;
        report.measure(format!("trace_distance.C={}", params.coupling), d);
        distances.push(d);
        min_eig = min_eig.min(min_eigenvalue(exact_t.matrix())?);
        if k == 0 {
            let times = &cfg.integrator.sample_times;
            let states = sys.exact.reduce(&sys.correlated, times)?;
            for st in &states {
                min_eig = min_eig.min(min_eigenvalue(st.matrix())?);
            }
            rows = reduced_rows(&states, times, &s.pair)?;
        }
    }
    let decrease = distances
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    report.measure("recurrence_time", recurrence);
    report.measure("min_eig_min", min_eig);
    report.check("min_eig_min", min_eig, Relation::AtLeast, -POSITIVITY_TOL);
    report.check("t_compare", bath.t_compare, Relation::Below, recurrence);
    report.check(
        "trace_distance_decrease_min",
        decrease,
        Relation::Above,
        0.0,
    );
    report.rows = rows;
    Ok(report)
}

/// Largest `|dP/dt|` of the purity by central differences.
fn max_purity_slope(states: &[StateMatrix], dt: f64) -> f64 {
    let p: Vec<f64> = states.iter().map(|s| purity(s.matrix())).collect();
    p.windows(3)
        .map(|w| ((w[2] - w[0]) / (2.0 * dt)).abs())
        .fold(0.0, f64::max)
}

fn jolt_compare(cfg: &RunConfig) -> Result<Report> {
    let bath = bath_config(cfg)?;
    let mut report = Report::new(cfg.scenario.name());
    let s = setup(cfg, &cfg.basis)?;
    let sys = bath_system(&cfg.params, &bath, &s)?;
    let n = (bath.window / bath.dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * bath.dt).collect();
    let from_product = sys.exact.reduce(&sys.product, &times)?;
    let from_correlated = sys.exact.reduce(&sys.correlated, &times)?;
    let mismatch = trace_distance(from_product[0].matrix(), from_correlated[0].matrix())?;
    let jolt_product = max_purity_slope(&from_product, bath.dt);
    let jolt_correlated = max_purity_slope(&from_correlated, bath.dt);
    let mut min_eig = f64::INFINITY;
    for st in from_product.iter().chain(&from_correlated) {
        min_eig = min_eig.min(min_eigenvalue(st.matrix())?);
    }
    report.measure("initial_reduced_mismatch", mismatch);
    report.measure("jolt_product", jolt_product);
    report.measure("jolt_correlated", jolt_correlated);
    report.measure("min_eig_min", min_eig);
    report.check("min_eig_min", min_eig, Relation::AtLeast, -POSITIVITY_TOL);
    report.check(
        "jolt_product",
        jolt_product,
        Relation::Above,
        jolt_correlated,
    );
    report.rows = reduced_rows(&from_product, &times, &s.pair)?;
    Ok(report)
}
