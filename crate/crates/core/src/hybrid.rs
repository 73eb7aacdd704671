//! Quantum pressure solve inside the projection loop.
//!
//! Each step assembles `b`, runs HHL on the pressure matrix, reads the
//! normalized solution out (full statevector or Chebyshev tomography),
//! calibrates its L2 norm and sign against the direct solve of the same `b`,
//! and removes the mean. A classical twin trajectory runs alongside for
//! comparison only.

use std::str::FromStr;

use crate::cfd::{
    advect_diffuse, classical_step, finish_step, remove_mean, ChebyPressure, FlowCase, FlowField, GradientMethod,
    NSConfig, PressureSystem,
};
use crate::error::{QnsError, Result};
use crate::grid::Grid2D;
use crate::hhl::{HHLConfig, HhlSolver};
use crate::metrics::{self, ARE_EPS};
use crate::qst::{reconstruct, AffineMap, ChebyBasis, ShotModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutKind {
    FullState,
    Chebyshev,
}

impl FromStr for ReadoutKind {
    type Err = QnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fullstate" | "full-state" => Ok(Self::FullState),
            "chebyshev" => Ok(Self::Chebyshev),
            other => Err(QnsError::Config(format!("unknown readout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Exact amplitudes of the post-selected register.
    FullState,
    /// `m` polynomials per dimension; each step draws shots from its own seed.
    Chebyshev { m: usize, shots: ShotModel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    pub ns: NSConfig,
    pub hhl: HHLConfig,
    pub readout: Readout,
    pub gradient: GradientMethod,
}

impl HybridConfig {
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        self.ns.validate()?;
        if let Some(n_b) = self.hhl.n_b {
            if grid.len() > 1 << n_b {
                return Err(QnsError::Config(format!("{} unknowns exceed 2^{n_b}", grid.len())));
            }
        }
        match self.readout {
            Readout::FullState if self.gradient == GradientMethod::AnalyticChebyshev => {
                Err(QnsError::Config("analytic gradient requires the Chebyshev readout".into()))
            }
            Readout::Chebyshev { m, .. } if m == 0 || m > grid.n_xi().min(grid.n_eta()) => {
                Err(QnsError::Config(format!("Chebyshev order {m} out of range for this grid")))
            }
            _ => Ok(()),
        }
    }
}

/// Per-step record of the quantum pressure solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub success_probability: f64,
    pub clock_return_probability: f64,
    /// Signed factor mapping the unit-norm readout onto the pressure.
    pub scale: f64,
    /// Gram condition number (1 for the full-state readout).
    pub gram_condition: f64,
    /// Mean ARE of the hybrid pressure against the direct solve of the same `b`.
    pub pressure_are: f64,
    /// Relative L2 pressure residual against the same reference.
    pub pressure_residual: f64,
    /// Mean ARE of the velocity magnitude against the classical twin.
    pub velocity_are: f64,
    /// Mean normalized ARE of `u` and `v` against the exact vortex (vortex only).
    pub velocity_nare_exact: Option<f64>,
    pub pressure_nare_exact: Option<f64>,
}

/// Pressure from a unit-norm candidate: scaled to `‖reference‖₂` with the
/// sign of best correlation, then shifted to zero mean. Returns the field
/// and the signed scale factor.
pub fn calibrate_pressure(candidate: &[f64], reference: &[f64]) -> Result<(Vec<f64>, f64)> {
    if candidate.len() != reference.len() {
        return Err(QnsError::Shape { expected: reference.len(), got: candidate.len() });
    }
    let rn = metrics::l2_norm(reference);
    let cn = metrics::l2_norm(candidate);
    if rn == 0.0 || cn == 0.0 {
        return Ok((vec![0.0; candidate.len()], 0.0));
    }
    let dot: f64 = candidate.iter().zip(reference).map(|(a, b)| a * b).sum();
    let s = if dot < 0.0 { -rn / cn } else { rn / cn };
    let mut p: Vec<f64> = candidate.iter().map(|v| v * s).collect();
    remove_mean(&mut p);
    Ok((p, s))
}

/// Output of one hybrid pressure solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSolve {
    pub p: Vec<f64>,
    pub reference: Vec<f64>,
    pub scale: f64,
    pub success_probability: f64,
    pub clock_return_probability: f64,
    pub gram_condition: f64,
    /// Chebyshev coefficients of the unit-norm readout, when used.
    pub coefficients: Option<Vec<f64>>,
}

/// Matrices, HHL preparation, and tomography basis for one grid.
#[derive(Debug, Clone)]
pub struct HybridSolver {
    grid: Grid2D,
    cfg: HybridConfig,
    system: PressureSystem,
    hhl: HhlSolver,
    basis: Option<ChebyBasis>,
}

fn domain_map(axis: &crate::grid::Axis) -> Result<AffineMap> {
    if axis.periodic {
        AffineMap::new(0.0, axis.length)
    } else {
        AffineMap::new(axis.coords[0], axis.coords[axis.n + 1])
    }
}

impl HybridSolver {
    pub fn new(grid: &Grid2D, cfg: &HybridConfig) -> Result<Self> {
        cfg.validate(grid)?;
        let system = PressureSystem::new(grid, cfg.ns.case)?;
        let hhl = HhlSolver::new(&system.matrix, &cfg.hhl)?;
        let basis = match cfg.readout {
            Readout::FullState => None,
            Readout::Chebyshev { m, .. } => Some(ChebyBasis::build_2d(
                grid.xi.interior(),
                domain_map(&grid.xi)?,
                grid.eta.interior(),
                domain_map(&grid.eta)?,
                m,
            )?),
        };
        Ok(Self { grid: grid.clone(), cfg: cfg.clone(), system, hhl, basis })
    }

    pub fn system(&self) -> &PressureSystem {
        &self.system
    }

    pub fn hhl(&self) -> &HhlSolver {
        &self.hhl
    }

    pub fn basis(&self) -> Option<&ChebyBasis> {
        self.basis.as_ref()
    }

    /// Solves `A p = b` through HHL and the configured readout. `step`
    /// selects the shot-noise seed.
    pub fn pressure_solve(&self, b: &[f64], step: usize) -> Result<PressureSolve> {
        if b.len() != self.grid.len() {
            return Err(QnsError::Shape { expected: self.grid.len(), got: b.len() });
        }
        let mut reference = self.system.solver.solve(b)?;
        remove_mean(&mut reference);
        if metrics::l2_norm(&reference) == 0.0 {
            let n = b.len();
            return Ok(PressureSolve {
                p: vec![0.0; n],
                reference,
                scale: 0.0,
                success_probability: 0.0,
                clock_return_probability: 0.0,
                gram_condition: 1.0,
                coefficients: None,
            });
        }
        let res = self.hhl.solve(b)?;
        let (readout, coefficients, gram_condition) = match (&self.basis, self.cfg.readout) {
            (Some(basis), Readout::Chebyshev { shots, .. }) => {
                let model = ShotModel { seed: step_seed(shots.seed, step), ..shots };
                let rec = reconstruct(&res.solution, basis, &model)?;
                (rec.values, Some(rec.coefficients), basis.condition)
            }
            _ => (res.solution, None, 1.0),
        };
        let (p, scale) = calibrate_pressure(&readout, &reference)?;
        Ok(PressureSolve {
            p,
            reference,
            scale,
            success_probability: res.success_probability,
            clock_return_probability: res.clock_return_probability,
            gram_condition,
            coefficients,
        })
    }

    /// One hybrid projection step.
    pub fn step(&self, field: &FlowField, step: usize) -> Result<(FlowField, PressureSolve)> {
        let (us, vs) = advect_diffuse(field, &self.cfg.ns);
        let b = self.system.rhs(&us, &vs, &self.grid, self.cfg.ns.dt);
        let solve = self.pressure_solve(&b, step)?;
        let cheb = match (&self.basis, &solve.coefficients) {
            (Some(basis), Some(c)) => Some(ChebyPressure { basis, coefficients: c, scale: solve.scale }),
            _ => None,
        };
        let (next, _) = finish_step(field, &self.cfg.ns, &us, &vs, &solve.p, self.cfg.gradient, cheb, step)?;
        Ok((next, solve))
    }
}

/// Deterministic per-step seed derived from the run seed.
pub fn step_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Hybrid trajectory, its classical twin, and the per-step record.
#[derive(Debug, Clone)]
pub struct HybridRun {
    pub field: FlowField,
    pub twin: FlowField,
    pub history: Vec<StepDiagnostics>,
}

impl HybridRun {
    pub fn final_velocity_are(&self) -> f64 {
        self.history.last().map_or(0.0, |d| d.velocity_are)
    }

    pub fn mean_velocity_are(&self) -> f64 {
        metrics::mean(&self.history.iter().map(|d| d.velocity_are).collect::<Vec<_>>())
    }

    pub fn mean_pressure_residual(&self) -> f64 {
        metrics::mean(&self.history.iter().map(|d| d.pressure_residual).collect::<Vec<_>>())
    }
}

/// Interior speeds.
pub fn speed(field: &FlowField) -> Vec<f64> {
    let g = &field.grid;
    metrics::magnitude(&g.gather(&field.u), &g.gather(&field.v))
}

/// Mean normalized ARE of the velocity components and of the pressure
/// against the exact vortex at the field's time.
pub fn tgv_errors(field: &FlowField, nu: f64) -> Result<(f64, f64)> {
    let g = &field.grid;
    let (mut eu, mut ev, mut ep) = (Vec::new(), Vec::new(), Vec::new());
    for j in 1..=g.n_eta() {
        for i in 1..=g.n_xi() {
            let (u, v, p) = crate::cfd::tgv_exact(g.xi.coords[i], g.eta.coords[j], field.time, nu);
            eu.push(u);
            ev.push(v);
            ep.push(p);
        }
    }
    let mut pe = ep.clone();
    remove_mean(&mut pe);
    let nu_ = metrics::mean(&metrics::metric_normalized_are(&g.gather(&field.u), &eu)?);
    let nv = metrics::mean(&metrics::metric_normalized_are(&g.gather(&field.v), &ev)?);
    let np = metrics::mean(&metrics::metric_normalized_are(&g.gather(&field.p), &pe)?);
    Ok((0.5 * (nu_ + nv), np))
}

/// Runs the hybrid loop for `cfg.ns.steps` steps from `initial`, with the
/// classical twin advanced in lockstep.
pub fn hybrid_run(initial: &FlowField, cfg: &HybridConfig) -> Result<HybridRun> {
    let grid = &initial.grid;
    let solver = HybridSolver::new(grid, cfg)?;
    let mut field = initial.clone();
    let mut twin = initial.clone();
    let mut history = Vec::with_capacity(cfg.ns.steps);
    for s in 1..=cfg.ns.steps {
        let (next, solve) = solver.step(&field, s)?;
        let (twin_next, _) = classical_step(&twin, &cfg.ns, solver.system(), s)?;
        let (_, pressure_are) = metrics::metric_are(&solve.p, &solve.reference, ARE_EPS)?;
        let rn = metrics::l2_norm(&solve.reference);
        let diff: Vec<f64> = solve.p.iter().zip(&solve.reference).map(|(a, b)| a - b).collect();
        let pressure_residual = if rn > 0.0 { metrics::l2_norm(&diff) / rn } else { 0.0 };
        let (_, velocity_are) = metrics::metric_are(&speed(&next), &speed(&twin_next), ARE_EPS)?;
        let (velocity_nare_exact, pressure_nare_exact) = match cfg.ns.case {
            FlowCase::Tgv => {
                let (v, p) = tgv_errors(&next, cfg.ns.nu)?;
                (Some(v), Some(p))
            }
            FlowCase::Cavity => (None, None),
        };
        history.push(StepDiagnostics {
            step: s,
            time: next.time,
            success_probability: solve.success_probability,
            clock_return_probability: solve.clock_return_probability,
            scale: solve.scale,
            gram_condition: solve.gram_condition,
            pressure_are,
            pressure_residual,
            velocity_are,
            velocity_nare_exact,
            pressure_nare_exact,
        });
        field = next;
        twin = twin_next;
    }
    Ok(HybridRun { field, twin, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfd::case_grid;
    use crate::grid::StretchConfig;
    use approx::assert_abs_diff_eq;

    fn small_cfg(case: FlowCase, steps: usize, readout: Readout) -> HybridConfig {
        HybridConfig {
            ns: match case {
                FlowCase::Cavity => NSConfig::cavity(steps),
                FlowCase::Tgv => NSConfig::tgv(steps),
            },
            hhl: HHLConfig { n_c: 6, ..Default::default() },
            readout,
            gradient: GradientMethod::Central,
        }
    }

    #[test]
    fn calibration_is_exact_for_proportional_input() {
        let reference = vec![0.3, -1.2, 0.5, 0.4];
        let cand: Vec<f64> = reference.iter().map(|v| -v / 7.0).collect();
        let (p, s) = calibrate_pressure(&cand, &reference).unwrap();
        for (a, b) in p.iter().zip(&reference) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(s < 0.0);
        let (p, s) = calibrate_pressure(&cand, &[0.0; 4]).unwrap();
        assert_eq!((p, s), (vec![0.0; 4], 0.0));
    }

    #[test]
    fn zero_rhs_gives_zero_pressure() {
        let g = case_grid(FlowCase::Cavity, 4, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let s = HybridSolver::new(&g, &small_cfg(FlowCase::Cavity, 1, Readout::FullState)).unwrap();
        let r = s.pressure_solve(&[0.0; 16], 1).unwrap();
        assert!(r.p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gauge_holds_every_step() {
        let g = case_grid(FlowCase::Cavity, 6, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let cfg =
            small_cfg(FlowCase::Cavity, 5, Readout::Chebyshev { m: 4, shots: ShotModel::new(100_000, 5).unwrap() });
        let solver = HybridSolver::new(&g, &cfg).unwrap();
        let mut f = FlowField::cavity_initial(&g, 1.0);
        for s in 1..=5 {
            let (next, solve) = solver.step(&f, s).unwrap();
            assert!(solve.p.iter().sum::<f64>().abs() < 1e-12);
            assert!(g.gather(&next.p).iter().sum::<f64>().abs() < 1e-12);
            f = next;
        }
    }

    #[test]
    fn full_rank_tomography_matches_full_state() {
        let n = 6;
        let g = case_grid(FlowCase::Cavity, n, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let full = hybrid_run(&FlowField::cavity_initial(&g, 1.0), &small_cfg(FlowCase::Cavity, 8, Readout::FullState))
            .unwrap();
        let cheb = hybrid_run(
            &FlowField::cavity_initial(&g, 1.0),
            &small_cfg(FlowCase::Cavity, 8, Readout::Chebyshev { m: n, shots: ShotModel::exact() }),
        )
        .unwrap();
        for (a, b) in full.field.u.iter().zip(&cheb.field.u).chain(full.field.p.iter().zip(&cheb.field.p)) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_readout_reproduces_the_classical_step() {
        // readout proportional to the classical pressure, rescaled by calibration
        let g = case_grid(FlowCase::Tgv, 8, &StretchConfig::uniform(1.0)).unwrap();
        let cfg = small_cfg(FlowCase::Tgv, 1, Readout::FullState);
        let solver = HybridSolver::new(&g, &cfg).unwrap();
        let f = FlowField::tgv_initial(&g, cfg.ns.nu);
        let (us, vs) = advect_diffuse(&f, &cfg.ns);
        let b = solver.system().rhs(&us, &vs, &g, cfg.ns.dt);
        let mut pc = solver.system().solver.solve(&b).unwrap();
        remove_mean(&mut pc);
        let unit: Vec<f64> = pc.iter().map(|v| v / metrics::l2_norm(&pc) * 3.0).collect();
        let (p, _) = calibrate_pressure(&unit, &pc).unwrap();
        let (hyb, _) = finish_step(&f, &cfg.ns, &us, &vs, &p, GradientMethod::Central, None, 1).unwrap();
        let (cls, _) = classical_step(&f, &cfg.ns, solver.system(), 1).unwrap();
        for (a, b) in hyb.u.iter().zip(&cls.u).chain(hyb.v.iter().zip(&cls.v)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_gradient_runs_and_tracks_central() {
        let g = case_grid(FlowCase::Tgv, 8, &StretchConfig::uniform(1.0)).unwrap();
        let mut cfg = small_cfg(FlowCase::Tgv, 3, Readout::Chebyshev { m: 6, shots: ShotModel::exact() });
        let central = hybrid_run(&FlowField::tgv_initial(&g, 0.01), &cfg).unwrap();
        cfg.gradient = GradientMethod::AnalyticChebyshev;
        let analytic = hybrid_run(&FlowField::tgv_initial(&g, 0.01), &cfg).unwrap();
        let d: f64 = analytic.field.u.iter().zip(&central.field.u).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        assert!(d.is_finite() && d < 0.05, "{d}");
    }

    #[test]
    fn config_checks() {
        let g = case_grid(FlowCase::Cavity, 4, &StretchConfig::uniform(1.0)).unwrap();
        let mut cfg = small_cfg(FlowCase::Cavity, 1, Readout::FullState);
        cfg.gradient = GradientMethod::AnalyticChebyshev;
        assert!(HybridSolver::new(&g, &cfg).is_err());
        let cfg = small_cfg(FlowCase::Cavity, 1, Readout::Chebyshev { m: 5, shots: ShotModel::exact() });
        assert!(HybridSolver::new(&g, &cfg).is_err());
        let mut cfg = small_cfg(FlowCase::Cavity, 1, Readout::FullState);
        cfg.hhl.n_b = Some(3);
        assert!(HybridSolver::new(&g, &cfg).is_err());
    }

    #[test]
    fn step_seeds_differ() {
        assert_ne!(step_seed(7, 1), step_seed(7, 2));
        assert_eq!(step_seed(7, 3), step_seed(7, 3));
    }
}
