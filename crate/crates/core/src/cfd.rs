//! Projection-method solver for 2D incompressible flow on collocated grids.
//!
//! Fields are full node arrays of `(N_ξ+2)·(N_η+2)` values indexed by
//! [`Grid2D::node`]. Index 0 and `N+1` hold wall values (cavity) or
//! wraparound ghosts (periodic). Density is 1 throughout.
//!
//! One step:
//! 1. `u* = u + Δt(−u·∇u + ν∇²u)` with metric-scaled central differences;
//! 2. `∇²p = (∇·u*)/Δt`;
//! 3. `u = u* − Δt∇p`, then boundary conditions.

use std::str::FromStr;

use crate::error::{QnsError, Result};
use crate::grid::{build_grid, build_periodic_grid, Grid2D, StretchConfig};
use crate::linalg::{assemble_laplacian, BoundaryKind, DirectSolver, LaplacianForm, SparseSymMatrix};
use crate::par;
use crate::qst::ChebyBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowCase {
    /// Lid-driven cavity on `[0, L]²`, lid on the top wall.
    Cavity,
    /// Taylor-Green vortex on the periodic square `[0, 2π)²`.
    Tgv,
}

impl FlowCase {
    pub fn pressure_bc(self) -> BoundaryKind {
        match self {
            Self::Cavity => BoundaryKind::Neumann,
            Self::Tgv => BoundaryKind::Periodic,
        }
    }
}

impl FromStr for FlowCase {
    type Err = QnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cavity" => Ok(Self::Cavity),
            "tgv" => Ok(Self::Tgv),
            other => Err(QnsError::Config(format!("unknown flow case `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NSConfig {
    pub nu: f64,
    pub dt: f64,
    pub steps: usize,
    pub lid_speed: f64,
    pub case: FlowCase,
}

impl NSConfig {
    /// Re = 100 cavity with unit lid speed and unit side.
    pub fn cavity(steps: usize) -> Self {
        Self { nu: 0.01, dt: 1e-3, steps, lid_speed: 1.0, case: FlowCase::Cavity }
    }

    pub fn tgv(steps: usize) -> Self {
        Self { nu: 0.01, dt: 1e-3, steps, lid_speed: 0.0, case: FlowCase::Tgv }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QnsError::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(QnsError::Config(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !self.lid_speed.is_finite() {
            return Err(QnsError::Config("lid speed must be finite".into()));
        }
        Ok(())
    }

    /// Explicit-Euler stability estimate: the larger of the diffusion number
    /// `4νΔt/Δx²_min` and the advective CFL `|u|_max Δt/Δx_min`.
    pub fn stability_number(&self, grid: &Grid2D, umax: f64) -> f64 {
        let dx = min_spacing(grid);
        (4.0 * self.nu * self.dt / (dx * dx)).max(umax * self.dt / dx)
    }
}

fn min_spacing(grid: &Grid2D) -> f64 {
    let axis_min = |c: &[f64]| c.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    axis_min(&grid.xi.coords).min(axis_min(&grid.eta.coords))
}

/// Builds the grid a case runs on: walled with the given stretching for the
/// cavity, uniform periodic on `[0, 2π)²` for the vortex.
pub fn case_grid(case: FlowCase, n: usize, stretch: &StretchConfig) -> Result<Grid2D> {
    match case {
        FlowCase::Cavity => build_grid(n, n, stretch),
        FlowCase::Tgv => build_periodic_grid(n, n, 2.0 * std::f64::consts::PI),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub grid: Grid2D,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub time: f64,
}

impl FlowField {
    pub fn zeros(grid: &Grid2D) -> Self {
        let n = grid.total_nodes();
        Self { grid: grid.clone(), u: vec![0.0; n], v: vec![0.0; n], p: vec![0.0; n], time: 0.0 }
    }

    /// Fluid at rest with the lid moving.
    pub fn cavity_initial(grid: &Grid2D, lid_speed: f64) -> Self {
        let mut f = Self::zeros(grid);
        apply_cavity_bc(&mut f, lid_speed);
        f
    }

    /// Exact vortex fields at `t = 0`, ghosts included.
    pub fn tgv_initial(grid: &Grid2D, nu: f64) -> Self {
        let mut f = Self::zeros(grid);
        for j in 0..grid.n_eta() + 2 {
            for i in 0..grid.stride() {
                let (u, v, p) = tgv_exact(grid.xi.coords[i], grid.eta.coords[j], 0.0, nu);
                let k = grid.node(i, j);
                f.u[k] = u;
                f.v[k] = v;
                f.p[k] = p;
            }
        }
        f
    }

    pub fn initial(grid: &Grid2D, cfg: &NSConfig) -> Self {
        match cfg.case {
            FlowCase::Cavity => Self::cavity_initial(grid, cfg.lid_speed),
            FlowCase::Tgv => Self::tgv_initial(grid, cfg.nu),
        }
    }

    /// `½ Σ (u² + v²) ΔA` over the unknowns with per-node cell areas.
    pub fn kinetic_energy(&self) -> f64 {
        let g = &self.grid;
        let mut e = 0.0;
        for j in 1..=g.n_eta() {
            for i in 1..=g.n_xi() {
                let k = g.node(i, j);
                let area = g.xi.d / g.xi.h[i] * (g.eta.d / g.eta.h[j]);
                e += 0.5 * (self.u[k] * self.u[k] + self.v[k] * self.v[k]) * area;
            }
        }
        e
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().zip(&self.v).fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    fn check_finite(&self, step: usize) -> Result<()> {
        for (name, f) in [("u", &self.u), ("v", &self.v), ("p", &self.p)] {
            if let Some(k) = f.iter().position(|x| !x.is_finite()) {
                return Err(QnsError::Instability { step, what: format!("non-finite {name} at node {k}") });
            }
        }
        Ok(())
    }
}

/// Taylor-Green vortex velocity and pressure.
pub fn tgv_exact(x: f64, y: f64, t: f64, nu: f64) -> (f64, f64, f64) {
    let f = (-2.0 * nu * t).exp();
    let u = x.sin() * y.cos() * f;
    let v = -x.cos() * y.sin() * f;
    let p = ((2.0 * x).cos() + (2.0 * y).cos()) / 4.0 * f * f;
    (u, v, p)
}

/// No-slip walls with the top row (corners included) moving at `lid_speed`.
pub fn apply_cavity_bc(field: &mut FlowField, lid_speed: f64) {
    let g = &field.grid;
    let (nx, ny) = (g.n_xi() + 1, g.n_eta() + 1);
    for j in 0..=ny {
        for i in [0, nx] {
            let k = g.node(i, j);
            field.u[k] = 0.0;
            field.v[k] = 0.0;
        }
    }
    for i in 0..=nx {
        let k = g.node(i, 0);
        field.u[k] = 0.0;
        field.v[k] = 0.0;
        let k = g.node(i, ny);
        field.u[k] = lid_speed;
        field.v[k] = 0.0;
    }
    neumann_ghosts(g, &mut field.p);
}

/// Copies interior values into the opposite ghost layers.
pub fn apply_periodic_bc(field: &mut FlowField) {
    let g = field.grid.clone();
    for f in [&mut field.u, &mut field.v, &mut field.p] {
        periodic_ghosts(&g, f);
    }
}

fn periodic_ghosts(g: &Grid2D, f: &mut [f64]) {
    let (nx, ny) = (g.n_xi(), g.n_eta());
    for j in 1..=ny {
        f[g.node(0, j)] = f[g.node(nx, j)];
        f[g.node(nx + 1, j)] = f[g.node(1, j)];
    }
    for i in 0..nx + 2 {
        f[g.node(i, 0)] = f[g.node(i, ny)];
        f[g.node(i, ny + 1)] = f[g.node(i, 1)];
    }
}

/// Homogeneous Neumann ghosts: every boundary node mirrors its interior neighbour.
fn neumann_ghosts(g: &Grid2D, f: &mut [f64]) {
    let (nx, ny) = (g.n_xi(), g.n_eta());
    for j in 1..=ny {
        f[g.node(0, j)] = f[g.node(1, j)];
        f[g.node(nx + 1, j)] = f[g.node(nx, j)];
    }
    for i in 0..nx + 2 {
        let ii = i.clamp(1, nx);
        f[g.node(i, 0)] = f[g.node(ii, 1)];
        f[g.node(i, ny + 1)] = f[g.node(ii, ny)];
    }
}

/// Fills the pressure boundary layer for the case.
pub fn apply_pressure_bc(grid: &Grid2D, p: &mut [f64]) {
    if grid.periodic() {
        periodic_ghosts(grid, p);
    } else {
        neumann_ghosts(grid, p);
    }
}

fn apply_velocity_bc(field: &mut FlowField, cfg: &NSConfig) {
    match cfg.case {
        FlowCase::Cavity => apply_cavity_bc(field, cfg.lid_speed),
        FlowCase::Tgv => apply_periodic_bc(field),
    }
}

#[inline]
fn ddx(g: &Grid2D, f: &[f64], i: usize, j: usize) -> f64 {
    g.xi.h[i] * (f[g.node(i + 1, j)] - f[g.node(i - 1, j)]) / (2.0 * g.xi.d)
}

#[inline]
fn ddy(g: &Grid2D, f: &[f64], i: usize, j: usize) -> f64 {
    g.eta.h[j] * (f[g.node(i, j + 1)] - f[g.node(i, j - 1)]) / (2.0 * g.eta.d)
}

/// 5-point Laplacian with the same symmetric couplings as the pressure matrix.
#[inline]
fn laplacian(g: &Grid2D, f: &[f64], i: usize, j: usize) -> f64 {
    let c = f[g.node(i, j)];
    let (hx, hy) = (&g.xi.h, &g.eta.h);
    let (dx2, dy2) = (g.xi.d * g.xi.d, g.eta.d * g.eta.d);
    hx[i] * hx[i + 1] / dx2 * (f[g.node(i + 1, j)] - c)
        + hx[i] * hx[i - 1] / dx2 * (f[g.node(i - 1, j)] - c)
        + hy[j] * hy[j + 1] / dy2 * (f[g.node(i, j + 1)] - c)
        + hy[j] * hy[j - 1] / dy2 * (f[g.node(i, j - 1)] - c)
}

/// Evaluates `f(i, j)` at every interior node; boundary entries copy `base`.
fn interior_map<F>(g: &Grid2D, base: &[f64], f: F) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let mut out = base.to_vec();
    let (nx, ny, stride) = (g.n_xi(), g.n_eta(), g.stride());
    par::for_each_chunk_mut(&mut out, stride, |j, row| {
        if j == 0 || j > ny {
            return;
        }
        for (i, o) in row.iter_mut().enumerate().take(nx + 1).skip(1) {
            *o = f(i, j);
        }
    });
    out
}

/// Intermediate velocity from the explicit advection-diffusion update.
/// Boundary layers are taken from `field` (periodic ghosts are refreshed).
pub fn advect_diffuse(field: &FlowField, cfg: &NSConfig) -> (Vec<f64>, Vec<f64>) {
    let g = &field.grid;
    let (u, v) = (&field.u, &field.v);
    let dt = cfg.dt;
    let us = interior_map(g, u, |i, j| {
        let k = g.node(i, j);
        u[k] + dt * (-u[k] * ddx(g, u, i, j) - v[k] * ddy(g, u, i, j) + cfg.nu * laplacian(g, u, i, j))
    });
    let vs = interior_map(g, v, |i, j| {
        let k = g.node(i, j);
        v[k] + dt * (-u[k] * ddx(g, v, i, j) - v[k] * ddy(g, v, i, j) + cfg.nu * laplacian(g, v, i, j))
    });
    let (mut us, mut vs) = (us, vs);
    if g.periodic() {
        periodic_ghosts(g, &mut us);
        periodic_ghosts(g, &mut vs);
    }
    (us, vs)
}

/// `b_k = (∇·u*)/Δt` at every unknown, ordered `k = (i−1) + (j−1)N_ξ`.
pub fn divergence_rhs(u_star: &[f64], v_star: &[f64], grid: &Grid2D, dt: f64) -> Vec<f64> {
    let mut b = Vec::with_capacity(grid.len());
    for j in 1..=grid.n_eta() {
        for i in 1..=grid.n_xi() {
            b.push((ddx(grid, u_star, i, j) + ddy(grid, v_star, i, j)) / dt);
        }
    }
    b
}

/// Central-difference divergence at the unknowns.
pub fn nodal_divergence(u: &[f64], v: &[f64], grid: &Grid2D) -> Vec<f64> {
    divergence_rhs(u, v, grid, 1.0)
}

/// Divergence of the face-centred corrected velocity
/// `ū_{i±½} − Δt h_{i±1}(p_{i±1} − p_i)/Δξ`, where `ū` averages `u*` onto faces.
/// On a periodic grid this is the divergence the projection drives to zero:
/// it equals `Δt(b − L p)` identically, whatever `p` is.
pub fn face_divergence(u_star: &[f64], v_star: &[f64], p: &[f64], grid: &Grid2D, dt: f64) -> Vec<f64> {
    let (hx, hy) = (&grid.xi.h, &grid.eta.h);
    let (dxi, deta) = (grid.xi.d, grid.eta.d);
    // pressure couplings across walls are absent (homogeneous Neumann)
    let open_x = |nb: usize| grid.periodic() || (1..=grid.n_xi()).contains(&nb);
    let open_y = |nb: usize| grid.periodic() || (1..=grid.n_eta()).contains(&nb);
    let mut out = Vec::with_capacity(grid.len());
    for j in 1..=grid.n_eta() {
        for i in 1..=grid.n_xi() {
            let c = grid.node(i, j);
            let flux = |f: &[f64], nb: usize, h_nb: f64, d: f64, open: bool| {
                let grad = if open { h_nb * (p[nb] - p[c]) / d } else { 0.0 };
                0.5 * (f[c] + f[nb]) - dt * grad
            };
            let east = flux(u_star, grid.node(i + 1, j), hx[i + 1], dxi, open_x(i + 1));
            let west = flux(u_star, grid.node(i - 1, j), hx[i - 1], -dxi, open_x(i - 1));
            let north = flux(v_star, grid.node(i, j + 1), hy[j + 1], deta, open_y(j + 1));
            let south = flux(v_star, grid.node(i, j - 1), hy[j - 1], -deta, open_y(j - 1));
            out.push(hx[i] * (east - west) / dxi + hy[j] * (north - south) / deta);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    Central,
    /// Differentiate the Chebyshev reconstruction of the pressure.
    AnalyticChebyshev,
}

impl FromStr for GradientMethod {
    type Err = QnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(Self::Central),
            "analytic" | "analytic-chebyshev" => Ok(Self::AnalyticChebyshev),
            other => Err(QnsError::Config(format!("unknown gradient method `{other}`"))),
        }
    }
}

/// Chebyshev expansion of the pressure: basis, coefficients, and the factor
/// that turns the unit-norm reconstruction into physical pressure.
#[derive(Debug, Clone, Copy)]
pub struct ChebyPressure<'a> {
    pub basis: &'a ChebyBasis,
    pub coefficients: &'a [f64],
    pub scale: f64,
}

/// Pressure gradient at the unknowns as full node arrays (boundary entries 0).
/// `p` must have its boundary layer filled ([`apply_pressure_bc`]).
pub fn pressure_gradient(
    p: &[f64],
    grid: &Grid2D,
    method: GradientMethod,
    cheb: Option<ChebyPressure<'_>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let zeros = vec![0.0; grid.total_nodes()];
    match method {
        GradientMethod::Central => Ok((
            interior_map(grid, &zeros, |i, j| ddx(grid, p, i, j)),
            interior_map(grid, &zeros, |i, j| ddy(grid, p, i, j)),
        )),
        GradientMethod::AnalyticChebyshev => {
            let c = cheb.ok_or_else(|| QnsError::Contract("analytic gradient needs Chebyshev coefficients".into()))?;
            if c.basis.dims != 2 || c.basis.n_points() != grid.len() {
                return Err(QnsError::Shape { expected: grid.len(), got: c.basis.n_points() });
            }
            let d = c.basis.derivative(c.coefficients)?;
            let (mut gx, mut gy) = (zeros.clone(), zeros);
            for j in 1..=grid.n_eta() {
                for i in 1..=grid.n_xi() {
                    let k = grid.unknown(i, j);
                    gx[grid.node(i, j)] = c.scale * d[0][k];
                    gy[grid.node(i, j)] = c.scale * d[1][k];
                }
            }
            Ok((gx, gy))
        }
    }
}

/// `u = u* − Δt ∇p` at the unknowns; boundary layers copied from `u*`.
pub fn project_velocity(
    u_star: &[f64],
    v_star: &[f64],
    dpdx: &[f64],
    dpdy: &[f64],
    grid: &Grid2D,
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let u = interior_map(grid, u_star, |i, j| u_star[grid.node(i, j)] - dt * dpdx[grid.node(i, j)]);
    let v = interior_map(grid, v_star, |i, j| v_star[grid.node(i, j)] - dt * dpdy[grid.node(i, j)]);
    (u, v)
}

pub fn remove_mean(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Pressure matrix and its factorization, built once per run.
#[derive(Debug, Clone)]
pub struct PressureSystem {
    pub matrix: SparseSymMatrix,
    pub solver: DirectSolver,
}

impl PressureSystem {
    pub fn new(grid: &Grid2D, case: FlowCase) -> Result<Self> {
        let matrix = assemble_laplacian(grid, case.pressure_bc(), LaplacianForm::Conservative)?;
        let solver = DirectSolver::factor(&matrix)?;
        Ok(Self { matrix, solver })
    }

    /// Right-hand side for this step, zero-meaned when the matrix is singular.
    pub fn rhs(&self, u_star: &[f64], v_star: &[f64], grid: &Grid2D, dt: f64) -> Vec<f64> {
        let mut b = divergence_rhs(u_star, v_star, grid, dt);
        if self.solver.has_constant_nullspace() {
            remove_mean(&mut b);
        }
        b
    }
}

/// Per-step scalars from the classical solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub time: f64,
    pub kinetic_energy: f64,
    /// Max |face divergence| after projection.
    pub face_divergence: f64,
    /// Max |central divergence| of the projected nodal velocity.
    pub nodal_divergence: f64,
    /// Max |Δu| over the step, divided by Δt.
    pub rate_of_change: f64,
}

/// Completes a step given the intermediate velocity and the pressure unknowns.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_step(
    field: &FlowField,
    cfg: &NSConfig,
    u_star: &[f64],
    v_star: &[f64],
    p_unknowns: &[f64],
    method: GradientMethod,
    cheb: Option<ChebyPressure<'_>>,
    step: usize,
) -> Result<(FlowField, StepInfo)> {
    let g = &field.grid;
    let mut p = vec![0.0; g.total_nodes()];
    g.scatter(p_unknowns, &mut p);
    apply_pressure_bc(g, &mut p);
    let (dpdx, dpdy) = pressure_gradient(&p, g, method, cheb)?;
    let (u, v) = project_velocity(u_star, v_star, &dpdx, &dpdy, g, cfg.dt);
    let face = face_divergence(u_star, v_star, &p, g, cfg.dt);
    let mut next = FlowField { grid: g.clone(), u, v, p, time: field.time + cfg.dt };
    apply_velocity_bc(&mut next, cfg);
    next.check_finite(step)?;
    let nodal = nodal_divergence(&next.u, &next.v, g);
    let change =
        next.u.iter().zip(&field.u).chain(next.v.iter().zip(&field.v)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let info = StepInfo {
        step,
        time: next.time,
        kinetic_energy: next.kinetic_energy(),
        face_divergence: face.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        nodal_divergence: nodal.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        rate_of_change: change / cfg.dt,
    };
    Ok((next, info))
}

/// One projection cycle with the direct pressure solve; `step` labels errors.
pub fn classical_step(
    field: &FlowField,
    cfg: &NSConfig,
    system: &PressureSystem,
    step: usize,
) -> Result<(FlowField, StepInfo)> {
    let (us, vs) = advect_diffuse(field, cfg);
    let b = system.rhs(&us, &vs, &field.grid, cfg.dt);
    let mut p = system.solver.solve(&b)?;
    remove_mean(&mut p);
    finish_step(field, cfg, &us, &vs, &p, GradientMethod::Central, None, step)
}

/// Runs `cfg.steps` classical steps from `initial`.
pub fn classical_run(initial: &FlowField, cfg: &NSConfig) -> Result<(FlowField, Vec<StepInfo>)> {
    cfg.validate()?;
    let system = PressureSystem::new(&initial.grid, cfg.case)?;
    let mut field = initial.clone();
    let mut history = Vec::with_capacity(cfg.steps);
    for s in 1..=cfg.steps {
        let (next, info) = classical_step(&field, cfg, &system, s)?;
        field = next;
        history.push(info);
    }
    Ok((field, history))
}

/// Steps until `max|Δu|/Δt < tol` or `max_steps` is reached. Returns the
/// field, the number of steps taken, and whether the tolerance was met.
pub fn run_to_steady(
    initial: &FlowField,
    cfg: &NSConfig,
    tol: f64,
    max_steps: usize,
) -> Result<(FlowField, usize, bool)> {
    cfg.validate()?;
    let system = PressureSystem::new(&initial.grid, cfg.case)?;
    let mut field = initial.clone();
    for s in 1..=max_steps {
        let (next, info) = classical_step(&field, cfg, &system, s)?;
        field = next;
        if info.rate_of_change < tol {
            return Ok((field, s, true));
        }
    }
    Ok((field, max_steps, false))
}
