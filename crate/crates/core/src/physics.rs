//! The two benchmark problems: dissipation minimization in the five-holes
//! double pipe and the smoothed-velocity goal for a bipolar plate. Each
//! provides state and adjoint solves, the objective and its generalized
//! topological derivative.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::p2_mass_apply_component;
use crate::fem::quadrature::DEGREE_6;
use crate::fem::{
    assemble_p2_scalar, BoundaryConditions, Factorization, FemSpace, ScalarFieldP1, StokesOperator, VectorFieldP2,
};
use crate::levelset::VolumeConstraint;
use crate::mesh::{BoundaryTag, Mesh, Region, BIPOLAR_PORT, DOUBLE_PIPE_PORTS};

pub const ALPHA_L: f64 = 2.5 / (100.0 * 100.0);
pub const ALPHA_U: f64 = 2.5 / (0.0025 * 0.0025);

/// Generalized topological derivative, sampled at mesh vertices.
pub type TopDerivField = ScalarFieldP1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    DoublePipe,
    BipolarPlate,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub mesh: Arc<Mesh>,
    pub alpha_l: f64,
    pub alpha_u: f64,
    pub volume: VolumeConstraint,
    /// Threshold speed (bipolar only).
    pub u_t: f64,
    /// Smoothing step (bipolar only).
    pub dt: f64,
}

pub const DEFAULT_DT: f64 = 1e-3;

impl ProblemSpec {
    pub fn double_pipe(mesh: Arc<Mesh>) -> Self {
        ProblemSpec {
            kind: ProblemKind::DoublePipe,
            mesh,
            alpha_l: ALPHA_L,
            alpha_u: ALPHA_U,
            volume: VolumeConstraint::Equality(0.5),
            u_t: 0.0,
            dt: 0.0,
        }
    }

    pub fn bipolar(mesh: Arc<Mesh>) -> Self {
        ProblemSpec {
            kind: ProblemKind::BipolarPlate,
            mesh,
            alpha_l: ALPHA_L,
            alpha_u: ALPHA_U,
            volume: VolumeConstraint::Bounds { lower: 0.5, upper: 0.7 },
            u_t: 0.1,
            dt: DEFAULT_DT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_l > 0.0 && self.alpha_u > self.alpha_l && self.alpha_u.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < alpha_L < alpha_U, got {} and {}",
                self.alpha_l, self.alpha_u
            )));
        }
        self.volume.validate(self.mesh.total_area())?;
        if self.kind == ProblemKind::BipolarPlate && !(self.u_t > 0.0 && self.dt > 0.0) {
            return Err(Error::invalid(format!("need U_t > 0 and dt > 0, got {} and {}", self.u_t, self.dt)));
        }
        Ok(())
    }

    pub fn boundary_conditions(&self) -> BoundaryConditions {
        match self.kind {
            ProblemKind::DoublePipe => BoundaryConditions::new()
                .dirichlet(BoundaryTag::Inflow, |p| [double_pipe_profile(p[1]), 0.0])
                .dirichlet(BoundaryTag::Outflow, |p| [double_pipe_profile(p[1]), 0.0])
                .no_slip(BoundaryTag::Wall)
                .no_slip(BoundaryTag::Hole),
            ProblemKind::BipolarPlate => BoundaryConditions::new()
                .dirichlet(BoundaryTag::Inflow, |p| [bipolar_inflow(p[1]), 0.0])
                .no_slip(BoundaryTag::Wall)
                .no_slip(BoundaryTag::Hole)
                .natural(BoundaryTag::Outflow),
        }
    }

    fn mean_zero_pressure(&self) -> bool {
        self.kind == ProblemKind::DoublePipe
    }
}

/// Parabolic profile with unit peak on each double-pipe port, zero elsewhere.
pub fn double_pipe_profile(y: f64) -> f64 {
    DOUBLE_PIPE_PORTS
        .iter()
        .find(|(a, b)| y >= *a && y <= *b)
        .map_or(0.0, |(a, b)| -144.0 * (y - a) * (y - b))
}

pub fn bipolar_inflow(y: f64) -> f64 {
    let (a, b) = BIPOLAR_PORT;
    if y >= a && y <= b {
        -(400.0 / 9.0) * (y - a) * (y - b)
    } else {
        0.0
    }
}

#[derive(Clone)]
pub struct FlowState {
    pub u: VectorFieldP2,
    pub p: ScalarFieldP1,
    pub multiplier: Option<f64>,
    alpha: Vec<f64>,
    factorization: Arc<Factorization>,
}

impl std::fmt::Debug for FlowState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowState").field("u", &self.u).field("p", &self.p).field("multiplier", &self.multiplier).finish()
    }
}

impl FlowState {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

#[derive(Debug, Clone)]
pub struct AdjointState {
    pub v: VectorFieldP2,
    pub q: ScalarFieldP1,
}

#[derive(Debug, Clone)]
pub struct SmoothedState {
    pub u_s: VectorFieldP2,
    pub v_s: Option<VectorFieldP2>,
}

/// A problem bound to its discretization: element data, Stokes pattern and
/// (for the bipolar plate) the factored smoothing operator.
pub struct Problem {
    spec: ProblemSpec,
    space: Arc<FemSpace>,
    stokes: StokesOperator,
    smoother: Option<Factorization>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let space = Arc::new(FemSpace::new(spec.mesh.clone()));
        let stokes = StokesOperator::new(space.clone(), &spec.boundary_conditions(), spec.mean_zero_pressure())?;
        let smoother = match spec.kind {
            ProblemKind::BipolarPlate => Some(assemble_p2_scalar(&space, 1.0 / spec.dt, 1.0).factor()?),
            ProblemKind::DoublePipe => None,
        };
        Ok(Problem { spec, space, stokes, smoother })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.spec.mesh
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn stokes(&self) -> &StokesOperator {
        &self.stokes
    }

    /// Element inverse permeability from fluid fractions; obstacle elements
    /// are always solid.
    pub fn alpha_from_fractions(&self, fractions: &[f64]) -> Vec<f64> {
        let (lo, hi) = (self.spec.alpha_l, self.spec.alpha_u);
        fractions
            .iter()
            .zip(self.spec.mesh.regions())
            .map(|(&f, r)| match r {
                Region::Obstacle => hi,
                Region::Design if f >= 1.0 => lo,
                Region::Design if f <= 0.0 => hi,
                Region::Design => lo * f + hi * (1.0 - f),
            })
            .collect()
    }

    pub fn solve_flow(&self, alpha: &[f64]) -> Result<FlowState> {
        let (system, lu) = self.stokes.factor(alpha)?;
        let x = lu.solve(&system.rhs)?;
        let layout = self.stokes.layout();
        let nu = layout.n_velocity;
        let u = VectorFieldP2::new(self.mesh().clone(), x[..nu].to_vec())?;
        let p = ScalarFieldP1::new(self.mesh().clone(), x[nu..nu + layout.n_pressure].to_vec())?;
        let multiplier = layout.multiplier.map(|m| x[m]);
        Ok(FlowState { u, p, multiplier, alpha: alpha.to_vec(), factorization: Arc::new(lu) })
    }

    fn smoother(&self) -> Result<&Factorization> {
        self.smoother.as_ref().ok_or_else(|| Error::invalid("smoothing is only defined for the bipolar plate"))
    }

    /// Solves `S w_c = rhs_c` for both components and interleaves the result.
    fn smooth_solve(&self, rhs: [Vec<f64>; 2]) -> Result<VectorFieldP2> {
        let s = self.smoother()?;
        let wx = s.solve(&rhs[0])?;
        let wy = s.solve(&rhs[1])?;
        let values = wx.iter().zip(&wy).flat_map(|(a, b)| [*a, *b]).collect();
        VectorFieldP2::new(self.mesh().clone(), values)
    }

    /// One implicit Euler step of the heat equation with Neumann conditions.
    pub fn smooth_field(&self, u: &VectorFieldP2) -> Result<VectorFieldP2> {
        crate::fem::fields::check_same_mesh(u.mesh(), self.mesh())?;
        let scale = 1.0 / self.spec.dt;
        let rhs =
            [0, 1].map(|c| p2_mass_apply_component(&self.space, u.values(), c).into_iter().map(|v| v * scale).collect());
        self.smooth_solve(rhs)
    }

    pub fn smooth_velocity(&self, flow: &FlowState) -> Result<SmoothedState> {
        Ok(SmoothedState { u_s: self.smooth_field(&flow.u)?, v_s: None })
    }

    /// Fills `v_s` solving `v_s / dt - Δv_s = -4 u_s min(0, |u_s|² - U_t²)`.
    pub fn smoothing_adjoint(&self, smoothed: &SmoothedState) -> Result<SmoothedState> {
        let ut2 = self.spec.u_t * self.spec.u_t;
        let mut rhs = [vec![0.0; self.space.n_p2_nodes()], vec![0.0; self.space.n_p2_nodes()]];
        for t in 0..self.space.n_elements() {
            let geo = self.space.geometry(t);
            let nodes = self.space.p2_nodes(t);
            for q in &DEGREE_6 {
                let us = smoothed.u_s.eval_local(nodes, q.bary);
                let m = (us[0] * us[0] + us[1] * us[1] - ut2).min(0.0);
                if m == 0.0 {
                    continue;
                }
                let phi = crate::fem::space::p2_values(q.bary);
                let w = q.weight * geo.area * -4.0 * m;
                for i in 0..6 {
                    rhs[0][nodes[i]] += w * us[0] * phi[i];
                    rhs[1][nodes[i]] += w * us[1] * phi[i];
                }
            }
        }
        let v_s = self.smooth_solve(rhs)?;
        Ok(SmoothedState { u_s: smoothed.u_s.clone(), v_s: Some(v_s) })
    }

    pub fn solve_adjoint(&self, flow: &FlowState, smoothed: Option<&SmoothedState>) -> Result<AdjointState> {
        let layout = self.stokes.layout();
        let mut rhs = vec![0.0; layout.n_dofs()];
        match self.spec.kind {
            ProblemKind::DoublePipe => {
                let r = dissipation_adjoint_rhs(&self.space, &flow.alpha, flow.u.values());
                rhs[..r.len()].copy_from_slice(&r);
            }
            ProblemKind::BipolarPlate => {
                let v_s = smoothed
                    .and_then(|s| s.v_s.as_ref())
                    .ok_or_else(|| Error::invalid("bipolar adjoint needs the smoothing adjoint v_s"))?;
                let scale = 1.0 / self.spec.dt;
                for c in 0..2 {
                    let mv = p2_mass_apply_component(&self.space, v_s.values(), c);
                    for (node, val) in mv.into_iter().enumerate() {
                        rhs[2 * node + c] = scale * val;
                    }
                }
            }
        }
        let rhs = self.stokes.homogeneous_rhs(rhs);
        let x = flow.factorization.solve(&rhs)?;
        let nu = layout.n_velocity;
        Ok(AdjointState {
            v: VectorFieldP2::new(self.mesh().clone(), x[..nu].to_vec())?,
            q: ScalarFieldP1::new(self.mesh().clone(), x[nu..nu + layout.n_pressure].to_vec())?,
        })
    }

    pub fn objective(&self, flow: &FlowState, smoothed: Option<&SmoothedState>) -> Result<f64> {
        match self.spec.kind {
            ProblemKind::DoublePipe => Ok(dissipation(&self.space, &flow.alpha, flow.u.values())),
            ProblemKind::BipolarPlate => {
                let s = smoothed.ok_or_else(|| Error::invalid("bipolar objective needs the smoothed velocity"))?;
                Ok(self.smoothed_goal(&s.u_s))
            }
        }
    }

    /// `∫ min(0, |u_s|² - U_t²)²`, degree-6 quadrature.
    pub fn smoothed_goal(&self, u_s: &VectorFieldP2) -> f64 {
        let ut2 = self.spec.u_t * self.spec.u_t;
        self.integrate_speed(u_s, |s2| {
            let m = (s2 - ut2).min(0.0);
            m * m
        })
    }

    /// Percentage of the domain where `|u_s| < U_t`.
    pub fn constraint_gap(&self, smoothed: &SmoothedState) -> f64 {
        let ut2 = self.spec.u_t * self.spec.u_t;
        let area = self.integrate_speed(&smoothed.u_s, |s2| if s2 < ut2 { 1.0 } else { 0.0 });
        100.0 * area / self.mesh().total_area()
    }

    fn integrate_speed(&self, u: &VectorFieldP2, f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for t in 0..self.space.n_elements() {
            let geo = self.space.geometry(t);
            let nodes = self.space.p2_nodes(t);
            let mut elem = 0.0;
            for q in &DEGREE_6 {
                let v = u.eval_local(nodes, q.bary);
                elem += q.weight * f(v[0] * v[0] + v[1] * v[1]);
            }
            total += elem * geo.area;
        }
        total
    }

    /// Derivative of the objective with respect to each element's α.
    pub fn alpha_sensitivity(&self, flow: &FlowState, adj: &AdjointState) -> Vec<f64> {
        let u = flow.u.values();
        let v = adj.v.values();
        (0..self.space.n_elements())
            .map(|t| {
                let w: Vec<f64> = match self.spec.kind {
                    ProblemKind::DoublePipe => u.iter().zip(v).map(|(a, b)| a + b).collect(),
                    ProblemKind::BipolarPlate => v.to_vec(),
                };
                element_mass_product(&self.space, t, u, &w)
            })
            .collect()
    }

    /// Generalized topological derivative `-(α_U - α_L) u·w` at the
    /// vertices, with `w = u + v` for the dissipation and `w = v` for the
    /// smoothed goal.
    pub fn top_derivative(&self, flow: &FlowState, adj: &AdjointState) -> Result<TopDerivField> {
        let jump = self.spec.alpha_u - self.spec.alpha_l;
        let values = (0..self.mesh().n_vertices())
            .map(|vtx| {
                let u = flow.u.at_vertex(vtx);
                let v = adj.v.at_vertex(vtx);
                let w = match self.spec.kind {
                    ProblemKind::DoublePipe => [u[0] + v[0], u[1] + v[1]],
                    ProblemKind::BipolarPlate => v,
                };
                -jump * (u[0] * w[0] + u[1] * w[1])
            })
            .collect();
        ScalarFieldP1::new(self.mesh().clone(), values)
    }

    /// Objective only (no adjoint), as needed by the line search.
    pub fn evaluate_objective(&self, alpha: &[f64]) -> Result<f64> {
        let flow = self.solve_flow(alpha)?;
        match self.spec.kind {
            ProblemKind::DoublePipe => self.objective(&flow, None),
            ProblemKind::BipolarPlate => {
                let s = self.smooth_velocity(&flow)?;
                self.objective(&flow, Some(&s))
            }
        }
    }

    /// Full evaluation: states, objective and topological derivative.
    pub fn evaluate(&self, alpha: &[f64]) -> Result<Evaluation> {
        let flow = self.solve_flow(alpha)?;
        let smoothed = match self.spec.kind {
            ProblemKind::DoublePipe => None,
            ProblemKind::BipolarPlate => Some(self.smoothing_adjoint(&self.smooth_velocity(&flow)?)?),
        };
        let objective = self.objective(&flow, smoothed.as_ref())?;
        let adjoint = self.solve_adjoint(&flow, smoothed.as_ref())?;
        let derivative = self.top_derivative(&flow, &adjoint)?;
        Ok(Evaluation { flow, smoothed, adjoint, objective, derivative })
    }

    /// Net flux `∫ u·n` over all boundary edges with the given tag.
    pub fn boundary_flux(&self, u: &VectorFieldP2, tag: BoundaryTag) -> f64 {
        let mesh = self.mesh();
        let nv = mesh.n_vertices();
        mesh.boundary_edges()
            .iter()
            .filter(|b| b.tag == tag)
            .map(|b| {
                let [a, c] = b.vertices;
                let (pa, pc) = (mesh.vertices()[a], mesh.vertices()[c]);
                // outward normal times edge length
                let n = [pc[1] - pa[1], pa[0] - pc[0]];
                let ua = u.node(a);
                let um = u.node(nv + b.edge);
                let uc = u.node(c);
                // Simpson is exact for the quadratic trace
                let avg = [0, 1].map(|k| (ua[k] + 4.0 * um[k] + uc[k]) / 6.0);
                avg[0] * n[0] + avg[1] * n[1]
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub flow: FlowState,
    pub smoothed: Option<SmoothedState>,
    pub adjoint: AdjointState,
    pub objective: f64,
    pub derivative: TopDerivField,
}

fn element_mass_product(space: &FemSpace, t: usize, a: &[f64], b: &[f64]) -> f64 {
    let em = space.matrices(t);
    let nodes = space.p2_nodes(t);
    let mut s = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let m = em.mass[i][j];
            s += m * (a[2 * nodes[i]] * b[2 * nodes[j]] + a[2 * nodes[i] + 1] * b[2 * nodes[j] + 1]);
        }
    }
    s
}

/// `∫ α u·u + ∇u:∇u`, exact for element-constant α.
pub fn dissipation(space: &FemSpace, alpha: &[f64], u: &[f64]) -> f64 {
    let mut total = 0.0;
    for (t, &a) in alpha.iter().enumerate() {
        let em = space.matrices(t);
        let nodes = space.p2_nodes(t);
        for i in 0..6 {
            for j in 0..6 {
                let k = em.stiffness[i][j] + a * em.mass[i][j];
                total += k * (u[2 * nodes[i]] * u[2 * nodes[j]] + u[2 * nodes[i] + 1] * u[2 * nodes[j] + 1]);
            }
        }
    }
    total
}

/// Weak form of `2(Δu - αu)`: the functional `w ↦ -2∫∇u:∇w - 2∫α u·w`
/// over all velocity dofs.
pub fn dissipation_adjoint_rhs(space: &FemSpace, alpha: &[f64], u: &[f64]) -> Vec<f64> {
    let mut rhs = vec![0.0; space.n_velocity_dofs()];
    for (t, &a) in alpha.iter().enumerate() {
        let em = space.matrices(t);
        let nodes = space.p2_nodes(t);
        for i in 0..6 {
            for c in 0..2 {
                let mut s = 0.0;
                for j in 0..6 {
                    s += (em.stiffness[i][j] + a * em.mass[i][j]) * u[2 * nodes[j] + c];
                }
                rhs[2 * nodes[i] + c] -= 2.0 * s;
            }
        }
    }
    rhs
}
