//! Assembly of the Stokes-Darcy saddle-point system
//!
//! ```text
//! ∫ ∇u:∇w + α u·w - p div w = ∫ f·w,     -∫ q div u = 0
//! ```
//!
//! with Taylor-Hood elements, symmetric Dirichlet elimination and an
//! optional Lagrange multiplier fixing the pressure mean.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh, Point};

use super::quadrature::DEGREE_4;
use super::space::{p2_values, FemSpace};
use super::sparse::{Factorization, SparseMatrix, SparsityPattern};

pub type VelocityProfile = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Velocity boundary conditions by tag. Tags listed as natural get the
/// do-nothing condition `∂_n u - p n = 0`.
#[derive(Clone, Default)]
pub struct BoundaryConditions {
    dirichlet: Vec<(BoundaryTag, VelocityProfile)>,
    natural: BTreeSet<BoundaryTag>,
}

impl fmt::Debug for BoundaryConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<_> = self.dirichlet.iter().map(|(t, _)| *t).collect();
        f.debug_struct("BoundaryConditions").field("dirichlet", &tags).field("natural", &self.natural).finish()
    }
}

impl BoundaryConditions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dirichlet(mut self, tag: BoundaryTag, profile: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.natural.remove(&tag);
        self.dirichlet.retain(|(t, _)| *t != tag);
        self.dirichlet.push((tag, Arc::new(profile)));
        self
    }

    pub fn no_slip(self, tag: BoundaryTag) -> Self {
        self.dirichlet(tag, |_| [0.0, 0.0])
    }

    pub fn natural(mut self, tag: BoundaryTag) -> Self {
        self.dirichlet.retain(|(t, _)| *t != tag);
        self.natural.insert(tag);
        self
    }

    fn profile(&self, tag: BoundaryTag) -> Option<&VelocityProfile> {
        self.dirichlet.iter().find(|(t, _)| *t == tag).map(|(_, p)| p)
    }

    fn is_natural(&self, tag: BoundaryTag) -> bool {
        self.natural.contains(&tag)
    }
}

/// Dof bookkeeping of an assembled Stokes system.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub n_velocity: usize,
    pub n_pressure: usize,
    /// Index of the pressure-mean multiplier, if present.
    pub multiplier: Option<usize>,
    /// Dirichlet flag per dof of the full system.
    pub dirichlet: Arc<Vec<bool>>,
}

impl DofLayout {
    pub fn n_dofs(&self) -> usize {
        self.n_velocity + self.n_pressure + usize::from(self.multiplier.is_some())
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub layout: Option<DofLayout>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != matrix.n() {
            return Err(Error::invalid(format!("rhs length {} for {} dofs", rhs.len(), matrix.n())));
        }
        Ok(LinearSystem { matrix, rhs, layout: None })
    }
}

/// Direct sparse solve of an assembled system.
pub fn solve(system: &LinearSystem) -> Result<Vec<f64>> {
    system.matrix.factor()?.solve(&system.rhs)
}

/// Assembles the Stokes-Darcy system for element-constant `alpha` and no
/// body force.
pub fn assemble_stokes_darcy(
    mesh: Arc<Mesh>,
    alpha: &[f64],
    bc: &BoundaryConditions,
    mean_zero_pressure: bool,
) -> Result<LinearSystem> {
    let space = Arc::new(FemSpace::new(mesh));
    StokesOperator::new(space, bc, mean_zero_pressure)?.assemble(alpha, None)
}

/// Material-independent part of the Stokes-Darcy system for one mesh and
/// boundary condition set; the pattern and symbolic factorization are shared
/// across assemblies.
#[derive(Debug)]
pub struct StokesOperator {
    space: Arc<FemSpace>,
    pattern: Arc<SparsityPattern>,
    layout: DofLayout,
    /// Prescribed values at Dirichlet dofs, zero elsewhere.
    dirichlet_values: Vec<f64>,
    /// `∫ ψ_k` for every P1 pressure basis function.
    pressure_mass: Vec<f64>,
}

impl StokesOperator {
    pub fn new(space: Arc<FemSpace>, bc: &BoundaryConditions, mean_zero_pressure: bool) -> Result<Self> {
        let mesh = space.mesh().clone();
        let nu = space.n_velocity_dofs();
        let np = space.n_pressure_dofs();
        let multiplier = mean_zero_pressure.then_some(nu + np);
        let n = nu + np + usize::from(mean_zero_pressure);

        let mut dirichlet = vec![false; n];
        let mut dirichlet_values = vec![0.0; n];
        let nv = mesh.n_vertices();
        for be in mesh.boundary_edges() {
            let Some(profile) = bc.profile(be.tag) else {
                if bc.is_natural(be.tag) {
                    continue;
                }
                return Err(Error::Assembly(format!("boundary tag {:?} has no boundary condition", be.tag)));
            };
            for node in [be.vertices[0], be.vertices[1], nv + be.edge] {
                let val = profile(space.p2_node_point(node));
                for c in 0..2 {
                    dirichlet[2 * node + c] = true;
                    dirichlet_values[2 * node + c] = val[c];
                }
            }
        }
        if dirichlet_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Assembly("non-finite Dirichlet data".into()));
        }

        let mut entries = Vec::with_capacity(space.n_elements() * 144 + 2 * np);
        for t in 0..space.n_elements() {
            let nodes = space.p2_nodes(t);
            for &a in nodes {
                for &b in nodes {
                    entries.push((2 * a, 2 * b));
                    entries.push((2 * a + 1, 2 * b + 1));
                }
            }
            for p in space.pressure_dofs(t) {
                for v in space.velocity_dofs(t) {
                    entries.push((p, v));
                    entries.push((v, p));
                }
            }
        }
        let mut pressure_mass = vec![0.0; np];
        for (tri, &area) in mesh.triangles().iter().zip(mesh.element_areas()) {
            for &v in tri {
                pressure_mass[v] += area / 3.0;
            }
        }
        if let Some(m) = multiplier {
            for k in 0..np {
                entries.push((m, nu + k));
                entries.push((nu + k, m));
            }
        }
        let pattern = Arc::new(SparsityPattern::from_entries(n, entries));
        let layout = DofLayout { n_velocity: nu, n_pressure: np, multiplier, dirichlet: Arc::new(dirichlet) };
        Ok(StokesOperator { space, pattern, layout, dirichlet_values, pressure_mass })
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet_values
    }

    pub fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.space.n_elements() {
            return Err(Error::invalid(format!(
                "alpha has {} values for {} elements",
                alpha.len(),
                self.space.n_elements()
            )));
        }
        match alpha.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            Some(e) => Err(Error::invalid(format!("alpha[{e}] = {} must be finite and nonnegative", alpha[e]))),
            None => Ok(()),
        }
    }

    /// Full (uneliminated) matrix for the given material field.
    pub fn raw_matrix(&self, alpha: &[f64]) -> Result<SparseMatrix> {
        self.check_alpha(alpha)?;
        let mut m = SparseMatrix::zeros(self.pattern.clone());
        for (t, &a) in alpha.iter().enumerate() {
            let em = self.space.matrices(t);
            let nodes = self.space.p2_nodes(t);
            for i in 0..6 {
                for j in 0..6 {
                    let v = em.stiffness[i][j] + a * em.mass[i][j];
                    m.add(2 * nodes[i], 2 * nodes[j], v);
                    m.add(2 * nodes[i] + 1, 2 * nodes[j] + 1, v);
                }
            }
            let vd = self.space.velocity_dofs(t);
            for (k, p) in self.space.pressure_dofs(t).into_iter().enumerate() {
                for (l, &v) in vd.iter().enumerate() {
                    m.add(p, v, em.divergence[k][l]);
                    m.add(v, p, em.divergence[k][l]);
                }
            }
        }
        if let Some(mult) = self.layout.multiplier {
            let nu = self.layout.n_velocity;
            for (k, &c) in self.pressure_mass.iter().enumerate() {
                m.add(mult, nu + k, c);
                m.add(nu + k, mult, c);
            }
        }
        Ok(m)
    }

    /// Assembles with optional velocity load vector (length `n_velocity`).
    /// Dirichlet data are eliminated symmetrically.
    pub fn assemble(&self, alpha: &[f64], velocity_load: Option<&[f64]>) -> Result<LinearSystem> {
        let mut matrix = self.raw_matrix(alpha)?;
        let n = matrix.n();
        let mut rhs = vec![0.0; n];
        if let Some(load) = velocity_load {
            if load.len() != self.layout.n_velocity {
                return Err(Error::invalid("velocity load has wrong length"));
            }
            rhs[..load.len()].copy_from_slice(load);
        }
        let dir = &self.layout.dirichlet;
        let pattern = self.pattern.clone();
        let values = matrix.values_mut();
        for c in 0..n {
            for pos in pattern.column(c) {
                let r = pattern.row_of(pos);
                if dir[c] && !dir[r] {
                    rhs[r] -= values[pos] * self.dirichlet_values[c];
                }
                if dir[c] || dir[r] {
                    values[pos] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
        for c in 0..n {
            if dir[c] {
                rhs[c] = self.dirichlet_values[c];
            }
        }
        Ok(LinearSystem { matrix, rhs, layout: Some(self.layout.clone()) })
    }

    /// Zeroes the Dirichlet entries of a right-hand side, for systems with
    /// homogeneous data on the same dofs (adjoints).
    pub fn homogeneous_rhs(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        for (r, &d) in rhs.iter_mut().zip(self.layout.dirichlet.iter()) {
            if d {
                *r = 0.0;
            }
        }
        rhs
    }

    /// Assembles and factors in one step.
    pub fn factor(&self, alpha: &[f64]) -> Result<(LinearSystem, Factorization)> {
        let system = self.assemble(alpha, None)?;
        let lu = system.matrix.factor()?;
        Ok((system, lu))
    }
}

/// `∫ f·w` for all P2 velocity test functions, degree-4 quadrature.
pub fn velocity_load(space: &FemSpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut load = vec![0.0; space.n_velocity_dofs()];
    for t in 0..space.n_elements() {
        let geo = space.geometry(t);
        let nodes = space.p2_nodes(t);
        for q in &DEGREE_4 {
            let fv = f(geo.point_at(q.bary));
            let phi = p2_values(q.bary);
            let w = q.weight * geo.area;
            for i in 0..6 {
                load[2 * nodes[i]] += w * phi[i] * fv[0];
                load[2 * nodes[i] + 1] += w * phi[i] * fv[1];
            }
        }
    }
    load
}

/// Scalar P2 matrix `m_coef * M + k_coef * K` with natural boundary
/// conditions.
pub fn assemble_p2_scalar(space: &FemSpace, m_coef: f64, k_coef: f64) -> SparseMatrix {
    let n = space.n_p2_nodes();
    let mut entries = Vec::with_capacity(space.n_elements() * 36);
    for t in 0..space.n_elements() {
        let nodes = space.p2_nodes(t);
        for &a in nodes {
            for &b in nodes {
                entries.push((a, b));
            }
        }
    }
    let mut m = SparseMatrix::zeros(Arc::new(SparsityPattern::from_entries(n, entries)));
    for t in 0..space.n_elements() {
        let em = space.matrices(t);
        let nodes = space.p2_nodes(t);
        for i in 0..6 {
            for j in 0..6 {
                m.add(nodes[i], nodes[j], m_coef * em.mass[i][j] + k_coef * em.stiffness[i][j]);
            }
        }
    }
    m
}

/// Applies the P2 mass matrix to one component of an interleaved vector
/// field: returns `(∫ u_c φ_i)_i`.
pub fn p2_mass_apply_component(space: &FemSpace, values: &[f64], c: usize) -> Vec<f64> {
    let mut out = vec![0.0; space.n_p2_nodes()];
    for t in 0..space.n_elements() {
        let em = space.matrices(t);
        let nodes = space.p2_nodes(t);
        for i in 0..6 {
            let mut s = 0.0;
            for j in 0..6 {
                s += em.mass[i][j] * values[2 * nodes[j] + c];
            }
            out[nodes[i]] += s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, BoundaryRules, TrianglePattern};

    fn square(n: usize) -> Arc<FemSpace> {
        let mesh = generate_rect_mesh(1.0, 1.0, n, n, TrianglePattern::Right, BoundaryRules::AllWall).unwrap();
        Arc::new(FemSpace::new(Arc::new(mesh)))
    }

    #[test]
    fn symmetric_after_elimination() {
        let space = square(4);
        let bc = BoundaryConditions::new().dirichlet(BoundaryTag::Wall, |p| [p[1] * (1.0 - p[1]), 0.0]);
        let op = StokesOperator::new(space.clone(), &bc, true).unwrap();
        let alpha: Vec<f64> = (0..space.n_elements()).map(|e| 1.0 + e as f64).collect();
        let sys = op.assemble(&alpha, None).unwrap();
        assert!(sys.matrix.asymmetry() < 1e-14);
    }

    #[test]
    fn linear_in_alpha() {
        let space = square(3);
        let op = StokesOperator::new(space.clone(), &BoundaryConditions::new().no_slip(BoundaryTag::Wall), true).unwrap();
        let ne = space.n_elements();
        let a1: Vec<f64> = (0..ne).map(|e| 0.5 + 0.1 * e as f64).collect();
        let a2: Vec<f64> = (0..ne).map(|e| 3.0 + 0.05 * e as f64).collect();
        let diff: Vec<f64> = a2.iter().zip(&a1).map(|(b, a)| b - a).collect();
        let zero = vec![0.0; ne];
        let m0 = op.raw_matrix(&zero).unwrap();
        let m1 = op.raw_matrix(&a1).unwrap();
        let m2 = op.raw_matrix(&a2).unwrap();
        let md = op.raw_matrix(&diff).unwrap();
        for k in 0..m0.values().len() {
            let lhs = m1.values()[k] + (md.values()[k] - m0.values()[k]);
            assert!((lhs - m2.values()[k]).abs() < 1e-12 * (1.0 + m2.values()[k].abs()));
        }
    }

    #[test]
    fn missing_boundary_condition_is_error() {
        let space = square(2);
        let err = StokesOperator::new(space, &BoundaryConditions::new(), true);
        assert!(matches!(err, Err(Error::Assembly(_))));
    }

    #[test]
    fn negative_alpha_rejected() {
        let space = square(2);
        let op = StokesOperator::new(space.clone(), &BoundaryConditions::new().no_slip(BoundaryTag::Wall), true).unwrap();
        let mut alpha = vec![1.0; space.n_elements()];
        alpha[0] = -1.0;
        assert!(matches!(op.assemble(&alpha, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn p2_scalar_mass_reproduces_area() {
        let space = square(3);
        let m = assemble_p2_scalar(&space, 1.0, 0.0);
        let ones = vec![1.0; space.n_p2_nodes()];
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}
