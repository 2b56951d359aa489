use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

use super::space::p2_values;

pub(crate) fn check_same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_as(b) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!("non-finite field value at index {i}"))),
        None => Ok(()),
    }
}

/// Piecewise-linear field given by its vertex values.
#[derive(Debug, Clone)]
pub struct ScalarFieldP1 {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarFieldP1 {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::invalid(format!(
                "P1 field needs {} values, got {}",
                mesh.n_vertices(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ScalarFieldP1 { mesh, values })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self::new(mesh, values)
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Result<Self> {
        let n = mesh.n_vertices();
        Self::new(mesh, vec![c; n])
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same mesh, new values. Lengths are checked by the caller's construction.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        ScalarFieldP1 { mesh: self.mesh.clone(), values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarFieldP1) -> Result<Self> {
        check_same_mesh(&self.mesh, &other.mesh)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect()))
    }

    pub fn l2_norm(&self) -> f64 {
        l2_inner(self, self).expect("same field").max(0.0).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact `∫_D a b` for piecewise-linear `a`, `b` using the P1 mass matrix.
pub fn l2_inner(a: &ScalarFieldP1, b: &ScalarFieldP1) -> Result<f64> {
    check_same_mesh(&a.mesh, &b.mesh)?;
    let mut sum = 0.0;
    for (tri, &area) in a.mesh.triangles().iter().zip(a.mesh.element_areas()) {
        let av = tri.map(|v| a.values[v]);
        let bv = tri.map(|v| b.values[v]);
        let sa: f64 = av.iter().sum();
        let sb: f64 = bv.iter().sum();
        let dot: f64 = av.iter().zip(&bv).map(|(x, y)| x * y).sum();
        // mass matrix |T|/12 [[2,1,1],[1,2,1],[1,1,2]]
        sum += area / 12.0 * (dot + sa * sb);
    }
    Ok(sum)
}

/// Continuous piecewise-quadratic vector field. Values are stored per P2 node
/// (vertices, then edge midpoints) with interleaved components.
#[derive(Debug, Clone)]
pub struct VectorFieldP2 {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl VectorFieldP2 {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        let expect = 2 * (mesh.n_vertices() + mesh.n_edges());
        if values.len() != expect {
            return Err(Error::invalid(format!("P2 vector field needs {expect} values, got {}", values.len())));
        }
        check_finite(&values)?;
        Ok(VectorFieldP2 { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = 2 * (mesh.n_vertices() + mesh.n_edges());
        VectorFieldP2 { mesh, values: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> [f64; 2]) -> Result<Self> {
        let nv = mesh.n_vertices();
        let mut values = Vec::with_capacity(2 * (nv + mesh.n_edges()));
        for node in 0..nv + mesh.n_edges() {
            let p = if node < nv { mesh.vertices()[node] } else { mesh.edge_midpoint(node - nv) };
            values.extend_from_slice(&f(p));
        }
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    /// Value at vertex `v` (vertex nodes come first).
    pub fn at_vertex(&self, v: usize) -> [f64; 2] {
        self.node(v)
    }

    /// Value inside element `t` given local node ids and barycentric point.
    pub(crate) fn eval_local(&self, nodes: &[usize; 6], bary: [f64; 3]) -> [f64; 2] {
        let phi = p2_values(bary);
        let mut out = [0.0; 2];
        for (k, &n) in nodes.iter().enumerate() {
            out[0] += phi[k] * self.values[2 * n];
            out[1] += phi[k] * self.values[2 * n + 1];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::DEGREE_6;
    use crate::mesh::{generate_rect_mesh, BoundaryRules, TrianglePattern};

    fn unit_square(n: usize) -> Arc<Mesh> {
        Arc::new(generate_rect_mesh(1.0, 1.0, n, n, TrianglePattern::Right, BoundaryRules::AllWall).unwrap())
    }

    #[test]
    fn l2_inner_examples() {
        let mesh = unit_square(4);
        let one = ScalarFieldP1::constant(mesh.clone(), 1.0).unwrap();
        let x = ScalarFieldP1::from_fn(mesh.clone(), |p| p[0]).unwrap();
        let y = ScalarFieldP1::from_fn(mesh.clone(), |p| p[1]).unwrap();
        assert!((l2_inner(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!((l2_inner(&one, &x).unwrap() - 0.5).abs() < 1e-14);
        assert!((l2_inner(&x, &y).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn l2_inner_matches_high_order_quadrature() {
        let mesh = Arc::new(generate_rect_mesh(1.3, 0.7, 5, 3, TrianglePattern::Crossed, BoundaryRules::AllWall).unwrap());
        let a = ScalarFieldP1::from_fn(mesh.clone(), |p| (3.0 * p[0]).sin() + p[1]).unwrap();
        let b = ScalarFieldP1::from_fn(mesh.clone(), |p| p[0] * p[1] - 0.2).unwrap();
        let mut oracle = 0.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.element_areas()[t];
            for q in &DEGREE_6 {
                let va: f64 = (0..3).map(|k| q.bary[k] * a.values()[tri[k]]).sum();
                let vb: f64 = (0..3).map(|k| q.bary[k] * b.values()[tri[k]]).sum();
                oracle += q.weight * area * va * vb;
            }
        }
        assert!((l2_inner(&a, &b).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn mismatched_meshes_rejected() {
        let a = ScalarFieldP1::constant(unit_square(3), 1.0).unwrap();
        let b = ScalarFieldP1::constant(unit_square(4), 1.0).unwrap();
        assert!(matches!(l2_inner(&a, &b), Err(Error::MeshMismatch)));
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let mesh = unit_square(2);
        assert!(ScalarFieldP1::new(mesh.clone(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; mesh.n_vertices()];
        v[0] = f64::NAN;
        assert!(ScalarFieldP1::new(mesh, v).is_err());
    }
}
