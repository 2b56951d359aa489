//! Taylor-Hood P2/P1 element data: local basis, per-element matrices and the
//! global degree-of-freedom layout.
//!
//! Local P2 nodes 0..3 are the triangle vertices, node 3 + k is the midpoint
//! of the edge opposite vertex k. Global P2 node ids list all vertices first,
//! then all edges. Velocity dofs interleave components (`2 * node + c`),
//! pressure dofs follow, one per vertex.

use std::sync::Arc;

use crate::mesh::{Mesh, Point};

use super::quadrature::{DEGREE_2, DEGREE_4};

/// Geometry of one triangle: area and constant barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
    pub points: [Point; 3],
}

impl ElementGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / two_area;
        let grad_lambda = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        ElementGeometry { area: 0.5 * two_area, grad_lambda, points }
    }

    pub fn point_at(&self, bary: [f64; 3]) -> Point {
        let mut p = [0.0; 2];
        for (b, q) in bary.iter().zip(&self.points) {
            p[0] += b * q[0];
            p[1] += b * q[1];
        }
        p
    }

    /// Gradients of the six P2 basis functions at a barycentric point.
    pub fn p2_gradients(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let s = 4.0 * l[i] - 1.0;
            out[i] = [s * g[i][0], s * g[i][1]];
        }
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            out[3 + k] = [
                4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
            ];
        }
        out
    }
}

/// P2 basis values at a barycentric point.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

/// Barycentric coordinates of the six local P2 nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];

/// Precomputed per-element matrices, independent of the material field.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    /// Scalar P2 stiffness, `∫ ∇φ_i · ∇φ_j`.
    pub stiffness: [[f64; 6]; 6],
    /// Scalar P2 mass, `∫ φ_i φ_j`.
    pub mass: [[f64; 6]; 6],
    /// `b[k][2 i + c] = -∫ ψ_k ∂_c φ_i` for P1 pressure basis ψ_k.
    pub divergence: [[f64; 12]; 3],
}

impl ElementMatrices {
    pub fn new(geo: &ElementGeometry) -> Self {
        let mut stiffness = [[0.0; 6]; 6];
        let mut divergence = [[0.0; 12]; 3];
        for q in &DEGREE_2 {
            let grads = geo.p2_gradients(q.bary);
            let w = q.weight * geo.area;
            for i in 0..6 {
                for j in 0..6 {
                    stiffness[i][j] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
                for k in 0..3 {
                    for c in 0..2 {
                        divergence[k][2 * i + c] -= w * q.bary[k] * grads[i][c];
                    }
                }
            }
        }
        let mut mass = [[0.0; 6]; 6];
        for q in &DEGREE_4 {
            let phi = p2_values(q.bary);
            let w = q.weight * geo.area;
            for i in 0..6 {
                for j in 0..6 {
                    mass[i][j] += w * phi[i] * phi[j];
                }
            }
        }
        ElementMatrices { stiffness, mass, divergence }
    }
}

/// Shared element data for one mesh.
#[derive(Debug)]
pub struct FemSpace {
    mesh: Arc<Mesh>,
    geometry: Vec<ElementGeometry>,
    matrices: Vec<ElementMatrices>,
    p2_nodes: Vec<[usize; 6]>,
}

impl FemSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let nv = mesh.n_vertices();
        let mut geometry = Vec::with_capacity(mesh.n_triangles());
        let mut matrices = Vec::with_capacity(mesh.n_triangles());
        let mut p2_nodes = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let geo = ElementGeometry::new(mesh.triangle_points(t));
            matrices.push(ElementMatrices::new(&geo));
            geometry.push(geo);
            let [a, b, c] = mesh.triangles()[t];
            let [e0, e1, e2] = mesh.triangle_edges()[t];
            p2_nodes.push([a, b, c, nv + e0, nv + e1, nv + e2]);
        }
        FemSpace { mesh, geometry, matrices, p2_nodes }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_elements(&self) -> usize {
        self.geometry.len()
    }

    pub fn n_p2_nodes(&self) -> usize {
        self.mesh.n_vertices() + self.mesh.n_edges()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_p2_nodes()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn matrices(&self, t: usize) -> &ElementMatrices {
        &self.matrices[t]
    }

    pub fn p2_nodes(&self, t: usize) -> &[usize; 6] {
        &self.p2_nodes[t]
    }

    /// Coordinates of a global P2 node.
    pub fn p2_node_point(&self, node: usize) -> Point {
        let nv = self.mesh.n_vertices();
        if node < nv {
            self.mesh.vertices()[node]
        } else {
            self.mesh.edge_midpoint(node - nv)
        }
    }

    /// Global velocity dofs of element `t` in local order `2 i + c`.
    pub fn velocity_dofs(&self, t: usize) -> [usize; 12] {
        let nodes = &self.p2_nodes[t];
        std::array::from_fn(|k| 2 * nodes[k / 2] + k % 2)
    }

    /// Global pressure dofs of element `t` (offset past the velocity block).
    pub fn pressure_dofs(&self, t: usize) -> [usize; 3] {
        let off = self.n_velocity_dofs();
        self.mesh.triangles()[t].map(|v| off + v)
    }
}
