//! Triangulations of the hold-all domain.
//!
//! Two generators are provided: a structured rectangle (right or crossed
//! triangles) and the 1.5 x 1 double-pipe box with five circular holes. The
//! holes are resolved by an O-grid patch around each circle so that the
//! polygonal hole boundary conforms to the background grid.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Boundary classification of a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inflow,
    Outflow,
    Wall,
    Hole,
}

impl BoundaryTag {
    pub fn code(self) -> i32 {
        match self {
            BoundaryTag::Inflow => 1,
            BoundaryTag::Outflow => 2,
            BoundaryTag::Wall => 3,
            BoundaryTag::Hole => 4,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            1 => Some(BoundaryTag::Inflow),
            2 => Some(BoundaryTag::Outflow),
            3 => Some(BoundaryTag::Wall),
            4 => Some(BoundaryTag::Hole),
            _ => None,
        }
    }
}

/// Element region. Obstacle elements are fixed solid and never change phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Design,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrianglePattern {
    /// Two triangles per cell, diagonal from lower-left to upper-right.
    Right,
    /// Four triangles per cell around an added cell-center vertex.
    Crossed,
}

/// A boundary edge, oriented counterclockwise with respect to its triangle
/// so that the outward normal is the edge direction rotated clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub vertices: [usize; 2],
    pub triangle: usize,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    edges: Vec<[usize; 2]>,
    /// Local edge k of a triangle is opposite its local vertex k.
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    element_areas: Vec<f64>,
    total_area: f64,
    fingerprint: u64,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds and validates a mesh. `tagger` is evaluated at the midpoint of
    /// every boundary edge.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        tagger: impl Fn(Point) -> BoundaryTag,
    ) -> Result<Mesh> {
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        if regions.len() != triangles.len() {
            return Err(Error::Mesh("region count differs from triangle count".into()));
        }
        let nv = vertices.len();
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Mesh("non-finite vertex coordinate".into()));
        }

        let mut element_areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has nonpositive signed area {area:e}")));
            }
            element_areas.push(area);
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut incidence: Vec<Vec<(usize, usize, usize)>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    incidence.push(Vec::new());
                    edges.len() - 1
                });
                incidence[id].push((t, a, b));
                *slot = id;
            }
            triangle_edges.push(local);
        }

        let mut boundary_edges = Vec::new();
        let mut boundary_degree = vec![0usize; nv];
        for (id, inc) in incidence.iter().enumerate() {
            match inc.len() {
                1 => {
                    let (t, a, b) = inc[0];
                    let pa = vertices[a];
                    let pb = vertices[b];
                    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    boundary_edges.push(BoundaryEdge { edge: id, vertices: [a, b], triangle: t, tag: tagger(mid) });
                    boundary_degree[a] += 1;
                    boundary_degree[b] += 1;
                }
                2 => {
                    // interior edges must be traversed in opposite directions
                    if inc[0].1 != inc[1].2 || inc[0].2 != inc[1].1 {
                        return Err(Error::Mesh(format!("edge {id} has inconsistent orientation")));
                    }
                }
                n => return Err(Error::Mesh(format!("edge {id} is shared by {n} triangles"))),
            }
        }
        if let Some(v) = boundary_degree.iter().position(|&d| d != 0 && d != 2) {
            return Err(Error::Mesh(format!("boundary is not a union of closed loops at vertex {v}")));
        }

        let total_area = element_areas.iter().sum();
        let fingerprint = fingerprint(&vertices, &triangles);
        Ok(Mesh {
            vertices,
            triangles,
            regions,
            edges,
            triangle_edges,
            boundary_edges,
            element_areas,
            total_area,
            fingerprint,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.element_areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Lumped (row-sum) P1 mass per vertex: one third of the adjacent area.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.len()];
        for (tri, &area) in self.triangles.iter().zip(&self.element_areas) {
            for &v in tri {
                out[v] += area / 3.0;
            }
        }
        out
    }

    pub fn min_element_area(&self) -> f64 {
        self.element_areas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of closed loops formed by boundary edges with the given tag.
    pub fn count_tag_loops(&self, tag: BoundaryTag) -> usize {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for be in self.boundary_edges.iter().filter(|b| b.tag == tag) {
            next.insert(be.vertices[0], be.vertices[1]);
        }
        let mut seen = std::collections::HashSet::new();
        let mut loops = 0;
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        for start in starts {
            if seen.contains(&start) {
                continue;
            }
            let mut v = start;
            let mut closed = false;
            while let Some(&n) = next.get(&v) {
                if !seen.insert(v) {
                    break;
                }
                v = n;
                if v == start {
                    closed = true;
                    break;
                }
            }
            if closed {
                loops += 1;
            }
        }
        loops
    }

    /// Structural equality (same vertices, triangles, regions and tags).
    pub fn same_as(&self, other: &Mesh) -> bool {
        self.fingerprint == other.fingerprint
            && self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.regions == other.regions
            && self.boundary_edges == other.boundary_edges
    }
}

fn fingerprint(vertices: &[Point], triangles: &[[usize; 3]]) -> u64 {
    // FNV-1a over the raw coordinate bits and connectivity
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for p in vertices {
        eat(p[0].to_bits());
        eat(p[1].to_bits());
    }
    for t in triangles {
        for &v in t {
            eat(v as u64);
        }
    }
    h
}

/// Boundary tagging rules for the rectangular hold-all domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryRules {
    AllWall,
    /// Inflow at x = 0, outflow at x = `length`, walls elsewhere.
    Channel { length: f64 },
    /// 1.5 x 1 box: inlets on the left and outlets on the right for
    /// y in [1/6, 2/6] and [4/6, 5/6].
    DoublePipe,
    /// Unit square: inlet at x = 0 and outlet at x = 1 for y in [0.35, 0.65].
    Bipolar,
}

const SIDE_TOL: f64 = 1e-9;

pub const DOUBLE_PIPE_WIDTH: f64 = 1.5;
pub const DOUBLE_PIPE_HEIGHT: f64 = 1.0;
pub const DOUBLE_PIPE_PORTS: [(f64, f64); 2] = [(1.0 / 6.0, 2.0 / 6.0), (4.0 / 6.0, 5.0 / 6.0)];
pub const BIPOLAR_PORT: (f64, f64) = (0.35, 0.65);
pub const HOLE_RADIUS: f64 = 0.05;
pub const HOLE_CENTERS: [Point; 5] =
    [[0.5, 1.0 / 3.0], [0.5, 2.0 / 3.0], [1.0, 0.25], [1.0, 0.5], [1.0, 0.75]];

fn in_port(y: f64, port: (f64, f64)) -> bool {
    y >= port.0 - SIDE_TOL && y <= port.1 + SIDE_TOL
}

impl BoundaryRules {
    pub fn tag(&self, mid: Point) -> BoundaryTag {
        let [x, y] = mid;
        match *self {
            BoundaryRules::AllWall => BoundaryTag::Wall,
            BoundaryRules::Channel { length } => {
                if x.abs() < SIDE_TOL {
                    BoundaryTag::Inflow
                } else if (x - length).abs() < SIDE_TOL {
                    BoundaryTag::Outflow
                } else {
                    BoundaryTag::Wall
                }
            }
            BoundaryRules::DoublePipe => {
                let port = DOUBLE_PIPE_PORTS.iter().any(|&p| in_port(y, p));
                if x.abs() < SIDE_TOL && port {
                    BoundaryTag::Inflow
                } else if (x - DOUBLE_PIPE_WIDTH).abs() < SIDE_TOL && port {
                    BoundaryTag::Outflow
                } else {
                    BoundaryTag::Wall
                }
            }
            BoundaryRules::Bipolar => {
                if x.abs() < SIDE_TOL && in_port(y, BIPOLAR_PORT) {
                    BoundaryTag::Inflow
                } else if (x - 1.0).abs() < SIDE_TOL && in_port(y, BIPOLAR_PORT) {
                    BoundaryTag::Outflow
                } else {
                    BoundaryTag::Wall
                }
            }
        }
    }
}

/// Structured triangulation of `[0, width] x [0, height]` with `nx * ny`
/// cells.
pub fn generate_rect_mesh(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    pattern: TrianglePattern,
    rules: BoundaryRules,
) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(Error::invalid(format!("rectangle dimensions must be positive, got {width} x {height}")));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::invalid(format!("need at least 2 x 2 cells, got {nx} x {ny}")));
    }
    let grid = Grid::new(width, height, nx, ny);
    let mut vertices: Vec<Point> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| (i, j)))
        .map(|(i, j)| grid.point(i, j))
        .collect();
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            push_cell(&grid, i, j, pattern, &mut vertices, &mut triangles, &|i, j| grid.index(i, j));
        }
    }
    let regions = vec![Region::Design; triangles.len()];
    Mesh::from_parts(vertices, triangles, regions, |m| rules.tag(m))
}

struct Grid {
    nx: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    fn new(width: f64, height: f64, nx: usize, ny: usize) -> Self {
        Grid { nx, hx: width / nx as f64, hy: height / ny as f64 }
    }

    fn point(&self, i: usize, j: usize) -> Point {
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
}

fn push_cell(
    grid: &Grid,
    i: usize,
    j: usize,
    pattern: TrianglePattern,
    vertices: &mut Vec<Point>,
    triangles: &mut Vec<[usize; 3]>,
    index: &dyn Fn(usize, usize) -> usize,
) {
    let p00 = index(i, j);
    let p10 = index(i + 1, j);
    let p11 = index(i + 1, j + 1);
    let p01 = index(i, j + 1);
    match pattern {
        TrianglePattern::Right => {
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
        }
        TrianglePattern::Crossed => {
            let c = vertices.len();
            vertices.push([(i as f64 + 0.5) * grid.hx, (j as f64 + 0.5) * grid.hy]);
            triangles.push([p00, p10, c]);
            triangles.push([p10, p11, c]);
            triangles.push([p11, p01, c]);
            triangles.push([p01, p00, c]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublePipeMeshParams {
    /// Target edge length. The grid spacing actually used is the largest
    /// 1/(12k) not exceeding it, so that hole centers and port ends are grid
    /// nodes.
    pub resolution: f64,
    /// Minimum number of polygon segments per hole (at least 32).
    pub hole_segments: usize,
    /// Mesh the hole interiors as fixed-solid obstacle elements instead of
    /// cutting them out.
    pub holes_as_solid: bool,
    pub pattern: TrianglePattern,
}

impl Default for DoublePipeMeshParams {
    fn default() -> Self {
        DoublePipeMeshParams {
            resolution: 1.0 / 36.0,
            hole_segments: 32,
            holes_as_solid: false,
            pattern: TrianglePattern::Right,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DoublePipeMesh {
    pub mesh: Mesh,
    pub spacing: f64,
    pub segments_per_hole: usize,
    /// Analytic minus polygonal area, summed over the five holes.
    pub area_defect: f64,
}

impl DoublePipeMesh {
    pub fn analytic_fluid_area() -> f64 {
        DOUBLE_PIPE_WIDTH * DOUBLE_PIPE_HEIGHT - 5.0 * PI * HOLE_RADIUS * HOLE_RADIUS
    }
}

/// Area lost by approximating a circle of radius `r` by a regular
/// `segments`-gon inscribed in it.
pub fn polygon_area_defect(r: f64, segments: usize) -> f64 {
    let n = segments as f64;
    PI * r * r - 0.5 * n * r * r * (2.0 * PI / n).sin()
}

pub fn generate_double_pipe_mesh(params: &DoublePipeMeshParams) -> Result<DoublePipeMesh> {
    let res = params.resolution;
    if !(res > 0.0) || !res.is_finite() {
        return Err(Error::invalid(format!("resolution must be positive, got {res}")));
    }
    if res >= 2.0 * HOLE_RADIUS {
        return Err(Error::invalid(format!(
            "resolution {res} cannot resolve holes of diameter {}",
            2.0 * HOLE_RADIUS
        )));
    }
    if params.hole_segments < 32 {
        return Err(Error::invalid("holes need at least 32 polygon segments"));
    }
    // patch half-width in cells; the patch perimeter carries 8m nodes
    let patch_cells = |k: usize| {
        let h = 1.0 / (12 * k) as f64;
        params.hole_segments.div_ceil(8).max((1.5 * HOLE_RADIUS / h - 1e-9).ceil() as usize)
    };
    // The spacing is 1/(12k) so hole centers sit on grid nodes. Refine past
    // the requested resolution until neighbouring patches (3k cells apart) fit.
    let mut k = (1.0 / (12.0 * res) - 1e-9).ceil().max(1.0) as usize;
    while 3 * k < 2 * patch_cells(k) + 1 {
        k += 1;
    }
    let m = patch_cells(k);
    let h = 1.0 / (12 * k) as f64;
    let nx = 18 * k;
    let ny = 12 * k;
    let grid = Grid::new(DOUBLE_PIPE_WIDTH, DOUBLE_PIPE_HEIGHT, nx, ny);

    let segments = 8 * m;
    let s = m as f64 * h;
    let centers: Vec<(usize, usize)> = HOLE_CENTERS
        .iter()
        .map(|c| ((c[0] / h).round() as usize, (c[1] / h).round() as usize))
        .collect();
    for (a, &(ia, ja)) in centers.iter().enumerate() {
        if ia < m + 1 || ja < m + 1 || ia + m + 1 > nx || ja + m + 1 > ny {
            return Err(Error::invalid("resolution too coarse: hole patch reaches the outer boundary"));
        }
        for &(ib, jb) in &centers[a + 1..] {
            if ia.abs_diff(ib) < 2 * m + 1 && ja.abs_diff(jb) < 2 * m + 1 {
                return Err(Error::invalid("resolution too coarse: hole patches overlap"));
            }
        }
    }
    let in_patch_cell = |i: usize, j: usize| {
        centers.iter().any(|&(ci, cj)| i + m >= ci && i < ci + m && j + m >= cj && j < cj + m)
    };
    let strictly_inside = |i: usize, j: usize| {
        centers.iter().any(|&(ci, cj)| ci.abs_diff(i) < m && cj.abs_diff(j) < m)
    };

    let mut vertices: Vec<Point> = Vec::new();
    let mut grid_index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            if !strictly_inside(i, j) {
                grid_index[grid.index(i, j)] = vertices.len();
                vertices.push(grid.point(i, j));
            }
        }
    }
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let lookup = |i: usize, j: usize| grid_index[grid.index(i, j)];
    for j in 0..ny {
        for i in 0..nx {
            if !in_patch_cell(i, j) {
                push_cell(&grid, i, j, params.pattern, &mut vertices, &mut triangles, &lookup);
            }
        }
    }
    regions.resize(triangles.len(), Region::Design);

    let layers = ((s - HOLE_RADIUS) / h).round().max(1.0) as usize;
    for (&(ci, cj), center) in centers.iter().zip(HOLE_CENTERS.iter()) {
        // perimeter nodes counterclockwise from the middle of the right side
        let mut ring_outer = Vec::with_capacity(segments);
        let mut walk = |di: isize, dj: isize| ring_outer.push(lookup((ci as isize + di) as usize, (cj as isize + dj) as usize));
        let mi = m as isize;
        for t in 0..mi {
            walk(mi, t);
        }
        for t in 0..2 * mi {
            walk(mi - t, mi);
        }
        for t in 0..2 * mi {
            walk(-mi, mi - t);
        }
        for t in 0..2 * mi {
            walk(-mi + t, -mi);
        }
        for t in 0..mi {
            walk(mi, -mi + t);
        }
        debug_assert_eq!(ring_outer.len(), segments);

        let circle: Vec<Point> = (0..segments)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / segments as f64;
                [center[0] + HOLE_RADIUS * a.cos(), center[1] + HOLE_RADIUS * a.sin()]
            })
            .collect();
        let mut rings: Vec<Vec<usize>> = Vec::with_capacity(layers + 1);
        for l in 0..layers {
            let t = l as f64 / layers as f64;
            let ring = (0..segments)
                .map(|i| {
                    let q = vertices[ring_outer[i]];
                    let p = circle[i];
                    vertices.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                    vertices.len() - 1
                })
                .collect();
            rings.push(ring);
        }
        rings.push(ring_outer);

        for l in 0..layers {
            for i in 0..segments {
                let i1 = (i + 1) % segments;
                let (a, b, c, d) = (rings[l][i], rings[l][i1], rings[l + 1][i1], rings[l + 1][i]);
                let dist2 = |u: usize, v: usize| {
                    let (pu, pv) = (vertices[u], vertices[v]);
                    (pu[0] - pv[0]).powi(2) + (pu[1] - pv[1]).powi(2)
                };
                let quad = if dist2(a, c) <= dist2(b, d) { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
                for tri in quad {
                    triangles.push(ccw(&vertices, tri));
                    regions.push(Region::Design);
                }
            }
        }
        if params.holes_as_solid {
            let c = vertices.len();
            vertices.push(*center);
            for i in 0..segments {
                let tri = [c, rings[0][i], rings[0][(i + 1) % segments]];
                triangles.push(ccw(&vertices, tri));
                regions.push(Region::Obstacle);
            }
        }
    }

    let as_solid = params.holes_as_solid;
    let mesh = Mesh::from_parts(vertices, triangles, regions, |mid| {
        let near_hole = HOLE_CENTERS
            .iter()
            .any(|c| ((mid[0] - c[0]).powi(2) + (mid[1] - c[1]).powi(2)).sqrt() < HOLE_RADIUS + 0.5 * h);
        if near_hole && !as_solid {
            BoundaryTag::Hole
        } else {
            BoundaryRules::DoublePipe.tag(mid)
        }
    })?;
    let area_defect = if as_solid { 0.0 } else { 5.0 * polygon_area_defect(HOLE_RADIUS, segments) };
    Ok(DoublePipeMesh { mesh, spacing: h, segments_per_hole: segments, area_defect })
}

fn ccw(vertices: &[Point], tri: [usize; 3]) -> [usize; 3] {
    if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0 {
        [tri[0], tri[2], tri[1]]
    } else {
        tri
    }
}
