//! Legacy ASCII VTK unstructured-grid output and input.
//!
//! Triangles are written as cells, followed by one line cell per boundary
//! edge. The cell field `boundary_tag` is 0 on triangles and the tag code on
//! boundary lines; `region` is 1 on obstacle triangles.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh, Region};

const VTK_TRIANGLE: u8 = 5;
const VTK_LINE: u8 = 3;

#[derive(Debug)]
pub struct VtkWriter<'a> {
    mesh: &'a Mesh,
    point_scalars: Vec<(String, Vec<f64>)>,
    point_vectors: Vec<(String, Vec<[f64; 2]>)>,
    cell_scalars: Vec<(String, Vec<f64>)>,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        Err(Error::Vtk(format!("invalid field name {name:?}")))
    } else {
        Ok(())
    }
}

impl<'a> VtkWriter<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        VtkWriter { mesh, point_scalars: Vec::new(), point_vectors: Vec::new(), cell_scalars: Vec::new() }
    }

    pub fn point_scalar(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        check_name(name)?;
        if values.len() != self.mesh.n_vertices() {
            return Err(Error::Vtk(format!("point field {name} has {} values", values.len())));
        }
        self.point_scalars.push((name.to_string(), values));
        Ok(self)
    }

    pub fn point_vector(mut self, name: &str, values: Vec<[f64; 2]>) -> Result<Self> {
        check_name(name)?;
        if values.len() != self.mesh.n_vertices() {
            return Err(Error::Vtk(format!("point field {name} has {} values", values.len())));
        }
        self.point_vectors.push((name.to_string(), values));
        Ok(self)
    }

    /// Per-triangle field; boundary line cells get 0.
    pub fn cell_scalar(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        check_name(name)?;
        if values.len() != self.mesh.n_triangles() {
            return Err(Error::Vtk(format!("cell field {name} has {} values", values.len())));
        }
        self.cell_scalars.push((name.to_string(), values));
        Ok(self)
    }

    pub fn write(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        let mesh = self.mesh;
        let nt = mesh.n_triangles();
        let nb = mesh.boundary_edges().len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "topodeflate")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", mesh.n_vertices())?;
        for p in mesh.vertices() {
            writeln!(w, "{:e} {:e} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", nt + nb, 4 * nt + 3 * nb)?;
        for t in mesh.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        for b in mesh.boundary_edges() {
            writeln!(w, "2 {} {}", b.vertices[0], b.vertices[1])?;
        }
        writeln!(w, "CELL_TYPES {}", nt + nb)?;
        for _ in 0..nt {
            writeln!(w, "{VTK_TRIANGLE}")?;
        }
        for _ in 0..nb {
            writeln!(w, "{VTK_LINE}")?;
        }
        writeln!(w, "CELL_DATA {}", nt + nb)?;
        writeln!(w, "SCALARS boundary_tag int 1\nLOOKUP_TABLE default")?;
        for _ in 0..nt {
            writeln!(w, "0")?;
        }
        for b in mesh.boundary_edges() {
            writeln!(w, "{}", b.tag.code())?;
        }
        writeln!(w, "SCALARS region int 1\nLOOKUP_TABLE default")?;
        for r in mesh.regions() {
            writeln!(w, "{}", u8::from(*r == Region::Obstacle))?;
        }
        for _ in 0..nb {
            writeln!(w, "0")?;
        }
        for (name, vals) in &self.cell_scalars {
            writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v:e}")?;
            }
            for _ in 0..nb {
                writeln!(w, "0")?;
            }
        }
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, vals) in &self.point_scalars {
            writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v:e}")?;
            }
        }
        for (name, vals) in &self.point_vectors {
            writeln!(w, "VECTORS {name} double")?;
            for v in vals {
                writeln!(w, "{:e} {:e} 0", v[0], v[1])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(File::create(path)?)
    }
}

#[derive(Debug)]
pub struct VtkData {
    pub mesh: Mesh,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 2]>>,
    /// Triangle values only.
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
}

struct Tokens<R> {
    lines: std::io::Lines<R>,
    buf: std::collections::VecDeque<String>,
}

impl<R: BufRead> Tokens<R> {
    fn next(&mut self) -> Result<Option<String>> {
        while self.buf.is_empty() {
            match self.lines.next() {
                None => return Ok(None),
                Some(line) => self.buf.extend(line?.split_whitespace().map(str::to_string)),
            }
        }
        Ok(self.buf.pop_front())
    }

    fn expect(&mut self) -> Result<String> {
        self.next()?.ok_or_else(|| Error::Vtk("unexpected end of file".into()))
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let t = self.expect()?;
        t.parse().map_err(|_| Error::Vtk(format!("expected a number, found {t:?}")))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.expect()?;
        if t.eq_ignore_ascii_case(kw) {
            Ok(())
        } else {
            Err(Error::Vtk(format!("expected {kw}, found {t:?}")))
        }
    }

    fn skip_line(&mut self) -> Result<()> {
        self.buf.clear();
        if let Some(l) = self.lines.next() {
            l?;
        }
        Ok(())
    }
}

/// Reads a file produced by [`VtkWriter`] (or any ASCII unstructured grid of
/// triangles and boundary lines with the same cell fields).
pub fn read_vtk(r: impl Read) -> Result<VtkData> {
    let mut tok = Tokens { lines: BufReader::new(r).lines(), buf: Default::default() };
    // header: version line and title line
    tok.skip_line()?;
    tok.skip_line()?;
    tok.keyword("ASCII")?;
    tok.keyword("DATASET")?;
    tok.keyword("UNSTRUCTURED_GRID")?;
    tok.keyword("POINTS")?;
    let np: usize = tok.number()?;
    tok.expect()?;
    let mut vertices = Vec::with_capacity(np);
    for _ in 0..np {
        let x: f64 = tok.number()?;
        let y: f64 = tok.number()?;
        let _z: f64 = tok.number()?;
        vertices.push([x, y]);
    }
    tok.keyword("CELLS")?;
    let nc: usize = tok.number()?;
    let _size: usize = tok.number()?;
    let mut cells: Vec<Vec<usize>> = Vec::with_capacity(nc);
    for _ in 0..nc {
        let k: usize = tok.number()?;
        let mut c = Vec::with_capacity(k);
        for _ in 0..k {
            let v: usize = tok.number()?;
            if v >= np {
                return Err(Error::Vtk(format!("cell references point {v} of {np}")));
            }
            c.push(v);
        }
        cells.push(c);
    }
    tok.keyword("CELL_TYPES")?;
    let nct: usize = tok.number()?;
    if nct != nc {
        return Err(Error::Vtk("cell type count mismatch".into()));
    }
    let mut types = Vec::with_capacity(nc);
    for _ in 0..nc {
        types.push(tok.number::<u8>()?);
    }

    let mut point_scalars = BTreeMap::new();
    let mut point_vectors = BTreeMap::new();
    let mut cell_fields: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut section_len = 0;
    let mut in_points = false;
    while let Some(t) = tok.next()? {
        match t.to_ascii_uppercase().as_str() {
            "CELL_DATA" => {
                section_len = tok.number()?;
                in_points = false;
            }
            "POINT_DATA" => {
                section_len = tok.number()?;
                in_points = true;
            }
            "SCALARS" => {
                let name = tok.expect()?;
                tok.expect()?;
                let mut peek = tok.expect()?;
                if peek.parse::<usize>().is_ok() {
                    peek = tok.expect()?;
                }
                if !peek.eq_ignore_ascii_case("LOOKUP_TABLE") {
                    return Err(Error::Vtk(format!("expected LOOKUP_TABLE, found {peek:?}")));
                }
                tok.expect()?;
                let mut vals = Vec::with_capacity(section_len);
                for _ in 0..section_len {
                    vals.push(tok.number::<f64>()?);
                }
                if in_points {
                    point_scalars.insert(name, vals);
                } else {
                    cell_fields.insert(name, vals);
                }
            }
            "VECTORS" => {
                let name = tok.expect()?;
                tok.expect()?;
                let mut vals = Vec::with_capacity(section_len);
                for _ in 0..section_len {
                    let x: f64 = tok.number()?;
                    let y: f64 = tok.number()?;
                    let _z: f64 = tok.number()?;
                    vals.push([x, y]);
                }
                if in_points {
                    point_vectors.insert(name, vals);
                }
            }
            other => return Err(Error::Vtk(format!("unsupported section {other:?}"))),
        }
    }

    let tags = cell_fields.remove("boundary_tag");
    let regions_field = cell_fields.remove("region");
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut edge_tags: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    let mut tri_cells = Vec::new();
    for (i, (cell, &ty)) in cells.iter().zip(&types).enumerate() {
        match ty {
            VTK_TRIANGLE if cell.len() == 3 => {
                triangles.push([cell[0], cell[1], cell[2]]);
                let obstacle = regions_field.as_ref().is_some_and(|r| r[i] != 0.0);
                regions.push(if obstacle { Region::Obstacle } else { Region::Design });
                tri_cells.push(i);
            }
            VTK_LINE if cell.len() == 2 => {
                let code = tags.as_ref().map_or(BoundaryTag::Wall.code(), |t| t[i] as i32);
                let tag = BoundaryTag::from_code(code)
                    .ok_or_else(|| Error::Vtk(format!("unknown boundary tag {code}")))?;
                edge_tags.insert((cell[0].min(cell[1]), cell[0].max(cell[1])), tag);
            }
            _ => return Err(Error::Vtk(format!("unsupported cell type {ty} with {} points", cell.len()))),
        }
    }
    // the tagger only sees midpoints, so key the edge tags by midpoint bits
    let by_mid: HashMap<(u64, u64), BoundaryTag> = edge_tags
        .iter()
        .map(|(&(a, b), &tag)| {
            let m = [0.5 * (vertices[a][0] + vertices[b][0]), 0.5 * (vertices[a][1] + vertices[b][1])];
            ((m[0].to_bits(), m[1].to_bits()), tag)
        })
        .collect();
    let mesh = Mesh::from_parts(vertices, triangles, regions, |m| {
        by_mid.get(&(m[0].to_bits(), m[1].to_bits())).copied().unwrap_or(BoundaryTag::Wall)
    })?;
    let cell_scalars = cell_fields
        .into_iter()
        .map(|(k, v)| (k, tri_cells.iter().map(|&i| v[i]).collect()))
        .collect();
    Ok(VtkData { mesh, point_scalars, point_vectors, cell_scalars })
}

pub fn read_vtk_file(path: impl AsRef<Path>) -> Result<VtkData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Vtk(format!("cannot open {}: {e}", path.display())))?;
    read_vtk(file)
}
