//! Legacy ASCII VTK unstructured grids: mesh and field export, and reading
//! back files written here.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Resolution, Topology, TorMesh};

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

#[derive(Default)]
pub struct VtkData {
    pub points: Vec<Point3<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
    pub cell_vectors: BTreeMap<String, Vec<Vector3<f64>>>,
    pub resolution: Option<Resolution>,
}

impl VtkData {
    /// Volume mesh with chart and structure carried over, if present.
    pub fn from_mesh(mesh: &TorMesh) -> Self {
        let mut d = VtkData {
            points: mesh.vertices.clone(),
            cells: mesh.tets.iter().map(|t| t.to_vec()).collect(),
            cell_types: vec![VTK_TETRA; mesh.n_tets()],
            resolution: mesh.resolution,
            ..Default::default()
        };
        let chart = |c: usize| {
            mesh.boundary_uv
                .iter()
                .map(|x| x.map_or(f64::NAN, |uv| uv[c]))
                .collect()
        };
        d.point_scalars.insert("chart_u".into(), chart(0));
        d.point_scalars.insert("chart_v".into(), chart(1));
        d
    }

    /// Boundary triangles of a mesh, oriented by their sorted vertex order.
    pub fn boundary_surface(mesh: &TorMesh, topo: &Topology) -> Self {
        VtkData {
            points: mesh.vertices.clone(),
            cells: topo
                .boundary_faces
                .iter()
                .map(|&f| topo.faces[f].to_vec())
                .collect(),
            cell_types: vec![VTK_TRIANGLE; topo.boundary_faces.len()],
            ..Default::default()
        }
    }

    pub fn to_mesh(&self) -> Result<TorMesh> {
        let mut tets = Vec::with_capacity(self.cells.len());
        for (c, ty) in self.cells.iter().zip(&self.cell_types) {
            if *ty != VTK_TETRA || c.len() != 4 {
                return Err(Error::Parse(format!("cell type {ty} is not a tetrahedron")));
            }
            if c.iter().any(|&v| v >= self.points.len()) {
                return Err(Error::Parse("cell references a missing point".into()));
            }
            tets.push([c[0], c[1], c[2], c[3]]);
        }
        let boundary_uv = match (
            self.point_scalars.get("chart_u"),
            self.point_scalars.get("chart_v"),
        ) {
            (Some(u), Some(v)) => u
                .iter()
                .zip(v)
                .map(|(&a, &b)| (!a.is_nan()).then_some([a, b]))
                .collect(),
            _ => vec![None; self.points.len()],
        };
        let mesh = TorMesh {
            vertices: self.points.clone(),
            tets,
            boundary_uv,
            resolution: self.resolution,
        };
        if let Some(t) = (0..mesh.n_tets()).find(|&t| !(mesh.tet_volume(t) > 0.0)) {
            return Err(Error::InvertedCell { tets: vec![t] });
        }
        Ok(mesh)
    }

    pub fn to_string(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
        );
        if let Some(r) = self.resolution {
            let _ = writeln!(
                s,
                "FIELD FieldData 1\nresolution 1 3 int\n{} {} {}",
                r.n_rho, r.n_u, r.n_v
            );
        }
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), size);
        for c in &self.cells {
            let _ = write!(s, "{}", c.len());
            for v in c {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for t in &self.cell_types {
            let _ = writeln!(s, "{t}");
        }
        if !self.point_scalars.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.points.len());
            write_scalars(&mut s, &self.point_scalars);
        }
        if !self.cell_scalars.is_empty() || !self.cell_vectors.is_empty() {
            let _ = writeln!(s, "CELL_DATA {}", self.cells.len());
            write_scalars(&mut s, &self.cell_scalars);
            for (name, vals) in &self.cell_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for v in vals {
                    let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
                }
            }
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>, title: &str) -> Result<()> {
        std::fs::write(path, self.to_string(title))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if !header.starts_with("# vtk DataFile") {
            return Err(Error::Parse("missing VTK header".into()));
        }
        lines.next(); // title
        let mut tok = Tokens {
            it: lines.flat_map(str::split_whitespace),
        };
        if tok.word()? != "ASCII" {
            return Err(Error::Parse("only ASCII files are supported".into()));
        }
        tok.expect("DATASET")?;
        tok.expect("UNSTRUCTURED_GRID")?;
        let mut d = VtkData::default();
        let mut section = "";
        while let Some(key) = tok.it.next() {
            match key {
                "FIELD" => {
                    tok.word()?;
                    let n = tok.num::<usize>()?;
                    for _ in 0..n {
                        let name = tok.word()?;
                        let (nc, nt) = (tok.num::<usize>()?, tok.num::<usize>()?);
                        tok.word()?;
                        let vals: Vec<f64> = (0..nc * nt)
                            .map(|_| tok.num::<f64>())
                            .collect::<Result<_>>()?;
                        if name == "resolution" && vals.len() == 3 {
                            d.resolution = Some(Resolution::new(
                                vals[0] as usize,
                                vals[1] as usize,
                                vals[2] as usize,
                            ));
                        }
                    }
                }
                "POINTS" => {
                    let n = tok.num::<usize>()?;
                    tok.word()?;
                    for _ in 0..n {
                        d.points
                            .push(Point3::new(tok.num()?, tok.num()?, tok.num()?));
                    }
                }
                "CELLS" => {
                    let n = tok.num::<usize>()?;
                    tok.num::<usize>()?;
                    for _ in 0..n {
                        let k = tok.num::<usize>()?;
                        d.cells
                            .push((0..k).map(|_| tok.num::<usize>()).collect::<Result<_>>()?);
                    }
                }
                "CELL_TYPES" => {
                    let n = tok.num::<usize>()?;
                    for _ in 0..n {
                        d.cell_types.push(tok.num()?);
                    }
                }
                "POINT_DATA" | "CELL_DATA" => {
                    tok.num::<usize>()?;
                    section = key;
                }
                "SCALARS" => {
                    let name = tok.word()?.to_string();
                    tok.word()?;
                    let mut next = tok.word()?;
                    if next == "1" {
                        next = tok.word()?;
                    }
                    if next != "LOOKUP_TABLE" {
                        return Err(Error::Parse("expected LOOKUP_TABLE".into()));
                    }
                    tok.word()?;
                    let n = if section == "POINT_DATA" {
                        d.points.len()
                    } else {
                        d.cells.len()
                    };
                    let vals = (0..n)
                        .map(|_| tok.num::<f64>())
                        .collect::<Result<Vec<_>>>()?;
                    let target = if section == "POINT_DATA" {
                        &mut d.point_scalars
                    } else {
                        &mut d.cell_scalars
                    };
                    target.insert(name, vals);
                }
                "VECTORS" => {
                    if section != "CELL_DATA" {
                        return Err(Error::Parse("point vectors are not supported".into()));
                    }
                    let name = tok.word()?.to_string();
                    tok.word()?;
                    let vals = (0..d.cells.len())
                        .map(|_| Ok(Vector3::new(tok.num()?, tok.num()?, tok.num()?)))
                        .collect::<Result<Vec<_>>>()?;
                    d.cell_vectors.insert(name, vals);
                }
                other => return Err(Error::Parse(format!("unexpected keyword {other:?}"))),
            }
        }
        if d.cells.len() != d.cell_types.len() {
            return Err(Error::Parse("CELLS and CELL_TYPES disagree".into()));
        }
        Ok(d)
    }
}

fn write_scalars(s: &mut String, data: &BTreeMap<String, Vec<f64>>) {
    for (name, vals) in data {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in vals {
            let _ = writeln!(s, "{v}");
        }
    }
}

struct Tokens<'a, I: Iterator<Item = &'a str>> {
    it: I,
}

impl<'a, I: Iterator<Item = &'a str>> Tokens<'a, I> {
    fn word(&mut self) -> Result<&'a str> {
        self.it
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of file".into()))
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T> {
        let w = self.word()?;
        w.parse()
            .map_err(|_| Error::Parse(format!("bad number {w:?}")))
    }

    fn expect(&mut self, k: &str) -> Result<()> {
        let w = self.word()?;
        if w == k {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected {k}, found {w:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FourierSurface;
    use crate::mesh::generate_mesh;

    #[test]
    fn mesh_survives_export_and_import() {
        let m = generate_mesh(&FourierSurface::twisted_demo(), Resolution::new(2, 8, 16)).unwrap();
        let mut d = VtkData::from_mesh(&m);
        d.cell_vectors.insert(
            "B".into(),
            (0..m.n_tets())
                .map(|t| Vector3::new(t as f64, 0.5, -1e-300))
                .collect(),
        );
        let back = VtkData::parse(&d.to_string("test")).unwrap();
        let m2 = back.to_mesh().unwrap();
        assert_eq!(m2.vertices, m.vertices);
        assert_eq!(m2.tets, m.tets);
        assert_eq!(m2.boundary_uv, m.boundary_uv);
        assert_eq!(m2.resolution, m.resolution);
        assert_eq!(back.cell_vectors["B"], d.cell_vectors["B"]);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(VtkData::parse("hello").is_err());
        assert!(VtkData::parse(
            "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 2 double\n0 0"
        )
        .is_err());
    }
}
