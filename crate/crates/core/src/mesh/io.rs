//! TetGen `.node`/`.ele` and legacy ASCII VTK unstructured-grid I/O.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{TetMesh, Vec3};
use crate::error::{Error, Result};

const VTK_TETRA: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    TetgenNodeEle,
    VtkLegacy,
}

impl MeshFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("vtk") => Some(MeshFormat::VtkLegacy),
            Some("node") | Some("ele") => Some(MeshFormat::TetgenNodeEle),
            _ => None,
        }
    }
}

pub fn load_tet_mesh(path: &Path, format: MeshFormat) -> Result<TetMesh> {
    match format {
        MeshFormat::TetgenNodeEle => load_tetgen(path),
        MeshFormat::VtkLegacy => {
            let data = read_vtk(path)?;
            data.into_mesh(path)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, comment-stripped lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {what} from {token:?}")))
}

fn tetgen_paths(path: &Path) -> (PathBuf, PathBuf) {
    match path.extension().and_then(|e| e.to_str()) {
        Some("node") | Some("ele") => (path.with_extension("node"), path.with_extension("ele")),
        _ => {
            let base = path.as_os_str().to_owned();
            let mut node = base.clone();
            node.push(".node");
            let mut ele = base;
            ele.push(".ele");
            (PathBuf::from(node), PathBuf::from(ele))
        }
    }
}

/// Loads a TetGen pair; the index base (0 or 1) is taken from the first
/// node index.
pub fn load_tetgen(path: &Path) -> Result<TetMesh> {
    let (node_path, ele_path) = tetgen_paths(path);
    let node_text = read_text(&node_path)?;
    let mut lines = data_lines(&node_text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&node_path, 1, "missing header"))?;
    let count: usize = parse_num(&node_path, hline, header[0], "point count")?;
    if header.len() > 1 && header[1] != "3" {
        return Err(Error::parse(&node_path, hline, "only 3D node files are supported"));
    }
    let mut vertices = Vec::with_capacity(count);
    let mut base = 0usize;
    for (k, (line, tokens)) in lines.by_ref().take(count).enumerate() {
        if tokens.len() < 4 {
            return Err(Error::parse(&node_path, line, "expected index and three coordinates"));
        }
        let idx: usize = parse_num(&node_path, line, tokens[0], "node index")?;
        if k == 0 {
            if idx > 1 {
                return Err(Error::parse(&node_path, line, "first node index must be 0 or 1"));
            }
            base = idx;
        } else if idx != k + base {
            return Err(Error::parse(&node_path, line, format!("expected node index {}", k + base)));
        }
        let mut p = [0.0; 3];
        for c in 0..3 {
            p[c] = parse_num(&node_path, line, tokens[c + 1], "coordinate")?;
        }
        vertices.push(Vec3::new(p[0], p[1], p[2]));
    }
    if vertices.len() != count {
        return Err(Error::parse(&node_path, node_text.lines().count(), "fewer nodes than declared"));
    }

    let ele_text = read_text(&ele_path)?;
    let mut lines = data_lines(&ele_text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&ele_path, 1, "missing header"))?;
    let count: usize = parse_num(&ele_path, hline, header[0], "tet count")?;
    if header.len() > 1 && header[1] != "4" {
        return Err(Error::parse(&ele_path, hline, "only linear (4-node) tets are supported"));
    }
    let mut tets = Vec::with_capacity(count);
    let mut tet_lines = Vec::with_capacity(count);
    for (line, tokens) in lines.take(count) {
        if tokens.len() < 5 {
            return Err(Error::parse(&ele_path, line, "expected index and four node indices"));
        }
        let mut tet = [0usize; 4];
        for c in 0..4 {
            let raw: usize = parse_num(&ele_path, line, tokens[c + 1], "node index")?;
            if raw < base || raw - base >= vertices.len() {
                return Err(Error::parse(
                    &ele_path,
                    line,
                    format!("dangling vertex index {raw} ({} vertices, base {base})", vertices.len()),
                ));
            }
            tet[c] = raw - base;
        }
        tets.push(tet);
        tet_lines.push(line);
    }
    if tets.len() != count {
        return Err(Error::parse(&ele_path, ele_text.lines().count(), "fewer tets than declared"));
    }
    check_volumes(&ele_path, &vertices, &tets, &tet_lines)?;
    TetMesh::new(vertices, tets)
}

fn check_volumes(path: &Path, vertices: &[Vec3], tets: &[[usize; 4]], lines: &[usize]) -> Result<()> {
    for (tet, &line) in tets.iter().zip(lines) {
        if matches!(super::orient_tet(vertices, tet), super::Orientation::Degenerate) {
            return Err(Error::parse(path, line, format!("tet {tet:?} has zero volume")));
        }
    }
    Ok(())
}

/// Writes `<base>.node` and `<base>.ele` with 0-based indices.
pub fn write_tetgen(base: &Path, mesh: &TetMesh) -> Result<()> {
    let (node_path, ele_path) = tetgen_paths(base);
    let mut node = format!("{} 3 0 0\n", mesh.num_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(node, "{i} {} {} {}", p.x, p.y, p.z);
    }
    fs::write(&node_path, node).map_err(|e| Error::io(&node_path, e))?;
    let mut ele = format!("{} 4 0\n", mesh.tets().len());
    for (i, t) in mesh.tets().iter().enumerate() {
        let _ = writeln!(ele, "{i} {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    fs::write(&ele_path, ele).map_err(|e| Error::io(&ele_path, e))
}

/// How a point-data array is declared in a legacy VTK file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Scalars,
    Vectors,
    Tensors,
    Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointArray {
    pub name: String,
    pub kind: ArrayKind,
    pub components: usize,
    pub values: Vec<f64>,
}

impl PointArray {
    pub fn new(name: &str, kind: ArrayKind, components: usize, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            kind,
            components,
            values,
        }
    }

    pub fn tuple(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }
}

/// Parsed contents of a legacy VTK unstructured grid.
#[derive(Debug, Clone, Default)]
pub struct VtkData {
    pub points: Vec<Vec3>,
    /// (cell type, vertex indices, source line)
    pub cells: Vec<(u32, Vec<usize>, usize)>,
    pub point_data: BTreeMap<String, PointArray>,
}

impl VtkData {
    pub fn into_mesh(self, path: &Path) -> Result<TetMesh> {
        let mut tets = Vec::new();
        let mut lines = Vec::new();
        for (ty, ids, line) in &self.cells {
            if *ty != VTK_TETRA {
                continue;
            }
            if ids.len() != 4 {
                return Err(Error::parse(path, *line, "tetra cell must have 4 points"));
            }
            tets.push([ids[0], ids[1], ids[2], ids[3]]);
            lines.push(*line);
        }
        if tets.is_empty() {
            return Err(Error::parse(path, 1, "no tetrahedral cells"));
        }
        check_volumes(path, &self.points, &tets, &lines)?;
        TetMesh::new(self.points, tets)
    }
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    path: &'a Path,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let last = self.items.last().map_or(1, |t| t.0);
        let t = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(self.path, last, "unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, tok) = self.next()?;
        parse_num(self.path, line, tok, what)
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|_| self.num("value")).collect()
    }
}

pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = read_text(path)?;
    let mut all_lines = text.lines();
    let first = all_lines.next().unwrap_or("");
    if !first.starts_with("# vtk DataFile") {
        return Err(Error::parse(path, 1, "missing '# vtk DataFile' header"));
    }
    let _title = all_lines.next();
    let format = all_lines.next().unwrap_or("").trim();
    if !format.eq_ignore_ascii_case("ASCII") {
        return Err(Error::parse(path, 3, "only ASCII legacy VTK is supported"));
    }
    let items = text
        .lines()
        .enumerate()
        .skip(3)
        .flat_map(|(i, line)| line.split_whitespace().map(move |t| (i + 1, t)))
        .collect();
    let mut tok = Tokens { items, pos: 0, path };
    let mut data = VtkData::default();
    let mut section = "";
    let mut npoints_data = 0usize;
    while let Some((line, word)) = tok.peek() {
        tok.pos += 1;
        match word.to_ascii_uppercase().as_str() {
            "DATASET" => {
                let (l, kind) = tok.next()?;
                if !kind.eq_ignore_ascii_case("UNSTRUCTURED_GRID") {
                    return Err(Error::parse(path, l, "only UNSTRUCTURED_GRID datasets are supported"));
                }
            }
            "POINTS" => {
                let n: usize = tok.num("point count")?;
                tok.next()?;
                let v = tok.floats(3 * n)?;
                data.points = v.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
            }
            "CELLS" => {
                let n: usize = tok.num("cell count")?;
                let _size: usize = tok.num("cell list size")?;
                for _ in 0..n {
                    let (cl, k) = tok.next()?;
                    let k: usize = parse_num(path, cl, k, "cell size")?;
                    let mut ids = Vec::with_capacity(k);
                    for _ in 0..k {
                        let (l, t) = tok.next()?;
                        let id: usize = parse_num(path, l, t, "point index")?;
                        if id >= data.points.len() {
                            return Err(Error::parse(
                                path,
                                l,
                                format!("dangling vertex index {id} ({} points)", data.points.len()),
                            ));
                        }
                        ids.push(id);
                    }
                    data.cells.push((0, ids, cl));
                }
            }
            "CELL_TYPES" => {
                let n: usize = tok.num("cell type count")?;
                if n != data.cells.len() {
                    return Err(Error::parse(path, line, "CELL_TYPES count differs from CELLS"));
                }
                for c in data.cells.iter_mut() {
                    c.0 = tok.num("cell type")?;
                }
            }
            "POINT_DATA" => {
                npoints_data = tok.num("point data count")?;
                section = "point";
            }
            "CELL_DATA" => {
                npoints_data = tok.num("cell data count")?;
                section = "cell";
            }
            kw @ ("SCALARS" | "VECTORS" | "NORMALS" | "TENSORS") => {
                let (_, name) = tok.next()?;
                tok.next()?; // data type
                let (kind, comps) = match kw {
                    "SCALARS" => {
                        let comps = match tok.peek() {
                            Some((_, t)) if t.parse::<usize>().is_ok() => tok.num("components")?,
                            _ => 1,
                        };
                        if let Some((_, "LOOKUP_TABLE")) = tok.peek() {
                            tok.pos += 2;
                        }
                        (ArrayKind::Scalars, comps)
                    }
                    "TENSORS" => (ArrayKind::Tensors, 9),
                    _ => (ArrayKind::Vectors, 3),
                };
                let values = tok.floats(comps * npoints_data)?;
                if section == "point" {
                    data.point_data
                        .insert(name.to_string(), PointArray::new(name, kind, comps, values));
                }
            }
            "FIELD" => {
                tok.next()?; // field name
                let arrays: usize = tok.num("array count")?;
                for _ in 0..arrays {
                    let (_, name) = tok.next()?;
                    let comps: usize = tok.num("components")?;
                    let tuples: usize = tok.num("tuples")?;
                    tok.next()?;
                    let values = tok.floats(comps * tuples)?;
                    if section == "point" {
                        data.point_data
                            .insert(name.to_string(), PointArray::new(name, ArrayKind::Field, comps, values));
                    }
                }
            }
            "METADATA" => {
                // Skip until an empty-line-separated block ends; VTK writers put
                // INFORMATION records here which we do not need.
                while let Some((_, t)) = tok.peek() {
                    if ["POINT_DATA", "CELL_DATA", "SCALARS", "VECTORS", "FIELD", "TENSORS"].contains(&t) {
                        break;
                    }
                    tok.pos += 1;
                }
            }
            _ => return Err(Error::parse(path, line, format!("unexpected token {word:?}"))),
        }
    }
    Ok(data)
}

/// Writes a legacy ASCII VTK unstructured grid of tets with point data.
pub fn write_vtk(path: &Path, mesh: &TetMesh, title: &str, arrays: &[PointArray]) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let nt = mesh.tets().len();
    let _ = writeln!(s, "CELLS {nt} {}", nt * 5);
    for t in mesh.tets() {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    if !arrays.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
    }
    let fields: Vec<&PointArray> = arrays.iter().filter(|a| a.kind == ArrayKind::Field).collect();
    for a in arrays.iter().filter(|a| a.kind != ArrayKind::Field) {
        match a.kind {
            ArrayKind::Scalars => {
                let _ = writeln!(s, "SCALARS {} double {}\nLOOKUP_TABLE default", a.name, a.components);
            }
            ArrayKind::Vectors => {
                let _ = writeln!(s, "VECTORS {} double", a.name);
            }
            ArrayKind::Tensors => {
                let _ = writeln!(s, "TENSORS {} double", a.name);
            }
            ArrayKind::Field => unreachable!(),
        }
        write_tuples(&mut s, a);
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "FIELD FieldData {}", fields.len());
        for a in fields {
            let _ = writeln!(s, "{} {} {} double", a.name, a.components, a.values.len() / a.components);
            write_tuples(&mut s, a);
        }
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn write_tuples(s: &mut String, a: &PointArray) {
    for chunk in a.values.chunks(a.components) {
        let row: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn single_tet_tetgen_one_based() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "t.node", "4 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n");
        write(dir.path(), "t.ele", "# comment\n1 4 0\n1 1 2 3 4\n");
        let m = load_tet_mesh(&dir.path().join("t.node"), MeshFormat::TetgenNodeEle).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.tets().len(), 1);
        assert_eq!(m.boundary_faces().len(), 4);
        assert_eq!(m.tets()[0].iter().copied().max(), Some(3));
    }

    #[test]
    fn tetgen_zero_based_and_basename() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "t.node", "4 3 0 0\n0 0 0 0\n1 1 0 0\n2 0 1 0\n3 0 0 1\n");
        write(dir.path(), "t.ele", "1 4 0\n0 0 1 2 3\n");
        let m = load_tet_mesh(&dir.path().join("t"), MeshFormat::TetgenNodeEle).unwrap();
        assert_eq!(m.tets().len(), 1);
    }

    #[test]
    fn tetgen_dangling_index() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "t.node", "4 3 0 0\n0 0 0 0\n1 1 0 0\n2 0 1 0\n3 0 0 1\n");
        write(dir.path(), "t.ele", "1 4 0\n0 0 1 2 99\n");
        let err = load_tet_mesh(&dir.path().join("t.ele"), MeshFormat::TetgenNodeEle).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("dangling"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tetgen_zero_volume_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "t.node", "4 3 0 0\n0 0 0 0\n1 1 0 0\n2 0 1 0\n3 1 1 0\n");
        write(dir.path(), "t.ele", "1 4 0\n\n0 0 1 2 3\n");
        let err = load_tet_mesh(&dir.path().join("t.ele"), MeshFormat::TetgenNodeEle).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn tetgen_parse_failure() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "t.node", "4 3 0 0\n0 0 0 0\n1 1 zz 0\n2 0 1 0\n3 0 0 1\n");
        write(dir.path(), "t.ele", "1 4 0\n0 0 1 2 3\n");
        let err = load_tet_mesh(&dir.path().join("t.ele"), MeshFormat::TetgenNodeEle).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_tet_mesh(Path::new("/nonexistent/mesh.vtk"), MeshFormat::VtkLegacy).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Io);
    }

    #[test]
    fn tetgen_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::twisted_bar(3, 2, 0.5);
        write_tetgen(&dir.path().join("bar"), &mesh).unwrap();
        let back = load_tet_mesh(&dir.path().join("bar.node"), MeshFormat::TetgenNodeEle).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.tets(), mesh.tets());
    }

    #[test]
    fn vtk_round_trip_with_point_data() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::cube_five_tets();
        let n = mesh.num_vertices();
        let arrays = vec![
            PointArray::new("energy", ArrayKind::Scalars, 1, (0..n).map(|i| i as f64 * 0.1).collect()),
            PointArray::new("dir", ArrayKind::Vectors, 3, (0..3 * n).map(|i| (i as f64).sin()).collect()),
            PointArray::new("S", ArrayKind::Tensors, 9, (0..9 * n).map(|i| 1.0 / (i as f64 + 1.0)).collect()),
            PointArray::new("odeco", ArrayKind::Field, 15, (0..15 * n).map(|i| (i as f64).cos()).collect()),
        ];
        let path = dir.path().join("cube.vtk");
        write_vtk(&path, &mesh, "cube", &arrays).unwrap();
        let data = read_vtk(&path).unwrap();
        for a in &arrays {
            assert_eq!(&data.point_data[&a.name], a);
        }
        let back = data.into_mesh(&path).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.tets(), mesh.tets());
    }

    #[test]
    fn vtk_dangling_index() {
        let dir = tempfile::tempdir().unwrap();
        let body = "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 4 double\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nCELLS 1 5\n4 0 1 2 99\nCELL_TYPES 1\n10\n";
        let p = write(dir.path(), "bad.vtk", body);
        let err = load_tet_mesh(&p, MeshFormat::VtkLegacy).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 11, .. }), "{err:?}");
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(MeshFormat::from_path(Path::new("a.vtk")), Some(MeshFormat::VtkLegacy));
        assert_eq!(MeshFormat::from_path(Path::new("a.ele")), Some(MeshFormat::TetgenNodeEle));
        assert_eq!(MeshFormat::from_path(Path::new("a.obj")), None);
    }
}
