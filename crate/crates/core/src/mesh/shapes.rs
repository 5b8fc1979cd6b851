//! Procedural tetrahedral meshes: boxes, twisted bars, cylinders, balls and
//! an L-shaped bracket. Used by tests, benchmarks and the CLI demos.

use std::collections::HashMap;

use super::{TetMesh, Vec3};

/// The unit cube split into five tetrahedra.
pub fn cube_five_tets() -> TetMesh {
    let vertices = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let tets = vec![[1, 2, 4, 7], [0, 1, 2, 4], [3, 1, 2, 7], [5, 1, 4, 7], [6, 2, 4, 7]];
    TetMesh::new(vertices, tets).expect("cube is valid")
}

/// Box `[0, size]` with `cells` hexahedra per axis, each split into six tets
/// sharing the cell's main diagonal.
pub fn box_grid(cells: [usize; 3], size: [f64; 3]) -> TetMesh {
    masked_grid(cells, size, |_, _, _| true)
}

/// Like [`box_grid`] but keeps only the cells accepted by `keep`; unused
/// vertices are dropped.
pub fn masked_grid(
    cells: [usize; 3],
    size: [f64; 3],
    keep: impl Fn(usize, usize, usize) -> bool,
) -> TetMesh {
    let [nx, ny, nz] = cells;
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tets = Vec::new();
    let mut vertex = |i: usize, j: usize, k: usize, vertices: &mut Vec<Vec3>| {
        *remap.entry(id(i, j, k)).or_insert_with(|| {
            vertices.push(Vec3::new(
                size[0] * i as f64 / nx as f64,
                size[1] * j as f64 / ny as f64,
                size[2] * k as f64 / nz as f64,
            ));
            vertices.len() - 1
        })
    };
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !keep(i, j, k) {
                    continue;
                }
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [0usize; 4];
                    tet[0] = vertex(c[0], c[1], c[2], &mut vertices);
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = vertex(c[0], c[1], c[2], &mut vertices);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    TetMesh::new(vertices, tets).expect("grid is valid")
}

/// Applies `f` to every vertex position and rebuilds the mesh.
pub fn map_vertices(mesh: &TetMesh, f: impl Fn(&Vec3) -> Vec3) -> TetMesh {
    let vertices = mesh.vertices().iter().map(f).collect();
    TetMesh::new(vertices, mesh.tets().to_vec()).expect("mapped mesh is valid")
}

/// Bar `[0, 4] x [-0.5, 0.5]^2` whose cross-section rotates linearly by
/// `twist` radians along x.
pub fn twisted_bar(n_long: usize, n_cross: usize, twist: f64) -> TetMesh {
    let grid = box_grid([n_long, n_cross, n_cross], [4.0, 1.0, 1.0]);
    map_vertices(&grid, |p| {
        let (y, z) = (p.y - 0.5, p.z - 0.5);
        let a = twist * p.x / 4.0;
        Vec3::new(p.x, a.cos() * y - a.sin() * z, a.sin() * y + a.cos() * z)
    })
}

/// Solid cylinder of the given radius along z from 0 to `length`, built by
/// mapping a square grid onto the disk.
pub fn cylinder(radius: f64, length: f64, n_cross: usize, n_axial: usize) -> TetMesh {
    let grid = box_grid([n_cross, n_cross, n_axial], [2.0, 2.0, length]);
    map_vertices(&grid, |p| {
        let (x, y) = (p.x - 1.0, p.y - 1.0);
        Vec3::new(
            radius * x * (1.0 - 0.5 * y * y).sqrt(),
            radius * y * (1.0 - 0.5 * x * x).sqrt(),
            p.z,
        )
    })
}

/// Icosphere surface of the given radius coned to a center vertex.
pub fn icosphere_ball(subdivisions: usize, radius: f64) -> TetMesh {
    let (surface, faces) = icosphere(subdivisions);
    let mut vertices: Vec<Vec3> = surface.into_iter().map(|p| p * radius).collect();
    let center = vertices.len();
    vertices.push(Vec3::zeros());
    let tets = faces.iter().map(|f| [center, f[0], f[1], f[2]]).collect();
    TetMesh::new(vertices, tets).expect("ball is valid")
}

/// Unit icosphere vertices and outward triangles.
pub fn icosphere(subdivisions: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoint.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut vertices);
            let bc = mid(f[1], f[2], &mut vertices);
            let ca = mid(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// L-shaped prism: a `2n x 2n` footprint minus its upper-right quadrant,
/// extruded along z. The inner corner is a concave crease along z.
pub fn l_bracket(n: usize, height_cells: usize) -> TetMesh {
    masked_grid(
        [2 * n, 2 * n, height_cells],
        [2.0, 2.0, height_cells as f64 / n as f64],
        |i, j, _| !(i >= n && j >= n),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let m = cube_five_tets();
        assert_eq!(m.num_vertices(), 8);
        assert_eq!(m.tets().len(), 5);
        assert_eq!(m.boundary_faces().len(), 12);
    }

    #[test]
    fn cube_volume_is_one() {
        let total: f64 = cube_five_tets().tet_volumes().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let total: f64 = box_grid([3, 4, 5], [1.0, 2.0, 3.0]).tet_volumes().iter().sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn grid_counts() {
        let m = box_grid([2, 3, 4], [1.0, 1.0, 1.0]);
        assert_eq!(m.num_vertices(), 3 * 4 * 5);
        assert_eq!(m.tets().len(), 6 * 24);
        // Two triangles per boundary quad.
        assert_eq!(m.boundary_faces().len(), 2 * 2 * (2 * 3 + 3 * 4 + 2 * 4));
    }

    #[test]
    fn ball_is_closed() {
        let m = icosphere_ball(2, 1.0);
        assert_eq!(m.boundary_faces().len(), 320);
        assert_eq!(m.num_vertices(), 163);
    }

    #[test]
    fn bracket_drops_quadrant() {
        let m = l_bracket(2, 2);
        assert_eq!(m.tets().len(), 6 * 12 * 2);
    }
}
