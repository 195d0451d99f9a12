//! Interface meshes: extraction from a level function and brute-force
//! distance queries against the result.
//!
//! Extraction walks grid cells and emits crossings of the linear
//! interpolant: segment soup from the 16-case square table in 2D, triangle
//! soup from a six-tetrahedra cell split in 3D. The tetrahedra split follows
//! the main cell diagonal, which keeps faces of neighboring cells compatible
//! so closed surfaces come out watertight. Vertices shared between cells are
//! deduplicated through their grid-edge key.
//!
//! Values equal to zero count as positive throughout (`sign(0) = +1`), the
//! same convention the transport solvers use for phase labels.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry;
use crate::Vec3;

/// Connectivity of an extracted mesh. `Points` is what trajectory-based
/// interface tracking produces; grid extraction yields the other two.
#[derive(Debug, Clone)]
pub enum Elements {
    Points,
    Segments(Vec<[u32; 2]>),
    Triangles(Vec<[u32; 3]>),
}

/// Point sampling of an interface at one instant. Normals are unit vectors
/// oriented toward the negative phase; curvature entries may be NaN when the
/// producer has no second-derivative information (pure point clouds).
#[derive(Debug, Clone)]
pub struct InterfaceMesh {
    pub t: f64,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub curvatures: Vec<f64>,
    pub elements: Elements,
}

impl InterfaceMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Unsigned distance from `x` to the mesh, exact over the stored
    /// elements (brute force by design; meshes are small).
    pub fn distance(&self, x: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        match &self.elements {
            Elements::Points => {
                for p in &self.points {
                    best = best.min((x - p).norm());
                }
            }
            Elements::Segments(segs) => {
                for s in segs {
                    let a = self.points[s[0] as usize];
                    let b = self.points[s[1] as usize];
                    best = best.min(point_segment_distance(x, &a, &b));
                }
            }
            Elements::Triangles(tris) => {
                for t in tris {
                    let a = self.points[t[0] as usize];
                    let b = self.points[t[1] as usize];
                    let c = self.points[t[2] as usize];
                    best = best.min(point_triangle_distance(x, &a, &b, &c));
                }
            }
        }
        best
    }

    /// Index and distance of the nearest mesh vertex.
    pub fn nearest_vertex(&self, x: &Vec3) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = (x - p).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Signed distance taken from mesh geometry, with the sign borrowed from a
/// reference level function: `sign(sign_at(x)) * distance(x)`, `sign(0) = +1`.
pub fn signed_distance_oracle(
    mesh: &InterfaceMesh,
    sign_at: impl Fn(&Vec3) -> f64,
    x: &Vec3,
) -> f64 {
    let s = if sign_at(x) >= 0.0 { 1.0 } else { -1.0 };
    s * mesh.distance(x)
}

/// Symmetric Hausdorff distance between the vertex sets of two meshes.
pub fn hausdorff(a: &InterfaceMesh, b: &InterfaceMesh) -> f64 {
    let one_way = |from: &InterfaceMesh, to: &InterfaceMesh| {
        let mut worst: f64 = 0.0;
        for p in &from.points {
            worst = worst.max(to.nearest_vertex(p).1);
        }
        worst
    };
    one_way(a, b).max(one_way(b, a))
}

pub fn point_segment_distance(x: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (x - a).norm();
    }
    let s = ((x - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (x - (a + ab * s)).norm()
}

/// Exact point-triangle distance via barycentric region classification.
pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

struct VertexPool<'f> {
    field: &'f ScalarField,
    by_edge: HashMap<(u32, u32), u32>,
    points: Vec<Vec3>,
}

impl<'f> VertexPool<'f> {
    /// Crossing vertex on the grid edge between two nodes of opposite sign,
    /// positioned by the linear interpolant.
    fn vertex(&mut self, na: usize, nb: usize) -> u32 {
        let key = (na.min(nb) as u32, na.max(nb) as u32);
        if let Some(&id) = self.by_edge.get(&key) {
            return id;
        }
        let g = &self.field.grid;
        let [ia, ja, ka] = g.coords(na);
        let [ib, jb, kb] = g.coords(nb);
        let va = self.field.data[na];
        let vb = self.field.data[nb];
        let s = va / (va - vb);
        let pa = g.node(ia, ja, ka);
        let pb = g.node(ib, jb, kb);
        let id = self.points.len() as u32;
        self.points.push(pa + (pb - pa) * s);
        self.by_edge.insert(key, id);
        id
    }
}

#[inline]
fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Extract the zero set of `field` as a mesh with per-vertex normals and
/// curvatures. Errors when the field has a single sign or when the gradient
/// degenerates at a crossing.
pub fn extract_interface(field: &ScalarField) -> Result<InterfaceMesh> {
    let g = &field.grid;
    let mut pool = VertexPool { field, by_edge: HashMap::new(), points: Vec::new() };
    let elements = if g.dim == 2 {
        Elements::Segments(extract_segments(field, &mut pool))
    } else {
        Elements::Triangles(extract_triangles(field, &mut pool))
    };
    if pool.points.is_empty() {
        return Err(Error::EmptyInterface);
    }
    let mut normals = Vec::with_capacity(pool.points.len());
    let mut curvatures = Vec::with_capacity(pool.points.len());
    for p in &pool.points {
        normals.push(geometry::normal_at(field, p)?);
        curvatures.push(geometry::curvature_at(field, p)?);
    }
    Ok(InterfaceMesh { t: field.t, points: pool.points, normals, curvatures, elements })
}

fn extract_segments(field: &ScalarField, pool: &mut VertexPool) -> Vec<[u32; 2]> {
    let g = &field.grid;
    let mut segs = Vec::new();
    for j in 0..g.n[1] - 1 {
        for i in 0..g.n[0] - 1 {
            let na = g.idx(i, j, 0);
            let nb = g.idx(i + 1, j, 0);
            let nc = g.idx(i + 1, j + 1, 0);
            let nd = g.idx(i, j + 1, 0);
            let (va, vb, vc, vd) =
                (field.data[na], field.data[nb], field.data[nc], field.data[nd]);
            let mut case = 0usize;
            if positive(va) {
                case |= 1;
            }
            if positive(vb) {
                case |= 2;
            }
            if positive(vc) {
                case |= 4;
            }
            if positive(vd) {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            // edges: 0 bottom a-b, 1 right b-c, 2 top d-c, 3 left a-d
            let edge_nodes = [(na, nb), (nb, nc), (nd, nc), (na, nd)];
            let mut emit = |pool: &mut VertexPool, e0: usize, e1: usize| {
                let p0 = pool.vertex(edge_nodes[e0].0, edge_nodes[e0].1);
                let p1 = pool.vertex(edge_nodes[e1].0, edge_nodes[e1].1);
                segs.push([p0, p1]);
            };
            match case {
                1 | 14 => emit(pool, 0, 3),
                2 | 13 => emit(pool, 0, 1),
                3 | 12 => emit(pool, 1, 3),
                4 | 11 => emit(pool, 1, 2),
                6 | 9 => emit(pool, 0, 2),
                7 | 8 => emit(pool, 2, 3),
                5 | 10 => {
                    // saddle cell: connect through the center average
                    let center_pos = positive(0.25 * (va + vb + vc + vd));
                    let diag_pos = case == 5;
                    if center_pos == diag_pos {
                        emit(pool, 0, 1);
                        emit(pool, 2, 3);
                    } else {
                        emit(pool, 0, 3);
                        emit(pool, 1, 2);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segs
}

/// Kuhn split of a cell: six tetrahedra around the main diagonal, listed by
/// cube-corner bit codes. Identical in every cell, hence face-compatible
/// between neighbors.
const CELL_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn extract_triangles(field: &ScalarField, pool: &mut VertexPool) -> Vec<[u32; 3]> {
    let g = &field.grid;
    let mut tris = Vec::new();
    for k in 0..g.n[2] - 1 {
        for j in 0..g.n[1] - 1 {
            for i in 0..g.n[0] - 1 {
                let mut corner = [0usize; 8];
                for (b, slot) in corner.iter_mut().enumerate() {
                    *slot = g.idx(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
                }
                for tet in &CELL_TETS {
                    let nodes = [corner[tet[0]], corner[tet[1]], corner[tet[2]], corner[tet[3]]];
                    let mut mask = 0usize;
                    for (b, &n) in nodes.iter().enumerate() {
                        if positive(field.data[n]) {
                            mask |= 1 << b;
                        }
                    }
                    emit_tet(&nodes, mask, pool, &mut tris);
                }
            }
        }
    }
    tris
}

fn emit_tet(nodes: &[usize; 4], mask: usize, pool: &mut VertexPool, tris: &mut Vec<[u32; 3]>) {
    const FULL: usize = 0b1111;
    if mask == 0 || mask == FULL {
        return;
    }
    let ones: Vec<usize> = (0..4).filter(|b| mask & (1 << b) != 0).collect();
    match ones.len() {
        1 | 3 => {
            // one vertex separated from the other three
            let lone = if ones.len() == 1 {
                ones[0]
            } else {
                (0..4).find(|b| mask & (1 << b) == 0).unwrap()
            };
            let others: Vec<usize> = (0..4).filter(|&b| b != lone).collect();
            let v0 = pool.vertex(nodes[lone], nodes[others[0]]);
            let v1 = pool.vertex(nodes[lone], nodes[others[1]]);
            let v2 = pool.vertex(nodes[lone], nodes[others[2]]);
            tris.push([v0, v1, v2]);
        }
        2 => {
            let (a, b) = (ones[0], ones[1]);
            let zeros: Vec<usize> = (0..4).filter(|b| mask & (1 << b) == 0).collect();
            let (c, d) = (zeros[0], zeros[1]);
            let ac = pool.vertex(nodes[a], nodes[c]);
            let ad = pool.vertex(nodes[a], nodes[d]);
            let bd = pool.vertex(nodes[b], nodes[d]);
            let bc = pool.vertex(nodes[b], nodes[c]);
            tris.push([ac, ad, bd]);
            tris.push([ac, bd, bc]);
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn circle_extraction_is_accurate_and_oriented() {
        let h = 1.0 / 16.0;
        let g = Grid::new_2d([-1.53, -1.53], h, 50, 50).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x| x.norm() - 1.0);
        let mesh = extract_interface(&f).unwrap();
        assert!(mesh.len() > 40);
        for (p, n) in mesh.points.iter().zip(&mesh.normals) {
            assert!((p.norm() - 1.0).abs() <= 1.5 * h, "point off circle: {p:?}");
            // normals point inward, toward the negative phase
            assert!(n.dot(&(-p / p.norm())) > 0.98);
        }
        for k in &mesh.curvatures {
            assert!((k + 1.0).abs() < 0.2, "curvature {k}");
        }
        // closed curve away from the boundary: every vertex is used twice
        if let Elements::Segments(segs) = &mesh.elements {
            let mut uses = vec![0usize; mesh.len()];
            for s in segs {
                uses[s[0] as usize] += 1;
                uses[s[1] as usize] += 1;
            }
            assert!(uses.iter().all(|&u| u == 2));
        } else {
            panic!("2D extraction must yield segments");
        }
    }

    #[test]
    fn planar_zero_set_is_exact() {
        let g = Grid::new_2d([-1.0, -1.0], 0.25, 9, 9).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x| x.x + 0.1);
        let mesh = extract_interface(&f).unwrap();
        for p in &mesh.points {
            assert!((p.x + 0.1).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_sign_has_no_interface() {
        let g = Grid::new_2d([0.0, 0.0], 0.5, 4, 4).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |_| 1.0);
        assert!(matches!(extract_interface(&f), Err(Error::EmptyInterface)));
    }

    #[test]
    fn sphere_extraction_in_3d() {
        let h = 1.0 / 12.0;
        let g = Grid::new_3d([-1.51, -1.51, -1.51], h, [38, 38, 38]).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x| x.norm() - 1.0);
        let mesh = extract_interface(&f).unwrap();
        assert!(mesh.len() > 500);
        for (p, n) in mesh.points.iter().zip(&mesh.normals) {
            assert!((p.norm() - 1.0).abs() <= 1.5 * h);
            assert!(n.dot(&(-p / p.norm())) > 0.95);
        }
        let tris = match &mesh.elements {
            Elements::Triangles(t) => t.len(),
            _ => panic!("3D extraction must yield triangles"),
        };
        assert!(tris >= mesh.len());
        // watertight sphere: surface distance from inside points is consistent
        let d = mesh.distance(&Vec3::new(0.5, 0.0, 0.0));
        assert!((d - 0.5).abs() < 2.0 * h * h + 1e-3);
    }

    #[test]
    fn oracle_signs_follow_the_reference_field() {
        let h = 1.0 / 32.0;
        let g = Grid::new_2d([-1.53, -1.53], h, 99, 99).unwrap();
        let f = ScalarField::from_fn(g, 0.0, |x| x.norm() - 1.0);
        let mesh = extract_interface(&f).unwrap();
        let inside_negative = |x: &Vec3| x.norm() - 1.0;
        let d0 = signed_distance_oracle(&mesh, inside_negative, &Vec3::zeros());
        assert!((d0 + 1.0).abs() < 2.0 * h, "center distance {d0}");
        let outside_negative = |x: &Vec3| 1.0 - x.norm();
        let d3 = signed_distance_oracle(&mesh, outside_negative, &Vec3::new(3.0, 0.0, 0.0));
        assert!((d3 + 2.0).abs() < 2.0 * h, "far distance {d3}");
    }

    #[test]
    fn hausdorff_of_shifted_lines() {
        let g = Grid::new_2d([-1.0, -1.0], 0.125, 17, 17).unwrap();
        let a = extract_interface(&ScalarField::from_fn(g.clone(), 0.0, |x| x.x)).unwrap();
        let b = extract_interface(&ScalarField::from_fn(g, 0.0, |x| x.x - 0.3)).unwrap();
        let d = hausdorff(&a, &b);
        assert!((d - 0.3).abs() < 1e-12, "hausdorff {d}");
    }

    #[test]
    fn triangle_distance_covers_all_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        // face region
        assert!((point_triangle_distance(&Vec3::new(0.2, 0.2, 0.5), &a, &b, &c) - 0.5).abs() < 1e-14);
        // vertex region
        assert!(
            (point_triangle_distance(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c) - 2.0f64.sqrt()).abs()
                < 1e-14
        );
        // edge region
        assert!((point_triangle_distance(&Vec3::new(0.5, -2.0, 0.0), &a, &b, &c) - 2.0).abs() < 1e-14);
        // hypotenuse edge region
        let d = point_triangle_distance(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-14);
    }
}
