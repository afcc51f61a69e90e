//! Triangle elements for the discrete energy.
//!
//! Every grid cell is covered twice, once per diagonal, by its four corner
//! triangles, each with weight half its area. On full cells this is the
//! bilinear element with vertex quadrature, and on the Euclidean `p = 2`
//! problem it reproduces the five-point Laplacian. Cells crossed by the
//! obstacle boundary are clipped at exact interface points.

use alloc::vec::Vec;

use crate::grid::{GridDomain, NodeKind, DIRECTIONS};

/// How the obstacle boundary enters the elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundaryFit {
    /// Triangles are clipped at the interface, which carries the obstacle value.
    #[default]
    CutCell,
    /// Obstacle nodes carry the obstacle value; the interface is ignored.
    Staircase,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Vertex {
    Node(usize),
    /// A point on the obstacle boundary.
    Interface,
}

/// Linear triangle: `∇v = Σ grads[k] · value(verts[k])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Element {
    pub verts: [Vertex; 3],
    pub grads: [[f64; 2]; 3],
    pub weight: f64,
}

impl Element {
    fn from_points(verts: [Vertex; 3], p: [[f64; 2]; 3], weight_factor: f64) -> Self {
        let twice = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grads = [
            [(p[1][1] - p[2][1]) / twice, (p[2][0] - p[1][0]) / twice],
            [(p[2][1] - p[0][1]) / twice, (p[0][0] - p[2][0]) / twice],
            [(p[0][1] - p[1][1]) / twice, (p[1][0] - p[0][0]) / twice],
        ];
        Self { verts, grads, weight: weight_factor * 0.5 * twice.abs() }
    }

    /// Element gradient for nodal values `v` and interface value `iface`.
    #[inline]
    pub fn gradient(&self, v: &[f64], iface: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..3 {
            let val = match self.verts[k] {
                Vertex::Node(n) => v[n],
                Vertex::Interface => iface,
            };
            g[0] += self.grads[k][0] * val;
            g[1] += self.grads[k][1] * val;
        }
        g
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub elements: Vec<Element>,
    pub fit: BoundaryFit,
}

impl Mesh {
    pub fn build(domain: &GridDomain, fit: BoundaryFit) -> Self {
        let g = domain.grid();
        let h = g.h;
        let min_area = 1e-14 * h * h;
        let mut elements = Vec::with_capacity(4 * (g.nx - 1) * (g.ny - 1));
        let free = |k: usize| domain.kind(k) != NodeKind::Obstacle;
        for j in 0..g.ny - 1 {
            for i in 0..g.nx - 1 {
                let c = [g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)];
                let all_free = c.iter().all(|k| free(*k));
                let none_free = !c.iter().any(|k| free(*k));
                if none_free {
                    continue;
                }
                for corner in 0..4 {
                    let tri = [c[corner], c[(corner + 1) % 4], c[(corner + 3) % 4]];
                    let pts = [g.point_of(tri[0]), g.point_of(tri[1]), g.point_of(tri[2])];
                    let verts = [Vertex::Node(tri[0]), Vertex::Node(tri[1]), Vertex::Node(tri[2])];
                    if all_free || fit == BoundaryFit::Staircase {
                        if !tri.iter().any(|k| free(*k)) {
                            continue;
                        }
                        elements.push(Element::from_points(verts, pts, 0.5));
                        continue;
                    }
                    clip(domain, tri, pts, min_area, &mut elements);
                }
            }
        }
        Self { elements, fit }
    }

    /// Sum of element weights, the discrete measure of the flow domain.
    pub fn measure(&self) -> f64 {
        self.elements.iter().map(|e| e.weight).sum()
    }
}

/// Interface point on the segment from free node `a` to obstacle node `b`.
fn interface(domain: &GridDomain, a: usize, b: usize) -> [f64; 2] {
    let g = domain.grid();
    let (pa, pb) = (g.point_of(a), g.point_of(b));
    let (ia, ja) = g.ij(a);
    let (ib, jb) = g.ij(b);
    let step = (ib as isize - ia as isize, jb as isize - ja as isize);
    let t = match DIRECTIONS.iter().position(|d| *d == step) {
        Some(dir) => domain.cut(a, dir).unwrap_or(1.0),
        None if domain.level()[b] > 0.0 => 1.0,
        None => domain.obstacle().crossing(pa, pb),
    };
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

fn clip(domain: &GridDomain, tri: [usize; 3], pts: [[f64; 2]; 3], min_area: f64, out: &mut Vec<Element>) {
    let free: Vec<usize> = (0..3).filter(|k| domain.kind(tri[*k]) != NodeKind::Obstacle).collect();
    let mut push = |verts: [Vertex; 3], p: [[f64; 2]; 3]| {
        let e = Element::from_points(verts, p, 0.5);
        if e.weight > 0.5 * min_area && e.grads.iter().flatten().all(|v| v.is_finite()) {
            out.push(e);
        }
    };
    match free.len() {
        3 => push([Vertex::Node(tri[0]), Vertex::Node(tri[1]), Vertex::Node(tri[2])], pts),
        1 => {
            let f = free[0];
            let (o1, o2) = ((f + 1) % 3, (f + 2) % 3);
            let i1 = interface(domain, tri[f], tri[o1]);
            let i2 = interface(domain, tri[f], tri[o2]);
            push([Vertex::Node(tri[f]), Vertex::Interface, Vertex::Interface], [pts[f], i1, i2]);
        }
        2 => {
            let o = (0..3).find(|k| !free.contains(k)).unwrap_or(0);
            let (f1, f2) = ((o + 1) % 3, (o + 2) % 3);
            let i1 = interface(domain, tri[f1], tri[o]);
            let i2 = interface(domain, tri[f2], tri[o]);
            push([Vertex::Node(tri[f1]), Vertex::Node(tri[f2]), Vertex::Interface], [pts[f1], pts[f2], i2]);
            push([Vertex::Node(tri[f1]), Vertex::Interface, Vertex::Interface], [pts[f1], i2, i1]);
        }
        _ => {}
    }
}
