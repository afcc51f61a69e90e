//! Uniform grids, obstacles and node classification.

use alloc::{collections::VecDeque, string::ToString, vec, vec::Vec};

use crate::error::{Error, Result};
use crate::math::{hypot, sqrt};
use crate::wulff::WulffShape;

/// Free nodes closer than this fraction of `h` to the obstacle are snapped onto it.
pub const PIN_FRACTION: f64 = 1e-3;

/// Minimal relative distance from the obstacle bounding box to the box edge.
pub const MARGIN_FRACTION: f64 = 0.25;

/// Minimal ratio of box half-width to obstacle circumradius.
pub const TRUNCATION_RATIO: f64 = 8.0;

/// Uniform 2D node grid. Node `(i, j)` sits at `origin + h·(i, j)` and is
/// stored at index `j·nx + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub h: f64,
}

impl Grid2 {
    pub fn new(nx: usize, ny: usize, origin: [f64; 2], h: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidParameter("grid needs at least 3 nodes per axis".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        Ok(Self { nx, ny, origin, h })
    }

    /// Square box `center ± half_width` split into `cells` cells per axis.
    pub fn square(center: [f64; 2], half_width: f64, cells: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter("half width must be positive".into()));
        }
        let h = 2.0 * half_width / cells as f64;
        Self::new(cells + 1, cells + 1, [center[0] - half_width, center[1] - half_width], h)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + self.h * i as f64, self.origin[1] + self.h * j as f64]
    }

    #[inline]
    pub fn point_of(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        self.point(i, j)
    }

    pub fn width(&self) -> f64 {
        self.h * (self.nx - 1) as f64
    }

    pub fn height(&self) -> f64 {
        self.h * (self.ny - 1) as f64
    }

    pub fn center(&self) -> [f64; 2] {
        [self.origin[0] + 0.5 * self.width(), self.origin[1] + 0.5 * self.height()]
    }

    pub fn on_edge(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Samples `f` at every node.
    pub fn sample(&self, mut f: impl FnMut([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.point_of(k))).collect()
    }
}

/// Uniform 3D node grid, index `(k·ny + j)·nx + i`. Only field-based
/// diagnostics are provided in three dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid3 {
    pub n: [usize; 3],
    pub origin: [f64; 3],
    pub h: f64,
}

impl Grid3 {
    pub fn cube(center: [f64; 3], half_width: f64, cells: usize) -> Result<Self> {
        if cells < 2 || !(half_width > 0.0) {
            return Err(Error::InvalidParameter("invalid cube grid".into()));
        }
        let h = 2.0 * half_width / cells as f64;
        Ok(Self {
            n: [cells + 1; 3],
            origin: [center[0] - half_width, center[1] - half_width, center[2] - half_width],
            h,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + self.h * i as f64,
            self.origin[1] + self.h * j as f64,
            self.origin[2] + self.h * k as f64,
        ]
    }

    pub fn sample(&self, mut f: impl FnMut([f64; 3]) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for i in 0..self.n[0] {
                    out.push(f(self.point(i, j, k)));
                }
            }
        }
        out
    }
}

/// Simple polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl Polygon {
    /// Accepts either orientation; stores counter-clockwise.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("polygon vertex is not finite".into()));
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-14 {
            return Err(Error::InvalidParameter("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned square with the given center and side length.
    pub fn square(center: [f64; 2], side: f64) -> Result<Self> {
        let s = 0.5 * side;
        Self::new(vec![
            [center[0] - s, center[1] - s],
            [center[0] + s, center[1] - s],
            [center[0] + s, center[1] + s],
            [center[0] - s, center[1] + s],
        ])
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> [f64; 2] {
        let v = &self.vertices;
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for k in 0..v.len() {
            let (p, q) = (v[k], v[(k + 1) % v.len()]);
            let c = p[0] * q[1] - q[0] * p[1];
            a += c;
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [cx / (3.0 * a), cy / (3.0 * a)]
    }

    pub fn is_convex(&self) -> bool {
        let v = &self.vertices;
        let m = v.len();
        (0..m).all(|k| {
            let (a, b, c) = (v[k], v[(k + 1) % m], v[(k + 2) % m]);
            (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) >= -1e-14
        })
    }

    /// Edges as `(outward unit normal, offset)` with `⟨n, x⟩ ≤ offset` inside.
    pub fn half_planes(&self) -> Vec<([f64; 2], f64)> {
        let v = &self.vertices;
        (0..v.len())
            .map(|k| {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let l = hypot(dx, dy);
                let n = [dy / l, -dx / l];
                (n, n[0] * a[0] + n[1] * a[1])
            })
            .collect()
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[j]);
            if (a[1] > x[1]) != (b[1] > x[1])
                && x[0] < (b[0] - a[0]) * (x[1] - a[1]) / (b[1] - a[1]) + a[0]
            {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    /// Euclidean signed distance, negative inside.
    pub fn signed_distance(&self, x: [f64; 2]) -> f64 {
        let v = &self.vertices;
        let mut best = f64::INFINITY;
        for k in 0..v.len() {
            let (a, b) = (v[k], v[(k + 1) % v.len()]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let t = (((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            best = best.min(hypot(x[0] - a[0] - t * dx, x[1] - a[1] - t * dy));
        }
        if self.contains(x) {
            -best
        } else {
            best
        }
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let m = v.len();
    0.5 * (0..m)
        .map(|k| {
            let (p, q) = (v[k], v[(k + 1) % m]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

/// The complement of the flow domain.
#[derive(Clone, Debug)]
pub enum Obstacle {
    Wulff(WulffShape),
    Polygon(Polygon),
}

impl Obstacle {
    /// Level function, `≤ 0` exactly on the obstacle.
    pub fn level(&self, x: [f64; 2]) -> f64 {
        match self {
            Obstacle::Wulff(w) => w.level(&x),
            Obstacle::Polygon(p) => p.signed_distance(x),
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match self {
            Obstacle::Wulff(w) => [w.center()[0], w.center()[1]],
            Obstacle::Polygon(p) => p.centroid(),
        }
    }

    /// `[xmin, xmax, ymin, ymax]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        match self {
            Obstacle::Wulff(w) => {
                let c = w.center();
                let ex = w.extent(&[1.0, 0.0]);
                let ey = w.extent(&[0.0, 1.0]);
                [c[0] - ex, c[0] + ex, c[1] - ey, c[1] + ey]
            }
            Obstacle::Polygon(p) => p.vertices().iter().fold(
                [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
                |b, v| [b[0].min(v[0]), b[1].max(v[0]), b[2].min(v[1]), b[3].max(v[1])],
            ),
        }
    }

    /// Euclidean radius of the smallest ball about [`Obstacle::center`]
    /// containing the obstacle.
    pub fn circumradius(&self) -> f64 {
        match self {
            Obstacle::Wulff(w) => w.circumradius(),
            Obstacle::Polygon(p) => {
                let c = p.centroid();
                p.vertices().iter().map(|v| hypot(v[0] - c[0], v[1] - c[1])).fold(0.0, f64::max)
            }
        }
    }

    /// Fraction `θ ∈ [0, 1]` along `a → b` where the level function vanishes,
    /// assuming `level(a) > 0 ≥ level(b)`.
    pub fn crossing(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let at = |t: f64| self.level([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        illinois(at, 0.0, 1.0, self.level(a), self.level(b))
    }
}

/// Illinois-modified regula falsi on a bracketing interval.
pub(crate) fn illinois(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 || fa.signum() == fb.signum() {
        return b;
    }
    let mut side = 0i8;
    let mut c = b;
    for _ in 0..100 {
        c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < 1e-15 {
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Obstacle,
    OuterBoundary,
}

/// Neighbour directions used by [`GridDomain::cut`]: `+x, −x, +y, −y`.
pub const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// A grid together with an obstacle and the induced node classification.
#[derive(Clone, Debug)]
pub struct GridDomain {
    grid: Grid2,
    obstacle: Obstacle,
    kinds: Vec<NodeKind>,
    level: Vec<f64>,
    cuts: Vec<[Option<f64>; 4]>,
}

impl GridDomain {
    /// Classifies nodes and validates the margin, truncation and
    /// connectivity rules.
    pub fn new(grid: Grid2, obstacle: Obstacle) -> Result<Self> {
        let domain = Self::build(grid, obstacle)?;
        domain.validate()?;
        Ok(domain)
    }

    /// Classification only. Intended for small test problems that
    /// deliberately violate the truncation rule.
    pub fn new_unvalidated(grid: Grid2, obstacle: Obstacle) -> Result<Self> {
        let domain = Self::build(grid, obstacle)?;
        domain.check_connected()?;
        Ok(domain)
    }

    fn build(grid: Grid2, obstacle: Obstacle) -> Result<Self> {
        let level = grid.sample(|x| obstacle.level(x));
        let mut inside: Vec<bool> = level.iter().map(|l| *l <= 0.0).collect();
        if !inside.iter().any(|b| *b) {
            return Err(Error::InvalidDomain("obstacle contains no grid node".into()));
        }
        let mut cuts = vec![[None; 4]; grid.len()];
        for pass in 0..2 {
            let mut pinned = Vec::new();
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let a = grid.index(i, j);
                    if inside[a] {
                        continue;
                    }
                    for (d, (di, dj)) in DIRECTIONS.iter().enumerate() {
                        let (ni, nj) = (i as isize + di, j as isize + dj);
                        if ni < 0 || nj < 0 || ni as usize >= grid.nx || nj as usize >= grid.ny {
                            continue;
                        }
                        let b = grid.index(ni as usize, nj as usize);
                        if !inside[b] {
                            cuts[a][d] = None;
                            continue;
                        }
                        let t = if level[b] > 0.0 {
                            1.0
                        } else {
                            obstacle.crossing(grid.point(i, j), grid.point(ni as usize, nj as usize))
                        };
                        cuts[a][d] = Some(t);
                        if pass == 0 && t < PIN_FRACTION {
                            pinned.push(a);
                        }
                    }
                }
            }
            if pinned.is_empty() {
                break;
            }
            for a in pinned {
                inside[a] = true;
                cuts[a] = [None; 4];
            }
        }
        let kinds = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                if inside[k] {
                    NodeKind::Obstacle
                } else if grid.on_edge(i, j) {
                    NodeKind::OuterBoundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        Ok(Self { grid, obstacle, kinds, level, cuts })
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let bb = self.obstacle.bounding_box();
        let width = g.width().min(g.height());
        let margin = MARGIN_FRACTION * width;
        let (x0, x1) = (g.origin[0], g.origin[0] + g.width());
        let (y0, y1) = (g.origin[1], g.origin[1] + g.height());
        if bb[0] - x0 < margin || x1 - bb[1] < margin || bb[2] - y0 < margin || y1 - bb[3] < margin {
            return Err(Error::InvalidDomain(
                "obstacle violates the 25% margin to the box edge".to_string(),
            ));
        }
        let c = self.obstacle.center();
        let half = [(c[0] - x0).min(x1 - c[0]), (c[1] - y0).min(y1 - c[1])];
        if half[0].min(half[1]) < TRUNCATION_RATIO * self.obstacle.circumradius() * (1.0 - 1e-12) {
            return Err(Error::InvalidDomain(
                "box half-width is below 8 obstacle circumradii".to_string(),
            ));
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let g = &self.grid;
        let free: Vec<usize> =
            (0..g.len()).filter(|k| self.kinds[*k] == NodeKind::Interior).collect();
        let Some(&start) = free.first() else {
            return Err(Error::InvalidDomain("no interior nodes".into()));
        };
        let mut seen = vec![false; g.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            let (i, j) = g.ij(k);
            for (di, dj) in DIRECTIONS {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni as usize >= g.nx || nj as usize >= g.ny {
                    continue;
                }
                let m = g.index(ni as usize, nj as usize);
                if !seen[m] && self.kinds[m] == NodeKind::Interior {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
        if count != free.len() {
            return Err(Error::InvalidDomain("interior nodes are not connected".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn obstacle(&self) -> &Obstacle {
        &self.obstacle
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    #[inline]
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    /// Obstacle level function sampled at the nodes.
    pub fn level(&self) -> &[f64] {
        &self.level
    }

    /// Distance (in units of `h`) from a non-obstacle node to the obstacle
    /// along direction `dir` of [`DIRECTIONS`], if the neighbour there is an
    /// obstacle node.
    #[inline]
    pub fn cut(&self, idx: usize, dir: usize) -> Option<f64> {
        self.cuts[idx][dir]
    }

    /// Non-obstacle nodes adjacent to the obstacle.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|k| self.kinds[*k] != NodeKind::Obstacle && self.cuts[*k].iter().any(Option::is_some))
            .collect()
    }

    /// Area of the non-obstacle part of the box, counted per node.
    pub fn interior_measure(&self) -> f64 {
        let h2 = self.grid.h * self.grid.h;
        self.kinds.iter().filter(|k| **k != NodeKind::Obstacle).count() as f64 * h2
    }

    /// Gradient of the level function at `x` by central differences; used
    /// for interface normals.
    pub fn level_normal(&self, x: [f64; 2]) -> [f64; 2] {
        let e = 1e-7 * self.grid.h.max(1e-300);
        let gx = self.obstacle.level([x[0] + e, x[1]]) - self.obstacle.level([x[0] - e, x[1]]);
        let gy = self.obstacle.level([x[0], x[1] + e]) - self.obstacle.level([x[0], x[1] - e]);
        let l = sqrt(gx * gx + gy * gy);
        [gx / l, gy / l]
    }
}
