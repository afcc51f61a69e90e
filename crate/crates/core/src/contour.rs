//! Marching squares with linear interpolation.

use alloc::vec::Vec;

use crate::grid::Grid2;
use crate::wulff::{Contour, Facet};

/// Facets of `{u = t}` oriented outward from `{u < t}`. Saddle cells are
/// resolved by the cell average. Shared edges are interpolated from the
/// lower-indexed node so adjacent cells produce identical points.
pub fn marching_squares(grid: &Grid2, u: &[f64], t: f64) -> Contour {
    let mut facets = Vec::new();
    let point = |a: usize, b: usize| -> [f64; 2] {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let (pa, pb) = (grid.point_of(a), grid.point_of(b));
        let s = (t - u[a]) / (u[b] - u[a]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    };
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            // counter-clockwise corners
            let c = [grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, j + 1), grid.index(i, j + 1)];
            let inside = c.map(|k| u[k] < t);
            let count = inside.iter().filter(|b| **b).count();
            if count == 0 || count == 4 {
                continue;
            }
            // crossings in counter-clockwise order, tagged exit (in → out) or entry
            let mut exits = Vec::with_capacity(2);
            let mut entries = Vec::with_capacity(2);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if inside[a] != inside[b] {
                    let p = point(c[a], c[b]);
                    if inside[a] {
                        exits.push((e, p));
                    } else {
                        entries.push((e, p));
                    }
                }
            }
            let mut push = |a: [f64; 2], b: [f64; 2]| {
                if a != b {
                    facets.push(Facet::new(a, b));
                }
            };
            if exits.len() == 1 {
                push(exits[0].1, entries[0].1);
                continue;
            }
            // saddle: pair each exit with the next entry when the center is
            // outside, otherwise with the entry after that
            let center_inside = 0.25 * c.iter().map(|k| u[*k]).sum::<f64>() < t;
            for &(e, p) in &exits {
                let next = |skip: usize| {
                    let mut ordered: Vec<&(usize, [f64; 2])> = entries.iter().collect();
                    ordered.sort_by_key(|(f, _)| (f + 4 - e) % 4);
                    ordered[skip].1
                };
                let target = if center_inside { next(0) } else { next(1) };
                push(p, target);
            }
        }
    }
    Contour::new(facets)
}
