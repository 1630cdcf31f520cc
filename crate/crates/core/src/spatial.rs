//! Uniform-grid broad phase over a fixed rectangle.
//!
//! Entries are registered by axis-aligned bounds and may occupy several cells;
//! positions outside the rectangle are clamped to the border cells, so queries
//! never miss an entry, they only lose selectivity.

use crate::geom::Vec2;

#[derive(Clone, Debug)]
pub struct UniformGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    nz: usize,
    cells: Vec<Vec<u32>>,
}

impl UniformGrid {
    pub fn new(min: Vec2, max: Vec2, cell: f64) -> Self {
        assert!(cell > 0.0);
        let nx = (((max.x - min.x) / cell).ceil() as usize).max(1);
        let nz = (((max.z - min.z) / cell).ceil() as usize).max(1);
        Self {
            origin: min,
            cell,
            nx,
            nz,
            cells: vec![Vec::new(); nx * nz],
        }
    }

    pub fn clear(&mut self) {
        for c in &mut self.cells {
            c.clear();
        }
    }

    fn coord(&self, v: f64, origin: f64, n: usize) -> usize {
        let k = ((v - origin) / self.cell).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(n - 1)
        }
    }

    fn range(&self, lo: Vec2, hi: Vec2) -> (usize, usize, usize, usize) {
        (
            self.coord(lo.x, self.origin.x, self.nx),
            self.coord(hi.x, self.origin.x, self.nx),
            self.coord(lo.z, self.origin.z, self.nz),
            self.coord(hi.z, self.origin.z, self.nz),
        )
    }

    pub fn insert(&mut self, id: u32, lo: Vec2, hi: Vec2) {
        let (x0, x1, z0, z1) = self.range(lo, hi);
        for z in z0..=z1 {
            for x in x0..=x1 {
                self.cells[z * self.nx + x].push(id);
            }
        }
    }

    /// Ids registered in any cell touching the box, sorted and deduplicated.
    pub fn query(&self, lo: Vec2, hi: Vec2, out: &mut Vec<u32>) {
        out.clear();
        let (x0, x1, z0, z1) = self.range(lo, hi);
        for z in z0..=z1 {
            for x in x0..=x1 {
                out.extend_from_slice(&self.cells[z * self.nx + x]);
            }
        }
        if (x0, z0) != (x1, z1) {
            out.sort_unstable();
            out.dedup();
        } else {
            out.sort_unstable();
        }
    }
}
