//! Spatial hash over a point set: axis-aligned cells of fixed side, used for
//! disk-graph construction (cell side = disk radius, 3^d neighbor scan),
//! ball / nearest-point queries, and high-intensity growth runs that never
//! materialize the full adjacency.

use crate::point_process::PointSet;

#[derive(Debug, Clone)]
pub struct CellGrid {
    dim: usize,
    cell: f64,
    lower: Vec<f64>,
    cells_per_axis: Vec<i64>,
    // bucket index -> point ids, flattened row-major over the cell lattice
    buckets: Vec<Vec<u32>>,
}

impl CellGrid {
    pub fn build(ps: &PointSet, cell: f64) -> CellGrid {
        assert!(cell > 0.0 && cell.is_finite());
        let dim = ps.dim();
        let w = ps.window();
        let lower: Vec<f64> = (0..dim).map(|a| w.lower(a)).collect();
        let cells_per_axis: Vec<i64> = (0..dim)
            .map(|_| ((2.0 * w.half_width()) / cell).ceil().max(1.0) as i64)
            .collect();
        let total: usize = cells_per_axis.iter().product::<i64>() as usize;
        let mut buckets = vec![Vec::new(); total];
        let mut grid = CellGrid {
            dim,
            cell,
            lower,
            cells_per_axis,
            buckets: Vec::new(),
        };
        for (i, p) in ps.iter_points().enumerate() {
            let idx = grid.linear_index(&grid.cell_of(p));
            buckets[idx].push(i as u32);
        }
        grid.buckets = buckets;
        grid
    }

    pub fn cell_side(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: &[f64]) -> Vec<i64> {
        (0..self.dim)
            .map(|a| {
                let c = ((p[a] - self.lower[a]) / self.cell).floor() as i64;
                c.clamp(0, self.cells_per_axis[a] - 1)
            })
            .collect()
    }

    fn linear_index(&self, cell: &[i64]) -> usize {
        let mut idx = 0i64;
        for (per_axis, c) in self.cells_per_axis.iter().zip(cell) {
            idx = idx * per_axis + c;
        }
        idx as usize
    }

    /// Visits every point id whose cell intersects the axis-aligned box
    /// `center ± radius`. The caller filters by exact distance.
    pub fn for_candidates<F: FnMut(u32)>(&self, center: &[f64], radius: f64, mut f: F) {
        let lo: Vec<i64> = (0..self.dim)
            .map(|a| {
                (((center[a] - radius - self.lower[a]) / self.cell).floor() as i64)
                    .clamp(0, self.cells_per_axis[a] - 1)
            })
            .collect();
        let hi: Vec<i64> = (0..self.dim)
            .map(|a| {
                (((center[a] + radius - self.lower[a]) / self.cell).floor() as i64)
                    .clamp(0, self.cells_per_axis[a] - 1)
            })
            .collect();
        let mut cur = lo.clone();
        loop {
            for &id in &self.buckets[self.linear_index(&cur)] {
                f(id);
            }
            // odometer over the cell box
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    for (a, c) in cur.iter_mut().enumerate().skip(axis + 1) {
                        *c = lo[a];
                    }
                    break;
                }
            }
        }
    }

    /// Ids of points within `radius` of `center`; strict inequality when
    /// `strict` is set, non-strict otherwise.
    pub fn points_within(
        &self,
        ps: &PointSet,
        center: &[f64],
        radius: f64,
        strict: bool,
    ) -> Vec<u32> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_candidates(center, radius, |id| {
            let d2 = dist2(ps.point(id as usize), center);
            let hit = if strict { d2 < r2 } else { d2 <= r2 };
            if hit {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    /// Nearest point to `center` among those accepted by `keep`, by expanding
    /// ring search. Ties in distance break toward the lexicographically
    /// smaller coordinate vector. Returns `(id, squared distance)`.
    pub fn nearest<F: Fn(u32) -> bool>(
        &self,
        ps: &PointSet,
        center: &[f64],
        keep: F,
    ) -> Option<(u32, f64)> {
        let home: Vec<i64> = (0..self.dim)
            .map(|a| ((center[a] - self.lower[a]) / self.cell).floor() as i64)
            .collect();
        let max_ring: i64 = (0..self.dim)
            .map(|a| {
                let lo = home[a].max(0);
                let hi = (self.cells_per_axis[a] - 1 - home[a]).max(0);
                lo.max(hi) + 1
            })
            .max()
            .unwrap_or(0);
        let mut best: Option<(u32, f64)> = None;
        for ring in 0..=max_ring {
            // Any point in a shell at Chebyshev cell distance `ring` is at
            // Euclidean distance at least (ring - 1) * cell from the center,
            // so once the best candidate beats that bound we can stop.
            if let Some((_, d2)) = best {
                let floor = (ring - 1).max(0) as f64 * self.cell;
                if d2.sqrt() <= floor {
                    break;
                }
            }
            self.for_shell(&home, ring, |bucket| {
                for &id in bucket {
                    if !keep(id) {
                        continue;
                    }
                    let d2 = dist2(ps.point(id as usize), center);
                    let better = match best {
                        None => true,
                        Some((bid, bd2)) => {
                            d2 < bd2
                                || (d2 == bd2
                                    && lex_less(ps.point(id as usize), ps.point(bid as usize)))
                        }
                    };
                    if better {
                        best = Some((id, d2));
                    }
                }
            });
        }
        best
    }

    /// Visits the buckets of cells at Chebyshev distance exactly `ring` from
    /// `home`, clamped to the lattice.
    fn for_shell<F: FnMut(&[u32])>(&self, home: &[i64], ring: i64, mut f: F) {
        let mut offset = vec![-ring; self.dim];
        'outer: loop {
            if offset.iter().any(|o| o.abs() == ring) || ring == 0 {
                let mut cell = Vec::with_capacity(self.dim);
                let mut ok = true;
                for a in 0..self.dim {
                    let c = home[a] + offset[a];
                    if c < 0 || c >= self.cells_per_axis[a] {
                        ok = false;
                        break;
                    }
                    cell.push(c);
                }
                if ok {
                    f(&self.buckets[self.linear_index(&cell)]);
                }
            }
            if ring == 0 {
                return;
            }
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                if offset[axis] < ring {
                    offset[axis] += 1;
                    for o in offset.iter_mut().skip(axis + 1) {
                        *o = -ring;
                    }
                    break;
                }
            }
        }
    }
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}
