//! Gilbert disk graph on a Poisson sample: vertices are the sample points,
//! edges join pairs at Euclidean distance strictly below the disk radius.
//! The build uses a cell grid with cell side equal to the radius, so each
//! point only scans its 3^d neighboring cells. The largest component serves
//! as the finite-volume proxy for the infinite cluster.

use std::collections::VecDeque;
use std::io::Write;

use crate::cells::{dist2, CellGrid};
use crate::error::{Error, Result};
use crate::point_process::PointSet;

pub struct Geograph {
    points: PointSet,
    radius: f64,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    labels: Vec<u32>,
    comp_sizes: Vec<usize>,
    giant: Option<u32>,
    grid: CellGrid,
    warnings: Vec<String>,
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut x = x;
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Builds the disk graph of the given radius on the point set. Edges follow
/// the strict rule `0 < |u - v| < r`.
pub fn build_rgg(points: PointSet, radius: f64) -> Result<Geograph> {
    if !crate::params::positive_finite(radius) {
        return Err(Error::InvalidParameter(format!(
            "disk radius must be positive, got {radius}"
        )));
    }
    let mut warnings = Vec::new();
    if radius > points.window().half_width() / 10.0 {
        warnings.push(format!(
            "radius {radius} exceeds a tenth of the half-width {}; boundary effects may dominate",
            points.window().half_width()
        ));
    }
    let n = points.len();
    let grid = CellGrid::build(&points, radius);
    let r2 = radius * radius;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, row) in adj.iter_mut().enumerate() {
        let p = points.point(i);
        grid.for_candidates(p, radius, |j| {
            let j = j as usize;
            if j != i && dist2(points.point(j), p) < r2 {
                row.push(j as u32);
            }
        });
        row.sort_unstable();
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::new();
    offsets.push(0);
    for row in &adj {
        neighbors.extend_from_slice(row);
        offsets.push(neighbors.len());
    }

    // component labels via union-find, relabeled to 0..k in order of first
    // appearance so labels are deterministic
    let mut uf = UnionFind::new(n);
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            uf.union(i as u32, j);
        }
    }
    let mut labels = Vec::with_capacity(n);
    let mut comp_sizes: Vec<usize> = Vec::new();
    let mut root_label = std::collections::HashMap::new();
    for i in 0..n {
        let root = uf.find(i as u32);
        let label = *root_label.entry(root).or_insert_with(|| {
            comp_sizes.push(0usize);
            (comp_sizes.len() - 1) as u32
        });
        labels.push(label);
        comp_sizes[label as usize] += 1;
    }
    // giant: largest component; ties resolve to the one containing the
    // smallest vertex index, which is the first label reaching the max size
    let giant = comp_sizes
        .iter()
        .max()
        .copied()
        .map(|max| labels[(0..n).find(|&i| comp_sizes[labels[i] as usize] == max).unwrap()]);

    Ok(Geograph {
        points,
        radius,
        offsets,
        neighbors,
        labels,
        comp_sizes,
        giant,
        grid,
        warnings,
    })
}

/// The two labeled estimates of the giant-component density observable.
/// `vertex_density` counts giant vertices per unit volume inside the inner
/// box; `ball_hit_frequency` is the fraction of grid probes whose open ball
/// of `probe_radius` meets the giant component. They estimate different
/// quantities and are reported separately.
#[derive(Debug, Clone)]
pub struct ThetaEstimate {
    pub vertex_density: f64,
    /// 95% half-width for `vertex_density`, treating the inner count as
    /// Poisson.
    pub density_half_width: f64,
    /// `vertex_density / intensity`: the fraction of points that belong to
    /// the giant component.
    pub vertex_density_over_intensity: f64,
    pub ball_hit_frequency: f64,
    pub probe_radius: f64,
    pub probe_count: usize,
    pub giant_vertices_inner: usize,
    pub inner_volume: f64,
}

#[derive(Debug, Clone)]
pub struct StretchSample {
    pub direction: usize,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct StretchEstimate {
    /// Mean hop-per-distance ratio at the largest radius.
    pub rho_hat: f64,
    /// The bound 1 / r that every estimate must respect.
    pub lower_bound: f64,
    pub per_radius_mean: Vec<(f64, f64)>,
    pub table: Vec<StretchSample>,
}

impl Geograph {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Canonical edge list: pairs `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.len()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| (u as u32) < v)
                .map(move |&v| (u as u32, v))
        })
    }

    /// Per-vertex component labels.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.comp_sizes
    }

    /// Label of the largest component (`None` on the empty graph).
    pub fn giant(&self) -> Option<u32> {
        self.giant
    }

    pub fn giant_size(&self) -> usize {
        self.giant.map_or(0, |g| self.comp_sizes[g as usize])
    }

    pub fn giant_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.giant_size() as f64 / self.len() as f64
        }
    }

    pub fn in_giant(&self, v: usize) -> bool {
        self.giant == Some(self.labels[v])
    }

    /// The closest giant-component vertex to `x`; ties break toward the
    /// lexicographically smaller coordinate vector.
    pub fn nearest_giant_vertex(&self, x: &[f64]) -> Result<usize> {
        let giant = self.giant.ok_or(Error::Subcritical {
            fraction: 0.0,
            floor: 0.0,
        })?;
        self.grid
            .nearest(&self.points, x, |id| self.labels[id as usize] == giant)
            .map(|(id, _)| id as usize)
            .ok_or(Error::Subcritical {
                fraction: 0.0,
                floor: 0.0,
            })
    }

    /// Hop distance between two vertices; `None` when they are in different
    /// components (never encoded as a large number).
    pub fn graph_distance(&self, u: usize, v: usize) -> Result<Option<u32>> {
        let n = self.len();
        if u >= n || v >= n {
            return Err(Error::InvalidParameter(format!(
                "vertex id out of range: {u} or {v} >= {n}"
            )));
        }
        if self.labels[u] != self.labels[v] {
            return Ok(None);
        }
        if u == v {
            return Ok(Some(0));
        }
        let mut dist = vec![u32::MAX; n];
        dist[u] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(u as u32);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur as usize];
            for &next in self.neighbors(cur as usize) {
                if dist[next as usize] == u32::MAX {
                    dist[next as usize] = d + 1;
                    if next as usize == v {
                        return Ok(Some(d + 1));
                    }
                    queue.push_back(next);
                }
            }
        }
        Ok(None)
    }

    /// Hop distances from `source` to every vertex.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<u32>> {
        let n = self.len();
        let mut dist = vec![u32::MAX; n];
        dist[source] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(source as u32);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur as usize];
            for &next in self.neighbors(cur as usize) {
                if dist[next as usize] == u32::MAX {
                    dist[next as usize] = d + 1;
                    queue.push_back(next);
                }
            }
        }
        dist.into_iter()
            .map(|d| if d == u32::MAX { None } else { Some(d) })
            .collect()
    }

    /// Both giant-density estimators, measured on the box shrunk to
    /// `inner_fraction` per axis. Probes lie on a grid of the given pitch.
    pub fn estimate_theta(
        &self,
        inner_fraction: f64,
        pitch: f64,
        probe_radius: f64,
    ) -> Result<ThetaEstimate> {
        if !(0.0..=1.0).contains(&inner_fraction) || inner_fraction == 0.0 {
            return Err(Error::InvalidParameter(
                "inner_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.giant.is_none() {
            return Err(Error::Subcritical {
                fraction: 0.0,
                floor: 0.0,
            });
        }
        let inner = self.points.window().shrink(inner_fraction);
        let giant_inner = (0..self.len())
            .filter(|&v| self.in_giant(v) && inner.contains(self.points.point(v)))
            .count();
        let vol = inner.volume();
        let density = giant_inner as f64 / vol;
        let half_width = 1.96 * (giant_inner as f64).sqrt() / vol;

        let mut probes = 0usize;
        let mut hits = 0usize;
        for_grid_probes(&inner, pitch, |probe| {
            probes += 1;
            if let Ok(q) = self.nearest_giant_vertex(probe) {
                if dist2(self.points.point(q), probe) < probe_radius * probe_radius {
                    hits += 1;
                }
            }
        });
        Ok(ThetaEstimate {
            vertex_density: density,
            density_half_width: half_width,
            vertex_density_over_intensity: density / self.points.intensity(),
            ball_hit_frequency: hits as f64 / probes.max(1) as f64,
            probe_radius,
            probe_count: probes,
            giant_vertices_inner: giant_inner,
            inner_volume: vol,
        })
    }

    /// Hop-stretch estimates `dist(q(o), q(s u)) / s` for every direction and
    /// radius, aggregated at the largest radius. Directions must be unit
    /// vectors; radii must be increasing and fit inside the margin.
    pub fn estimate_stretch_factor(
        &self,
        directions: &[Vec<f64>],
        radii: &[f64],
        margin: f64,
    ) -> Result<StretchEstimate> {
        let d = self.points.dim();
        if directions.is_empty() || radii.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one direction and one radius".into(),
            ));
        }
        for u in directions {
            if u.len() != d || (dist2(u, &vec![0.0; d]).sqrt() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(
                    "directions must be unit vectors of the graph dimension".into(),
                ));
            }
        }
        if !radii.windows(2).all(|w| w[0] < w[1]) || radii[0] <= 0.0 {
            return Err(Error::InvalidParameter(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        let inner_limit = (1.0 - margin) * self.points.window().half_width();
        if *radii.last().unwrap() > inner_limit {
            return Err(Error::InvalidParameter(format!(
                "largest radius {} exceeds the inner box limit {}",
                radii.last().unwrap(),
                inner_limit
            )));
        }
        let center = self.points.window().center().to_vec();
        let q0 = self.nearest_giant_vertex(&center)?;
        let hops = self.bfs_distances(q0);
        let mut table = Vec::with_capacity(directions.len() * radii.len());
        for (di, u) in directions.iter().enumerate() {
            for &s in radii {
                let target: Vec<f64> = center.iter().zip(u).map(|(c, ui)| c + s * ui).collect();
                let qt = self.nearest_giant_vertex(&target)?;
                let h = hops[qt].ok_or_else(|| {
                    Error::Integrity("giant vertex unreachable from giant source".into())
                })?;
                table.push(StretchSample {
                    direction: di,
                    radius: s,
                    ratio: h as f64 / s,
                });
            }
        }
        let per_radius_mean: Vec<(f64, f64)> = radii
            .iter()
            .map(|&s| {
                let vals: Vec<f64> = table
                    .iter()
                    .filter(|t| t.radius == s)
                    .map(|t| t.ratio)
                    .collect();
                (s, crate::stats::mean(&vals))
            })
            .collect();
        let rho_hat = per_radius_mean.last().unwrap().1;
        let lower_bound = 1.0 / self.radius;
        if rho_hat < lower_bound - 1e-9 {
            return Err(Error::Integrity(format!(
                "stretch estimate {rho_hat} fell below the bound {lower_bound}"
            )));
        }
        Ok(StretchEstimate {
            rho_hat,
            lower_bound,
            per_radius_mean,
            table,
        })
    }

    /// Exact count of self-avoiding paths with `n` edges starting at
    /// `source`, by depth-first enumeration. Guarded at n <= 6 because the
    /// count grows like (mean degree)^n.
    pub fn count_self_avoiding_paths(&self, source: usize, n: usize) -> Result<u64> {
        if source >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "vertex id {source} out of range"
            )));
        }
        if n > 6 {
            return Err(Error::InvalidParameter(format!(
                "path length {n} exceeds the enumeration guard (6)"
            )));
        }
        let mut visited = vec![false; self.len()];
        visited[source] = true;
        let count = self.saw_dfs(source, n, &mut visited);
        Ok(count)
    }

    fn saw_dfs(&self, v: usize, remaining: usize, visited: &mut [bool]) -> u64 {
        if remaining == 0 {
            return 1;
        }
        let mut total = 0;
        for &w in self.neighbors(v) {
            if !visited[w as usize] {
                visited[w as usize] = true;
                total += self.saw_dfs(w as usize, remaining - 1, visited);
                visited[w as usize] = false;
            }
        }
        total
    }

    /// NDJSON export: one record per vertex, then one per canonical edge.
    pub fn write_ndjson<W: Write>(&self, w: &mut W) -> Result<()> {
        for v in 0..self.len() {
            writeln!(
                w,
                "{}",
                serde_json::json!({
                    "id": v,
                    "x": self.points.point(v),
                    "component": self.labels[v],
                })
            )?;
        }
        for (u, v) in self.edges() {
            writeln!(w, "{}", serde_json::json!({ "u": u, "v": v }))?;
        }
        Ok(())
    }
}

/// Visits the nodes of a regular grid of the given pitch inside the window,
/// aligned to the window center.
pub fn for_grid_probes<F: FnMut(&[f64])>(window: &crate::point_process::Window, pitch: f64, mut f: F) {
    let d = window.dim();
    let steps = (window.half_width() / pitch).floor() as i64;
    let mut idx = vec![-steps; d];
    let mut probe = vec![0.0; d];
    loop {
        for a in 0..d {
            probe[a] = window.center()[a] + idx[a] as f64 * pitch;
        }
        f(&probe);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if idx[axis] < steps {
                idx[axis] += 1;
                for i in idx.iter_mut().skip(axis + 1) {
                    *i = -steps;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // oracle loops index by vertex id
mod tests {
    use super::*;
    use crate::point_process::{sample_ppp, PointSet, Window};
    use crate::seeds::derive;

    fn grid_free_adjacency(ps: &PointSet, r: f64) -> Vec<Vec<u32>> {
        // brute-force O(n^2) oracle
        let n = ps.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && dist2(ps.point(i), ps.point(j)) < r * r {
                    adj[i].push(j as u32);
                }
            }
        }
        adj
    }

    fn from_coords(coords: Vec<f64>, half_width: f64, r: f64) -> Geograph {
        let w = Window::centered(2, half_width).unwrap();
        build_rgg(PointSet::from_parts(coords, w, 1.0, 0).unwrap(), r).unwrap()
    }

    #[test]
    fn two_points_below_threshold_have_an_edge() {
        let g = from_coords(vec![0.0, 0.0, 0.5, 0.0], 10.0, 1.0);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn distance_exactly_r_is_not_an_edge() {
        let g = from_coords(vec![0.0, 0.0, 1.0, 0.0], 10.0, 1.0);
        assert_eq!(g.degree(0), 0);
        assert_eq!(g.degree(1), 0);
    }

    #[test]
    fn cell_grid_matches_brute_force() {
        let w = Window::centered(2, 5.0).unwrap();
        let ps = sample_ppp(2.0, &w, 77).unwrap();
        assert!(ps.len() >= 150);
        let r = 0.3;
        let g = build_rgg(ps.clone(), r).unwrap();
        let oracle = grid_free_adjacency(&ps, r);
        for v in 0..g.len() {
            assert_eq!(g.neighbors(v), &oracle[v][..], "vertex {v}");
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        let w = Window::centered(2, 10.0).unwrap();
        let ps = sample_ppp(1.0, &w, 3).unwrap();
        let g = build_rgg(ps, 1.2).unwrap();
        for u in 0..g.len() {
            for &v in g.neighbors(u) {
                assert!(g.neighbors(v as usize).contains(&(u as u32)));
            }
        }
    }

    #[test]
    fn components_of_edgeless_and_path_graphs() {
        let g = from_coords(vec![0.0, 0.0, 3.0, 0.0, 0.0, 3.0, 3.0, 3.0, -3.0, -3.0], 10.0, 1.0);
        assert_eq!(g.component_sizes().len(), 5);
        assert!(g.component_sizes().iter().all(|&s| s == 1));

        let path = from_coords(vec![0.0, 0.0, 0.9, 0.0, 1.8, 0.0], 10.0, 1.0);
        assert_eq!(path.component_sizes(), &[3]);
        assert_eq!(path.giant(), Some(0));
        assert_eq!(path.giant_size(), 3);
    }

    #[test]
    fn giant_tie_breaks_to_smallest_vertex_index() {
        // two components of size 2 each; the one containing vertex 0 wins
        let g = from_coords(vec![0.0, 0.0, 0.5, 0.0, 5.0, 5.0, 5.5, 5.0], 10.0, 1.0);
        assert_eq!(g.giant(), Some(g.labels()[0]));
    }

    #[test]
    fn giant_dominates_at_supercritical_parameters() {
        // lambda=1, r=2 on [-100,100]^2; pinned pilot: the giant holds at
        // least half the vertices in at least 95 of 100 seeds.
        let w = Window::centered(2, 100.0).unwrap();
        let mut ok = 0;
        for i in 0..100 {
            let ps = sample_ppp(1.0, &w, derive(4001, i)).unwrap();
            let g = build_rgg(ps, 2.0).unwrap();
            if g.giant_fraction() >= 0.5 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "giant fraction >= 0.5 in only {ok} of 100 seeds");
    }

    #[test]
    fn nearest_giant_vertex_basics() {
        let g = from_coords(vec![0.0, 0.0, 0.9, 0.0, 5.0, 5.0], 10.0, 1.0);
        // giant = {0, 1}; the probe coincides with vertex 0
        assert_eq!(g.nearest_giant_vertex(&[0.0, 0.0]).unwrap(), 0);
        // equidistant from both giant vertices: lexicographically smaller wins
        assert_eq!(g.nearest_giant_vertex(&[0.45, 3.0]).unwrap(), 0);
        // isolated vertex 2 is never returned even when closer
        assert_eq!(g.nearest_giant_vertex(&[5.0, 5.0]).unwrap(), 1);
    }

    #[test]
    fn nearest_giant_matches_linear_scan() {
        let w = Window::centered(2, 10.0).unwrap();
        let ps = sample_ppp(1.0, &w, 21).unwrap();
        let g = build_rgg(ps, 1.5).unwrap();
        let giant = g.giant().unwrap();
        for k in 0..50 {
            let probe = [
                -10.0 + 20.0 * ((k as f64) * 0.317).fract(),
                -10.0 + 20.0 * ((k as f64) * 0.771).fract(),
            ];
            let got = g.nearest_giant_vertex(&probe).unwrap();
            let want = (0..g.len())
                .filter(|&v| g.labels()[v] == giant)
                .min_by(|&a, &b| {
                    dist2(g.points().point(a), &probe)
                        .total_cmp(&dist2(g.points().point(b), &probe))
                })
                .unwrap();
            assert_eq!(
                dist2(g.points().point(got), &probe),
                dist2(g.points().point(want), &probe)
            );
        }
    }

    #[test]
    fn empty_graph_has_no_giant() {
        let w = Window::centered(2, 1e-6).unwrap();
        let ps = sample_ppp(1.0, &w, 3).unwrap();
        let g = build_rgg(ps, 1e-7).unwrap();
        assert!(g.giant().is_none());
        assert!(matches!(
            g.nearest_giant_vertex(&[0.0, 0.0]),
            Err(Error::Subcritical { .. })
        ));
    }

    #[test]
    fn graph_distance_basics_and_oracle() {
        let g = from_coords(vec![0.0, 0.0, 0.9, 0.0, 1.8, 0.0], 10.0, 1.0);
        assert_eq!(g.graph_distance(0, 0).unwrap(), Some(0));
        assert_eq!(g.graph_distance(0, 1).unwrap(), Some(1));
        assert_eq!(g.graph_distance(0, 2).unwrap(), Some(2));
        assert!(g.graph_distance(0, 9).is_err());

        // 7-vertex handcrafted graph vs Floyd-Warshall
        let coords = vec![
            0.0, 0.0, // 0
            0.9, 0.0, // 1
            1.8, 0.0, // 2
            0.0, 0.9, // 3
            0.9, 0.9, // 4
            4.0, 4.0, // 5 (isolated)
            1.8, 0.9, // 6
        ];
        let g = from_coords(coords, 10.0, 1.0);
        let n = g.len();
        let inf = u32::MAX / 4;
        let mut fw = vec![vec![inf; n]; n];
        for v in 0..n {
            fw[v][v] = 0;
            for &u in g.neighbors(v) {
                fw[v][u as usize] = 1;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    fw[i][j] = fw[i][j].min(fw[i][k] + fw[k][j]);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let got = g.graph_distance(i, j).unwrap();
                let want = if fw[i][j] >= inf { None } else { Some(fw[i][j]) };
                assert_eq!(got, want, "pair ({i}, {j})");
            }
        }
    }

    #[test]
    fn distance_finite_iff_same_label_and_triangle_inequality() {
        let w = Window::centered(2, 8.0).unwrap();
        let ps = sample_ppp(0.8, &w, 13).unwrap();
        let g = build_rgg(ps, 1.3).unwrap();
        let n = g.len();
        for k in 0..60 {
            let u = (k * 7919) % n;
            let v = (k * 104729) % n;
            let t = (k * 1299709) % n;
            let duv = g.graph_distance(u, v).unwrap();
            assert_eq!(duv.is_some(), g.labels()[u] == g.labels()[v]);
            if let (Some(a), Some(b), Some(c)) = (
                g.graph_distance(u, t).unwrap(),
                duv,
                g.graph_distance(v, t).unwrap(),
            ) {
                assert!(a <= b + c, "triangle violated: {a} > {b} + {c}");
            }
        }
    }

    #[test]
    fn theta_estimators() {
        // all vertices in the giant: vertex density equals total density
        let g = from_coords(vec![0.0, 0.0, 0.9, 0.0, 1.8, 0.0], 2.0, 1.0);
        let est = g.estimate_theta(1.0, 0.5, 1.0).unwrap();
        assert!((est.vertex_density - 3.0 / g.points().window().volume()).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&est.ball_hit_frequency));

        // ball-hit frequency grows with the probe radius on the same graph
        let w = Window::centered(2, 30.0).unwrap();
        let ps = sample_ppp(1.0, &w, 5).unwrap();
        let mut freqs = Vec::new();
        for r in [2.0, 2.5, 3.0] {
            let g = build_rgg(ps.clone(), r).unwrap();
            let est = g.estimate_theta(0.9, 1.0, r).unwrap();
            freqs.push(est.ball_hit_frequency);
        }
        assert!(freqs[0] <= freqs[1] && freqs[1] <= freqs[2], "{freqs:?}");
    }

    #[test]
    fn theta_concentrates_across_seeds() {
        // pinned pilot: relative spread of the vertex-density estimate stays
        // below 5% across 50 seeds at lambda=1, r=2, L=100
        let w = Window::centered(2, 100.0).unwrap();
        let vals: Vec<f64> = (0..50)
            .map(|i| {
                let ps = sample_ppp(1.0, &w, derive(666, i)).unwrap();
                let g = build_rgg(ps, 2.0).unwrap();
                g.estimate_theta(0.9, 5.0, 2.0).unwrap().vertex_density
            })
            .collect();
        let rel = crate::stats::std_dev(&vals) / crate::stats::mean(&vals);
        assert!(rel < 0.05, "relative std {rel}");
    }

    #[test]
    fn stretch_factor_respects_bound_and_symmetry() {
        let w = Window::centered(2, 50.0).unwrap();
        let ps = sample_ppp(1.0, &w, 31).unwrap();
        let g = build_rgg(ps, 2.0).unwrap();
        let dirs = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let est = g
            .estimate_stretch_factor(&dirs, &[20.0, 30.0, 40.0], 0.1)
            .unwrap();
        assert!(est.rho_hat >= est.lower_bound - 1e-9);
        assert_eq!(est.table.len(), 12);
        // radii beyond the margin are rejected
        assert!(g.estimate_stretch_factor(&dirs, &[49.0], 0.1).is_err());
        // non-unit directions are rejected
        assert!(g
            .estimate_stretch_factor(&[vec![2.0, 0.0]], &[10.0], 0.1)
            .is_err());
    }

    #[test]
    fn saw_counts_hand_enumerated() {
        // isolated vertex
        let g = from_coords(vec![0.0, 0.0, 5.0, 5.0], 10.0, 1.0);
        assert_eq!(g.count_self_avoiding_paths(0, 1).unwrap(), 0);

        // triangle: two paths of length 2 from any source
        let tri = from_coords(vec![0.0, 0.0, 0.8, 0.0, 0.4, 0.6], 10.0, 1.0);
        for v in 0..3 {
            assert_eq!(tri.count_self_avoiding_paths(v, 2).unwrap(), 2);
            assert_eq!(tri.count_self_avoiding_paths(v, 1).unwrap(), 2);
            // length 3 would need 4 distinct vertices
            assert_eq!(tri.count_self_avoiding_paths(v, 3).unwrap(), 0);
        }
        assert!(tri.count_self_avoiding_paths(0, 7).is_err());
    }

    #[test]
    fn ball_emptiness_frequency_decays_with_radius() {
        // supercritical parameters with a visible empty-ball probability at
        // s=1; the frequency of {B_s(o) cap giant = empty} never increases
        let w = Window::centered(2, 12.0).unwrap();
        let mut freq = Vec::new();
        for s in [1.0, 2.0, 4.0, 8.0] {
            let mut empty = 0;
            for i in 0..200 {
                let ps = sample_ppp(0.7, &w, derive(900, i)).unwrap();
                let g = build_rgg(ps, 1.6).unwrap();
                let has = match g.nearest_giant_vertex(&[0.0, 0.0]) {
                    Ok(q) => dist2(g.points().point(q), &[0.0, 0.0]) < s * s,
                    Err(_) => false,
                };
                if !has {
                    empty += 1;
                }
            }
            freq.push(empty);
        }
        assert!(
            freq.windows(2).all(|w| w[0] >= w[1]),
            "empty-ball counts {freq:?} not non-increasing"
        );
    }

    #[test]
    fn ndjson_export_shape() {
        let g = from_coords(vec![0.0, 0.0, 0.5, 0.0], 10.0, 1.0);
        let mut buf = Vec::new();
        g.write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3); // 2 vertices + 1 edge
        assert!(lines[0].contains("\"id\":0"));
        assert!(lines[2].contains("\"u\":0"));
    }
}
