//! First-passage percolation on the disk graph: i.i.d. nonnegative edge
//! passage times, exact single-source first-passage times by label-setting
//! shortest paths, growth snapshots, and jump traces.
//!
//! Edge weights are drawn through a keyed mixer on the canonical (sorted)
//! endpoint pair, so the assignment is deterministic in `(graph, law, seed)`
//! and independent of construction or query order. The same draw is produced
//! whether weights are materialized eagerly or queried lazily.

use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geograph::{for_grid_probes, Geograph};
use crate::params::unit_ball_volume;
use crate::seeds::{edge_key, unit_f64};

/// Default probe pitch for growth-set volume estimates, as a fraction of the
/// disk radius.
pub const DEFAULT_PROBE_PITCH_FRACTION: f64 = 0.25;

/// Passage-time law for the i.i.d. edge weights. All laws are supported on
/// `[0, +inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PassageSpec {
    /// `tau = 0` with probability `zero_prob`, else `tau = 1`. An edge with
    /// `tau = 0` is called open; `zero_prob` is the open probability.
    Bernoulli { zero_prob: f64 },
    /// Rate-parameterized exponential: density `rate * exp(-rate t)`.
    Exponential { rate: f64 },
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl PassageSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PassageSpec::Bernoulli { zero_prob } => (0.0..=1.0).contains(&zero_prob),
            PassageSpec::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            PassageSpec::Constant { value } => value >= 0.0 && value.is_finite(),
            PassageSpec::Uniform { low, high } => {
                low >= 0.0 && high >= low && high.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid passage law parameters: {self:?}"
            )))
        }
    }

    /// P(tau = 0), known in closed form for every family.
    pub fn zero_atom(&self) -> f64 {
        match *self {
            PassageSpec::Bernoulli { zero_prob } => zero_prob,
            PassageSpec::Exponential { .. } => 0.0,
            PassageSpec::Constant { value } => {
                if value == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            PassageSpec::Uniform { low, high } => {
                if low == 0.0 && high == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PassageSpec::Bernoulli { zero_prob } => 1.0 - zero_prob,
            PassageSpec::Exponential { rate } => 1.0 / rate,
            PassageSpec::Constant { value } => value,
            PassageSpec::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// Whether the law has an atom anywhere (relevant for jump-time ties).
    pub fn is_atomless(&self) -> bool {
        matches!(
            self,
            PassageSpec::Exponential { .. } | PassageSpec::Uniform { .. }
        )
    }

    /// Inverse-CDF draw from 64 random bits. A single uniform per edge keeps
    /// the coupling across laws and parameters exact: for the Bernoulli
    /// family the edge is open iff `u < zero_prob`, for every `zero_prob`.
    pub fn draw(&self, bits: u64) -> f64 {
        let u = unit_f64(bits);
        match *self {
            PassageSpec::Bernoulli { zero_prob } => {
                if u < zero_prob {
                    0.0
                } else {
                    1.0
                }
            }
            PassageSpec::Exponential { rate } => -(-u).ln_1p() / rate,
            PassageSpec::Constant { value } => value,
            PassageSpec::Uniform { low, high } => low + (high - low) * u,
        }
    }
}

/// Report for the zero-atom condition: the atom must stay below
/// `1 / (v_d r^d lambda)`.
#[derive(Debug, Clone, Serialize)]
pub struct A1Report {
    pub satisfied: bool,
    pub atom: f64,
    pub threshold: f64,
}

pub fn check_a1(spec: &PassageSpec, lambda: f64, radius: f64, dim: usize) -> Result<A1Report> {
    spec.validate()?;
    if !crate::params::positive_finite(lambda) || !crate::params::positive_finite(radius) || dim < 2 {
        return Err(Error::InvalidParameter(
            "check_a1 needs positive lambda, positive radius, dim >= 2".into(),
        ));
    }
    let threshold = 1.0 / (unit_ball_volume(dim) * radius.powi(dim as i32) * lambda);
    let atom = spec.zero_atom();
    Ok(A1Report {
        satisfied: atom < threshold,
        atom,
        threshold,
    })
}

/// Report for the moment condition: some eta > 2d + 2 with a finite eta-th
/// moment. All built-in families are bounded or have an exponential tail, so
/// every moment is finite and the condition holds analytically.
#[derive(Debug, Clone, Serialize)]
pub struct A2Report {
    pub satisfied: bool,
    pub required_exponent: f64,
    pub all_moments_finite: bool,
}

pub fn check_a2(spec: &PassageSpec, dim: usize) -> Result<A2Report> {
    spec.validate()?;
    if dim < 2 {
        return Err(Error::InvalidParameter("dim must be >= 2".into()));
    }
    Ok(A2Report {
        satisfied: true,
        required_exponent: (2 * dim + 2) as f64,
        all_moments_finite: true,
    })
}

/// Source of per-edge passage times. Implementations must be symmetric in
/// the endpoints and consistent across repeated queries.
pub trait EdgeWeightSource {
    fn weight(&self, u: usize, v: usize) -> f64;
}

/// The keyed i.i.d. assignment: one draw per undirected edge, addressed by
/// the canonical endpoint pair.
#[derive(Debug, Clone, Copy)]
pub struct PassageWeights {
    spec: PassageSpec,
    seed: u64,
}

impl PassageWeights {
    pub fn spec(&self) -> &PassageSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl EdgeWeightSource for PassageWeights {
    fn weight(&self, u: usize, v: usize) -> f64 {
        self.spec.draw(edge_key(self.seed, u, v))
    }
}

/// Assigns i.i.d. passage times to the edges of the graph. The result
/// answers weight queries for any vertex pair; only pairs that are actual
/// edges are meaningful.
pub fn assign_passage_times(spec: &PassageSpec, seed: u64) -> Result<PassageWeights> {
    spec.validate()?;
    Ok(PassageWeights { spec: *spec, seed })
}

/// Per-vertex first-passage times from a source vertex. Unreached vertices
/// are represented explicitly, never as a large number.
pub struct PassageField<'g> {
    graph: &'g Geograph,
    source: usize,
    time: Vec<f64>,
    reached: Vec<bool>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // reversed: BinaryHeap is a max-heap, we pop the smallest distance
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact single-source first-passage times under nonnegative weights
/// (label-setting shortest paths with a binary heap).
pub fn first_passage<'g, W: EdgeWeightSource>(
    graph: &'g Geograph,
    weights: &W,
    source: usize,
) -> Result<PassageField<'g>> {
    let n = graph.len();
    if source >= n {
        return Err(Error::InvalidParameter(format!(
            "source vertex {source} out of range"
        )));
    }
    let mut time = vec![f64::INFINITY; n];
    let mut reached = vec![false; n];
    let mut heap = BinaryHeap::new();
    time[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        vertex: source as u32,
    });
    while let Some(HeapEntry { dist, vertex }) = heap.pop() {
        let v = vertex as usize;
        if reached[v] {
            continue;
        }
        reached[v] = true;
        for &w in graph.neighbors(v) {
            let w = w as usize;
            if reached[w] {
                continue;
            }
            let tau = weights.weight(v, w);
            if tau < 0.0 || !tau.is_finite() {
                return Err(Error::Integrity(format!(
                    "edge ({v}, {w}) has invalid passage time {tau}"
                )));
            }
            let cand = dist + tau;
            if cand < time[w] {
                time[w] = cand;
                heap.push(HeapEntry {
                    dist: cand,
                    vertex: w as u32,
                });
            }
        }
    }
    Ok(PassageField {
        graph,
        source,
        time,
        reached,
    })
}

impl<'g> PassageField<'g> {
    pub fn graph(&self) -> &'g Geograph {
        self.graph
    }

    pub fn source(&self) -> usize {
        self.source
    }

    /// First-passage time of vertex `v`; `None` when unreached.
    pub fn time(&self, v: usize) -> Option<f64> {
        self.reached[v].then(|| self.time[v])
    }

    pub fn reached_count(&self) -> usize {
        self.reached.iter().filter(|&&r| r).count()
    }

    /// Test/synthesis constructor: builds a field from explicit times
    /// without running the solver.
    #[doc(hidden)]
    pub fn from_times(graph: &'g Geograph, source: usize, time: Vec<Option<f64>>) -> Self {
        let reached: Vec<bool> = time.iter().map(|t| t.is_some()).collect();
        let time = time.into_iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
        PassageField {
            graph,
            source,
            time,
            reached,
        }
    }

    /// CSV export: vertex id, coordinates, reached flag, time (empty when
    /// unreached).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.graph.points().dim();
        let coord_header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
        writeln!(w, "vertex_id,{},reached,t", coord_header.join(","))?;
        for v in 0..self.graph.len() {
            let coords: Vec<String> = self
                .graph
                .points()
                .point(v)
                .iter()
                .map(|c| format!("{c}"))
                .collect();
            match self.time(v) {
                Some(t) => writeln!(w, "{v},{},true,{t}", coords.join(","))?,
                None => writeln!(w, "{v},{},false,", coords.join(","))?,
            }
        }
        Ok(())
    }
}

/// First-passage time between two spatial points: the time between the
/// nearest giant vertices `q(x)` and `q(y)`. The lower vertex id is used as
/// the solver source, so the value is exactly symmetric in `(x, y)`.
pub fn passage_between<W: EdgeWeightSource>(
    graph: &Geograph,
    weights: &W,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let qx = graph.nearest_giant_vertex(x)?;
    let qy = graph.nearest_giant_vertex(y)?;
    if qx == qy {
        return Ok(0.0);
    }
    let (src, dst) = (qx.min(qy), qx.max(qy));
    let field = first_passage(graph, weights, src)?;
    field
        .time(dst)
        .ok_or_else(|| Error::Integrity("giant vertices not mutually reachable".into()))
}

/// A growth-set snapshot: the vertices reached by time `t`, plus a grid-probe
/// estimate of the volume of the region whose nearest giant vertex is
/// reached.
#[derive(Debug, Clone)]
pub struct BallSnapshot {
    pub vertices: Vec<usize>,
    pub volume_estimate: f64,
    pub probes_total: usize,
    pub probes_reached: usize,
}

/// The reached set at time `t` and the probe-estimated volume of
/// `{x : T(q(x)) <= t}` restricted to the inner box.
pub fn ball_at_time(
    field: &PassageField,
    t: f64,
    pitch: f64,
    inner_fraction: f64,
) -> Result<BallSnapshot> {
    if t < 0.0 {
        return Err(Error::InvalidParameter("time must be nonnegative".into()));
    }
    let g = field.graph();
    let vertices: Vec<usize> = (0..g.len())
        .filter(|&v| field.time(v).is_some_and(|tv| tv <= t))
        .collect();
    let inner = g.points().window().shrink(inner_fraction);
    let mut total = 0usize;
    let mut hit = 0usize;
    for_grid_probes(&inner, pitch, |probe| {
        total += 1;
        if let Ok(q) = g.nearest_giant_vertex(probe) {
            if field.time(q).is_some_and(|tq| tq <= t) {
                hit += 1;
            }
        }
    });
    Ok(BallSnapshot {
        vertices,
        volume_estimate: hit as f64 * pitch.powi(g.points().dim() as i32),
        probes_total: total,
        probes_reached: hit,
    })
}

/// An element of the jump-trace space: strictly ordered jump times `s_k`
/// with distinct jump locations `z_k`, `s_0 = 0` at the source. Under a
/// discrete law, ties are broken by vertex id and counted.
#[derive(Debug, Clone)]
pub struct GrowthTrace {
    dim: usize,
    jump_times: Vec<f64>,
    locations: Vec<f64>,
    vertex_ids: Vec<usize>,
    tie_count: usize,
}

impl GrowthTrace {
    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Jump location `z_k`.
    pub fn phi(&self, k: usize) -> &[f64] {
        &self.locations[k * self.dim..(k + 1) * self.dim]
    }

    /// Inter-jump time `psi_k = s_k - s_{k-1}`, defined for `k >= 1`.
    pub fn psi(&self, k: usize) -> f64 {
        assert!(k >= 1, "psi is defined for k >= 1");
        self.jump_times[k] - self.jump_times[k - 1]
    }

    pub fn jump_time(&self, k: usize) -> f64 {
        self.jump_times[k]
    }

    pub fn vertex(&self, k: usize) -> usize {
        self.vertex_ids[k]
    }

    /// Number of tied jump times (possible only under laws with atoms).
    pub fn tie_count(&self) -> usize {
        self.tie_count
    }

    /// CSV export: k, s_k, psi_k (empty for k = 0), coordinates of z_k.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let coord_header: Vec<String> = (0..self.dim).map(|a| format!("z{a}")).collect();
        writeln!(w, "k,s,psi,{}", coord_header.join(","))?;
        for k in 0..self.len() {
            let coords: Vec<String> = self.phi(k).iter().map(|c| format!("{c}")).collect();
            let psi = if k == 0 {
                String::new()
            } else {
                format!("{}", self.psi(k))
            };
            writeln!(w, "{k},{},{psi},{}", self.jump_times[k], coords.join(","))?;
        }
        Ok(())
    }
}

/// Orders the reached vertices of a passage field by first-passage time into
/// a jump trace. Equal times (possible under discrete laws) sort stably by
/// vertex id and are flagged through `tie_count`.
pub fn growth_trace(field: &PassageField) -> GrowthTrace {
    let g = field.graph();
    let mut order: Vec<(f64, usize)> = (0..g.len())
        .filter_map(|v| field.time(v).map(|t| (t, v)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let dim = g.points().dim();
    let mut jump_times = Vec::with_capacity(order.len());
    let mut locations = Vec::with_capacity(order.len() * dim);
    let mut vertex_ids = Vec::with_capacity(order.len());
    let mut ties = 0usize;
    for (i, (t, v)) in order.iter().enumerate() {
        if i > 0 && *t == order[i - 1].0 {
            ties += 1;
        }
        jump_times.push(*t);
        locations.extend_from_slice(g.points().point(*v));
        vertex_ids.push(*v);
    }
    GrowthTrace {
        dim,
        jump_times,
        locations,
        vertex_ids,
        tie_count: ties,
    }
}
