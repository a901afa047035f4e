//! Deterministic SVG snapshots of two-dimensional graphs and growth sets:
//! vertices, edges, the giant component, zero-weight (open) edges, reached
//! sets at a chosen time, and fitted circles.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fpp::PassageField;
use crate::geograph::Geograph;

const CANVAS: f64 = 800.0;

/// A drawing request over one graph. All optional layers default to off.
pub struct SvgScene<'a> {
    graph: &'a Geograph,
    highlight_giant: bool,
    reached: Option<Vec<bool>>,
    open_edges: Option<Vec<(u32, u32)>>,
    circles: Vec<f64>,
}

impl<'a> SvgScene<'a> {
    pub fn new(graph: &'a Geograph) -> Result<Self> {
        if graph.points().dim() != 2 {
            return Err(Error::UnsupportedDimension(graph.points().dim()));
        }
        Ok(SvgScene {
            graph,
            highlight_giant: true,
            reached: None,
            open_edges: None,
            circles: Vec::new(),
        })
    }

    pub fn highlight_giant(mut self, on: bool) -> Self {
        self.highlight_giant = on;
        self
    }

    /// Shades the vertices reached by time `t` in the field.
    pub fn with_reached(mut self, field: &PassageField, t: f64) -> Self {
        self.reached = Some(
            (0..self.graph.len())
                .map(|v| field.time(v).is_some_and(|tv| tv <= t))
                .collect(),
        );
        self
    }

    /// Draws the given zero-weight edges bold.
    pub fn with_open_edges(mut self, edges: Vec<(u32, u32)>) -> Self {
        self.open_edges = Some(edges);
        self
    }

    /// Overlays circles of the given radii centered at the window center.
    pub fn with_circles(mut self, radii: Vec<f64>) -> Self {
        self.circles = radii;
        self
    }

    /// Renders the scene; byte-identical for identical inputs.
    pub fn render(&self) -> String {
        let g = self.graph;
        let w = g.points().window();
        let half = w.half_width();
        let scale = CANVAS / (2.0 * half);
        let px = |c: f64, axis: usize| -> f64 {
            let rel = c - w.center()[axis] + half;
            if axis == 1 {
                CANVAS - rel * scale
            } else {
                rel * scale
            }
        };
        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" \
             viewBox=\"0 0 {CANVAS} {CANVAS}\">\n"
        ));
        out.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"white\" \
             stroke=\"black\" stroke-width=\"1\"/>\n"
        ));
        for (u, v) in g.edges() {
            let (pu, pv) = (g.points().point(u as usize), g.points().point(v as usize));
            out.push_str(&format!(
                "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#c8c8c8\" stroke-width=\"0.4\"/>\n",
                px(pu[0], 0), px(pu[1], 1), px(pv[0], 0), px(pv[1], 1)
            ));
        }
        if let Some(open) = &self.open_edges {
            for &(u, v) in open {
                let (pu, pv) = (g.points().point(u as usize), g.points().point(v as usize));
                out.push_str(&format!(
                    "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#2a7fff\" stroke-width=\"1.2\"/>\n",
                    px(pu[0], 0), px(pu[1], 1), px(pv[0], 0), px(pv[1], 1)
                ));
            }
        }
        for v in 0..g.len() {
            let p = g.points().point(v);
            let reached = self.reached.as_ref().is_some_and(|r| r[v]);
            let color = if reached {
                "#d62728"
            } else if self.highlight_giant && g.in_giant(v) {
                "#2a7fff"
            } else {
                "#808080"
            };
            out.push_str(&format!(
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"1.6\" fill=\"{color}\"/>\n",
                px(p[0], 0),
                px(p[1], 1)
            ));
        }
        for &radius in &self.circles {
            out.push_str(&format!(
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"none\" stroke=\"#111111\" \
                 stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n",
                px(w.center()[0], 0),
                px(w.center()[1], 1),
                radius * scale
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Renders the scene into a file.
pub fn emit_svg(scene: &SvgScene, path: &Path) -> Result<()> {
    std::fs::write(path, scene.render())?;
    Ok(())
}
