//! Minimal SVG writer for debug renderings (map frame, y up).

use std::fmt::Write as _;

use crate::geometry::{Point2, Rect};

pub struct SvgCanvas {
    bounds: Rect,
    scale: f64,
    margin: f64,
    body: String,
}

impl SvgCanvas {
    /// `scale` is pixels per meter.
    pub fn new(bounds: Rect, scale: f64) -> Self {
        Self {
            bounds,
            scale,
            margin: 10.0,
            body: String::new(),
        }
    }

    pub fn to_px(&self, p: Point2) -> (f64, f64) {
        (
            self.margin + (p.x - self.bounds.min.x) * self.scale,
            self.margin + (self.bounds.max.y - p.y) * self.scale,
        )
    }

    fn width_px(&self) -> f64 {
        self.bounds.width() * self.scale + 2.0 * self.margin
    }

    fn height_px(&self) -> f64 {
        self.bounds.height() * self.scale + 2.0 * self.margin
    }

    pub fn polygon(&mut self, vertices: &[Point2], fill: &str, stroke: &str, stroke_m: f64) {
        let pts: Vec<String> = vertices
            .iter()
            .map(|&p| {
                let (x, y) = self.to_px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="{:.2}"/>"#,
            pts.join(" "),
            stroke_m * self.scale
        );
    }

    pub fn rect(&mut self, r: Rect, fill: &str, stroke: &str, stroke_m: f64) {
        let (x0, y1) = self.to_px(r.min);
        let (x1, y0) = self.to_px(r.max);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="{stroke}" stroke-width="{:.2}"/>"#,
            x1 - x0,
            y1 - y0,
            stroke_m * self.scale
        );
    }

    /// Filled cell without stroke, used for heat layers.
    pub fn cell(&mut self, r: Rect, fill: &str, opacity: f64) {
        let (x0, y1) = self.to_px(r.min);
        let (x1, y0) = self.to_px(r.max);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{opacity:.3}"/>"#,
            x1 - x0,
            y1 - y0,
        );
    }

    pub fn line(&mut self, a: Point2, b: Point2, stroke: &str, stroke_m: f64) {
        let (x1, y1) = self.to_px(a);
        let (x2, y2) = self.to_px(b);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{:.2}"/>"#,
            stroke_m * self.scale
        );
    }

    pub fn polyline(&mut self, points: &[Point2], stroke: &str, stroke_m: f64) {
        let pts: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = self.to_px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{:.2}"/>"#,
            pts.join(" "),
            stroke_m * self.scale
        );
    }

    pub fn circle(&mut self, c: Point2, radius_m: f64, fill: &str) {
        let (x, y) = self.to_px(c);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{fill}"/>"#,
            radius_m * self.scale
        );
    }

    pub fn raw(&mut self, fragment: &str) {
        self.body.push_str(fragment);
        self.body.push('\n');
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n{}</svg>\n",
            self.width_px(),
            self.height_px(),
            self.body
        )
    }
}

/// Optional layers drawn over the map by [`render_map`].
#[derive(Debug, Clone, Default)]
pub struct Overlay<'a> {
    /// Shade the signed distance field underneath the contours.
    pub sdf: bool,
    pub paths: Vec<&'a [Point2]>,
    pub samples: &'a [Point2],
    pub tree: &'a [(Point2, Point2)],
    pub start: Option<Point2>,
    pub goal: Option<Point2>,
}

/// Upper bound on heat cells emitted for the distance field layer.
const MAX_HEAT_CELLS: usize = 20_000;

fn heat_color(v: f64) -> String {
    let t = (v.abs() / 2.0).min(1.0);
    let shade = (255.0 * (1.0 - t)).round() as u8;
    if v < 0.0 {
        format!("#ff{shade:02x}{shade:02x}")
    } else {
        format!("#{shade:02x}{shade:02x}ff")
    }
}

/// Map contours, doorway openings, and wall pieces, plus whatever `overlay`
/// asks for.
pub fn render_map(map: &crate::map_builder::GlobalMap, overlay: &Overlay<'_>) -> String {
    let mut svg = SvgCanvas::new(map.bbox, 40.0);
    if overlay.sdf {
        let grid = &map.sdf;
        let stride = ((grid.nx * grid.ny) as f64 / MAX_HEAT_CELLS as f64).sqrt().ceil().max(1.0) as usize;
        let half = grid.resolution * stride as f64 / 2.0;
        for j in (0..grid.ny).step_by(stride) {
            for i in (0..grid.nx).step_by(stride) {
                let c = grid.node(i, j);
                let cell = Rect::from_center(c, half, half);
                if map.bbox.contains(c) {
                    svg.cell(cell, &heat_color(grid.value(i, j)), 0.6);
                }
            }
        }
    }
    for c in &map.contours {
        svg.polygon(&c.vertices, if overlay.sdf { "none" } else { "#e8f0fa" }, "#7aa0c8", 0.02);
    }
    for o in &map.carved.openings {
        svg.rect(o.region, "#ffd27f", "none", 0.0);
    }
    for s in map.segments() {
        svg.line(s.a, s.b, "#222", 0.06);
    }
    for (a, b) in overlay.tree {
        svg.line(*a, *b, "#9a9a9a", 0.01);
    }
    for p in overlay.samples {
        svg.circle(*p, 0.02, "#2a9d8f");
    }
    for path in &overlay.paths {
        svg.polyline(path, "#d62828", 0.05);
    }
    if let Some(p) = overlay.start {
        svg.circle(p, 0.12, "#2b9348");
    }
    if let Some(p) = overlay.goal {
        svg.circle(p, 0.12, "#6a4c93");
    }
    svg.finish()
}
