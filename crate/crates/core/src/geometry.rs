//! Closed boundary curves, flat-element meshes and bisection refinement.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Vec2;

/// A simple, closed, counter-clockwise curve.
///
/// Ellipses are parametrized by the polar angle `θ ∈ [0, 2π)`, polygons by
/// arc length starting from the first vertex.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Ellipse { a: f64, b: f64 },
    Polygon(Polygon),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    /// Arc length at each vertex; `cum[0] = 0`, one entry per vertex.
    cum: Vec<f64>,
    perimeter: f64,
}

impl Polygon {
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    fn edge_len(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        dist(self.vertices[i], self.vertices[(i + 1) % n])
    }
}

impl Curve {
    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Geometry(format!(
                "ellipse semi-axes must be positive, got a={a}, b={b}"
            )));
        }
        Ok(Curve::Ellipse { a, b })
    }

    /// Polygon from counter-clockwise vertices.
    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Geometry(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Geometry("polygon vertex is not finite".into()));
        }
        let mut area2 = 0.0;
        for i in 0..n {
            let (p, q) = (vertices[i], vertices[(i + 1) % n]);
            area2 += p[0] * q[1] - q[0] * p[1];
            if dist(p, q) == 0.0 {
                return Err(Error::Geometry(format!("polygon edge {i} has zero length")));
            }
        }
        if area2 <= 0.0 {
            return Err(Error::Geometry(
                "polygon vertices must be listed counter-clockwise".into(),
            ));
        }
        for i in 0..n {
            for j in i + 1..n {
                // adjacent edges share a vertex and are allowed to touch there
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                    return Err(Error::Geometry(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        let mut cum = Vec::with_capacity(n);
        let mut s = 0.0;
        for i in 0..n {
            cum.push(s);
            s += dist(vertices[i], vertices[(i + 1) % n]);
        }
        Ok(Curve::Polygon(Polygon {
            vertices,
            cum,
            perimeter: s,
        }))
    }

    /// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::polygon(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    /// Length of the parameter interval.
    pub fn period(&self) -> f64 {
        match self {
            Curve::Ellipse { .. } => 2.0 * PI,
            Curve::Polygon(p) => p.perimeter,
        }
    }

    /// Point at parameter `t` (taken modulo the period).
    pub fn point(&self, t: f64) -> Vec2 {
        match self {
            Curve::Ellipse { a, b } => {
                let t = t.rem_euclid(2.0 * PI);
                [a * t.cos(), b * t.sin()]
            }
            Curve::Polygon(p) => {
                let t = t.rem_euclid(p.perimeter);
                let i = match p.cum.binary_search_by(|c| c.partial_cmp(&t).unwrap()) {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                let (a, b) = (p.vertices[i], p.vertices[(i + 1) % p.vertices.len()]);
                let u = (t - p.cum[i]) / p.edge_len(i);
                [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
            }
        }
    }

    /// Parameters of the corners (empty for smooth curves).
    pub fn corner_params(&self) -> Vec<f64> {
        match self {
            Curve::Ellipse { .. } => Vec::new(),
            Curve::Polygon(p) => p.cum.clone(),
        }
    }

    /// Strict interior test.
    pub fn contains(&self, x: Vec2) -> bool {
        match self {
            Curve::Ellipse { a, b } => (x[0] / a).powi(2) + (x[1] / b).powi(2) < 1.0,
            Curve::Polygon(p) => {
                let n = p.vertices.len();
                let mut inside = false;
                for i in 0..n {
                    let (u, v) = (p.vertices[i], p.vertices[(i + 1) % n]);
                    if (u[1] > x[1]) != (v[1] > x[1]) {
                        let xc = u[0] + (x[1] - u[1]) / (v[1] - u[1]) * (v[0] - u[0]);
                        if x[0] < xc {
                            inside = !inside;
                        }
                    }
                }
                inside && self.distance(x) > 0.0
            }
        }
    }

    /// Euclidean distance from `x` to the curve.
    pub fn distance(&self, x: Vec2) -> f64 {
        match self {
            Curve::Ellipse { .. } => {
                let n = 1024;
                let h = 2.0 * PI / n as f64;
                let (mut best_t, mut best) = (0.0, f64::INFINITY);
                for k in 0..n {
                    let t = k as f64 * h;
                    let d = dist(self.point(t), x);
                    if d < best {
                        best = d;
                        best_t = t;
                    }
                }
                // golden-section refinement of the bracketing interval
                let (mut lo, mut hi) = (best_t - h, best_t + h);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let m1 = hi - g * (hi - lo);
                    let m2 = lo + g * (hi - lo);
                    if dist(self.point(m1), x) < dist(self.point(m2), x) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                best.min(dist(self.point(0.5 * (lo + hi)), x))
            }
            Curve::Polygon(p) => {
                let n = p.vertices.len();
                (0..n)
                    .map(|i| segment_distance(x, p.vertices[i], p.vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Perimeter (exact for polygons, periodic trapezoid rule for ellipses).
    pub fn perimeter(&self) -> f64 {
        match self {
            Curve::Polygon(p) => p.perimeter,
            Curve::Ellipse { a, b } => {
                let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
                let n = 4096;
                let h = 2.0 * PI / n as f64;
                // periodic trapezoid rule converges geometrically for smooth integrands
                (0..n).map(|k| f(k as f64 * h)).sum::<f64>() * h
            }
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Curve::Ellipse { .. } => "ellipse",
            Curve::Polygon(_) => "polygon",
        }
    }
}

/// One flat boundary element between two consecutive mesh nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub t_start: f64,
    pub t_end: f64,
    pub start: Vec2,
    pub end: Vec2,
    pub length: f64,
    /// Unit tangent of the chord.
    pub tangent: Vec2,
    /// Outward unit normal of the chord.
    pub normal: Vec2,
    /// Curve point at the parameter midpoint.
    pub midpoint: Vec2,
    /// Number of bisections since the initial mesh.
    pub depth: u32,
}

impl Element {
    fn new(curve: &Curve, t_start: f64, t_end: f64, depth: u32) -> Self {
        let start = curve.point(t_start);
        let end = curve.point(t_end);
        let d = [end[0] - start[0], end[1] - start[1]];
        let length = d[0].hypot(d[1]);
        let tangent = [d[0] / length, d[1] / length];
        Element {
            t_start,
            t_end,
            start,
            end,
            length,
            tangent,
            normal: [tangent[1], -tangent[0]],
            midpoint: curve.point(0.5 * (t_start + t_end)),
            depth,
        }
    }

    /// Chord point for the reference coordinate `u ∈ [−1, 1]`.
    #[inline]
    pub fn map(&self, u: f64) -> Vec2 {
        let a = 0.5 * (1.0 - u);
        let b = 0.5 * (1.0 + u);
        [a * self.start[0] + b * self.end[0], a * self.start[1] + b * self.end[1]]
    }

    pub fn chord_midpoint(&self) -> Vec2 {
        self.map(0.0)
    }

    /// Distance from `x` to the chord.
    pub fn distance(&self, x: Vec2) -> f64 {
        segment_distance(x, self.start, self.end)
    }
}

/// Pull-back data of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFrame {
    pub midpoint: Vec2,
    pub length: f64,
    pub normal: Vec2,
    pub start: Vec2,
    pub end: Vec2,
}

impl ElementFrame {
    /// Affine map `[−1, 1] → Γ_h` with `±1` at the element endpoints.
    pub fn map(&self, u: f64) -> Vec2 {
        let a = 0.5 * (1.0 - u);
        let b = 0.5 * (1.0 + u);
        [a * self.start[0] + b * self.end[0], a * self.start[1] + b * self.end[1]]
    }

    /// Jacobian of [`ElementFrame::map`] with respect to arc length.
    pub fn jacobian(&self) -> f64 {
        0.5 * self.length
    }
}

/// Mesh of a closed curve. Element `j` runs from node `j` to node `j+1`
/// (cyclically), so node and element counts coincide.
#[derive(Debug, Clone)]
pub struct Mesh {
    curve: Arc<Curve>,
    nodes: Vec<f64>,
    elements: Vec<Element>,
    level: usize,
    /// For each element, the element of the previous mesh it descends from.
    parents: Option<Vec<usize>>,
}

impl Mesh {
    /// Uniform initial mesh: equal `θ` steps on ellipses, equal arc-length
    /// steps per edge on polygons with every corner a node.
    pub fn initial(curve: Curve, m0: usize) -> Result<Self> {
        if m0 < 4 {
            return Err(Error::Geometry(format!(
                "initial mesh needs at least 4 elements, got {m0}"
            )));
        }
        let nodes = match &curve {
            Curve::Ellipse { .. } => (0..m0).map(|m| 2.0 * PI * m as f64 / m0 as f64).collect(),
            Curve::Polygon(p) => {
                let counts = distribute_per_edge(p, m0)?;
                let mut nodes = Vec::with_capacity(m0);
                for (i, &k) in counts.iter().enumerate() {
                    let len = p.edge_len(i);
                    for j in 0..k {
                        nodes.push(p.cum[i] + len * j as f64 / k as f64);
                    }
                }
                nodes
            }
        };
        Self::from_nodes(Arc::new(curve), nodes, vec![0; m0], 0, None)
    }

    fn from_nodes(
        curve: Arc<Curve>,
        nodes: Vec<f64>,
        depths: Vec<u32>,
        level: usize,
        parents: Option<Vec<usize>>,
    ) -> Result<Self> {
        let period = curve.period();
        let m = nodes.len();
        let mut elements = Vec::with_capacity(m);
        for j in 0..m {
            let t0 = nodes[j];
            let t1 = if j + 1 < m { nodes[j + 1] } else { period };
            if !(t1 > t0) {
                return Err(Error::Geometry(format!("mesh nodes not increasing at {j}")));
            }
            let e = Element::new(&curve, t0, t1, depths[j]);
            if !(e.length > 0.0) {
                return Err(Error::Geometry(format!("element {j} has zero length")));
            }
            elements.push(e);
        }
        Ok(Mesh {
            curve,
            nodes,
            elements,
            level,
            parents,
        })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn curve_arc(&self) -> &Arc<Curve> {
        &self.curve
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, m: usize) -> &Element {
        &self.elements[m]
    }

    /// Number of refinement steps since the initial mesh.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Element of the previous mesh each element descends from.
    pub fn parents(&self) -> Option<&[usize]> {
        self.parents.as_deref()
    }

    /// Node indices `(start, end)` of element `m`.
    #[inline]
    pub fn element_nodes(&self, m: usize) -> (usize, usize) {
        (m, (m + 1) % self.len())
    }

    pub fn h_max(&self) -> f64 {
        self.elements.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.elements.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn total_length(&self) -> f64 {
        self.elements.iter().map(|e| e.length).sum()
    }

    pub fn element_frame(&self, m: usize) -> ElementFrame {
        let e = &self.elements[m];
        ElementFrame {
            midpoint: e.midpoint,
            length: e.length,
            normal: e.normal,
            start: e.start,
            end: e.end,
        }
    }

    /// Index of the element whose parameter interval contains `t`.
    pub fn locate(&self, t: f64) -> usize {
        let t = t.rem_euclid(self.curve.period());
        match self.nodes.binary_search_by(|n| n.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    /// Nearest element to `x` and the distance to its chord.
    pub fn nearest_element(&self, x: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (m, e) in self.elements.iter().enumerate() {
            let d = e.distance(x);
            if d < best.1 {
                best = (m, d);
            }
        }
        best
    }

    /// Splits every element at its parameter midpoint; children of element
    /// `e` are `2e` and `2e + 1`.
    pub fn uniform_refine(&self) -> Mesh {
        let all: Vec<usize> = (0..self.len()).collect();
        self.bisect_elements(&all)
            .expect("bisecting every element of a valid mesh cannot fail")
    }

    /// Splits the marked elements at their parameter midpoints.
    pub fn bisect_elements(&self, marked: &[usize]) -> Result<Mesh> {
        let m = self.len();
        let mut flag = vec![false; m];
        for &e in marked {
            if e >= m {
                return Err(Error::Geometry(format!("marked element {e} out of range (M = {m})")));
            }
            flag[e] = true;
        }
        let mut nodes = Vec::with_capacity(m + marked.len());
        let mut depths = Vec::with_capacity(m + marked.len());
        let mut parents = Vec::with_capacity(m + marked.len());
        for (j, e) in self.elements.iter().enumerate() {
            nodes.push(e.t_start);
            depths.push(e.depth + flag[j] as u32);
            parents.push(j);
            if flag[j] {
                nodes.push(0.5 * (e.t_start + e.t_end));
                depths.push(e.depth + 1);
                parents.push(j);
            }
        }
        Self::from_nodes(self.curve.clone(), nodes, depths, self.level + 1, Some(parents))
    }

    /// CSV rendition with one row per element.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("element_id,t_start,t_end,x_start,y_start,x_end,y_end,length,nu_x,nu_y,level\n");
        for (j, e) in self.elements.iter().enumerate() {
            let _ = writeln!(
                s,
                "{j},{},{},{},{},{},{},{},{},{},{}",
                fmt17(e.t_start),
                fmt17(e.t_end),
                fmt17(e.start[0]),
                fmt17(e.start[1]),
                fmt17(e.end[0]),
                fmt17(e.end[1]),
                fmt17(e.length),
                fmt17(e.normal[0]),
                fmt17(e.normal[1]),
                e.depth
            );
        }
        s
    }

    pub fn describe(&self) -> String {
        format!(
            "{} mesh with {} elements (h_max {:.4}, h_min {:.4})",
            self.curve.kind_name(),
            self.len(),
            self.h_max(),
            self.h_min()
        )
    }
}

/// Shortest-round-trip-safe number formatting with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.16e}")
    }
}

fn distribute_per_edge(p: &Polygon, m0: usize) -> Result<Vec<usize>> {
    let n = p.vertices.len();
    if m0 < n {
        return Err(Error::Geometry(format!(
            "M0 = {m0} is smaller than the number of polygon corners ({n})"
        )));
    }
    let exact: Vec<f64> = (0..n).map(|i| m0 as f64 * p.edge_len(i) / p.perimeter).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&x| (x.floor() as usize).max(1)).collect();
    let mut total: usize = counts.iter().sum();
    // largest remainder, ties by edge index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let ri = exact[i] - counts[i] as f64;
        let rj = exact[j] - counts[j] as f64;
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    let mut k = 0;
    while total < m0 {
        counts[order[k % n]] += 1;
        total += 1;
        k += 1;
    }
    while total > m0 {
        // only possible when the max(1) floor overshot; shrink the longest edges
        let i = (0..n)
            .filter(|&i| counts[i] > 1)
            .max_by(|&i, &j| {
                (exact[i] - counts[i] as f64)
                    .partial_cmp(&(exact[j] - counts[j] as f64))
                    .unwrap()
                    .reverse()
                    .then(j.cmp(&i))
            })
            .ok_or_else(|| Error::Geometry("cannot distribute elements over edges".into()))?;
        counts[i] -= 1;
        total -= 1;
    }
    Ok(counts)
}

#[inline]
pub(crate) fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn segment_distance(x: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let u = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
    dist(x, [a[0] + u * d[0], a[1] + u * d[1]])
}

/// Distance between two segments.
pub(crate) fn segment_segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    segment_distance(a0, b0, b1)
        .min(segment_distance(a1, b0, b1))
        .min(segment_distance(b0, a0, a1))
        .min(segment_distance(b1, a0, a1))
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let orient = |a: Vec2, b: Vec2, c: Vec2| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Vec2, b: Vec2, c: Vec2, d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Default isosceles wedge: tip angle 20°, sides 0.94, base on the line
/// `x = 0` and the tip at `(0.92572, 0.1)`.
pub fn default_wedge() -> Vec<Vec2> {
    let half = 10f64.to_radians();
    let side = 0.94;
    let (dx, dy) = (side * half.cos(), side * half.sin());
    vec![[0.0, 0.1 - dy], [dx, 0.1], [0.0, 0.1 + dy]]
}
