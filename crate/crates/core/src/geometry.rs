//! Polygons derived from pattern masks and the quantities the shape features
//! are computed from.
//!
//! Contours run through pixel centres, so a pixel `(x, y)` contributes the
//! vertex `(x, y)`. Orientation follows screen convention (y grows downward):
//! a counter-clockwise outline has a negative shoelace sum.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::Mask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Closed polygon; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Requires at least three vertices and no two cyclically consecutive
    /// vertices equal.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::ZeroLengthEdge(i));
            }
        }
        Ok(Self { vertices })
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| c.into()).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn reversed(&self) -> Polygon {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        Polygon { vertices }
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Per-vertex angle in degrees and turn direction.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexAngleProfile {
    pub angles: Vec<f64>,
    pub turn_signs: Vec<i8>,
}

// Clockwise on screen, starting west.
const RING: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(dx: i64, dy: i64) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is an 8-neighbour")
}

/// 8-connected component labels (0 = background, components numbered from 1
/// in raster order of their first pixel) and each component's size.
fn label_components(mask: &Mask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut label = vec![0u32; (w * h) as usize];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..(w * h) as usize {
        if !mask.bits()[start] || label[start] != 0 {
            continue;
        }
        let next = sizes.len() as u32 + 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i as i64 % w, i as i64 / w);
            for (dx, dy) in RING {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = (ny * w + nx) as usize;
                    if label[j] == 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (label, sizes)
}

fn component_mask(mask: &Mask, label: &[u32], keep: u32) -> Mask {
    let w = mask.width() as usize;
    Mask::from_fn(mask.width(), mask.height(), |x, y| label[y as usize * w + x as usize] == keep)
}

/// Largest 8-connected component of `mask`; ties go to the component found
/// first in raster order.
pub fn largest_component(mask: &Mask) -> Result<Mask> {
    let (label, sizes) = label_components(mask);
    let mut best: Option<(usize, u32)> = None;
    for (i, &size) in sizes.iter().enumerate() {
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, i as u32 + 1));
        }
    }
    let (_, keep) = best.ok_or(Error::EmptyMask)?;
    Ok(component_mask(mask, &label, keep))
}

/// Every 8-connected component of `mask`, in raster order of first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Mask> {
    let (label, sizes) = label_components(mask);
    (1..=sizes.len() as u32).map(|k| component_mask(mask, &label, k)).collect()
}

/// Moore-neighbour trace of a single-component mask, clockwise on screen,
/// starting from the first set pixel in raster order.
fn moore_trace(mask: &Mask) -> Vec<(i64, i64)> {
    let w = mask.width() as usize;
    let first = mask.bits().iter().position(|&b| b).expect("nonempty mask");
    let start = ((first % w) as i64, (first / w) as i64);

    let mut contour = vec![start];
    let mut cur = start;
    // the west neighbour of the first raster pixel is never set
    let mut back = 0usize;
    let mut second: Option<(i64, i64)> = None;
    let limit = 4 * mask.count() + 16;

    for _ in 0..limit {
        let found = (1..=8).map(|i| (back + i) % 8).find(|&d| {
            let (dx, dy) = RING[d];
            mask.get_signed(cur.0 + dx, cur.1 + dy)
        });
        let Some(d) = found else {
            return contour;
        };
        let next = (cur.0 + RING[d].0, cur.1 + RING[d].1);
        if cur == start && second == Some(next) {
            contour.pop();
            return contour;
        }
        let (px, py) = RING[(d + 7) % 8];
        back = ring_index(cur.0 + px - next.0, cur.1 + py - next.1);
        if second.is_none() {
            second = Some(next);
        }
        contour.push(next);
        cur = next;
    }
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    contour
}

/// Drop consecutive duplicates and out-and-back spurs (`a, b, a`) so that
/// one-pixel-wide appendages do not leave zero-width spikes.
fn remove_spurs(points: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(points.len());
    for p in points {
        if out.last() == Some(&p) {
            continue;
        }
        out.push(p);
        while out.len() >= 3 && out[out.len() - 1] == out[out.len() - 3] {
            out.truncate(out.len() - 2);
        }
    }
    loop {
        let n = out.len();
        if n >= 2 && out[n - 1] == out[0] {
            out.pop();
        } else if n >= 3 && out[n - 1] == out[1] {
            // out[0] is the tip of a spur that wraps around the seam
            out.pop();
            out.remove(0);
        } else if n >= 3 && out[n - 2] == out[0] {
            out.truncate(n - 2);
        } else {
            return out;
        }
    }
}

fn signed_shoelace(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .sum::<f64>()
}

/// Outer boundary of the largest 8-connected component, counter-clockwise on
/// screen.
///
/// Components with no interior (single pixels, one-pixel-wide lines) are
/// promoted to the rectangle covering their pixel footprint.
pub fn trace_contour(mask: &Mask) -> Result<Polygon> {
    let component = largest_component(mask)?;
    let ring = remove_spurs(moore_trace(&component));
    let mut vertices: Vec<Point> = ring
        .iter()
        .map(|&(x, y)| Point::new(x as f64, y as f64))
        .collect();
    let area = signed_shoelace(&vertices);
    if vertices.len() < 3 || area == 0.0 {
        let (x0, y0, w, h) = component.bounding_box().expect("nonempty component");
        let (x0, y0, x1, y1) = (x0 as f64, y0 as f64, (x0 + w) as f64, (y0 + h) as f64);
        return Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x0, y1),
            Point::new(x1, y1),
            Point::new(x1, y0),
        ]);
    }
    if area > 0.0 {
        vertices.reverse();
    }
    // start at the top-left extreme vertex, which is always a hull corner and
    // so a safe anchor for simplification
    let first = (0..vertices.len())
        .min_by(|&i, &j| {
            (vertices[i].y, vertices[i].x)
                .partial_cmp(&(vertices[j].y, vertices[j].x))
                .expect("integer coordinates")
        })
        .expect("nonempty ring");
    vertices.rotate_left(first);
    Polygon::new(vertices)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.sub(a).norm();
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.sub(Point::new(a.x + t * ab.x, a.y + t * ab.y)).norm()
}

fn rdp_mark(points: &[Point], first: usize, last: usize, epsilon: f64, keep: &mut [bool]) {
    let mut stack = vec![(first, last)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (pa, pb) = (points[a], points[b % points.len()]);
        let (idx, dist) = (a + 1..b)
            .map(|i| (i, segment_distance(points[i], pa, pb)))
            .fold((a, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if dist > epsilon {
            keep[idx] = true;
            stack.push((a, idx));
            stack.push((idx, b));
        }
    }
}

fn is_collinear(prev: Point, cur: Point, next: Point) -> bool {
    cur.sub(prev).cross(next.sub(cur)) == 0.0
}

/// Ramer-Douglas-Peucker simplification of a closed ring.
///
/// The ring is split at vertex 0 and the vertex farthest from it; exactly
/// collinear vertices are always removed. The result keeps at least three
/// vertices, all taken from the input.
pub fn simplify_polygon(p: &Polygon, epsilon: f64) -> Polygon {
    let pts = &p.vertices;
    let n = pts.len();
    if n <= 3 {
        return p.clone();
    }
    let far = (1..n)
        .max_by(|&i, &j| {
            let di = pts[i].sub(pts[0]).norm();
            let dj = pts[j].sub(pts[0]).norm();
            di.total_cmp(&dj).then(j.cmp(&i))
        })
        .expect("n > 3");
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    rdp_mark(pts, 0, far, epsilon, &mut keep);
    // second half wraps back to vertex 0, addressed as index n
    rdp_mark(pts, far, n, epsilon, &mut keep);

    let mut idx: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();

    let mut changed = true;
    while changed && idx.len() > 3 {
        changed = false;
        for k in 0..idx.len() {
            let m = idx.len();
            let (a, b, c) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            if is_collinear(pts[a], pts[b], pts[c]) {
                idx.remove(k);
                changed = true;
                break;
            }
        }
    }

    if idx.len() < 3 {
        let (a, b) = (pts[idx[0]], pts[*idx.last().expect("anchors kept")]);
        let extra = (0..n)
            .filter(|i| !idx.contains(i))
            .max_by(|&i, &j| {
                segment_distance(pts[i], a, b)
                    .total_cmp(&segment_distance(pts[j], a, b))
                    .then(j.cmp(&i))
            })
            .expect("n > 3");
        idx.push(extra);
        idx.sort_unstable();
    }
    let vertices: Vec<Point> = idx.into_iter().map(|i| pts[i]).collect();
    // rings of thin, self-touching outlines revisit points and can collapse;
    // keep the input rather than return a degenerate or flipped ring
    let area = signed_shoelace(&vertices);
    let m = vertices.len();
    let repeats = (0..m).any(|i| vertices[i] == vertices[(i + 1) % m]);
    if repeats || area == 0.0 || area.signum() != signed_shoelace(pts).signum() {
        return p.clone();
    }
    Polygon { vertices }
}

/// Simplification tolerance for a traced outline: 1% of its bounding-box
/// diagonal, never below one pixel.
pub fn relative_epsilon(p: &Polygon) -> f64 {
    (0.01 * bounding_box(p).diagonal()).max(1.0)
}

/// Traced and simplified outline of a pattern mask.
pub fn polygon_from_mask(mask: &Mask) -> Result<Polygon> {
    let traced = trace_contour(mask)?;
    let eps = relative_epsilon(&traced);
    Ok(simplify_polygon(&traced, eps))
}

pub fn signed_area(p: &Polygon) -> f64 {
    signed_shoelace(&p.vertices) / 2.0
}

pub fn polygon_area(p: &Polygon) -> f64 {
    signed_area(p).abs()
}

pub fn perimeter(p: &Polygon) -> f64 {
    p.edges().map(|(a, b)| b.sub(a).norm()).sum()
}

pub fn edge_lengths(p: &Polygon) -> Vec<f64> {
    p.edges().map(|(a, b)| b.sub(a).norm()).collect()
}

pub fn bounding_box(p: &Polygon) -> BoundingBox {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &p.vertices {
        x0 = x0.min(v.x);
        y0 = y0.min(v.y);
        x1 = x1.max(v.x);
        y1 = y1.max(v.y);
    }
    BoundingBox {
        x0,
        y0,
        width: x1 - x0,
        height: y1 - y0,
    }
}

/// Angle at each vertex between the edges to its two neighbours, in degrees
/// (a square gives 90, an equilateral triangle 60), and the sign of the 2-D
/// cross product of the incoming and outgoing edges.
pub fn vertex_angles(p: &Polygon) -> Result<VertexAngleProfile> {
    let pts = &p.vertices;
    let n = pts.len();
    let mut angles = Vec::with_capacity(n);
    let mut turn_signs = Vec::with_capacity(n);
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let cur = pts[i];
        let next = pts[(i + 1) % n];
        let back = prev.sub(cur);
        let fwd = next.sub(cur);
        let (lb, lf) = (back.norm(), fwd.norm());
        if lb == 0.0 {
            return Err(Error::ZeroLengthEdge((i + n - 1) % n));
        }
        if lf == 0.0 {
            return Err(Error::ZeroLengthEdge(i));
        }
        let cos = (back.dot(fwd) / (lb * lf)).clamp(-1.0, 1.0);
        angles.push(cos.acos().to_degrees());
        let cross = cur.sub(prev).cross(fwd);
        turn_signs.push(if cross > 0.0 {
            1
        } else if cross < 0.0 {
            -1
        } else {
            0
        });
    }
    Ok(VertexAngleProfile { angles, turn_signs })
}

/// Even-odd fill of `rings`, sampling each pixel at its centre.
pub fn rasterize(rings: &[Vec<Point>], width: u32, height: u32) -> Mask {
    Mask::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut inside = false;
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let (a, b) = (ring[i], ring[(i + 1) % n]);
                if (a.y > py) != (b.y > py) {
                    let xc = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
                    if px < xc {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    })
}
