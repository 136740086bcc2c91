//! Circle fitting and two-circle delineation of the iris from its mask.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::raster::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    /// Point at angle `theta`, measured counter-clockwise from +x as the
    /// image is displayed (image y grows downward).
    #[inline]
    pub fn point_at(&self, theta: f64) -> (f64, f64) {
        (self.cx + self.r * theta.cos(), self.cy - self.r * theta.sin())
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy <= self.r * self.r
    }
}

/// Integer rectangle `(x, y, w, h)` in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrisGeometry {
    /// Pupil boundary.
    pub inner: Circle,
    /// Limbic boundary.
    pub outer: Circle,
    /// Tight bounding rectangle of the mask foreground.
    pub bbox: BoundingBox,
}

impl IrisGeometry {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.inner.r > 0.0 && self.outer.r > 0.0) {
            return Err(PreprocessError::DegenerateGeometry(
                "non-positive radius".into(),
            ));
        }
        if self.inner.r >= self.outer.r {
            return Err(PreprocessError::DegenerateGeometry(format!(
                "inner radius {} not smaller than outer radius {}",
                self.inner.r, self.outer.r
            )));
        }
        if !self.outer.contains(self.inner.cx, self.inner.cy) {
            return Err(PreprocessError::DegenerateGeometry(
                "inner center outside the outer circle".into(),
            ));
        }
        Ok(())
    }
}

/// Algebraic (Kasa) least-squares circle fit.
///
/// Solves `x^2 + y^2 + D x + E y + F = 0` in the least-squares sense through
/// the 3x3 normal equations. Points are centered on their mean first to keep
/// the system well conditioned.
pub fn fit_circle(points: &[(f64, f64)]) -> Result<Circle, PreprocessError> {
    if points.len() < 3 {
        return Err(PreprocessError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);

    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(x, y) in points {
        let (u, v) = (x - mx, y - my);
        let row = [u, v, 1.0];
        let rhs = -(u * u + v * v);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * rhs;
        }
    }

    // collinear (or coincident) points leave the 2x2 scatter block singular
    let scatter = ata[0][0] + ata[1][1];
    let det2 = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
    if scatter <= 0.0 || det2 <= 1e-12 * scatter * scatter {
        return Err(PreprocessError::DegeneratePoints);
    }

    let [d, e, f] = solve3(ata, atb).ok_or(PreprocessError::DegeneratePoints)?;
    let (cu, cv) = (-d / 2.0, -e / 2.0);
    let r2 = cu * cu + cv * cv - f;
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(PreprocessError::DegeneratePoints);
    }
    Ok(Circle::new(cu + mx, cv + my, r2.sqrt()))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let k = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= k * a[col][c];
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

const NEIGHBORS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Fits the pupil and limbic circles to a binary iris mask.
///
/// Boundary points are crack-edge midpoints between a pixel and its 4-neighbor
/// across the foreground/background transition. The outer circle uses edges
/// between foreground and exterior background (anything not inside an
/// enclosed hole, including outside the image) whose outward normal faces away
/// from the foreground centroid. The inner circle uses the edges of the largest
/// background component fully enclosed by foreground. Without such a hole, or
/// when the hole fit is inconsistent with the outer circle, the pupil falls
/// back to a circle of radius `outer.r / 4` at the centroid.
pub fn delineate(mask: &Mask) -> Result<IrisGeometry, PreprocessError> {
    let (w, h) = (mask.width(), mask.height());
    let mut count = 0usize;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                count += 1;
                sx += x as f64;
                sy += y as f64;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if count == 0 {
        return Err(PreprocessError::EmptyMask);
    }
    let (gx, gy) = (sx / count as f64, sy / count as f64);
    let bbox = BoundingBox {
        x: x0,
        y: y0,
        w: x1 - x0 + 1,
        h: y1 - y0 + 1,
    };

    let holes = HoleLabels::compute(mask);
    let is_fg = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
    };
    let hole_of = |x: i64, y: i64| -> Option<usize> {
        if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
            None
        } else {
            holes.label(x as usize, y as usize)
        }
    };

    let mut facing = Vec::new();
    let mut exterior = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !is_fg(x, y) {
                continue;
            }
            for &(dx, dy) in &NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if is_fg(nx, ny) || hole_of(nx, ny).is_some() {
                    continue;
                }
                let p = (x as f64 + 0.5 * dx as f64, y as f64 + 0.5 * dy as f64);
                exterior.push(p);
                let dot = dx as f64 * (x as f64 - gx) + dy as f64 * (y as f64 - gy);
                if dot > 0.0 {
                    facing.push(p);
                }
            }
        }
    }
    let outer = fit_circle(&facing)
        .or_else(|_| fit_circle(&exterior))
        .map_err(|_| PreprocessError::DegenerateMask)?;

    let fallback = Circle::new(gx, gy, outer.r / 4.0);
    let inner = match holes.largest() {
        Some(label) => {
            let mut pts = Vec::new();
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    if hole_of(x, y) != Some(label) {
                        continue;
                    }
                    for &(dx, dy) in &NEIGHBORS {
                        if is_fg(x + dx, y + dy) {
                            pts.push((x as f64 + 0.5 * dx as f64, y as f64 + 0.5 * dy as f64));
                        }
                    }
                }
            }
            match fit_circle(&pts) {
                Ok(c) if c.r < outer.r && outer.contains(c.cx, c.cy) => c,
                _ => fallback,
            }
        }
        None => fallback,
    };

    let geom = IrisGeometry { inner, outer, bbox };
    geom.validate()?;
    Ok(geom)
}

/// 4-connected background components that do not touch the image border.
struct HoleLabels {
    width: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl HoleLabels {
    const NONE: u32 = u32::MAX;

    fn compute(mask: &Mask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut labels = vec![Self::NONE; w * h];
        let mut visited = vec![false; w * h];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        let mut component = Vec::new();
        for start in 0..w * h {
            if visited[start] || mask.bits()[start] {
                continue;
            }
            visited[start] = true;
            queue.push_back(start);
            component.clear();
            let mut touches_border = false;
            while let Some(i) = queue.pop_front() {
                component.push(i);
                let (x, y) = (i % w, i / w);
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    touches_border = true;
                }
                for &(dx, dy) in &NEIGHBORS {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !visited[j] && !mask.bits()[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            if !touches_border {
                let label = sizes.len() as u32;
                sizes.push(component.len());
                for &i in &component {
                    labels[i] = label;
                }
            }
        }
        Self {
            width: w,
            labels,
            sizes,
        }
    }

    fn label(&self, x: usize, y: usize) -> Option<usize> {
        match self.labels[y * self.width + x] {
            Self::NONE => None,
            l => Some(l as usize),
        }
    }

    /// Largest hole; ties resolve to the first in scan order.
    fn largest(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|b| s > self.sizes[b]) {
                best = Some(i);
            }
        }
        best
    }
}
