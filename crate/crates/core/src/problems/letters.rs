//! Four letter-shaped inclusions ("I", "I", "T", "M") in the rectangle [0, 1.7] × [0, 1].
//!
//! Each letter is a union of axis-aligned rectangles. Its interface is the
//! boundary of that union, split into maximal straight segments with exact
//! outward normals.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::allocate_by_weight;

use super::{box_faces, AffineField, Geometry, InterfaceSpec, Point, ProblemError, ProblemKind, ProblemSpec, Quadratic, Surface, SurfacePoint};

const DOMAIN: [(f64, f64); 2] = [(0.0, 1.7), (0.0, 1.0)];
const KAPPA_2D: [f64; 5] = [1.0 / 4.0, 1.0 / 6.0, 1.0 / 10.0, 1.0 / 14.0, 1.0 / 3.0];
const MIN_WIDTH: f64 = 1e-3;
const LAYOUT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: &Point) -> bool {
        x[0] >= self.x0 && x[0] <= self.x1 && x[1] >= self.y0 && x[1] <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn intersects_closed(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    fn overlaps_open(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    pub name: String,
    pub rects: Vec<Rect>,
}

/// Straight interface piece with the outward normal of its letter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub normal: [f64; 3],
}

impl Segment {
    pub fn length(&self) -> f64 {
        ((self.end[0] - self.start[0]).powi(2) + (self.end[1] - self.start[1]).powi(2)).sqrt()
    }

    pub fn distance(&self, x: &Point) -> f64 {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = (((x[0] - self.start[0]) * d[0] + (x[1] - self.start[1]) * d[1]) / len2).clamp(0.0, 1.0);
        let p = [self.start[0] + t * d[0], self.start[1] + t * d[1]];
        ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt()
    }
}

impl Letter {
    pub fn contains(&self, x: &Point) -> bool {
        self.rects.iter().any(|r| r.contains(x))
    }

    pub fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for r in &self.rects {
            xl = xl.min(r.x0);
            xh = xh.max(r.x1);
            yl = yl.min(r.y0);
            yh = yh.max(r.y1);
        }
        vec![(xl, xh), (yl, yh)]
    }

    /// Boundary of the union of rectangles as maximal straight segments.
    pub fn boundary_segments(&self) -> Vec<Segment> {
        let probe = 1e-7;
        // (vertical, line coordinate, outward sign, lo, hi)
        let mut pieces: Vec<(bool, f64, f64, f64, f64)> = Vec::new();
        for r in &self.rects {
            let edges = [
                (false, r.y0, -1.0, r.x0, r.x1),
                (false, r.y1, 1.0, r.x0, r.x1),
                (true, r.x0, -1.0, r.y0, r.y1),
                (true, r.x1, 1.0, r.y0, r.y1),
            ];
            for (vertical, line, sign, lo, hi) in edges {
                let mut cuts: Vec<f64> = self
                    .rects
                    .iter()
                    .flat_map(|o| if vertical { [o.y0, o.y1] } else { [o.x0, o.x1] })
                    .filter(|&c| c > lo && c < hi)
                    .collect();
                cuts.push(lo);
                cuts.push(hi);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                for w in cuts.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    let outside = if vertical {
                        [line + sign * probe, mid, 0.0]
                    } else {
                        [mid, line + sign * probe, 0.0]
                    };
                    if !self.contains(&outside) {
                        pieces.push((vertical, line, sign, w[0], w[1]));
                    }
                }
            }
        }
        pieces.sort_by(|a, b| {
            (a.0, a.2 > 0.0)
                .cmp(&(b.0, b.2 > 0.0))
                .then(a.1.total_cmp(&b.1))
                .then(a.3.total_cmp(&b.3))
        });
        let mut merged: Vec<(bool, f64, f64, f64, f64)> = Vec::new();
        for p in pieces {
            match merged.last_mut() {
                Some(last) if last.0 == p.0 && last.1 == p.1 && last.2 == p.2 && last.4 == p.3 => last.4 = p.4,
                _ => merged.push(p),
            }
        }
        merged
            .into_iter()
            .map(|(vertical, line, sign, lo, hi)| {
                if vertical {
                    Segment { start: [line, lo], end: [line, hi], normal: [sign, 0.0, 0.0] }
                } else {
                    Segment { start: [lo, line], end: [hi, line], normal: [0.0, sign, 0.0] }
                }
            })
            .collect()
    }
}

/// Versioned placement of the four letters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterLayout {
    pub version: u32,
    pub letters: Vec<Letter>,
}

impl Default for LetterLayout {
    fn default() -> Self {
        let letter = |name: &str, rects: &[Rect]| Letter { name: name.to_string(), rects: rects.to_vec() };
        Self {
            version: LAYOUT_VERSION,
            letters: vec![
                letter("I", &[Rect::new(0.15, 0.27, 0.2, 0.8)]),
                letter("I", &[Rect::new(0.40, 0.52, 0.2, 0.8)]),
                letter("T", &[Rect::new(0.65, 1.00, 0.68, 0.8), Rect::new(0.765, 0.885, 0.2, 0.68)]),
                letter(
                    "M",
                    &[
                        Rect::new(1.13, 1.23, 0.2, 0.8),
                        Rect::new(1.45, 1.55, 0.2, 0.8),
                        // the two diagonal strokes
                        Rect::new(1.23, 1.34, 0.5, 0.8),
                        Rect::new(1.34, 1.45, 0.5, 0.8),
                    ],
                ),
            ],
        }
    }
}

impl LetterLayout {
    pub fn from_json_file(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io(format!("{}: {e}", path.display())))?;
        let layout: LetterLayout =
            serde_json::from_str(&text).map_err(|e| ProblemError::Layout(format!("{}: {e}", path.display())))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let fail = |msg: String| Err(ProblemError::Layout(msg));
        if self.version != LAYOUT_VERSION {
            return fail(format!("unsupported layout version {}", self.version));
        }
        if self.letters.len() != 4 {
            return fail(format!("expected 4 letters, found {}", self.letters.len()));
        }
        for (li, letter) in self.letters.iter().enumerate() {
            if letter.rects.is_empty() {
                return fail(format!("letter {li} has no rectangles"));
            }
            for (ri, r) in letter.rects.iter().enumerate() {
                if !(r.x1 - r.x0 >= MIN_WIDTH && r.y1 - r.y0 >= MIN_WIDTH) {
                    return fail(format!("letter {li} rect {ri} is degenerate"));
                }
                let inside = r.x0 > DOMAIN[0].0 && r.x1 < DOMAIN[0].1 && r.y0 > DOMAIN[1].0 && r.y1 < DOMAIN[1].1;
                if !inside {
                    return fail(format!("letter {li} rect {ri} is not strictly inside the domain"));
                }
                if letter.rects[..ri].iter().any(|o| o.overlaps_open(r)) {
                    return fail(format!("letter {li} rect {ri} overlaps another rect of the same letter"));
                }
            }
            for (lj, other) in self.letters.iter().enumerate().skip(li + 1) {
                let touching = letter.rects.iter().any(|a| other.rects.iter().any(|b| a.intersects_closed(b)));
                if touching {
                    return fail(format!("letters {li} and {lj} overlap or touch"));
                }
            }
        }
        Ok(())
    }

    pub fn membership(&self, x: &Point) -> usize {
        self.letters.iter().position(|l| l.contains(x)).map_or(0, |k| k + 1)
    }
}

/// Uniform points inside the segments, allocated by length (largest remainder).
pub(super) fn sample_segments<R: Rng>(segments: &[Segment], count: usize, rng: &mut R) -> Vec<SurfacePoint> {
    let lengths: Vec<f64> = segments.iter().map(Segment::length).collect();
    let alloc = allocate_by_weight(&lengths, count);
    let mut out = Vec::with_capacity(count);
    for (seg, n) in segments.iter().zip(alloc) {
        for _ in 0..n {
            let t = loop {
                let t: f64 = rng.random();
                if t > 0.0 {
                    break t;
                }
            };
            let x = [
                seg.start[0] + t * (seg.end[0] - seg.start[0]),
                seg.start[1] + t * (seg.end[1] - seg.start[1]),
                0.0,
            ];
            out.push(SurfacePoint { x, normal: seg.normal });
        }
    }
    out
}

pub fn problem_2d_letters(layout: &LetterLayout) -> Result<ProblemSpec, ProblemError> {
    layout.validate()?;
    let solution = vec![
        Quadratic::new([1.0, 1.0, 0.0], [0.0; 3], 0.0),
        Quadratic::new([3.0, 0.0, 0.0], [0.0, 2.0, 0.0], 0.0),
        Quadratic::new([4.0, 1.0, 0.0], [0.0; 3], 0.0),
        Quadratic::new([1.0, 5.0, 0.0], [0.0; 3], 0.0),
        Quadratic::new([0.5, 1.0, 0.0], [0.0; 3], 0.0),
    ];
    // κ_4 Δu_4 = 12/14; every other subdomain has κ Δu = 1
    let source = vec![1.0, 1.0, 1.0, 12.0 / 14.0, 1.0];
    let bounds = DOMAIN.to_vec();
    let background_flux = AffineField::flux(KAPPA_2D[0], &solution[0]);
    let dirichlet = box_faces(&bounds, 0, solution[0], background_flux);
    let interfaces = layout
        .letters
        .iter()
        .enumerate()
        .map(|(k, letter)| {
            let inner = k + 1;
            InterfaceSpec {
                id: k,
                second: inner,
                first: 0,
                surface: Surface::Segments { segments: letter.boundary_segments() },
                value_jump: solution[inner].sub(&solution[0]),
                flux_jump: AffineField::flux(KAPPA_2D[inner], &solution[inner]).sub(&background_flux),
            }
        })
        .collect();
    Ok(ProblemSpec {
        kind: ProblemKind::Letters2d,
        dim: 2,
        bounds,
        kappa: KAPPA_2D.to_vec(),
        source,
        geometry: Geometry::Letters { layout: layout.clone() },
        solution,
        dirichlet,
        neumann: Vec::new(),
        interfaces,
    })
}
