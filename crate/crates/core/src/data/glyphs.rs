//! Rotated procedural glyphs.
//!
//! Each class is a stroke template (bar, cross, L, T, ring, ...). An object
//! is one random perturbation of its class template: vertex jitter, scale,
//! stroke width, offset and a small tilt. Every object is rendered once and
//! then rotated into every domain, so the same object id appears at each
//! angle.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Domain, MultiDomainDataset};
use crate::linalg::Matrix;
use crate::rng::{stream, stream_rng, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphConfig {
    /// Side length of the square image.
    pub grid: usize,
    /// Rotation angle of each domain, in degrees.
    pub angles: Vec<f64>,
    pub classes: usize,
    /// Objects per domain (each object appears in every domain).
    pub samples_per_domain: usize,
    /// Standard deviation of additive Gaussian pixel noise.
    pub pixel_noise: f64,
    pub seed: u64,
}

impl Default for GlyphConfig {
    fn default() -> Self {
        Self {
            grid: 16,
            angles: vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0],
            classes: 5,
            samples_per_domain: 500,
            pixel_noise: 0.05,
            seed: 0,
        }
    }
}

impl GlyphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 8 {
            return Err(Error::Config("glyphs: grid must be ≥ 8".into()));
        }
        if self.angles.is_empty() {
            return Err(Error::Config("glyphs: at least one angle required".into()));
        }
        for (i, a) in self.angles.iter().enumerate() {
            if self.angles[..i].contains(a) {
                return Err(Error::Config(format!("glyphs: duplicate angle {a}")));
            }
        }
        if self.classes < 1 || self.classes > TEMPLATES.len() {
            return Err(Error::Config(format!(
                "glyphs: classes must lie in 1..={}",
                TEMPLATES.len()
            )));
        }
        if self.samples_per_domain < 1 {
            return Err(Error::Config(
                "glyphs: samples_per_domain must be ≥ 1".into(),
            ));
        }
        if self.pixel_noise.is_nan() || self.pixel_noise < 0.0 {
            return Err(Error::Config("glyphs: pixel_noise must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn domain_name(angle: f64) -> String {
        format!("rot{angle}")
    }
}

type Stroke = &'static [(f64, f64)];

/// Polylines in `[-1, 1]²`, y pointing down. No two templates are rotations
/// of each other within 90°.
const TEMPLATES: [&[Stroke]; 10] = [
    // bar
    &[&[(0.0, -0.75), (0.0, 0.75)]],
    // cross
    &[&[(0.0, -0.7), (0.0, 0.7)], &[(-0.7, 0.0), (0.7, 0.0)]],
    // L
    &[&[(-0.4, -0.7), (-0.4, 0.6), (0.5, 0.6)]],
    // T
    &[&[(-0.65, -0.6), (0.65, -0.6)], &[(0.0, -0.6), (0.0, 0.7)]],
    // open ring
    &[&[
        (0.6, 0.0),
        (0.42, 0.42),
        (0.0, 0.6),
        (-0.42, 0.42),
        (-0.6, 0.0),
        (-0.42, -0.42),
        (0.0, -0.6),
    ]],
    // triangle
    &[&[(0.0, -0.65), (0.65, 0.55), (-0.65, 0.55), (0.0, -0.65)]],
    // Z
    &[&[(-0.6, -0.6), (0.6, -0.6), (-0.6, 0.6), (0.6, 0.6)]],
    // square
    &[&[
        (-0.5, -0.5),
        (0.5, -0.5),
        (0.5, 0.5),
        (-0.5, 0.5),
        (-0.5, -0.5),
    ]],
    // two bars
    &[&[(-0.35, -0.7), (-0.35, 0.7)], &[(0.35, -0.7), (0.35, 0.7)]],
    // chevron
    &[&[(-0.6, -0.5), (0.0, 0.6), (0.6, -0.5)]],
];

/// A perturbed template: concrete polylines plus a stroke half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphObject {
    pub class: usize,
    pub strokes: Vec<Vec<(f64, f64)>>,
    pub half_width: f64,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sample_object(class: usize, rng: &mut Rng) -> GlyphObject {
    // Style varies in rotation-invariant ways (size, thickness, shape
    // jitter); the small tilt keeps objects distinguishable from rotations.
    let scale = rng.gen_range(0.5..1.05);
    let tilt = rng.gen_range(-0.05..0.05f64);
    let (s, c) = tilt.sin_cos();
    let offset = (rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
    let half_width = rng.gen_range(0.07..0.3);
    let strokes = TEMPLATES[class]
        .iter()
        .map(|stroke| {
            stroke
                .iter()
                .map(|&(x, y)| {
                    let x = scale * (x + 0.1 * normal(rng));
                    let y = scale * (y + 0.1 * normal(rng));
                    (c * x - s * y + offset.0, s * x + c * y + offset.1)
                })
                .collect()
        })
        .collect();
    GlyphObject {
        class,
        strokes,
        half_width,
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Standard deviation, in pixels, of the Gaussian fall-off outside a stroke.
/// Bilinear resampling loses roughly a quarter of the image curvature per
/// rotation round trip; at 1.5 px the worst interior round-trip error on a
/// 16×16 grid is about 0.1.
const EDGE_SIGMA_PX: f64 = 1.5;

/// Renders an object at 0° into a `grid × grid` image (row-major): 1 inside a
/// stroke, Gaussian fall-off outside it.
pub fn render_object(obj: &GlyphObject, grid: usize) -> Vec<f64> {
    let half = grid as f64 / 2.0;
    let pixel = 1.0 / half;
    let mut img = vec![0.0; grid * grid];
    for r in 0..grid {
        for col in 0..grid {
            let p = (
                (col as f64 + 0.5 - half) / half,
                (r as f64 + 0.5 - half) / half,
            );
            // smooth union of per-segment fall-offs: a hard `min` over
            // distances would crease the image where strokes meet
            let mut dark = 1.0;
            for stroke in &obj.strokes {
                for w in stroke.windows(2) {
                    let dist = segment_distance(p, w[0], w[1]);
                    let outside = (dist - obj.half_width).max(0.0) / pixel / EDGE_SIGMA_PX;
                    dark *= 1.0 - (-0.5 * outside * outside).exp();
                }
            }
            img[r * grid + col] = 1.0 - dark;
        }
    }
    img
}

/// Rotates a square image by `degrees` about its centre using inverse-mapped
/// bilinear sampling; samples outside the image read as 0.
pub fn rotate_image(img: &[f64], grid: usize, degrees: f64) -> Vec<f64> {
    assert_eq!(img.len(), grid * grid, "image size");
    let (s, c) = (degrees * PI / 180.0).sin_cos();
    let centre = (grid as f64 - 1.0) / 2.0;
    let at = |r: isize, col: isize| -> f64 {
        if r < 0 || col < 0 || r >= grid as isize || col >= grid as isize {
            0.0
        } else {
            img[r as usize * grid + col as usize]
        }
    };
    let mut out = vec![0.0; grid * grid];
    for r in 0..grid {
        for col in 0..grid {
            let (u, v) = (col as f64 - centre, r as f64 - centre);
            // inverse rotation of the destination coordinate
            let sx = c * u + s * v + centre;
            let sy = -s * u + c * v + centre;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut val = (1.0 - fx) * (1.0 - fy) * at(y0, x0);
            if fx != 0.0 {
                val += fx * (1.0 - fy) * at(y0, x0 + 1);
            }
            if fy != 0.0 {
                val += (1.0 - fx) * fy * at(y0 + 1, x0);
            }
            if fx != 0.0 && fy != 0.0 {
                val += fx * fy * at(y0 + 1, x0 + 1);
            }
            out[r * grid + col] = val;
        }
    }
    out
}

pub fn generate_glyphs(cfg: &GlyphConfig) -> Result<MultiDomainDataset> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::GLYPHS);
    let n = cfg.samples_per_domain;
    let side = cfg.grid;
    let templates: Vec<Vec<f64>> = (0..n)
        .map(|i| render_object(&sample_object(i % cfg.classes, &mut rng), side))
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % cfg.classes).collect();
    let mut domains = Vec::with_capacity(cfg.angles.len());
    for &angle in &cfg.angles {
        let mut x = Matrix::zeros(n, side * side);
        for (i, t) in templates.iter().enumerate() {
            let row = x.row_mut(i);
            row.copy_from_slice(&rotate_image(t, side, angle));
            if cfg.pixel_noise > 0.0 {
                for v in row.iter_mut() {
                    *v += cfg.pixel_noise * normal(&mut rng);
                }
            }
        }
        domains.push(Domain {
            name: GlyphConfig::domain_name(angle),
            x,
            labels: labels.clone(),
            object_ids: (0..n as i64).collect(),
            xc: None,
            xa: None,
        });
    }
    let mut ds = MultiDomainDataset::new(domains, cfg.classes)?;
    ds.generator = serde_json::json!({ "kind": "glyphs", "config": cfg });
    Ok(ds)
}
