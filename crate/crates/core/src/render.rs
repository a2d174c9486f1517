//! PNG heatmaps of a sweep: `k_noisy` and `k_qpa` on a shared sequential
//! scale, gain on a symmetric diverging scale. Threshold lines of both DOF
//! are overlaid in black and regions I–IV are labelled on the gain map.
//!
//! `p` runs left to right and `q` bottom to top. Colours come from bilinear
//! interpolation between grid points.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{QpaError, Result};
use crate::metrics::Region;
use crate::sweep::{InterpolatedMaps, MapSample, SweepResult};

/// Target edge length of a panel's heat area in pixels.
const TARGET_PIXELS: usize = 480;
const COLORBAR_GAP: u32 = 8;
const COLORBAR_WIDTH: u32 = 16;
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const ZERO_LINE: Rgb<u8> = Rgb([90, 90, 90]);

const VIRIDIS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

const DIVERGING: [[f64; 3]; 3] = [
    [33.0, 102.0, 172.0],
    [247.0, 247.0, 247.0],
    [178.0, 24.0, 43.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    KNoisy,
    KQpa,
    Gain,
}

impl Panel {
    pub const ALL: [Panel; 3] = [Panel::KNoisy, Panel::KQpa, Panel::Gain];

    pub fn file_name(self) -> &'static str {
        match self {
            Panel::KNoisy => "k_noisy.png",
            Panel::KQpa => "k_qpa.png",
            Panel::Gain => "gain.png",
        }
    }

    fn value(self, s: &MapSample) -> f64 {
        match self {
            Panel::KNoisy => s.k_noisy,
            Panel::KQpa => s.k_qpa,
            Panel::Gain => s.gain,
        }
    }
}

pub struct RenderedMap {
    pub panel: Panel,
    pub image: RgbImage,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Heat area size; the colour bar sits to its right.
    pub heat_width: u32,
    pub heat_height: u32,
    /// Pixels per grid step.
    pub pixels_per_step: u32,
    /// Pixels on the polarisation threshold line (row-major over the heat area).
    pub pol_contour: Vec<bool>,
    pub et_contour: Vec<bool>,
}

impl RenderedMap {
    pub fn colour_for(&self, value: f64) -> Rgb<u8> {
        colour(self.panel, value, self.scale_min, self.scale_max)
    }
}

fn lerp_stops(stops: &[[f64; 3]], t: f64) -> Rgb<u8> {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (stops[i][k] * (1.0 - f) + stops[i + 1][k] * f).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

fn colour(panel: Panel, value: f64, lo: f64, hi: f64) -> Rgb<u8> {
    match panel {
        Panel::Gain => {
            let half = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
            lerp_stops(&DIVERGING, 0.5 + 0.5 * value / half)
        }
        _ => lerp_stops(&VIRIDIS, (value - lo) / (hi - lo).max(f64::MIN_POSITIVE)),
    }
}

/// Renders the three panels in memory.
pub fn render_panels(result: &SweepResult) -> Result<Vec<RenderedMap>> {
    let (np, nq) = result.shape();
    if np < 2 || nq < 2 {
        return Err(QpaError::Config(
            "rendering needs at least 2 grid points per axis".into(),
        ));
    }
    let steps = (np - 1).max(nq - 1);
    let ppc = (TARGET_PIXELS / steps).max(1) as u32;
    let w = (np as u32 - 1) * ppc + 1;
    let h = (nq as u32 - 1) * ppc + 1;
    let maps = InterpolatedMaps::new(result);

    // Pixel centre -> fractional grid coordinate; row 0 is the top (largest q).
    let samples: Vec<MapSample> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let u = x as f64 / ppc as f64;
            let v = (h - 1 - y) as f64 / ppc as f64;
            maps.sample_grid(u, v)
        })
        .collect();
    let at = |x: u32, y: u32| &samples[(y * w + x) as usize];

    let contour = |field: fn(&MapSample) -> bool| {
        let mut mask = vec![false; samples.len()];
        for y in 0..h {
            for x in 0..w {
                let here = field(at(x, y));
                let right = x + 1 < w && field(at(x + 1, y)) != here;
                let up = y > 0 && field(at(x, y - 1)) != here;
                if right || up {
                    // Two pixels wide: mark the positive side as well.
                    mask[(y * w + x) as usize] = true;
                    if right {
                        mask[(y * w + x + 1) as usize] = true;
                    }
                    if up {
                        mask[((y - 1) * w + x) as usize] = true;
                    }
                }
            }
        }
        mask
    };
    let pol_contour = contour(|s| s.k_pol > 0.0);
    let et_contour = contour(|s| s.k_et > 0.0);
    let gain_zero = contour(|s| s.gain > 0.0);

    let rate_hi = result
        .points
        .iter()
        .flat_map(|pt| [pt.report.k_noisy, pt.report.k_qpa])
        .fold(0.0, f64::max);
    let gain_abs = result
        .points
        .iter()
        .map(|pt| pt.report.gain.abs())
        .fold(0.0, f64::max);

    let mut out = Vec::with_capacity(3);
    for panel in Panel::ALL {
        let (lo, hi) = match panel {
            Panel::Gain => (-gain_abs, gain_abs),
            _ => (0.0, rate_hi),
        };
        let mut img =
            RgbImage::from_pixel(w + COLORBAR_GAP + COLORBAR_WIDTH, h, Rgb([255, 255, 255]));
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                let px = if pol_contour[i] || et_contour[i] {
                    BLACK
                } else if panel == Panel::Gain && gain_zero[i] {
                    ZERO_LINE
                } else {
                    colour(panel, panel.value(&samples[i]), lo, hi)
                };
                img.put_pixel(x, y, px);
            }
        }
        for y in 0..h {
            let t = 1.0 - y as f64 / (h - 1).max(1) as f64;
            let c = colour(panel, lo + t * (hi - lo), lo, hi);
            for x in 0..COLORBAR_WIDTH {
                img.put_pixel(w + COLORBAR_GAP + x, y, c);
            }
        }
        if panel == Panel::Gain {
            label_regions(&mut img, result, ppc, h);
        }
        out.push(RenderedMap {
            panel,
            image: img,
            scale_min: lo,
            scale_max: hi,
            heat_width: w,
            heat_height: h,
            pixels_per_step: ppc,
            pol_contour: pol_contour.clone(),
            et_contour: et_contour.clone(),
        });
    }
    Ok(out)
}

/// Writes `k_noisy.png`, `k_qpa.png` and `gain.png` into `out_dir`.
pub fn render_maps(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    render_panels(result)?
        .into_iter()
        .map(|m| {
            let path = out_dir.join(m.panel.file_name());
            m.image.save(&path)?;
            Ok(path)
        })
        .collect()
}

/// Grid point of `region` closest to the centroid of all its points.
pub fn region_anchor(result: &SweepResult, region: Region) -> Option<(usize, usize)> {
    let nq = result.q_values.len();
    let members: Vec<usize> = (0..result.points.len())
        .filter(|&i| result.points[i].report.region == region)
        .collect();
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    let ci = members.iter().map(|&i| (i / nq) as f64).sum::<f64>() / n;
    let cj = members.iter().map(|&i| (i % nq) as f64).sum::<f64>() / n;
    members
        .into_iter()
        .min_by(|&a, &b| {
            let d = |i: usize| ((i / nq) as f64 - ci).powi(2) + ((i % nq) as f64 - cj).powi(2);
            d(a).total_cmp(&d(b))
        })
        .map(|i| (i / nq, i % nq))
}

// 5x7 glyphs, one u8 per row, high bit = leftmost column.
const GLYPH_I: [u8; 7] = [
    0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110,
];
const GLYPH_V: [u8; 7] = [
    0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b01010, 0b00100,
];
const GLYPH_SCALE: u32 = 2;

fn label_regions(img: &mut RgbImage, result: &SweepResult, ppc: u32, h: u32) {
    for region in Region::LABELLED {
        let Some((i, j)) = region_anchor(result, region) else {
            continue;
        };
        let cx = i as u32 * ppc;
        let cy = h - 1 - j as u32 * ppc;
        let glyphs: Vec<&[u8; 7]> = region
            .as_str()
            .chars()
            .map(|c| if c == 'V' { &GLYPH_V } else { &GLYPH_I })
            .collect();
        let advance = 6 * GLYPH_SCALE;
        let width = glyphs.len() as u32 * advance;
        let x0 = cx.saturating_sub(width / 2);
        let y0 = cy.saturating_sub(7 * GLYPH_SCALE / 2);
        for (g, glyph) in glyphs.iter().enumerate() {
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..5u32 {
                    if bits & (1 << (4 - col)) == 0 {
                        continue;
                    }
                    for dy in 0..GLYPH_SCALE {
                        for dx in 0..GLYPH_SCALE {
                            let x = x0 + g as u32 * advance + col * GLYPH_SCALE + dx;
                            let y = y0 + row as u32 * GLYPH_SCALE + dy;
                            if x < img.width() && y < h {
                                img.put_pixel(x, y, BLACK);
                            }
                        }
                    }
                }
            }
        }
    }
}
