//! Circle detection on a binary mask via a 3-parameter Hough vote.
//!
//! Boundary pixels of the mask vote for (cx, cy, r) hypotheses on a grid
//! coarsened by `accumulator_scale`; surviving cells are re-scored at
//! single-pixel resolution before non-maximum suppression.

use super::image::BinaryMask;

/// Minimum circle radius searched, in frame pixels.
pub const MIN_TARGET_RADIUS: usize = 10;
/// Maximum circle radius searched, in frame pixels.
pub const MAX_TARGET_RADIUS: usize = 40;

/// The four detection hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughConfig {
    /// Downsampling factor of the centre vote grid (>= 1).
    pub accumulator_scale: usize,
    /// Non-maximum suppression: detections closer than this are merged.
    pub min_center_dist: f64,
    /// A mask pixel becomes a voting boundary pixel when at least this many
    /// of its 4-neighbours are unset (1 = plain erosion difference).
    pub edge_threshold: usize,
    /// Minimum votes as a fraction of the theoretical perimeter vote count
    /// at the candidate radius.
    pub vote_threshold: f64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            accumulator_scale: 2,
            min_center_dist: 40.0,
            edge_threshold: 1,
            vote_threshold: 0.5,
        }
    }
}

/// A detected circle: centre and radius in frame pixels, vote count as
/// confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub center: (f64, f64),
    pub radius: f64,
    pub votes: u32,
}

impl Detection {
    pub fn distance_to(&self, point: (f64, f64)) -> f64 {
        let dx = self.center.0 - point.0;
        let dy = self.center.1 - point.1;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Mask pixels with at least `edge_threshold` unset 4-neighbours
/// (out-of-frame neighbours count as unset).
fn boundary_pixels(mask: &BinaryMask, edge_threshold: usize) -> Vec<(i32, i32)> {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            let mut unset = 0;
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.get(nx as usize, ny as usize) {
                    unset += 1;
                }
            }
            if unset >= edge_threshold {
                out.push((x, y));
            }
        }
    }
    out
}

/// Midpoint-circle offsets for one radius; the number of offsets is the
/// theoretical perimeter vote count used by the threshold.
fn circle_offsets(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut pts = std::collections::HashSet::new();
    let mut x = r;
    let mut y = 0;
    let mut err = 1 - r;
    while x >= y {
        for &(px, py) in &[
            (x, y),
            (y, x),
            (-x, y),
            (-y, x),
            (x, -y),
            (y, -x),
            (-x, -y),
            (-y, -x),
        ] {
            pts.insert((px, py));
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
    let mut pts: Vec<_> = pts.into_iter().collect();
    pts.sort_unstable();
    pts
}

/// Count boundary pixels lying within one pixel of the circle (c, r).
fn ring_score(boundary: &[(i32, i32)], cx: f64, cy: f64, r: f64) -> u32 {
    boundary
        .iter()
        .filter(|&&(x, y)| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            (d - r).abs() <= 1.0
        })
        .count() as u32
}

/// Vote for circles with radius in `[r_min, r_max]` over the mask boundary,
/// refine candidate centres at single-pixel resolution, and return the
/// surviving detections sorted by votes descending.
pub fn hough_circles(
    mask: &BinaryMask,
    cfg: &HoughConfig,
    r_min: usize,
    r_max: usize,
) -> Vec<Detection> {
    assert!(cfg.accumulator_scale >= 1 && r_min <= r_max && r_min >= 1);
    let boundary = boundary_pixels(mask, cfg.edge_threshold);
    if boundary.is_empty() {
        return Vec::new();
    }

    let (w, h) = (mask.width(), mask.height());
    let scale = cfg.accumulator_scale;
    let (cw, ch) = (w.div_ceil(scale), h.div_ceil(scale));

    let mut candidates: Vec<(f64, f64, f64, u32)> = Vec::new();
    let mut acc = vec![0u32; cw * ch];
    for radius in r_min..=r_max {
        let offsets = circle_offsets(radius);
        let perimeter = offsets.len() as f64;
        acc.fill(0);
        for &(bx, by) in &boundary {
            for &(dx, dy) in &offsets {
                let (cx, cy) = (bx + dx, by + dy);
                if cx >= 0 && cy >= 0 && (cx as usize) < w && (cy as usize) < h {
                    acc[(cy as usize / scale) * cw + cx as usize / scale] += 1;
                }
            }
        }
        // Gather coarse cells at a relaxed gate; the precise ring re-score
        // below enforces the configured threshold.
        let gate = (0.25 * cfg.vote_threshold * perimeter).max(1.0) as u32;
        let full = (cfg.vote_threshold * perimeter).ceil() as u32;
        for cell_y in 0..ch {
            for cell_x in 0..cw {
                if acc[cell_y * cw + cell_x] < gate {
                    continue;
                }
                let base_x = (cell_x * scale) as i32;
                let base_y = (cell_y * scale) as i32;
                let mut best: Option<(f64, f64, u32)> = None;
                for oy in 0..scale as i32 {
                    for ox in 0..scale as i32 {
                        let (px, py) = ((base_x + ox) as f64, (base_y + oy) as f64);
                        let score = ring_score(&boundary, px, py, radius as f64);
                        if best.is_none_or(|(_, _, s)| score > s) {
                            best = Some((px, py, score));
                        }
                    }
                }
                let (px, py, score) = best.unwrap();
                if score >= full {
                    candidates.push((px, py, radius as f64, score));
                }
            }
        }
    }

    // Highest votes first; ties broken by radius then position for a
    // deterministic ordering.
    candidates.sort_by(|a, b| {
        b.3.cmp(&a.3)
            .then(a.2.total_cmp(&b.2))
            .then(a.1.total_cmp(&b.1))
            .then(a.0.total_cmp(&b.0))
    });

    let mut detections: Vec<Detection> = Vec::new();
    for (px, py, radius, votes) in candidates {
        let far_enough = detections.iter().all(|d| {
            let dx = d.center.0 - px;
            let dy = d.center.1 - py;
            (dx * dx + dy * dy).sqrt() >= cfg.min_center_dist
        });
        if far_enough {
            detections.push(Detection {
                center: (px, py),
                radius,
                votes,
            });
        }
    }
    detections
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::image::Image;
    use crate::vision::{default_cutoffs, isolate_target};

    fn disc_mask(cx: f64, cy: f64, r: f64) -> BinaryMask {
        let mut img = Image::filled(400, 300, [255, 255, 255]);
        img.draw_disc(cx, cy, r, [255, 0, 0]);
        isolate_target(&img, &default_cutoffs())
    }

    #[test]
    fn blank_mask_yields_no_detections() {
        let mask = BinaryMask::new(400, 300);
        assert!(hough_circles(&mask, &HoughConfig::default(), 10, 40).is_empty());
    }

    #[test]
    fn single_disc_recovered_within_tolerance() {
        let mask = disc_mask(200.0, 150.0, 25.0);
        let dets = hough_circles(&mask, &HoughConfig::default(), 10, 40);
        assert_eq!(dets.len(), 1, "expected one detection, got {dets:?}");
        let d = dets[0];
        assert!(d.distance_to((200.0, 150.0)) <= 3.0, "center {:?}", d.center);
        assert!((d.radius - 25.0).abs() <= 2.0, "radius {}", d.radius);
    }

    #[test]
    fn two_separated_discs_both_recovered() {
        let mut img = Image::filled(400, 300, [255, 255, 255]);
        img.draw_disc(120.0, 150.0, 15.0, [255, 0, 0]);
        img.draw_disc(240.0, 150.0, 30.0, [255, 0, 0]);
        let mask = isolate_target(&img, &default_cutoffs());
        let dets = hough_circles(&mask, &HoughConfig::default(), 10, 40);
        assert_eq!(dets.len(), 2, "{dets:?}");
        let small = dets
            .iter()
            .find(|d| d.distance_to((120.0, 150.0)) <= 3.0)
            .expect("small disc");
        let large = dets
            .iter()
            .find(|d| d.distance_to((240.0, 150.0)) <= 3.0)
            .expect("large disc");
        assert!((small.radius - 15.0).abs() <= 2.0);
        assert!((large.radius - 30.0).abs() <= 2.0);
    }

    #[test]
    fn detection_translates_with_the_disc() {
        let base = hough_circles(&disc_mask(180.0, 140.0, 20.0), &HoughConfig::default(), 10, 40);
        let moved = hough_circles(&disc_mask(217.0, 169.0, 20.0), &HoughConfig::default(), 10, 40);
        assert_eq!(base.len(), 1);
        assert_eq!(moved.len(), 1);
        let dx = moved[0].center.0 - base[0].center.0;
        let dy = moved[0].center.1 - base[0].center.1;
        assert!((dx - 37.0).abs() <= 1.0, "dx {dx}");
        assert!((dy - 29.0).abs() <= 1.0, "dy {dy}");
    }

    #[test]
    fn circle_offsets_count_grows_with_radius() {
        let mut last = 0;
        for r in [10, 20, 30, 40] {
            let n = circle_offsets(r).len();
            assert!(n > last);
            last = n;
        }
    }
}
