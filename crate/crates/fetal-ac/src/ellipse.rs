//! Abdominal-contour detection: AF-boundary extraction, randomized Hough
//! ellipse candidates, candidate filtering, median aggregation, and the
//! circumference estimate.
//!
//! The detector samples point pairs as major-axis endpoint hypotheses and
//! votes for the half-minor axis in a 1-D accumulator. For a pair (p1, p2)
//! the hypothesis has center at the midpoint, semi-major a = |p1p2|/2, and
//! orientation along the chord; a third point at distance d from the center
//! contributes
//!
//!   b^2 = a^2 d^2 sin^2(t) / (a^2 - d^2 cos^2(t)),
//!
//! where cos(t) = (a^2 + d^2 - f^2) / (2 a d) and f is the distance from the
//! third point to one endpoint. Accumulator peaks with enough votes become
//! candidates.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::RegionMask;
use crate::patch::ClassLabel;
use crate::semantic::SemanticMap;

/// Ellipse with semi-axes `a >= b > 0` and major-axis orientation
/// `theta` in `[0, pi)` measured from the positive horizontal axis.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

/// Wraps an angle to `[0, pi)` (axial data).
pub fn normalize_axial(theta: f64) -> f64 {
    let mut t = theta % std::f64::consts::PI;
    if t < 0.0 {
        t += std::f64::consts::PI;
    }
    t
}

impl Ellipse {
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::Numeric("non-finite ellipse parameters".into()));
        }
        if b <= 0.0 || a < b {
            return Err(Error::Parameter(format!(
                "ellipse requires a >= b > 0, got a={a}, b={b}"
            )));
        }
        Ok(Ellipse {
            cx,
            cy,
            a,
            b,
            theta: normalize_axial(theta),
        })
    }

    /// Interior test against the ellipse inequality.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let (s, c) = self.theta.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }

    /// Axis-aligned bounding box `(x0, y0, x1, y1)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let ex = ((self.a * c).powi(2) + (self.b * s).powi(2)).sqrt();
        let ey = ((self.a * s).powi(2) + (self.b * c).powi(2)).sqrt();
        (self.cx - ex, self.cy - ey, self.cx + ex, self.cy + ey)
    }

    /// Both semi-axes scaled by `s`.
    pub fn scaled(&self, s: f64) -> Ellipse {
        Ellipse {
            cx: self.cx,
            cy: self.cy,
            a: self.a * s,
            b: self.b * s,
            theta: self.theta,
        }
    }

    /// Perimeter by the Ramanujan approximation.
    pub fn circumference(&self) -> f64 {
        ramanujan_circumference(self.a, self.b)
    }

    /// Point on the ellipse at parameter angle `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let x = self.a * t.cos();
        let y = self.b * t.sin();
        (self.cx + x * c - y * s, self.cy + x * s + y * c)
    }
}

/// `pi * [3(a+b) - sqrt((3a+b)(a+3b))]`.
pub fn ramanujan_circumference(a: f64, b: f64) -> f64 {
    std::f64::consts::PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt())
}

// ---------------------------------------------------------------------------
// AF boundary extraction
// ---------------------------------------------------------------------------

/// Removes 4-connected components smaller than `min_size` from `mask`.
fn remove_small_components(mask: &mut [bool], width: usize, height: usize, min_size: usize) {
    let mut visited = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || visited[start] {
            continue;
        }
        stack.push(start);
        visited[start] = true;
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let x = i % width;
            let y = i / width;
            let mut push = |j: usize| {
                if mask[j] && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < width {
                push(i + 1);
            }
            if y > 0 {
                push(i - width);
            }
            if y + 1 < height {
                push(i + width);
            }
        }
        if component.len() < min_size {
            for &i in &component {
                mask[i] = false;
            }
        }
    }
}

/// Boundary of the AF region: AF pixels with at least one non-AF 4-neighbor
/// (image borders count as non-AF), after removing components smaller than
/// `min_component_size`. Points come back in raster order.
pub fn af_boundary(map: &SemanticMap, min_component_size: usize) -> Result<Vec<(u32, u32)>> {
    let w = map.width();
    let h = map.height();
    let mut mask = map.class_mask(ClassLabel::Af);
    if !mask.iter().any(|&v| v) {
        return Err(Error::EmptyRegion("no AF pixels in semantic map".into()));
    }
    remove_small_components(&mut mask, w, h, min_component_size);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            let edge = x == 0
                || x + 1 == w
                || y == 0
                || y + 1 == h
                || !mask[y * w + x - 1]
                || !mask[y * w + x + 1]
                || !mask[(y - 1) * w + x]
                || !mask[(y + 1) * w + x];
            if edge {
                out.push((x as u32, y as u32));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyRegion(
            "AF region vanished after speck removal".into(),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Randomized Hough candidates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HoughConfig {
    /// Number of candidates to keep (strongest by vote count).
    pub candidates: usize,
    /// Point-pair sampling budget.
    pub pair_budget: usize,
    /// Bounds on the full major-axis length in pixels.
    pub min_major: f64,
    pub max_major: f64,
    /// A peak must collect at least this fraction of the boundary points.
    pub min_votes_fraction: f64,
    /// Half-minor-axis accumulator bin width in pixels.
    pub bin_width: f64,
    pub seed: u64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        HoughConfig {
            candidates: 25,
            pair_budget: 20_000,
            min_major: 40.0,
            max_major: 160.0,
            min_votes_fraction: 0.05,
            bin_width: 1.0,
            seed: 0,
        }
    }
}

impl HoughConfig {
    /// Major-axis priors as fractions of the image width (15%..60%).
    pub fn for_image_width(width: usize) -> Self {
        HoughConfig {
            min_major: 0.15 * width as f64,
            max_major: 0.60 * width as f64,
            ..HoughConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    ellipse: Ellipse,
    votes: u32,
}

fn evaluate_pair(points: &[(f64, f64)], i: usize, j: usize, cfg: &HoughConfig) -> Option<Candidate> {
    let p1 = points[i];
    let p2 = points[j];
    let dx = p2.0 - p1.0;
    let dy = p2.1 - p1.1;
    let major = (dx * dx + dy * dy).sqrt();
    if major < cfg.min_major || major > cfg.max_major {
        return None;
    }
    let a = major / 2.0;
    let cx = (p1.0 + p2.0) / 2.0;
    let cy = (p1.1 + p2.1) / 2.0;
    let theta = normalize_axial(dy.atan2(dx));

    let nbins = (a / cfg.bin_width).ceil() as usize + 1;
    let mut counts = vec![0u32; nbins];
    let mut sums = vec![0.0f64; nbins];
    for (k, &p) in points.iter().enumerate() {
        if k == i || k == j {
            continue;
        }
        let ddx = p.0 - cx;
        let ddy = p.1 - cy;
        let d2 = ddx * ddx + ddy * ddy;
        let d = d2.sqrt();
        if d >= a || d < 1e-9 {
            continue;
        }
        let f2 = (p.0 - p2.0).powi(2) + (p.1 - p2.1).powi(2);
        let cos_t = ((a * a + d2 - f2) / (2.0 * a * d)).clamp(-1.0, 1.0);
        let cos2 = cos_t * cos_t;
        let denom = a * a - d2 * cos2;
        if denom <= 1e-9 {
            continue;
        }
        let b2 = a * a * d2 * (1.0 - cos2) / denom;
        if !(b2 > 0.0) {
            continue;
        }
        let b = b2.sqrt();
        if b > a {
            continue;
        }
        let bin = (b / cfg.bin_width) as usize;
        if bin < nbins {
            counts[bin] += 1;
            sums[bin] += b;
        }
    }

    // strongest bin, refined by averaging with its neighbors
    let (best_bin, &best_count) = counts
        .iter()
        .enumerate()
        .max_by_key(|&(bin, &c)| (c, std::cmp::Reverse(bin)))?;
    let min_votes = ((points.len() as f64) * cfg.min_votes_fraction).ceil() as u32;
    if best_count == 0 || best_count < min_votes {
        return None;
    }
    let lo = best_bin.saturating_sub(1);
    let hi = (best_bin + 1).min(nbins - 1);
    let mut votes = 0u32;
    let mut sum = 0.0;
    for bin in lo..=hi {
        votes += counts[bin];
        sum += sums[bin];
    }
    let b = sum / votes as f64;
    if !(b > 0.0) || b > a {
        return None;
    }
    Some(Candidate {
        ellipse: Ellipse {
            cx,
            cy,
            a,
            b,
            theta,
        },
        votes: best_count,
    })
}

/// Generates ellipse candidates from boundary points. Returns up to
/// `cfg.candidates` ellipses ordered by decreasing vote count; fewer than
/// three points yield an empty list.
pub fn hough_candidates(points: &[(f64, f64)], cfg: &HoughConfig) -> Vec<Ellipse> {
    if points.len() < 3 {
        return Vec::new();
    }
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs: Vec<(u32, u32)> = (0..cfg.pair_budget)
        .map(|_| (rng.random_range(0..n) as u32, rng.random_range(0..n) as u32))
        .collect();

    let mut scored: Vec<(usize, Candidate)> =
        crate::par::map_indexed(pairs.len(), |idx| {
            let (i, j) = pairs[idx];
            if i == j {
                return None;
            }
            evaluate_pair(points, i as usize, j as usize, cfg).map(|c| (idx, c))
        })
        .into_iter()
        .flatten()
        .collect();

    scored.sort_by(|(ia, ca), (ib, cb)| cb.votes.cmp(&ca.votes).then(ia.cmp(ib)));
    scored
        .into_iter()
        .take(cfg.candidates)
        .map(|(_, c)| c.ellipse)
        .collect()
}

// ---------------------------------------------------------------------------
// Candidate filtering and aggregation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FilterConfig {
    /// Lower bound on minor/major ratio.
    pub min_axis_ratio: f64,
    /// When true the ratio bound is exclusive (`>` instead of `>=`).
    pub ratio_exclusive: bool,
    /// Reject candidates whose interior holds more than this fraction of AF
    /// pixels.
    pub af_overlap_cap: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_axis_ratio: 0.6,
            ratio_exclusive: false,
            af_overlap_cap: 0.2,
        }
    }
}

/// AF pixels strictly inside the ellipse.
fn af_pixels_inside(e: &Ellipse, af: &RegionMask) -> usize {
    let (x0, y0, x1, y1) = e.bounding_box();
    let xs = x0.floor().max(0.0) as usize;
    let ys = y0.floor().max(0.0) as usize;
    let xe = (x1.ceil() as i64).clamp(0, af.width as i64) as usize;
    let ye = (y1.ceil() as i64).clamp(0, af.height as i64) as usize;
    let mut count = 0;
    for y in ys..ye {
        for x in xs..xe {
            if af.get(x, y) && e.contains(x as f64, y as f64) {
                count += 1;
            }
        }
    }
    count
}

/// Applies the acceptance rules: axis-ratio bound, AF-overlap cap, then keeps
/// the half of the survivors holding the least AF inside.
pub fn filter_candidates(
    candidates: &[Ellipse],
    af: &RegionMask,
    cfg: &FilterConfig,
) -> Result<Vec<Ellipse>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates("no candidates to filter".into()));
    }
    let ratio_ok = |e: &Ellipse| {
        let r = e.b / e.a;
        if cfg.ratio_exclusive {
            r > cfg.min_axis_ratio
        } else {
            r >= cfg.min_axis_ratio
        }
    };
    let mut survivors: Vec<(usize, &Ellipse, usize, f64)> = Vec::new();
    for (i, e) in candidates.iter().enumerate() {
        if !ratio_ok(e) {
            continue;
        }
        let inside = af_pixels_inside(e, af);
        let area = std::f64::consts::PI * e.a * e.b;
        let fraction = inside as f64 / area.max(1.0);
        if fraction > cfg.af_overlap_cap {
            continue;
        }
        survivors.push((i, e, inside, fraction));
    }
    if survivors.is_empty() {
        return Err(Error::NoCandidates(
            "all candidates rejected by ratio/overlap filters".into(),
        ));
    }
    survivors.sort_by(|a, b| a.2.cmp(&b.2).then(a.0.cmp(&b.0)));
    let keep = survivors.len().div_ceil(2);
    Ok(survivors
        .into_iter()
        .take(keep)
        .map(|(_, e, _, _)| e.clone())
        .collect())
}

fn median_scalar(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Signed axial difference `x - y` wrapped to `(-pi/2, pi/2]`.
fn axial_diff(x: f64, y: f64) -> f64 {
    let mut d = (x - y) % std::f64::consts::PI;
    if d > std::f64::consts::FRAC_PI_2 {
        d -= std::f64::consts::PI;
    } else if d <= -std::f64::consts::FRAC_PI_2 {
        d += std::f64::consts::PI;
    }
    d
}

/// Circular median of axial angles (period pi): the input angle minimizing
/// the total axial distance to all others; with an even count, the axial
/// midpoint of the two best.
fn axial_median(angles: &[f64]) -> f64 {
    debug_assert!(!angles.is_empty());
    let cost = |c: f64| -> f64 { angles.iter().map(|&t| axial_diff(c, t).abs()).sum() };
    let mut order: Vec<usize> = (0..angles.len()).collect();
    order.sort_by(|&i, &j| {
        cost(angles[i])
            .partial_cmp(&cost(angles[j]))
            .unwrap()
            .then(angles[i].partial_cmp(&angles[j]).unwrap())
    });
    if angles.len() % 2 == 1 {
        normalize_axial(angles[order[0]])
    } else {
        let t1 = angles[order[0]];
        let t2 = angles[order[1]];
        normalize_axial(t1 + axial_diff(t2, t1) / 2.0)
    }
}

/// Component-wise median of the survivors (axial circular median for theta).
pub fn median_ellipse(survivors: &[Ellipse]) -> Result<Ellipse> {
    if survivors.is_empty() {
        return Err(Error::NoCandidates("median of zero ellipses".into()));
    }
    let mut a: Vec<f64> = survivors.iter().map(|e| e.a).collect();
    let mut b: Vec<f64> = survivors.iter().map(|e| e.b).collect();
    let mut cx: Vec<f64> = survivors.iter().map(|e| e.cx).collect();
    let mut cy: Vec<f64> = survivors.iter().map(|e| e.cy).collect();
    let thetas: Vec<f64> = survivors.iter().map(|e| e.theta).collect();
    Ellipse::new(
        median_scalar(&mut cx),
        median_scalar(&mut cy),
        median_scalar(&mut a),
        median_scalar(&mut b),
        axial_median(&thetas),
    )
}

// ---------------------------------------------------------------------------
// AC measurement
// ---------------------------------------------------------------------------

/// Everything `measure_ac` needs beyond the semantic map.
#[derive(Clone, Debug)]
pub struct MeasureConfig {
    pub hough: HoughConfig,
    pub filter: FilterConfig,
    /// Axis scale applied to the final ellipse before the circumference.
    pub adjust: f64,
    /// Specks below this size are removed before boundary extraction.
    pub min_component_size: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            hough: HoughConfig::default(),
            filter: FilterConfig::default(),
            adjust: 0.9,
            min_component_size: 30,
        }
    }
}

impl MeasureConfig {
    pub fn for_image_width(width: usize) -> Self {
        MeasureConfig {
            hough: HoughConfig::for_image_width(width),
            ..MeasureConfig::default()
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct MeasureDiagnostics {
    pub boundary_points: usize,
    pub candidates_generated: usize,
    pub survivors: usize,
}

/// Final measurement: the adjusted ellipse and its circumference.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AcMeasurement {
    /// Measurement ellipse (axes already scaled by `adjust`).
    pub ellipse: Ellipse,
    pub ac_pixels: f64,
    pub ac_mm: f64,
    pub candidates_used: usize,
    pub diagnostics: MeasureDiagnostics,
}

/// Full detection chain: AF boundary, Hough candidates, filtering, median,
/// axis adjustment, circumference.
pub fn measure_ac(
    map: &SemanticMap,
    pixel_spacing_mm: f64,
    cfg: &MeasureConfig,
) -> Result<AcMeasurement> {
    let boundary = af_boundary(map, cfg.min_component_size)?;
    let points: Vec<(f64, f64)> = boundary
        .iter()
        .map(|&(x, y)| (x as f64, y as f64))
        .collect();
    let candidates = hough_candidates(&points, &cfg.hough);
    if candidates.is_empty() {
        return Err(Error::NoCandidates(
            "hough transform produced no candidates".into(),
        ));
    }
    let af_mask = RegionMask::from_data(
        map.width(),
        map.height(),
        map.class_mask(ClassLabel::Af),
    )?;
    let survivors = filter_candidates(&candidates, &af_mask, &cfg.filter)?;
    let fitted = median_ellipse(&survivors)?;
    let ellipse = fitted.scaled(cfg.adjust);
    let ac_pixels = ellipse.circumference();
    Ok(AcMeasurement {
        ac_mm: ac_pixels * pixel_spacing_mm,
        ac_pixels,
        candidates_used: survivors.len(),
        diagnostics: MeasureDiagnostics {
            boundary_points: points.len(),
            candidates_generated: candidates.len(),
            survivors: survivors.len(),
        },
        ellipse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Boundary points of a rasterized ellipse (interior pixels with an
    /// exterior 4-neighbor), the same discretization the pipeline sees.
    pub(crate) fn raster_boundary(e: &Ellipse, w: usize, h: usize) -> Vec<(f64, f64)> {
        let inside = |x: i64, y: i64| -> bool {
            x >= 0
                && y >= 0
                && x < w as i64
                && y < h as i64
                && e.contains(x as f64, y as f64)
        };
        let mut out = Vec::new();
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                if inside(x, y)
                    && (!inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1))
                {
                    out.push((x as f64, y as f64));
                }
            }
        }
        out
    }

    #[test]
    fn ramanujan_exact_for_circles() {
        for r in [1.0, 17.0, 123.456] {
            let exact = 2.0 * std::f64::consts::PI * r;
            assert!((ramanujan_circumference(r, r) - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn ramanujan_two_to_one() {
        // a=2, b=1: pi(9 - sqrt(35))
        let v = ramanujan_circumference(2.0, 1.0);
        assert_relative_eq!(v, std::f64::consts::PI * (9.0 - 35.0f64.sqrt()), epsilon = 1e-12);
        assert_relative_eq!(v, 9.6884, epsilon = 1e-4);
    }

    #[test]
    fn adjusted_axes_value() {
        // a=5, b=3 scaled by 0.9 -> axes (4.5, 2.7)
        let e = Ellipse::new(0.0, 0.0, 5.0, 3.0, 0.0).unwrap().scaled(0.9);
        assert_relative_eq!(e.a, 4.5);
        assert_relative_eq!(e.b, 2.7);
        let v = e.circumference();
        let expect = std::f64::consts::PI * (3.0 * 7.2 - (16.2f64 * 12.6).sqrt());
        assert_relative_eq!(v, expect, epsilon = 1e-12);
        assert_relative_eq!(v, 22.975, epsilon = 2e-3);
    }

    #[test]
    fn ellipse_invariants() {
        assert!(Ellipse::new(0.0, 0.0, 1.0, 2.0, 0.0).is_err());
        assert!(Ellipse::new(0.0, 0.0, 1.0, 0.0, 0.0).is_err());
        let e = Ellipse::new(0.0, 0.0, 2.0, 1.0, std::f64::consts::PI * 1.25).unwrap();
        assert!((0.0..std::f64::consts::PI).contains(&e.theta));
    }

    #[test]
    fn boundary_count_tracks_perimeter() {
        // Discrete inner 4-boundary of a circle carries ~2*sqrt(2)/pi (~0.90)
        // of the true perimeter; the count must sit in that band.
        let e = Ellipse::new(100.0, 100.0, 50.0, 50.0, 0.0).unwrap();
        let pts = raster_boundary(&e, 200, 200);
        let perimeter = 2.0 * std::f64::consts::PI * 50.0;
        let ratio = pts.len() as f64 / perimeter;
        assert!((0.85..=0.95).contains(&ratio), "ratio {ratio}");
    }

    fn disk_map(cx: f64, cy: f64, r: f64, w: usize, h: usize) -> SemanticMap {
        let mut map = SemanticMap::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                    map.set_label(x, y, ClassLabel::Af);
                }
            }
        }
        map
    }

    #[test]
    fn af_boundary_of_disk() {
        let map = disk_map(100.0, 100.0, 50.0, 256, 256);
        let boundary = af_boundary(&map, 10).unwrap();
        let ratio = boundary.len() as f64 / (2.0 * std::f64::consts::PI * 50.0);
        assert!((0.85..=0.95).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn isolated_speck_is_removed() {
        let mut map = disk_map(100.0, 100.0, 30.0, 256, 256);
        map.set_label(10, 10, ClassLabel::Af);
        let boundary = af_boundary(&map, 5).unwrap();
        assert!(!boundary.contains(&(10, 10)));

        // a lone pixel below the component threshold leaves nothing
        let mut lone = SemanticMap::empty(64, 64);
        lone.set_label(5, 5, ClassLabel::Af);
        assert!(matches!(
            af_boundary(&lone, 5),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn hollow_frame_has_both_contours() {
        let mut map = SemanticMap::empty(64, 64);
        for y in 10..50 {
            for x in 10..50 {
                let in_outer = (10..50).contains(&x) && (10..50).contains(&y);
                let in_inner = (20..40).contains(&x) && (20..40).contains(&y);
                if in_outer && !in_inner {
                    map.set_label(x, y, ClassLabel::Af);
                }
            }
        }
        let boundary = af_boundary(&map, 5).unwrap();
        assert!(boundary.contains(&(10, 30)), "outer contour present");
        assert!(boundary.contains(&(19, 30)), "inner contour present");
    }

    #[test]
    fn no_af_is_an_error() {
        let map = SemanticMap::empty(64, 64);
        assert!(matches!(af_boundary(&map, 5), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn hough_recovers_noiseless_ellipse() {
        let truth = Ellipse::new(130.0, 120.0, 80.0, 60.0, 30.0f64.to_radians()).unwrap();
        let pts = raster_boundary(&truth, 256, 256);
        let cfg = HoughConfig {
            min_major: 100.0,
            max_major: 200.0,
            seed: 5,
            ..HoughConfig::default()
        };
        let cands = hough_candidates(&pts, &cfg);
        assert!(!cands.is_empty());
        let top = &cands[0];
        assert!((top.a - truth.a).abs() / truth.a < 0.02, "a = {}", top.a);
        assert!((top.b - truth.b).abs() / truth.b < 0.02, "b = {}", top.b);
        assert!(
            axial_diff(top.theta, truth.theta).abs() < 3.0f64.to_radians(),
            "theta = {}",
            top.theta
        );
    }

    #[test]
    fn hough_circle_has_near_unit_ratio() {
        let truth = Ellipse::new(128.0, 128.0, 70.0, 70.0, 0.0).unwrap();
        let pts = raster_boundary(&truth, 256, 256);
        let cfg = HoughConfig {
            min_major: 100.0,
            max_major: 200.0,
            seed: 1,
            ..HoughConfig::default()
        };
        let cands = hough_candidates(&pts, &cfg);
        assert!(!cands.is_empty());
        assert!(cands[0].b / cands[0].a >= 0.98, "ratio {}", cands[0].b / cands[0].a);
    }

    #[test]
    fn hough_survives_lateral_occlusion() {
        // 40% of the boundary arc removed, centered on a minor vertex so the
        // major-axis endpoints stay visible (the AF gap sits against the
        // uterine wall on the side of the abdomen). A contiguous gap wider
        // than 180 degrees necessarily hides one major vertex, which no
        // major-axis-pair scheme can recover from.
        let truth = Ellipse::new(128.0, 128.0, 75.0, 55.0, 20.0f64.to_radians()).unwrap();
        let pts = raster_boundary(&truth, 256, 256);
        let gap_center = truth.theta + std::f64::consts::FRAC_PI_2;
        let keep: Vec<(f64, f64)> = pts
            .into_iter()
            .filter(|&(x, y)| {
                let ang = (y - truth.cy).atan2(x - truth.cx);
                let mut d = (ang - gap_center) % (2.0 * std::f64::consts::PI);
                if d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                if d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                d.abs() > 0.4 * std::f64::consts::PI
            })
            .collect();
        let cfg = HoughConfig {
            min_major: 100.0,
            max_major: 200.0,
            seed: 3,
            min_votes_fraction: 0.04,
            ..HoughConfig::default()
        };
        let cands = hough_candidates(&keep, &cfg);
        assert!(!cands.is_empty());
        let top = &cands[0];
        assert!((top.a - truth.a).abs() / truth.a < 0.05, "a = {}", top.a);
        assert!((top.b - truth.b).abs() / truth.b < 0.05, "b = {}", top.b);
    }

    #[test]
    fn too_few_points_yield_empty() {
        assert!(hough_candidates(&[(0.0, 0.0), (1.0, 1.0)], &HoughConfig::default()).is_empty());
    }

    fn no_af() -> RegionMask {
        RegionMask::new(256, 256)
    }

    #[test]
    fn ratio_filter_boundary_cases() {
        let af = no_af();
        let cfg = FilterConfig::default();
        let reject = Ellipse::new(100.0, 100.0, 50.0, 25.0, 0.0).unwrap(); // 0.5
        let exact = Ellipse::new(100.0, 100.0, 50.0, 30.0, 0.0).unwrap(); // 0.6
        let keep = Ellipse::new(100.0, 100.0, 50.0, 45.0, 0.0).unwrap(); // 0.9
        // b/a = 0.5 is rejected; 0.6 passes the inclusive bound. With two
        // tied survivors the least-AF rule keeps ceil(2/2) = 1 of them.
        let out = filter_candidates(&[reject.clone(), exact.clone(), keep.clone()], &af, &cfg).unwrap();
        assert!(!out.contains(&reject));
        assert!(out.contains(&exact), "ratio 0.6 is kept (inclusive bound)");
        assert_eq!(out.len(), 1);

        let exclusive = FilterConfig {
            ratio_exclusive: true,
            ..cfg
        };
        let out = filter_candidates(&[exact.clone(), keep.clone()], &af, &exclusive).unwrap();
        assert!(!out.contains(&exact));
        assert!(out.contains(&keep));
    }

    #[test]
    fn least_af_half_is_kept() {
        let mut af = RegionMask::new(256, 256);
        // AF blob inside the second ellipse only
        for y in 95..105 {
            for x in 195..245 {
                af.set(x, y, true);
            }
        }
        let e_clean = Ellipse::new(80.0, 100.0, 40.0, 35.0, 0.0).unwrap();
        let e_dirty = Ellipse::new(220.0, 100.0, 40.0, 35.0, 0.0).unwrap();
        let out = filter_candidates(
            &[e_dirty.clone(), e_clean.clone()],
            &af,
            &FilterConfig {
                af_overlap_cap: 1.0,
                ..FilterConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out, vec![e_clean]);
    }

    #[test]
    fn overlap_cap_rejects_af_covering_ellipses() {
        let mut af = RegionMask::new(256, 256);
        for y in 60..140 {
            for x in 60..140 {
                af.set(x, y, true);
            }
        }
        let covering = Ellipse::new(100.0, 100.0, 60.0, 55.0, 0.0).unwrap();
        let err = filter_candidates(&[covering], &af, &FilterConfig::default());
        assert!(matches!(err, Err(Error::NoCandidates(_))));
    }

    #[test]
    fn median_single_and_outlier_cases() {
        let e = Ellipse::new(10.0, 20.0, 5.0, 4.0, 0.5).unwrap();
        assert_eq!(median_ellipse(&[e.clone()]).unwrap(), e);

        let mk = |a: f64| Ellipse::new(10.0, 20.0, a, 4.0, 0.5).unwrap();
        let m = median_ellipse(&[mk(70.0), mk(80.0), mk(200.0)]).unwrap();
        assert_relative_eq!(m.a, 80.0);
    }

    #[test]
    fn median_theta_is_axially_circular() {
        // {5, 10, 175} degrees: 175 == -5 on the axial circle, median 5.
        let mk = |deg: f64| Ellipse::new(0.0, 0.0, 2.0, 1.0, (deg).to_radians()).unwrap();
        let m = median_ellipse(&[mk(5.0), mk(10.0), mk(175.0)]).unwrap();
        assert_relative_eq!(m.theta, 5.0f64.to_radians(), epsilon = 1e-12);

        // brute-force check of the axial median over the same set
        let angles: Vec<f64> = [5.0f64, 10.0, 175.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
        let mut best = (f64::INFINITY, 0.0);
        for &c in &angles {
            let cost: f64 = angles.iter().map(|&t| axial_diff(c, t).abs()).sum();
            if cost < best.0 {
                best = (cost, c);
            }
        }
        assert_relative_eq!(m.theta, normalize_axial(best.1));
    }

    #[test]
    fn median_is_permutation_invariant() {
        let es = vec![
            Ellipse::new(1.0, 2.0, 9.0, 5.0, 0.1).unwrap(),
            Ellipse::new(3.0, 1.0, 8.0, 6.0, 3.0).unwrap(),
            Ellipse::new(2.0, 3.0, 7.0, 4.0, 1.5).unwrap(),
            Ellipse::new(0.0, 0.0, 6.0, 3.0, 2.2).unwrap(),
        ];
        let m1 = median_ellipse(&es).unwrap();
        let mut rev = es.clone();
        rev.reverse();
        let m2 = median_ellipse(&rev).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn measure_ac_on_synthetic_af_band() {
        // AF band just outside a known abdomen ellipse; measured AC after the
        // 0.9 adjustment lands near the abdomen circumference.
        let abdomen = Ellipse::new(128.0, 130.0, 62.0, 52.0, 0.4).unwrap();
        let mut map = SemanticMap::empty(256, 256);
        let band_in = abdomen.scaled(1.1);
        let band_out = abdomen.scaled(1.22);
        for y in 0..256 {
            for x in 0..256 {
                let (fx, fy) = (x as f64, y as f64);
                if band_out.contains(fx, fy) && !band_in.contains(fx, fy) {
                    map.set_label(x, y, ClassLabel::Af);
                }
            }
        }
        let cfg = MeasureConfig::for_image_width(256);
        let m = measure_ac(&map, 0.5, &cfg).unwrap();
        assert!(m.candidates_used >= 1);
        let truth_ac = abdomen.circumference();
        let rel = (m.ac_pixels - truth_ac).abs() / truth_ac;
        assert!(rel < 0.06, "AC {} vs truth {} (rel {rel})", m.ac_pixels, truth_ac);
        assert_relative_eq!(m.ac_mm, m.ac_pixels * 0.5);
    }
}
