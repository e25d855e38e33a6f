//! Evaluation metrics: Dice similarity over region masks, binary-confusion
//! accuracy, and the AC evaluation harness.

use crate::ellipse::Ellipse;
use crate::error::{Error, Result};

/// Binary confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix2 {
    pub n_tp: u64,
    pub n_tn: u64,
    pub n_fp: u64,
    pub n_fn: u64,
}

impl ConfusionMatrix2 {
    pub fn total(&self) -> u64 {
        self.n_tp + self.n_tn + self.n_fp + self.n_fn
    }
}

/// (tp + tn) / total.
pub fn accuracy(cm: &ConfusionMatrix2) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Parameter("empty confusion matrix".into()));
    }
    Ok((cm.n_tp + cm.n_tn) as f64 / total as f64)
}

/// Boolean region grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMask {
    pub width: usize,
    pub height: usize,
    data: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize) -> Self {
        RegionMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(RegionMask {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// Dice similarity `2|A∩B| / (|A|+|B|)`; both-empty is defined as 1.0.
pub fn dice(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += usize::from(x && y);
        total += usize::from(x) + usize::from(y);
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Rasterizes ellipse interiors: a pixel belongs iff its center satisfies the
/// ellipse inequality.
pub fn rasterize_ellipse(e: &Ellipse, width: usize, height: usize) -> RegionMask {
    let mut mask = RegionMask::new(width, height);
    let (x0, y0, x1, y1) = e.bounding_box();
    let xs = x0.floor().max(0.0) as usize;
    let ys = y0.floor().max(0.0) as usize;
    let xe = (x1.ceil() as i64).clamp(0, width as i64) as usize;
    let ye = (y1.ceil() as i64).clamp(0, height as i64) as usize;
    for y in ys..ye {
        for x in xs..xe {
            if e.contains(x as f64, y as f64) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Outcome of evaluating measured ellipses against ground truth.
#[derive(Clone, Debug)]
pub struct AcEvaluation {
    /// Dice per image; `None` marks a failed measurement.
    pub per_image: Vec<Option<f64>>,
    pub mean: f64,
    pub std: f64,
    /// Aggregates over the best 80% of successful measurements.
    pub top80_mean: f64,
    pub top80_std: f64,
    pub failures: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-image Dice between ground-truth and measured abdomen ellipses, both
/// rasterized on the image grid. Failed measurements count toward the
/// failure rate and are excluded from the aggregates.
pub fn evaluate_ac(
    truth: &[Ellipse],
    measured: &[Option<Ellipse>],
    width: usize,
    height: usize,
) -> Result<AcEvaluation> {
    if truth.len() != measured.len() {
        return Err(Error::Dimension(format!(
            "{} truth ellipses vs {} measurements",
            truth.len(),
            measured.len()
        )));
    }
    let per_image: Vec<Option<f64>> = crate::par::map_indexed(truth.len(), |i| {
        measured[i].as_ref().map(|m| {
            let gt = rasterize_ellipse(&truth[i], width, height);
            let pred = rasterize_ellipse(m, width, height);
            dice(&gt, &pred).expect("same dimensions by construction")
        })
    });
    let succ: Vec<f64> = per_image.iter().filter_map(|d| *d).collect();
    let failures = per_image.len() - succ.len();
    let (mean, std) = mean_std(&succ);
    let mut sorted = succ.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let keep = ((0.8 * sorted.len() as f64).floor() as usize).max(usize::from(!sorted.is_empty()));
    let (top80_mean, top80_std) = mean_std(&sorted[..keep.min(sorted.len())]);
    Ok(AcEvaluation {
        per_image,
        mean,
        std,
        top80_mean,
        top80_std,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mask_of(w: usize, h: usize, pred: impl Fn(usize, usize) -> bool) -> RegionMask {
        let mut m = RegionMask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                if pred(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    #[test]
    fn dice_basic_cases() {
        let a = mask_of(10, 10, |x, _| x < 5);
        let b = mask_of(10, 10, |x, _| x >= 5);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let empty = RegionMask::new(10, 10);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        // |C| = |D| = 100 with overlap 50 -> 2*50/200 = 0.5
        let c = mask_of(20, 10, |x, y| y * 20 + x < 100);
        let d = mask_of(20, 10, |x, y| (50..150).contains(&(y * 20 + x)));
        assert_eq!(c.count(), 100);
        assert_eq!(d.count(), 100);
        assert_relative_eq!(dice(&c, &d).unwrap(), 0.5);
    }

    #[test]
    fn dice_rejects_dimension_mismatch() {
        let a = RegionMask::new(4, 4);
        let b = RegionMask::new(5, 4);
        assert!(dice(&a, &b).is_err());
    }

    #[test]
    fn accuracy_matches_reported_confusions() {
        // expert1 vs expert2, CNN vs expert1, CNN vs expert2
        let e12 = ConfusionMatrix2 {
            n_tp: 20,
            n_tn: 75,
            n_fp: 2,
            n_fn: 8,
        };
        assert_relative_eq!(accuracy(&e12).unwrap(), 95.0 / 105.0, epsilon = 1e-12);
        let c1 = ConfusionMatrix2 {
            n_tp: 16,
            n_tn: 69,
            n_fp: 14,
            n_fn: 6,
        };
        assert_relative_eq!(accuracy(&c1).unwrap(), 85.0 / 105.0, epsilon = 1e-12);
        let c2 = ConfusionMatrix2 {
            n_tp: 17,
            n_tn: 64,
            n_fp: 13,
            n_fn: 11,
        };
        assert_relative_eq!(accuracy(&c2).unwrap(), 81.0 / 105.0, epsilon = 1e-12);
        assert!(accuracy(&ConfusionMatrix2::default()).is_err());
    }

    #[test]
    fn accuracy_invariant_under_tp_tn_swap() {
        let a = ConfusionMatrix2 {
            n_tp: 3,
            n_tn: 10,
            n_fp: 2,
            n_fn: 5,
        };
        let b = ConfusionMatrix2 {
            n_tp: 10,
            n_tn: 3,
            n_fp: 5,
            n_fn: 2,
        };
        assert_eq!(accuracy(&a).unwrap(), accuracy(&b).unwrap());
    }

    #[test]
    fn nested_disks_dice() {
        // truth circle r=100 vs measured r=90, concentric:
        // Dice = 2*90^2 / (100^2 + 90^2) for ideal disks; pixel counting
        // approaches this as resolution grows.
        let t = Ellipse::new(128.0, 128.0, 100.0, 100.0, 0.0).unwrap();
        let m = Ellipse::new(128.0, 128.0, 90.0, 90.0, 0.0).unwrap();
        let d = evaluate_ac(&[t], &[Some(m)], 256, 256).unwrap();
        let expect = 2.0 * 90.0f64.powi(2) / (100.0f64.powi(2) + 90.0f64.powi(2));
        assert_relative_eq!(expect, 0.8950, epsilon = 1e-4);
        assert!((d.per_image[0].unwrap() - expect).abs() < 0.005);
    }

    #[test]
    fn evaluate_handles_failures_and_perfect_matches() {
        let t = vec![
            Ellipse::new(100.0, 100.0, 50.0, 40.0, 0.3).unwrap(),
            Ellipse::new(120.0, 110.0, 60.0, 45.0, 1.0).unwrap(),
        ];
        let m = vec![Some(t[0].clone()), None];
        let e = evaluate_ac(&t, &m, 256, 256).unwrap();
        assert_eq!(e.failures, 1);
        assert_eq!(e.per_image[1], None);
        assert_relative_eq!(e.mean, 1.0);
        assert_relative_eq!(e.std, 0.0);
    }
}
