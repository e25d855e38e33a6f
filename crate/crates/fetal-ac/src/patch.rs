//! Anechoic-pixel selection and per-pixel network inputs: the 128x128
//! normal-view patch, the 256x256 wide-view patch downsampled to 128x128,
//! and the ultrasound propagation direction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor3};

/// Side length of the normal-view patch.
pub const PATCH_SIZE: usize = 128;
/// Side length of the wide-view window before 2x downsampling.
pub const WIDE_SIZE: usize = 256;
/// Anechoic pixels are those at or below this fraction of the maximum
/// intensity in the image.
pub const ANECHOIC_FRACTION: f64 = 0.1;

/// The four anechoic classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    /// Stomach bubble.
    Sb,
    /// Umbilical vein.
    Uv,
    /// Amniotic fluid.
    Af,
    /// Shadowing artifact.
    Sa,
}

pub const CLASS_COUNT: usize = 4;
pub const ALL_CLASSES: [ClassLabel; CLASS_COUNT] =
    [ClassLabel::Sb, ClassLabel::Uv, ClassLabel::Af, ClassLabel::Sa];

impl ClassLabel {
    /// Network output index.
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Sb => 0,
            ClassLabel::Uv => 1,
            ClassLabel::Af => 2,
            ClassLabel::Sa => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        ALL_CLASSES.get(i).copied()
    }

    /// Palette value in label-map PGMs (0 marks unlabeled pixels).
    pub fn palette(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_palette(v: u8) -> Option<ClassLabel> {
        match v {
            1 => Some(ClassLabel::Sb),
            2 => Some(ClassLabel::Uv),
            3 => Some(ClassLabel::Af),
            4 => Some(ClassLabel::Sa),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Sb => "SB",
            ClassLabel::Uv => "UV",
            ClassLabel::Af => "AF",
            ClassLabel::Sa => "SA",
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// 2D B-mode frame plus probe geometry.
#[derive(Clone, Debug)]
pub struct UltrasoundImage {
    pub id: String,
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub pixel_spacing_mm: f64,
    /// Probe position in pixel coordinates; may lie outside the grid.
    pub probe_origin: (f64, f64),
}

impl UltrasoundImage {
    /// Default probe position: centered on the top edge, 10% of the image
    /// height above it.
    pub fn default_probe_origin(width: usize, height: usize) -> (f64, f64) {
        (width as f64 / 2.0, -(height as f64) * 0.1)
    }

    pub fn new(
        id: impl Into<String>,
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        pixel_spacing_mm: f64,
        probe_origin: Option<(f64, f64)>,
    ) -> Result<Self> {
        if width < 256 || height < 256 {
            return Err(Error::Parameter(format!(
                "ultrasound image must be at least 256x256, got {width}x{height}"
            )));
        }
        if pixel_spacing_mm <= 0.0 {
            return Err(Error::Parameter(format!(
                "pixel spacing must be positive, got {pixel_spacing_mm}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "pixel buffer length {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        let probe_origin = probe_origin.unwrap_or_else(|| Self::default_probe_origin(width, height));
        Ok(UltrasoundImage {
            id: id.into(),
            width,
            height,
            pixels,
            pixel_spacing_mm,
            probe_origin,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Anechoic pixel set: membership grid plus the pixels in raster order.
#[derive(Clone, Debug)]
pub struct AnechoicMask {
    pub width: usize,
    pub height: usize,
    pub threshold: f64,
    mask: Vec<bool>,
    pub pixels: Vec<(u32, u32)>,
}

impl AnechoicMask {
    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width + x as usize]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Pixels at or below `ANECHOIC_FRACTION` of the image maximum. On an
/// all-zero image this is every pixel; callers that need structure should
/// reject that case themselves.
pub fn anechoic_mask(image: &UltrasoundImage) -> AnechoicMask {
    let max = image.pixels.iter().copied().max().unwrap_or(0);
    let threshold = ANECHOIC_FRACTION * max as f64;
    let mut mask = vec![false; image.width * image.height];
    let mut pixels = Vec::new();
    for y in 0..image.height {
        for x in 0..image.width {
            if (image.get(x, y) as f64) <= threshold {
                mask[y * image.width + x] = true;
                pixels.push((x as u32, y as u32));
            }
        }
    }
    AnechoicMask {
        width: image.width,
        height: image.height,
        threshold,
        mask,
        pixels,
    }
}

/// Unit vector from the probe origin toward a pixel.
pub fn propagation_direction(pixel: (f64, f64), probe_origin: (f64, f64)) -> Result<(f64, f64)> {
    let dx = pixel.0 - probe_origin.0;
    let dy = pixel.1 - probe_origin.1;
    let norm = (dx * dx + dy * dy).sqrt();
    if norm == 0.0 {
        return Err(Error::Input(
            "propagation direction undefined at the probe origin".into(),
        ));
    }
    Ok((dx / norm, dy / norm))
}

/// Gathers a square window of normalized intensities centered so that the
/// window spans `[c - size/2 + 1, c + size/2]`; out-of-bounds reads are zero.
pub(crate) fn window_norm<T: Scalar>(
    pixels: &[u8],
    width: usize,
    height: usize,
    center: (u32, u32),
    size: usize,
) -> Vec<T> {
    let inv = T::from_f64(1.0 / 255.0);
    // window spans [c - size/2 + 1, c + size/2] on each axis
    let y0 = center.1 as i64 - (size as i64 / 2 - 1);
    let x0 = center.0 as i64 - (size as i64 / 2 - 1);
    let mut out = vec![T::zero(); size * size];
    for r in 0..size as i64 {
        let y = y0 + r;
        if y < 0 || y >= height as i64 {
            continue;
        }
        let row = &pixels[y as usize * width..(y as usize + 1) * width];
        for c in 0..size as i64 {
            let x = x0 + c;
            if x < 0 || x >= width as i64 {
                continue;
            }
            out[(r * size as i64 + c) as usize] = T::from_f64(row[x as usize] as f64) * inv;
        }
    }
    out
}

/// 2x2 block mean over a window of normalized intensities.
pub(crate) fn window_norm_down2<T: Scalar>(
    pixels: &[u8],
    width: usize,
    height: usize,
    center: (u32, u32),
    out_size: usize,
) -> Vec<T> {
    let full = window_norm::<T>(pixels, width, height, center, out_size * 2);
    let quarter = T::from_f64(0.25);
    let mut out = vec![T::zero(); out_size * out_size];
    let w = out_size * 2;
    for r in 0..out_size {
        for c in 0..out_size {
            let i = 2 * r * w + 2 * c;
            let s = (full[i] + full[i + 1]) + (full[i + w] + full[i + w + 1]);
            out[r * out_size + c] = s * quarter;
        }
    }
    out
}

/// Extracts the normal-view patch (raw window) and the wide-view patch
/// (double-size window, 2x2 mean downsampled), both normalized to [0, 1]
/// with zero padding outside the image.
pub fn extract_views<T: Scalar>(
    image: &UltrasoundImage,
    center: (u32, u32),
) -> (Tensor3<T>, Tensor3<T>) {
    let normal = window_norm::<T>(
        image.pixels(),
        image.width,
        image.height,
        center,
        PATCH_SIZE,
    );
    let wide = window_norm_down2::<T>(
        image.pixels(),
        image.width,
        image.height,
        center,
        PATCH_SIZE,
    );
    (
        Tensor3::from_vec_unchecked(PATCH_SIZE, PATCH_SIZE, 1, normal),
        Tensor3::from_vec_unchecked(PATCH_SIZE, PATCH_SIZE, 1, wide),
    )
}

/// One training/inference unit.
#[derive(Clone, Debug)]
pub struct PatchSample<T> {
    pub normal_view: Tensor3<T>,
    pub wide_view: Tensor3<T>,
    /// Unit propagation direction (u, v).
    pub direction: [T; 2],
    pub label: Option<ClassLabel>,
    /// (image id, x, y) the sample was taken from.
    pub source: (String, u32, u32),
}

impl<T: Scalar> PatchSample<T> {
    /// Direction must be unit length; patch values must lie in [0, 1].
    pub fn validate(&self) -> Result<()> {
        let n = (self.direction[0] * self.direction[0]
            + self.direction[1] * self.direction[1])
            .to_f64()
            .sqrt();
        if (n - 1.0).abs() > 1e-4 {
            return Err(Error::Input(format!(
                "direction vector norm {n} is not 1"
            )));
        }
        for t in [&self.normal_view, &self.wide_view] {
            if t.shape() != (PATCH_SIZE, PATCH_SIZE, 1) {
                return Err(Error::Dimension("patch views must be 128x128x1".into()));
            }
        }
        Ok(())
    }
}

/// Image with its ground-truth label map (palette 0=unlabeled, 1=SB, 2=UV,
/// 3=AF, 4=SA) and optional split assignment.
#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub image: UltrasoundImage,
    pub labels: Vec<u8>,
    pub split: Option<Split>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub enum SplitStrategy {
    /// Use the per-image split tags carried by the inputs.
    FromImages,
    /// Pool all samples and split by ratio (e.g. 2:1) with a seeded shuffle.
    ByRatio { train: u32, test: u32 },
}

#[derive(Clone, Debug)]
pub struct SamplingConfig {
    /// Maximum samples per class per image.
    pub per_class_cap: usize,
    pub split: SplitStrategy,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            per_class_cap: 100,
            split: SplitStrategy::FromImages,
            seed: 0,
        }
    }
}

/// Lightweight handle to one sample; views are materialized on demand.
#[derive(Clone, Copy, Debug)]
pub struct PatchRef {
    pub image: usize,
    pub x: u32,
    pub y: u32,
    pub label: ClassLabel,
    pub direction: (f64, f64),
}

#[derive(Clone, Debug, Default)]
pub struct DatasetSummary {
    /// Sample counts per class index over train and test.
    pub class_counts: [usize; CLASS_COUNT],
    pub warnings: Vec<String>,
}

/// Patch dataset over a set of labeled images.
pub struct PatchDataset {
    images: Vec<LabeledImage>,
    train: Vec<PatchRef>,
    test: Vec<PatchRef>,
    pub summary: DatasetSummary,
}

impl PatchDataset {
    /// Samples anechoic labeled pixels per image (capped per class), then
    /// splits into train/test.
    pub fn build(images: Vec<LabeledImage>, cfg: &SamplingConfig) -> Result<PatchDataset> {
        for (i, li) in images.iter().enumerate() {
            if li.labels.len() != li.image.width() * li.image.height() {
                return Err(Error::Dimension(format!(
                    "label map {i} does not align with its image"
                )));
            }
        }
        let mut summary = DatasetSummary::default();
        let per_image: Vec<Vec<PatchRef>> = crate::par::map_indexed(images.len(), |idx| {
            sample_image(&images[idx], idx, cfg)
        });

        let mut refs: Vec<PatchRef> = Vec::new();
        for v in per_image {
            refs.extend(v);
        }
        for r in &refs {
            summary.class_counts[r.label.index()] += 1;
        }
        for class in ALL_CLASSES {
            if summary.class_counts[class.index()] == 0 {
                summary
                    .warnings
                    .push(format!("class {class} absent from all images"));
            }
        }

        let (train, test) = match cfg.split {
            SplitStrategy::FromImages => {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for r in refs {
                    match images[r.image].split {
                        Some(Split::Train) => train.push(r),
                        Some(Split::Test) => test.push(r),
                        None => {
                            return Err(Error::Parameter(format!(
                                "image {} has no split tag but FromImages was requested",
                                images[r.image].image.id
                            )))
                        }
                    }
                }
                (train, test)
            }
            SplitStrategy::ByRatio { train: tr, test: te } => {
                if tr == 0 || te == 0 {
                    return Err(Error::Parameter("split ratio parts must be nonzero".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5b17));
                refs.shuffle(&mut rng);
                let n_train =
                    (refs.len() as u64 * tr as u64 / (tr as u64 + te as u64)) as usize;
                let test = refs.split_off(n_train);
                (refs, test)
            }
        };

        Ok(PatchDataset {
            images,
            train,
            test,
            summary,
        })
    }

    pub fn train(&self) -> &[PatchRef] {
        &self.train
    }

    pub fn test(&self) -> &[PatchRef] {
        &self.test
    }

    pub fn images(&self) -> &[LabeledImage] {
        &self.images
    }

    /// Materializes the sample behind a handle.
    pub fn sample<T: Scalar>(&self, r: &PatchRef) -> PatchSample<T> {
        let li = &self.images[r.image];
        let (normal_view, wide_view) = extract_views(&li.image, (r.x, r.y));
        PatchSample {
            normal_view,
            wide_view,
            direction: [T::from_f64(r.direction.0), T::from_f64(r.direction.1)],
            label: Some(r.label),
            source: (li.image.id.clone(), r.x, r.y),
        }
    }
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn sample_image(li: &LabeledImage, image_idx: usize, cfg: &SamplingConfig) -> Vec<PatchRef> {
    let mask = anechoic_mask(&li.image);
    let w = li.image.width();
    let mut per_class: [Vec<(u32, u32)>; CLASS_COUNT] = Default::default();
    for &(x, y) in &mask.pixels {
        let v = li.labels[y as usize * w + x as usize];
        if let Some(class) = ClassLabel::from_palette(v) {
            per_class[class.index()].push((x, y));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, image_idx as u64));
    let mut out = Vec::new();
    for class in ALL_CLASSES {
        let coords = &mut per_class[class.index()];
        coords.shuffle(&mut rng);
        coords.truncate(cfg.per_class_cap);
        for &(x, y) in coords.iter() {
            if let Ok(direction) =
                propagation_direction((x as f64, y as f64), li.image.probe_origin)
            {
                out.push(PatchRef {
                    image: image_idx,
                    x,
                    y,
                    label: class,
                    direction,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_image(w: usize, h: usize, value: u8) -> UltrasoundImage {
        UltrasoundImage::new("t", w, h, vec![value; w * h], 0.5, None).unwrap()
    }

    #[test]
    fn anechoic_threshold_is_inclusive_tenth_of_max() {
        let mut pixels = vec![255u8; 256 * 256];
        pixels[0] = 25; // 25 <= 25.5 -> anechoic
        pixels[1] = 26; // 26 > 25.5 -> not
        let img = UltrasoundImage::new("t", 256, 256, pixels, 0.5, None).unwrap();
        let mask = anechoic_mask(&img);
        assert_relative_eq!(mask.threshold, 25.5);
        assert!(mask.contains(0, 0));
        assert!(!mask.contains(1, 0));
        assert_eq!(mask.len(), 1);
    }

    #[test]
    fn uniform_bright_image_has_empty_mask() {
        let mask = anechoic_mask(&flat_image(256, 256, 200));
        assert!(mask.is_empty());
    }

    #[test]
    fn checkerboard_masks_exactly_the_zeros() {
        let mut pixels = vec![0u8; 256 * 256];
        for y in 0..256 {
            for x in 0..256 {
                if (x + y) % 2 == 0 {
                    pixels[y * 256 + x] = 255;
                }
            }
        }
        let img = UltrasoundImage::new("t", 256, 256, pixels, 0.5, None).unwrap();
        let mask = anechoic_mask(&img);
        assert_eq!(mask.len(), 256 * 256 / 2);
        assert!(mask.pixels.iter().all(|&(x, y)| (x + y) % 2 == 1));
    }

    #[test]
    fn all_zero_image_masks_everything() {
        let mask = anechoic_mask(&flat_image(256, 256, 0));
        assert_eq!(mask.len(), 256 * 256);
    }

    #[test]
    fn direction_axis_and_triangle_cases() {
        assert_eq!(
            propagation_direction((0.0, 5.0), (0.0, 0.0)).unwrap(),
            (0.0, 1.0)
        );
        let (u, v) = propagation_direction((3.0, 4.0), (0.0, 0.0)).unwrap();
        assert_relative_eq!(u, 0.6);
        assert_relative_eq!(v, 0.8);
        assert!(propagation_direction((2.0, 2.0), (2.0, 2.0)).is_err());
    }

    #[test]
    fn direction_always_unit() {
        for (x, y) in [(17.0, 233.0), (-3.5, 90.0), (400.0, 2.0)] {
            let (u, v) = propagation_direction((x, y), (128.0, -25.6)).unwrap();
            assert_relative_eq!((u * u + v * v).sqrt(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn views_of_constant_image_are_constant() {
        let img = flat_image(512, 512, 128);
        let (n, w) = extract_views::<f64>(&img, (256, 256));
        let expect = 128.0 / 255.0;
        assert!(n.as_slice().iter().all(|&v| (v - expect).abs() < 1e-12));
        assert!(w.as_slice().iter().all(|&v| (v - expect).abs() < 1e-12));
    }

    #[test]
    fn corner_patch_has_65x65_valid_quadrant() {
        let img = flat_image(512, 512, 255);
        let (n, _) = extract_views::<f64>(&img, (0, 0));
        let mut nonzero = 0;
        for y in 0..PATCH_SIZE {
            for x in 0..PATCH_SIZE {
                if n.get(y, x, 0) != 0.0 {
                    nonzero += 1;
                    // valid pixels occupy the bottom-right region
                    assert!(y >= 63 && x >= 63, "unexpected value at ({y},{x})");
                }
            }
        }
        assert_eq!(nonzero, 65 * 65);
    }

    #[test]
    fn views_are_translation_consistent() {
        // identical content shifted together produces identical patches
        let mut pixels = vec![0u8; 512 * 512];
        for y in 0..512usize {
            for x in 0..512usize {
                pixels[y * 512 + x] = ((x * 7 + y * 13) % 251) as u8;
            }
        }
        let img = UltrasoundImage::new("t", 512, 512, pixels.clone(), 0.5, None).unwrap();
        let (n1, w1) = extract_views::<f32>(&img, (200, 210));

        // shift content by (+5, +3) and the center by the same offset
        let mut shifted = vec![0u8; 512 * 512];
        for y in 0..512usize {
            for x in 0..512usize {
                let sx = x as i64 - 5;
                let sy = y as i64 - 3;
                if (0..512).contains(&sx) && (0..512).contains(&sy) {
                    shifted[y * 512 + x] = pixels[sy as usize * 512 + sx as usize];
                }
            }
        }
        let img2 = UltrasoundImage::new("t", 512, 512, shifted, 0.5, None).unwrap();
        let (n2, w2) = extract_views::<f32>(&img2, (205, 213));
        assert_eq!(n1.as_slice(), n2.as_slice());
        assert_eq!(w1.as_slice(), w2.as_slice());
    }

    #[test]
    fn wide_view_is_block_mean() {
        let mut pixels = vec![0u8; 512 * 512];
        for y in 0..512usize {
            for x in 0..512usize {
                pixels[y * 512 + x] = ((x + 2 * y) % 256) as u8;
            }
        }
        let img = UltrasoundImage::new("t", 512, 512, pixels, 0.5, None).unwrap();
        let c = (256u32, 256u32);
        let (_, wide) = extract_views::<f64>(&img, c);
        // spot-check one output cell against the four source pixels
        let y0 = 256i64 - 128 + 1;
        let x0 = 256i64 - 128 + 1;
        for (r, cc) in [(0usize, 0usize), (17, 93), (127, 127)] {
            let mut sum = 0.0;
            for dy in 0..2i64 {
                for dx in 0..2i64 {
                    let y = (y0 + 2 * r as i64 + dy) as usize;
                    let x = (x0 + 2 * cc as i64 + dx) as usize;
                    sum += img.get(x, y) as f64 / 255.0;
                }
            }
            assert_relative_eq!(wide.get(r, cc, 0), sum / 4.0, epsilon = 1e-12);
        }
    }

    fn toy_labeled(split: Option<Split>, dark_rows: std::ops::Range<usize>) -> LabeledImage {
        let mut pixels = vec![200u8; 256 * 256];
        let mut labels = vec![0u8; 256 * 256];
        for y in dark_rows {
            for x in 0..256 {
                pixels[y * 256 + x] = 5;
                labels[y * 256 + x] = ((x % CLASS_COUNT) + 1) as u8;
            }
        }
        LabeledImage {
            image: UltrasoundImage::new("toy", 256, 256, pixels, 0.5, None).unwrap(),
            labels,
            split,
        }
    }

    #[test]
    fn dataset_respects_caps_and_ratio_split() {
        let images = vec![
            toy_labeled(None, 40..60),
            toy_labeled(None, 100..120),
            toy_labeled(None, 200..220),
        ];
        let cfg = SamplingConfig {
            per_class_cap: 50,
            split: SplitStrategy::ByRatio { train: 2, test: 1 },
            seed: 9,
        };
        let ds = PatchDataset::build(images, &cfg).unwrap();
        let total = ds.train().len() + ds.test().len();
        assert_eq!(total, 3 * CLASS_COUNT * 50);
        let ratio = ds.train().len() as f64 / total as f64;
        assert!((ratio - 2.0 / 3.0).abs() < 0.01, "ratio {ratio}");
        for r in ds.train().iter().chain(ds.test()) {
            let li = &ds.images()[r.image];
            let mask = anechoic_mask(&li.image);
            assert!(mask.contains(r.x, r.y));
            let n = (r.direction.0.powi(2) + r.direction.1.powi(2)).sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_image_list_yields_empty_dataset() {
        let ds = PatchDataset::build(Vec::new(), &SamplingConfig::default()).unwrap();
        assert!(ds.train().is_empty() && ds.test().is_empty());
        assert_eq!(ds.summary.warnings.len(), CLASS_COUNT);
    }

    #[test]
    fn missing_class_generates_warning() {
        let mut li = toy_labeled(Some(Split::Train), 40..60);
        for v in li.labels.iter_mut() {
            if *v == ClassLabel::Sa.palette() {
                *v = 0;
            }
        }
        let cfg = SamplingConfig {
            per_class_cap: 10,
            split: SplitStrategy::FromImages,
            seed: 0,
        };
        let ds = PatchDataset::build(vec![li], &cfg).unwrap();
        assert!(ds.summary.warnings.iter().any(|w| w.contains("SA")));
        assert!(ds.test().is_empty());
    }
}
