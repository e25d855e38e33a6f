//! Per-pixel class assignment over anechoic pixels, plus its raster
//! encodings: paletted PGM (same palette as label maps) and RGB rendering
//! with SB=red, UV=green, AF=blue, SA=gray.

use crate::error::{Error, Result};
use crate::io::pgm::GrayImage;
use crate::patch::{ClassLabel, UltrasoundImage};

/// RGB colors per class, indexed by `ClassLabel::index()`.
pub const CLASS_COLORS: [[u8; 3]; 4] = [
    [255, 0, 0],     // SB
    [0, 255, 0],     // UV
    [0, 0, 255],     // AF
    [128, 128, 128], // SA
];

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    /// Palette values: 0 unlabeled, 1..=4 per `ClassLabel::palette`.
    labels: Vec<u8>,
    /// Maximum posterior per pixel, when retained.
    pub max_posterior: Option<Vec<f32>>,
}

impl SemanticMap {
    pub fn empty(width: usize, height: usize) -> Self {
        SemanticMap {
            width,
            height,
            labels: vec![0; width * height],
            max_posterior: None,
        }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "label buffer length {} does not match {width}x{height}",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&v| v > 4) {
            return Err(Error::Format(format!("invalid palette value {bad}")));
        }
        Ok(SemanticMap {
            width,
            height,
            labels,
            max_posterior: None,
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
    pub fn label(&self, x: usize, y: usize) -> Option<ClassLabel> {
        ClassLabel::from_palette(self.labels[y * self.width + x])
    }

    #[inline]
    pub fn set_label(&mut self, x: usize, y: usize, label: ClassLabel) {
        self.labels[y * self.width + x] = label.palette();
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&v| v != 0).count()
    }

    pub fn class_count(&self, class: ClassLabel) -> usize {
        let p = class.palette();
        self.labels.iter().filter(|&&v| v == p).count()
    }

    /// Boolean membership grid for one class.
    pub fn class_mask(&self, class: ClassLabel) -> Vec<bool> {
        let p = class.palette();
        self.labels.iter().map(|&v| v == p).collect()
    }

    /// Paletted grayscale encoding (identical palette to label maps).
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.labels.clone(),
        }
    }

    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        SemanticMap::from_labels(img.width, img.height, img.pixels.clone())
    }

    /// RGB rendering on black background.
    pub fn render_rgb(&self) -> Vec<u8> {
        let mut rgb = vec![0u8; self.width * self.height * 3];
        for (i, &v) in self.labels.iter().enumerate() {
            if let Some(class) = ClassLabel::from_palette(v) {
                rgb[i * 3..i * 3 + 3].copy_from_slice(&CLASS_COLORS[class.index()]);
            }
        }
        rgb
    }

    /// RGB rendering over the source image (class colors on top of gray).
    pub fn overlay_rgb(&self, image: &UltrasoundImage) -> Result<Vec<u8>> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::Dimension(
                "semantic map does not match image dimensions".into(),
            ));
        }
        let mut rgb = vec![0u8; self.width * self.height * 3];
        for (i, &v) in self.labels.iter().enumerate() {
            match ClassLabel::from_palette(v) {
                Some(class) => {
                    rgb[i * 3..i * 3 + 3].copy_from_slice(&CLASS_COLORS[class.index()])
                }
                None => {
                    let g = image.pixels()[i];
                    rgb[i * 3..i * 3 + 3].copy_from_slice(&[g, g, g]);
                }
            }
        }
        Ok(rgb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_roundtrip() {
        let mut map = SemanticMap::empty(4, 3);
        map.set_label(1, 2, ClassLabel::Af);
        map.set_label(0, 0, ClassLabel::Sa);
        let gray = map.to_gray();
        let back = SemanticMap::from_gray(&gray).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.label(1, 2), Some(ClassLabel::Af));
        assert_eq!(back.labeled_count(), 2);
    }

    #[test]
    fn rejects_bad_palette() {
        assert!(SemanticMap::from_labels(2, 2, vec![0, 1, 5, 0]).is_err());
    }

    #[test]
    fn rgb_uses_class_colors() {
        let mut map = SemanticMap::empty(2, 1);
        map.set_label(0, 0, ClassLabel::Sb);
        let rgb = map.render_rgb();
        assert_eq!(&rgb[0..3], &[255, 0, 0]);
        assert_eq!(&rgb[3..6], &[0, 0, 0]);
    }
}
