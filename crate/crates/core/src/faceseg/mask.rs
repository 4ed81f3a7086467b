use super::palette::CLASS_COUNT;
use crate::error::{DataError, Result};

/// Per-pixel class indices, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(DataError::DimensionMismatch(format!(
                "mask {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            ))
            .into());
        }
        if let Some(pos) = data.iter().position(|&v| v as usize >= CLASS_COUNT) {
            return Err(DataError::MaskValue {
                path: "<memory>".into(),
                x: pos % width,
                y: pos / width,
                value: data[pos],
            }
            .into());
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, class: u8) -> Result<Self> {
        Self::new(width, height, vec![class; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class: u8) {
        assert!((class as usize) < CLASS_COUNT, "class {class} out of range");
        self.data[y * self.width + x] = class;
    }

    pub fn class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0; CLASS_COUNT];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
    }

    pub fn classes_present(&self) -> Vec<u8> {
        let counts = self.class_counts();
        (0..CLASS_COUNT as u8).filter(|&c| counts[c as usize] > 0).collect()
    }
}
