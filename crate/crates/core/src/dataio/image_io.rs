use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{DataError, Error, Result};
use crate::faceseg::{LabelMask, CLASS_COUNT};
use crate::tensor::Tensor;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::Missing(path.to_path_buf()).into()
        } else {
            Error::io(path, e)
        }
    })
}

fn decode(bytes: &[u8], path: &Path) -> Result<DynamicImage> {
    let format = image::guess_format(bytes).map_err(|e| DataError::UnsupportedFormat {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(DataError::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("{format:?} files are not read; use PNG"),
        }
        .into());
    }
    image::load_from_memory_with_format(bytes, format).map_err(|e| {
        DataError::Decode {
            path: path.to_path_buf(),
            detail: e.to_string(),
        }
        .into()
    })
}

/// Decodes an 8-bit RGB PNG (or binary PPM) into a `[3, H, W]` tensor in `[0, 1]`.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Tensor<f64>> {
    let rgb = match decode(bytes, path)? {
        DynamicImage::ImageRgb8(img) => img,
        other => {
            return Err(DataError::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("expected 8-bit RGB, found {:?}", other.color()),
            }
            .into())
        }
    };
    Ok(rgb_to_tensor(&rgb))
}

pub fn load_image(path: &Path) -> Result<Tensor<f64>> {
    decode_image(&read(path)?, path)
}

pub fn rgb_to_tensor(rgb: &RgbImage) -> Tensor<f64> {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let raw = rgb.as_raw();
    let mut data = vec![0.0; 3 * h * w];
    for p in 0..h * w {
        for c in 0..3 {
            data[c * h * w + p] = raw[3 * p + c] as f64 / 255.0;
        }
    }
    Tensor::new(&[3, h, w], data).expect("image buffer matches its shape")
}

/// Quantizes a `[3, H, W]` tensor to 8 bits per channel (`round(255 v)`, clipped).
pub fn tensor_to_rgb(image: &Tensor<f64>) -> Result<RgbImage> {
    let (c, h, w) = image.chw()?;
    if c != 3 {
        return Err(Error::Shape(format!("expected a 3-channel image, got shape {:?}", image.shape())));
    }
    let src = image.data();
    let mut raw = vec![0u8; 3 * h * w];
    for p in 0..h * w {
        for ch in 0..3 {
            raw[3 * p + ch] = (src[ch * h * w + p] * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer matches dimensions"))
}

fn encode_png(img: DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::InvalidArgument(format!("PNG encoding failed: {e}")))?;
    Ok(out.into_inner())
}

pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>> {
    encode_png(DynamicImage::ImageRgb8(img.clone()))
}

pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    encode_png(DynamicImage::ImageLuma8(img.clone()))
}

pub fn encode_image_png(image: &Tensor<f64>) -> Result<Vec<u8>> {
    encode_rgb_png(&tensor_to_rgb(image)?)
}

pub fn save_image(path: &Path, image: &Tensor<f64>) -> Result<()> {
    crate::netkit::write_atomic(path, &encode_image_png(image)?)
}

/// Decodes a single-channel 8-bit mask; any value above 6 is rejected with
/// its pixel position.
pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<LabelMask> {
    let gray = match decode(bytes, path)? {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(DataError::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("masks must be 8-bit single channel, found {:?}", other.color()),
            }
            .into())
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    if let Some(pos) = gray.as_raw().iter().position(|&v| v as usize >= CLASS_COUNT) {
        return Err(DataError::MaskValue {
            path: path.to_path_buf(),
            x: pos % w,
            y: pos / w,
            value: gray.as_raw()[pos],
        }
        .into());
    }
    LabelMask::new(w, h, gray.into_raw())
}

pub fn load_mask(path: &Path) -> Result<LabelMask> {
    decode_mask(&read(path)?, path)
}

pub fn encode_mask_png(mask: &LabelMask) -> Result<Vec<u8>> {
    let gray = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, mask.data().to_vec())
        .expect("mask buffer matches dimensions");
    encode_gray_png(&gray)
}

pub fn save_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    crate::netkit::write_atomic(path, &encode_mask_png(mask)?)
}

/// Loads an image and its mask, rejecting differing dimensions.
pub fn load_pair(image: &Path, mask: &Path) -> Result<(Tensor<f64>, LabelMask)> {
    let img = load_image(image)?;
    let m = load_mask(mask)?;
    let (_, h, w) = img.chw()?;
    if (w, h) != (m.width(), m.height()) {
        return Err(DataError::DimensionMismatch(format!(
            "{} is {w}x{h} but {} is {}x{}",
            image.display(),
            mask.display(),
            m.width(),
            m.height()
        ))
        .into());
    }
    Ok((img, m))
}
