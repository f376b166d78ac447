//! Grayscale image files: 8-bit PNG and binary PGM in, PNG or PGM out.
//!
//! Color inputs are reduced to luma with `Y = 0.299 R + 0.587 G + 0.114 B`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, GrayImage, ImageBuffer, Luma};
use mfsr_core::fuse::ContributionMap;
use mfsr_core::Image;

use crate::error::{Error, Result};

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image { path: path.to_path_buf(), source }
}

/// Luma of an 8-bit RGB triple, in `[0, 1]`.
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) / 255.0
}

pub fn from_dynamic(img: &DynamicImage) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Image::from_fn(w, h, |x, y| f64::from(g.get_pixel(x as u32, y as u32)[0]) / 255.0),
        DynamicImage::ImageLuma16(g) => Image::from_fn(w, h, |x, y| f64::from(g.get_pixel(x as u32, y as u32)[0]) / 65535.0),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => from_dynamic(&DynamicImage::ImageLuma16(img.to_luma16())),
        _ => {
            let rgb = img.to_rgb8();
            Image::from_fn(w, h, |x, y| {
                let p = rgb.get_pixel(x as u32, y as u32);
                luma(p[0], p[1], p[2])
            })
        }
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(image_err(path))?;
    Ok(from_dynamic(&img))
}

pub fn to_gray8(img: &Image) -> GrayImage {
    GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8()).expect("buffer matches dimensions")
}

/// Writes 8-bit grayscale; PGM (P5) for `.pgm`, PNG otherwise.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let gray = to_gray8(img);
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let enc = PnmEncoder::new(BufWriter::new(file)).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
            gray.write_with_encoder(enc).map_err(image_err(path))
        }
        _ => gray.save_with_format(path, image::ImageFormat::Png).map_err(image_err(path)),
    }
}

/// Contribution counts as a 16-bit grayscale PNG (saturating).
pub fn write_counts(path: &Path, counts: &ContributionMap) -> Result<()> {
    let (w, h) = counts.dims();
    let data: Vec<u16> = counts.counts().iter().map(|&c| c.min(u32::from(u16::MAX)) as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, data).expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(image_err(path))
}

pub fn read_counts(path: &Path) -> Result<ContributionMap> {
    let img = image::open(path).map_err(image_err(path))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(ContributionMap::new(w, h, img.into_raw().into_iter().map(u32::from).collect())?)
}
