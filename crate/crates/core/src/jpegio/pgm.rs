//! Binary PGM (P5) input and output.

use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageFormat};

use crate::error::Result;

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let img = image::ImageReader::with_format(
        std::io::BufReader::new(File::open(path)?),
        ImageFormat::Pnm,
    )
    .decode()?;
    Ok(img.into_luma8())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)?;
    Ok(img.into_luma8())
}

pub fn encode_pgm(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .encode(img.as_raw().as_slice(), img.width(), img.height(), image::ExtendedColorType::L8)?;
    Ok(out.into_inner())
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    use std::io::Write;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_pgm(img)?)?;
    Ok(())
}
