use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};

use super::write_atomic;

/// Greyscale raster with 8- or 16-bit samples widened to `u16`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

pub fn read_pgm(path: &Path) -> Result<Gray> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        _ => return Err(Error::parse(path, "expected a greyscale PGM image")),
    };
    Ok(Gray { width, height, data })
}

/// Writes a 16-bit binary PGM.
pub fn write_pgm(path: &Path, img: &Gray) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, img.data.clone()).ok_or(
            Error::DimensionMismatch {
                expected: img.width * img.height,
                actual: img.data.len(),
            },
        )?;
    let mut out = std::io::Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(buf)
        .write_to(&mut out, ImageFormat::Pnm)
        .map_err(|e| Error::invalid(format!("cannot encode {}: {e}", path.display())))?;
    write_atomic(path, out.get_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pgm");
        let img = Gray {
            width: 3,
            height: 2,
            data: vec![0, 1, 300, 65535, 4000, 7],
        };
        write_pgm(&path, &img).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    #[test]
    fn reads_eight_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 9, 0]);
        std::fs::write(&path, bytes).unwrap();
        let g = read_pgm(&path).unwrap();
        assert_eq!(g.data, vec![0, 255, 9, 0]);
        std::fs::write(&path, b"P5\n2 2\n").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Parse { .. })));
    }
}
