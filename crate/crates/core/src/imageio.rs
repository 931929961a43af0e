//! PNG/JPEG decode and PNG encode at the process boundary.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// True for `.png`, `.jpg` and `.jpeg` paths (case-insensitive).
pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

pub fn decode_bytes(bytes: &[u8], origin: &Path) -> Result<Raster> {
    let format = image::guess_format(bytes).map_err(|e| Error::Decode {
        path: origin.to_path_buf(),
        reason: e.to_string(),
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(Error::Decode {
            path: origin.to_path_buf(),
            reason: format!("unsupported format {format:?}"),
        });
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| Error::Decode {
        path: origin.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Raster::new(w, h, rgb.into_raw())
}

pub fn load_image(path: &Path) -> Result<Raster> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_bytes(&bytes, path)
}

pub fn encode_png(img: &Raster) -> Result<Vec<u8>> {
    let buf = RgbImage::from_raw(img.width(), img.height(), img.pixels().to_vec())
        .expect("raster buffer length is checked at construction");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::io("encoding png", std::io::Error::other(e)))?;
    Ok(out.into_inner())
}

pub fn save_png(img: &Raster, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let img = Raster::from_fn(7, 3, |x, y| [x as u8 * 30, y as u8 * 80, 5]).unwrap();
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_bytes(&bytes, Path::new("mem.png")).unwrap(), img);
    }

    #[test]
    fn garbage_is_a_decode_error() {
        let err = decode_bytes(b"definitely not an image", Path::new("x.png")).unwrap_err();
        assert!(matches!(err, Error::Decode { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn extensions() {
        assert!(is_image_path(Path::new("a/b.PNG")));
        assert!(is_image_path(Path::new("c.jpeg")));
        assert!(!is_image_path(Path::new("notes.txt")));
        assert!(!is_image_path(Path::new("noext")));
    }
}
