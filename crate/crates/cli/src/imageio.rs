//! Image decoding for the caption and retrieve commands. Grayscale and
//! alpha inputs are folded to plain RGB before embedding.

use std::path::{Path, PathBuf};

use entcap_core::encoder::Raster;

use crate::error::{io_error, CliError, Result};

const EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "ppm", "pgm", "pnm"];

pub fn is_supported(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

pub fn load_raster(path: &Path) -> Result<Raster> {
    let img = image::open(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    let (width, height) = (rgb.width() as usize, rgb.height() as usize);
    Ok(Raster::new(width, height, rgb.into_raw())?)
}

/// The images named by a path: the file itself, or every supported file
/// in a directory, sorted by name so runs are reproducible.
pub fn collect_images(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(path).map_err(|e| io_error(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| io_error(path, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| io_error(path, e))?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.is_file() && is_supported(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::runtime(format!(
            "{}: no supported image files (extensions: {})",
            path.display(),
            EXTENSIONS.join(", ")
        )));
    }
    Ok(files)
}

/// File stem as the record id.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string()
}

/// Binary PPM bytes for a solid-color image; the test fixture writer.
pub fn solid_ppm(width: usize, height: usize, rgb: [u8; 3]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for _ in 0..width * height {
        out.extend_from_slice(&rgb);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("red.ppm");
        std::fs::write(&path, solid_ppm(4, 3, [200, 10, 10])).unwrap();
        let raster = load_raster(&path).unwrap();
        assert_eq!((raster.width, raster.height), (4, 3));
        assert_eq!(&raster.rgb[..3], &[200, 10, 10]);
        assert_eq!(raster.rgb.len(), 4 * 3 * 3);
    }

    #[test]
    fn grayscale_is_replicated_to_three_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.pgm");
        std::fs::write(&path, b"P5\n2 2\n255\n\x10\x20\x30\x40").unwrap();
        let raster = load_raster(&path).unwrap();
        assert_eq!(raster.rgb, vec![
            0x10, 0x10, 0x10, 0x20, 0x20, 0x20,
            0x30, 0x30, 0x30, 0x40, 0x40, 0x40,
        ]);
    }

    #[test]
    fn directory_listing_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.ppm", "a.ppm", "notes.txt"] {
            std::fs::write(dir.path().join(name), solid_ppm(1, 1, [0, 0, 0])).unwrap();
        }
        let files = collect_images(dir.path()).unwrap();
        let names: Vec<String> = files.iter().map(|p| image_id(p)).collect();
        assert_eq!(names, ["a", "b"]);
    }

    #[test]
    fn undecodable_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        std::fs::write(&path, b"not a png").unwrap();
        assert!(load_raster(&path).is_err());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(collect_images(dir.path()).is_err());
    }
}
