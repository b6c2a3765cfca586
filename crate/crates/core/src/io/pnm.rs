//! Binary netpbm I/O: P6 (color) and P5 (grayscale), 8- or 16-bit.
//!
//! Values are stored in [0, 1] and quantized on write; 16-bit samples are
//! big-endian per the netpbm convention. Round-tripping at 16 bits keeps
//! every value within 1/65535.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::image::{Image, Mask};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Writes an image as P6 (3 channels) or P5 (1 channel); values are clamped
/// to [0, 1] before quantization.
pub fn write_image<S: Scalar>(path: &Path, img: &Image<S>, depth: BitDepth) -> Result<(), IoError> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let maxval = depth.maxval();
    let mut bytes = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    for &v in img.data() {
        let v = v.to_f64_lossy().clamp(0.0, 1.0);
        let q = (v * f64::from(maxval)).round() as u32;
        match depth {
            BitDepth::Eight => bytes.push(q as u8),
            BitDepth::Sixteen => bytes.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes a mask as P5.
pub fn write_mask<S: Scalar>(path: &Path, mask: &Mask<S>, depth: BitDepth) -> Result<(), IoError> {
    let img = Image::new(mask.height(), mask.width(), 1, mask.data().to_vec())
        .map_err(|e| IoError::format(path, e.to_string()))?;
    write_image(path, &img, depth)
}

/// Reads a P5 or P6 file back into an image with values in [0, 1].
pub fn read_image<S: Scalar>(path: &Path) -> Result<Image<S>, IoError> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| IoError::format(path, "missing magic"))?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(IoError::format(path, format!("unsupported magic {other}"))),
    };
    let width = parse_dim(&bytes, &mut pos, path, "width")?;
    let height = parse_dim(&bytes, &mut pos, path, "height")?;
    let maxval = parse_dim(&bytes, &mut pos, path, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::format(path, format!("bad maxval {maxval}")));
    }
    // Single whitespace byte separates header from raster.
    pos += 1;
    let two_byte = maxval > 255;
    let n = width * height * channels;
    let needed = n * if two_byte { 2 } else { 1 };
    if bytes.len() < pos + needed {
        return Err(IoError::format(path, "truncated raster"));
    }
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let q = if two_byte {
            u32::from(u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]]))
        } else {
            u32::from(bytes[pos + i])
        };
        data.push(S::cst(f64::from(q) * scale));
    }
    Image::new(height, width, channels, data).map_err(|e| IoError::format(path, e.to_string()))
}

/// Reads a P5 file as a mask.
pub fn read_mask<S: Scalar>(path: &Path) -> Result<Mask<S>, IoError> {
    let img = read_image::<S>(path)?;
    if img.channels() != 1 {
        return Err(IoError::format(path, "expected single-channel P5"));
    }
    let (h, w) = (img.height(), img.width());
    Mask::new(h, w, img.into_data()).map_err(|e| IoError::format(path, e.to_string()))
}

fn parse_dim(bytes: &[u8], pos: &mut usize, path: &Path, what: &str) -> Result<usize, IoError> {
    next_token(bytes, pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| IoError::format(path, format!("bad {what}")))
}

/// Next whitespace-delimited token, skipping `#` comment lines.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("fae-pnm-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn sixteen_bit_roundtrip_within_quantum() {
        let img = Image::new(2, 3, 3, (0..18).map(|i| i as f64 / 17.0).collect()).unwrap();
        let path = tmpfile("rt16.ppm");
        write_image(&path, &img, BitDepth::Sixteen).unwrap();
        let back = read_image::<f64>(&path).unwrap();
        assert!(img.same_shape(&back));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 65535.0);
        }
    }

    #[test]
    fn mask_roundtrip() {
        let m = Mask::new(2, 2, vec![0.0, 0.5, 0.25, 1.0]).unwrap();
        let path = tmpfile("rt_mask.pgm");
        write_mask(&path, &m, BitDepth::Sixteen).unwrap();
        let back = read_mask::<f64>(&path).unwrap();
        for (a, b) in m.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 65535.0);
        }
    }

    #[test]
    fn reader_skips_comments() {
        let path = tmpfile("comment.pgm");
        std::fs::write(&path, b"P5\n# a comment\n2 1\n255\n\x00\xff").unwrap();
        let img = read_image::<f64>(&path).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn eight_bit_roundtrip_within_quantum() {
        let img = Image::new(1, 4, 1, vec![0.0, 0.33, 0.66, 1.0]).unwrap();
        let path = tmpfile("rt8.pgm");
        write_image(&path, &img, BitDepth::Eight).unwrap();
        let back = read_image::<f64>(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn out_of_range_values_clamp_on_write() {
        let img = Image::new(1, 2, 1, vec![-0.5, 1.5]).unwrap();
        let path = tmpfile("clamp.pgm");
        write_image(&path, &img, BitDepth::Sixteen).unwrap();
        let back = read_image::<f64>(&path).unwrap();
        assert_eq!(back.data(), &[0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn roundtrip_16bit_any_values(values in proptest::collection::vec(0.0f64..=1.0, 12)) {
            let img = Image::new(2, 2, 3, values).unwrap();
            let path = tmpfile(&format!("prop_{:x}.ppm", std::process::id()));
            write_image(&path, &img, BitDepth::Sixteen).unwrap();
            let back = read_image::<f64>(&path).unwrap();
            for (a, b) in img.data().iter().zip(back.data()) {
                prop_assert!((a - b).abs() <= 1.0 / 65535.0);
            }
        }
    }
}
