use std::io::{Read, Write};

use super::RenderError;

/// 8-bit raster with 1 (gray) or 3 (RGB) channels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image8 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image8 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, RenderError> {
        if width == 0 || height == 0 {
            return Err(RenderError::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(RenderError::ImageFormat(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(RenderError::ImageFormat(format!(
                "{}x{}x{} image needs {} bytes, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }
}

/// Binary PPM (P6) for RGB, PGM (P5) for gray, maxval 255.
pub fn write_pnm(img: &Image8, out: &mut impl Write) -> Result<(), RenderError> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    write!(out, "{magic}\n{} {}\n255\n", img.width, img.height)?;
    out.write_all(&img.data)?;
    Ok(())
}

/// Writes an image in the named format, `ppm` or `pgm`.
pub fn write_image(img: &Image8, format: &str, out: &mut impl Write) -> Result<(), RenderError> {
    match (format, img.channels) {
        ("ppm", 3) | ("pgm", 1) => write_pnm(img, out),
        ("ppm", _) | ("pgm", _) => Err(RenderError::ImageFormat(format!(
            "{format} cannot hold {} channels",
            img.channels
        ))),
        _ => Err(RenderError::UnsupportedFormat(format.to_string())),
    }
}

fn header_token(bytes: &[u8], pos: &mut usize) -> Result<String, RenderError> {
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
    if start == *pos {
        return Err(RenderError::ImageFormat("truncated header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Reads a binary P5 or P6 file with maxval 255.
pub fn read_pnm(input: &mut impl Read) -> Result<Image8, RenderError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let channels = match header_token(&bytes, &mut pos)?.as_str() {
        "P6" => 3,
        "P5" => 1,
        m => return Err(RenderError::ImageFormat(format!("unsupported magic {m:?}"))),
    };
    let mut num = |what: &str| -> Result<usize, RenderError> {
        let tok = header_token(&bytes, &mut pos)?;
        tok.parse().map_err(|_| RenderError::ImageFormat(format!("invalid {what} {tok:?}")))
    };
    let (width, height, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval != 255 {
        return Err(RenderError::ImageFormat(format!("maxval {maxval} is not 255")));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let need = width * height * channels;
    if bytes.len() < pos + need {
        return Err(RenderError::ImageFormat(format!("raster needs {need} bytes")));
    }
    Image8::new(width, height, channels, bytes[pos..pos + need].to_vec())
}
