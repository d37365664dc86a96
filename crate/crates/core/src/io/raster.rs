use std::path::Path;

use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, NormalMap};

/// Decoded raster with interleaved channels, top row first.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Raster {
    /// Channel mean per pixel.
    pub fn to_gray(&self) -> Grid<f64> {
        let data = self
            .data
            .chunks(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        Grid::from_vec(self.width, self.height, data).expect("raster length")
    }
}

/// Little-endian PFM (`Pf` for 1 channel, `PF` for 3), rows bottom to top.
pub fn encode_pfm(width: usize, height: usize, channels: usize, data: &[f64]) -> Result<Vec<u8>> {
    let magic = match channels {
        1 => "Pf",
        3 => "PF",
        _ => return Err(Error::invalid(format!("PFM stores 1 or 3 channels, not {channels}"))),
    };
    if data.len() != width * height * channels {
        return Err(Error::invalid("PFM payload length does not match its shape"));
    }
    let mut out = format!("{magic}\n{width} {height}\n-1.0\n").into_bytes();
    let row = width * channels;
    for r in (0..height).rev() {
        for v in &data[r * row..(r + 1) * row] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Splits `n` whitespace-separated header tokens off `bytes`, skipping `#` comments.
fn header_tokens(bytes: &[u8], n: usize, path: &Path) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < n {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::format(path, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the payload.
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(Error::format(path, "missing payload"));
    }
    Ok((tokens, i + 1))
}

fn parse_dim(token: &str, path: &Path) -> Result<usize> {
    token
        .parse::<usize>()
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::format(path, format!("bad dimension {token:?}")))
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<Raster> {
    let (tokens, offset) = header_tokens(bytes, 4, path)?;
    let channels = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::format(path, format!("not a PFM file (magic {other:?})"))),
    };
    let width = parse_dim(&tokens[1], path)?;
    let height = parse_dim(&tokens[2], path)?;
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| Error::format(path, format!("bad scale {:?}", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, "scale must be nonzero"));
    }
    let payload = &bytes[offset..];
    let count = width * height * channels;
    if payload.len() != 4 * count {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes, found {}", 4 * count, payload.len()),
        ));
    }
    let word = |k: usize| -> [u8; 4] { payload[4 * k..4 * k + 4].try_into().expect("4 bytes") };
    let row = width * channels;
    let mut data = vec![0.0; count];
    for r in 0..height {
        let src = (height - 1 - r) * row;
        for k in 0..row {
            let v = if scale < 0.0 {
                f32::from_le_bytes(word(src + k))
            } else {
                f32::from_be_bytes(word(src + k))
            };
            data[r * row + k] = v as f64;
        }
    }
    Ok(Raster {
        width,
        height,
        channels,
        data,
    })
}

/// 8-bit binary PGM of `data` already in `0..=255`.
pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() != width * height {
        return Err(Error::invalid("PGM payload length does not match its shape"));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    Ok(out)
}

/// Binary PGM (`P5`) or PPM (`P6`), 8 or 16 bit, scaled to `[0, 1]`.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Raster> {
    let (tokens, offset) = header_tokens(bytes, 4, path)?;
    let channels = match tokens[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::format(path, format!("not a binary PGM/PPM file (magic {other:?})"))),
    };
    let width = parse_dim(&tokens[1], path)?;
    let height = parse_dim(&tokens[2], path)?;
    let maxval: usize = tokens[3]
        .parse()
        .ok()
        .filter(|&m| (1..=65535).contains(&m))
        .ok_or_else(|| Error::format(path, format!("bad maxval {:?}", tokens[3])))?;
    let wide = maxval > 255;
    let count = width * height * channels;
    let payload = &bytes[offset..];
    if payload.len() != count * if wide { 2 } else { 1 } {
        return Err(Error::format(path, "payload length does not match the header"));
    }
    let data = (0..count)
        .map(|k| {
            let v = if wide {
                u16::from_be_bytes([payload[2 * k], payload[2 * k + 1]]) as f64
            } else {
                payload[k] as f64
            };
            v / maxval as f64
        })
        .collect();
    Ok(Raster {
        width,
        height,
        channels,
        data,
    })
}

#[cfg(feature = "png")]
pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Raster> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(path, format!("PNG: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, format!("PNG: {e}")))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(Error::format(path, "indexed PNG is not supported")),
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let samples = width * height * channels;
    let values: Vec<f64> = match info.bit_depth {
        png::BitDepth::Eight => buf[..samples].iter().map(|&v| v as f64 / 255.0).collect(),
        png::BitDepth::Sixteen => buf[..2 * samples]
            .chunks(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
            .collect(),
        other => return Err(Error::format(path, format!("unsupported PNG bit depth {other:?}"))),
    };
    // Alpha is dropped.
    let colour = if channels == 2 || channels == 4 { channels - 1 } else { channels };
    let data = values
        .chunks(channels)
        .flat_map(|px| px[..colour].to_vec())
        .collect();
    Ok(Raster {
        width,
        height,
        channels: colour,
        data,
    })
}

/// Decodes by extension: `.pfm`, `.pgm`, `.ppm`, and `.png` when built with PNG support.
pub fn read_raster(path: &Path) -> Result<Raster> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = read_file(path)?;
    match ext.as_str() {
        "pfm" => decode_pfm(&bytes, path),
        "pgm" | "ppm" | "pnm" => decode_pnm(&bytes, path),
        #[cfg(feature = "png")]
        "png" => decode_png(&bytes, path),
        #[cfg(not(feature = "png"))]
        "png" => Err(Error::format(
            path,
            "PNG support is not built in; convert to PFM/PGM or enable the `png` feature",
        )),
        _ => Err(Error::format(path, format!("unknown raster extension {ext:?}"))),
    }
}

pub fn write_scalar_pfm(path: &Path, grid: &Grid<f64>) -> Result<()> {
    write_atomic(path, &encode_pfm(grid.width(), grid.height(), 1, grid.data())?)
}

pub fn read_scalar_pfm(path: &Path) -> Result<Grid<f64>> {
    let r = read_raster(path)?;
    if r.channels != 1 {
        return Err(Error::format(path, format!("expected 1 channel, found {}", r.channels)));
    }
    Grid::from_vec(r.width, r.height, r.data)
}

pub fn write_normals_pfm(path: &Path, normals: &NormalMap) -> Result<()> {
    let flat: Vec<f64> = normals.data().iter().flatten().copied().collect();
    write_atomic(path, &encode_pfm(normals.width(), normals.height(), 3, &flat)?)
}

pub fn read_normals_pfm(path: &Path) -> Result<NormalMap> {
    let r = read_raster(path)?;
    if r.channels != 3 {
        return Err(Error::format(path, format!("expected 3 channels, found {}", r.channels)));
    }
    let data = r.data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    Grid::from_vec(r.width, r.height, data)
}

/// Binary map as PGM: 255 for set, 0 for unset.
pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<()> {
    let data: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_atomic(path, &encode_pgm(mask.width(), mask.height(), &data)?)
}

/// Any nonzero sample (of any channel) counts as set.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let r = read_raster(path)?;
    let data = r
        .data
        .chunks(r.channels)
        .map(|px| px.iter().any(|&v| v > 0.0))
        .collect();
    Grid::from_vec(r.width, r.height, data)
}

/// Grey PGM of a scalar grid scaled so its maximum maps to 255.
pub fn write_preview_pgm(path: &Path, grid: &Grid<f64>) -> Result<()> {
    let peak = grid.data().iter().copied().fold(0.0, f64::max);
    let data: Vec<u8> = grid
        .data()
        .iter()
        .map(|&v| if peak > 0.0 { (v.max(0.0) / peak * 255.0).round() as u8 } else { 0 })
        .collect();
    write_atomic(path, &encode_pgm(grid.width(), grid.height(), &data)?)
}
