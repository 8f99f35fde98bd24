//! Masks as 8-bit grayscale PNG or PGM, images as RGB PNG, and pointmaps
//! as a text header `width height 3` followed by little-endian float32
//! xyz triplets (NaN for invalid pixels).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Pointmap, RgbImage};

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("png: {e}"))
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<Decoded> {
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| png_err("image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(png_err("unexpanded palette")),
    };
    Ok(Decoded { width: info.width as usize, height: info.height as usize, channels, data: buf })
}

fn encode_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(w, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Reads a mask from PNG (any color type; first channel nonzero = set) or
/// PGM (`P2`/`P5`), chosen by extension.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pgm" => read_pgm(path),
        _ => {
            let d = decode_png(path)?;
            let data = d.data.chunks_exact(d.channels).map(|px| px[0] != 0).collect();
            BinaryMask::new(d.width, d.height, data)
        }
    }
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let path = path.as_ref();
    if extension(path) == "pgm" {
        return write_pgm(path, mask);
    }
    let data: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_png(path, mask.width(), mask.height(), png::ColorType::Grayscale, &data)
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let d = decode_png(path.as_ref())?;
    let data = d.data.chunks_exact(d.channels).map(|px| if d.channels < 3 { [px[0]; 3] } else { [px[0], px[1], px[2]] }).collect();
    RgbImage::new(d.width, d.height, data)
}

pub fn write_rgb(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let data: Vec<u8> = image.data().iter().flatten().copied().collect();
    encode_png(path.as_ref(), image.width(), image.height(), png::ColorType::Rgb, &data)
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Whitespace-separated header tokens, skipping `#` comments.
fn header_tokens<R: BufRead>(r: &mut R, n: usize) -> Result<Vec<String>> {
    let mut tokens = Vec::with_capacity(n);
    let mut byte = [0u8; 1];
    let mut current = String::new();
    let mut comment = false;
    while tokens.len() < n {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("truncated header".into()));
        }
        let c = byte[0] as char;
        if comment {
            comment = c != '\n';
            continue;
        }
        if c == '#' {
            comment = true;
        } else if c.is_ascii_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else {
            current.push(c);
        }
    }
    Ok(tokens)
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("bad {what}: {s:?}")))
}

fn read_pgm(path: &Path) -> Result<BinaryMask> {
    let mut r = BufReader::new(File::open(path)?);
    let h = header_tokens(&mut r, 4)?;
    let (width, height, maxval): (usize, usize, u32) = (parse(&h[1], "width")?, parse(&h[2], "height")?, parse(&h[3], "maxval")?);
    let n = width * height;
    let data = match h[0].as_str() {
        "P2" => {
            let mut rest = String::new();
            r.read_to_string(&mut rest)?;
            let values: Vec<bool> =
                rest.split_ascii_whitespace().take(n).map(|t| parse::<u32>(t, "pixel").map(|v| v != 0)).collect::<Result<_>>()?;
            values
        }
        "P5" => {
            let bytes_per = if maxval > 255 { 2 } else { 1 };
            let mut raw = vec![0u8; n * bytes_per];
            r.read_exact(&mut raw).map_err(|_| Error::Format("truncated PGM data".into()))?;
            raw.chunks_exact(bytes_per).map(|c| c.iter().any(|&b| b != 0)).collect()
        }
        other => return Err(Error::Format(format!("unsupported PGM magic {other:?}"))),
    };
    if data.len() != n {
        return Err(Error::Format("truncated PGM data".into()));
    }
    BinaryMask::new(width, height, data)
}

fn write_pgm(path: &Path, mask: &BinaryMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P2\n{} {}\n1", mask.width(), mask.height())?;
    for row in mask.data().chunks(mask.width()) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pointmap(path: impl AsRef<Path>) -> Result<Pointmap> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 3 || fields[2] != "3" {
        return Err(Error::Format(format!("pointmap header must be `width height 3`, got {:?}", line.trim_end())));
    }
    let (width, height): (usize, usize) = (parse(fields[0], "width")?, parse(fields[1], "height")?);
    let mut raw = vec![0u8; width * height * 12];
    r.read_exact(&mut raw).map_err(|_| Error::Format("truncated pointmap data".into()))?;
    let points = raw
        .chunks_exact(12)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes([c[4 * k], c[4 * k + 1], c[4 * k + 2], c[4 * k + 3]]) as f64;
            let p = Point3::new(f(0), f(1), f(2));
            (p.iter().all(|v| v.is_finite()) && p.z > 0.0).then_some(p)
        })
        .collect();
    Pointmap::new(width, height, points)
}

pub fn write_pointmap(path: impl AsRef<Path>, pointmap: &Pointmap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "{} {} 3", pointmap.width(), pointmap.height())?;
    for p in pointmap.points() {
        let xyz = p.map_or([f32::NAN; 3], |p| [p.x as f32, p.y as f32, p.z as f32]);
        for v in xyz {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
