use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ColorSpace, ImageF};
use crate::error::{Error, Result};

/// Output sample encoding for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
    Float,
}

impl std::str::FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "8" => Ok(BitDepth::Eight),
            "16" => Ok(BitDepth::Sixteen),
            "float" | "f32" => Ok(BitDepth::Float),
            other => Err(Error::InvalidArgument(format!(
                "bit depth must be 8, 16 or float, got {other:?}"
            ))),
        }
    }
}

fn is_pfm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Loads a PNG (8/16-bit gray or RGB; alpha is dropped, palettes expanded)
/// or a PFM file. Colour files are tagged sRGB, single-channel files Gray.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageF> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut magic = [0u8; 8];
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    let n = head.len().min(8);
    magic[..n].copy_from_slice(&head[..n]);
    if magic == [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'] {
        load_png(reader)
    } else if magic[0] == b'P' && (magic[1] == b'f' || magic[1] == b'F') {
        read_pfm(reader)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{}: not a PNG or PFM file",
            path.display()
        )))
    }
}

/// Sample depth stored in an image file: 16 for 16-bit PNGs, 8 for every
/// other PNG, float for PFM.
pub fn probe_bit_depth(path: impl AsRef<Path>) -> Result<BitDepth> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(&[0x89, b'P', b'N', b'G']) {
        let decoder = png::Decoder::new(reader);
        let info = decoder.read_info()?;
        Ok(match info.info().bit_depth {
            png::BitDepth::Sixteen => BitDepth::Sixteen,
            _ => BitDepth::Eight,
        })
    } else if head.len() >= 2 && head[0] == b'P' && (head[1] == b'f' || head[1] == b'F') {
        Ok(BitDepth::Float)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{}: not a PNG or PFM file",
            path.display()
        )))
    }
}

fn load_png<R: BufRead + std::io::Seek>(reader: R) -> Result<ImageF> {
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat("png too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage("zero dimensions".into()));
    }
    let (src_channels, space) = match info.color_type {
        png::ColorType::Grayscale => (1, ColorSpace::Gray),
        png::ColorType::GrayscaleAlpha => (2, ColorSpace::Gray),
        png::ColorType::Rgb => (3, ColorSpace::Srgb),
        png::ColorType::Rgba => (4, ColorSpace::Srgb),
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("unexpanded palette png".into()))
        }
    };
    let samples: Vec<f64> = match info.bit_depth {
        png::BitDepth::Eight => buf[..info.buffer_size()]
            .iter()
            .map(|&v| v as f64 / 255.0)
            .collect(),
        png::BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
            .collect(),
        other => return Err(Error::UnsupportedFormat(format!("png bit depth {other:?}"))),
    };
    let out_channels = space.channels();
    let plane = width * height;
    let mut data = vec![0.0; plane * out_channels];
    for (i, px) in samples.chunks_exact(src_channels).enumerate() {
        for c in 0..out_channels {
            data[c * plane + i] = px[c];
        }
    }
    ImageF::new(width, height, space, data)
}

fn read_header_token<R: BufRead>(reader: &mut R) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        reader
            .read_exact(&mut byte)
            .map_err(|_| Error::Malformed("truncated pfm header".into()))?;
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(byte[0]);
        if token.len() > 64 {
            return Err(Error::Malformed("pfm header token too long".into()));
        }
    }
    String::from_utf8(token).map_err(|_| Error::Malformed("non-ascii pfm header".into()))
}

/// Reads a PFM stream. Rows are stored bottom-to-top; a negative scale
/// denotes little-endian samples.
pub(crate) fn read_pfm<R: BufRead>(mut reader: R) -> Result<ImageF> {
    let kind = read_header_token(&mut reader)?;
    let channels = match kind.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Malformed(format!("bad pfm magic {other:?}"))),
    };
    let parse_dim = |s: String| {
        s.parse::<usize>()
            .map_err(|_| Error::Malformed(format!("bad pfm dimension {s:?}")))
    };
    let width = parse_dim(read_header_token(&mut reader)?)?;
    let height = parse_dim(read_header_token(&mut reader)?)?;
    let scale_tok = read_header_token(&mut reader)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::Malformed(format!("bad pfm scale {scale_tok:?}")))?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage("zero dimensions".into()));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Malformed("pfm scale must be non-zero".into()));
    }
    let little_endian = scale < 0.0;
    let plane = width * height;
    let mut raw = vec![0u8; plane * channels * 4];
    reader
        .read_exact(&mut raw)
        .map_err(|_| Error::Malformed("truncated pfm payload".into()))?;
    let mut data = vec![0.0; plane * channels];
    for (i, b) in raw.chunks_exact(4).enumerate() {
        let bytes = [b[0], b[1], b[2], b[3]];
        let v = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        let pixel = i / channels;
        let c = i % channels;
        let (file_row, x) = (pixel / width, pixel % width);
        let y = height - 1 - file_row;
        data[c * plane + y * width + x] = v as f64;
    }
    let space = if channels == 1 {
        ColorSpace::Gray
    } else {
        ColorSpace::Srgb
    };
    ImageF::new(width, height, space, data)
}

pub(crate) fn write_pfm<W: Write>(img: &ImageF, mut w: W) -> std::io::Result<()> {
    let channels = img.channels();
    let magic = if channels == 1 { "Pf" } else { "PF" };
    write!(w, "{magic}\n{} {}\n-1.0\n", img.width(), img.height())?;
    let mut row = Vec::with_capacity(img.width() * channels * 4);
    for y in (0..img.height()).rev() {
        row.clear();
        for x in 0..img.width() {
            for c in 0..channels {
                row.extend_from_slice(&(img.get(c, y, x) as f32).to_le_bytes());
            }
        }
        w.write_all(&row)?;
    }
    w.flush()
}

fn quantize(v: f64, max: f64) -> u32 {
    (v.clamp(0.0, 1.0) * max).round() as u32
}

/// Writes `img` as PNG (depth 8/16, clamped to [0,1] and rounded to nearest)
/// or as little-endian PFM (depth float, samples stored as f32).
pub fn save_image(img: &ImageF, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let pfm_ext = is_pfm(path);
    if (depth == BitDepth::Float) != pfm_ext {
        return Err(Error::InvalidArgument(format!(
            "{}: float depth requires a .pfm path and integer depths a .png path",
            path.display()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    if depth == BitDepth::Float {
        return write_pfm(img, w).map_err(|e| Error::io(path, e));
    }
    let channels = img.channels();
    let color = if channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    };
    let mut encoder = png::Encoder::new(&mut w, img.width() as u32, img.height() as u32);
    encoder.set_color(color);
    let plane = img.plane_len();
    let data = img.data();
    let bytes: Vec<u8> = match depth {
        BitDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            (0..plane * channels)
                .map(|i| quantize(data[(i % channels) * plane + i / channels], 255.0) as u8)
                .collect()
        }
        BitDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            (0..plane * channels)
                .flat_map(|i| {
                    (quantize(data[(i % channels) * plane + i / channels], 65535.0) as u16)
                        .to_be_bytes()
                })
                .collect()
        }
        BitDepth::Float => unreachable!(),
    };
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    w.flush().map_err(|e| Error::io(path, e))
}
