//! Patch exchange framing for out-of-process operators.
//!
//! Each frame is the 4-byte magic `NPX1`, then width, height and channel
//! count as little-endian `u32`, then `width * height * channels`
//! little-endian `f32` samples in planar row-major order. The parent writes
//! one frame per patch and reads back one 3-channel frame of the same size;
//! the stream stays open across patches.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF};

pub const MAGIC: [u8; 4] = *b"NPX1";
/// Refuse frames larger than this many samples (1 GiB of payload).
const MAX_SAMPLES: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn from_image(img: &ImageF) -> Self {
        Self {
            width: img.width() as u32,
            height: img.height() as u32,
            channels: img.channels() as u32,
            data: img.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn into_image(self) -> Result<ImageF> {
        let space = match self.channels {
            1 => ColorSpace::Gray,
            3 => ColorSpace::Srgb,
            c => return Err(Error::Protocol(format!("unsupported channel count {c}"))),
        };
        ImageF::new(
            self.width as usize,
            self.height as usize,
            space,
            self.data.into_iter().map(f64::from).collect(),
        )
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    let mut buf = Vec::with_capacity(16 + frame.data.len() * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&frame.width.to_le_bytes());
    buf.extend_from_slice(&frame.height.to_le_bytes());
    buf.extend_from_slice(&frame.channels.to_le_bytes());
    for v in &frame.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Protocol(format!(
                    "short read in {what}: got {filled} of {} bytes",
                    buf.len()
                )))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Protocol(format!("read error in {what}: {e}"))),
        }
    }
    Ok(())
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream before the
/// first magic byte.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Frame>> {
    let mut magic = [0u8; 4];
    let mut first = [0u8; 1];
    loop {
        match r.read(&mut first) {
            Ok(0) => return Ok(None),
            Ok(_) => break,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Protocol(format!("read error in magic: {e}"))),
        }
    }
    magic[0] = first[0];
    read_full(r, &mut magic[1..], "magic")?;
    if magic != MAGIC {
        return Err(Error::Protocol(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            "NPX1"
        )));
    }
    let mut header = [0u8; 12];
    read_full(r, &mut header, "header")?;
    let field = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap());
    let (width, height, channels) = (field(0), field(1), field(2));
    let samples = width as u64 * height as u64 * channels as u64;
    if samples > MAX_SAMPLES {
        return Err(Error::Protocol(format!(
            "frame {width}x{height}x{channels} exceeds size limit"
        )));
    }
    let mut payload = vec![0u8; samples as usize * 4];
    read_full(r, &mut payload, "payload")?;
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(Some(Frame {
        width,
        height,
        channels,
        data,
    }))
}

/// Child-side loop: answer every request frame with `handler(frame)` until
/// stdin closes.
pub fn serve<R: Read, W: Write>(
    mut input: R,
    mut output: W,
    mut handler: impl FnMut(Frame) -> Result<Frame>,
) -> Result<()> {
    while let Some(frame) = read_frame(&mut input)? {
        let reply = handler(frame)?;
        write_frame(&mut output, &reply).map_err(|e| Error::Protocol(format!("write: {e}")))?;
    }
    Ok(())
}

/// Replicates a 1-channel frame into three channels; passes 3-channel
/// frames through.
pub fn echo_colorize(frame: Frame) -> Result<Frame> {
    match frame.channels {
        3 => Ok(frame),
        1 => {
            let mut data = Vec::with_capacity(frame.data.len() * 3);
            for _ in 0..3 {
                data.extend_from_slice(&frame.data);
            }
            Ok(Frame {
                channels: 3,
                data,
                ..frame
            })
        }
        c => Err(Error::Protocol(format!("cannot colorize {c} channels"))),
    }
}
