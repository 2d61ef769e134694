use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use log::debug;

use super::pad::reflect_index;
use super::protocol::{read_frame, write_frame, Frame};
use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF};

/// A per-patch translator from a `P x P` gray patch to a `P x P` RGB patch.
///
/// Operators that return `false` from [`concurrent`](Self::concurrent) are
/// invoked one patch at a time in origin order.
pub trait PatchOperator: Send + Sync {
    fn name(&self) -> String;

    fn apply(&self, patch: &ImageF) -> Result<ImageF>;

    /// `index` is the patch's position in row-major origin order.
    fn apply_indexed(&self, index: usize, patch: &ImageF) -> Result<ImageF> {
        let _ = index;
        self.apply(patch)
    }

    fn concurrent(&self) -> bool {
        true
    }

    /// Called once after the last patch.
    fn finish(&self) -> Result<()> {
        Ok(())
    }
}

fn gray_input(patch: &ImageF) -> Result<()> {
    if patch.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "operator expects a 1-channel patch, got {}",
            patch.shape_string()
        )));
    }
    Ok(())
}

/// `g -> (g, g, g)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityColorize;

impl PatchOperator for IdentityColorize {
    fn name(&self) -> String {
        "identity".into()
    }

    fn apply(&self, patch: &ImageF) -> Result<ImageF> {
        gray_input(patch)?;
        patch.gray_to_rgb()
    }
}

/// 256-entry gray-to-RGB table with linear interpolation at `g * 255`.
#[derive(Debug, Clone, PartialEq)]
pub struct LutColorize {
    table: Vec<[f64; 3]>,
}

impl LutColorize {
    pub const ENTRIES: usize = 256;

    pub fn new(table: Vec<[f64; 3]>) -> Result<Self> {
        if table.len() != Self::ENTRIES {
            return Err(Error::InvalidArgument(format!(
                "LUT needs {} entries, got {}",
                Self::ENTRIES,
                table.len()
            )));
        }
        if table.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "LUT contains non-finite values".into(),
            ));
        }
        Ok(Self { table })
    }

    /// Text file with 256 lines of `r g b`; blank lines and `#` comments are
    /// ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Vec::with_capacity(Self::ENTRIES);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Malformed(format!("LUT line {}: {e}", lineno + 1)))?;
            if vals.len() != 3 {
                return Err(Error::Malformed(format!(
                    "LUT line {}: expected 3 values, got {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            table.push([vals[0], vals[1], vals[2]]);
        }
        Self::new(table).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Malformed(m),
            other => other,
        })
    }

    /// Gray ramp: entry `k` maps to `(k/255, k/255, k/255)`.
    pub fn ramp() -> Self {
        let table = (0..Self::ENTRIES)
            .map(|k| {
                let v = k as f64 / 255.0;
                [v, v, v]
            })
            .collect();
        Self { table }
    }

    pub fn lookup(&self, g: f64) -> [f64; 3] {
        let t = (g * 255.0).clamp(0.0, 255.0);
        let i = (t.floor() as usize).min(254);
        let frac = t - i as f64;
        let (a, b) = (self.table[i], self.table[i + 1]);
        [
            a[0] + frac * (b[0] - a[0]),
            a[1] + frac * (b[1] - a[1]),
            a[2] + frac * (b[2] - a[2]),
        ]
    }
}

impl PatchOperator for LutColorize {
    fn name(&self) -> String {
        "lut".into()
    }

    fn apply(&self, patch: &ImageF) -> Result<ImageF> {
        gray_input(patch)?;
        let src = patch.data();
        let n = src.len();
        let mut out = vec![0.0; 3 * n];
        for (i, &g) in src.iter().enumerate() {
            let rgb = self.lookup(g);
            for c in 0..3 {
                out[c * n + i] = rgb[c];
            }
        }
        ImageF::new(patch.width(), patch.height(), ColorSpace::Srgb, out)
    }
}

/// One 3x3 correlation kernel plus bias per output channel, reflect
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConv {
    /// `kernels[c][dy * 3 + dx]` for offsets `dy, dx` in `-1..=1` shifted by one.
    pub kernels: [[f64; 9]; 3],
    pub bias: [f64; 3],
}

impl ToyConv {
    pub const HEADER: &'static str = "TOYCONV 1";

    /// Center tap 1, bias 0 on every channel.
    pub fn identity() -> Self {
        let mut k = [0.0; 9];
        k[4] = 1.0;
        Self {
            kernels: [k; 3],
            bias: [0.0; 3],
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Header line `TOYCONV 1`, then 30 whitespace-separated floats: for each
    /// output channel, 9 weights in row-major order followed by the bias.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim();
        if header != Self::HEADER {
            return Err(Error::Malformed(format!(
                "toyconv header must be {:?}, got {header:?}",
                Self::HEADER
            )));
        }
        let vals: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Malformed(format!("toyconv value {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 30 {
            return Err(Error::Malformed(format!(
                "toyconv expects 30 values, got {}",
                vals.len()
            )));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("toyconv values must be finite".into()));
        }
        let mut kernels = [[0.0; 9]; 3];
        let mut bias = [0.0; 3];
        for c in 0..3 {
            let block = &vals[c * 10..c * 10 + 10];
            kernels[c].copy_from_slice(&block[..9]);
            bias[c] = block[9];
        }
        Ok(Self { kernels, bias })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for c in 0..3 {
            let parts: Vec<String> = self.kernels[c]
                .iter()
                .chain(std::iter::once(&self.bias[c]))
                .map(|v| format!("{v:?}"))
                .collect();
            s.push_str(&parts.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Neighbour `i + d - 1` of `i` on an axis of length `n`, mirrored.
#[inline]
fn reflect_offset(i: usize, d: usize, n: usize) -> usize {
    match (i + d).checked_sub(1) {
        Some(j) => reflect_index(j, n),
        None => reflect_index(1, n),
    }
}

impl PatchOperator for ToyConv {
    fn name(&self) -> String {
        "toyconv".into()
    }

    fn apply(&self, patch: &ImageF) -> Result<ImageF> {
        gray_input(patch)?;
        let (w, h) = (patch.width(), patch.height());
        let src = patch.data();
        let n = w * h;
        let mut out = vec![0.0; 3 * n];
        for y in 0..h {
            for x in 0..w {
                let mut taps = [0.0; 9];
                for dy in 0..3 {
                    let yy = reflect_offset(y, dy, h);
                    for dx in 0..3 {
                        let xx = reflect_offset(x, dx, w);
                        taps[dy * 3 + dx] = src[yy * w + xx];
                    }
                }
                for c in 0..3 {
                    let k = &self.kernels[c];
                    let mut acc = self.bias[c];
                    for t in 0..9 {
                        acc += k[t] * taps[t];
                    }
                    out[c * n + y * w + x] = acc;
                }
            }
        }
        ImageF::new(w, h, ColorSpace::Srgb, out)
    }
}

/// Adds `offset` to every channel of the wrapped operator's output on
/// even-index patches. Used to inject deliberate seams.
pub struct AlternatingOffset<O> {
    pub inner: O,
    pub offset: f64,
}

impl<O: PatchOperator> PatchOperator for AlternatingOffset<O> {
    fn name(&self) -> String {
        format!("{}+alt({})", self.inner.name(), self.offset)
    }

    fn apply(&self, patch: &ImageF) -> Result<ImageF> {
        self.apply_indexed(0, patch)
    }

    fn apply_indexed(&self, index: usize, patch: &ImageF) -> Result<ImageF> {
        let out = self.inner.apply_indexed(index, patch)?;
        if index.is_multiple_of(2) {
            let off = self.offset;
            out.map(out.space(), |v| v + off)
        } else {
            Ok(out)
        }
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }

    fn finish(&self) -> Result<()> {
        self.inner.finish()
    }
}

struct ChildIo {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
}

impl ChildIo {
    /// Closes stdin and reaps the child, mapping a nonzero exit to an error.
    fn close(&mut self) -> Result<()> {
        drop(self.stdin.take());
        let status = self
            .child
            .wait()
            .map_err(|e| Error::Subprocess(format!("wait failed: {e}")))?;
        if status.success() {
            Ok(())
        } else {
            Err(Error::Subprocess(format!("child exited with {status}")))
        }
    }
}

/// Runs `sh -c <command>` once and streams every patch through it using the
/// framed wire format in [`protocol`](super::protocol).
pub struct SubprocessOp {
    command: String,
    io: Mutex<Option<ChildIo>>,
}

impl SubprocessOp {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            io: Mutex::new(None),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn spawn(&self) -> Result<ChildIo> {
        debug!("spawning patch operator: {}", self.command);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Subprocess(format!("cannot spawn {:?}: {e}", self.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(ChildIo {
            child,
            stdin: Some(BufWriter::new(stdin)),
            stdout: BufReader::new(stdout),
        })
    }

    fn exchange(io: &mut ChildIo, patch: &ImageF) -> Result<ImageF> {
        let stdin = io
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Subprocess("child stdin already closed".into()))?;
        if let Err(e) = write_frame(stdin, &Frame::from_image(patch)) {
            io.close()?;
            return Err(Error::Subprocess(format!("write to child failed: {e}")));
        }
        let reply = match read_frame(&mut io.stdout) {
            Ok(Some(frame)) => frame,
            Ok(None) => {
                io.close()?;
                return Err(Error::Protocol(
                    "short read: child closed stdout before replying".into(),
                ));
            }
            Err(e) => {
                io.close()?;
                return Err(e);
            }
        };
        if reply.width as usize != patch.width()
            || reply.height as usize != patch.height()
            || reply.channels != 3
        {
            return Err(Error::ShapeMismatch {
                left: format!("{}x{}x3", patch.width(), patch.height()),
                right: format!("{}x{}x{}", reply.width, reply.height, reply.channels),
            });
        }
        reply.into_image()
    }
}

impl PatchOperator for SubprocessOp {
    fn name(&self) -> String {
        format!("subprocess:{}", self.command)
    }

    fn apply(&self, patch: &ImageF) -> Result<ImageF> {
        gray_input(patch)?;
        let mut guard = self.io.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let io = guard.as_mut().expect("spawned above");
        let result = Self::exchange(io, patch);
        if result.is_err() {
            // The stream is out of sync after any failure; drop it.
            if let Some(mut dead) = guard.take() {
                let _ = dead.child.kill();
                let _ = dead.child.wait();
            }
        }
        result
    }

    fn concurrent(&self) -> bool {
        false
    }

    fn finish(&self) -> Result<()> {
        let mut guard = self.io.lock().unwrap_or_else(|p| p.into_inner());
        match guard.take() {
            Some(mut io) => io.close(),
            None => Ok(()),
        }
    }
}

impl Drop for SubprocessOp {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.io.lock() {
            if let Some(mut io) = guard.take() {
                let _ = io.close();
            }
        }
    }
}

/// Parses `identity | lut:<file> | toyconv:<file> | subprocess:<command>`.
pub fn parse_operator(spec: &str) -> Result<Box<dyn PatchOperator>> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let need = |what: &str| {
        arg.filter(|a| !a.is_empty()).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "operator {name:?} needs an argument: {name}:<{what}>"
            ))
        })
    };
    match name {
        "identity" => match arg {
            None => Ok(Box::new(IdentityColorize)),
            Some(_) => Err(Error::InvalidArgument("identity takes no argument".into())),
        },
        "lut" => Ok(Box::new(LutColorize::from_file(need("file")?)?)),
        "toyconv" => Ok(Box::new(ToyConv::from_file(need("file")?)?)),
        "subprocess" => Ok(Box::new(SubprocessOp::new(need("command")?))),
        other => Err(Error::InvalidArgument(format!(
            "unknown operator {other:?} (expected identity, lut:<file>, toyconv:<file>, subprocess:<command>)"
        ))),
    }
}
