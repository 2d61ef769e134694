//! Reference child for `subprocess:` operators: answers every frame with the
//! gray input replicated to three channels.
//!
//! Fault modes for testing the parent side:
//! `--bad-magic`, `--truncate` (half a payload, then exit), `--exit-code N`
//! (exit with N once stdin closes), `--die-after K` (exit 3 after K replies).

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;

use tilegraft::tiler::protocol::{echo_colorize, read_frame, write_frame};

#[derive(Default)]
struct Mode {
    bad_magic: bool,
    truncate: bool,
    exit_code: u8,
    die_after: Option<usize>,
}

fn parse_mode() -> Result<Mode, String> {
    let mut mode = Mode::default();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--bad-magic" => mode.bad_magic = true,
            "--truncate" => mode.truncate = true,
            "--exit-code" | "--die-after" => {
                let v = args.next().ok_or(format!("{a} needs a value"))?;
                let n: usize = v.parse().map_err(|_| format!("bad value for {a}: {v}"))?;
                if a == "--exit-code" {
                    mode.exit_code = u8::try_from(n).map_err(|_| "exit code > 255".to_string())?;
                } else {
                    mode.die_after = Some(n);
                }
            }
            other => return Err(format!("unknown argument {other}")),
        }
    }
    Ok(mode)
}

fn main() -> ExitCode {
    let mode = match parse_mode() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("tilegraft-echo: {e}");
            return ExitCode::from(64);
        }
    };
    let mut input = BufReader::new(io::stdin().lock());
    let mut output = BufWriter::new(io::stdout().lock());
    let mut replies = 0usize;
    loop {
        let frame = match read_frame(&mut input) {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => {
                eprintln!("tilegraft-echo: {e}");
                return ExitCode::from(65);
            }
        };
        if mode.die_after == Some(replies) {
            return ExitCode::from(3);
        }
        let reply = match echo_colorize(frame) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("tilegraft-echo: {e}");
                return ExitCode::from(65);
            }
        };
        let mut bytes = Vec::new();
        write_frame(&mut bytes, &reply).expect("write to memory");
        if mode.bad_magic {
            bytes[..4].copy_from_slice(b"NPX0");
        }
        if mode.truncate {
            bytes.truncate(16 + (bytes.len() - 16) / 2);
        }
        if output
            .write_all(&bytes)
            .and_then(|_| output.flush())
            .is_err()
        {
            return ExitCode::from(74);
        }
        if mode.truncate {
            return ExitCode::SUCCESS;
        }
        replies += 1;
    }
    ExitCode::from(mode.exit_code)
}
