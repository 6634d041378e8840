//! Pass-through adapter for protocol tests: the feature is the input image.
//!
//! Fault injection flags:
//!   --name NAME        handshake name (default "echo")
//!   --bad-handshake    announce {"ready": false}
//!   --crash-after N    exit on the request after N answered ones
//!   --wrong-id         answer with id + 1
//!   --error            answer every request with an error
//!   --nan              put a NaN in the first feature value
//!   --garbage          answer with a non-JSON line
//!   --sleep-ms MS      delay each answer
//!   --dims A,B,...     reshape (truncating) the payload to these dims

use std::io::{BufRead, Write};
use std::time::Duration;

use vfmprobe_core::encoder::FeatureFile;

#[derive(Default)]
struct Flags {
    name: String,
    bad_handshake: bool,
    crash_after: Option<usize>,
    wrong_id: bool,
    error: bool,
    nan: bool,
    garbage: bool,
    sleep_ms: u64,
    dims: Option<Vec<u32>>,
}

fn parse_flags() -> Result<Flags, String> {
    let mut f = Flags {
        name: "echo".into(),
        ..Default::default()
    };
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut value = || args.next().ok_or_else(|| format!("{a} needs a value"));
        match a.as_str() {
            "--name" => f.name = value()?,
            "--bad-handshake" => f.bad_handshake = true,
            "--crash-after" => f.crash_after = Some(value()?.parse().map_err(|e| format!("{e}"))?),
            "--wrong-id" => f.wrong_id = true,
            "--error" => f.error = true,
            "--nan" => f.nan = true,
            "--garbage" => f.garbage = true,
            "--sleep-ms" => f.sleep_ms = value()?.parse().map_err(|e| format!("{e}"))?,
            "--dims" => {
                let dims = value()?
                    .split(',')
                    .map(|d| d.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format!("{e}"))?;
                f.dims = Some(dims);
            }
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(f)
}

fn answer(flags: &Flags, id: u64, image: &str) -> serde_json::Value {
    if flags.error {
        return serde_json::json!({ "id": id, "error": "requested failure" });
    }
    let out = format!("{image}.echo.vfmf");
    let result = FeatureFile::read(image).and_then(|mut f| {
        if let Some(dims) = &flags.dims {
            let n: usize = dims.iter().map(|&d| d as usize).product();
            f.data.truncate(n);
            f = FeatureFile::new(dims.clone(), f.data)?;
        }
        if flags.nan {
            f.data[0] = f32::NAN;
        }
        f.write(&out)
    });
    let id = if flags.wrong_id { id + 1 } else { id };
    match result {
        Ok(()) => serde_json::json!({ "id": id, "feature": out }),
        Err(e) => serde_json::json!({ "id": id, "error": e.to_string() }),
    }
}

fn main() {
    let flags = match parse_flags() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("echo adapter: {e}");
            std::process::exit(2);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let ready = !flags.bad_handshake;
    writeln!(
        out,
        "{}",
        serde_json::json!({ "ready": ready, "name": flags.name })
    )
    .unwrap();
    out.flush().unwrap();
    let mut answered = 0usize;
    for line in std::io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if flags.crash_after == Some(answered) {
            std::process::exit(3);
        }
        let req: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let id = req.get("id").and_then(|v| v.as_u64()).unwrap_or(0);
        let image = req.get("image").and_then(|v| v.as_str()).unwrap_or("");
        if flags.sleep_ms > 0 {
            std::thread::sleep(Duration::from_millis(flags.sleep_ms));
        }
        if flags.garbage {
            writeln!(out, "this is not json").unwrap();
        } else {
            writeln!(out, "{}", answer(&flags, id, image)).unwrap();
        }
        out.flush().unwrap();
        answered += 1;
    }
}
