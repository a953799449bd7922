//! JSON report output.
//!
//! Every float is written with 17 significant digits so that reports
//! round-trip exactly. Non-finite values become `null`.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

/// Bumped whenever a field is renamed or removed from any report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `body` with `schema_version` and `command` prepended.
pub fn to_json<T: Serialize>(command: &str, body: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    Versioned {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    }
    .serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, command: &str, body: &T) -> io::Result<()> {
    let text = to_json(command, body).map_err(io::Error::other)?;
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Probe {
        x: f64,
        y: f64,
        z: f64,
    }

    #[test]
    fn floats_round_trip_with_17_digits() {
        let p = Probe {
            x: 0.1,
            y: -2.111,
            z: f64::NAN,
        };
        let text = to_json("probe", &p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["command"], "probe");
        assert_eq!(v["x"].as_f64(), Some(0.1));
        assert_eq!(v["y"].as_f64(), Some(-2.111));
        assert!(v["z"].is_null());
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
    }
}
