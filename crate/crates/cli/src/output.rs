//! Result files, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

pub const RESULT_FILE: &str = "result.json";
pub const DATA_FILE: &str = "data.csv";
pub const PLOT_FILE: &str = "plot.svg";

/// Writes `bytes` to a sibling temp file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Pretty JSON with a trailing newline; key order is the map order.
pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Stamps an SVG document with the tool version.
pub fn stamp_svg(svg: &str) -> String {
    let stamp = format!("<!-- fiberdim {} -->\n", env!("CARGO_PKG_VERSION"));
    match svg.find('\n') {
        Some(i) => format!("{}{stamp}{}", &svg[..=i], &svg[i + 1..]),
        None => format!("{svg}\n{stamp}"),
    }
}

pub fn write_outputs(
    dir: &Path,
    result: &Value,
    csv: &str,
    svg: &str,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        (RESULT_FILE, json_bytes(result)),
        (DATA_FILE, csv.as_bytes().to_vec()),
        (PLOT_FILE, stamp_svg(svg).into_bytes()),
    ];
    let mut out = Vec::new();
    for (name, bytes) in files {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        out.push(p);
    }
    Ok(out)
}

/// 64-bit FNV-1a, used as a content digest in logs and tests.
pub fn digest(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("fiberdim-out-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn fnv_reference() {
        assert_eq!(digest(b""), 0xcbf29ce484222325);
        assert_eq!(digest(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn svg_stamp_after_open_tag() {
        let s = stamp_svg("<svg>\n</svg>\n");
        assert!(s.starts_with("<svg>\n<!-- fiberdim "));
    }
}
