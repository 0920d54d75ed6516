//! Output directory resolution and file writers shared by the commands.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Environment variable consulted when `--out` is not given.
pub const OUTPUT_DIR_ENV: &str = "ANGLESTAB_OUT";

/// `--out` wins, then `$ANGLESTAB_OUT`, then `./out`.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub command: String,
    pub output_dir: String,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub files: Vec<String>,
}

/// Writes `manifest.json` through a temporary file and a rename so readers
/// never observe a partial manifest.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let tmp = dir.join(".manifest.json.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, manifest)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, dir.join("manifest.json"))
}

/// One `key=value` line per entry, in the given order.
pub fn write_report(path: &Path, entries: &[(String, String)]) -> std::io::Result<()> {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    std::fs::write(path, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_dir_wins() {
        assert_eq!(output_dir(Some(Path::new("x/y"))), PathBuf::from("x/y"));
    }

    #[test]
    fn manifest_is_valid_json() {
        let dir = std::env::temp_dir().join(format!("anglestab-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let m = RunManifest {
            scenario: "a.scn".into(),
            command: "modes".into(),
            output_dir: dir.display().to_string(),
            tool_version: "0".into(),
            wall_time_s: 0.5,
            files: vec!["modes.csv".into()],
        };
        write_manifest(&dir, &m).unwrap();
        let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["command"], "modes");
        assert!(!dir.join(".manifest.json.tmp").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn report_lines() {
        let dir = std::env::temp_dir().join(format!("anglestab-report-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("r.txt");
        write_report(&p, &[("a".into(), "1".into()), ("b".into(), "x;y".into())]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a=1\nb=x;y\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
