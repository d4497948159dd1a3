//! Output plumbing: CSV/JSON emission, digests, and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use sha2::{Digest, Sha256};
use timescales_core::TimeSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Collects output files for one run, hashing each as it is written, and
/// closes with a manifest. Every file goes through a temp-then-rename write
/// so a crashed run never leaves a half-written artifact under its final
/// name.
pub struct Emitter {
    dir: PathBuf,
    format: Format,
    outputs: Vec<(String, String)>,
    started: String,
}

impl Emitter {
    pub fn create(dir: &Path, format: Format) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            format,
            outputs: Vec::new(),
            started: now(),
        })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    fn write_raw(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.outputs.push((name.to_string(), hex_sha256(bytes)));
        Ok(path)
    }

    /// A time series as `<base>.csv` (header = time column + value columns)
    /// or, under `--format json`, as `<base>.json` shaped
    /// `{"times":[...],"values":[[...]]}`.
    pub fn series(&mut self, base: &str, columns: &[&str], series: &TimeSeries) -> io::Result<()> {
        assert_eq!(columns.len(), series.dim() + 1, "header width");
        match self.format {
            Format::Csv => {
                let mut body = String::new();
                let _ = writeln!(body, "{}", columns.join(","));
                for (t, row) in series.iter() {
                    let _ = write!(body, "{t}");
                    for v in row {
                        let _ = write!(body, ",{v}");
                    }
                    body.push('\n');
                }
                self.write_raw(&format!("{base}.csv"), body.as_bytes())?;
            }
            Format::Json => {
                let times: Vec<f64> = series.times().to_vec();
                let values: Vec<Vec<f64>> = series.iter().map(|(_, r)| r.to_vec()).collect();
                let doc = serde_json::json!({ "times": times, "values": values });
                self.json(base, &doc)?;
            }
        }
        Ok(())
    }

    /// CSV with caller-formatted rows, for tables that are not plain numeric
    /// series. Emitted as CSV regardless of `--format`.
    pub fn table(
        &mut self,
        base: &str,
        header: &str,
        rows: impl Iterator<Item = String>,
    ) -> io::Result<()> {
        let mut body = String::with_capacity(1024);
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        self.write_raw(&format!("{base}.csv"), body.as_bytes())?;
        Ok(())
    }

    pub fn json(&mut self, base: &str, value: &serde_json::Value) -> io::Result<()> {
        let mut body = serde_json::to_string_pretty(value).expect("json encoding");
        body.push('\n');
        self.write_raw(&format!("{base}.json"), body.as_bytes())?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> io::Result<()> {
        self.write_raw(name, body.as_bytes())?;
        Ok(())
    }

    /// Write `manifest.json` last: subcommand, the fully resolved config,
    /// seed, version, wall-clock span, and a digest per emitted file.
    pub fn finish(
        mut self,
        subcommand: &str,
        resolved_config: serde_json::Value,
        seed: Option<u64>,
    ) -> io::Result<()> {
        let outputs: Vec<serde_json::Value> = self
            .outputs
            .iter()
            .map(|(f, d)| serde_json::json!({ "file": f, "sha256": d }))
            .collect();
        let manifest = serde_json::json!({
            "subcommand": subcommand,
            "config": resolved_config,
            "seed": seed,
            "version": env!("CARGO_PKG_VERSION"),
            "started": self.started,
            "finished": now(),
            "outputs": outputs,
        });
        let mut body = serde_json::to_string_pretty(&manifest).expect("json encoding");
        body.push('\n');
        self.write_raw("manifest.json", body.as_bytes())?;
        Ok(())
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
