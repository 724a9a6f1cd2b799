use anyhow::{Context, Result};
use dunes::field_io::{write_dhf1, write_pgm16};
use dunes::grid::ScalarField;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

/// Outcome of one acceptance check of a subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Artifact directory. Everything except `run.log` is a pure function of
/// the configuration.
pub struct Outputs {
    dir: PathBuf,
    log: Mutex<BufWriter<File>>,
}

impl Outputs {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let log = File::create(dir.join("run.log"))
            .with_context(|| format!("creating {}", dir.join("run.log").display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log: Mutex::new(BufWriter::new(log)),
        })
    }

    pub fn log(&self, msg: &str) {
        let t = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        if let Ok(mut w) = self.log.lock() {
            let _ = writeln!(w, "[{t:.3}] {msg}");
            let _ = w.flush();
        }
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        self.log(&format!("writing {name}"));
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    }

    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    pub fn jsonl<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = self.create(name)?;
        for r in rows {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn pgm(&self, name: &str, field: &ScalarField) -> Result<()> {
        let mut w = self.create(name)?;
        write_pgm16(&mut w, field)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.dhf1` and, when asked, a `<stem>.pgm` preview.
    pub fn field(&self, stem: &str, field: &ScalarField, pgm: bool) -> Result<()> {
        let mut w = self.create(&format!("{stem}.dhf1"))?;
        write_dhf1(&mut w, field)?;
        w.flush()?;
        if pgm {
            self.pgm(&format!("{stem}.pgm"), field)?;
        }
        Ok(())
    }
}
