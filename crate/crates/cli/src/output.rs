//! Output files are built in memory and written only once a command has
//! succeeded, each through a temporary file and a rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
        bytes.push(b'\n');
        Self { name: name.into(), bytes }
    }
}

/// CSV with a leading `# format: <name>/<version>` line.
pub struct Table {
    format: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(format: &str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { format: format.into(), writer }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.writer.write_record(fields.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }

    pub fn finish(self, name: &str) -> OutputFile {
        let body = self.writer.into_inner().expect("in-memory flush");
        let mut bytes = format!("# format: {}\n", self.format).into_bytes();
        bytes.extend(body);
        OutputFile { name: name.into(), bytes }
    }
}

/// Empty field for missing values.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes every file into `dir`; nothing is left behind on failure.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>, CliError> {
    for f in files {
        if f.name.contains(['/', '\\']) || f.name.starts_with('.') {
            return Err(CliError::Io(format!("refusing to write {}", f.name)));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut staged = Vec::new();
    let cleanup = |staged: &[PathBuf]| staged.iter().for_each(|p| drop(fs::remove_file(p)));
    for f in files {
        let tmp = dir.join(format!(".{}.tmp", f.name));
        let res = fs::File::create(&tmp).and_then(|mut h| h.write_all(&f.bytes).and_then(|_| h.sync_all()));
        staged.push(tmp);
        if let Err(e) = res {
            cleanup(&staged);
            return Err(CliError::Io(format!("{}: {e}", f.name)));
        }
    }
    let mut written = Vec::new();
    for (f, tmp) in files.iter().zip(&staged) {
        let path = dir.join(&f.name);
        fs::rename(tmp, &path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
