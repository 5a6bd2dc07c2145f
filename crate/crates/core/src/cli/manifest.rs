use std::fmt::Display;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{write_output, CliResult, RunConfig};

/// Tab-separated record of a run: command, effective config, seeds and
/// content hashes of every input and output. Holds no timestamps or
/// absolute paths, so identical runs give identical manifests.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    lines: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut m = Manifest::default();
        m.field("command", command);
        m.field("version", env!("CARGO_PKG_VERSION"));
        for line in cfg.echo() {
            m.field("config", line);
        }
        m.field("seed", cfg.seed);
        m
    }

    pub fn field(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key}\t{value}"));
    }

    pub fn input(&mut self, name: &str, content: &str) {
        self.lines.push(format!("input\t{name}\t{}", sha256_hex(content)));
    }

    pub fn output(&mut self, name: &str, content: &str) {
        self.lines.push(format!("output\t{name}\t{}", sha256_hex(content)));
    }

    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    pub(super) fn write(&self, dir: &Path, name: &str) -> CliResult<()> {
        let mut sink = Manifest::default();
        write_output(dir, name, &self.text(), &mut sink)
    }
}
