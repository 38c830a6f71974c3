//! Project directory layout: `config.toml` (operator-editable template)
//! and `events.log` (the authoritative JSON-lines event log). The config
//! inside the log's first record is what replay uses; the TOML copy is
//! kept for reference and for `init`.

use std::fs::{self, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crowdnorm_core::event::{encode_line, read_log, EventRecord};
use crowdnorm_core::{Project, ProjectConfig};

pub fn config_path(dir: &Path) -> PathBuf {
    dir.join("config.toml")
}

pub fn log_path(dir: &Path) -> PathBuf {
    dir.join("events.log")
}

pub fn read_config_file(path: &Path) -> Result<ProjectConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: ProjectConfig =
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

pub fn init_project(dir: &Path, config: ProjectConfig) -> Result<Project> {
    fs::create_dir_all(dir)?;
    let log = log_path(dir);
    if log.exists() {
        bail!("{} already contains a project", dir.display());
    }
    let project = Project::new(config.clone(), crowdnorm_core::Timestamp::now())?;
    fs::write(
        config_path(dir),
        toml::to_string_pretty(&config).context("config serialization")?,
    )?;
    let mut file = fs::File::create(&log)?;
    for record in project.log() {
        writeln!(file, "{}", encode_line(record))?;
    }
    Ok(project)
}

pub fn load_records(dir: &Path) -> Result<Vec<EventRecord>> {
    let path = log_path(dir);
    let file =
        fs::File::open(&path).with_context(|| format!("no project at {}", dir.display()))?;
    Ok(read_log(BufReader::new(file))?)
}

pub fn load_project(dir: &Path) -> Result<Project> {
    let records = load_records(dir)?;
    Ok(Project::replay(&records)?)
}

/// Append the records produced after `known_len` to the log file.
pub fn append_events(dir: &Path, project: &Project, known_len: usize) -> Result<()> {
    let new = project.log_since(known_len);
    if new.is_empty() {
        return Ok(());
    }
    let mut file = OpenOptions::new().append(true).open(log_path(dir))?;
    for record in new {
        writeln!(file, "{}", encode_line(record))?;
    }
    Ok(())
}
