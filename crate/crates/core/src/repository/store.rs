use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{Event, RepoError};
use crate::canonical;

/// Durable home of the event log.
pub trait EventStore: Send {
    /// Every event persisted so far, in sequence order.
    fn load(&mut self) -> Result<Vec<Event>, RepoError>;
    /// Persists one event; must be durable when this returns.
    fn persist(&mut self, event: &Event) -> Result<(), RepoError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    events: Vec<Event>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_events(events: Vec<Event>) -> Self {
        Self { events }
    }
}

impl EventStore for MemoryStore {
    fn load(&mut self) -> Result<Vec<Event>, RepoError> {
        Ok(self.events.clone())
    }

    fn persist(&mut self, event: &Event) -> Result<(), RepoError> {
        self.events.push(event.clone());
        Ok(())
    }
}

/// Newline-delimited canonical documents, one event per line.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    file: File,
    fsync: bool,
}

impl FileStore {
    pub fn open(path: impl AsRef<Path>, fsync: bool) -> Result<Self, RepoError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        Ok(Self { path, file, fsync })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventStore for FileStore {
    fn load(&mut self) -> Result<Vec<Event>, RepoError> {
        read_log(&self.path)
    }

    fn persist(&mut self, event: &Event) -> Result<(), RepoError> {
        let mut line = canonical::to_string(event)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        if self.fsync {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

/// Reads an event log file. Blank lines are skipped.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<Event>, RepoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = canonical::from_str(&line).map_err(|e| RepoError::Corrupt { line: i + 1, message: e.to_string() })?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_log(path: impl AsRef<Path>, events: &[Event]) -> Result<(), RepoError> {
    let mut out = String::new();
    for event in events {
        out.push_str(&canonical::to_string(event)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
