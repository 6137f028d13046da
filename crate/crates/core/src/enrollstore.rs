//! A directory of templates keyed by subject id.
//!
//! Layout: `<dir>/index.tsv` with one tab-separated row per subject (id,
//! created, image bytes, template bytes, threshold, ridge thickness, shape
//! radius, region fraction, mode), `<dir>/<id>.aft` per subject, and
//! `<dir>/store.lock` while a mutation is in progress.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::matcher::{match_templates, MatchConfig, MatchError, MatchResult};
use crate::pipeline::{image_to_template, PipelineConfig, PipelineError};
use crate::preprocess::PreprocessConfig;
use crate::raster::{save_image, RasterImage, SaveFormat};
use crate::template::{parse, serialize, DistanceMode, TemplateError};

pub const INDEX_FILE: &str = "index.tsv";
pub const LOCK_FILE: &str = "store.lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid subject id {0:?}: use 1-64 characters from A-Z a-z 0-9 _ -")]
    InvalidSubject(String),
    #[error("subject {0} is already enrolled")]
    DuplicateSubject(SubjectId),
    #[error("subject {0} is not enrolled")]
    UnknownSubject(SubjectId),
    #[error("store is locked by another writer ({0})")]
    StoreLocked(PathBuf),
    #[error("stored template uses {stored} distances but the index records {indexed}")]
    ModeMismatch {
        stored: DistanceMode,
        indexed: DistanceMode,
    },
    #[error("index line {line}: {reason}")]
    CorruptIndex { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubjectId(String);

impl SubjectId {
    pub fn new(id: &str) -> Result<Self, StoreError> {
        let ok = (1..=64).contains(&id.len())
            && id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if ok {
            Ok(SubjectId(id.to_string()))
        } else {
            Err(StoreError::InvalidSubject(id.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn file_name(&self) -> String {
        format!("{}.aft", self.0)
    }
}

impl FromStr for SubjectId {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, StoreError> {
        SubjectId::new(s)
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One index row.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentRecord {
    pub subject: SubjectId,
    /// Relative to the store directory.
    pub template_path: PathBuf,
    pub created: DateTime<Utc>,
    pub source_image_bytes: u64,
    pub template_bytes: u64,
    /// Parameters the template was built with; verification replays them.
    pub config: PipelineConfig,
}

impl EnrollmentRecord {
    fn to_row(&self) -> String {
        let p = &self.config.preprocess;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.subject,
            self.created.to_rfc3339_opts(SecondsFormat::Secs, true),
            self.source_image_bytes,
            self.template_bytes,
            p.threshold,
            p.ridge_thickness,
            p.shape_radius,
            self.config.region_fraction,
            self.config.mode,
        )
    }

    fn from_row(line: usize, row: &str) -> Result<Self, StoreError> {
        let bad = |reason: &str| StoreError::CorruptIndex {
            line,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = row.split('\t').collect();
        if f.len() != 9 {
            return Err(bad(&format!("expected 9 fields, found {}", f.len())));
        }
        let subject = SubjectId::new(f[0]).map_err(|_| bad("bad subject id"))?;
        let created = DateTime::parse_from_rfc3339(f[1])
            .map_err(|_| bad("bad timestamp"))?
            .with_timezone(&Utc);
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| bad(what));
        let config = PipelineConfig {
            preprocess: PreprocessConfig {
                threshold: num(f[4], "bad threshold")? as u32,
                ridge_thickness: num(f[5], "bad ridge thickness")? as u32,
                shape_radius: num(f[6], "bad shape radius")? as u32,
            },
            region_fraction: f[7].parse().map_err(|_| bad("bad region fraction"))?,
            mode: f[8].parse().map_err(|_| bad("bad mode"))?,
        };
        Ok(EnrollmentRecord {
            template_path: PathBuf::from(subject.file_name()),
            subject,
            created,
            source_image_bytes: num(f[2], "bad image size")?,
            template_bytes: num(f[3], "bad template size")?,
            config,
        })
    }
}

/// Held while mutating; removing the lock file on drop.
struct StoreLock {
    path: PathBuf,
}

impl StoreLock {
    fn acquire(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StoreLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(StoreError::StoreLocked(path))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes `bytes` under a temporary name in `dir`, then renames it over
/// `dest`.
fn write_atomic(dir: &Path, dest: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dest).map_err(|e| e.error)?;
    Ok(())
}

fn read_index(dir: &Path) -> Result<Vec<EnrollmentRecord>, StoreError> {
    let text = match fs::read_to_string(dir.join(INDEX_FILE)) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| EnrollmentRecord::from_row(i + 1, l))
        .collect()
}

fn write_index(dir: &Path, records: &[EnrollmentRecord]) -> io::Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_row());
        text.push('\n');
    }
    write_atomic(dir, &dir.join(INDEX_FILE), text.as_bytes())
}

/// Enrolls `img` under `id`, recording its P3 encoding size as the source
/// image size.
pub fn register(
    store: &Path,
    id: &SubjectId,
    img: &RasterImage,
    cfg: &PipelineConfig,
    overwrite: bool,
) -> Result<EnrollmentRecord, StoreError> {
    let image_bytes = save_image(img, SaveFormat::P3).len() as u64;
    register_sized(store, id, img, image_bytes, cfg, overwrite)
}

/// As [`register`], with the source image size supplied by the caller (for
/// instance the size of the file it was loaded from).
pub fn register_sized(
    store: &Path,
    id: &SubjectId,
    img: &RasterImage,
    source_image_bytes: u64,
    cfg: &PipelineConfig,
    overwrite: bool,
) -> Result<EnrollmentRecord, StoreError> {
    let _lock = StoreLock::acquire(store)?;
    let mut records = read_index(store)?;
    let existing = records.iter().position(|r| &r.subject == id);
    if existing.is_some() && !overwrite {
        return Err(StoreError::DuplicateSubject(id.clone()));
    }

    let bytes = serialize(&image_to_template(img, cfg)?.template);
    let template_path = PathBuf::from(id.file_name());
    write_atomic(store, &store.join(&template_path), &bytes)?;

    let created =
        DateTime::from_timestamp(Utc::now().timestamp(), 0).expect("current time in range");
    let record = EnrollmentRecord {
        subject: id.clone(),
        template_path,
        created,
        source_image_bytes,
        template_bytes: bytes.len() as u64,
        config: *cfg,
    };
    match existing {
        Some(i) => records[i] = record.clone(),
        None => records.push(record.clone()),
    }
    write_index(store, &records)?;
    log::info!("enrolled {id}: {} template bytes", bytes.len());
    Ok(record)
}

/// Builds a probe template with the parameters recorded at enrollment and
/// matches it against the stored template.
pub fn verify(
    store: &Path,
    id: &SubjectId,
    img: &RasterImage,
    match_cfg: &MatchConfig,
) -> Result<MatchResult, StoreError> {
    let record = lookup(store, id)?;
    let stored = parse(&fs::read(store.join(&record.template_path))?)?;
    if stored.mode() != record.config.mode {
        return Err(StoreError::ModeMismatch {
            stored: stored.mode(),
            indexed: record.config.mode,
        });
    }
    let probe = image_to_template(img, &record.config)?.template;
    Ok(match_templates(&stored, &probe, match_cfg)?)
}

pub fn lookup(store: &Path, id: &SubjectId) -> Result<EnrollmentRecord, StoreError> {
    read_index(store)?
        .into_iter()
        .find(|r| &r.subject == id)
        .ok_or_else(|| StoreError::UnknownSubject(id.clone()))
}

/// Index rows in enrollment order; a missing store is empty.
pub fn list_subjects(store: &Path) -> Result<Vec<EnrollmentRecord>, StoreError> {
    read_index(store)
}

/// Removes the subject's template and index row. Returns whether it was
/// enrolled.
pub fn delete_subject(store: &Path, id: &SubjectId) -> Result<bool, StoreError> {
    let _lock = StoreLock::acquire(store)?;
    let mut records = read_index(store)?;
    let Some(i) = records.iter().position(|r| &r.subject == id) else {
        return Ok(false);
    };
    let record = records.remove(i);
    write_index(store, &records)?;
    match fs::remove_file(store.join(&record.template_path)) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    Ok(true)
}
