//! One file per share under `root/<rid>/<x>.json`, written with the
//! temp-file, fsync, rename sequence so a reader never sees a torn file.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

const TEMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Created,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutError {
    Conflict,
}

/// Where to simulate a process death inside `put`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    /// The temp file is complete and synced but not yet renamed.
    BeforeRename,
}

type KeyLock = Arc<Mutex<()>>;

#[derive(Debug)]
pub struct ShareStore {
    root: PathBuf,
    locks: Mutex<HashMap<(String, u8), KeyLock>>,
    crash: Option<CrashPoint>,
}

/// A recovery id is 16 bytes of lowercase hex.
pub fn valid_rid(rid: &str) -> bool {
    rid.len() == 32
        && rid
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl ShareStore {
    /// Opens (creating if needed) a store and clears temp files left by
    /// an interrupted write.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        for dir in fs::read_dir(&root)? {
            let dir = dir?;
            if !dir.file_type()?.is_dir() {
                continue;
            }
            for f in fs::read_dir(dir.path())? {
                let f = f?;
                if f.file_name().to_string_lossy().ends_with(TEMP_SUFFIX) {
                    fs::remove_file(f.path())?;
                }
            }
        }
        Ok(ShareStore {
            root,
            locks: Mutex::new(HashMap::new()),
            crash: None,
        })
    }

    pub fn with_crash_point(mut self, point: CrashPoint) -> Self {
        self.crash = Some(point);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn share_path(&self, rid: &str, x: u8) -> PathBuf {
        self.root.join(rid).join(format!("{x}.json"))
    }

    fn key_lock(&self, rid: &str, x: u8) -> Arc<Mutex<()>> {
        let mut map = self.locks.lock().expect("lock table poisoned");
        map.entry((rid.to_string(), x)).or_default().clone()
    }

    /// Stores `body` unless a different body already sits at `(rid, x)`.
    pub fn put(&self, rid: &str, x: u8, body: &[u8]) -> io::Result<Result<PutOutcome, PutError>> {
        debug_assert!(valid_rid(rid));
        let lock = self.key_lock(rid, x);
        let _guard = lock.lock().expect("key lock poisoned");
        let path = self.share_path(rid, x);
        match fs::read(&path) {
            Ok(existing) if existing == body => return Ok(Ok(PutOutcome::Unchanged)),
            Ok(_) => return Ok(Err(PutError::Conflict)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        let dir = self.root.join(rid);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join(format!("{x}.json.{}{TEMP_SUFFIX}", rand::random::<u64>()));
        let mut f = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
        f.write_all(body)?;
        f.sync_all()?;
        drop(f);
        if self.crash == Some(CrashPoint::BeforeRename) {
            return Err(io::Error::other("injected crash before rename"));
        }
        fs::rename(&tmp, &path)?;
        File::open(&dir)?.sync_all()?;
        Ok(Ok(PutOutcome::Created))
    }

    pub fn get(&self, rid: &str, x: u8) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.share_path(rid, x)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Sorted share indices stored for `rid`.
    pub fn list(&self, rid: &str) -> io::Result<Vec<u8>> {
        let entries = match fs::read_dir(self.root.join(rid)) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for e in entries {
            let name = e?.file_name();
            let name = name.to_string_lossy();
            if let Some(x) = name
                .strip_suffix(".json")
                .and_then(|s| s.parse::<u8>().ok())
            {
                out.push(x);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Returns whether something was removed.
    pub fn delete(&self, rid: &str, x: u8) -> io::Result<bool> {
        let lock = self.key_lock(rid, x);
        let _guard = lock.lock().expect("key lock poisoned");
        match fs::remove_file(self.share_path(rid, x)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e),
        }
    }
}
