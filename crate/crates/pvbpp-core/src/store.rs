//! Flat-file account store: one `username:hex(digest)` line per account.
//!
//! Only the password digest is ever written; the plaintext password never
//! reaches disk. Writes go through a temp file plus rename so a crashed
//! registration cannot corrupt the store.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::crypto::{password_digest, CryptoError, Digest};
use crate::protocol::validate_username;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("user {0:?} is already registered")]
    DuplicateUser(String),
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("username is malformed: must be 1-64 octets with no control characters")]
    MalformedUsername,
    #[error("store file corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A registered account: the username and `D = H(p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub username: String,
    pub digest: Digest,
}

/// In-memory account table. Read-only during authentication; mutated only
/// by registration.
#[derive(Debug, Clone, Default)]
pub struct UserStore {
    users: BTreeMap<String, Digest>,
}

impl UserStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an account, hashing the password. Usernames are unique.
    pub fn register(&mut self, username: &str, password: &str) -> Result<(), StoreError> {
        validate_username(username).map_err(|_| StoreError::MalformedUsername)?;
        if self.users.contains_key(username) {
            return Err(StoreError::DuplicateUser(username.to_string()));
        }
        let digest = password_digest(password).map_err(|e| match e {
            CryptoError::EmptyPassword => StoreError::EmptyPassword,
            other => StoreError::Corrupt {
                line: 0,
                reason: other.to_string(),
            },
        })?;
        self.users.insert(username.to_string(), digest);
        Ok(())
    }

    pub fn lookup(&self, username: &str) -> Option<&Digest> {
        self.users.get(username)
    }

    pub fn contains(&self, username: &str) -> bool {
        self.users.contains_key(username)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = UserRecord> + '_ {
        self.users.iter().map(|(username, digest)| UserRecord {
            username: username.clone(),
            digest: *digest,
        })
    }

    /// Parses the line format. The digest field is always the trailing 64
    /// hex characters, so usernames may contain `:` — the split happens at
    /// the last colon.
    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut store = UserStore::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let (username, hex_digest) =
                raw.rsplit_once(':').ok_or_else(|| StoreError::Corrupt {
                    line,
                    reason: "missing ':' separator".to_string(),
                })?;
            if hex_digest.len() != 64 {
                return Err(StoreError::Corrupt {
                    line,
                    reason: format!("digest field is {} chars, expected 64", hex_digest.len()),
                });
            }
            let digest = Digest::from_hex(hex_digest).ok_or_else(|| StoreError::Corrupt {
                line,
                reason: "digest field is not hex".to_string(),
            })?;
            validate_username(username).map_err(|_| StoreError::Corrupt {
                line,
                reason: "malformed username".to_string(),
            })?;
            if store.users.insert(username.to_string(), digest).is_some() {
                return Err(StoreError::Corrupt {
                    line,
                    reason: format!("duplicate user {username:?}"),
                });
            }
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Loads the store, or returns an empty one when the file does not
    /// exist yet.
    pub fn load_or_empty(path: &Path) -> Result<Self, StoreError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(UserStore::new()),
            Err(e) => Err(StoreError::Io(e)),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (username, digest) in &self.users {
            out.push_str(username);
            out.push(':');
            out.push_str(&digest.to_hex());
            out.push('\n');
        }
        out
    }

    /// Writes the whole store atomically: temp file in the same directory,
    /// then rename over the target.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let tmp_path = match dir {
            Some(d) => d.join(format!(
                ".{}.tmp",
                path.file_name()
                    .map(|n| n.to_string_lossy())
                    .unwrap_or_default()
            )),
            None => Path::new(&format!(".{}.tmp", path.display())).to_path_buf(),
        };
        {
            let mut tmp = fs::File::create(&tmp_path)?;
            tmp.write_all(self.to_text().as_bytes())?;
            tmp.sync_all()?;
        }
        fs::rename(&tmp_path, path)?;
        Ok(())
    }
}

/// Registers a user against the on-disk store: load (or start empty),
/// insert, write back atomically.
pub fn register_user(store_path: &Path, username: &str, password: &str) -> Result<(), StoreError> {
    let mut store = UserStore::load_or_empty(store_path)?;
    store.register(username, password)?;
    store.save(store_path)
}
