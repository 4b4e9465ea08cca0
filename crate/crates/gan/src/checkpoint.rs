//! Versioned checkpoint container.
//!
//! Layout: 8-byte magic, u32 version, u64 header length, JSON header, then
//! every section's f64 values little-endian in header order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GanError, Result};
use crate::optim::Adam;
use crate::params::ParamStore;

pub const MAGIC: &[u8; 8] = b"IVUSCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stage1,
    Stage2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionInfo {
    pub key: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub info: SectionInfo,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    stage: Stage,
    epoch: usize,
    step: u64,
    seed: u64,
    meta: serde_json::Value,
    counters: BTreeMap<String, u64>,
    sections: Vec<SectionInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub seed: u64,
    /// Configuration echo and run bookkeeping.
    pub meta: serde_json::Value,
    pub counters: BTreeMap<String, u64>,
    pub sections: Vec<Section>,
}

fn bad(path: &Path, msg: impl Into<String>) -> GanError {
    GanError::Checkpoint { path: path.to_path_buf(), msg: msg.into() }
}

impl Checkpoint {
    pub fn new(stage: Stage, epoch: usize, step: u64, seed: u64, meta: serde_json::Value) -> Self {
        Self { stage, epoch, step, seed, meta, counters: BTreeMap::new(), sections: Vec::new() }
    }

    pub fn put(&mut self, key: impl Into<String>, shape: Vec<usize>, trainable: bool, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.sections.push(Section { info: SectionInfo { key: key.into(), shape, trainable }, data });
    }

    pub fn get(&self, key: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.info.key == key)
    }

    pub fn put_store(&mut self, prefix: &str, store: &ParamStore) {
        for e in store.entries() {
            self.put(format!("{prefix}/{}", e.name), e.shape.clone(), e.trainable, e.value.clone());
        }
    }

    /// Copies `prefix/*` sections into `store`, which must have the same
    /// layout.
    pub fn load_store(&self, prefix: &str, store: &mut ParamStore) -> Result<()> {
        let p = format!("{prefix}/");
        let mut other = ParamStore::new();
        for s in self.sections.iter().filter(|s| s.info.key.starts_with(&p)) {
            other.add(&s.info.key[p.len()..], s.info.shape.clone(), s.data.clone(), s.info.trainable);
        }
        store.load(&other).map_err(|m| bad(Path::new(prefix), m))
    }

    pub fn put_adam(&mut self, prefix: &str, adam: &Adam) {
        self.counters.insert(format!("{prefix}/t"), adam.t);
        for (i, (m, v)) in adam.m.iter().zip(&adam.v).enumerate() {
            self.put(format!("{prefix}/m/{i}"), vec![m.len()], false, m.clone());
            self.put(format!("{prefix}/v/{i}"), vec![v.len()], false, v.clone());
        }
    }

    pub fn load_adam(&self, prefix: &str, adam: &mut Adam) -> Result<()> {
        let missing = |k: &str| bad(Path::new(prefix), format!("missing optimizer section {k}"));
        adam.t = *self.counters.get(&format!("{prefix}/t")).ok_or_else(|| missing("t"))?;
        for i in 0..adam.m.len() {
            for (name, dst) in [("m", &mut adam.m[i]), ("v", &mut adam.v[i])] {
                let key = format!("{prefix}/{name}/{i}");
                let s = self.get(&key).ok_or_else(|| missing(&key))?;
                if s.data.len() != dst.len() {
                    return Err(bad(Path::new(prefix), format!("{key} has {} values, expected {}", s.data.len(), dst.len())));
                }
                dst.clone_from(&s.data);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            version: VERSION,
            stage: self.stage,
            epoch: self.epoch,
            step: self.step,
            seed: self.seed,
            meta: self.meta.clone(),
            counters: self.counters.clone(),
            sections: self.sections.iter().map(|s| s.info.clone()).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let payload: usize = self.sections.iter().map(|s| s.data.len() * 8).sum();
        let mut out = Vec::with_capacity(20 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for s in &self.sections {
            for v in &s.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad(path, "not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(path, format!("unsupported version {version}, expected {VERSION}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(20..20 + hlen).ok_or_else(|| bad(path, "truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| bad(path, format!("header: {e}")))?;
        let mut payload = &bytes[20 + hlen..];
        let mut sections = Vec::with_capacity(header.sections.len());
        for info in header.sections {
            let n: usize = info.shape.iter().product();
            if payload.len() < n * 8 {
                return Err(bad(path, format!("truncated payload in section {}", info.key)));
            }
            let data = payload[..n * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            payload = &payload[n * 8..];
            sections.push(Section { info, data });
        }
        if !payload.is_empty() {
            return Err(bad(path, format!("{} trailing bytes", payload.len())));
        }
        Ok(Self {
            stage: header.stage,
            epoch: header.epoch,
            step: header.step,
            seed: header.seed,
            meta: header.meta,
            counters: header.counters,
            sections,
        })
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp: PathBuf = {
            let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".tmp");
            path.with_file_name(name)
        };
        let mut f = fs::File::create(&tmp).map_err(|e| GanError::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| GanError::io(&tmp, e))?;
        f.sync_all().map_err(|e| GanError::io(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| GanError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| GanError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        store.add("a.weight", vec![2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300], true);
        store.add("a.running_var", vec![1], vec![1.0 / 3.0], false);
        let mut c = Checkpoint::new(Stage::Stage2, 3, 17, 99, serde_json::json!({"lr": 0.0002}));
        c.put_store("g", &store);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        c.write_atomic(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.meta["lr"].as_f64(), Some(0.0002));
        let mut restored = store.clone();
        restored.fill_trainable(5.0);
        back.load_store("g", &mut restored).unwrap();
        assert_eq!(restored.digest(), store.digest());
        assert!(!dir.path().join("x.ckpt.tmp").exists());
    }

    #[test]
    fn rejects_corruption() {
        let c = Checkpoint::new(Stage::Stage1, 0, 0, 0, serde_json::Value::Null);
        let mut bytes = c.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..10], Path::new("t")).is_err());
        bytes[8] = 9;
        let err = Checkpoint::from_bytes(&bytes, Path::new("t")).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
    }
}
