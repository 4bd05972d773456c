use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{Evaluation, Interrupted, OptimizerError};

const MAGIC: &[u8; 4] = b"EXOC";
const VERSION: u32 = 1;

fn key(u: &[f64]) -> Vec<u64> {
    u.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// Memoized objective values keyed by the exact unit-cube point.
///
/// A persistent cache appends every new evaluation to a binary file:
/// `EXOC`, version, SHA-256 of the objective fingerprint, dimension, then
/// records of `dimension + 2` little-endian words (`u…`, λ, c). A truncated
/// last record, left by an interrupted run, is ignored on load.
#[derive(Debug)]
pub struct EvalCache {
    dimension: usize,
    map: Mutex<HashMap<Vec<u64>, Evaluation>>,
    file: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
    loaded: usize,
    new_evaluations: AtomicUsize,
    limit: Option<usize>,
}

impl EvalCache {
    pub fn in_memory(dimension: usize) -> Self {
        EvalCache {
            dimension,
            map: Mutex::new(HashMap::new()),
            file: None,
            path: None,
            loaded: 0,
            new_evaluations: AtomicUsize::new(0),
            limit: None,
        }
    }

    /// Opens (or creates) a cache file bound to `fingerprint`. A file written
    /// for another objective or dimension is rejected.
    pub fn persistent(path: &Path, fingerprint: &str, dimension: usize) -> Result<Self, OptimizerError> {
        let digest: [u8; 32] = Sha256::digest(fingerprint.as_bytes()).into();
        let io = |e: std::io::Error| OptimizerError::Cache(format!("{}: {e}", path.display()));
        let mut map = HashMap::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let mut bytes = Vec::new();
            BufReader::new(File::open(path).map_err(io)?).read_to_end(&mut bytes).map_err(io)?;
            if bytes.len() < 44 || &bytes[..4] != MAGIC {
                return Err(OptimizerError::Cache(format!("{} is not an evaluation cache", path.display())));
            }
            let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
            let dim = u32::from_le_bytes(bytes[40..44].try_into().unwrap()) as usize;
            if version != VERSION || bytes[8..40] != digest || dim != dimension {
                return Err(OptimizerError::Cache(format!(
                    "{} belongs to a different problem (version {version}, dimension {dim})",
                    path.display()
                )));
            }
            let record = 8 * (dimension + 2);
            let body = &bytes[44..];
            let complete = body.len() / record;
            for r in body.chunks_exact(record) {
                let word = |i: usize| u64::from_le_bytes(r[8 * i..8 * i + 8].try_into().unwrap());
                let u: Vec<f64> = (0..dimension).map(|i| f64::from_bits(word(i))).collect();
                let e = Evaluation { lambda: f64::from_bits(word(dimension)), constraint: word(dimension + 1) };
                map.insert(key(&u), e);
            }
            valid_len = 44 + (complete * record) as u64;
        }
        let mut file = OpenOptions::new().create(true).write(true).truncate(false).open(path).map_err(io)?;
        if valid_len == 0 {
            file.set_len(0).map_err(io)?;
            file.write_all(MAGIC).map_err(io)?;
            file.write_all(&VERSION.to_le_bytes()).map_err(io)?;
            file.write_all(&digest).map_err(io)?;
            file.write_all(&(dimension as u32).to_le_bytes()).map_err(io)?;
        } else {
            file.set_len(valid_len).map_err(io)?;
            use std::io::Seek;
            file.seek(std::io::SeekFrom::End(0)).map_err(io)?;
        }
        file.flush().map_err(io)?;
        let loaded = map.len();
        Ok(EvalCache {
            dimension,
            map: Mutex::new(map),
            file: Some(Mutex::new(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
            loaded,
            new_evaluations: AtomicUsize::new(0),
            limit: None,
        })
    }

    /// Stops the run with [`Interrupted`] once this many new evaluations were
    /// made.
    pub fn with_limit(mut self, max_new_evaluations: Option<usize>) -> Self {
        self.limit = max_new_evaluations;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Distinct points evaluated so far, including loaded ones.
    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn loaded(&self) -> usize {
        self.loaded
    }

    pub fn new_evaluations(&self) -> usize {
        self.new_evaluations.load(Ordering::SeqCst).min(self.limit.unwrap_or(usize::MAX))
    }

    pub fn get(&self, u: &[f64]) -> Option<Evaluation> {
        self.map.lock().unwrap().get(&key(u)).copied()
    }

    pub fn get_or_eval(&self, u: &[f64], f: impl FnOnce() -> Evaluation) -> Result<Evaluation, Interrupted> {
        let k = key(u);
        if let Some(e) = self.map.lock().unwrap().get(&k) {
            return Ok(*e);
        }
        let reserved = self.new_evaluations.fetch_add(1, Ordering::SeqCst);
        if self.limit.is_some_and(|l| reserved >= l) {
            return Err(Interrupted);
        }
        let e = f();
        let mut map = self.map.lock().unwrap();
        if let std::collections::hash_map::Entry::Vacant(slot) = map.entry(k) {
            slot.insert(e);
            if let Some(file) = &self.file {
                let mut w = file.lock().unwrap();
                let words = u.iter().map(|v| v.to_bits()).chain([e.lambda.to_bits(), e.constraint]);
                let written = words.map(|x| w.write_all(&x.to_le_bytes())).collect::<Result<(), _>>().and_then(|_| w.flush());
                if let Err(err) = written {
                    log::warn!("evaluation cache write failed: {err}");
                }
            }
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistent_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        {
            let c = EvalCache::persistent(&path, "p", 2).unwrap();
            c.get_or_eval(&[0.1, 0.2], || Evaluation { lambda: 3.0, constraint: 1 }).unwrap();
            c.get_or_eval(&[0.3, 0.4], || Evaluation { lambda: f64::INFINITY, constraint: 9 }).unwrap();
        }
        // A torn final record is dropped.
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&[1, 2, 3]).unwrap();
        drop(f);
        let c = EvalCache::persistent(&path, "p", 2).unwrap();
        assert_eq!(c.loaded(), 2);
        assert_eq!(c.get(&[0.3, 0.4]).unwrap().constraint, 9);
        c.get_or_eval(&[0.5, 0.5], || Evaluation { lambda: 1.0, constraint: 0 }).unwrap();
        drop(c);
        assert_eq!(EvalCache::persistent(&path, "p", 2).unwrap().len(), 3);
        assert!(EvalCache::persistent(&path, "other", 2).is_err());
        assert!(EvalCache::persistent(&path, "p", 3).is_err());
    }

    #[test]
    fn limit_interrupts_new_work_only() {
        let c = EvalCache::in_memory(1).with_limit(Some(1));
        let e = Evaluation { lambda: 1.0, constraint: 0 };
        assert!(c.get_or_eval(&[0.0], || e).is_ok());
        assert!(c.get_or_eval(&[-0.0], || unreachable!()).is_ok());
        assert_eq!(c.get_or_eval(&[0.5], || e), Err(Interrupted));
    }
}
