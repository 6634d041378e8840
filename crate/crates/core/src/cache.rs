//! Digest-keyed S_ac cache, persisted as JSON lines so an interrupted run can resume.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::colorimetry::DisplayModel;
use crate::stimuli::StimulusPair;

#[derive(Serialize, Deserialize)]
struct Line {
    key: String,
    /// f64 bit pattern in hex, so values survive the round trip exactly.
    sac: String,
}

#[derive(Debug)]
pub struct SacCache {
    map: Mutex<HashMap<String, f64>>,
    file: Option<Mutex<BufWriter<File>>>,
}

/// Cache key over (stimulus pair, encoder id, display model).
pub fn sac_key(encoder: &str, dm: &DisplayModel, pair: &StimulusPair) -> String {
    let json = serde_json::to_string(&(encoder, dm, pair)).expect("serialisable");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl SacCache {
    pub fn in_memory() -> Self {
        Self {
            map: Mutex::new(HashMap::new()),
            file: None,
        }
    }

    /// Loads existing entries and appends new ones to `path`. A torn final
    /// line from an interrupted run is ignored.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut map = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                let Ok(l) = serde_json::from_str::<Line>(&line) else {
                    continue;
                };
                if let Ok(bits) = u64::from_str_radix(&l.sac, 16) {
                    map.insert(l.key, f64::from_bits(bits));
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // start on a fresh line if the previous run died mid-write
        let len = file.metadata()?.len();
        if len > 0 {
            let text = std::fs::read(path)?;
            if text.last() != Some(&b'\n') {
                file.write_all(b"\n")?;
            }
        }
        Ok(Self {
            map: Mutex::new(map),
            file: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.map.lock().unwrap().get(key).copied()
    }

    pub fn insert(&self, key: String, value: f64) -> std::io::Result<()> {
        if let Some(f) = &self.file {
            let line = serde_json::to_string(&Line {
                key: key.clone(),
                sac: format!("{:016x}", value.to_bits()),
            })
            .expect("serialisable");
            let mut w = f.lock().unwrap();
            writeln!(w, "{line}")?;
            w.flush()?;
        }
        self.map.lock().unwrap().insert(key, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
