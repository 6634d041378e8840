//! Out-of-process encoders speaking newline-delimited JSON.
//!
//! The adapter announces itself with `{"ready": true, "name": "<id>"}` and then
//! answers one request at a time:
//!
//! ```text
//! -> {"id": 7, "image": "/tmp/.../req-7.vfmf"}
//! <- {"id": 7, "feature": "/tmp/.../req-7.out.vfmf"}
//! <- {"id": 7, "error": "message"}
//! ```
//!
//! Images are float32 feature files with dims `[H, W, 3]`. Logs must go to
//! stderr; anything on stdout that is not a response is a protocol violation.
//! The pool deletes both files once the response has been read.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EncoderError, FeatureFile, ImageEncoder};
use crate::colorimetry::DisplayImage;

fn default_instances() -> usize {
    1
}

fn default_timeout_ms() -> u64 {
    120_000
}

fn default_startup_ms() -> u64 {
    300_000
}

fn default_retry_budget() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub id: String,
    /// Program and arguments.
    pub command: Vec<String>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Per-request response deadline.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Deadline for the handshake line, which usually includes model loading.
    #[serde(default = "default_startup_ms")]
    pub startup_timeout_ms: u64,
    /// Adapter replacements allowed over the pool's lifetime.
    #[serde(default = "default_retry_budget")]
    pub retry_budget: usize,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

impl AdapterConfig {
    pub fn new(id: impl Into<String>, command: Vec<String>) -> Self {
        Self {
            id: id.into(),
            command,
            instances: default_instances(),
            timeout_ms: default_timeout_ms(),
            startup_timeout_ms: default_startup_ms(),
            retry_budget: default_retry_budget(),
            env: BTreeMap::new(),
        }
    }
}

struct Instance {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    name: String,
}

impl Instance {
    fn spawn(cfg: &AdapterConfig) -> Result<Self, EncoderError> {
        let (prog, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| EncoderError::Spawn("empty command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .envs(&cfg.env)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EncoderError::Spawn(format!("{prog}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    return;
                }
            }
        });
        let mut inst = Self {
            child,
            stdin,
            lines: rx,
            name: String::new(),
        };
        let line = inst
            .next_line(cfg.startup_timeout_ms)
            .map_err(|e| EncoderError::Handshake(e.to_string()))?;
        let v: Value = serde_json::from_str(&line)
            .map_err(|_| EncoderError::Handshake(format!("first line is not JSON: {line}")))?;
        if v.get("ready") != Some(&Value::Bool(true)) {
            return Err(EncoderError::Handshake(format!(
                "expected {{\"ready\": true, ...}}, got {line}"
            )));
        }
        inst.name = v
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| EncoderError::Handshake(format!("handshake lacks a name: {line}")))?
            .to_string();
        Ok(inst)
    }

    fn next_line(&mut self, timeout_ms: u64) -> Result<String, EncoderError> {
        loop {
            match self.lines.recv_timeout(Duration::from_millis(timeout_ms)) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => return Err(EncoderError::Crashed(format!("reading stdout: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(EncoderError::Timeout { ms: timeout_ms })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let status = match self.child.try_wait() {
                        Ok(Some(s)) => s.to_string(),
                        Ok(None) => "process still running".to_string(),
                        Err(e) => e.to_string(),
                    };
                    return Err(EncoderError::Crashed(format!("stdout closed ({status})")));
                }
            }
        }
    }

    fn request(&mut self, id: u64, image: &Path, timeout_ms: u64) -> Result<PathBuf, EncoderError> {
        let req = serde_json::json!({ "id": id, "image": image.to_string_lossy() });
        writeln!(self.stdin, "{req}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EncoderError::Crashed(format!("writing request: {e}")))?;
        let line = self.next_line(timeout_ms)?;
        parse_response(id, &line)
    }
}

impl Drop for Instance {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Validates a response line against the request id.
pub fn parse_response(id: u64, line: &str) -> Result<PathBuf, EncoderError> {
    let v: Value = serde_json::from_str(line)
        .map_err(|_| EncoderError::Protocol(format!("response is not JSON: {line}")))?;
    let got = v
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| EncoderError::Protocol(format!("response lacks a numeric id: {line}")))?;
    if got != id {
        return Err(EncoderError::Protocol(format!(
            "response id {got} does not match request {id}"
        )));
    }
    if let Some(msg) = v.get("error") {
        return Err(EncoderError::Adapter(
            msg.as_str().map_or_else(|| msg.to_string(), str::to_string),
        ));
    }
    match v.get("feature").and_then(Value::as_str) {
        Some(p) => Ok(PathBuf::from(p)),
        None => Err(EncoderError::Protocol(format!(
            "response has neither feature nor error: {line}"
        ))),
    }
}

struct PoolState {
    idle: Vec<Instance>,
    live: usize,
    restarts_left: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoolStats {
    pub live: usize,
    pub restarts: u64,
    pub failures: u64,
}

/// `instances` adapter processes, one request in flight each.
pub struct AdapterPool {
    config: AdapterConfig,
    name: String,
    state: Mutex<PoolState>,
    available: Condvar,
    next_id: AtomicU64,
    restarts: AtomicU64,
    failures: AtomicU64,
    dir: tempfile::TempDir,
}

impl std::fmt::Debug for AdapterPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdapterPool")
            .field("id", &self.config.id)
            .field("name", &self.name)
            .finish()
    }
}

impl AdapterPool {
    pub fn start(config: AdapterConfig) -> Result<Self, EncoderError> {
        if config.instances == 0 {
            return Err(EncoderError::Spawn("instances must be at least 1".into()));
        }
        let dir = tempfile::Builder::new()
            .prefix("vfmprobe-adapter-")
            .tempdir()
            .map_err(|e| EncoderError::Io(e.to_string()))?;
        let mut idle = Vec::with_capacity(config.instances);
        for _ in 0..config.instances {
            idle.push(Instance::spawn(&config)?);
        }
        let name = idle[0].name.clone();
        Ok(Self {
            state: Mutex::new(PoolState {
                live: idle.len(),
                idle,
                restarts_left: config.retry_budget,
            }),
            config,
            name,
            available: Condvar::new(),
            next_id: AtomicU64::new(1),
            restarts: AtomicU64::new(0),
            failures: AtomicU64::new(0),
            dir,
        })
    }

    /// Name announced in the handshake.
    pub fn adapter_name(&self) -> &str {
        &self.name
    }

    pub fn stats(&self) -> PoolStats {
        PoolStats {
            live: self.state.lock().unwrap().live,
            restarts: self.restarts.load(Ordering::SeqCst),
            failures: self.failures.load(Ordering::SeqCst),
        }
    }

    fn acquire(&self) -> Result<Instance, EncoderError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(i) = st.idle.pop() {
                return Ok(i);
            }
            if st.live == 0 {
                return Err(EncoderError::PoolExhausted(format!(
                    "all adapters for '{}' failed and the retry budget of {} is spent",
                    self.config.id, self.config.retry_budget
                )));
            }
            st = self.available.wait(st).unwrap();
        }
    }

    fn release(&self, inst: Instance) {
        self.state.lock().unwrap().idle.push(inst);
        self.available.notify_one();
    }

    /// Drops a failed instance and starts a replacement if the budget allows.
    fn replace(&self, failed: Instance) {
        drop(failed);
        self.failures.fetch_add(1, Ordering::SeqCst);
        let mut st = self.state.lock().unwrap();
        st.live -= 1;
        if st.restarts_left == 0 {
            drop(st);
            self.available.notify_all();
            return;
        }
        st.restarts_left -= 1;
        st.live += 1;
        drop(st);
        self.restarts.fetch_add(1, Ordering::SeqCst);
        match Instance::spawn(&self.config) {
            Ok(inst) => self.release(inst),
            Err(e) => {
                log::warn!("adapter '{}' could not be restarted: {e}", self.config.id);
                self.state.lock().unwrap().live -= 1;
                self.available.notify_all();
            }
        }
    }

    fn attempt(&self, id: u64, image: &Path) -> Result<Vec<f32>, EncoderError> {
        let mut inst = self.acquire()?;
        match inst.request(id, image, self.config.timeout_ms) {
            Ok(feature) => {
                self.release(inst);
                let read = FeatureFile::read(&feature);
                let _ = std::fs::remove_file(&feature);
                Ok(read?.data)
            }
            Err(e) if e.poisons_adapter() => {
                log::warn!("adapter '{}' request {id} failed: {e}", self.config.id);
                self.replace(inst);
                Err(e)
            }
            Err(e) => {
                self.release(inst);
                Err(e)
            }
        }
    }
}

impl ImageEncoder for AdapterPool {
    fn id(&self) -> &str {
        &self.config.id
    }

    /// One request; a crashed or misbehaving adapter is replaced and the
    /// request retried once on the replacement.
    fn encode_values(&self, img: &DisplayImage) -> Result<Vec<f32>, EncoderError> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.path().join(format!("req-{id}.vfmf"));
        FeatureFile::new(
            vec![img.height() as u32, img.width() as u32, 3],
            img.data().to_vec(),
        )?
        .write(&path)?;
        let mut result = self.attempt(id, &path);
        if let Err(first) = &result {
            if first.poisons_adapter() {
                let retry = self.next_id.fetch_add(1, Ordering::SeqCst);
                result = match self.attempt(retry, &path) {
                    // no replacement left; report what went wrong
                    Err(EncoderError::PoolExhausted(_)) => Err(first.clone()),
                    other => other,
                };
            }
        }
        let _ = std::fs::remove_file(&path);
        let values = result?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite {
                index,
                value: values[index],
            });
        }
        Ok(values)
    }

    fn describe(&self) -> String {
        format!(
            "subprocess adapter '{}' ({})",
            self.name,
            self.config.command.join(" ")
        )
    }
}
