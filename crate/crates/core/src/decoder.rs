//! Latent state → image decoding.
//!
//! Two built-in decoders render ground-truth semantics directly from the bits
//! (a sliding-tile compositor and a Towers of Hanoi renderer). A third kind
//! talks to an external process over a newline-delimited JSON protocol:
//!
//! ```text
//! server → {"ready": true, "n_props": 81}
//! client → {"id": 0, "bits": "0100..."}
//! server → {"id": 0, "width": 12, "height": 12, "maxval": 255, "pixels": "<base64>"}
//! ```
//!
//! Pixels are row-major, one byte each, or two bytes big-endian when
//! `maxval > 255`. A server may answer out of order; the client matches by id.

use std::io::{BufRead, BufReader, Write};
use std::num::NonZeroUsize;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use lru::LruCache;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{Image, ImageError};
use crate::strips::State;

pub const DEFAULT_TIMEOUT_SECS: f64 = 30.0;
pub const DEFAULT_CACHE_CAPACITY: usize = 100_000;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("decoder expects {expected} propositions, state has {found}")]
    Width { expected: usize, found: usize },
    #[error("invalid decoder configuration: {0}")]
    Config(String),
    #[error("failed to start decoder process `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("decoder handshake failed: {0}")]
    Handshake(String),
    #[error("decoder timed out after {seconds:.1}s waiting for request {id}")]
    Timeout { id: u64, seconds: f64 },
    #[error("decoder process exited: {0}")]
    Exited(String),
    #[error("decoder protocol error: {0}")]
    Protocol(String),
    #[error("decoder reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("decoder i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("decoding step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<DecodeError>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderKind {
    /// `grid`×`grid` sliding-tile board; bit `cell * grid² + tile` places
    /// `tile` in `cell`. Tile 0 is the blank.
    TileCompositor {
        grid: usize,
        patch: usize,
        maxval: u32,
    },
    /// Bit `(disk - 1) * pegs + peg` puts `disk` (1 = smallest) on `peg`.
    HanoiRenderer {
        pegs: usize,
        disks: usize,
        disk_height: usize,
        unit_width: usize,
        maxval: u32,
    },
    External {
        command: Vec<String>,
        n_props: usize,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

fn default_cache() -> usize {
    DEFAULT_CACHE_CAPACITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    #[serde(flatten)]
    pub kind: DecoderKind,
    #[serde(default = "default_cache")]
    pub cache_capacity: usize,
}

impl DecoderConfig {
    pub fn new(kind: DecoderKind) -> Self {
        DecoderConfig {
            kind,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }

    pub fn n_props(&self) -> usize {
        match &self.kind {
            DecoderKind::TileCompositor { grid, .. } => grid.pow(4),
            DecoderKind::HanoiRenderer { pegs, disks, .. } => pegs * disks,
            DecoderKind::External { n_props, .. } => *n_props,
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |m: &str| Err(DecodeError::Config(m.to_string()));
        match &self.kind {
            DecoderKind::TileCompositor { grid, patch, maxval } => {
                if *grid < 2 {
                    return bad("tile grid must be at least 2");
                }
                if *patch == 0 {
                    return bad("tile patch size must be positive");
                }
                if (*maxval as usize) + 1 < grid * grid {
                    return bad("maxval too small for one intensity band per tile");
                }
            }
            DecoderKind::HanoiRenderer {
                pegs,
                disks,
                disk_height,
                unit_width,
                maxval,
            } => {
                if *pegs < 3 || *disks < 1 {
                    return bad("hanoi needs at least 3 pegs and 1 disk");
                }
                if *disk_height == 0 || *unit_width == 0 {
                    return bad("hanoi disk geometry must be positive");
                }
                if (*maxval as usize) < *disks + 1 {
                    return bad("maxval too small for one intensity band per disk");
                }
            }
            DecoderKind::External {
                command,
                n_props,
                timeout_secs,
            } => {
                if command.is_empty() || command[0].is_empty() {
                    return bad("external decoder command is empty");
                }
                if *n_props == 0 {
                    return bad("external decoder n_props must be positive");
                }
                if !(*timeout_secs > 0.0) {
                    return bad("external decoder timeout must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Intensity band `[lo, hi)` of band `k` out of `count` over `0..=maxval`.
pub fn intensity_band(k: usize, count: usize, maxval: u32) -> (u32, u32) {
    let span = maxval as usize + 1;
    ((k * span / count) as u32, ((k + 1) * span / count) as u32)
}

/// Procedural tile atlas: tile 0 is black, tile `k` cycles through its own
/// intensity band so tile signatures never overlap.
pub fn tile_atlas(grid: usize, patch: usize, maxval: u32) -> Vec<Vec<u32>> {
    let n_tiles = grid * grid;
    (0..n_tiles)
        .map(|k| {
            if k == 0 {
                return vec![0; patch * patch];
            }
            let (lo, hi) = intensity_band(k, n_tiles, maxval);
            let width = (hi - lo) as usize;
            (0..patch * patch)
                .map(|i| {
                    let (x, y) = (i % patch, i / patch);
                    // Diagonal stripes over the upper half of the band.
                    let half = width - width / 2;
                    let step = width / 2 + ((x + 2 * y) * 5) % half;
                    lo + step as u32
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
struct TileCompositor {
    grid: usize,
    patch: usize,
    maxval: u32,
    atlas: Vec<Vec<u32>>,
}

impl TileCompositor {
    fn render(&self, state: &State) -> Image {
        let n_tiles = self.grid * self.grid;
        let side = self.grid * self.patch;
        let mut img = Image::filled(side, side, self.maxval, 0).expect("positive geometry");
        let pixels = img.pixels_mut();
        let mut sum = vec![0u32; self.patch * self.patch];
        for cell in 0..n_tiles {
            let tiles: Vec<usize> = (0..n_tiles)
                .filter(|&t| state.contains(cell * n_tiles + t))
                .collect();
            if tiles.is_empty() {
                continue;
            }
            sum.iter_mut().for_each(|s| *s = 0);
            for &t in &tiles {
                for (s, &p) in sum.iter_mut().zip(&self.atlas[t]) {
                    *s += p;
                }
            }
            let (cx, cy) = (cell % self.grid, cell / self.grid);
            let count = tiles.len() as u32;
            for py in 0..self.patch {
                let row = (cy * self.patch + py) * side + cx * self.patch;
                for px in 0..self.patch {
                    pixels[row + px] = sum[py * self.patch + px] / count;
                }
            }
        }
        img
    }
}

#[derive(Debug, Clone)]
struct HanoiRenderer {
    pegs: usize,
    disks: usize,
    disk_height: usize,
    unit_width: usize,
    maxval: u32,
}

impl HanoiRenderer {
    fn column_width(&self) -> usize {
        (2 * self.disks + 3) * self.unit_width
    }

    pub(crate) fn disk_intensity(&self, disk: usize) -> u32 {
        let (lo, hi) = intensity_band(disk, self.disks + 1, self.maxval);
        (lo + hi - 1) / 2
    }

    fn render(&self, state: &State) -> Image {
        let col_w = self.column_width();
        let width = self.pegs * col_w;
        let height = (self.disks + 1) * self.disk_height;
        let mut img = Image::filled(width, height, self.maxval, 0).expect("positive geometry");
        let on = |disk: usize, peg: usize| state.contains((disk - 1) * self.pegs + peg);
        let pixels = img.pixels_mut();
        for peg in 0..self.pegs {
            for disk in 1..=self.disks {
                if !on(disk, peg) {
                    continue;
                }
                let below = (disk + 1..=self.disks).filter(|&d| on(d, peg)).count();
                let disk_w = (2 * disk + 1) * self.unit_width;
                let x0 = peg * col_w + (col_w - disk_w) / 2;
                let y1 = height - below * self.disk_height;
                let value = self.disk_intensity(disk);
                for y in y1 - self.disk_height..y1 {
                    pixels[y * width + x0..y * width + x0 + disk_w].fill(value);
                }
            }
        }
        img
    }
}

enum Backend {
    Tile(TileCompositor),
    Hanoi(HanoiRenderer),
    External(Mutex<ExternalClient>),
}

/// A configured decoder with an optional LRU cache keyed by state bits.
pub struct Decoder {
    config: DecoderConfig,
    backend: Backend,
    cache: Option<Mutex<LruCache<State, Arc<Image>>>>,
    backend_calls: AtomicU64,
}

impl std::fmt::Debug for Decoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Decoder").field("config", &self.config).finish()
    }
}

impl Decoder {
    /// Builds the decoder. External decoders spawn their process here.
    pub fn new(config: DecoderConfig) -> Result<Self, DecodeError> {
        config.validate()?;
        let backend = match &config.kind {
            &DecoderKind::TileCompositor { grid, patch, maxval } => Backend::Tile(TileCompositor {
                grid,
                patch,
                maxval,
                atlas: tile_atlas(grid, patch, maxval),
            }),
            &DecoderKind::HanoiRenderer {
                pegs,
                disks,
                disk_height,
                unit_width,
                maxval,
            } => Backend::Hanoi(HanoiRenderer {
                pegs,
                disks,
                disk_height,
                unit_width,
                maxval,
            }),
            DecoderKind::External {
                command,
                n_props,
                timeout_secs,
            } => Backend::External(Mutex::new(ExternalClient::spawn(
                command,
                *n_props,
                Duration::from_secs_f64(*timeout_secs),
            )?)),
        };
        let cache = NonZeroUsize::new(config.cache_capacity).map(|c| Mutex::new(LruCache::new(c)));
        Ok(Decoder {
            config,
            backend,
            cache,
            backend_calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn n_props(&self) -> usize {
        self.config.n_props()
    }

    /// Number of decodes that reached the backend (cache misses).
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }

    fn check_width(&self, state: &State) -> Result<(), DecodeError> {
        if state.len() != self.n_props() {
            return Err(DecodeError::Width {
                expected: self.n_props(),
                found: state.len(),
            });
        }
        Ok(())
    }

    pub fn decode(&self, state: &State) -> Result<Arc<Image>, DecodeError> {
        self.check_width(state)?;
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().expect("cache lock").get(state) {
                return Ok(Arc::clone(hit));
            }
        }
        self.backend_calls.fetch_add(1, Ordering::Relaxed);
        let image = Arc::new(match &self.backend {
            Backend::Tile(t) => t.render(state),
            Backend::Hanoi(h) => h.render(state),
            Backend::External(client) => {
                let mut client = client.lock().expect("client lock");
                client
                    .roundtrip(std::slice::from_ref(state))?
                    .pop()
                    .expect("one response per request")
            }
        });
        if let Some(cache) = &self.cache {
            cache.lock().expect("cache lock").put(state.clone(), Arc::clone(&image));
        }
        Ok(image)
    }

    /// Decodes every state of a trace, in order.
    pub fn decode_trace(&self, trace: &[State]) -> Result<Vec<Arc<Image>>, DecodeError> {
        trace
            .iter()
            .enumerate()
            .map(|(step, s)| {
                self.decode(s).map_err(|e| DecodeError::AtStep {
                    step,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// Sends a whole batch to the external process in one pipelined exchange.
    /// Results bypass the cache.
    pub fn external_roundtrip(&self, states: &[State]) -> Result<Vec<Image>, DecodeError> {
        let Backend::External(client) = &self.backend else {
            return Err(DecodeError::Config("not an external decoder".into()));
        };
        for s in states {
            self.check_width(s)?;
        }
        self.backend_calls.fetch_add(states.len() as u64, Ordering::Relaxed);
        client.lock().expect("client lock").roundtrip(states)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub id: u64,
    pub bits: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResponse {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadyLine {
    pub ready: bool,
    pub n_props: usize,
}

/// Either a decoded image or an error record (`{"id": .., "error": ..}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerReply {
    Image(DecodeResponse),
    Error {
        #[serde(default)]
        id: Option<u64>,
        error: String,
    },
}

impl DecodeResponse {
    pub fn encode(id: u64, image: &Image) -> Self {
        let bytes: Vec<u8> = if image.maxval() <= 255 {
            image.pixels().iter().map(|&v| v as u8).collect()
        } else {
            image
                .pixels()
                .iter()
                .flat_map(|&v| (v as u16).to_be_bytes())
                .collect()
        };
        DecodeResponse {
            id,
            width: image.width(),
            height: image.height(),
            maxval: image.maxval(),
            pixels: B64.encode(bytes),
        }
    }

    pub fn to_image(&self) -> Result<Image, DecodeError> {
        let bytes = B64
            .decode(&self.pixels)
            .map_err(|e| DecodeError::Protocol(format!("bad base64 payload: {e}")))?;
        let per_pixel = if self.maxval > 255 { 2 } else { 1 };
        let expected = self.width * self.height * per_pixel;
        if bytes.len() != expected {
            return Err(DecodeError::Protocol(format!(
                "payload has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let pixels = if per_pixel == 1 {
            bytes.into_iter().map(u32::from).collect()
        } else {
            bytes
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                .collect()
        };
        Ok(Image::new(self.width, self.height, self.maxval, pixels)?)
    }
}

struct ExternalClient {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    next_id: u64,
    n_props: usize,
}

impl ExternalClient {
    fn spawn(command: &[String], n_props: usize, timeout: Duration) -> Result<Self, DecodeError> {
        let display = command.join(" ");
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| DecodeError::Spawn {
                command: display.clone(),
                source,
            })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        // Drains stdout continuously so a chatty server never blocks on a full pipe.
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut client = ExternalClient {
            command: display,
            stdin: child.stdin.take(),
            child,
            lines: rx,
            timeout,
            next_id: 0,
            n_props,
        };
        client.handshake()?;
        Ok(client)
    }

    fn next_line(&mut self, waiting_for: u64, deadline: Instant) -> Result<String, DecodeError> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(left) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(DecodeError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(DecodeError::Timeout {
                id: waiting_for,
                seconds: self.timeout.as_secs_f64(),
            }),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self
                    .child
                    .wait()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|e| e.to_string());
                Err(DecodeError::Exited(format!("`{}` closed its output ({status})", self.command)))
            }
        }
    }

    fn handshake(&mut self) -> Result<(), DecodeError> {
        let line = self
            .next_line(0, Instant::now() + self.timeout)
            .map_err(|e| DecodeError::Handshake(e.to_string()))?;
        let ready: ReadyLine = serde_json::from_str(&line)
            .map_err(|e| DecodeError::Handshake(format!("bad ready line `{line}`: {e}")))?;
        if !ready.ready {
            return Err(DecodeError::Handshake("server reported not ready".into()));
        }
        if ready.n_props != self.n_props {
            return Err(DecodeError::Handshake(format!(
                "server decodes {} propositions, task has {}",
                ready.n_props, self.n_props
            )));
        }
        Ok(())
    }

    fn roundtrip(&mut self, states: &[State]) -> Result<Vec<Image>, DecodeError> {
        let first_id = self.next_id;
        self.next_id += states.len() as u64;
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| DecodeError::Exited("decoder input already closed".into()))?;
        let mut batch = String::new();
        for (k, s) in states.iter().enumerate() {
            let req = DecodeRequest {
                id: first_id + k as u64,
                bits: s.to_bit_string(),
            };
            batch.push_str(&serde_json::to_string(&req).expect("request serializes"));
            batch.push('\n');
        }
        if let Err(e) = stdin.write_all(batch.as_bytes()).and_then(|_| stdin.flush()) {
            return Err(DecodeError::Exited(format!("`{}` stopped reading: {e}", self.command)));
        }

        let mut out: Vec<Option<Image>> = vec![None; states.len()];
        let mut pending = states.len();
        while pending > 0 {
            let waiting_for = first_id + out.iter().position(Option::is_none).unwrap_or(0) as u64;
            let line = self.next_line(waiting_for, Instant::now() + self.timeout)?;
            let reply: ServerReply = serde_json::from_str(&line)
                .map_err(|e| DecodeError::Protocol(format!("malformed response `{line}`: {e}")))?;
            let resp = match reply {
                ServerReply::Image(r) => r,
                ServerReply::Error { id, error } => {
                    return Err(DecodeError::Remote {
                        id: id.unwrap_or(waiting_for),
                        message: error,
                    })
                }
            };
            let slot = resp
                .id
                .checked_sub(first_id)
                .map(|k| k as usize)
                .filter(|&k| k < states.len())
                .ok_or_else(|| DecodeError::Protocol(format!("unexpected response id {}", resp.id)))?;
            if out[slot].is_some() {
                return Err(DecodeError::Protocol(format!("duplicate response id {}", resp.id)));
            }
            out[slot] = Some(resp.to_image()?);
            pending -= 1;
        }
        Ok(out.into_iter().map(|im| im.expect("all slots filled")).collect())
    }
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        // Closing stdin asks the server to exit; don't wait on a hung one.
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Serves the wire protocol for a built-in decoder until `input` closes.
/// Malformed requests get an error record and the loop continues.
pub fn serve(decoder: &Decoder, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let ready = ReadyLine {
        ready: true,
        n_props: decoder.n_props(),
    };
    writeln!(output, "{}", serde_json::to_string(&ready).expect("serializes"))?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<DecodeRequest>(&line) {
            Err(e) => ServerReply::Error {
                id: serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64())),
                error: format!("malformed request: {e}"),
            },
            Ok(req) => match State::from_bit_str(&req.bits)
                .ok_or_else(|| DecodeError::Protocol("bits must be '0'/'1'".into()))
                .and_then(|s| decoder.decode(&s))
            {
                Ok(image) => ServerReply::Image(DecodeResponse::encode(req.id, &image)),
                Err(e) => ServerReply::Error {
                    id: Some(req.id),
                    error: e.to_string(),
                },
            },
        };
        writeln!(output, "{}", serde_json::to_string(&reply).expect("serializes"))?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::histogram;
    use crate::strips::BitSet;

    fn tile_decoder(grid: usize, patch: usize) -> Decoder {
        Decoder::new(DecoderConfig::new(DecoderKind::TileCompositor {
            grid,
            patch,
            maxval: 255,
        }))
        .unwrap()
    }

    fn tile_state(grid: usize, cells: &[&[usize]]) -> State {
        let n = grid * grid;
        BitSet::from_indices(
            n * n,
            cells
                .iter()
                .enumerate()
                .flat_map(|(c, ts)| ts.iter().map(move |t| c * n + t)),
        )
    }

    /// Pastes patches cell by cell, independently of the renderer's loop.
    fn paste_oracle(grid: usize, patch: usize, perm: &[usize]) -> Vec<u32> {
        let atlas = tile_atlas(grid, patch, 255);
        let side = grid * patch;
        let mut px = vec![0u32; side * side];
        for y in 0..side {
            for x in 0..side {
                let cell = (y / patch) * grid + x / patch;
                px[y * side + x] = atlas[perm[cell]][(y % patch) * patch + x % patch];
            }
        }
        px
    }

    #[test]
    fn atlas_bands_are_disjoint() {
        let atlas = tile_atlas(3, 6, 255);
        assert!(atlas[0].iter().all(|&v| v == 0));
        for (k, patch) in atlas.iter().enumerate().skip(1) {
            let (lo, hi) = intensity_band(k, 9, 255);
            assert!(patch.iter().all(|&v| lo <= v && v < hi));
            assert_eq!(patch[0], lo + (hi - lo) / 2);
        }
    }

    #[test]
    fn compositor_matches_paste_oracle() {
        let d = tile_decoder(3, 4);
        let perm = [3, 0, 8, 1, 4, 2, 7, 6, 5];
        let cells: Vec<Vec<usize>> = perm.iter().map(|&t| vec![t]).collect();
        let refs: Vec<&[usize]> = cells.iter().map(Vec::as_slice).collect();
        let img = d.decode(&tile_state(3, &refs)).unwrap();
        assert_eq!(img.pixels(), paste_oracle(3, 4, &perm).as_slice());
    }

    #[test]
    fn empty_and_blended_cells() {
        let d = tile_decoder(2, 3);
        let empty = d.decode(&tile_state(2, &[&[], &[], &[], &[]])).unwrap();
        assert!(empty.pixels().iter().all(|&v| v == 0));

        let atlas = tile_atlas(2, 3, 255);
        let img = d.decode(&tile_state(2, &[&[1, 2], &[], &[], &[]])).unwrap();
        for py in 0..3 {
            for px in 0..3 {
                let i = py * 3 + px;
                assert_eq!(img.get(px, py), (atlas[1][i] + atlas[2][i]) / 2);
            }
        }
    }

    #[test]
    fn hanoi_renders_each_disk_once() {
        let cfg = DecoderConfig::new(DecoderKind::HanoiRenderer {
            pegs: 3,
            disks: 2,
            disk_height: 2,
            unit_width: 1,
            maxval: 255,
        });
        let d = Decoder::new(cfg).unwrap();
        // disk1 on peg0, disk2 on peg0 vs. both on peg 2
        let a = d.decode(&BitSet::from_indices(6, [0, 3])).unwrap();
        let b = d.decode(&BitSet::from_indices(6, [2, 5])).unwrap();
        assert_eq!(histogram(&a, 10).unwrap(), histogram(&b, 10).unwrap());
        assert_ne!(a, b);
        // Disk 2 sits on the bottom row, disk 1 directly above it.
        let col_w = 7;
        assert_eq!(a.get(col_w / 2, 5), d_intensity(&d, 2));
        assert_eq!(a.get(col_w / 2, 3), d_intensity(&d, 1));
        // Duplicated disk 1 adds pixels.
        let dup = d.decode(&BitSet::from_indices(6, [0, 1, 3])).unwrap();
        assert_ne!(histogram(&dup, 10).unwrap(), histogram(&a, 10).unwrap());
    }

    fn d_intensity(d: &Decoder, disk: usize) -> u32 {
        match &d.backend {
            Backend::Hanoi(h) => h.disk_intensity(disk),
            _ => unreachable!(),
        }
    }

    #[test]
    fn width_mismatch() {
        let d = tile_decoder(2, 2);
        assert!(matches!(
            d.decode(&BitSet::new(15)),
            Err(DecodeError::Width { expected: 16, found: 15 })
        ));
    }

    #[test]
    fn cache_is_transparent() {
        let mut cfg = DecoderConfig::new(DecoderKind::TileCompositor {
            grid: 2,
            patch: 2,
            maxval: 255,
        });
        cfg.cache_capacity = 1;
        let cached = Decoder::new(cfg.clone()).unwrap();
        cfg.cache_capacity = 0;
        let uncached = Decoder::new(cfg).unwrap();
        let s1 = tile_state(2, &[&[0], &[1], &[2], &[3]]);
        let s2 = tile_state(2, &[&[1], &[0], &[2], &[3]]);
        for s in [&s1, &s1, &s2, &s1] {
            assert_eq!(cached.decode(s).unwrap(), uncached.decode(s).unwrap());
        }
        assert_eq!(uncached.backend_calls(), 4);
        // capacity 1: s1 miss, s1 hit, s2 miss (evicts s1), s1 miss
        assert_eq!(cached.backend_calls(), 3);
    }

    #[test]
    fn trace_decoding() {
        let d = tile_decoder(2, 2);
        assert!(d.decode_trace(&[]).unwrap().is_empty());
        let s = tile_state(2, &[&[0], &[1], &[2], &[3]]);
        let out = d.decode_trace(std::slice::from_ref(&s)).unwrap();
        assert_eq!(*out[0], *d.decode(&s).unwrap());
        let err = d.decode_trace(&[s, BitSet::new(3)]).unwrap_err();
        assert!(matches!(err, DecodeError::AtStep { step: 1, .. }));
    }

    #[test]
    fn response_payload_round_trip() {
        let im = Image::new(2, 1, 1000, vec![256, 7]).unwrap();
        let resp = DecodeResponse::encode(3, &im);
        assert_eq!(B64.decode(&resp.pixels).unwrap(), vec![1, 0, 0, 7]);
        assert_eq!(resp.to_image().unwrap(), im);
        let mut short = resp.clone();
        short.width = 3;
        assert!(short.to_image().is_err());
    }

    #[test]
    fn serve_answers_requests_and_errors() {
        let d = tile_decoder(2, 2);
        let input = "{\"id\":4,\"bits\":\"1000010000100001\"}\nnot json\n{\"id\":5,\"bits\":\"10\"}\n";
        let mut out = Vec::new();
        serve(&d, input.as_bytes(), &mut out).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines.len(), 4);
        let ready: ReadyLine = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(ready, ReadyLine { ready: true, n_props: 16 });
        let ServerReply::Image(r) = serde_json::from_str(lines[1]).unwrap() else {
            panic!("expected image");
        };
        assert_eq!(r.id, 4);
        let s = BitSet::from_bit_str("1000010000100001").unwrap();
        assert_eq!(r.to_image().unwrap(), *d.decode(&s).unwrap());
        assert!(matches!(
            serde_json::from_str(lines[2]).unwrap(),
            ServerReply::Error { id: None, .. }
        ));
        assert!(matches!(
            serde_json::from_str(lines[3]).unwrap(),
            ServerReply::Error { id: Some(5), .. }
        ));
    }

    #[test]
    fn config_validation() {
        let bad = DecoderConfig::new(DecoderKind::External {
            command: vec![],
            n_props: 4,
            timeout_secs: 1.0,
        });
        assert!(Decoder::new(bad).is_err());
        let missing = DecoderConfig::new(DecoderKind::External {
            command: vec!["/nonexistent/decoder".into()],
            n_props: 4,
            timeout_secs: 1.0,
        });
        assert!(matches!(Decoder::new(missing), Err(DecodeError::Spawn { .. })));
    }

    #[test]
    fn config_toml_shape() {
        let cfg = DecoderConfig::new(DecoderKind::TileCompositor {
            grid: 3,
            patch: 6,
            maxval: 255,
        });
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("kind = \"tile_compositor\""), "{text}");
        assert_eq!(toml::from_str::<DecoderConfig>(&text).unwrap(), cfg);
    }
}
