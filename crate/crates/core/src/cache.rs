//! Binary eigenbasis cache.
//!
//! Layout, all little-endian:
//!
//! | field | size |
//! |---|---|
//! | magic `DQEIGEN\0` | 8 |
//! | format version (u32) | 4 |
//! | model fingerprint, hex ASCII | 64 |
//! | number of factors `k` (u32), then `k` factor dims (u64) | 4 + 8k |
//! | `n`, steady index (u64 each) | 16 |
//! | spectral radius (f64) | 8 |
//! | eigenvalues, `(re, im)` pairs | 16n |
//! | right vectors `V`, column-major pairs | 16n^2 |
//! | left vectors `W`, column-major pairs | 16n^2 |
//! | CRC-32 of everything above (u32) | 4 |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;

use crate::error::{Error, Result};
use crate::liouvillian::{assemble, diagonalize, LiouvillianSpectrum};
use crate::models::ModelSpec;
use crate::operator::HilbertSpace;
use crate::C64;

pub const MAGIC: &[u8; 8] = b"DQEIGEN\0";
pub const VERSION: u32 = 1;
pub const CACHE_DIR_ENV: &str = "DQCHAOS_CACHE_DIR";
const FINGERPRINT_LEN: usize = 64;

/// Explicit directory, else `$DQCHAOS_CACHE_DIR`, else `.dqchaos-cache`.
pub fn cache_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".dqchaos-cache"))
}

pub fn cache_path(dir: &Path, model: &ModelSpec) -> PathBuf {
    dir.join(format!("{}.dqeig", model.fingerprint()))
}

struct CrcWriter<W: Write> {
    inner: W,
    crc: crc32fast::Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.crc.update(bytes);
        self.inner.write_all(bytes)
    }

    fn put_c64(&mut self, z: C64) -> std::io::Result<()> {
        self.put(&z.re.to_le_bytes())?;
        self.put(&z.im.to_le_bytes())
    }
}

struct CrcReader<R: Read> {
    inner: R,
    crc: crc32fast::Hasher,
}

impl<R: Read> CrcReader<R> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| Error::Cache(format!("truncated file: {e}")))?;
        self.crc.update(&b);
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn c64(&mut self) -> Result<C64> {
        let b: [u8; 16] = self.take()?;
        let re = f64::from_le_bytes(b[..8].try_into().unwrap());
        let im = f64::from_le_bytes(b[8..].try_into().unwrap());
        Ok(C64::new(re, im))
    }
}

/// Writes through a temporary file and renames, so readers never see a
/// partial cache.
pub fn save(path: &Path, spectrum: &LiouvillianSpectrum, fingerprint: &str) -> Result<()> {
    if fingerprint.len() != FINGERPRINT_LEN || !fingerprint.is_ascii() {
        return Err(Error::Cache(format!("fingerprint must be {FINGERPRINT_LEN} ASCII bytes")));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("dqeig.tmp");
    {
        let mut w = CrcWriter {
            inner: BufWriter::new(File::create(&tmp)?),
            crc: crc32fast::Hasher::new(),
        };
        w.put(MAGIC)?;
        w.put(&VERSION.to_le_bytes())?;
        w.put(fingerprint.as_bytes())?;
        let dims = spectrum.space().factor_dims();
        w.put(&(dims.len() as u32).to_le_bytes())?;
        for &d in dims {
            w.put(&(d as u64).to_le_bytes())?;
        }
        let n = spectrum.dim();
        w.put(&(n as u64).to_le_bytes())?;
        w.put(&(spectrum.steady_index() as u64).to_le_bytes())?;
        w.put(&spectrum.spectral_radius().to_le_bytes())?;
        for &z in spectrum.eigenvalues() {
            w.put_c64(z)?;
        }
        for m in [spectrum.right_vectors(), spectrum.left_vectors()] {
            for j in 0..n {
                for i in 0..n {
                    w.put_c64(m[(i, j)])?;
                }
            }
        }
        let crc = w.crc.finalize();
        w.inner.write_all(&crc.to_le_bytes())?;
        w.inner.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a cache file, checking magic, version, fingerprint and checksum.
pub fn load(path: &Path, fingerprint: &str) -> Result<LiouvillianSpectrum> {
    read(path, Some(fingerprint)).map(|(s, _)| s)
}

/// Reads a cache file for an unknown model; returns the stored fingerprint.
pub fn load_any(path: &Path) -> Result<(LiouvillianSpectrum, String)> {
    read(path, None)
}

fn read(path: &Path, fingerprint: Option<&str>) -> Result<(LiouvillianSpectrum, String)> {
    let mut r = CrcReader {
        inner: BufReader::new(File::open(path)?),
        crc: crc32fast::Hasher::new(),
    };
    if &r.take::<8>()? != MAGIC {
        return Err(Error::Cache("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let fp: [u8; FINGERPRINT_LEN] = r.take()?;
    if fingerprint.is_some_and(|f| fp != f.as_bytes()) {
        return Err(Error::Cache("fingerprint does not match the model".into()));
    }
    let fp = String::from_utf8(fp.to_vec()).map_err(|_| Error::Cache("fingerprint is not ASCII".into()))?;
    let k = r.u32()? as usize;
    if k == 0 || k > 64 {
        return Err(Error::Cache(format!("implausible factor count {k}")));
    }
    let dims = (0..k).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let space = HilbertSpace::new(dims).map_err(|e| Error::Cache(e.to_string()))?;
    let n = r.u64()? as usize;
    if n != space.dim() * space.dim() {
        return Err(Error::Cache(format!("stored size {n} inconsistent with the space")));
    }
    let steady = r.u64()? as usize;
    if steady >= n {
        return Err(Error::Cache("steady index out of range".into()));
    }
    let radius = r.f64()?;
    let eigenvalues = (0..n).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
    let mut mats = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut m = Mat::<C64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] = r.c64()?;
            }
        }
        mats.push(m);
    }
    let expect = r.crc.clone().finalize();
    let mut tail = [0u8; 4];
    r.inner
        .read_exact(&mut tail)
        .map_err(|e| Error::Cache(format!("missing checksum: {e}")))?;
    if u32::from_le_bytes(tail) != expect {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    let left = mats.pop().unwrap();
    let right = mats.pop().unwrap();
    Ok((
        LiouvillianSpectrum::from_parts(space, eigenvalues, right, left, steady, radius),
        fp,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
    /// A cache file existed but was unreadable and has been replaced.
    Recomputed,
}

/// Loads the eigenbasis of `model` from `dir`, or diagonalizes and stores it.
pub fn load_or_compute(model: &ModelSpec, dir: &Path, force: bool) -> Result<(LiouvillianSpectrum, CacheOutcome)> {
    let fp = model.fingerprint();
    let path = cache_path(dir, model);
    let mut outcome = CacheOutcome::Miss;
    if path.exists() {
        match load(&path, &fp) {
            Ok(s) => {
                log::info!("eigenbasis cache hit: {}", path.display());
                return Ok((s, CacheOutcome::Hit));
            }
            Err(e) => {
                log::warn!("ignoring unreadable cache {}: {e}; recomputing", path.display());
                outcome = CacheOutcome::Recomputed;
            }
        }
    }
    let spec = diagonalize(assemble(model)?, force)?;
    if let Err(e) = save(&path, &spec, &fp) {
        log::warn!("could not write cache {}: {e}", path.display());
    }
    Ok((spec, outcome))
}
