//! Persistent modal bases.
//!
//! A bundle is a short UTF-8 header of `key value` lines closed by a `---` line,
//! followed by little-endian `f64` data: the `M` eigenvalues, then the `N×M`
//! currents in column-major order. Reals are written with Rust's shortest
//! round-trip formatting, so a save/load cycle reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::MeshId;
use crate::kernel::Wavenumber;
use crate::modes::ModalBasis;
use crate::scalar::Float;

pub const BUNDLE_MAGIC: &str = "wirecm-modal-bundle";
pub const BUNDLE_VERSION: u32 = 1;
const DELIMITER: &str = "---\n";

pub fn bundle_to_bytes<T: Float>(basis: &ModalBasis<T>) -> Vec<u8> {
    let (n, m) = (basis.dim(), basis.mode_count());
    let mut out = format!(
        "{BUNDLE_MAGIC}\nversion {BUNDLE_VERSION}\nn {n}\nm {m}\nk {:?}\nmesh {}\nrank_tolerance {:?}\n{DELIMITER}",
        basis.k.k().to_f64_lossy(),
        basis.mesh_id,
        basis.rank_tolerance.to_f64_lossy(),
    )
    .into_bytes();
    out.reserve(8 * (m + n * m));
    for v in basis.eigenvalues.iter().chain(basis.currents.iter()) {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Bundle(msg.into())
}

pub fn bundle_from_bytes<T: Float>(bytes: &[u8]) -> Result<ModalBasis<T>> {
    let split = bytes
        .windows(DELIMITER.len())
        .position(|w| w == DELIMITER.as_bytes())
        .ok_or_else(|| bad("header delimiter not found"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let data = &bytes[split + DELIMITER.len()..];
    let mut lines = header.lines();
    if lines.next() != Some(BUNDLE_MAGIC) {
        return Err(bad("not a modal bundle"));
    }
    let mut field = |key: &str| -> Result<&str> {
        let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
    };
    let version: u32 = field("version")?.parse().map_err(|_| bad("unreadable version"))?;
    if version != BUNDLE_VERSION {
        return Err(bad(format!(
            "unsupported version {version} (this build reads {BUNDLE_VERSION})"
        )));
    }
    let n: usize = field("n")?.parse().map_err(|_| bad("unreadable n"))?;
    let m: usize = field("m")?.parse().map_err(|_| bad("unreadable m"))?;
    let k: f64 = field("k")?.parse().map_err(|_| bad("unreadable k"))?;
    let mesh = MeshId(field("mesh")?.to_owned());
    let tol: f64 = field("rank_tolerance")?
        .parse()
        .map_err(|_| bad("unreadable rank_tolerance"))?;
    if m > n {
        return Err(bad(format!("{m} modes exceed {n} unknowns")));
    }
    let expected = m
        .checked_mul(n + 1)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| bad("size overflow"))?;
    if data.len() != expected {
        return Err(bad(format!("payload has {} bytes, expected {expected}", data.len())));
    }
    let mut vals = data
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))));
    let eigenvalues: Vec<T> = vals.by_ref().take(m).collect();
    let currents = DMatrix::from_iterator(n, m, vals);
    Ok(ModalBasis {
        currents,
        eigenvalues,
        mesh_id: mesh,
        k: Wavenumber::new(T::lit(k))?,
        rank_tolerance: T::lit(tol),
    })
}

/// Writes through a temporary file in the same directory, so an interrupted
/// save never leaves a truncated bundle at `path`.
pub fn save_bundle<T: Float>(basis: &ModalBasis<T>, path: &Path) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bundle_to_bytes(basis))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_bundle<T: Float>(path: &Path) -> Result<ModalBasis<T>> {
    bundle_from_bytes(&fs::read(path)?)
}
