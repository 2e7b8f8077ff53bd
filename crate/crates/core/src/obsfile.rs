//! Binary observation files.
//!
//! Layout, all little-endian: the magic `BPOB`, `u32` port count, `u32` bin
//! count, `f64` noise variance, then `ports * bins` complex samples as
//! `(re, im)` pairs of `f64`, bin-major (all ports of bin 0 first).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::channel_model::Observation;
use crate::{CMatrix, Complex64, Error, Result};

pub const MAGIC: [u8; 4] = *b"BPOB";
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8;

pub fn encoded_len(ports: usize, bins: usize) -> usize {
    HEADER_LEN + ports * bins * 16
}

pub fn encode(obs: &Observation) -> Result<Vec<u8>> {
    let y = obs.data();
    let (ports, bins) = y.shape();
    let dims = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::Format(format!("{what} count {n} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(encoded_len(ports, bins));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&dims(ports, "port")?.to_le_bytes());
    out.extend_from_slice(&dims(bins, "bin")?.to_le_bytes());
    out.extend_from_slice(&obs.noise_variance().to_le_bytes());
    // nalgebra storage is column-major, which is exactly bin-major here.
    for z in y.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

fn f64_at(bytes: &[u8], offset: usize) -> f64 {
    f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("eight bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<Observation> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file has {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected `BPOB`".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("four bytes")) as usize;
    let (ports, bins) = (u32_at(4), u32_at(8));
    let noise_variance = f64_at(bytes, 12);
    let expected = ports
        .checked_mul(bins)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("declared dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "header declares {ports} ports x {bins} bins ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    if ports == 0 || bins == 0 {
        return Err(Error::Format("zero ports or bins".into()));
    }
    let samples = (0..ports * bins).map(|i| {
        let o = HEADER_LEN + 16 * i;
        Complex64::new(f64_at(bytes, o), f64_at(bytes, o + 8))
    });
    let y = CMatrix::from_iterator(ports, bins, samples);
    Observation::new(y, noise_variance).map_err(|e| Error::Format(e.to_string()))
}

/// Writes `contents` through a temporary file in the same directory followed
/// by a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("not a file path")))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(contents)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write(path: &Path, obs: &Observation) -> Result<()> {
    write_atomic(path, &encode(obs)?)
}

pub fn read(path: &Path) -> Result<Observation> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
