//! Bit files for external test suites.
//!
//! `ascii`: one `0`/`1` character per bit, no separators.
//! `packed`: eight bits per byte, first bit in the most significant position,
//! last byte zero-padded. A sidecar `<file>.meta` records `n_bits` and `pad`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bits::{BitStream, StreamLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitFormat {
    Ascii,
    Packed,
}

impl BitFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ascii" => Some(BitFormat::Ascii),
            "packed" => Some(BitFormat::Packed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BitFormat::Ascii => "ascii",
            BitFormat::Packed => "packed",
        }
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn to_packed_bytes(bits: &BitStream) -> (Vec<u8>, usize) {
    let n = bits.len();
    let mut out = Vec::with_capacity(n.div_ceil(8));
    for (i, w) in bits.words().iter().enumerate() {
        let bytes_here = (n - 64 * i).min(64).div_ceil(8);
        // bits are LSB-first in a word; reversing each byte's bits puts the
        // first bit in the most significant position
        out.extend(w.to_le_bytes().iter().take(bytes_here).map(|b| b.reverse_bits()));
    }
    (out, (8 - n % 8) % 8)
}

pub fn from_packed_bytes(bytes: &[u8], n_bits: usize, label: StreamLabel) -> Result<BitStream> {
    if n_bits > bytes.len() * 8 || bytes.len() != n_bits.div_ceil(8) {
        return Err(Error::InsufficientData(format!(
            "{} packed bytes cannot hold exactly {n_bits} bits",
            bytes.len()
        )));
    }
    let words = bytes
        .chunks(8)
        .map(|c| {
            let mut buf = [0u8; 8];
            for (d, s) in buf.iter_mut().zip(c) {
                *d = s.reverse_bits();
            }
            u64::from_le_bytes(buf)
        })
        .collect();
    Ok(BitStream::from_words(label, words, n_bits))
}

pub fn export_bits(bits: &BitStream, format: BitFormat, path: &Path) -> Result<()> {
    match format {
        BitFormat::Ascii => {
            let text: Vec<u8> = bits.iter().map(|b| if b { b'1' } else { b'0' }).collect();
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        BitFormat::Packed => {
            let (bytes, pad) = to_packed_bytes(bits);
            fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
            let meta = meta_path(path);
            let text = format!("n_bits = {}\npad = {pad}\n", bits.len());
            fs::write(&meta, text).map_err(|e| Error::io(meta, e))
        }
    }
}

/// Reads a bit file. ASCII files may contain whitespace between bits. A
/// packed file without a sidecar is read as whole bytes.
pub fn import_bits(path: &Path, format: BitFormat) -> Result<BitStream> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        BitFormat::Ascii => {
            let mut s = BitStream::with_capacity(StreamLabel::Raw, data.len());
            for (i, &c) in data.iter().enumerate() {
                match c {
                    b'0' => s.push(false),
                    b'1' => s.push(true),
                    c if c.is_ascii_whitespace() => {}
                    _ => {
                        return Err(Error::InsufficientData(format!(
                            "{}: byte {i} is not '0' or '1'",
                            path.display()
                        )))
                    }
                }
            }
            Ok(s)
        }
        BitFormat::Packed => {
            let meta = meta_path(path);
            let n_bits = match fs::read_to_string(&meta) {
                Ok(text) => parse_meta(&text).map_err(|reason| Error::config(meta.display().to_string(), reason))?,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => data.len() * 8,
                Err(e) => return Err(Error::io(meta, e)),
            };
            from_packed_bytes(&data, n_bits, StreamLabel::Raw)
        }
    }
}

fn parse_meta(text: &str) -> std::result::Result<usize, String> {
    let mut n_bits = None;
    let mut pad = None;
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let v = v.trim();
        match k.trim() {
            "n_bits" => n_bits = Some(v.parse::<usize>().map_err(|e| format!("n_bits: {e}"))?),
            "pad" => pad = Some(v.parse::<usize>().map_err(|e| format!("pad: {e}"))?),
            _ => {}
        }
    }
    let n = n_bits.ok_or("missing n_bits")?;
    if let Some(p) = pad {
        if p != (8 - n % 8) % 8 {
            return Err(format!("pad {p} inconsistent with n_bits {n}"));
        }
    }
    Ok(n)
}
