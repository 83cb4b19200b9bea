use std::fs;
use std::path::{Path, PathBuf};

use super::{Frame, FrameRate, StreamMeta, VideoError};
use crate::mask::ForegroundMask;

/// Sidecar file holding the frame rate of a PGM sequence, as `num:den`.
pub const FRAME_RATE_FILE: &str = "framerate.txt";

struct Header {
    width: u32,
    height: u32,
    maxval: u32,
    payload_start: usize,
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Skips whitespace and `#` comments, then reads one unsigned decimal.
fn read_header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, VideoError> {
    loop {
        match bytes.get(*pos) {
            Some(&b) if is_space(b) => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => {
                return Err(VideoError::parse(
                    *pos,
                    format!("header ends before {what}"),
                ))
            }
        }
    }
    let start = *pos;
    let mut value: u32 = 0;
    while let Some(&b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u32::from(b - b'0')))
            .ok_or_else(|| VideoError::parse(start, format!("{what} overflows")))?;
        *pos += 1;
    }
    if *pos == start {
        return Err(VideoError::parse(start, format!("expected decimal {what}")));
    }
    Ok(value)
}

fn parse_header(bytes: &[u8]) -> Result<Header, VideoError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(VideoError::parse(0, "missing P5 magic"));
    }
    let mut pos = 2;
    if !bytes.get(pos).copied().is_some_and(is_space) {
        return Err(VideoError::parse(pos, "expected whitespace after magic"));
    }
    let width = read_header_number(bytes, &mut pos, "width")?;
    let height = read_header_number(bytes, &mut pos, "height")?;
    let maxval = read_header_number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(VideoError::parse(
            pos,
            format!("zero dimension {width}x{height}"),
        ));
    }
    if maxval == 0 {
        return Err(VideoError::parse(pos, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(VideoError::UnsupportedDepth(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(pos) {
        Some(&b) if is_space(b) => pos += 1,
        Some(_) => return Err(VideoError::parse(pos, "expected whitespace after maxval")),
        None => return Err(VideoError::truncated(pos, "no raster after header")),
    }
    Ok(Header {
        width,
        height,
        maxval,
        payload_start: pos,
    })
}

/// Decodes one binary PGM image. Bytes past the declared raster are ignored.
pub fn decode_pgm(bytes: &[u8], index: u64) -> Result<Frame, VideoError> {
    let header = parse_header(bytes)?;
    let len = (header.width as usize)
        .checked_mul(header.height as usize)
        .ok_or_else(|| VideoError::parse(0, "dimensions overflow"))?;
    let end = header
        .payload_start
        .checked_add(len)
        .ok_or_else(|| VideoError::parse(0, "dimensions overflow"))?;
    if bytes.len() < end {
        return Err(VideoError::truncated(
            bytes.len(),
            format!(
                "raster needs {len} bytes, {} present",
                bytes.len() - header.payload_start
            ),
        ));
    }
    let raster = &bytes[header.payload_start..end];
    if let Some(pos) = raster.iter().position(|&v| u32::from(v) > header.maxval) {
        return Err(VideoError::parse(
            header.payload_start + pos,
            format!("sample exceeds maxval {}", header.maxval),
        ));
    }
    Frame::new(header.width, header.height, index, raster.to_vec())
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    encode_raw(frame.width(), frame.height(), frame.pixels())
}

/// Foreground pixels become 255, background 0.
pub fn encode_mask_pgm(mask: &ForegroundMask) -> Vec<u8> {
    let raster: Vec<u8> = mask
        .bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    encode_raw(mask.width(), mask.height(), &raster)
}

fn encode_raw(width: u32, height: u32, raster: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(raster);
    out
}

pub fn write_pgm(frame: &Frame, path: impl AsRef<Path>) -> Result<(), VideoError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(|e| VideoError::io(path, e))
}

pub fn write_mask_pgm(mask: &ForegroundMask, path: impl AsRef<Path>) -> Result<(), VideoError> {
    let path = path.as_ref();
    fs::write(path, encode_mask_pgm(mask)).map_err(|e| VideoError::io(path, e))
}

/// Writes the frame-rate sidecar into a sequence directory.
pub fn write_frame_rate(dir: impl AsRef<Path>, rate: FrameRate) -> Result<(), VideoError> {
    let path = dir.as_ref().join(FRAME_RATE_FILE);
    fs::write(&path, format!("{rate}\n")).map_err(|e| VideoError::io(path, e))
}

/// A directory of numbered PGM files (`000.pgm`, `001.pgm`, ...), read in
/// numeric order.
#[derive(Debug)]
pub struct PgmSequence {
    meta: StreamMeta,
    paths: Vec<PathBuf>,
    first: Option<Frame>,
    next: usize,
}

/// Opens a PGM sequence. Dimensions come from the first file, the frame
/// rate from the [`FRAME_RATE_FILE`] sidecar (25:1 when absent).
pub fn load_pgm_sequence(dir: impl AsRef<Path>) -> Result<PgmSequence, VideoError> {
    PgmSequence::open(dir)
}

impl PgmSequence {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, VideoError> {
        let dir = dir.as_ref();
        let mut numbered = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| VideoError::io(dir, e))? {
            let path = entry.map_err(|e| VideoError::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
                continue;
            }
            // Lengths differ only when zero-padding is inconsistent; numeric
            // order then still matches frame order.
            let Ok(number) = stem.parse::<u64>() else {
                continue;
            };
            numbered.push((number, stem.len(), path));
        }
        if numbered.is_empty() {
            return Err(VideoError::NoFrames(dir.to_path_buf()));
        }
        numbered.sort();
        let paths: Vec<PathBuf> = numbered.into_iter().map(|(_, _, p)| p).collect();

        let first = read_pgm_file(&paths[0], 0)?;
        let frame_rate = match fs::read_to_string(dir.join(FRAME_RATE_FILE)) {
            Ok(text) => text.parse()?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => FrameRate::DEFAULT,
            Err(e) => return Err(VideoError::io(dir.join(FRAME_RATE_FILE), e)),
        };
        Ok(Self {
            meta: StreamMeta {
                width: first.width(),
                height: first.height(),
                frame_rate,
            },
            paths,
            first: Some(first),
            next: 0,
        })
    }

    pub fn meta(&self) -> StreamMeta {
        self.meta
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Overrides the sidecar frame rate.
    pub fn set_frame_rate(&mut self, rate: FrameRate) {
        self.meta.frame_rate = rate;
    }
}

fn read_pgm_file(path: &Path, index: u64) -> Result<Frame, VideoError> {
    let bytes = fs::read(path).map_err(|e| VideoError::io(path, e))?;
    decode_pgm(&bytes, index)
}

impl Iterator for PgmSequence {
    type Item = Result<Frame, VideoError>;

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.next;
        let path = self.paths.get(i)?;
        self.next += 1;
        if i == 0 {
            if let Some(first) = self.first.take() {
                return Some(Ok(first));
            }
        }
        let frame = match read_pgm_file(path, i as u64) {
            Ok(f) => f,
            Err(e) => return Some(Err(e)),
        };
        if frame.width() != self.meta.width || frame.height() != self.meta.height {
            return Some(Err(VideoError::InconsistentDimensions {
                index: i as u64,
                expected_w: self.meta.width,
                expected_h: self.meta.height,
                found_w: frame.width(),
                found_h: frame.height(),
            }));
        }
        Some(Ok(frame))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.paths.len() - self.next;
        (rest, Some(rest))
    }
}
