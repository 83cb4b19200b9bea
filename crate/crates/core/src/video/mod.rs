//! Raw grayscale frame streams: binary PGM sequences and YUV4MPEG2.
//!
//! Only luma is ever kept. Both readers are sequential iterators that yield
//! `Result<Frame, VideoError>`; a reader never reads past the payload length
//! its header declares.

mod pgm;
mod y4m;

use std::fmt;
use std::path::PathBuf;

pub use pgm::{
    decode_pgm, encode_mask_pgm, encode_pgm, load_pgm_sequence, write_frame_rate, write_mask_pgm,
    write_pgm, PgmSequence, FRAME_RATE_FILE,
};
pub use y4m::{parse_y4m, write_y4m, Y4mReader};

#[derive(Debug, thiserror::Error)]
pub enum VideoError {
    #[error("no frames found in {0}")]
    NoFrames(PathBuf),
    #[error("frame {index} is {found_w}x{found_h}, stream is {expected_w}x{expected_h}")]
    InconsistentDimensions {
        index: u64,
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },
    #[error("unsupported sample depth: maxval {0} (at most 255)")]
    UnsupportedDepth(u32),
    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("truncated stream at byte {offset}: {reason}")]
    TruncatedStream { offset: usize, reason: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl VideoError {
    pub(crate) fn parse(offset: usize, reason: impl Into<String>) -> Self {
        VideoError::Parse {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn truncated(offset: usize, reason: impl Into<String>) -> Self {
        VideoError::TruncatedStream {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VideoError::Io {
            path: path.into(),
            source,
        }
    }
}

/// One 8-bit luma frame, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    index: u64,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, index: u64, pixels: Vec<u8>) -> Result<Self, VideoError> {
        if width == 0 || height == 0 {
            return Err(VideoError::InvalidFrame(format!(
                "zero dimension {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(VideoError::InvalidFrame(format!(
                "{width}x{height} frame needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            index,
            pixels,
        })
    }

    /// A frame with every pixel set to `value`.
    pub fn filled(width: u32, height: u32, index: u64, value: u8) -> Result<Self, VideoError> {
        Self::new(
            width,
            height,
            index,
            vec![value; width as usize * height as usize],
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("index", &self.index)
            .finish_non_exhaustive()
    }
}

/// Frame rate as a rational, e.g. `30000:1001`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub const DEFAULT: FrameRate = FrameRate { num: 25, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, VideoError> {
        if num == 0 || den == 0 {
            return Err(VideoError::parse(
                0,
                format!("invalid frame rate {num}:{den}"),
            ));
        }
        Ok(Self { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.num, self.den)
    }
}

impl std::str::FromStr for FrameRate {
    type Err = VideoError;

    /// Accepts `num:den`, `num/den` or a bare integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || VideoError::parse(0, format!("invalid frame rate {s:?}"));
        let (num, den) = match s.split_once([':', '/']) {
            Some((n, d)) => (n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?),
            None => (s.parse().map_err(|_| bad())?, 1),
        };
        FrameRate::new(num, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamMeta {
    pub width: u32,
    pub height: u32,
    pub frame_rate: FrameRate,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_bad_buffers() {
        assert!(Frame::new(0, 4, 0, vec![]).is_err());
        assert!(Frame::new(2, 2, 0, vec![0; 3]).is_err());
        assert!(Frame::new(2, 2, 0, vec![0; 4]).is_ok());
    }

    #[test]
    fn frame_rate_parsing() {
        assert_eq!(
            "25:1".parse::<FrameRate>().unwrap(),
            FrameRate::new(25, 1).unwrap()
        );
        assert_eq!("30000/1001".parse::<FrameRate>().unwrap().den, 1001);
        assert_eq!(
            "30".parse::<FrameRate>().unwrap(),
            FrameRate::new(30, 1).unwrap()
        );
        assert!("0:1".parse::<FrameRate>().is_err());
        assert!("abc".parse::<FrameRate>().is_err());
    }
}
