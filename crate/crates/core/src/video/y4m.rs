use std::io::{self, BufRead, Read, Write};

use super::{Frame, FrameRate, StreamMeta, VideoError};

const SIGNATURE: &[u8] = b"YUV4MPEG2";
const MAX_HEADER: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chroma {
    /// 4:2:0 family: two quarter-size chroma planes follow the luma plane.
    Yuv420,
    Mono,
}

/// Sequential reader over a YUV4MPEG2 stream, yielding only the luma plane
/// of each frame.
pub struct Y4mReader<R> {
    reader: R,
    meta: StreamMeta,
    chroma: Chroma,
    offset: usize,
    next_index: u64,
    done: bool,
}

/// Parses the stream header and returns a frame iterator.
pub fn parse_y4m<R: BufRead>(reader: R) -> Result<Y4mReader<R>, VideoError> {
    Y4mReader::new(reader)
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut reader: R) -> Result<Self, VideoError> {
        let line = read_line(&mut reader, 0)?
            .ok_or_else(|| VideoError::parse(0, "empty stream, missing YUV4MPEG2 signature"))?;
        let header_len = line.len() + 1;
        let mut tokens = line.split(|&b| b == b' ').filter(|t| !t.is_empty());
        if tokens.next() != Some(SIGNATURE) {
            return Err(VideoError::parse(0, "missing YUV4MPEG2 signature"));
        }

        let mut width = None;
        let mut height = None;
        let mut frame_rate = FrameRate::DEFAULT;
        let mut chroma = Chroma::Yuv420;
        let mut pos = SIGNATURE.len();
        for token in tokens {
            // `pos` is approximate (tokens may be separated by repeated
            // spaces) but always points into the header line.
            pos += 1;
            let value = std::str::from_utf8(&token[1..])
                .map_err(|_| VideoError::parse(pos, "non-ASCII header token"))?;
            match token[0] {
                b'W' => width = Some(parse_dim(value, pos, "width")?),
                b'H' => height = Some(parse_dim(value, pos, "height")?),
                b'F' => {
                    let (n, d) = value
                        .split_once(':')
                        .ok_or_else(|| VideoError::parse(pos, "frame rate must be num:den"))?;
                    let num = n
                        .parse()
                        .map_err(|_| VideoError::parse(pos, "bad frame rate"))?;
                    let den = d
                        .parse()
                        .map_err(|_| VideoError::parse(pos, "bad frame rate"))?;
                    frame_rate = FrameRate::new(num, den)
                        .map_err(|_| VideoError::parse(pos, "frame rate terms must be positive"))?;
                }
                b'C' => {
                    chroma = match value {
                        "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::Yuv420,
                        "mono" => Chroma::Mono,
                        other => {
                            return Err(VideoError::UnsupportedFormat(format!(
                                "chroma subsampling C{other}"
                            )))
                        }
                    }
                }
                // Interlacing, aspect ratio and extensions do not affect luma.
                b'I' | b'A' | b'X' => {}
                other => {
                    return Err(VideoError::parse(
                        pos,
                        format!("unknown header token {:?}", other as char),
                    ))
                }
            }
            pos += token.len();
        }
        let width = width.ok_or_else(|| VideoError::parse(header_len, "missing W token"))?;
        let height = height.ok_or_else(|| VideoError::parse(header_len, "missing H token"))?;
        Ok(Self {
            reader,
            meta: StreamMeta {
                width,
                height,
                frame_rate,
            },
            chroma,
            offset: header_len,
            next_index: 0,
            done: false,
        })
    }

    pub fn meta(&self) -> StreamMeta {
        self.meta
    }

    fn chroma_len(&self) -> usize {
        match self.chroma {
            Chroma::Mono => 0,
            Chroma::Yuv420 => {
                let cw = (self.meta.width as usize).div_ceil(2);
                let ch = (self.meta.height as usize).div_ceil(2);
                2 * cw * ch
            }
        }
    }

    fn read_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        let start = self.offset;
        let mut tag = [0u8; 5];
        let got = read_up_to(&mut self.reader, &mut tag, start)?;
        if got == 0 {
            return Ok(None);
        }
        if got < tag.len() || &tag != b"FRAME" {
            return Err(VideoError::truncated(start, "expected FRAME delimiter"));
        }
        self.offset += tag.len();
        // Frame parameters, if any, run to the end of the line.
        match read_line(&mut self.reader, self.offset)? {
            Some(params) => self.offset += params.len() + 1,
            None => {
                return Err(VideoError::truncated(
                    self.offset,
                    "FRAME line not terminated",
                ))
            }
        }

        let luma_len = self.meta.width as usize * self.meta.height as usize;
        let mut luma = vec![0u8; luma_len];
        let got = read_up_to(&mut self.reader, &mut luma, self.offset)?;
        if got < luma_len {
            return Err(VideoError::truncated(
                self.offset + got,
                format!("luma plane needs {luma_len} bytes, got {got}"),
            ));
        }
        self.offset += luma_len;

        let chroma_len = self.chroma_len() as u64;
        let skipped = io::copy(&mut (&mut self.reader).take(chroma_len), &mut io::sink())
            .map_err(|e| VideoError::io("<y4m stream>", e))?;
        self.offset += skipped as usize;
        if skipped < chroma_len {
            return Err(VideoError::truncated(
                self.offset,
                "chroma planes cut short",
            ));
        }

        let index = self.next_index;
        self.next_index += 1;
        Frame::new(self.meta.width, self.meta.height, index, luma).map(Some)
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<Frame, VideoError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_frame() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn parse_dim(value: &str, pos: usize, what: &str) -> Result<u32, VideoError> {
    match value.parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(VideoError::parse(pos, format!("invalid {what} {value:?}"))),
    }
}

/// Reads a `\n`-terminated line without the terminator. `None` on immediate
/// EOF; an unterminated or overlong line is an error.
fn read_line<R: BufRead>(reader: &mut R, offset: usize) -> Result<Option<Vec<u8>>, VideoError> {
    let mut line = Vec::new();
    let n = reader
        .take(MAX_HEADER as u64 + 1)
        .read_until(b'\n', &mut line)
        .map_err(|e| VideoError::io("<y4m stream>", e))?;
    if n == 0 {
        return Ok(None);
    }
    if line.last() != Some(&b'\n') {
        return if n > MAX_HEADER {
            Err(VideoError::parse(offset, "header line too long"))
        } else {
            Err(VideoError::truncated(
                offset + n,
                "header line not terminated",
            ))
        };
    }
    line.pop();
    Ok(Some(line))
}

fn read_up_to<R: Read>(reader: &mut R, buf: &mut [u8], offset: usize) -> Result<usize, VideoError> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => {
                return Err(VideoError::io(
                    format!("<y4m stream at byte {}>", offset + filled),
                    e,
                ))
            }
        }
    }
    Ok(filled)
}

/// Writes frames as a monochrome YUV4MPEG2 stream.
pub fn write_y4m<'a, W: Write>(
    mut out: W,
    meta: StreamMeta,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> io::Result<()> {
    writeln!(
        out,
        "YUV4MPEG2 W{} H{} F{} Ip A1:1 Cmono",
        meta.width, meta.height, meta.frame_rate
    )?;
    for frame in frames {
        if frame.width() != meta.width || frame.height() != meta.height {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "frame dimensions differ from stream header",
            ));
        }
        out.write_all(b"FRAME\n")?;
        out.write_all(frame.pixels())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn read_all(bytes: &[u8]) -> Result<(StreamMeta, Vec<Frame>), VideoError> {
        let reader = parse_y4m(bytes)?;
        let meta = reader.meta();
        Ok((meta, reader.collect::<Result<_, _>>()?))
    }

    #[test]
    fn header_tokens() {
        let (meta, frames) = read_all(b"YUV4MPEG2 W352 H288 F25:1 C420\n").unwrap();
        assert_eq!(meta.width, 352);
        assert_eq!(meta.height, 288);
        assert_eq!(meta.frame_rate, FrameRate::new(25, 1).unwrap());
        assert!(frames.is_empty());
    }

    #[test]
    fn mono_two_frames() {
        let mut s = b"YUV4MPEG2 W4 H2 F25:1 Cmono\n".to_vec();
        s.extend(b"FRAME\n");
        s.extend(0u8..8);
        s.extend(b"FRAME\n");
        s.extend(8u8..16);
        let (_, frames) = read_all(&s).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].pixels(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(frames[1].pixels().len(), 8);
        assert_eq!(frames[1].index(), 1);
    }

    #[test]
    fn yuv420_chroma_is_skipped() {
        // 3x3 luma, chroma planes of 2x2 each
        let mut s = b"YUV4MPEG2 W3 H3 F30000:1001 Ip C420jpeg\n".to_vec();
        for v in [10u8, 20] {
            s.extend(b"FRAME\n");
            s.extend([v; 9]);
            s.extend([128u8; 8]);
        }
        let (meta, frames) = read_all(&s).unwrap();
        assert_eq!(meta.frame_rate.den, 1001);
        assert_eq!(frames[1].pixels(), &[20u8; 9]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            read_all(b"YUV4MPEG W4 H2\n"),
            Err(VideoError::Parse { .. })
        ));
        assert!(matches!(
            read_all(b"YUV4MPEG2 W4 H2 C444\n"),
            Err(VideoError::UnsupportedFormat(_))
        ));
        let mut mid_plane = b"YUV4MPEG2 W4 H2 Cmono\nFRAME\n".to_vec();
        mid_plane.extend([1, 2, 3]);
        assert!(matches!(
            read_all(&mid_plane),
            Err(VideoError::TruncatedStream { .. })
        ));
        let mut no_delim = b"YUV4MPEG2 W1 H1 Cmono\nFRAME\n\x05".to_vec();
        no_delim.extend(b"GARBAGE\n");
        assert!(matches!(
            read_all(&no_delim),
            Err(VideoError::TruncatedStream { .. })
        ));
        assert!(matches!(
            read_all(b"YUV4MPEG2 W4 H2 F0:1\n"),
            Err(VideoError::Parse { .. })
        ));
    }

    proptest! {
        #[test]
        fn y4m_round_trip(w in 1u32..12, h in 1u32..12, n in 0usize..4, salt in any::<u8>()) {
            let meta = StreamMeta { width: w, height: h, frame_rate: FrameRate::new(25, 1).unwrap() };
            let frames: Vec<Frame> = (0..n)
                .map(|i| {
                    let px = (0..w * h).map(|p| (p as u8).wrapping_mul(31).wrapping_add(salt ^ i as u8)).collect();
                    Frame::new(w, h, i as u64, px).unwrap()
                })
                .collect();
            let mut buf = Vec::new();
            write_y4m(&mut buf, meta, &frames).unwrap();
            let (m, back) = read_all(&buf).unwrap();
            prop_assert_eq!(m, meta);
            prop_assert_eq!(back, frames);
        }

        #[test]
        fn fuzzed_streams_never_panic(tail in proptest::collection::vec(any::<u8>(), 0..80)) {
            let mut s = b"YUV4MPEG2 W3 H2 Cmono\n".to_vec();
            s.extend(tail);
            if let Ok(reader) = parse_y4m(&s[..]) {
                for f in reader.flatten() {
                    prop_assert_eq!(f.pixels().len(), 6);
                }
            }
        }
    }
}
