//! Planar 8-bit I420 (YUV 4:2:0) frames and raw stream access.

use std::fs::File;
use std::io::{ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One planar I420 picture of an equirectangular video.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
    chroma_u: Vec<u8>,
    chroma_v: Vec<u8>,
}

impl Frame {
    /// Builds a frame from its three planes, checking plane sizes.
    pub fn new(
        width: usize,
        height: usize,
        luma: Vec<u8>,
        chroma_u: Vec<u8>,
        chroma_v: Vec<u8>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let chroma_len = width * height / 4;
        if luma.len() != width * height {
            return Err(Error::arg(format!(
                "luma plane has {} samples, expected {}",
                luma.len(),
                width * height
            )));
        }
        if chroma_u.len() != chroma_len || chroma_v.len() != chroma_len {
            return Err(Error::arg(format!(
                "chroma planes have {}/{} samples, expected {}",
                chroma_u.len(),
                chroma_v.len(),
                chroma_len
            )));
        }
        Ok(Self {
            width,
            height,
            luma,
            chroma_u,
            chroma_v,
        })
    }

    /// A frame with every sample of each plane set to the given value.
    pub fn filled(width: usize, height: usize, y: u8, u: u8, v: u8) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        Self::new(width, height, vec![y; n], vec![u; n / 4], vec![v; n / 4])
    }

    /// A frame with the given luma plane and neutral (128) chroma.
    pub fn from_luma(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height / 4;
        Self::new(width, height, luma, vec![128; n], vec![128; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    pub fn luma_mut(&mut self) -> &mut [u8] {
        &mut self.luma
    }

    pub fn chroma_u(&self) -> &[u8] {
        &self.chroma_u
    }

    pub fn chroma_v(&self) -> &[u8] {
        &self.chroma_v
    }

    pub fn chroma_width(&self) -> usize {
        self.width / 2
    }

    pub fn chroma_height(&self) -> usize {
        self.height / 2
    }

    /// Writes the frame in I420 order (Y, then U, then V).
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        sink.write_all(&self.luma)?;
        sink.write_all(&self.chroma_u)?;
        sink.write_all(&self.chroma_v)?;
        Ok(())
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
        return Err(Error::arg(format!(
            "frame dimensions must be even and positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Number of bytes one I420 frame of the given size occupies.
pub fn frame_size_bytes(width: usize, height: usize) -> usize {
    width * height * 3 / 2
}

/// Reads the `index`-th frame of a raw I420 stream.
///
/// The stream is positioned at the start of the frame and exactly one frame's
/// worth of bytes is consumed.
pub fn read_yuv_frame<R: Read + Seek>(
    source: &mut R,
    width: usize,
    height: usize,
    index: usize,
) -> Result<Frame> {
    check_dims(width, height)?;
    let frame_bytes = frame_size_bytes(width, height);
    let offset = (index as u64)
        .checked_mul(frame_bytes as u64)
        .ok_or_else(|| Error::arg("frame offset overflows"))?;
    source.seek(SeekFrom::Start(offset))?;

    let mut buf = vec![0u8; frame_bytes];
    if let Err(e) = source.read_exact(&mut buf) {
        return Err(match e.kind() {
            ErrorKind::UnexpectedEof => Error::Decode {
                frame: index,
                reason: format!("stream truncated, frame needs {frame_bytes} bytes"),
            },
            _ => Error::Stream(e),
        });
    }
    let n = width * height;
    let chroma_u = buf[n..n + n / 4].to_vec();
    let chroma_v = buf[n + n / 4..].to_vec();
    buf.truncate(n);
    Frame::new(width, height, buf, chroma_u, chroma_v)
}

/// Random access over a raw I420 file with fixed dimensions.
#[derive(Debug)]
pub struct YuvFile {
    path: PathBuf,
    file: File,
    width: usize,
    height: usize,
    frame_count: usize,
}

impl YuvFile {
    pub fn open(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let frame_count = (len / frame_size_bytes(width, height) as u64) as usize;
        Ok(Self {
            path,
            file,
            width,
            height,
            frame_count,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Complete frames present in the file; a trailing partial frame is ignored.
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn read_frame(&mut self, index: usize) -> Result<Frame> {
        read_yuv_frame(&mut self.file, self.width, self.height, index)
    }
}

/// Random access to the frames of one sequence.
pub trait FrameSource {
    fn frame_count(&self) -> usize;
    fn read_frame(&mut self, index: usize) -> Result<Frame>;
}

impl FrameSource for YuvFile {
    fn frame_count(&self) -> usize {
        self.frame_count
    }

    fn read_frame(&mut self, index: usize) -> Result<Frame> {
        YuvFile::read_frame(self, index)
    }
}

impl FrameSource for Vec<Frame> {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn read_frame(&mut self, index: usize) -> Result<Frame> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::arg(format!("frame {index} out of range ({} frames)", self.len())))
    }
}

/// Writes a sequence of frames as one raw I420 file.
pub fn write_yuv_file(path: impl AsRef<Path>, frames: &[Frame]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut sink = std::io::BufWriter::new(file);
    for frame in frames {
        frame.write_to(&mut sink)?;
    }
    sink.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
