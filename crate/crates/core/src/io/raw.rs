use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImageGrid, ImageStack};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackHeader {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub pixel_size_nm: f64,
}

pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

/// Raw bytes and sidecar text of a stack.
pub fn encode_stack(stack: &ImageStack) -> Result<(Vec<u8>, String)> {
    let mut bytes = Vec::with_capacity(4 * stack.grid.len() * stack.len());
    for (f, frame) in stack.frames.iter().enumerate() {
        encode_frame(frame, f + 1, &mut bytes)?;
    }
    Ok((bytes, sidecar_text(&stack.grid, stack.len())))
}

fn sidecar_text(grid: &ImageGrid, frames: usize) -> String {
    let header = StackHeader {
        width: grid.width,
        height: grid.height,
        frames,
        pixel_size_nm: grid.pixel_size,
    };
    let mut json = serde_json::to_string(&header).expect("header serialises");
    json.push('\n');
    json
}

fn encode_frame(frame: &Image, number: usize, out: &mut Vec<u8>) -> Result<()> {
    for (i, v) in frame.values().iter().enumerate() {
        let s = *v as f32;
        if !s.is_finite() {
            return Err(Error::invalid(format!(
                "frame {number} pixel {i}: {v} is not representable as a finite f32"
            )));
        }
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(())
}

/// Appends frames to a raw stack one at a time; the sidecar is written by
/// [`StackWriter::finish`].
pub struct StackWriter {
    path: PathBuf,
    grid: ImageGrid,
    frames: usize,
    out: BufWriter<File>,
    buf: Vec<u8>,
}

impl StackWriter {
    pub fn create(path: impl AsRef<Path>, grid: ImageGrid) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            grid,
            frames: 0,
            out: BufWriter::new(file),
            buf: Vec::with_capacity(4 * grid.len()),
        })
    }

    pub fn push(&mut self, frame: &Image) -> Result<()> {
        self.grid.check_same(frame.grid(), "stack frame")?;
        self.buf.clear();
        encode_frame(frame, self.frames + 1, &mut self.buf)?;
        self.out
            .write_all(&self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        self.frames += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        let side = sidecar_path(&self.path);
        fs::write(&side, sidecar_text(&self.grid, self.frames)).map_err(|e| Error::io(&side, e))?;
        Ok(self.frames)
    }
}

pub fn decode_stack(bytes: &[u8], sidecar: &str, path: &Path) -> Result<ImageStack> {
    let header: StackHeader = serde_json::from_str(sidecar)
        .map_err(|e| Error::format(sidecar_path(path), format!("malformed sidecar: {e}")))?;
    let grid = ImageGrid::new(header.width, header.height, header.pixel_size_nm)
        .map_err(|e| Error::format(sidecar_path(path), e.to_string()))?;
    let expected = 4 * grid.len() * header.frames;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "length mismatch: expected {expected} bytes for {} frames of {}x{}, found {}",
                header.frames,
                header.width,
                header.height,
                bytes.len()
            ),
        ));
    }
    let mut frames = Vec::with_capacity(header.frames);
    for (f, chunk) in bytes.chunks_exact(4 * grid.len().max(1)).enumerate() {
        let mut values = Vec::with_capacity(grid.len());
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if !v.is_finite() {
                return Err(Error::format(
                    path,
                    format!("frame {} pixel {i} holds non-finite value {v}", f + 1),
                ));
            }
            values.push(v as f64);
        }
        frames.push(Image::from_vec_unchecked(grid, values));
    }
    ImageStack::new(grid, frames)
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<ImageStack> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let sidecar = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_stack(&bytes, &sidecar, path)
}

pub fn write_stack(path: impl AsRef<Path>, stack: &ImageStack) -> Result<()> {
    let path = path.as_ref();
    let (bytes, json) = encode_stack(stack)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}
