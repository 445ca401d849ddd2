use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

fn encode(path: &Path, width: usize, height: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.set_compression(png::Compression::Fast);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::Encode(format!("png header for {}: {e}", path.display())))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::Encode(format!("png data for {}: {e}", path.display())))?;
    writer
        .finish()
        .map_err(|e| Error::Encode(format!("png finish for {}: {e}", path.display())))
}

/// 8-bit PNG with 1 (gray) or 3 (RGB) interleaved channels.
pub fn write_png_8bit(path: &Path, width: usize, height: usize, channels: usize, data: &[u8]) -> Result<()> {
    let color = match channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        n => return Err(Error::Encode(format!("unsupported channel count {n}"))),
    };
    encode(path, width, height, color, png::BitDepth::Eight, data)
}

/// 1-bit grayscale PNG from a row-major boolean grid.
pub fn write_png_1bit(path: &Path, width: usize, height: usize, bits: impl Fn(usize, usize) -> bool) -> Result<()> {
    let stride = width.div_ceil(8);
    let mut data = vec![0u8; stride * height];
    for row in 0..height {
        for col in 0..width {
            if bits(col, row) {
                data[row * stride + col / 8] |= 0x80 >> (col % 8);
            }
        }
    }
    encode(path, width, height, png::ColorType::Grayscale, png::BitDepth::One, &data)
}

/// Decodes an 8-bit PNG into `(width, height, channels, data)`.
pub fn read_png_8bit(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Encode(format!("png decode {}: {e}", path.display())))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Encode(format!("png decode {}: {e}", path.display())))?;
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, info.color_type.samples(), buf))
}
