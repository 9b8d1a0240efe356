//! Deterministic drawing of colored graphs into RGB rasters.
//!
//! Layout uses floating point once; positions are then quantized to 1/256
//! pixel and everything downstream is integer arithmetic, so identical
//! inputs give byte-identical images.

mod layout;
mod raster;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{layout_tree, min_pairwise_distance, Layout};
pub use raster::rasterize;

use crate::graph::ColoredGraph;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot lay out an empty graph")]
    EmptyGraph,
    #[error("layout has {0} positions for {1} nodes")]
    LayoutMismatch(usize, usize),
    #[error("{kind} palette has {have} entries, graph needs {need}")]
    PaletteTooSmall {
        kind: &'static str,
        have: usize,
        need: usize,
    },
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Png(#[from] png::EncodingError),
    #[error(transparent)]
    PngDecode(#[from] png::DecodingError),
    #[error("unsupported PNG layout {0:?}")]
    PngLayout(png::ColorType),
}

pub type Rgb = [u8; 3];

/// Nine node colors, pairwise RGB distance at least 100.
pub const NODE_PALETTE: [Rgb; 9] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [255, 225, 25],
    [145, 30, 180],
    [70, 240, 240],
    [245, 120, 30],
    [240, 50, 230],
    [128, 128, 128],
];

/// Nine edge colors, pairwise RGB distance at least 100.
pub const EDGE_PALETTE: [Rgb; 9] = [
    [0, 0, 0],
    [0, 90, 255],
    [220, 0, 0],
    [0, 160, 0],
    [150, 90, 0],
    [170, 0, 170],
    [0, 170, 170],
    [120, 120, 255],
    [255, 120, 0],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Square image side in pixels.
    pub size: usize,
    pub node_radius: usize,
    pub line_width: usize,
    /// Minimum pairwise node distance, as a fraction of the image side.
    pub min_distance: f64,
    pub margin: f64,
    pub jitter: f64,
    pub layout_retries: usize,
    pub node_palette: Vec<Rgb>,
    pub edge_palette: Vec<Rgb>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            size: 64,
            node_radius: 3,
            line_width: 2,
            min_distance: 0.08,
            margin: 0.1,
            jitter: 0.02,
            layout_retries: 50,
            node_palette: NODE_PALETTE.to_vec(),
            edge_palette: EDGE_PALETTE.to_vec(),
        }
    }
}

impl RenderConfig {
    pub fn check_palettes(&self, node_colors: usize, edge_colors: usize) -> Result<(), RenderError> {
        if self.node_palette.len() < node_colors {
            return Err(RenderError::PaletteTooSmall {
                kind: "node",
                have: self.node_palette.len(),
                need: node_colors,
            });
        }
        if self.edge_palette.len() < edge_colors {
            return Err(RenderError::PaletteTooSmall {
                kind: "edge",
                have: self.edge_palette.len(),
                need: edge_colors,
            });
        }
        Ok(())
    }
}

/// Lays out and rasterizes `g` in one call.
pub fn render(g: &ColoredGraph, cfg: &RenderConfig, seed: u64) -> Result<RasterImage, RenderError> {
    let layout = layout_tree(g, cfg, seed)?;
    rasterize(g, &layout, cfg)
}

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RasterImage({}x{})", self.width, self.height)
    }
}

impl RasterImage {
    pub fn white(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width * height * 3],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width * height * 3).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub(crate) fn put(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Binary PPM: `P6\n<w> <h>\n255\n` followed by raw RGB bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Reads the exact layout written by [`RasterImage::to_ppm`].
    pub fn from_ppm(bytes: &[u8]) -> Result<Self, RenderError> {
        let bad = |m: &str| RenderError::Ppm(m.to_string());
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n' || b == b' ')
                .ok_or_else(|| bad("truncated header"))?;
            fields.push(std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header"))?);
            pos += end + 1;
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("expected P6 with maxval 255"));
        }
        let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
        Self::from_pixels(w, h, bytes[pos..].to_vec()).ok_or_else(|| bad("pixel payload size"))
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), RenderError> {
        std::fs::write(path, self.to_ppm())?;
        Ok(())
    }

    pub fn write_png(&self, path: &Path) -> Result<(), RenderError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut enc = png::Encoder::new(file, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.pixels)?;
        writer.finish()?;
        Ok(())
    }

    /// Decodes an 8-bit PNG; alpha is dropped and gray is widened to RGB.
    pub fn from_png(bytes: &[u8]) -> Result<Self, RenderError> {
        let mut dec = png::Decoder::new(std::io::Cursor::new(bytes));
        dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = dec.read_info()?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf)?;
        let channels = match info.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            other => return Err(RenderError::PngLayout(other)),
        };
        let (w, h) = (info.width as usize, info.height as usize);
        let mut pixels = Vec::with_capacity(w * h * 3);
        for px in buf[..info.buffer_size()].chunks(channels) {
            match channels {
                1 | 2 => pixels.extend_from_slice(&[px[0]; 3]),
                _ => pixels.extend_from_slice(&px[..3]),
            }
        }
        Ok(Self::from_pixels(w, h, pixels).expect("payload matches dimensions"))
    }

    /// Reads a PNG or binary PPM file, told apart by their signatures.
    pub fn read(path: &Path) -> Result<Self, RenderError> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"\x89PNG") {
            Self::from_png(&bytes)
        } else {
            Self::from_ppm(&bytes)
        }
    }

    /// Writes the image to any sink in PPM form.
    pub fn write_ppm_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_ppm())
    }
}
