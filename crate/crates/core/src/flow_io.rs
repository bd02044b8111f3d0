//! Readers and writers for Middlebury `.flo` flows, PNG frames and masks, and
//! the JSON sequence manifest. Layouts are documented in `docs/formats.md`.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FlowDirection, FlowField, Frame, Mask, SequenceBundle};
use crate::maskgen::MaskGenConfig;

/// Magic float at the start of every `.flo` file ("PIEH" in ASCII).
pub const FLO_MAGIC: f32 = 202021.25;
const FLO_HEADER_LEN: usize = 12;

/// Upper bounds on header-declared sizes, checked before any allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadLimits {
    pub max_width: usize,
    pub max_height: usize,
}

impl Default for ReadLimits {
    fn default() -> Self {
        Self {
            max_width: 16384,
            max_height: 16384,
        }
    }
}

impl ReadLimits {
    fn check(&self, width: usize, height: usize, offset: usize) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::format(offset, format!("degenerate size {width}x{height}")));
        }
        if width > self.max_width || height > self.max_height {
            return Err(Error::format(
                offset,
                format!(
                    "size {width}x{height} exceeds limit {}x{}",
                    self.max_width, self.max_height
                ),
            ));
        }
        Ok(())
    }
}

pub fn read_flo(bytes: &[u8]) -> Result<FlowField> {
    read_flo_with_limits(bytes, ReadLimits::default())
}

pub fn read_flo_with_limits(bytes: &[u8], limits: ReadLimits) -> Result<FlowField> {
    if bytes.len() < FLO_HEADER_LEN {
        return Err(Error::format(
            bytes.len(),
            format!("truncated header: {} of {FLO_HEADER_LEN} bytes", bytes.len()),
        ));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic}, expected {FLO_MAGIC}")));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::format(4, format!("degenerate size {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    limits.check(width, height, 4)?;
    let expected = FLO_HEADER_LEN + width * height * 8;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(
            expected,
            format!("{} trailing bytes after payload", bytes.len() - expected),
        ));
    }
    let payload = &bytes[FLO_HEADER_LEN..];
    let mut data = Vec::with_capacity(width * height * 2);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::format(FLO_HEADER_LEN + 4 * k, "non-finite flow component"));
        }
        data.push(v);
    }
    FlowField::from_vec(width, height, data, FlowDirection::Forward)
}

pub fn write_flo(flow: &FlowField) -> Result<Vec<u8>> {
    if let Some(i) = flow.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite flow component at cell {}", i / 2)));
    }
    let mut out = Vec::with_capacity(FLO_HEADER_LEN + flow.data().len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for v in flow.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode_png(bytes: &[u8], limits: ReadLimits) -> Result<DynamicImage> {
    let mut reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let mut lim = image::Limits::default();
    lim.max_image_width = Some(limits.max_width as u32);
    lim.max_image_height = Some(limits.max_height as u32);
    reader.limits(lim);
    Ok(reader.decode()?)
}

/// Decodes an 8-bit RGB (or grey, replicated) PNG.
pub fn read_frame_png(bytes: &[u8], index: usize) -> Result<Frame> {
    let img = decode_png(bytes, ReadLimits::default())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageRgb8(buf) => Frame::new(w, h, buf.into_raw(), index),
        DynamicImage::ImageLuma8(buf) => {
            let rgb = buf.into_raw().into_iter().flat_map(|v| [v, v, v]).collect();
            Frame::new(w, h, rgb, index)
        }
        other => Err(Error::format(
            0,
            format!(
                "unsupported frame pixel type {:?}, expected 8-bit RGB or grey",
                other.color()
            ),
        )),
    }
}

pub fn write_frame_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        frame.rgb(),
        frame.width() as u32,
        frame.height() as u32,
        ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

/// Decodes a single-channel 8-bit PNG mask; nonzero means missing.
pub fn read_mask_png(bytes: &[u8]) -> Result<Mask> {
    let img = decode_png(bytes, ReadLimits::default())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Mask::from_bits(w, h, buf.into_raw().into_iter().map(|v| v != 0).collect()),
        other => Err(Error::format(
            0,
            format!("unsupported mask pixel type {:?}, expected 8-bit grey", other.color()),
        )),
    }
}

/// Encodes a mask as 8-bit grey, 255 = missing, 0 = known.
pub fn write_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    let pixels: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        &pixels,
        mask.width() as u32,
        mask.height() as u32,
        ExtendedColorType::L8,
    )?;
    Ok(out)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_flo_file(path: &Path) -> Result<FlowField> {
    read_flo(&read_file(path)?).map_err(|e| e.in_file(path))
}

pub fn read_frame_file(path: &Path, index: usize) -> Result<Frame> {
    read_frame_png(&read_file(path)?, index).map_err(|e| e.in_file(path))
}

pub fn read_mask_file(path: &Path) -> Result<Mask> {
    read_mask_png(&read_file(path)?).map_err(|e| e.in_file(path))
}

/// JSON list of the files making up one sequence. Relative paths are resolved
/// against the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub width: usize,
    pub height: usize,
    pub frame_paths: Vec<PathBuf>,
    #[serde(default)]
    pub mask_paths: Vec<PathBuf>,
    #[serde(default)]
    pub fwd_flow_paths: Vec<PathBuf>,
    #[serde(default)]
    pub bwd_flow_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_frame_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_fwd_flow_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_bwd_flow_paths: Vec<PathBuf>,
    /// Generator parameters, recorded when the masks were synthesized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maskgen: Option<MaskGenConfig>,
}

impl SequenceManifest {
    pub fn new(width: usize, height: usize, frame_paths: Vec<PathBuf>) -> Self {
        Self {
            name: None,
            width,
            height,
            frame_paths,
            mask_paths: Vec::new(),
            fwd_flow_paths: Vec::new(),
            bwd_flow_paths: Vec::new(),
            gt_frame_paths: Vec::new(),
            gt_fwd_flow_paths: Vec::new(),
            gt_bwd_flow_paths: Vec::new(),
            maskgen: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Reads a manifest file, returning it with its base directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::format(e.utf8_error().valid_up_to(), "manifest is not UTF-8").in_file(path))?;
        let manifest = Self::from_json(&text).map_err(|e| e.in_file(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    /// Checks list lengths against the sequence invariants without touching
    /// the filesystem.
    pub fn validate(&self) -> Result<()> {
        let n = self.frame_paths.len();
        if n == 0 {
            return Err(Error::Invalid("manifest lists no frames".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invalid(format!(
                "manifest declares degenerate size {}x{}",
                self.width, self.height
            )));
        }
        let lists = [
            ("mask_paths", self.mask_paths.len(), n),
            ("fwd_flow_paths", self.fwd_flow_paths.len(), n - 1),
            ("bwd_flow_paths", self.bwd_flow_paths.len(), n - 1),
        ];
        for (name, got, want) in lists {
            if got != want {
                return Err(Error::Invalid(format!(
                    "{name} has {got} entries, expected {want} for {n} frames"
                )));
            }
        }
        let optional = [
            ("gt_frame_paths", self.gt_frame_paths.len(), n),
            ("gt_fwd_flow_paths", self.gt_fwd_flow_paths.len(), n - 1),
            ("gt_bwd_flow_paths", self.gt_bwd_flow_paths.len(), n - 1),
        ];
        for (name, got, want) in optional {
            if got != 0 && got != want {
                return Err(Error::Invalid(format!(
                    "{name} has {got} entries, expected 0 or {want}"
                )));
            }
        }
        if self.gt_fwd_flow_paths.is_empty() != self.gt_bwd_flow_paths.is_empty() {
            return Err(Error::Invalid(
                "ground-truth flows must list both directions or neither".into(),
            ));
        }
        Ok(())
    }

    fn check_size(&self, path: &Path, dims: (usize, usize)) -> Result<()> {
        if dims != (self.width, self.height) {
            return Err(Error::Dimension(format!(
                "is {}x{}, manifest declares {}x{}",
                dims.0, dims.1, self.width, self.height
            ))
            .in_file(path));
        }
        Ok(())
    }

    pub fn load_frames(&self, base: &Path, paths: &[PathBuf]) -> Result<Vec<Frame>> {
        paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let path = base.join(p);
                let frame = read_frame_file(&path, i)?;
                self.check_size(&path, frame.dims())?;
                Ok(frame)
            })
            .collect()
    }

    pub fn load_masks(&self, base: &Path) -> Result<Vec<Mask>> {
        self.mask_paths
            .iter()
            .map(|p| {
                let path = base.join(p);
                let mask = read_mask_file(&path)?;
                self.check_size(&path, mask.dims())?;
                Ok(mask)
            })
            .collect()
    }

    pub fn load_flows(&self, base: &Path, paths: &[PathBuf], direction: FlowDirection) -> Result<Vec<FlowField>> {
        paths
            .iter()
            .map(|p| {
                let path = base.join(p);
                let flow = read_flo_file(&path)?;
                self.check_size(&path, flow.dims())?;
                Ok(flow.with_direction(direction))
            })
            .collect()
    }

    /// Ground-truth flows `(forward, backward)` when the manifest lists them.
    pub fn load_gt_flows(&self, base: &Path) -> Result<Option<(Vec<FlowField>, Vec<FlowField>)>> {
        if self.gt_fwd_flow_paths.is_empty() {
            return Ok(None);
        }
        Ok(Some((
            self.load_flows(base, &self.gt_fwd_flow_paths, FlowDirection::Forward)?,
            self.load_flows(base, &self.gt_bwd_flow_paths, FlowDirection::Backward)?,
        )))
    }

    pub fn load_gt_frames(&self, base: &Path) -> Result<Option<Vec<Frame>>> {
        if self.gt_frame_paths.is_empty() {
            return Ok(None);
        }
        self.load_frames(base, &self.gt_frame_paths).map(Some)
    }
}

/// Reads and validates every file a manifest names.
pub fn load_sequence(manifest: &SequenceManifest, base: &Path) -> Result<SequenceBundle> {
    manifest.validate()?;
    let frames = manifest.load_frames(base, &manifest.frame_paths)?;
    let masks = manifest.load_masks(base)?;
    let fwd = manifest.load_flows(base, &manifest.fwd_flow_paths, FlowDirection::Forward)?;
    let bwd = manifest.load_flows(base, &manifest.bwd_flow_paths, FlowDirection::Backward)?;
    SequenceBundle::new(frames, masks, fwd, bwd)
}
