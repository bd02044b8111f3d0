//! Dense grid types shared by every stage of the pipeline, plus bilinear
//! sampling, backward warping and resolution scaling.
//!
//! Coordinates are `(col, row)` everywhere. A flow cell stores `(dx, dy)` =
//! (column displacement, row displacement), so a pixel at `(x, y)` maps to
//! `(x + dx, y + dy)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    /// Frame `i` to frame `i + 1`, defined on frame `i`'s grid.
    #[default]
    Forward,
    /// Frame `i + 1` back to frame `i`, defined on frame `i + 1`'s grid.
    Backward,
}

/// Dense displacement field, row-major, interleaved `(dx, dy)` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<f32>,
    direction: FlowDirection,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize, direction: FlowDirection) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 2],
            direction,
        }
    }

    pub fn constant(width: usize, height: usize, value: [f32; 2], direction: FlowDirection) -> Self {
        Self::from_fn(width, height, direction, |_, _| value)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        direction: FlowDirection,
        f: impl Fn(usize, usize) -> [f32; 2],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 2);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
            direction,
        }
    }

    /// Builds a field from interleaved `(dx, dy)` values, rejecting wrong
    /// lengths and non-finite components.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>, direction: FlowDirection) -> Result<Self> {
        if data.len() != width * height * 2 {
            return Err(Error::Dimension(format!(
                "flow data has {} values, expected {}x{}x2",
                data.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite flow component at cell {} (channel {})",
                i / 2,
                i % 2
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            direction,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn with_direction(mut self, direction: FlowDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        let i = (y * self.width + x) * 2;
        [self.data[i], self.data[i + 1]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f32; 2]) {
        let i = (y * self.width + x) * 2;
        self.data[i] = v[0];
        self.data[i + 1] = v[1];
    }

    /// Extracts one channel (0 = dx, 1 = dy) as `f64`.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(2).map(|&v| v as f64).collect()
    }

    pub(crate) fn set_channel(&mut self, c: usize, values: &[f64]) {
        for (dst, &v) in self.data.iter_mut().skip(c).step_by(2).zip(values) {
            *dst = v as f32;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies cells that are *not* selected by `mask` from `source`.
    pub fn reimpose_known(&mut self, source: &FlowField, mask: &Mask) -> Result<()> {
        check_dims("reimpose source", self.dims(), source.dims())?;
        check_dims("reimpose mask", self.dims(), mask.dims())?;
        for (i, &missing) in mask.bits().iter().enumerate() {
            if !missing {
                self.data[2 * i] = source.data[2 * i];
                self.data[2 * i + 1] = source.data[2 * i + 1];
            }
        }
        Ok(())
    }
}

/// Binary per-pixel grid, `true` = missing. Immutable once built.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask({}x{}, {} set)", self.width, self.height, self.count())
    }
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask has {} cells, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, bits })
    }

    /// Axis-aligned rectangle `[x0, x0 + w) x [y0, y0 + h)`, clipped to the grid.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn not(&self) -> Mask {
        self.map(|b| !b)
    }

    pub fn map(&self, f: impl Fn(bool) -> bool) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| f(b)).collect(),
        }
    }

    fn zip(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        check_dims("mask", self.dims(), other.dims())?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Row-major indices of set cells.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
    index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>, index: usize) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "frame has {} bytes, expected {}x{}x3",
                rgb.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            rgb,
            index,
        })
    }

    pub fn from_fn(width: usize, height: usize, index: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Self {
        let mut rgb = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                rgb.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            rgb,
            index,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn to_float(&self) -> RgbImageF32 {
        RgbImageF32 {
            width: self.width,
            height: self.height,
            data: self.rgb.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// Floating-point RGB working buffer. Warping and blending happen at this
/// precision; [`RgbImageF32::quantize`] converts back to 8 bits once.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImageF32 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl RgbImageF32 {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn quantize(&self, index: usize) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            rgb: self.data.iter().map(|&v| quantize_u8(v)).collect(),
            index,
        }
    }
}

#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Time-ordered frames with one mask per frame and flows between neighbours.
#[derive(Debug, Clone)]
pub struct SequenceBundle {
    frames: Vec<Frame>,
    masks: Vec<Mask>,
    fwd_flows: Vec<FlowField>,
    bwd_flows: Vec<FlowField>,
}

impl SequenceBundle {
    pub fn new(
        frames: Vec<Frame>,
        masks: Vec<Mask>,
        fwd_flows: Vec<FlowField>,
        bwd_flows: Vec<FlowField>,
    ) -> Result<Self> {
        let n = frames.len();
        if n == 0 {
            return Err(Error::Invalid("sequence has no frames".into()));
        }
        if masks.len() != n {
            return Err(Error::Invalid(format!("{} masks for {} frames", masks.len(), n)));
        }
        for (name, flows) in [("forward", &fwd_flows), ("backward", &bwd_flows)] {
            if flows.len() != n - 1 {
                return Err(Error::Invalid(format!(
                    "{} {} flows for {} frames, expected {}",
                    flows.len(),
                    name,
                    n,
                    n - 1
                )));
            }
        }
        let dims = frames[0].dims();
        for f in &frames {
            check_dims(&format!("frame {}", f.index()), dims, f.dims())?;
        }
        for (i, m) in masks.iter().enumerate() {
            check_dims(&format!("mask {i}"), dims, m.dims())?;
        }
        for (i, f) in fwd_flows.iter().enumerate() {
            check_dims(&format!("forward flow {i}"), dims, f.dims())?;
        }
        for (i, f) in bwd_flows.iter().enumerate() {
            check_dims(&format!("backward flow {i}"), dims, f.dims())?;
        }
        let fwd_flows = fwd_flows
            .into_iter()
            .map(|f| f.with_direction(FlowDirection::Forward))
            .collect();
        let bwd_flows = bwd_flows
            .into_iter()
            .map(|f| f.with_direction(FlowDirection::Backward))
            .collect();
        Ok(Self {
            frames,
            masks,
            fwd_flows,
            bwd_flows,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn fwd_flows(&self) -> &[FlowField] {
        &self.fwd_flows
    }

    pub fn bwd_flows(&self) -> &[FlowField] {
        &self.bwd_flows
    }

    /// Mask of the grid a flow is defined on: frame `pair` for forward flows,
    /// frame `pair + 1` for backward flows.
    pub fn flow_mask(&self, pair: usize, direction: FlowDirection) -> &Mask {
        match direction {
            FlowDirection::Forward => &self.masks[pair],
            FlowDirection::Backward => &self.masks[pair + 1],
        }
    }

    pub fn flows(&self, direction: FlowDirection) -> &[FlowField] {
        match direction {
            FlowDirection::Forward => &self.fwd_flows,
            FlowDirection::Backward => &self.bwd_flows,
        }
    }
}

pub(crate) fn check_dims(what: &str, expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {}x{}",
            got.0, got.1, expected.0, expected.1
        )));
    }
    Ok(())
}

/// Positive rational resize factor, e.g. `2/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Scale {
    num: u32,
    den: u32,
}

impl Scale {
    pub const ONE: Scale = Scale { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Config(format!("scale {num}/{den} must be positive")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// `round(dim * scale)` with halves rounded up, at least 1.
    pub fn apply(&self, dim: usize) -> usize {
        let n = dim as u128 * self.num as u128 * 2 + self.den as u128;
        let d = 2 * self.den as u128;
        ((n / d) as usize).max(1)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse scale {s:?}, expected N or N/D"));
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        Scale::new(n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?)
    }
}

impl TryFrom<String> for Scale {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scale> for String {
    fn from(s: Scale) -> String {
        s.to_string()
    }
}

/// Something that can be bilinearly sampled: a grid of `N`-channel cells.
pub trait SampleGrid<const N: usize> {
    fn grid_dims(&self) -> (usize, usize);
    fn cell(&self, x: usize, y: usize) -> [f32; N];
}

impl SampleGrid<2> for FlowField {
    fn grid_dims(&self) -> (usize, usize) {
        self.dims()
    }

    #[inline]
    fn cell(&self, x: usize, y: usize) -> [f32; 2] {
        self.get(x, y)
    }
}

impl SampleGrid<3> for Frame {
    fn grid_dims(&self) -> (usize, usize) {
        self.dims()
    }

    #[inline]
    fn cell(&self, x: usize, y: usize) -> [f32; 3] {
        let p = self.get(x, y);
        [p[0] as f32, p[1] as f32, p[2] as f32]
    }
}

impl SampleGrid<3> for RgbImageF32 {
    fn grid_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    fn cell(&self, x: usize, y: usize) -> [f32; 3] {
        self.get(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const N: usize> {
    pub value: [f32; N],
    pub in_bounds: bool,
}

/// Cells (row-major index) and weights contributing to a bilinear sample.
/// Only cells with nonzero weight are listed, so sampling at an integer
/// coordinate touches exactly one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    cells: [(usize, f32); 4],
    len: usize,
}

impl Support {
    pub fn cells(&self) -> &[(usize, f32)] {
        &self.cells[..self.len]
    }
}

/// Support of a bilinear sample at `(col, row)`, or `None` when any cell it
/// needs lies outside a `width x height` grid.
#[inline]
pub fn bilinear_support(width: usize, height: usize, col: f32, row: f32) -> Option<Support> {
    if !col.is_finite() || !row.is_finite() || col < 0.0 || row < 0.0 {
        return None;
    }
    let x0 = col.floor();
    let y0 = row.floor();
    let fx = col - x0;
    let fy = row - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    if x1 >= width || y1 >= height {
        return None;
    }
    let mut cells = [(0usize, 0f32); 4];
    let mut len = 0;
    let mut push = |x: usize, y: usize, w: f32| {
        cells[len] = (y * width + x, w);
        len += 1;
    };
    push(x0, y0, (1.0 - fx) * (1.0 - fy));
    if fx > 0.0 {
        push(x1, y0, fx * (1.0 - fy));
    }
    if fy > 0.0 {
        push(x0, y1, (1.0 - fx) * fy);
        if fx > 0.0 {
            push(x1, y1, fx * fy);
        }
    }
    Some(Support { cells, len })
}

/// Bilinear interpolation of `grid` at `(col, row)`.
///
/// `in_bounds` is false when any of the (nonzero-weight) neighbouring cells
/// falls outside the grid; the value is then zero and must not be used.
#[inline]
pub fn bilinear_sample<G: SampleGrid<N>, const N: usize>(grid: &G, col: f32, row: f32) -> Sample<N> {
    let (w, h) = grid.grid_dims();
    if !col.is_finite() || !row.is_finite() || col < 0.0 || row < 0.0 {
        return Sample {
            value: [0.0; N],
            in_bounds: false,
        };
    }
    let x0f = col.floor();
    let y0f = row.floor();
    let fx = col - x0f;
    let fy = row - y0f;
    let (x0, y0) = (x0f as usize, y0f as usize);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    if x1 >= w || y1 >= h {
        return Sample {
            value: [0.0; N],
            in_bounds: false,
        };
    }
    // lerp form keeps constants and integer positions exact
    let row_lerp = |y: usize| -> [f32; N] {
        let a = grid.cell(x0, y);
        if fx > 0.0 {
            let b = grid.cell(x1, y);
            std::array::from_fn(|c| a[c] + (b[c] - a[c]) * fx)
        } else {
            a
        }
    };
    let top = row_lerp(y0);
    let value = if fy > 0.0 {
        let bottom = row_lerp(y1);
        std::array::from_fn(|c| top[c] + (bottom[c] - top[c]) * fy)
    } else {
        top
    };
    Sample { value, in_bounds: true }
}

/// Backward warp: output pixel `x` is `src` sampled at `x + flow(x)`.
/// The returned mask is `true` where that sample was in bounds (valid).
pub fn warp_frame(src: &Frame, flow: &FlowField) -> Result<(Frame, Mask)> {
    check_dims("warp flow", src.dims(), flow.dims())?;
    let (w, h) = src.dims();
    let rows = par::map_range(h, |y| {
        let mut rgb = Vec::with_capacity(w * 3);
        let mut valid = Vec::with_capacity(w);
        for x in 0..w {
            let [dx, dy] = flow.get(x, y);
            let s = bilinear_sample::<_, 3>(src, x as f32 + dx, y as f32 + dy);
            rgb.extend(s.value.iter().map(|&v| quantize_u8(v)));
            valid.push(s.in_bounds);
        }
        (rgb, valid)
    });
    let mut rgb = Vec::with_capacity(w * h * 3);
    let mut valid = Vec::with_capacity(w * h);
    for (r, v) in rows {
        rgb.extend(r);
        valid.extend(v);
    }
    Ok((Frame::new(w, h, rgb, src.index())?, Mask::from_bits(w, h, valid)?))
}

/// Resizes a flow by `scale`: target size `round(dim * scale)`, bilinear
/// spatial resampling, displacements converted to the new pixel units.
pub fn resize_flow(flow: &FlowField, scale: Scale) -> FlowField {
    if scale.is_one() {
        return flow.clone();
    }
    resize_flow_to(flow, scale.apply(flow.width()), scale.apply(flow.height()))
}

/// Resizes a flow to an explicit size. Displacements are multiplied by the
/// per-axis size ratio (`new_w / w` for dx, `new_h / h` for dy).
pub fn resize_flow_to(flow: &FlowField, width: usize, height: usize) -> FlowField {
    let (sw, sh) = flow.dims();
    if (sw, sh) == (width, height) {
        return flow.clone();
    }
    let rx = sw as f64 / width as f64;
    let ry = sh as f64 / height as f64;
    let kx = (width as f64 / sw as f64) as f32;
    let ky = (height as f64 / sh as f64) as f32;
    let mut data = vec![0f32; width * height * 2];
    par::for_each_row(&mut data, width * 2, |y, row| {
        let sy = (((y as f64 + 0.5) * ry - 0.5).clamp(0.0, (sh - 1) as f64)) as f32;
        for x in 0..width {
            let sx = (((x as f64 + 0.5) * rx - 0.5).clamp(0.0, (sw - 1) as f64)) as f32;
            let s = bilinear_sample::<_, 2>(flow, sx, sy);
            debug_assert!(s.in_bounds);
            row[2 * x] = s.value[0] * kx;
            row[2 * x + 1] = s.value[1] * ky;
        }
    });
    FlowField {
        width,
        height,
        data,
        direction: flow.direction,
    }
}

/// Nearest-neighbour mask resize to `round(dim * scale)`.
pub fn resize_mask(mask: &Mask, scale: Scale) -> Mask {
    if scale.is_one() {
        return mask.clone();
    }
    resize_mask_to(mask, scale.apply(mask.width()), scale.apply(mask.height()))
}

pub fn resize_mask_to(mask: &Mask, width: usize, height: usize) -> Mask {
    let (sw, sh) = mask.dims();
    if (sw, sh) == (width, height) {
        return mask.clone();
    }
    // nearest source cell of a destination cell centre, in integer arithmetic
    let nearest = |d: usize, src: usize, dst: usize| ((2 * d + 1) * src / (2 * dst)).min(src - 1);
    Mask::from_fn(width, height, |x, y| {
        mask.get(nearest(x, sw, width), nearest(y, sh, height))
    })
}
