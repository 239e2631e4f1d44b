//! Interleaved 8-bit RGB image and the binary mask produced by the
//! thresholding pipeline, plus the per-pixel drawing helpers used by
//! the renderer tests and synthetic-scene generation.

/// Observation frame width in pixels.
pub const FRAME_WIDTH: usize = 400;
/// Observation frame height in pixels.
pub const FRAME_HEIGHT: usize = 300;

/// Centre of the observation frame, the reference point for reward shaping.
pub const FRAME_CENTER: (f64, f64) = (FRAME_WIDTH as f64 / 2.0, FRAME_HEIGHT as f64 / 2.0);

pub type Rgb = [u8; 3];

/// 8-bit RGB image stored interleaved, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut img = Self::new(width, height);
        img.fill(color);
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        (data.len() == width * height * 3).then_some(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    #[inline]
    pub fn channel(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn fill(&mut self, color: Rgb) {
        for px in self.data.chunks_exact_mut(3) {
            px.copy_from_slice(&color);
        }
    }

    /// Filled disc via a point-in-disc test per pixel (no anti-aliasing).
    /// A pixel (x, y) is painted iff (x - cx)^2 + (y - cy)^2 <= r^2.
    pub fn draw_disc(&mut self, cx: f64, cy: f64, radius: f64, color: Rgb) {
        let x0 = ((cx - radius).floor().max(0.0)) as usize;
        let x1 = ((cx + radius).ceil().min(self.width as f64 - 1.0)) as usize;
        let y0 = ((cy - radius).floor().max(0.0)) as usize;
        let y1 = ((cy + radius).ceil().min(self.height as f64 - 1.0)) as usize;
        if (cx + radius) < 0.0 || (cy + radius) < 0.0 {
            return;
        }
        let r2 = radius * radius;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r2 {
                    self.set(x, y, color);
                }
            }
        }
    }

    /// Axis-aligned filled rectangle, clipped to the image.
    pub fn draw_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb) {
        let xa = x0.max(0) as usize;
        let ya = y0.max(0) as usize;
        let xb = x1.min(self.width as i64 - 1);
        let yb = y1.min(self.height as i64 - 1);
        if xb < xa as i64 || yb < ya as i64 {
            return;
        }
        for y in ya..=yb as usize {
            for x in xa..=xb as usize {
                self.set(x, y, color);
            }
        }
    }

    /// Multiply every channel by `scale` (clamped to [0, 1]) with rounding,
    /// the same transform the renderer applies for scene lighting.
    pub fn scaled_brightness(&self, scale: f64) -> Image {
        let scale = scale.clamp(0.0, 1.0);
        let data = self
            .data
            .iter()
            .map(|&v| (v as f64 * scale).round() as u8)
            .collect();
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// One bit per pixel, same dimensions as the image it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True iff every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(&a, &b)| !a || b)
    }
}
