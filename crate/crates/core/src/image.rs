//! Planar RGB frames and the resampling operations used by preprocessing.

use crate::error::{Result, VqaError};

/// A planar (channel, row, column) image with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Image {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Image {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(VqaError::invalid(format!(
                "image buffer has {} samples, expected {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Bilinear resize with half-pixel centres (the usual `align_corners = false`).
    pub fn resize_bilinear(&self, out_h: usize, out_w: usize) -> Image {
        if out_h == self.height && out_w == self.width {
            return self.clone();
        }
        let mut out = Image::new(self.channels, out_h, out_w);
        let sy = self.height as f32 / out_h as f32;
        let sx = self.width as f32 / out_w as f32;
        let xs: Vec<(usize, usize, f32)> = (0..out_w)
            .map(|x| source_coord(x, sx, self.width))
            .collect();
        for y in 0..out_h {
            let (y0, y1, fy) = source_coord(y, sy, self.height);
            for c in 0..self.channels {
                let src = self.plane(c);
                let r0 = &src[y0 * self.width..(y0 + 1) * self.width];
                let r1 = &src[y1 * self.width..(y1 + 1) * self.width];
                let dst = &mut out.data[(c * out_h + y) * out_w..(c * out_h + y + 1) * out_w];
                for (d, &(x0, x1, fx)) in dst.iter_mut().zip(&xs) {
                    let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                    let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
                    *d = top + (bot - top) * fy;
                }
            }
        }
        out
    }

    /// Scale so that the shorter side equals `target`, keeping the aspect ratio.
    pub fn resize_min_side(&self, target: usize) -> Image {
        let (h, w) = min_side_dims(self.height, self.width, target);
        self.resize_bilinear(h, w)
    }

    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Image> {
        if top + h > self.height || left + w > self.width {
            return Err(VqaError::invalid(format!(
                "crop {h}x{w}@({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut out = Image::new(self.channels, h, w);
        for c in 0..self.channels {
            for y in 0..h {
                let src_row = (c * self.height + top + y) * self.width + left;
                let dst_row = (c * h + y) * w;
                out.data[dst_row..dst_row + w].copy_from_slice(&self.data[src_row..src_row + w]);
            }
        }
        Ok(out)
    }

    pub fn center_crop(&self, size: usize) -> Result<Image> {
        if size > self.height || size > self.width {
            return Err(VqaError::invalid(format!(
                "center crop {size} exceeds {}x{}",
                self.height, self.width
            )));
        }
        self.crop((self.height - size) / 2, (self.width - size) / 2, size, size)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }
}

/// Output dimensions `(height, width)` after scaling the shorter side to `target`.
pub fn min_side_dims(height: usize, width: usize, target: usize) -> (usize, usize) {
    if height <= width {
        let w = (width as f64 * target as f64 / height as f64).round() as usize;
        (target, w.max(target))
    } else {
        let h = (height as f64 * target as f64 / width as f64).round() as usize;
        (h.max(target), target)
    }
}

#[inline]
fn source_coord(dst: usize, scale: f32, len: usize) -> (usize, usize, f32) {
    let s = ((dst as f32 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (s.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, s - i0 as f32)
}
