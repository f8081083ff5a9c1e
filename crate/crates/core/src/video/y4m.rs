//! YUV4MPEG2 (`.y4m`) container: uncompressed 8-bit planar YUV.
//!
//! Writing always uses 4:4:4 full-range BT.601 so that generated content
//! survives a round trip within one code value. Reading accepts 4:4:4,
//! the 4:2:0 variants (chroma upsampled by replication) and mono.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Mutex;

use crate::error::{Result, VqaError};
use crate::image::Image;
use crate::sampling::VideoMeta;

use super::VideoSource;

const MAGIC: &str = "YUV4MPEG2";
const FRAME_TAG: &[u8] = b"FRAME";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Chroma {
    C444,
    C420,
    Mono,
}

impl Chroma {
    fn frame_bytes(self, w: usize, h: usize) -> usize {
        match self {
            Chroma::C444 => 3 * w * h,
            Chroma::C420 => w * h + 2 * w.div_ceil(2) * h.div_ceil(2),
            Chroma::Mono => w * h,
        }
    }
}

pub struct Y4mReader {
    meta: VideoMeta,
    chroma: Chroma,
    offsets: Vec<u64>,
    file: Mutex<File>,
}

impl Y4mReader {
    pub fn open(path: &Path) -> Result<Self> {
        let uri = path.display().to_string();
        let file = File::open(path).map_err(|e| VqaError::io(path, e))?;
        let file_len = file.metadata().map_err(|e| VqaError::io(path, e))?.len();
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| VqaError::io(path, e))?;
        let bad = |reason: String| VqaError::Decode {
            uri: uri.clone(),
            frame: 0,
            reason,
        };
        let mut tokens = header.trim_end().split(' ');
        if tokens.next() != Some(MAGIC) {
            return Err(bad("missing YUV4MPEG2 signature".into()));
        }
        let (mut width, mut height, mut rate, mut chroma) = (0usize, 0usize, None, Chroma::C420);
        for tok in tokens {
            let (key, val) = tok.split_at(1.min(tok.len()));
            match key {
                "W" => width = val.parse().map_err(|_| bad(format!("bad width {val}")))?,
                "H" => height = val.parse().map_err(|_| bad(format!("bad height {val}")))?,
                "F" => {
                    let (n, d) = val
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad frame rate {val}")))?;
                    let n: f64 = n.parse().map_err(|_| bad(format!("bad frame rate {val}")))?;
                    let d: f64 = d.parse().map_err(|_| bad(format!("bad frame rate {val}")))?;
                    rate = Some(n / d);
                }
                "C" => {
                    chroma = match val {
                        "444" => Chroma::C444,
                        "mono" => Chroma::Mono,
                        v if v.starts_with("420") => Chroma::C420,
                        other => return Err(bad(format!("unsupported colorspace C{other}"))),
                    }
                }
                _ => {}
            }
        }
        let rate = rate.ok_or_else(|| bad("header lacks frame rate".into()))?;
        if width == 0 || height == 0 {
            return Err(bad("header lacks frame size".into()));
        }
        let payload = chroma.frame_bytes(width, height) as u64;

        let mut offsets = Vec::new();
        let mut pos = header.len() as u64;
        let mut line = Vec::new();
        while pos < file_len {
            reader
                .seek(SeekFrom::Start(pos))
                .map_err(|e| VqaError::io(path, e))?;
            line.clear();
            let n = reader
                .read_until(b'\n', &mut line)
                .map_err(|e| VqaError::io(path, e))?;
            if !line.starts_with(FRAME_TAG) {
                return Err(VqaError::Decode {
                    uri: uri.clone(),
                    frame: offsets.len(),
                    reason: "missing FRAME marker".into(),
                });
            }
            let data_start = pos + n as u64;
            if data_start + payload > file_len {
                return Err(VqaError::Decode {
                    uri: uri.clone(),
                    frame: offsets.len(),
                    reason: "truncated frame".into(),
                });
            }
            offsets.push(data_start);
            pos = data_start + payload;
        }

        let meta = VideoMeta::new(uri, offsets.len(), rate, width, height)?;
        Ok(Y4mReader {
            meta,
            chroma,
            offsets,
            file: Mutex::new(reader.into_inner()),
        })
    }
}

impl VideoSource for Y4mReader {
    fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    fn read_frame(&self, index: usize) -> Result<Image> {
        let decode_err = |reason: String| VqaError::Decode {
            uri: self.meta.uri.clone(),
            frame: index,
            reason,
        };
        let offset = *self
            .offsets
            .get(index)
            .ok_or_else(|| decode_err("frame index out of range".into()))?;
        let (w, h) = (self.meta.width, self.meta.height);
        let mut buf = vec![0u8; self.chroma.frame_bytes(w, h)];
        {
            let mut f = self.file.lock().expect("y4m file lock poisoned");
            f.seek(SeekFrom::Start(offset))
                .and_then(|_| f.read_exact(&mut buf))
                .map_err(|e| decode_err(e.to_string()))?;
        }
        let n = w * h;
        let luma = &buf[..n];
        let mut img = Image::new(3, h, w);
        match self.chroma {
            Chroma::Mono => {
                for c in 0..3 {
                    for (d, &y) in img.plane_mut(c).iter_mut().zip(luma) {
                        *d = y as f32 / 255.0;
                    }
                }
            }
            Chroma::C444 => {
                let (cb, cr) = buf[n..].split_at(n);
                for i in 0..n {
                    let rgb = yuv_to_rgb(luma[i], cb[i], cr[i]);
                    for (c, v) in rgb.into_iter().enumerate() {
                        img.data[c * n + i] = v;
                    }
                }
            }
            Chroma::C420 => {
                let cw = w.div_ceil(2);
                let cn = cw * h.div_ceil(2);
                let (cb, cr) = buf[n..].split_at(cn);
                for y in 0..h {
                    for x in 0..w {
                        let ci = (y / 2) * cw + x / 2;
                        let i = y * w + x;
                        let rgb = yuv_to_rgb(luma[i], cb[ci], cr[ci]);
                        for (c, v) in rgb.into_iter().enumerate() {
                            img.data[c * n + i] = v;
                        }
                    }
                }
            }
        }
        Ok(img)
    }
}

fn yuv_to_rgb(y: u8, cb: u8, cr: u8) -> [f32; 3] {
    let y = y as f32;
    let cb = cb as f32 - 128.0;
    let cr = cr as f32 - 128.0;
    let r = y + 1.402 * cr;
    let g = y - 0.344_136 * cb - 0.714_136 * cr;
    let b = y + 1.772 * cb;
    [r, g, b].map(|v| (v / 255.0).clamp(0.0, 1.0))
}

fn rgb_to_yuv(r: f32, g: f32, b: f32) -> [u8; 3] {
    let (r, g, b) = (r * 255.0, g * 255.0, b * 255.0);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    [y, cb, cr].map(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// Write RGB frames as a 4:4:4 `.y4m` file. `frame_rate` is stored as a
/// rational with denominator 1000.
pub fn write_y4m(path: &Path, frames: &[Image], frame_rate: f64) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| VqaError::invalid("cannot write a video with no frames"))?;
    let (w, h) = (first.width, first.height);
    let file = File::create(path).map_err(|e| VqaError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let rate_num = (frame_rate * 1000.0).round() as u64;
    let io = |e| VqaError::io(path, e);
    writeln!(out, "{MAGIC} W{w} H{h} F{rate_num}:1000 Ip A1:1 C444").map_err(io)?;
    let n = w * h;
    let mut planes = vec![0u8; 3 * n];
    for frame in frames {
        if frame.width != w || frame.height != h || frame.channels != 3 {
            return Err(VqaError::invalid("all frames must be 3-channel and equally sized"));
        }
        for i in 0..n {
            let yuv = rgb_to_yuv(frame.data[i], frame.data[n + i], frame.data[2 * n + i]);
            planes[i] = yuv[0];
            planes[n + i] = yuv[1];
            planes[2 * n + i] = yuv[2];
        }
        out.write_all(b"FRAME\n").map_err(io)?;
        out.write_all(&planes).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_frame(w: usize, h: usize, t: usize) -> Image {
        let mut img = Image::new(3, h, w);
        for y in 0..h {
            for x in 0..w {
                img.set(0, y, x, x as f32 / w as f32);
                img.set(1, y, x, y as f32 / h as f32);
                img.set(2, y, x, (t % 5) as f32 / 5.0);
            }
        }
        img
    }

    #[test]
    fn round_trip_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        let frames: Vec<_> = (0..4).map(|t| gradient_frame(9, 7, t)).collect();
        write_y4m(&path, &frames, 25.0).unwrap();
        let reader = Y4mReader::open(&path).unwrap();
        assert_eq!(reader.meta().frame_count, 4);
        assert_eq!((reader.meta().width, reader.meta().height), (9, 7));
        assert!((reader.meta().frame_rate - 25.0).abs() < 1e-9);
        for t in [3, 0, 2] {
            let back = reader.read_frame(t).unwrap();
            let err = back
                .data
                .iter()
                .zip(&frames[t].data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(err < 3.0 / 255.0, "frame {t} error {err}");
        }
    }

    #[test]
    fn out_of_range_names_frame() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        write_y4m(&path, &[gradient_frame(4, 4, 0)], 30.0).unwrap();
        let reader = Y4mReader::open(&path).unwrap();
        match reader.read_frame(5) {
            Err(VqaError::Decode { frame, .. }) => assert_eq!(frame, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_y4m() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.y4m");
        std::fs::write(&path, b"RIFF....").unwrap();
        assert!(Y4mReader::open(&path).is_err());
    }
}
