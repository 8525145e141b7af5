//! Flat-shaded airplane drawings so people can play the game on the same
//! objects the models see as feature vectors.

use image::{Rgb, RgbImage};

use super::world::SynthObject;
use crate::error::{Error, Result};

pub const MIN_SIZE_PX: u32 = 64;
const ENGINE_COLOR: Rgb<u8> = Rgb([50, 50, 50]);

fn lookup<'a>(o: &'a SynthObject, slot: &str) -> Result<&'a str> {
    o.value(slot).ok_or_else(|| Error::UnknownSlotValue {
        slot: slot.to_string(),
        value: String::new(),
    })
}

fn unknown(slot: &str, value: &str) -> Error {
    Error::UnknownSlotValue {
        slot: slot.to_string(),
        value: value.to_string(),
    }
}

pub fn body_color(value: &str) -> Option<Rgb<u8>> {
    Some(Rgb(match value {
        "red" => [220, 40, 40],
        "blue" => [40, 80, 220],
        "green" => [40, 170, 60],
        "white" => [245, 245, 245],
        "yellow" => [240, 220, 40],
        _ => return None,
    }))
}

fn background_color(value: &str) -> Option<Rgb<u8>> {
    Some(Rgb(match value {
        "sky" => [135, 206, 235],
        "grass" => [76, 153, 0],
        "concrete" => [160, 160, 160],
        _ => return None,
    }))
}

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn fill(&mut self, color: Rgb<u8>, inside: impl Fn(f64, f64) -> bool) {
        let (w, h) = self.img.dimensions();
        for y in 0..h {
            for x in 0..w {
                if inside(x as f64 + 0.5, y as f64 + 0.5) {
                    self.img.put_pixel(x, y, color);
                }
            }
        }
    }

    fn rect(&mut self, color: Rgb<u8>, x0: f64, y0: f64, x1: f64, y1: f64) {
        self.fill(color, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1);
    }

    fn triangle(&mut self, color: Rgb<u8>, p: [(f64, f64); 3]) {
        let edge = |a: (f64, f64), b: (f64, f64), x: f64, y: f64| {
            (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
        };
        self.fill(color, |x, y| {
            let d0 = edge(p[0], p[1], x, y);
            let d1 = edge(p[1], p[2], x, y);
            let d2 = edge(p[2], p[0], x, y);
            (d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0 && d2 <= 0.0)
        });
    }

    fn disc(&mut self, color: Rgb<u8>, cx: f64, cy: f64, r: f64, right_half_only: bool) {
        self.fill(color, |x, y| {
            (x - cx).powi(2) + (y - cy).powi(2) <= r * r && (!right_half_only || x >= cx)
        });
    }
}

/// Draws the object. Slots map to: background colour, body colour (fuselage,
/// nose and tail fin), size (fuselage length), nose shape (triangle or
/// half-disc), engine count (discs under the fuselage), tail fin up or down.
pub fn render_image(o: &SynthObject, size_px: u32) -> Result<RgbImage> {
    if size_px < MIN_SIZE_PX {
        return Err(Error::ConfigError(format!(
            "image size {size_px} below {MIN_SIZE_PX}"
        )));
    }
    let bg = lookup(o, "background")?;
    let bg = background_color(bg).ok_or_else(|| unknown("background", bg))?;
    let body = lookup(o, "body_color")?;
    let body = body_color(body).ok_or_else(|| unknown("body_color", body))?;
    let scale = match lookup(o, "size")? {
        "small" => 0.45,
        "medium" => 0.6,
        "large" => 0.75,
        v => return Err(unknown("size", v)),
    };
    let nose = lookup(o, "nose")?;
    if nose != "pointy" && nose != "round" {
        return Err(unknown("nose", nose));
    }
    let engines = match lookup(o, "engines")? {
        "one" => 1,
        "two" => 2,
        "four" => 4,
        v => return Err(unknown("engines", v)),
    };
    let tail_up = match lookup(o, "tail")? {
        "high" => true,
        "low" => false,
        v => return Err(unknown("tail", v)),
    };

    let s = size_px as f64;
    let mut c = Canvas {
        img: RgbImage::from_pixel(size_px, size_px, bg),
    };
    let (cx, cy) = (0.47 * s, 0.5 * s);
    let len = scale * s;
    let hh = 0.16 * len;
    let (x0, x1) = (cx - len / 2.0, cx + len / 2.0);
    let (top, bottom) = (cy - hh / 2.0, cy + hh / 2.0);

    c.rect(body, x0, top, x1, bottom);
    if nose == "pointy" {
        c.triangle(body, [(x1, top), (x1, bottom), (x1 + 1.3 * hh, cy)]);
    } else {
        c.disc(body, x1, cy, hh / 2.0, true);
    }
    let fin = 1.4 * hh;
    if tail_up {
        c.triangle(body, [(x0, top), (x0 + 1.2 * hh, top), (x0, top - fin)]);
    } else {
        c.triangle(body, [(x0, bottom), (x0 + 1.2 * hh, bottom), (x0, bottom + fin)]);
    }
    let r = 0.22 * hh;
    let span = 0.5 * len;
    for k in 0..engines {
        let ex = if engines == 1 {
            cx
        } else {
            cx - span / 2.0 + span * k as f64 / (engines - 1) as f64
        };
        c.disc(ENGINE_COLOR, ex, bottom + 1.3 * r, r, false);
    }
    Ok(c.img)
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}
