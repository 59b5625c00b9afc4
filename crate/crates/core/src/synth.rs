//! Procedural aligned face-like images.
//!
//! Every identity shares one canonical layout (head, hair, eyes, brows, nose,
//! mouth) with per-identity jitter of positions, sizes, tones and lighting,
//! so patch position carries meaning while no two faces coincide.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::ImageBuffer;

/// Soft membership of a point in an axis-aligned ellipse; edges ramp over
/// roughly one pixel.
fn ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let r = (((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2)).sqrt();
    let d = (r - 1.0) * rx.min(ry);
    0.5 - 0.5 * (d / 0.8).tanh()
}

fn lerp(base: f64, layer: f64, alpha: f64) -> f64 {
    base + (layer - base) * alpha
}

#[derive(Debug, Clone)]
struct FaceParams {
    cx: f64,
    cy: f64,
    head_rx: f64,
    head_ry: f64,
    background: f64,
    bg_slope: f64,
    skin: f64,
    light: f64,
    hair: f64,
    hairline: f64,
    eye_dx: f64,
    eye_dy: f64,
    eye_rx: f64,
    eye_ry: f64,
    iris: f64,
    gaze: f64,
    brow_dy: f64,
    brow_tone: f64,
    brow_tilt: f64,
    nose_len: f64,
    nose_width: f64,
    mouth_dy: f64,
    mouth_rx: f64,
    mouth_ry: f64,
    lip: f64,
    smile: f64,
}

impl FaceParams {
    fn sample(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        // layout is expressed relative to a 100x120 reference face
        let sx = w / 100.0;
        let sy = h / 120.0;
        Self {
            cx: w * 0.5 + rng.random_range(-2.5..2.5) * sx,
            cy: h * 0.53 + rng.random_range(-2.5..2.5) * sy,
            head_rx: rng.random_range(31.0..37.0) * sx,
            head_ry: rng.random_range(43.0..49.0) * sy,
            background: rng.random_range(0.1..0.4),
            bg_slope: rng.random_range(-0.15..0.15),
            skin: rng.random_range(0.5..0.8),
            light: rng.random_range(-0.2..0.2),
            hair: rng.random_range(0.05..0.3),
            hairline: rng.random_range(20.0..28.0) * sy,
            eye_dx: rng.random_range(14.0..18.0) * sx,
            eye_dy: rng.random_range(-14.0..-9.0) * sy,
            eye_rx: rng.random_range(5.5..7.5) * sx,
            eye_ry: rng.random_range(2.5..3.8) * sy,
            iris: rng.random_range(0.15..0.45),
            gaze: rng.random_range(-1.2..1.2) * sx,
            brow_dy: rng.random_range(6.0..8.5) * sy,
            brow_tone: rng.random_range(0.05..0.35),
            brow_tilt: rng.random_range(-0.12..0.12),
            nose_len: rng.random_range(16.0..22.0) * sy,
            nose_width: rng.random_range(4.5..7.0) * sx,
            mouth_dy: rng.random_range(22.0..28.0) * sy,
            mouth_rx: rng.random_range(9.0..14.0) * sx,
            mouth_ry: rng.random_range(2.0..3.5) * sy,
            lip: rng.random_range(0.2..0.45),
            smile: rng.random_range(-0.04..0.06),
        }
    }

    fn render(&self, width: usize, height: usize) -> ImageBuffer {
        let w = width as f64;
        ImageBuffer::from_fn(width, height, |px, py| {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut v = self.background + self.bg_slope * (x / w - 0.5);

            // hair cap behind and above the face
            let hair = ellipse(
                x,
                y,
                self.cx,
                self.cy - 6.0,
                self.head_rx + 5.0,
                self.head_ry + 4.0,
            );
            v = lerp(v, self.hair, hair);

            // neck
            let neck = ellipse(
                x,
                y,
                self.cx,
                self.cy + self.head_ry,
                self.head_rx * 0.45,
                self.head_ry * 0.4,
            );
            v = lerp(v, self.skin * 0.85, neck);

            // face with directional shading
            let face = ellipse(x, y, self.cx, self.cy, self.head_rx, self.head_ry);
            let nx = (x - self.cx) / self.head_rx;
            let ny = (y - self.cy) / self.head_ry;
            let shade = self.skin * (1.0 + self.light * nx - 0.12 * (nx * nx + ny * ny));
            v = lerp(v, shade, face);

            // hairline fringe over the forehead
            let fringe = ellipse(
                x,
                y,
                self.cx,
                self.cy - self.head_ry + self.hairline * 0.3,
                self.head_rx * 0.95,
                self.hairline * 0.7,
            );
            v = lerp(v, self.hair, fringe * face);

            for side in [-1.0, 1.0] {
                let ex = self.cx + side * self.eye_dx;
                let ey = self.cy + self.eye_dy;
                // socket shadow
                let socket = ellipse(x, y, ex, ey, self.eye_rx * 1.5, self.eye_ry * 2.2);
                v = lerp(v, v * 0.8, socket);
                let sclera = ellipse(x, y, ex, ey, self.eye_rx, self.eye_ry);
                v = lerp(v, 0.92, sclera);
                let iris = ellipse(
                    x,
                    y,
                    ex + self.gaze,
                    ey,
                    self.eye_ry * 0.95,
                    self.eye_ry * 0.95,
                );
                v = lerp(v, self.iris, iris * sclera);
                let pupil = ellipse(
                    x,
                    y,
                    ex + self.gaze,
                    ey,
                    self.eye_ry * 0.4,
                    self.eye_ry * 0.4,
                );
                v = lerp(v, 0.03, pupil * sclera);

                let by = ey - self.brow_dy + side * self.brow_tilt * (x - ex);
                let brow = ellipse(x, y, ex + side * 1.0, by, self.eye_rx * 1.2, 1.4);
                v = lerp(v, self.brow_tone, brow);

                let nostril = ellipse(
                    x,
                    y,
                    self.cx + side * self.nose_width * 0.45,
                    self.cy + self.nose_len * 0.55,
                    1.6,
                    1.1,
                );
                v = lerp(v, self.skin * 0.35, nostril);
            }

            // nose: bright ridge with a shadowed side
            let top = self.cy + self.eye_dy + 2.0;
            let bottom = self.cy + self.nose_len * 0.5;
            if y > top && y < bottom + 3.0 {
                let t = ((y - top) / (bottom - top)).clamp(0.0, 1.0);
                let half = 1.0 + t * self.nose_width * 0.5;
                let ridge = (-((x - self.cx) / half).powi(2)).exp();
                let side = (-((x - self.cx - half * 1.4) / 1.2).powi(2)).exp();
                v = v * (1.0 + 0.12 * ridge * t) * (1.0 - 0.25 * side * t);
            }
            let tip = ellipse(x, y, self.cx, bottom, self.nose_width * 0.55, 2.5);
            v = lerp(v, v * 1.08, tip);

            // mouth, curved by the smile term
            let my = self.cy + self.mouth_dy - self.smile * (x - self.cx).powi(2);
            let mouth = ellipse(x, y, self.cx, my, self.mouth_rx, self.mouth_ry);
            v = lerp(v, self.lip, mouth);
            let gap = ellipse(x, y, self.cx, my, self.mouth_rx * 0.9, 0.6);
            v = lerp(v, self.lip * 0.3, gap);

            v
        })
    }
}

/// Generates `count` aligned faces of the given size. Same seed, same corpus.
pub fn synth_faces(count: usize, seed: u64, width: usize, height: usize) -> Vec<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| FaceParams::sample(&mut rng, width, height).render(width, height))
        .collect()
}
