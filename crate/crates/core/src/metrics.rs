//! PSNR, SSIM and per-run quality reports.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, ImageBuffer};

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB for unit-range images, capped at 99 dB.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    if a.is_empty() {
        return Err(Error::invalid("cannot compare empty images"));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Valid-region separable filtering of `src` (width `w`) with `kernel`.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = kernel.iter().zip(&row[x..x + n]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (k, kv) in kernel.iter().enumerate() {
            let row = &tmp[(y + k) * ow..(y + k + 1) * ow];
            for (o, v) in out[y * ow..(y + 1) * ow].iter_mut().zip(row) {
                *o += kv * v;
            }
        }
    }
    out
}

/// Single-scale SSIM: 11×11 Gaussian window (σ = 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over all fully contained windows.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let kernel = gaussian_window();
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, w, h, &kernel);
    let mu_y = filter_valid(y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        total +=
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_image: Vec<ImageScore>,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

impl QualityReport {
    /// Builds a report from scores, sorting by id.
    pub fn from_scores(mut per_image: Vec<ImageScore>) -> Self {
        per_image.sort_by(|a, b| a.id.cmp(&b.id));
        let n = per_image.len().max(1) as f64;
        let mean_psnr_db = per_image.iter().map(|s| s.psnr_db).sum::<f64>() / n;
        let mean_ssim = per_image.iter().map(|s| s.ssim).sum::<f64>() / n;
        Self {
            per_image,
            mean_psnr_db,
            mean_ssim,
        }
    }

    /// Writes `id,psnr_db,ssim` rows and a closing `mean` row, six decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["id", "psnr_db", "ssim"])?;
        for s in &self.per_image {
            wtr.write_record([
                s.id.clone(),
                format!("{:.6}", s.psnr_db),
                format!("{:.6}", s.ssim),
            ])?;
        }
        wtr.write_record([
            "mean".to_string(),
            format!("{:.6}", self.mean_psnr_db),
            format!("{:.6}", self.mean_ssim),
        ])?;
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Parses a report written by [`QualityReport::write_csv`]. The trailing
    /// `mean` row is required and taken as stored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["id", "psnr_db", "ssim"] {
            return Err(Error::Parse {
                offset: 0,
                message: format!("unexpected header {:?}", headers),
            });
        }
        let mut per_image = Vec::new();
        let mut means = None;
        for record in rdr.records() {
            let record = record?;
            let offset = record.position().map_or(0, |p| p.byte() as usize);
            if means.is_some() {
                return Err(Error::Parse {
                    offset,
                    message: "rows after the mean row".into(),
                });
            }
            if record.len() != 3 {
                return Err(Error::Parse {
                    offset,
                    message: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let num = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| Error::Parse {
                    offset,
                    message: format!("field {i}: {e}"),
                })
            };
            let (p, s) = (num(1)?, num(2)?);
            if &record[0] == "mean" {
                means = Some((p, s));
            } else {
                per_image.push(ImageScore {
                    id: record[0].to_string(),
                    psnr_db: p,
                    ssim: s,
                });
            }
        }
        let (mean_psnr_db, mean_ssim) = means.ok_or_else(|| Error::Parse {
            offset: 0,
            message: "missing mean row".into(),
        })?;
        Ok(Self {
            per_image,
            mean_psnr_db,
            mean_ssim,
        })
    }
}

/// Scores each `(id, output)` against the ground truth at the same position.
pub fn evaluate(
    outputs: &[(String, ImageBuffer)],
    truths: &[ImageBuffer],
) -> Result<QualityReport> {
    if outputs.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} outputs but {} ground truths",
            outputs.len(),
            truths.len()
        )));
    }
    let scores = outputs
        .iter()
        .zip(truths)
        .map(|((id, out), truth)| {
            Ok(ImageScore {
                id: id.clone(),
                psnr_db: psnr(out, truth)?,
                ssim: ssim(out, truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QualityReport::from_scores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, |_, _| rng.random())
    }

    fn smooth(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |x, y| {
            0.5 + 0.3 * (x as f64 / 7.0).sin() * (y as f64 / 5.0).cos()
        })
    }

    #[test]
    fn psnr_identical_is_capped() {
        let a = random_image(16, 16, 1);
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
    }

    #[test]
    fn psnr_one_code_value() {
        let a = ImageBuffer::filled(20, 20, 0.5);
        let b = ImageBuffer::filled(20, 20, 0.5 + 1.0 / 255.0);
        let v = psnr(&a, &b).unwrap();
        assert!((v - 48.13).abs() < 0.01, "{v}");
        assert!((v - 20.0 * 255f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_direct_formula() {
        let (a, b) = (random_image(13, 9, 2), random_image(13, 9, 3));
        let mut se = 0.0;
        for y in 0..9 {
            for x in 0..13 {
                se += (255.0 * a.get(x, y) - 255.0 * b.get(x, y)).powi(2);
            }
        }
        let mse255 = se / (13.0 * 9.0);
        let expect = 20.0 * 255f64.log10() - 10.0 * mse255.log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        assert!(psnr(&random_image(4, 4, 0), &random_image(4, 5, 0)).is_err());
    }

    /// Direct per-window SSIM with explicit 2-D Gaussian weights.
    fn ssim_reference(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
        let g: Vec<f64> = (0..11)
            .map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp())
            .collect();
        let gs: f64 = g.iter().sum();
        let (w, h) = a.dims();
        let (c1, c2) = (0.0001, 0.0009);
        let mut total = 0.0;
        let mut count = 0;
        for oy in 0..=h - 11 {
            for ox in 0..=w - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let wt = g[i] * g[j] / (gs * gs);
                        mx += wt * a.get(ox + i, oy + j);
                        my += wt * b.get(ox + i, oy + j);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let wt = g[i] * g[j] / (gs * gs);
                        let (p, q) = (a.get(ox + i, oy + j) - mx, b.get(ox + i, oy + j) - my);
                        vx += wt * p * p;
                        vy += wt * q * q;
                        cxy += wt * p * q;
                    }
                }
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn ssim_identity_and_inverse() {
        let a = random_image(24, 20, 4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let inv = ImageBuffer::from_fn(24, 20, |x, y| 1.0 - a.get(x, y));
        let got = ssim(&a, &inv).unwrap();
        let expect = ssim_reference(&a, &inv);
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
        assert!(got < 0.0);
    }

    #[test]
    fn ssim_matches_reference_on_random_pair() {
        let (a, b) = (random_image(17, 15, 5), random_image(17, 15, 6));
        assert!((ssim(&a, &b).unwrap() - ssim_reference(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = random_image(10, 30, 1);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn metrics_symmetric() {
        for s in 0..20 {
            let (a, b) = (random_image(16, 16, 100 + s), random_image(16, 16, 200 + s));
            assert!((psnr(&a, &b).unwrap() - psnr(&b, &a).unwrap()).abs() < 1e-12);
            assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_decrease_with_noise() {
        let base = smooth(48, 48);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pattern: Vec<f64> = (0..48 * 48)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for amp in [0.01, 0.02, 0.05] {
            let noisy =
                ImageBuffer::from_fn(48, 48, |x, y| base.get(x, y) + amp * pattern[y * 48 + x]);
            let cur = (psnr(&base, &noisy).unwrap(), ssim(&base, &noisy).unwrap());
            assert!(cur.0 < last.0 && cur.1 < last.1);
            last = cur;
        }
    }

    #[test]
    fn evaluate_means_and_order() {
        let t = smooth(16, 16);
        let o1 = ImageBuffer::from_fn(16, 16, |x, y| t.get(x, y) + 0.01);
        let o2 = ImageBuffer::from_fn(16, 16, |x, y| t.get(x, y) - 0.03);
        let single = evaluate(&[("a".into(), o1.clone())], std::slice::from_ref(&t)).unwrap();
        assert_eq!(single.mean_psnr_db, single.per_image[0].psnr_db);

        let rep = evaluate(
            &[("b".into(), o2), ("a".into(), o1)],
            &[t.clone(), t.clone()],
        )
        .unwrap();
        assert_eq!(rep.per_image[0].id, "a");
        let (x, y) = (rep.per_image[0].psnr_db, rep.per_image[1].psnr_db);
        assert!((rep.mean_psnr_db - (x + y) / 2.0).abs() < 1e-12);
        assert!(evaluate(&[], &[t]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rep = QualityReport::from_scores(vec![
            ImageScore {
                id: "face_001".into(),
                psnr_db: 31.123456789,
                ssim: 0.912345678,
            },
            ImageScore {
                id: "face_000".into(),
                psnr_db: 29.5,
                ssim: 0.8,
            },
        ]);
        let text = rep.to_csv_string().unwrap();
        assert!(text.starts_with("id,psnr_db,ssim\nface_000,29.500000,0.800000\n"));
        assert!(text.ends_with("mean,30.311728,0.856173\n"), "{text}");
        let back = QualityReport::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.to_csv_string().unwrap(), text);
        assert_eq!(back.per_image[1].psnr_db, 31.123457);
    }

    #[test]
    fn csv_rejects_malformed() {
        assert!(QualityReport::read_csv("id,psnr,ssim\n".as_bytes()).is_err());
        assert!(QualityReport::read_csv("id,psnr_db,ssim\na,1,2\n".as_bytes()).is_err());
        assert!(QualityReport::read_csv("id,psnr_db,ssim\na,x,2\nmean,1,1\n".as_bytes()).is_err());
    }
}
