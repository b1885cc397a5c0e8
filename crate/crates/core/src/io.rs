//! PGM (P5, 8-bit) and PFM (grayscale float32) files, mask images, the
//! per-iteration metrics CSV and coefficient dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{quantize_bytes, ImageGrid, Mask};
use crate::msdt::CoeffPyramid;
use crate::scalar::Real;
use crate::solver::IterationMetrics;

/// First line of every metrics CSV.
pub const METRICS_SCHEMA: &str = "#schema:dg3pd-metrics-v1";
pub const METRICS_COLUMNS: [&str; 7] =
    ["iteration", "unity_residual_l2", "sup_coeff_e", "nu", "mu1", "mu2", "elapsed_ms"];

fn format_err(format: &'static str, reason: impl Into<String>) -> Error {
    Error::Format { format, reason: reason.into() }
}

/// Splits a netpbm-style header into `count` whitespace-separated tokens,
/// skipping `#` comments. Returns the tokens and the offset just past the
/// single whitespace byte that ends the last token.
fn header_tokens(bytes: &[u8], count: usize, format: &'static str) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(format_err(format, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() {
        return Err(format_err(format, "missing data after header"));
    }
    Ok((tokens, i + 1))
}

fn parse_dim(token: &str, format: &'static str) -> Result<usize> {
    match token.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format_err(format, format!("bad dimension {token:?}"))),
    }
}

pub fn decode_pgm<T: Real>(bytes: &[u8]) -> Result<ImageGrid<T>> {
    let (tok, start) = header_tokens(bytes, 4, "PGM")?;
    if tok[0] != "P5" {
        return Err(format_err("PGM", format!("expected P5, found {:?}", tok[0])));
    }
    let (cols, rows) = (parse_dim(&tok[1], "PGM")?, parse_dim(&tok[2], "PGM")?);
    let maxval: u32 = tok[3].parse().map_err(|_| format_err("PGM", "bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(format_err("PGM", format!("only 8-bit maxval is supported, got {maxval}")));
    }
    let data = bytes.get(start..start + rows * cols).ok_or_else(|| format_err("PGM", "truncated pixel data"))?;
    let samples = data.iter().map(|&b| T::lit(b as f64)).collect();
    ImageGrid::new(rows, cols, samples)
}

/// P5 encoding of the clamped and rounded samples.
pub fn encode_pgm<T: Real>(image: &ImageGrid<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(quantize_bytes(image));
    out
}

pub fn decode_pfm<T: Real>(bytes: &[u8]) -> Result<ImageGrid<T>> {
    let (tok, start) = header_tokens(bytes, 4, "PFM")?;
    if tok[0] != "Pf" {
        return Err(format_err("PFM", format!("expected grayscale Pf, found {:?}", tok[0])));
    }
    let (cols, rows) = (parse_dim(&tok[1], "PFM")?, parse_dim(&tok[2], "PFM")?);
    let scale: f64 = tok[3].parse().map_err(|_| format_err("PFM", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err("PFM", "scale must be nonzero"));
    }
    let little = scale < 0.0;
    let data = bytes.get(start..start + 4 * rows * cols).ok_or_else(|| format_err("PFM", "truncated pixel data"))?;
    let mut samples = vec![T::zero(); rows * cols];
    for (k, chunk) in data.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("chunk of four bytes");
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        // Rows are stored bottom to top.
        let (r, c) = (rows - 1 - k / cols, k % cols);
        samples[r * cols + c] = T::lit(v as f64);
    }
    ImageGrid::new(rows, cols, samples)
}

/// Little-endian PFM (scale -1) with rows written bottom to top.
pub fn encode_pfm<T: Real>(image: &ImageGrid<T>) -> Vec<u8> {
    let (m, n) = image.dims();
    let mut out = format!("Pf\n{n} {m}\n-1.0\n").into_bytes();
    out.reserve(4 * m * n);
    for r in (0..m).rev() {
        for c in 0..n {
            out.extend((image[(r, c)].to_f64_lossy() as f32).to_le_bytes());
        }
    }
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_pgm<T: Real>(path: impl AsRef<Path>) -> Result<ImageGrid<T>> {
    decode_pgm(&read(path.as_ref())?)
}

pub fn write_pgm<T: Real>(path: impl AsRef<Path>, image: &ImageGrid<T>) -> Result<()> {
    write(path.as_ref(), &encode_pgm(image))
}

pub fn read_pfm<T: Real>(path: impl AsRef<Path>) -> Result<ImageGrid<T>> {
    decode_pfm(&read(path.as_ref())?)
}

pub fn write_pfm<T: Real>(path: impl AsRef<Path>, image: &ImageGrid<T>) -> Result<()> {
    write(path.as_ref(), &encode_pfm(image))
}

/// Reads an image by extension: `.pfm` as float, anything else as PGM.
pub fn read_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageGrid<T>> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pfm") => read_pfm(path),
        _ => read_pgm(path),
    }
}

/// Mask image: samples `>= 128` are missing.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img: ImageGrid<f64> = read_image(path)?;
    let bits = img.as_slice().iter().map(|&v| v >= 128.0).collect();
    Mask::new(img.rows(), img.cols(), bits)
}

/// Missing pixels as 255, known as 0.
pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let img = ImageGrid::from_fn(mask.rows(), mask.cols(), |r, c| if mask.get(r, c) { 255.0 } else { 0.0_f64 });
    write_pgm(path, &img)
}

/// One metrics row in the shared CSV schema.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub unity_residual_l2: f64,
    pub sup_coeff_e: f64,
    pub nu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub elapsed_ms: f64,
}

impl From<&IterationMetrics> for MetricsRow {
    fn from(m: &IterationMetrics) -> Self {
        Self {
            iteration: m.iteration,
            unity_residual_l2: m.unity_residual_l2,
            sup_coeff_e: m.sup_coeff_e,
            nu: m.nu,
            mu1: m.mu1,
            mu2: m.mu2,
            elapsed_ms: m.elapsed_ms,
        }
    }
}

/// The metrics CSV, schema line first.
pub fn encode_metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{METRICS_SCHEMA}")?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(METRICS_COLUMNS)?;
    for r in rows {
        csv.write_record([
            r.iteration.to_string(),
            r.unity_residual_l2.to_string(),
            r.sup_coeff_e.to_string(),
            r.nu.to_string(),
            r.mu1.to_string(),
            r.mu2.to_string(),
            r.elapsed_ms.to_string(),
        ])?;
    }
    csv.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_metrics_csv(rows)?;
    fs::write(path, bytes).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let bytes = read(path.as_ref())?;
    let text = String::from_utf8_lossy(&bytes);
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    if first.trim_end() != METRICS_SCHEMA {
        return Err(format_err("metrics CSV", format!("unexpected schema line {first:?}")));
    }
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    if reader.headers()?.iter().ne(METRICS_COLUMNS) {
        return Err(format_err("metrics CSV", "unexpected columns"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| format_err("metrics CSV", format!("bad number {:?}", &rec[i])))
        };
        rows.push(MetricsRow {
            iteration: rec[0].parse().map_err(|_| format_err("metrics CSV", "bad iteration"))?,
            unity_residual_l2: num(1)?,
            sup_coeff_e: num(2)?,
            nu: num(3)?,
            mu1: num(4)?,
            mu2: num(5)?,
            elapsed_ms: num(6)?,
        });
    }
    Ok(rows)
}

/// Writes `scale{j}_band{b}_{re|im}.pfm` for every band plus `manifest.txt`,
/// returning the written paths.
pub fn dump_pyramid<T: Real>(dir: impl AsRef<Path>, pyramid: &CoeffPyramid<T>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (m, n) = pyramid.frame().dims();
    let mut manifest = format!("rows {m}\ncols {n}\nbands {}\n", pyramid.band_count());
    let mut written = Vec::new();
    for b in 0..pyramid.band_count() {
        let (j, o) = pyramid.band_id(b);
        let band = pyramid.band(b);
        for (part, pick) in [("re", 0), ("im", 1)] {
            let samples = band.iter().map(|z| if pick == 0 { z.re } else { z.im }).collect();
            let img = ImageGrid::from_vec_unchecked(m, n, samples);
            let path = dir.join(format!("scale{j}_band{o}_{part}.pfm"));
            write_pfm(&path, &img)?;
            written.push(path);
        }
        manifest.push_str(&format!("scale{j}_band{o} scale={j} orientation={o}\n"));
    }
    let path = dir.join("manifest.txt");
    write(&path, manifest.as_bytes())?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msdt::{msdt_forward, MsdtConfig};

    #[test]
    fn pgm_round_trip_and_clamping() {
        let img = ImageGrid::from_fn(3, 5, |r, c| (r * 40 + c * 7) as f64);
        assert_eq!(decode_pgm::<f64>(&encode_pgm(&img)).unwrap(), img);
        let wild = ImageGrid::from_vec_unchecked(1, 3, vec![-4.0, 300.0, 12.5]);
        assert_eq!(decode_pgm::<f64>(&encode_pgm(&wild)).unwrap().as_slice(), &[0.0, 255.0, 13.0]);
        let header = encode_pgm(&img);
        assert!(header.starts_with(b"P5\n5 3\n255\n"));
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([7, 9]);
        assert_eq!(decode_pgm::<f64>(&bytes).unwrap().as_slice(), &[7.0, 9.0]);
        assert!(decode_pgm::<f64>(b"P2\n2 1\n255\n79").is_err());
        assert!(decode_pgm::<f64>(b"P5\n2 2\n255\n1").is_err());
        assert!(decode_pgm::<f64>(b"P5\n2 1\n65535\n1234").is_err());
    }

    #[test]
    fn pfm_layout_is_bottom_up_little_endian() {
        let img = ImageGrid::from_vec_unchecked(2, 2, vec![1.0, 2.0, 3.0, -4.5]);
        let bytes = encode_pfm(&img);
        let header = b"Pf\n2 2\n-1.0\n";
        assert!(bytes.starts_with(header));
        let first = f32::from_le_bytes(bytes[header.len()..header.len() + 4].try_into().unwrap());
        assert_eq!(first, 3.0);
        assert_eq!(decode_pfm::<f64>(&bytes).unwrap(), img);
    }

    #[test]
    fn pfm_big_endian_is_read() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend(1.5f32.to_be_bytes());
        bytes.extend((-2.0f32).to_be_bytes());
        assert_eq!(decode_pfm::<f64>(&bytes).unwrap().as_slice(), &[1.5, -2.0]);
        assert!(decode_pfm::<f64>(b"PF\n1 1\n-1.0\n0000").is_err());
    }

    #[test]
    fn files_masks_and_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageGrid::from_fn(4, 6, |r, c| r as f64 * 0.25 - c as f64);
        write_pfm(dir.path().join("a.pfm"), &img).unwrap();
        assert_eq!(read_image::<f64>(dir.path().join("a.pfm")).unwrap(), img);

        let mask = Mask::from_fn(4, 6, |r, c| (r + c) % 3 == 0);
        write_mask(dir.path().join("m.pgm"), &mask).unwrap();
        assert_eq!(read_mask(dir.path().join("m.pgm")).unwrap(), mask);

        let rows: Vec<MetricsRow> = (1..=3)
            .map(|i| MetricsRow {
                iteration: i,
                unity_residual_l2: 1.0 / i as f64,
                sup_coeff_e: 0.1,
                nu: 2.0,
                mu1: 3.0,
                mu2: 4.0,
                elapsed_ms: 5.5,
            })
            .collect();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("#schema:dg3pd-metrics-v1\niteration,unity_residual_l2,"));
        assert_eq!(read_metrics_csv(&path).unwrap(), rows);
        assert!(read_pgm::<f64>(dir.path().join("missing.pgm")).unwrap_err().is_io());
    }

    #[test]
    fn pyramid_dump_names() {
        let dir = tempfile::tempdir().unwrap();
        let x = ImageGrid::from_fn(16, 16, |r, c| ((r * 3 + c) % 5) as f64);
        let p = msdt_forward(&x, &MsdtConfig::default()).unwrap();
        let files = dump_pyramid(dir.path(), &p).unwrap();
        assert_eq!(files.len(), 2 * p.band_count() + 1);
        let (j, o) = p.band_id(0);
        let re: ImageGrid<f64> = read_pfm(dir.path().join(format!("scale{j}_band{o}_re.pfm"))).unwrap();
        for (a, z) in re.as_slice().iter().zip(p.band(0)) {
            assert_eq!(*a, z.re as f32 as f64);
        }
    }
}
