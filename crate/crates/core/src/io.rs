//! File formats for experiment outputs: binary tensors, CSV tables, PGM
//! images, SVG line plots and hashed JSON manifests.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"OCDT";
pub const TENSOR_VERSION: u32 = 1;

/// `OCDT`, version (u32), rank (u32), dims (u64 each), little-endian f64 data.
pub fn tensor_to_bytes(shape: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::ShapeMismatch(format!("shape {shape:?} does not hold {} values", data.len())));
    }
    let mut out = Vec::with_capacity(12 + 8 * shape.len() + 8 * data.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    shape.iter().for_each(|d| out.extend_from_slice(&(*d as u64).to_le_bytes()));
    data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    Ok(out)
}

pub fn tensor_from_bytes(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let bad = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 12 || &bytes[..4] != TENSOR_MAGIC {
        return Err(bad("not a tensor file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != TENSOR_VERSION {
        return Err(Error::Format(format!("unsupported tensor version {version}")));
    }
    let rank = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < 8 * rank {
        return Err(bad("truncated tensor header"));
    }
    let shape: Vec<usize> =
        body[..8 * rank].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize).collect();
    let data = &body[8 * rank..];
    let n = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d)).ok_or_else(|| bad("tensor too large"))?;
    if data.len() != 8 * n {
        return Err(bad("tensor data length does not match its shape"));
    }
    Ok((shape, data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()))
}

pub fn write_tensor(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    std::fs::write(path, tensor_to_bytes(shape, data)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    tensor_from_bytes(&buf)
}

/// Column-oriented table rendered as CSV with full-precision floats.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            s += &cells.join(",");
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> =
            lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?.split(',').map(String::from).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("CSV line {}: {e}", i + 2)))?;
            if row.len() != header.len() {
                return Err(Error::Format(format!("CSV line {} has {} cells", i + 2, row.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Binary (P5) 8-bit PGM of a row-major image; values are mapped linearly
/// from `[lo, hi]` to `[0, 255]` and clipped.
pub fn pgm_bytes(width: usize, height: usize, pixels: &[f64], lo: f64, hi: f64) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} pixels for a {width}×{height} image", pixels.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    out.extend(pixels.iter().map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64], lo: f64, hi: f64) -> Result<()> {
    std::fs::write(path, pgm_bytes(width, height, pixels, lo, hi)?)?;
    Ok(())
}

/// Tiles equally sized images into one row-major mosaic with `cols` columns.
pub fn mosaic(images: &[&[f64]], size: usize, cols: usize) -> (usize, usize, Vec<f64>) {
    let rows = images.len().div_ceil(cols.max(1));
    let (w, h) = (cols * size, rows * size);
    let mut out = vec![0.0; w * h];
    for (k, img) in images.iter().enumerate() {
        let (oy, ox) = ((k / cols) * size, (k % cols) * size);
        for y in 0..size {
            out[(oy + y) * w + ox..][..size].copy_from_slice(&img[y * size..][..size]);
        }
    }
    (w, h, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    Line,
    Points,
}

/// One plotted series: `y` against `x` columns of a table.
#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub x: &'a str,
    pub y: &'a str,
    pub style: PlotStyle,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// SVG plot rendered purely from table data.
pub fn svg_plot(table: &Table, series: &[Series], title: &str, x_label: &str, y_label: &str) -> Result<String> {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let mut pts = Vec::new();
    for s in series {
        let xs = table.column(s.x).ok_or_else(|| Error::Format(format!("no column '{}'", s.x)))?;
        let ys = table.column(s.y).ok_or_else(|| Error::Format(format!("no column '{}'", s.y)))?;
        pts.push((xs, ys));
    }
    let all = || pts.iter().flat_map(|(x, y)| x.iter().zip(y)).filter(|(a, b)| a.is_finite() && b.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in all() {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 15.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (v, px, py, anchor) in [
        (x0, sx(x0), h - m + 16.0, "start"),
        (x1, sx(x1), h - m + 16.0, "end"),
    ] {
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{py:.2}" text-anchor="{anchor}" font-size="10">{v:.4e}</text>"#);
    }
    for (v, py) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{py:.2}" text-anchor="end" font-size="10">{v:.4e}</text>"#, m - 4.0);
    }
    for (k, ((xs, ys), ser)) in pts.iter().zip(series).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<(f64, f64)> = xs
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (sx(*a), sy(*b)))
            .collect();
        match ser.style {
            PlotStyle::Line => {
                let d: Vec<String> = coords.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, d.join(" "));
            }
            PlotStyle::Points => {
                for (a, b) in coords {
                    let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="2" fill="{color}"/>"#);
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - m - 120.0,
            m + 14.0 * k as f64,
            escape(ser.y)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Record of one experiment run: the resolved config, its seed and a hash
/// of every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub summary: serde_json::Value,
}

impl Manifest {
    /// Combined hash over the CSV outputs in path order.
    pub fn csv_digest(&self) -> String {
        let mut h = Sha256::new();
        let mut files: Vec<&OutputFile> = self.outputs.iter().filter(|o| o.path.ends_with(".csv")).collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        for f in files {
            h.update(f.path.as_bytes());
            h.update(f.sha256.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Output directory that hashes everything written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::File::create(&path)?;
        f.write_all(bytes)?;
        self.written.retain(|o| o.path != name);
        self.written.push(OutputFile { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write(name, table.to_csv().as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, &serde_json::to_vec_pretty(value)?)
    }

    pub fn written(&self) -> &[OutputFile] {
        &self.written
    }

    /// Writes `manifest.json` listing every file so far.
    pub fn finish(mut self, experiment: &str, seed: u64, config: serde_json::Value, summary: serde_json::Value) -> Result<Manifest> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest { experiment: experiment.into(), seed, config, outputs: self.written.clone(), summary };
        std::fs::write(self.root.join("manifest.json"), serde_json::to_vec_pretty(&m)?)?;
        Ok(m)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip_and_errors() {
        let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.5 - 3.0).collect();
        let b = tensor_to_bytes(&[2, 3, 4], &data).unwrap();
        assert_eq!(&b[..4], b"OCDT");
        assert_eq!(tensor_from_bytes(&b).unwrap(), (vec![2, 3, 4], data.clone()));
        assert!(tensor_to_bytes(&[5], &data).is_err());
        assert!(tensor_from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(tensor_from_bytes(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![0.1, -1e-300]);
        t.push(vec![std::f64::consts::PI, 12345.678]);
        assert_eq!(Table::from_csv(&t.to_csv()).unwrap(), t);
        assert!(Table::from_csv("a,b\n1,x\n").is_err());
    }

    #[test]
    fn pgm_header_and_scaling() {
        let b = pgm_bytes(2, 1, &[-1.0, 1.0], -1.0, 1.0).unwrap();
        assert!(b.starts_with(b"P5\n2 1\n255\n"));
        assert_eq!(&b[b.len() - 2..], &[0, 255]);
    }

    #[test]
    fn svg_is_a_pure_function_of_the_table() {
        let mut t = Table::new(&["x", "y"]);
        (0..5).for_each(|i| t.push(vec![i as f64, (i * i) as f64]));
        let s = [Series { x: "x", y: "y", style: PlotStyle::Line }];
        let a = svg_plot(&t, &s, "t", "x", "y").unwrap();
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(a, svg_plot(&back, &s, "t", "x", "y").unwrap());
        assert!(a.starts_with("<svg"));
        assert!(svg_plot(&t, &[Series { x: "x", y: "z", style: PlotStyle::Points }], "", "", "").is_err());
    }

    #[test]
    fn mosaic_places_tiles() {
        let a = [1.0; 4];
        let b = [2.0; 4];
        let (w, h, m) = mosaic(&[&a, &b, &a], 2, 2);
        assert_eq!((w, h), (4, 4));
        assert_eq!(m[2], 2.0);
        assert_eq!(m[8], 1.0);
        assert_eq!(m[10], 0.0);
    }

    #[test]
    fn output_dir_records_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("run")).unwrap();
        out.write("b.csv", b"x\n1\n").unwrap();
        out.write("a.csv", b"x\n2\n").unwrap();
        let m = out.finish("test", 1, serde_json::json!({}), serde_json::json!({})).unwrap();
        assert_eq!(m.outputs[0].path, "a.csv");
        assert_eq!(read_manifest(&dir.path().join("run/manifest.json")).unwrap(), m);
        assert_eq!(m.outputs[1].sha256, sha256_hex(b"x\n1\n"));
    }
}
