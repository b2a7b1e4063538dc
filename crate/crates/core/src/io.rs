//! File formats.
//!
//! * Intensity images: PGM, plain (`P2`) or raw (`P5`), 8 or 16 bit, divided
//!   by the header's maxval on load. A `.csv` grid of reals is read as is.
//! * Label images: 16-bit PGM or a `.csv` grid of non-negative integers,
//!   chosen by file extension. Any PGM is accepted on input; samples are
//!   taken as labels exactly as stored, whatever the maxval.
//! * Edge weights: the magic `DIFFWLK1`, height and width as little-endian
//!   `u32`, then one little-endian `f64` per edge in canonical edge order.
//! * Seeds: CSV with header `row,col,label`.
//! * Assignments: CSV with header `row,col,p0,p1,...`, one line per pixel.
//! * Reports: pretty-printed JSON.
//!
//! Reals are written with the shortest representation that round-trips, so
//! writing the same values always yields the same bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageError, ImageFormat};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diffusion::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::image::{FloatImage, LabelImage};
use crate::lattice::{EdgeWeights, LatticeGraph, Seed, SeedSet};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"DIFFWLK1";

fn format_error(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {msg}", path.display()))
}

fn image_error(path: &Path, err: ImageError) -> Error {
    match err {
        ImageError::IoError(e) => Error::Io(e),
        other => format_error(path, other),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            _ => unreachable!(),
        }
    } else {
        format_error(path, err)
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// The declared maximum sample value of a `P2`/`P5` header.
fn pgm_maxval(path: &Path, bytes: &[u8]) -> Result<u32> {
    let mut tokens = Vec::with_capacity(4);
    let mut i = 0;
    while tokens.len() < 4 && i < bytes.len() {
        match bytes[i] {
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
                    i += 1;
                }
                tokens.push(&bytes[start..i]);
            }
        }
    }
    if tokens.first().is_none_or(|m| !matches!(*m, b"P2" | b"P5")) {
        return Err(format_error(path, "expected a P2 or P5 graymap"));
    }
    tokens
        .get(3)
        .and_then(|t| std::str::from_utf8(t).ok()?.parse().ok())
        .filter(|&m| (1..=65535).contains(&m))
        .ok_or_else(|| format_error(path, "missing or invalid maxval"))
}

/// Raw samples of a graymap as `(height, width, maxval, samples)`. The
/// decoder stretches samples to the full 8- or 16-bit range; this undoes it.
fn read_pgm(path: &Path) -> Result<(usize, usize, u32, Vec<u32>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let maxval = pgm_maxval(path, &bytes)?;
    let decoded = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).map_err(|e| image_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (full, stretched): (u32, Vec<u32>) = match decoded {
        DynamicImage::ImageLuma8(buf) => (255, buf.into_raw().into_iter().map(u32::from).collect()),
        DynamicImage::ImageLuma16(buf) => (65535, buf.into_raw().into_iter().map(u32::from).collect()),
        other => {
            return Err(format_error(
                path,
                format!("expected a grayscale PGM, found {:?}", other.color()),
            ))
        }
    };
    let samples = if maxval == full {
        stretched
    } else {
        stretched
            .into_iter()
            .map(|v| ((u64::from(v) * u64::from(maxval) + u64::from(full) / 2) / u64::from(full)) as u32)
            .collect()
    };
    Ok((h, w, maxval, samples))
}

/// Reads a grid of cells with no header; every row must have the same length.
fn read_grid<T: std::str::FromStr>(path: &Path) -> Result<(usize, usize, Vec<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut height = 0;
    let mut width = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if height == 0 {
            width = record.len();
        }
        height += 1;
        for cell in record.iter() {
            data.push(
                cell.parse()
                    .map_err(|_| format_error(path, format!("row {height}: cannot parse {cell:?}")))?,
            );
        }
    }
    Ok((height, width, data))
}

fn write_grid<T: std::fmt::Display>(path: &Path, width: usize, data: &[T]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for row in data.chunks(width.max(1)) {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush()?;
    Ok(())
}

/// Intensity image from a PGM (scaled to `[0, 1]`) or a CSV grid.
pub fn read_image(path: &Path) -> Result<FloatImage> {
    if has_extension(path, "csv") {
        let (h, w, data) = read_grid::<f64>(path)?;
        return FloatImage::new(h, w, data);
    }
    let (h, w, maxval, samples) = read_pgm(path)?;
    let scale = f64::from(maxval);
    FloatImage::new(h, w, samples.into_iter().map(|v| f64::from(v) / scale).collect())
}

/// Real-valued grid as CSV.
pub fn write_float_grid(path: &Path, image: &FloatImage) -> Result<()> {
    write_grid(path, image.width, &image.data)
}

pub fn read_label_image(path: &Path) -> Result<LabelImage> {
    if has_extension(path, "csv") {
        let (h, w, labels) = read_grid::<u32>(path)?;
        return LabelImage::new(h, w, labels);
    }
    let (h, w, _, labels) = read_pgm(path)?;
    LabelImage::new(h, w, labels)
}

/// Label image as a 16-bit raw PGM, or as a CSV grid when the path ends in
/// `.csv`.
pub fn write_label_image(path: &Path, labels: &LabelImage) -> Result<()> {
    if has_extension(path, "csv") {
        return write_grid(path, labels.width, &labels.labels);
    }
    let pixels = labels
        .labels
        .iter()
        .map(|&l| {
            u16::try_from(l)
                .map_err(|_| Error::InvalidArgument(format!("label {l} does not fit a 16-bit PGM; use .csv")))
        })
        .collect::<Result<Vec<u16>>>()?;
    // The image crate's PNM encoder has no 16-bit grayscale path; the raw
    // format is a short header followed by big-endian samples.
    let mut writer = BufWriter::new(File::create(path)?);
    write!(writer, "P5\n{} {}\n65535\n", labels.width, labels.height)?;
    for p in pixels {
        writer.write_all(&p.to_be_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Weights with their lattice dimensions; the byte layout is bit-exact.
pub fn write_weights(path: &Path, graph: &LatticeGraph, weights: &EdgeWeights) -> Result<()> {
    if weights.len() != graph.edge_count() {
        return Err(Error::ShapeMismatch {
            what: "edge weights",
            expected: graph.edge_count(),
            found: weights.len(),
        });
    }
    let mut out = Vec::with_capacity(16 + 8 * weights.len());
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(graph.height() as u32).to_le_bytes());
    out.extend_from_slice(&(graph.width() as u32).to_le_bytes());
    for w in weights.values() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_weights(path: &Path) -> Result<(LatticeGraph, EdgeWeights)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != WEIGHTS_MAGIC {
        return Err(format_error(path, "not a weights file (bad magic)"));
    }
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let graph = LatticeGraph::new(height, width)?;
    let body = &bytes[16..];
    if body.len() != 8 * graph.edge_count() {
        return Err(format_error(
            path,
            format!(
                "{height}×{width} lattice needs {} weights, file holds {} bytes",
                graph.edge_count(),
                body.len()
            ),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let weights = EdgeWeights::new(values)?;
    Ok((graph, weights))
}

#[derive(Serialize, Deserialize)]
struct SeedRecord {
    row: usize,
    col: usize,
    label: usize,
}

/// Seeds in `row,col,label` CSV; positions are checked against the image.
pub fn read_seeds(path: &Path, height: usize, width: usize) -> Result<SeedSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut entries = Vec::new();
    for record in reader.deserialize() {
        let SeedRecord { row, col, label } = record.map_err(|e| csv_error(path, e))?;
        if row >= height || col >= width {
            return Err(Error::InvalidSeeds(format!(
                "seed at ({row}, {col}) lies outside the {height}×{width} image"
            )));
        }
        entries.push(Seed {
            vertex: row * width + col,
            label,
        });
    }
    SeedSet::new(entries)
}

pub fn write_seeds(path: &Path, seeds: &SeedSet, width: usize) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for s in seeds.entries() {
        writer
            .serialize(SeedRecord {
                row: s.vertex / width,
                col: s.vertex % width,
                label: s.label,
            })
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_assignments(path: &Path, z: &AssignmentMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = ["row".to_string(), "col".to_string()]
        .into_iter()
        .chain((0..z.label_count).map(|a| format!("p{a}")));
    writer.write_record(header).map_err(|e| csv_error(path, e))?;
    for v in 0..z.vertex_count() {
        let fields = [(v / z.width).to_string(), (v % z.width).to_string()]
            .into_iter()
            .chain(z.row(v).iter().map(|p| p.to_string()));
        writer.write_record(fields).map_err(|e| csv_error(path, e))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_assignments(path: &Path) -> Result<AssignmentMatrix> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let labels = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .len()
        .saturating_sub(2);
    let (mut height, mut width) = (0, 0);
    let mut probabilities = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse = |i: usize| -> Result<&str> { record.get(i).ok_or_else(|| format_error(path, "short row")) };
        let row: usize = parse(0)?.parse().map_err(|_| format_error(path, "bad row index"))?;
        let col: usize = parse(1)?.parse().map_err(|_| format_error(path, "bad column index"))?;
        height = height.max(row + 1);
        width = width.max(col + 1);
        for a in 0..labels {
            probabilities.push(
                parse(2 + a)?
                    .parse()
                    .map_err(|_| format_error(path, "bad probability"))?,
            );
        }
    }
    AssignmentMatrix::new(height, width, labels, probabilities)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, value).map_err(|e| format_error(path, e))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| format_error(path, e))
}
