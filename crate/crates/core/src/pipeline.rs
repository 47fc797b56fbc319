//! Embedding-to-template pipeline: sparse ternary random projection followed by
//! sign binarization.
//!
//! Matrix entries are drawn from SplitMix64 in column-major order (all rows of
//! column 0, then column 1, ...). One `u64` per entry: the entry is nonzero iff
//! the top six bits are zero (probability 1/64), and then it is `+1` iff bit 57
//! is zero, `-1` otherwise.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::template::Template;

pub const EMBEDDING_DIM: usize = 4096;
pub const TEMPLATE_BITS: usize = 512;
pub const DENSITY: f64 = 1.0 / 64.0;
pub const PRNG_NAME: &str = "splitmix64";

/// SplitMix64 (Steele, Lea and Flood), the generator pinned by the matrix file format.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub object_id: String,
    pub view_id: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    seed: Option<u64>,
    /// Per output column: (input row, sign).
    columns: Vec<Vec<(u32, i8)>>,
}

impl ProjectionMatrix {
    /// The standard 4096 × 512 matrix for `seed`.
    pub fn generate(seed: u64) -> Self {
        ProjectionMatrix::generate_with_shape(EMBEDDING_DIM, TEMPLATE_BITS, seed)
    }

    pub fn generate_with_shape(rows: usize, cols: usize, seed: u64) -> Self {
        let mut prng = SplitMix64::new(seed);
        let columns = (0..cols)
            .map(|_| {
                (0..rows)
                    .filter_map(|row| {
                        let x = prng.next_u64();
                        (x >> 58 == 0).then_some((row as u32, if (x >> 57) & 1 == 0 { 1 } else { -1 }))
                    })
                    .collect()
            })
            .collect();
        ProjectionMatrix {
            rows,
            cols,
            seed: Some(seed),
            columns,
        }
    }

    /// Builds a matrix from explicit `(row, col, sign)` entries.
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize, i8)]) -> Result<Self> {
        let mut columns = vec![Vec::new(); cols];
        for &(row, col, sign) in entries {
            if row >= rows || col >= cols || !(sign == 1 || sign == -1) {
                return Err(Error::Malformed(format!("bad matrix entry ({row}, {col}, {sign})")));
            }
            columns[col].push((row as u32, sign));
        }
        for col in &mut columns {
            col.sort_unstable();
            if col.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Malformed("duplicate matrix entry".into()));
            }
        }
        Ok(ProjectionMatrix {
            rows,
            cols,
            seed: None,
            columns,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(c, col)| col.iter().map(move |&(r, s)| (r as usize, c, s)))
    }

    pub fn nonzeros(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// `Mᵀ · values`.
    pub fn project(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(self
            .columns
            .iter()
            .map(|col| {
                col.iter()
                    .map(|&(r, s)| if s > 0 { values[r as usize] } else { -values[r as usize] })
                    .sum()
            })
            .collect())
    }

    /// Writes the matrix file. With `with_entries = false` only the seed is
    /// stored and readers regenerate the entries.
    pub fn to_json(&self, with_entries: bool) -> Result<String> {
        if !with_entries && self.seed.is_none() {
            return Err(Error::Malformed("a matrix without a seed must store its entries".into()));
        }
        let file = MatrixFile {
            rows: self.rows,
            cols: self.cols,
            density: DENSITY,
            seed: self.seed,
            prng: PRNG_NAME.into(),
            entries: with_entries.then(|| self.entries().collect()),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MatrixFile = serde_json::from_str(s)?;
        match (f.entries, f.seed) {
            (Some(entries), seed) => {
                let mut m = ProjectionMatrix::from_entries(f.rows, f.cols, &entries)?;
                m.seed = seed;
                Ok(m)
            }
            (None, Some(seed)) => {
                if f.prng != PRNG_NAME {
                    return Err(Error::Malformed(format!("unknown prng {:?}", f.prng)));
                }
                Ok(ProjectionMatrix::generate_with_shape(f.rows, f.cols, seed))
            }
            (None, None) => Err(Error::Malformed("matrix file has neither entries nor seed".into())),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, with_entries: bool) -> Result<()> {
        std::fs::write(path, self.to_json(with_entries)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ProjectionMatrix::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    prng: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<(usize, usize, i8)>>,
}

/// Bit `i` is 1 iff the i-th projection is strictly positive.
pub fn binarize(embedding: &Embedding, matrix: &ProjectionMatrix) -> Result<Template> {
    binarize_values(&embedding.values, matrix)
}

pub fn binarize_values(values: &[f64], matrix: &ProjectionMatrix) -> Result<Template> {
    let projected = matrix.project(values)?;
    Ok(Template::from_bits(&projected.iter().map(|&v| v > 0.0).collect::<Vec<_>>()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledTemplate {
    pub object_id: String,
    pub view_id: String,
    pub template: Template,
}

pub fn binarize_all(embeddings: &[Embedding], matrix: &ProjectionMatrix) -> Result<Vec<LabeledTemplate>> {
    embeddings
        .iter()
        .map(|e| {
            Ok(LabeledTemplate {
                object_id: e.object_id.clone(),
                view_id: e.view_id.clone(),
                template: binarize(e, matrix)?,
            })
        })
        .collect()
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

/// Reads `object_id,view_id,v0,…,v{d-1}`. Lines starting with `#` are skipped.
pub fn read_embeddings<R: Read>(input: R) -> Result<Vec<Embedding>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "object_id" || &headers[1] != "view_id" {
        return Err(Error::Malformed("embeddings header must start with object_id,view_id".into()));
    }
    for (i, h) in headers.iter().skip(2).enumerate() {
        if h != format!("v{i}") {
            return Err(Error::Malformed(format!("embeddings column {} should be v{i}, found {h:?}", i + 2)));
        }
    }
    let dim = headers.len() - 2;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 2 {
            return Err(Error::Malformed(format!("embedding row {} has {} fields", line + 1, rec.len())));
        }
        let values = rec
            .iter()
            .skip(2)
            .enumerate()
            .map(|(j, v)| {
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::Malformed(format!("row {}, v{j}: {v:?} is not a number", line + 1)))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::NonFinite(j))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Embedding {
            object_id: rec[0].to_string(),
            view_id: rec[1].to_string(),
            values,
        });
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>> {
    read_embeddings(std::fs::File::open(path)?)
}

pub fn write_embeddings<W: Write>(out: W, embeddings: &[Embedding]) -> Result<()> {
    let dim = embeddings.first().map_or(0, |e| e.values.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["object_id".to_string(), "view_id".to_string()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for e in embeddings {
        let mut row = vec![e.object_id.clone(), e.view_id.clone()];
        row.extend(e.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `object_id,view_id,template_hex` for templates of `n` bits.
pub fn read_templates<R: Read>(input: R, n: usize) -> Result<Vec<LabeledTemplate>> {
    let mut rdr = csv_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["object_id", "view_id", "template_hex"] {
        return Err(Error::Malformed("templates header must be object_id,view_id,template_hex".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(LabeledTemplate {
                object_id: rec[0].to_string(),
                view_id: rec[1].to_string(),
                template: Template::from_hex(&rec[2], n)?,
            })
        })
        .collect()
}

pub fn load_templates(path: impl AsRef<Path>, n: usize) -> Result<Vec<LabeledTemplate>> {
    read_templates(std::fs::File::open(path)?, n)
}

pub fn write_templates<W: Write>(out: W, templates: &[LabeledTemplate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["object_id", "view_id", "template_hex"])?;
    for t in templates {
        w.write_record([t.object_id.as_str(), t.view_id.as_str(), t.template.to_hex().as_str()])?;
    }
    w.flush()?;
    Ok(())
}
