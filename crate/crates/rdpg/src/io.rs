//! Readers and writers for the file formats the command-line tools speak:
//! whitespace edge lists, dense matrix CSV, embedding CSV with a JSON
//! sidecar, and the CSV report tables. All numeric output uses 17
//! significant digits so values round-trip exactly.

use std::io::{BufRead, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingWarning};
use crate::error::{Error, Result};
use crate::model::{Adjacency, EdgeStats, StorageKind};

/// Formats a float with 17 significant digits.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug)]
pub struct EdgeListGraph {
    pub adjacency: Adjacency,
    pub stats: EdgeStats,
}

/// Reads a whitespace-separated edge list: one `u v` pair per line, `#`
/// starts a comment, blank lines skipped. Duplicate edges are collapsed and
/// self-loops dropped (counted in the returned stats).
pub fn read_edge_list<R: BufRead>(
    reader: R,
    one_indexed: bool,
    storage: StorageKind,
) -> Result<EdgeListGraph> {
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut max_vertex = 0usize;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let content = match line.split('#').next() {
            Some(c) => c.trim(),
            None => "",
        };
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let parse = |tok: Option<&str>, line_no: usize| -> Result<usize> {
            let tok = tok.ok_or(Error::Parse {
                line: line_no + 1,
                message: "expected two vertex ids".into(),
            })?;
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no + 1,
                message: format!("invalid vertex id '{tok}'"),
            })
        };
        let mut u = parse(parts.next(), line_no)?;
        let mut v = parse(parts.next(), line_no)?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: line_no + 1,
                message: "expected exactly two vertex ids".into(),
            });
        }
        if one_indexed {
            if u == 0 || v == 0 {
                return Err(Error::Parse {
                    line: line_no + 1,
                    message: "vertex id 0 in a one-indexed edge list".into(),
                });
            }
            u -= 1;
            v -= 1;
        }
        max_vertex = max_vertex.max(u).max(v);
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::InvalidInput("edge list is empty".into()));
    }
    let (adjacency, stats) = Adjacency::from_edges(max_vertex + 1, edges, storage)?;
    Ok(EdgeListGraph { adjacency, stats })
}

/// Reads a dense symmetric matrix from headerless CSV.
pub fn read_matrix_csv<R: BufRead>(reader: R) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no + 1,
                    message: format!("invalid number '{}'", tok.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: line_no + 1,
                    message: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("matrix CSV is empty".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let mut m = Array2::zeros((r, c));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

/// Writes a matrix as headerless CSV with full-precision values.
pub fn write_matrix_csv<W: Write>(writer: &mut W, m: &Array2<f64>) -> Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_full(v)).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

/// JSON sidecar accompanying an embedding CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub method: String,
    pub d: usize,
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

impl EmbeddingSidecar {
    pub fn from_embedding(e: &Embedding) -> Self {
        EmbeddingSidecar {
            method: e.method.to_string(),
            d: e.d,
            n: e.n(),
            eigenvalues: e.eigenvalues.clone(),
            warnings: e.warnings.iter().map(describe_warning).collect(),
        }
    }
}

fn describe_warning(w: &EmbeddingWarning) -> String {
    match w {
        EmbeddingWarning::EigenvalueTieAtCutoff => "eigenvalue_tie_at_cutoff".into(),
        EmbeddingWarning::NegativeEigenvalueInTopD => "negative_eigenvalue_in_top_d".into(),
        EmbeddingWarning::ClippedProbabilities { count } => {
            format!("clipped_probabilities:{count}")
        }
    }
}

/// Writes the embedding estimate as CSV and returns the sidecar JSON text.
pub fn write_embedding<W: Write>(writer: &mut W, embedding: &Embedding) -> Result<String> {
    write_matrix_csv(writer, &embedding.estimate)?;
    let sidecar = EmbeddingSidecar::from_embedding(embedding);
    Ok(serde_json::to_string_pretty(&sidecar)?)
}

/// Writes confidence intervals as CSV: vertex, per-coordinate estimate and
/// bounds.
pub fn write_intervals_csv<W: Write>(
    writer: &mut W,
    estimate: &Array2<f64>,
    intervals: &[Vec<(f64, f64)>],
) -> Result<()> {
    let d = estimate.ncols();
    let mut header = vec!["vertex".to_string()];
    for j in 0..d {
        header.push(format!("estimate_{j}"));
        header.push(format!("lo_{j}"));
        header.push(format!("hi_{j}"));
    }
    writeln!(writer, "{}", header.join(","))?;
    for (i, row) in intervals.iter().enumerate() {
        let mut fields = vec![i.to_string()];
        for (j, &(lo, hi)) in row.iter().enumerate() {
            fields.push(format_full(estimate[[i, j]]));
            fields.push(format_full(lo));
            fields.push(format_full(hi));
        }
        writeln!(writer, "{}", fields.join(","))?;
    }
    Ok(())
}
