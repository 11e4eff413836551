//! Embedding matrices and their on-disk format.
//!
//! Every trainer in the workspace returns an [`EmbeddingMatrix`]: one row of
//! d reals per node plus metadata recording which method and configuration
//! produced it and a fingerprint of the source graph. Files use a one-line
//! "N d" header followed by one "node_id v1 .. vd" row per node.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("non-finite value at row {0}")]
    NonFinite(usize),
}

/// Row-major N x dim matrix of node vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    n: usize,
    dim: usize,
    data: Vec<f64>,
    /// Which trainer produced this ("deepwalk", "node2vec", "gcn", ...).
    pub method: String,
    /// JSON of the training configuration, for result records.
    pub config_json: String,
    pub graph_fingerprint: u64,
}

impl EmbeddingMatrix {
    pub fn zeros(n: usize, dim: usize) -> EmbeddingMatrix {
        EmbeddingMatrix {
            n,
            dim,
            data: vec![0.0; n * dim],
            method: String::new(),
            config_json: String::new(),
            graph_fingerprint: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn row_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn dot(&self, u: usize, v: usize) -> f64 {
        self.row(u).iter().zip(self.row(v)).map(|(a, b)| a * b).sum()
    }

    pub fn cosine(&self, u: usize, v: usize) -> f64 {
        let (mut uu, mut vv, mut uv) = (0.0, 0.0, 0.0);
        for (a, b) in self.row(u).iter().zip(self.row(v)) {
            uu += a * a;
            vv += b * b;
            uv += a * b;
        }
        if uu == 0.0 || vv == 0.0 {
            return 0.0;
        }
        uv / (uu * vv).sqrt()
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.n)
            .map(|u| self.row(u).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Write "N d" then one row per node, ids taken from the graph's labels.
    pub fn write_to(&self, g: &Graph, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        assert_eq!(g.num_nodes(), self.n, "graph and embedding disagree on N");
        let path = path.as_ref();
        let io_err = |source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
        writeln!(f, "{} {}", self.n, self.dim).map_err(io_err)?;
        for u in 0..self.n {
            write!(f, "{}", g.label(u as u32)).map_err(io_err)?;
            for x in self.row(u) {
                write!(f, " {x}").map_err(io_err)?;
            }
            writeln!(f).map_err(io_err)?;
        }
        f.flush().map_err(io_err)
    }
}

/// Read an embedding file back: the matrix in row order plus each row's id.
pub fn read_embedding(path: impl AsRef<Path>) -> Result<(EmbeddingMatrix, Vec<String>), EmbeddingError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(EmbeddingError::Parse {
        line: 1,
        message: "empty file".to_string(),
    })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(EmbeddingError::Parse {
            line: 1,
            message: format!("header must be 'N d', got {header:?}"),
        });
    }
    let parse_count = |s: &str, line: usize| {
        s.parse::<usize>().map_err(|e| EmbeddingError::Parse {
            line,
            message: format!("{e}: {s:?}"),
        })
    };
    let n = parse_count(parts[0], 1)?;
    let dim = parse_count(parts[1], 1)?;
    let mut emb = EmbeddingMatrix::zeros(n, dim);
    let mut ids = Vec::with_capacity(n);
    let mut rows = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if rows >= n {
            return Err(EmbeddingError::RowCount {
                expected: n,
                found: rows + 1,
            });
        }
        let mut toks = line.split_whitespace();
        let id = toks.next().unwrap().to_string();
        let row = emb.row_mut(rows);
        let mut filled = 0usize;
        for tok in toks {
            if filled >= dim {
                return Err(EmbeddingError::Parse {
                    line: idx + 1,
                    message: format!("more than {dim} values"),
                });
            }
            row[filled] = tok.parse::<f64>().map_err(|e| EmbeddingError::Parse {
                line: idx + 1,
                message: format!("{e}: {tok:?}"),
            })?;
            filled += 1;
        }
        if filled != dim {
            return Err(EmbeddingError::Parse {
                line: idx + 1,
                message: format!("expected {dim} values, got {filled}"),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(rows));
        }
        ids.push(id);
        rows += 1;
    }
    if rows != n {
        return Err(EmbeddingError::RowCount {
            expected: n,
            found: rows,
        });
    }
    Ok((emb, ids))
}
