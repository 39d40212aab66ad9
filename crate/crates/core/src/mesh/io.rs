//! Plain-text mesh format.
//!
//! ```text
//! quadmesh 1
//! nodes N
//! x y            (N lines)
//! cells C
//! i0 i1 i2 i3    (C lines, zero-based, counter-clockwise)
//! facets F
//! cell edge marker   (F lines, marker = inflow | wall | outflow)
//! ```

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{Facet, Marker, Mesh};
use crate::error::{Error, Result};

pub fn write_mesh_to(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("quadmesh 1\n");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
    }
    let _ = writeln!(s, "cells {}", mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "facets {}", mesh.facets.len());
    for f in &mesh.facets {
        let _ = writeln!(s, "{} {} {}", f.cell, f.edge, f.marker.name());
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(write_mesh_to(mesh).as_bytes())?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok((i + 1, t.split_whitespace().collect()));
            }
        }
        Err(Error::Parse { line: self.last + 1, message: "unexpected end of file".into() })
    }

    fn header(&mut self, word: &str) -> Result<usize> {
        let (line, toks) = self.next()?;
        if toks.len() != 2 || toks[0] != word {
            return Err(Error::Parse { line, message: format!("expected \"{word} <count>\"") });
        }
        number(line, toks[1])
    }
}

fn number<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parse { line, message: format!("cannot parse \"{tok}\"") })
}

fn expect_len(line: usize, toks: &[&str], n: usize) -> Result<()> {
    if toks.len() != n {
        return Err(Error::Parse { line, message: format!("expected {n} fields, found {}", toks.len()) });
    }
    Ok(())
}

/// Parses the text format and validates the result.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (line, toks) = lines.next()?;
    if toks != ["quadmesh", "1"] {
        return Err(Error::Parse { line, message: "expected header \"quadmesh 1\"".into() });
    }
    let n = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, toks) = lines.next()?;
        expect_len(line, &toks, 2)?;
        let p: [f64; 2] = [number(line, toks[0])?, number(line, toks[1])?];
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse { line, message: "non-finite coordinate".into() });
        }
        nodes.push(p);
    }
    let c = lines.header("cells")?;
    let mut cells = Vec::with_capacity(c);
    for _ in 0..c {
        let (line, toks) = lines.next()?;
        expect_len(line, &toks, 4)?;
        let mut cell = [0usize; 4];
        for k in 0..4 {
            cell[k] = number(line, toks[k])?;
            if cell[k] >= n {
                return Err(Error::Parse {
                    line,
                    message: format!("node index {} out of range (nodes: {n})", cell[k]),
                });
            }
        }
        cells.push(cell);
    }
    let f = lines.header("facets")?;
    let mut facets = Vec::with_capacity(f);
    for _ in 0..f {
        let (line, toks) = lines.next()?;
        expect_len(line, &toks, 3)?;
        let cell: usize = number(line, toks[0])?;
        let edge: usize = number(line, toks[1])?;
        if cell >= c || edge > 3 {
            return Err(Error::Parse { line, message: format!("facet ({cell}, {edge}) does not exist") });
        }
        let marker = Marker::parse(toks[2])
            .ok_or_else(|| Error::Parse { line, message: format!("unknown marker \"{}\"", toks[2]) })?;
        facets.push(Facet { cell, edge, marker });
    }
    let mesh = Mesh { nodes, cells, facets };
    mesh.validate()?;
    Ok(mesh)
}
