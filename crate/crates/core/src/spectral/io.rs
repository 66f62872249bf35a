//! Coefficient CSV import/export.
//!
//! Layout:
//!
//! ```text
//! n,L
//! 3,4
//! l,value
//! 0,1.0000000000000000e0
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips `f64`
//! exactly.

use super::ZonalCoefficients;
use crate::error::{CoreError, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub fn write_coeffs_to(w: &mut impl Write, c: &ZonalCoefficients) -> Result<()> {
    writeln!(w, "n,L")?;
    writeln!(w, "{},{}", c.dim(), c.l_max())?;
    writeln!(w, "l,value")?;
    for (l, v) in c.coeffs().iter().enumerate() {
        writeln!(w, "{},{:.16e}", l, v)?;
    }
    Ok(())
}

pub fn write_coeffs(path: impl AsRef<Path>, c: &ZonalCoefficients) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_coeffs_to(&mut f, c)
}

pub fn read_coeffs_from(r: impl Read) -> Result<ZonalCoefficients> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();

    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(s))) => Ok((i + 1, s.trim().to_string())),
            Some((i, Err(e))) => Err(CoreError::Parse {
                line: i + 1,
                detail: e.to_string(),
            }),
            None => Err(CoreError::Parse {
                line: 0,
                detail: format!("unexpected end of file, expected {expect}"),
            }),
        }
    };

    let (line, header) = next_line("header 'n,L'")?;
    if header != "n,L" {
        return Err(CoreError::Parse {
            line,
            detail: format!("expected header 'n,L', got '{header}'"),
        });
    }
    let (line, dims) = next_line("dimension row")?;
    let mut parts = dims.split(',');
    let n: usize = parse_field(parts.next(), line, "n")?;
    let l_max: usize = parse_field(parts.next(), line, "L")?;
    let (line, cols) = next_line("header 'l,value'")?;
    if cols != "l,value" {
        return Err(CoreError::Parse {
            line,
            detail: format!("expected header 'l,value', got '{cols}'"),
        });
    }

    let mut coeffs = vec![0.0; l_max + 1];
    let mut seen = vec![false; l_max + 1];
    for (i, row) in lines {
        let line = i + 1;
        let row = row.map_err(|e| CoreError::Parse {
            line,
            detail: e.to_string(),
        })?;
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let mut parts = row.split(',');
        let l: usize = parse_field(parts.next(), line, "l")?;
        let v: f64 = parse_field(parts.next(), line, "value")?;
        if l > l_max {
            return Err(CoreError::Parse {
                line,
                detail: format!("degree {l} exceeds declared L = {l_max}"),
            });
        }
        coeffs[l] = v;
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(CoreError::Parse {
            line: 0,
            detail: format!("missing coefficient row for degree {missing}"),
        });
    }
    ZonalCoefficients::new(n, coeffs)
}

pub fn read_coeffs(path: impl AsRef<Path>) -> Result<ZonalCoefficients> {
    read_coeffs_from(std::fs::File::open(path)?)
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    line: usize,
    name: &str,
) -> Result<T> {
    field
        .ok_or_else(|| CoreError::Parse {
            line,
            detail: format!("missing field '{name}'"),
        })?
        .trim()
        .parse()
        .map_err(|_| CoreError::Parse {
            line,
            detail: format!("cannot parse field '{name}'"),
        })
}
