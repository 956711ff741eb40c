//! Structured rectangular grids and the fields sampled on them.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Func2;

/// Node layout of a uniform rectangular grid. Nodes include both ends of each
/// extent, so `hx = (x1 - x0) / (nx - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Validation(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
        }
        if !(x.1 > x.0) || !(y.1 > y.0) || !x.0.is_finite() || !y.1.is_finite() {
            return Err(Error::Validation(format!("degenerate grid extent {x:?} x {y:?}")));
        }
        Ok(Self { nx, ny, x, y })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        (self.x.1 - self.x.0) / (self.nx - 1) as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        (self.y.1 - self.y.0) / (self.ny - 1) as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x.1
        } else {
            self.x.0 + i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn yj(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.y.1
        } else {
            self.y.0 + j as f64 * self.hy()
        }
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [self.xi(i), self.yj(j)]
    }

    /// Fractional node coordinates of a point, snapped to integers when within
    /// round-off of a node.
    pub fn locate(&self, p: [f64; 2]) -> (f64, f64) {
        let snap = |t: f64| {
            let r = t.round();
            if (t - r).abs() < 1e-9 {
                r
            } else {
                t
            }
        };
        (snap((p[0] - self.x.0) / self.hx()), snap((p[1] - self.y.0) / self.hy()))
    }
}

/// Scalar values on a [`GridSpec`], row-major in `x` (index `j * nx + i`),
/// with an optional validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

/// Anything that can be evaluated at a point of the plane.
pub trait PlaneField {
    fn value_at(&self, p: [f64; 2]) -> Option<f64>;
}

impl PlaneField for Func2 {
    fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        Some(self.eval(p))
    }
}

impl<F: Fn([f64; 2]) -> f64> PlaneField for F {
    fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        Some(self(p))
    }
}

impl GridField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            mask: None,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.coord(i, j)));
            }
        }
        Self {
            grid,
            values,
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.values.len());
        self.mask = Some(mask);
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[self.grid.index(i, j)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            mask: self.mask.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.mask.as_ref().map_or(true, |m| m[*k]))
            .fold(0.0, |acc, (_, v)| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(k, v)| v.is_finite() || self.mask.as_ref().map_or(false, |m| !m[k]))
    }

    /// Tensor-product cubic Lagrange interpolation. Exact for polynomials of
    /// degree three in each variable; stencils shift inward near the edges.
    /// Returns `None` outside the grid hull (up to `slack` cells).
    pub fn interpolate_with_slack(&self, p: [f64; 2], slack: f64) -> Option<f64> {
        let g = &self.grid;
        let (tx, ty) = g.locate(p);
        let maxx = (g.nx - 1) as f64;
        let maxy = (g.ny - 1) as f64;
        if !(tx >= -slack && tx <= maxx + slack && ty >= -slack && ty <= maxy + slack) {
            return None;
        }
        let (ix, wx) = lagrange_weights(tx, g.nx);
        let (iy, wy) = lagrange_weights(ty, g.ny);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            if *wyb == 0.0 {
                continue;
            }
            let row = (iy + b) * g.nx;
            let mut s = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                if *wxa != 0.0 {
                    s += wxa * self.values[row + ix + a];
                }
            }
            acc += wyb * s;
        }
        Some(acc)
    }

    pub fn interpolate(&self, p: [f64; 2]) -> Option<f64> {
        self.interpolate_with_slack(p, 1e-9)
    }

    /// Bilinear interpolation inside the hull.
    pub fn bilinear(&self, p: [f64; 2]) -> Option<f64> {
        let g = &self.grid;
        let (tx, ty) = g.locate(p);
        if !(tx >= 0.0 && tx <= (g.nx - 1) as f64 && ty >= 0.0 && ty <= (g.ny - 1) as f64) {
            return None;
        }
        let i = (tx.floor() as usize).min(g.nx - 2);
        let j = (ty.floor() as usize).min(g.ny - 2);
        let fx = tx - i as f64;
        let fy = ty - j as f64;
        let v00 = self.get(i, j);
        let v10 = self.get(i + 1, j);
        let v01 = self.get(i, j + 1);
        let v11 = self.get(i + 1, j + 1);
        Some((1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11))
    }

    pub fn write_to(&self, path: &Path, format: FieldFormat) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut out, format)?;
        out.flush()?;
        Ok(())
    }

    /// Writes the grid-field format: a text header followed by a row-major
    /// float64 payload (text or little-endian binary), then the mask.
    pub fn write(&self, out: &mut impl Write, format: FieldFormat) -> Result<()> {
        let g = &self.grid;
        writeln!(out, "gridfield 1")?;
        writeln!(out, "nx {}", g.nx)?;
        writeln!(out, "ny {}", g.ny)?;
        writeln!(out, "x {} {}", g.x.0, g.x.1)?;
        writeln!(out, "y {} {}", g.y.0, g.y.1)?;
        writeln!(out, "mask {}", u8::from(self.mask.is_some()))?;
        writeln!(out, "format {}", format.name())?;
        writeln!(out, "data")?;
        match format {
            FieldFormat::Text => {
                for j in 0..g.ny {
                    let row: Vec<String> = (0..g.nx).map(|i| format!("{:e}", self.get(i, j))).collect();
                    writeln!(out, "{}", row.join(" "))?;
                }
                if let Some(mask) = &self.mask {
                    for j in 0..g.ny {
                        let row: String = (0..g.nx)
                            .map(|i| if mask[g.index(i, j)] { '1' } else { '0' })
                            .collect();
                        writeln!(out, "{row}")?;
                    }
                }
            }
            FieldFormat::Binary => {
                for v in &self.values {
                    out.write_all(&v.to_le_bytes())?;
                }
                if let Some(mask) = &self.mask {
                    let bytes: Vec<u8> = mask.iter().map(|&m| u8::from(m)).collect();
                    out.write_all(&bytes)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|_| Error::Missing(path.display().to_string()))?;
        Self::read(&mut BufReader::new(file))
    }

    pub fn read(input: &mut impl BufRead) -> Result<Self> {
        let mut header = Vec::new();
        loop {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::Format("header ended before `data`".into()));
            }
            let line = line.trim().to_string();
            if line == "data" {
                break;
            }
            if !line.is_empty() {
                header.push(line);
            }
        }
        let field = |key: &str| -> Result<Vec<String>> {
            header
                .iter()
                .find_map(|l| {
                    let mut parts = l.split_whitespace();
                    (parts.next() == Some(key)).then(|| parts.map(str::to_string).collect())
                })
                .ok_or_else(|| Error::Format(format!("missing header key `{key}`")))
        };
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number `{s}`"))) };
        let magic = field("gridfield")?;
        if magic.first().map(String::as_str) != Some("1") {
            return Err(Error::Format("unsupported gridfield version".into()));
        }
        let nx: usize = field("nx")?[0].parse().map_err(|_| Error::Format("bad nx".into()))?;
        let ny: usize = field("ny")?[0].parse().map_err(|_| Error::Format("bad ny".into()))?;
        let x = field("x")?;
        let y = field("y")?;
        if x.len() != 2 || y.len() != 2 {
            return Err(Error::Format("extent needs two numbers".into()));
        }
        let grid = GridSpec::new(nx, ny, (num(&x[0])?, num(&x[1])?), (num(&y[0])?, num(&y[1])?))
            .map_err(|e| Error::Format(e.to_string()))?;
        let has_mask = field("mask")?[0] == "1";
        let format = FieldFormat::from_name(&field("format")?[0])?;
        let n = grid.len();
        let (values, mask) = match format {
            FieldFormat::Text => {
                let mut rest = String::new();
                input.read_to_string(&mut rest)?;
                let mut tokens = rest.split_whitespace();
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    let t = tokens.next().ok_or_else(|| Error::Format("payload too short".into()))?;
                    values.push(num(t)?);
                }
                let mask = if has_mask {
                    let mut m = Vec::with_capacity(n);
                    for t in tokens.by_ref() {
                        for c in t.chars() {
                            m.push(match c {
                                '1' => true,
                                '0' => false,
                                _ => return Err(Error::Format("bad mask symbol".into())),
                            });
                        }
                    }
                    if m.len() != n {
                        return Err(Error::Format("mask length mismatch".into()));
                    }
                    Some(m)
                } else {
                    None
                };
                (values, mask)
            }
            FieldFormat::Binary => {
                let mut buf = vec![0u8; n * 8];
                input
                    .read_exact(&mut buf)
                    .map_err(|_| Error::Format("payload too short".into()))?;
                let values = buf
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                let mask = if has_mask {
                    let mut m = vec![0u8; n];
                    input
                        .read_exact(&mut m)
                        .map_err(|_| Error::Format("mask too short".into()))?;
                    Some(m.into_iter().map(|b| b != 0).collect())
                } else {
                    None
                };
                (values, mask)
            }
        };
        Ok(Self { grid, values, mask })
    }
}

impl PlaneField for GridField {
    fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        self.interpolate(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Text,
    Binary,
}

impl FieldFormat {
    pub fn name(self) -> &'static str {
        match self {
            FieldFormat::Text => "text",
            FieldFormat::Binary => "binary",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(FieldFormat::Text),
            "binary" => Ok(FieldFormat::Binary),
            other => Err(Error::Format(format!("unknown payload format `{other}`"))),
        }
    }
}

/// Four-point Lagrange weights at fractional position `t` on `n` nodes.
fn lagrange_weights(t: f64, n: usize) -> (usize, [f64; 4]) {
    if n < 4 {
        // Linear fallback on tiny grids.
        let i = (t.floor().max(0.0) as usize).min(n - 2);
        let f = t - i as f64;
        return (i, [1.0 - f, f, 0.0, 0.0]);
    }
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let r = t - base as f64;
    if r == r.round() && r >= 0.0 && r <= 3.0 {
        let mut w = [0.0; 4];
        w[r as usize] = 1.0;
        return (base, w);
    }
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        let mut num = 1.0;
        let mut den = 1.0;
        for b in 0..4 {
            if a != b {
                num *= r - b as f64;
                den *= a as f64 - b as f64;
            }
        }
        *wa = num / den;
    }
    (base, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(9, 7, (-1.0, 1.0), (0.0, 1.5)).unwrap()
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let f = |p: [f64; 2]| p[0].powi(3) - 2.0 * p[0] * p[1] * p[1] + p[1].powi(3) + 0.5;
        let field = GridField::from_fn(grid(), f);
        for &p in &[[0.13, 0.77], [-0.99, 1.49], [0.999, 0.01], [0.0, 0.75]] {
            let v = field.interpolate(p).unwrap();
            assert!((v - f(p)).abs() < 1e-12, "{p:?}: {v} vs {}", f(p));
        }
        assert!(field.interpolate([1.2, 0.3]).is_none());
    }

    #[test]
    fn text_and_binary_files_round_trip() {
        let mut field = GridField::from_fn(grid(), |p| (p[0] * 3.1).sin() / (1.0 + p[1]));
        field.mask = Some((0..field.values.len()).map(|k| k % 3 != 0).collect());
        for format in [FieldFormat::Text, FieldFormat::Binary] {
            let mut buf = Vec::new();
            field.write(&mut buf, format).unwrap();
            let back = GridField::read(&mut std::io::Cursor::new(buf)).unwrap();
            assert_eq!(back, field);
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let field = GridField::from_fn(grid(), |p| p[0]);
        let mut buf = Vec::new();
        field.write(&mut buf, FieldFormat::Text).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(GridField::read(&mut std::io::Cursor::new(buf)).is_err());
    }
}
