//! Binary cell arrays, the flattening convention `z = x + N*y`, and the
//! line-pattern generator.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Array shape as qubit counts: `N = 2^n` columns, `M = 2^m` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n: u32,
    pub m: u32,
}

impl Dims {
    pub fn new(n: u32, m: u32) -> Self {
        Self { n, m }
    }

    /// Smallest power-of-two shape holding `width x height` cells.
    pub fn covering(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!("empty shape {width}x{height}")));
        }
        Ok(Self {
            n: width.next_power_of_two().trailing_zeros(),
            m: height.next_power_of_two().trailing_zeros(),
        })
    }

    pub fn width(&self) -> usize {
        1 << self.n
    }

    pub fn height(&self) -> usize {
        1 << self.m
    }

    pub fn qubits(&self) -> u32 {
        self.n + self.m
    }

    pub fn len(&self) -> usize {
        1 << (self.n + self.m)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn transposed(&self) -> Self {
        Self {
            n: self.m,
            m: self.n,
        }
    }

    pub fn flatten(&self, x: usize, y: usize) -> Result<usize> {
        if x >= self.width() || y >= self.height() {
            return Err(Error::OutOfRange {
                x,
                y,
                width: self.width(),
                height: self.height(),
            });
        }
        Ok(x + self.width() * y)
    }

    pub fn unflatten(&self, z: usize) -> Result<(usize, usize)> {
        if z >= self.len() {
            return Err(Error::IndexOutOfRange { z, len: self.len() });
        }
        Ok((z % self.width(), z / self.width()))
    }
}

/// Axis-aligned rectangle `(x0, y0, width, height)` in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn whole(dims: Dims) -> Self {
        Self::new(0, 0, dims.width(), dims.height())
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.x0 >= self.x0
            && other.y0 >= self.y0
            && other.x0 + other.width <= self.x0 + self.width
            && other.y0 + other.height <= self.y0 + self.height
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }

    /// Fraction of the array covered, `chi = w*h/S`.
    pub fn chi(&self, dims: Dims) -> f64 {
        self.area() as f64 / dims.len() as f64
    }

    pub fn fits(&self, dims: Dims) -> bool {
        self.width > 0
            && self.height > 0
            && self.x0 + self.width <= dims.width()
            && self.y0 + self.height <= dims.height()
    }

    /// Splits into halves along every axis longer than one cell.
    pub fn quadrants(&self) -> Vec<Region> {
        let xs: Vec<(usize, usize)> = if self.width > 1 {
            let h = self.width / 2;
            vec![(self.x0, h), (self.x0 + h, self.width - h)]
        } else {
            vec![(self.x0, 1)]
        };
        let ys: Vec<(usize, usize)> = if self.height > 1 {
            let h = self.height / 2;
            vec![(self.y0, h), (self.y0 + h, self.height - h)]
        } else {
            vec![(self.y0, 1)]
        };
        let mut out = Vec::with_capacity(4);
        for &(y0, h) in &ys {
            for &(x0, w) in &xs {
                out.push(Region::new(x0, y0, w, h));
            }
        }
        out
    }
}

/// N x M binary array, white = `true`, stored row-major by `z = x + N*y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellGrid {
    dims: Dims,
    cells: Vec<bool>,
    whites: usize,
}

impl CellGrid {
    pub fn new(dims: Dims, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != dims.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} cells for {}x{}, got {}",
                dims.len(),
                dims.width(),
                dims.height(),
                cells.len()
            )));
        }
        let whites = cells.iter().filter(|&&c| c).count();
        Ok(Self {
            dims,
            cells,
            whites,
        })
    }

    pub fn filled(dims: Dims, white: bool) -> Self {
        Self {
            dims,
            cells: vec![white; dims.len()],
            whites: if white { dims.len() } else { 0 },
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let w = dims.width();
        let cells: Vec<bool> = (0..dims.len()).map(|z| f(z % w, z / w)).collect();
        let whites = cells.iter().filter(|&&c| c).count();
        Self {
            dims,
            cells,
            whites,
        }
    }

    pub fn from_points(dims: Dims, points: &[usize]) -> Result<Self> {
        let mut cells = vec![false; dims.len()];
        for &z in points {
            if z >= dims.len() {
                return Err(Error::IndexOutOfRange { z, len: dims.len() });
            }
            cells[z] = true;
        }
        Self::new(dims, cells)
    }

    /// Builds a grid from `width x height` row-major bits, padding with black
    /// cells up to the next power of two in each direction.
    pub fn from_rows_padded(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "expected {} bits for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        let dims = Dims::covering(width, height)?;
        Ok(Self::from_fn(dims, |x, y| {
            x < width && y < height && bits[x + width * y]
        }))
    }

    /// Grid with exactly `whites` white cells at uniformly random positions.
    pub fn random_with_count(dims: Dims, whites: usize, rng: &mut impl Rng) -> Result<Self> {
        if whites > dims.len() {
            return Err(Error::InvalidGrid(format!(
                "{whites} white cells requested in a grid of {}",
                dims.len()
            )));
        }
        let mut cells = vec![false; dims.len()];
        for z in index::sample(rng, dims.len(), whites) {
            cells[z] = true;
        }
        Self::new(dims, cells)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width()
    }

    pub fn height(&self) -> usize {
        self.dims.height()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn qubits(&self) -> u32 {
        self.dims.qubits()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn point_count(&self) -> usize {
        self.whites
    }

    /// Measured white fraction `P/S`.
    pub fn rho(&self) -> f64 {
        self.whites as f64 / self.len() as f64
    }

    pub fn get(&self, x: usize, y: usize) -> Result<bool> {
        Ok(self.cells[self.dims.flatten(x, y)?])
    }

    /// Oracle function `f(z)`.
    #[inline]
    pub fn at(&self, z: usize) -> bool {
        self.cells[z]
    }

    pub fn flatten(&self, x: usize, y: usize) -> Result<usize> {
        self.dims.flatten(x, y)
    }

    pub fn unflatten(&self, z: usize) -> Result<(usize, usize)> {
        self.dims.unflatten(z)
    }

    /// Strictly increasing indices of the white cells.
    pub fn point_list(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(z, &c)| c.then_some(z))
            .collect()
    }

    /// Swaps rows and columns: `out(x', y') = in(y', x')`.
    pub fn transpose(&self) -> Self {
        let (w, h) = (self.width(), self.height());
        let mut cells = vec![false; self.len()];
        for y in 0..h {
            for x in 0..w {
                cells[y + h * x] = self.cells[x + w * y];
            }
        }
        Self {
            dims: self.dims.transposed(),
            cells,
            whites: self.whites,
        }
    }

    pub fn subgrid(&self, region: &Region) -> Result<Self> {
        if !region.width.is_power_of_two() || !region.height.is_power_of_two() {
            return Err(Error::InvalidRegion(format!(
                "{}x{} is not a power-of-two shape",
                region.width, region.height
            )));
        }
        if !region.fits(self.dims) {
            return Err(Error::InvalidRegion(format!(
                "({}, {}, {}, {}) lies outside the {}x{} array",
                region.x0,
                region.y0,
                region.width,
                region.height,
                self.width(),
                self.height()
            )));
        }
        let dims = Dims::new(
            region.width.trailing_zeros(),
            region.height.trailing_zeros(),
        );
        let w = self.width();
        Ok(Self::from_fn(dims, |x, y| {
            self.cells[region.x0 + x + w * (region.y0 + y)]
        }))
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let w = self.width();
        let mut out = vec![0; w];
        for (z, &c) in self.cells.iter().enumerate() {
            if c {
                out[z % w] += 1;
            }
        }
        out
    }

    pub fn row_counts(&self) -> Vec<usize> {
        let w = self.width();
        let mut out = vec![0; self.height()];
        for (z, &c) in self.cells.iter().enumerate() {
            if c {
                out[z / w] += 1;
            }
        }
        out
    }

    /// Text form: `P1`, optional `#` comment lines, `N M`, then M rows of N
    /// `0`/`1` characters.
    pub fn to_text(&self, comments: &[String]) -> String {
        let w = self.width();
        let mut out = String::with_capacity(self.len() + self.height() + 64);
        out.push_str("P1\n");
        for c in comments {
            for line in c.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str(&format!("{} {}\n", w, self.height()));
        for row in self.cells.chunks(w) {
            out.extend(row.iter().map(|&c| if c { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let (ln, magic) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
        if magic != "P1" {
            return Err(parse_err(ln, "expected `P1` header"));
        }
        let (ln, shape) = lines
            .next()
            .ok_or_else(|| parse_err(ln, "missing `N M` line"))?;
        let mut it = shape.split_whitespace().map(str::parse::<usize>);
        let (width, height) = match (it.next(), it.next(), it.next()) {
            (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => (w, h),
            _ => return Err(parse_err(ln, "expected two positive integers `N M`")),
        };
        let mut bits = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (ln, row) in lines {
            if rows == height {
                return Err(parse_err(ln, "more rows than declared"));
            }
            let before = bits.len();
            for ch in row.chars().filter(|c| !c.is_whitespace()) {
                match ch {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    _ => return Err(parse_err(ln, &format!("unexpected character {ch:?}"))),
                }
            }
            if bits.len() - before != width {
                return Err(parse_err(ln, &format!("row must have {width} cells")));
            }
            rows += 1;
        }
        if rows != height {
            return Err(parse_err(
                text.lines().count(),
                &format!("expected {height} rows, found {rows}"),
            ));
        }
        Self::from_rows_padded(width, height, &bits)
    }
}

/// Parallel lines of spacing `spacing` at angle `theta` from the y axis,
/// embedded in `region` with on-line density excess `delta_rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinePatternSpec {
    pub spacing: f64,
    pub theta: f64,
    pub region: Region,
    pub delta_rho: f64,
    #[serde(default)]
    pub z0: usize,
    /// Full stripe width measured perpendicular to the lines; `None` means `spacing/2`.
    #[serde(default)]
    pub line_width: Option<f64>,
}

impl LinePatternSpec {
    pub fn line_width(&self) -> f64 {
        self.line_width.unwrap_or(self.spacing / 2.0)
    }

    /// Horizontal line period `D/cos(theta)`.
    pub fn period(&self) -> f64 {
        self.spacing / self.theta.cos()
    }

    pub fn chi(&self, dims: Dims) -> f64 {
        self.region.chi(dims)
    }

    pub fn validate(&self, dims: Dims, rho: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPattern(msg));
        let d = self.spacing;
        if !d.is_finite() || d < 2.0 {
            return bad(format!("spacing {d} must be at least 2"));
        }
        let short = dims.width().min(dims.height()) as f64;
        if d > short {
            return bad(format!(
                "spacing {d} exceeds the shorter array side {short}"
            ));
        }
        if !self.theta.is_finite() || self.theta.abs() > std::f64::consts::FRAC_PI_2 + 1e-12 {
            return bad(format!("theta {} outside [-pi/2, pi/2]", self.theta));
        }
        if !self.region.fits(dims) {
            return Err(Error::InvalidRegion(format!(
                "({}, {}, {}, {}) lies outside the {}x{} array",
                self.region.x0,
                self.region.y0,
                self.region.width,
                self.region.height,
                dims.width(),
                dims.height()
            )));
        }
        if !(0.0..=1.0).contains(&self.delta_rho) {
            return bad(format!("delta_rho {} outside [0, 1]", self.delta_rho));
        }
        if rho + self.delta_rho > 1.0 + 1e-12 {
            return bad(format!(
                "rho + delta_rho = {} exceeds 1",
                rho + self.delta_rho
            ));
        }
        let lw = self.line_width();
        if !lw.is_finite() || lw <= 0.0 || lw >= d {
            return bad(format!("line width {lw} must lie in (0, spacing)"));
        }
        Ok(())
    }

    /// Marks cells inside the region that lie on a rasterised line.
    ///
    /// Line `l` is centred in row `r` at column
    /// `round((z0 mod N) + tan(theta)*r + l*D/cos(theta))` and covers the
    /// half-open interval of horizontal width `line_width/cos(theta)` around it.
    /// Horizontal lines (`cos(theta)` = 0) are rasterised per row instead.
    pub fn line_cells(&self, dims: Dims) -> Vec<bool> {
        let w = dims.width();
        let mut mask = vec![false; dims.len()];
        let cos = self.theta.cos();
        let lw = self.line_width();
        let r = self.region;
        if cos.abs() < 1e-9 {
            let y_anchor = ((self.z0 % dims.len()) / w) as f64;
            for y in r.y0..r.y0 + r.height {
                if on_stripe(y as f64, y_anchor, self.spacing, lw) {
                    for x in r.x0..r.x0 + r.width {
                        mask[x + w * y] = true;
                    }
                }
            }
            return mask;
        }
        let tan = self.theta.tan();
        let period = self.spacing / cos;
        let half = lw / cos / 2.0;
        let x_anchor = (self.z0 % w) as f64;
        for y in r.y0..r.y0 + r.height {
            let base = x_anchor + tan * y as f64;
            for x in r.x0..r.x0 + r.width {
                let l0 = ((x as f64 - base) / period).round();
                let hit = (-1..=1).any(|dl| {
                    let c = (base + (l0 + dl as f64) * period).round();
                    let xf = x as f64;
                    xf >= c - half && xf < c + half
                });
                mask[x + w * y] = hit;
            }
        }
        mask
    }

    /// On-line and compensated off-line white probabilities for background `rho`.
    pub fn densities(&self, dims: Dims, rho: f64) -> Result<(f64, f64, Vec<bool>)> {
        self.validate(dims, rho)?;
        let mask = self.line_cells(dims);
        let on = mask.iter().filter(|&&b| b).count();
        let frac = on as f64 / self.region.area() as f64;
        let p_on = (rho + self.delta_rho).min(1.0);
        if on == self.region.area() && self.delta_rho > 0.0 {
            return Err(Error::InvalidPattern(
                "lines cover the whole region, so the excess cannot be compensated".into(),
            ));
        }
        let mut p_off = if on == self.region.area() {
            rho
        } else {
            rho - frac * self.delta_rho / (1.0 - frac)
        };
        if p_off < -1e-12 {
            return Err(Error::InvalidPattern(format!(
                "compensated off-line density {p_off:.4} is negative; reduce delta_rho or line_width"
            )));
        }
        p_off = p_off.max(0.0);
        Ok((p_on, p_off, mask))
    }
}

fn on_stripe(u: f64, anchor: f64, spacing: f64, width: f64) -> bool {
    let l0 = ((u - anchor) / spacing).round();
    (-1..=1).any(|dl| {
        let c = (anchor + (l0 + dl as f64) * spacing).round();
        u >= c - width / 2.0 && u < c + width / 2.0
    })
}

/// Homogeneous background density and the generator seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub rho: f64,
    pub seed: u64,
}

impl BackgroundSpec {
    pub fn new(rho: f64, seed: u64) -> Self {
        Self { rho, seed }
    }
}

/// Draws every cell independently. Outside the pattern region cells are white
/// with probability `rho`; on-line cells use `rho + delta_rho` and off-line
/// region cells a compensated probability keeping the region mean at `rho`.
pub fn generate_grid(
    dims: Dims,
    pattern: Option<&LinePatternSpec>,
    background: &BackgroundSpec,
) -> Result<CellGrid> {
    let rho = background.rho;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidBackground(format!(
            "rho {rho} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(background.seed);
    let layout = match pattern {
        Some(p) => Some((p.region, p.densities(dims, rho)?)),
        None => None,
    };
    let w = dims.width();
    let cells = (0..dims.len())
        .map(|z| {
            let u: f64 = rng.gen();
            let p = match &layout {
                Some((region, (p_on, p_off, mask))) if region.contains(z % w, z / w) => {
                    if mask[z] {
                        *p_on
                    } else {
                        *p_off
                    }
                }
                _ => rho,
            };
            u < p
        })
        .collect();
    CellGrid::new(dims, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n: u32, m: u32) -> Dims {
        Dims::new(n, m)
    }

    #[test]
    fn flatten_examples() {
        let d = dims(3, 2);
        assert_eq!(d.flatten(0, 0).unwrap(), 0);
        assert_eq!(d.flatten(3, 2).unwrap(), 19);
        assert!(d.flatten(8, 0).is_err());
        assert!(d.flatten(0, 4).is_err());
        assert!(d.unflatten(32).is_err());
    }

    #[test]
    fn flatten_round_trip_exhaustive() {
        let d = dims(4, 3);
        for y in 0..8 {
            for x in 0..16 {
                let z = d.flatten(x, y).unwrap();
                assert_eq!(d.unflatten(z).unwrap(), (x, y));
            }
        }
    }

    #[test]
    fn point_list_examples() {
        let g = CellGrid::filled(dims(2, 2), true);
        assert_eq!(g.point_list(), (0..16).collect::<Vec<_>>());
        let g = CellGrid::from_fn(dims(2, 2), |x, y| x == 1 && y == 1);
        assert_eq!(g.point_list(), vec![5]);
    }

    #[test]
    fn transpose_swaps_dims() {
        let g = CellGrid::filled(dims(3, 1), true);
        let t = g.transpose();
        assert_eq!((t.width(), t.height()), (2, 8));
        assert_eq!(t.point_count(), 16);
        let g = CellGrid::from_fn(dims(3, 2), |x, y| (x * 7 + y * 3) % 5 == 0);
        let t = g.transpose();
        for y in 0..4 {
            for x in 0..8 {
                assert_eq!(g.get(x, y).unwrap(), t.get(y, x).unwrap());
            }
        }
    }

    #[test]
    fn all_white_background() {
        let g = generate_grid(dims(3, 3), None, &BackgroundSpec::new(1.0, 9)).unwrap();
        assert_eq!(g.point_count(), 64);
    }

    #[test]
    fn subgrid_rejects_bad_regions() {
        let g = CellGrid::filled(dims(3, 3), false);
        assert!(g.subgrid(&Region::new(0, 0, 3, 4)).is_err());
        assert!(g.subgrid(&Region::new(6, 0, 4, 4)).is_err());
        assert_eq!(g.subgrid(&Region::whole(g.dims())).unwrap(), g);
    }

    #[test]
    fn vertical_lines_mask() {
        let d = dims(3, 2);
        let p = LinePatternSpec {
            spacing: 4.0,
            theta: 0.0,
            region: Region::whole(d),
            delta_rho: 0.5,
            z0: 0,
            line_width: None,
        };
        let mask = p.line_cells(d);
        for y in 0..4 {
            for x in 0..8 {
                assert_eq!(mask[x + 8 * y], x % 4 == 3 || x % 4 == 0, "x={x}");
            }
        }
    }

    #[test]
    fn horizontal_lines_mask() {
        let d = dims(3, 3);
        let p = LinePatternSpec {
            spacing: 4.0,
            theta: std::f64::consts::FRAC_PI_2,
            region: Region::whole(d),
            delta_rho: 0.5,
            z0: 0,
            line_width: None,
        };
        let mask = p.line_cells(d);
        let rows: Vec<bool> = (0..8).map(|y| mask[8 * y]).collect();
        assert_eq!(rows, [true, false, false, true, true, false, false, true]);
    }

    #[test]
    fn pattern_validation() {
        let d = dims(4, 4);
        let mut p = LinePatternSpec {
            spacing: 4.0,
            theta: 0.0,
            region: Region::whole(d),
            delta_rho: 0.6,
            z0: 0,
            line_width: None,
        };
        assert!(generate_grid(d, Some(&p), &BackgroundSpec::new(0.5, 1)).is_err());
        p.delta_rho = 0.5;
        assert!(generate_grid(d, Some(&p), &BackgroundSpec::new(0.5, 1)).is_ok());
        p.region = Region::new(8, 8, 16, 8);
        assert!(generate_grid(d, Some(&p), &BackgroundSpec::new(0.5, 1)).is_err());
        p.region = Region::whole(d);
        p.spacing = 1.5;
        assert!(p.validate(d, 0.5).is_err());
        p.spacing = 32.0;
        assert!(p.validate(d, 0.5).is_err());
    }

    #[test]
    fn text_round_trip_and_padding() {
        let g = CellGrid::from_fn(dims(3, 2), |x, y| (x + 2 * y) % 3 == 0);
        let text = g.to_text(&["seed=4".to_string()]);
        assert_eq!(CellGrid::from_text(&text).unwrap(), g);

        let padded = CellGrid::from_text("P1\n3 2\n101\n011\n").unwrap();
        assert_eq!((padded.width(), padded.height()), (4, 2));
        assert_eq!(padded.point_list(), vec![0, 2, 5, 6]);
        assert!(CellGrid::from_text("P1\n2 2\n10\n").is_err());
        assert!(CellGrid::from_text("P2\n2 2\n10\n01\n").is_err());
        assert!(CellGrid::from_text("P1\n2 1\n1x\n").is_err());
    }
}
