//! Periodic grids, grid functions, and the discrete Fourier transforms.
//!
//! Functions live on a uniform periodic box `[-L, L)^d` in two or three total
//! dimensions.  Axes are ordered tangential first, then normal: a point is
//! `(x_1, .., x_nt, rho_1, .., rho_nn)`.  Compact support is modeled by
//! periodization; test functions decay at the box edge so wrap-around is
//! negligible.
//!
//! Transform convention used throughout the crate:
//!
//! ```text
//! analysis:   F(k) = (2 pi)^-d * sum_m f(x_m) e^{-i x_m . k} h^d
//! synthesis:  f(x) = sum_k F(k) e^{+i x . k} dk^d
//! ```
//!
//! with grid points `x_m = -L + m h`, `h = 2L/N`, and frequencies
//! `k = pi j / L` for signed `j` in `[-N/2, N/2)`.  The pairing is exact on
//! the grid, so synthesis inverts analysis to round-off.  All operator
//! synthesis formulas (`e^{+i x xi} e^{+i rho eta}` kernels) then hold
//! literally, and for `rho < 0` contours close in the lower half-plane.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

/// Magic bytes of the binary grid-function file format.
pub const PSIG_MAGIC: &[u8; 5] = b"PSIG1";

/// Which side of an axis a half-space occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Negative,
    Positive,
}

/// Support tag of a grid function.
///
/// `HalfSpaces` means supported in the closed region `rho_j <= 0` (resp.
/// `>= 0`) for each tagged axis; samples on the boundary plane hold the
/// one-sided trace.  `BoundaryFace(j)` stores a function of the remaining
/// coordinates only.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Support {
    FullSpace,
    HalfSpaces(Vec<(usize, Sign)>),
    BoundaryFace(usize),
}

impl Support {
    pub fn half_axes(&self) -> Vec<usize> {
        match self {
            Support::HalfSpaces(v) => v.iter().map(|(a, _)| *a).collect(),
            _ => Vec::new(),
        }
    }
}

/// Uniform periodic box.  `points[a]` is the per-axis sample count (a power
/// of two) and `half_width[a]` the box half-width `L` of axis `a`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub n_tangential: usize,
    pub n_normal: usize,
    pub points: Vec<usize>,
    pub half_width: Vec<f64>,
}

impl Grid {
    pub fn new(n_tangential: usize, n_normal: usize, points: &[usize], half_width: &[f64]) -> Result<Self> {
        let d = n_tangential + n_normal;
        if !(2..=3).contains(&d) {
            return Err(Error::Grid(format!("total dimension must be 2 or 3, got {d}")));
        }
        if points.len() != d || half_width.len() != d {
            return Err(Error::Grid("points/half_width length must match dimension".into()));
        }
        for &n in points {
            if !n.is_power_of_two() || n < 8 {
                return Err(Error::Grid(format!("samples per axis must be a power of two >= 8, got {n}")));
            }
        }
        for &l in half_width {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Grid(format!("half width must be positive, got {l}")));
            }
        }
        Ok(Grid {
            n_tangential,
            n_normal,
            points: points.to_vec(),
            half_width: half_width.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n_tangential + self.n_normal
    }

    pub fn is_tangential(&self, axis: usize) -> bool {
        axis < self.n_tangential
    }

    /// Grid spacing `h = 2L/N` of an axis.
    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.points[axis] as f64
    }

    /// Frequency spacing `pi/L` of an axis.
    pub fn freq_step(&self, axis: usize) -> f64 {
        std::f64::consts::PI / self.half_width[axis]
    }

    /// Coordinate of sample `i` on an axis: `-L + i h`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -self.half_width[axis] + self.spacing(axis) * i as f64
    }

    /// Signed frequency of storage index `i`: `pi j / L` with `j = i` for
    /// `i < N/2` and `j = i - N` otherwise.
    pub fn freq(&self, axis: usize, i: usize) -> f64 {
        let n = self.points[axis];
        let j = if i < n / 2 { i as isize } else { i as isize - n as isize };
        self.freq_step(axis) * j as f64
    }

    /// Storage index of the `rho = 0` plane.
    pub fn zero_index(&self, axis: usize) -> usize {
        self.points[axis] / 2
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Axes of the grid excluding `skip` (used for boundary faces).
    pub fn axes_without(&self, skip: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&a| a != skip).collect()
    }
}

/// Complex samples on the grid together with a support tag.
///
/// For `BoundaryFace(j)` the value array has one fewer axis; the remaining
/// axes keep the order of the ambient grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: ArrayD<Complex64>,
    pub support: Support,
}

impl GridFunction {
    /// Axes of the ambient grid that the value array spans, in storage order.
    pub fn value_axes(&self) -> Vec<usize> {
        match self.support {
            Support::BoundaryFace(j) => self.grid.axes_without(j),
            _ => (0..self.grid.dim()).collect(),
        }
    }

    fn expected_shape(grid: &Grid, support: &Support) -> Vec<usize> {
        match support {
            Support::BoundaryFace(j) => grid
                .axes_without(*j)
                .iter()
                .map(|&a| grid.points[a])
                .collect(),
            _ => grid.points.clone(),
        }
    }

    pub fn zeros(grid: Grid, support: Support) -> Self {
        let shape = Self::expected_shape(&grid, &support);
        GridFunction {
            grid,
            values: ArrayD::zeros(IxDyn(&shape)),
            support,
        }
    }

    /// Sample a closure of the value-axis coordinates.  For half-space
    /// supports the closure is only invoked inside the closed region; all
    /// other samples are zero.
    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: Grid, support: Support, f: F) -> Self {
        let mut out = Self::zeros(grid, support);
        let axes = out.value_axes();
        let grid = out.grid.clone();
        let support = out.support.clone();
        let mut coords = vec![0.0; axes.len()];
        for (idx, v) in out.values.indexed_iter_mut() {
            for (pos, &axis) in axes.iter().enumerate() {
                coords[pos] = grid.coord(axis, idx[pos]);
            }
            if let Support::HalfSpaces(tags) = &support {
                let inside = tags.iter().all(|&(axis, sign)| {
                    let pos = axes.iter().position(|&a| a == axis).unwrap();
                    match sign {
                        Sign::Negative => coords[pos] <= 0.0,
                        Sign::Positive => coords[pos] >= 0.0,
                    }
                });
                if !inside {
                    continue;
                }
            }
            *v = f(&coords);
        }
        out
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("grid function holds non-finite values".into()))
        }
    }

    /// Pointwise `self + c * other`.
    pub fn add_scaled(&self, other: &GridFunction, c: Complex64) -> GridFunction {
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values)
            .and(&other.values)
            .for_each(|a, &b| *a += c * b);
        out
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| c * v);
        out
    }

    /// Grid-space L2 norm `(sum |f|^2 h^d)^(1/2)` over the value axes.
    pub fn l2_norm(&self) -> f64 {
        let axes = self.value_axes();
        let cell: f64 = axes.iter().map(|&a| self.grid.spacing(a)).product();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    }
}

/// Kind of stored transform data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// All value axes transformed.
    Full,
    /// Tangential axes transformed, normal axes kept in grid space.
    PartialTangential,
}

/// Fourier coefficients on the frequency lattice `k = pi j / L` per axis.
#[derive(Debug, Clone)]
pub struct FourierData {
    pub grid: Grid,
    pub coeffs: ArrayD<Complex64>,
    pub kind: TransformKind,
    /// Ambient axes the coefficient array spans (mirrors the source values).
    pub axes: Vec<usize>,
}

impl FourierData {
    /// Frequency vector of a storage index, on the transformed axes only.
    pub fn freq_at(&self, idx: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for (pos, &axis) in self.axes.iter().enumerate() {
            out.push(self.grid.freq(axis, idx[pos]));
        }
    }
}

struct FftCache {
    planner: Mutex<FftPlanner<f64>>,
}

impl FftCache {
    fn global() -> &'static FftCache {
        use std::sync::OnceLock;
        static CACHE: OnceLock<FftCache> = OnceLock::new();
        CACHE.get_or_init(|| FftCache {
            planner: Mutex::new(FftPlanner::new()),
        })
    }

    fn plan(&self, n: usize, forward: bool) -> Arc<dyn rustfft::Fft<f64>> {
        let mut p = self.planner.lock().unwrap();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    }
}

/// In-place transform of one array axis.
///
/// `forward` applies `F_k = h/(2 pi) (-1)^k DFT_k`, the box-aware analysis
/// step of the crate convention; the inverse applies the exact synthesis.
pub(crate) fn transform_axis(values: &mut ArrayD<Complex64>, lane_axis: usize, n: usize, h: f64, dk: f64, forward: bool) {
    let fft = FftCache::global().plan(n, forward);
    let scale = if forward {
        h / (2.0 * std::f64::consts::PI)
    } else {
        dk
    };
    for mut lane in values.lanes_mut(ndarray::Axis(lane_axis)) {
        let mut buf: Vec<Complex64> = lane.iter().copied().collect();
        if !forward {
            for (k, v) in buf.iter_mut().enumerate() {
                if k % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        fft.process(&mut buf);
        if forward {
            for (k, v) in buf.iter_mut().enumerate() {
                if k % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        for (dst, src) in lane.iter_mut().zip(buf.iter()) {
            *dst = src * scale;
        }
    }
}

fn transform(f_values: &ArrayD<Complex64>, grid: &Grid, axes: &[usize], which: &[usize], forward: bool) -> ArrayD<Complex64> {
    let mut out = f_values.clone();
    for (pos, &axis) in axes.iter().enumerate() {
        if !which.contains(&axis) {
            continue;
        }
        let n = grid.points[axis];
        transform_axis(&mut out, pos, n, grid.spacing(axis), grid.freq_step(axis), forward);
    }
    out
}

/// Full discrete Fourier transform over every value axis.
///
/// Accepts full-space and (zero-extended) half-space functions as well as
/// boundary faces, whose transform runs over the face axes only.
pub fn fft_full(f: &GridFunction) -> Result<FourierData> {
    f.assert_finite()?;
    let axes = f.value_axes();
    let coeffs = transform(&f.values, &f.grid, &axes, &axes, true);
    Ok(FourierData {
        grid: f.grid.clone(),
        coeffs,
        kind: TransformKind::Full,
        axes,
    })
}

/// Partial transform over the tangential axes only.
pub fn fft_partial(f: &GridFunction) -> Result<FourierData> {
    f.assert_finite()?;
    let axes = f.value_axes();
    let tang: Vec<usize> = axes
        .iter()
        .copied()
        .filter(|&a| f.grid.is_tangential(a))
        .collect();
    let coeffs = transform(&f.values, &f.grid, &axes, &tang, true);
    Ok(FourierData {
        grid: f.grid.clone(),
        coeffs,
        kind: TransformKind::PartialTangential,
        axes,
    })
}

/// Inverse of [`fft_full`] / [`fft_partial`]; returns values with the given
/// support tag.
pub fn inverse(data: &FourierData, support: Support) -> GridFunction {
    let which: Vec<usize> = match data.kind {
        TransformKind::Full => data.axes.clone(),
        TransformKind::PartialTangential => data
            .axes
            .iter()
            .copied()
            .filter(|&a| data.grid.is_tangential(a))
            .collect(),
    };
    let values = transform(&data.coeffs, &data.grid, &data.axes, &which, false);
    GridFunction {
        grid: data.grid.clone(),
        values,
        support,
    }
}

/// Extension by zero across the tagged axes in `axes_j`: samples on
/// `rho_j >= 0` are zeroed (including the boundary plane) and the support tag
/// shrinks accordingly.
pub fn extend_by_zero(f: &GridFunction, axes_j: &[usize]) -> Result<GridFunction> {
    let tags = match &f.support {
        Support::HalfSpaces(tags) => tags.clone(),
        _ => {
            return Err(Error::Support(
                "extend_by_zero needs a half-space supported function".into(),
            ))
        }
    };
    for &j in axes_j {
        if !tags.iter().any(|&(a, _)| a == j) {
            return Err(Error::Support(format!("axis {j} is not in the support set")));
        }
    }
    let mut out = f.clone();
    let value_axes = f.value_axes();
    for &(axis, sign) in tags.iter().filter(|(a, _)| axes_j.contains(a)) {
        let pos = value_axes.iter().position(|&a| a == axis).unwrap();
        let n = f.grid.points[axis];
        let zero = f.grid.zero_index(axis);
        let range: Vec<usize> = match sign {
            Sign::Negative => (zero..n).collect(),
            Sign::Positive => (0..=zero).collect(),
        };
        for i in range {
            out.values
                .index_axis_mut(ndarray::Axis(pos), i)
                .fill(Complex64::new(0.0, 0.0));
        }
    }
    let remaining: Vec<(usize, Sign)> = tags.into_iter().filter(|(a, _)| !axes_j.contains(a)).collect();
    out.support = if remaining.is_empty() {
        Support::FullSpace
    } else {
        Support::HalfSpaces(remaining)
    };
    Ok(out)
}

/// Restriction to the boundary plane `rho_j = 0`.
pub fn restrict_boundary(f: &GridFunction, axis_j: usize) -> Result<GridFunction> {
    let value_axes = f.value_axes();
    let pos = value_axes
        .iter()
        .position(|&a| a == axis_j)
        .ok_or_else(|| Error::Support(format!("axis {axis_j} not present in the value array")))?;
    if f.grid.is_tangential(axis_j) {
        return Err(Error::Support("cannot restrict to a tangential axis".into()));
    }
    let zero = f.grid.zero_index(axis_j);
    let slice = f.values.index_axis(ndarray::Axis(pos), zero).to_owned();
    Ok(GridFunction {
        grid: f.grid.clone(),
        values: slice,
        support: Support::BoundaryFace(axis_j),
    })
}

/// Relative L2 distance between two grid functions of equal shape.
pub fn rel_l2_error(a: &GridFunction, b: &GridFunction) -> f64 {
    let diff: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let base: f64 = b.values.iter().map(|v| v.norm_sqr()).sum();
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}

fn support_to_bytes(s: &Support) -> Vec<u8> {
    match s {
        Support::FullSpace => vec![0u8],
        Support::HalfSpaces(tags) => {
            let mut b = vec![1u8, tags.len() as u8];
            for &(axis, sign) in tags {
                b.push(axis as u8);
                b.push(match sign {
                    Sign::Negative => 0,
                    Sign::Positive => 1,
                });
            }
            b
        }
        Support::BoundaryFace(j) => vec![2u8, *j as u8],
    }
}

/// Write the binary grid file: magic `PSIG1`, little-endian `u32` dimension,
/// per-axis `u32 N`, per-axis `f64 L`, support tag byte (+payload), then the
/// samples as interleaved `f64` (re, im) in row-major order.
pub fn write_psig<W: Write>(w: &mut W, f: &GridFunction) -> Result<()> {
    w.write_all(PSIG_MAGIC)?;
    let d = f.grid.dim() as u32;
    w.write_all(&d.to_le_bytes())?;
    w.write_all(&(f.grid.n_tangential as u32).to_le_bytes())?;
    for &n in &f.grid.points {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &l in &f.grid.half_width {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&support_to_bytes(&f.support))?;
    for v in f.values.iter() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Read the binary grid file written by [`write_psig`].
pub fn read_psig<R: Read>(r: &mut R) -> Result<GridFunction> {
    let magic = read_exact::<_, 5>(r)?;
    if &magic != PSIG_MAGIC {
        return Err(Error::Format("bad magic; not a PSIG1 file".into()));
    }
    let d = u32::from_le_bytes(read_exact::<_, 4>(r)?) as usize;
    let nt = u32::from_le_bytes(read_exact::<_, 4>(r)?) as usize;
    if !(2..=3).contains(&d) || nt >= d {
        return Err(Error::Format("bad dimension header".into()));
    }
    let mut points = Vec::with_capacity(d);
    for _ in 0..d {
        points.push(u32::from_le_bytes(read_exact::<_, 4>(r)?) as usize);
    }
    let mut half_width = Vec::with_capacity(d);
    for _ in 0..d {
        half_width.push(f64::from_le_bytes(read_exact::<_, 8>(r)?));
    }
    let tag = read_exact::<_, 1>(r)?[0];
    let support = match tag {
        0 => Support::FullSpace,
        1 => {
            let m = read_exact::<_, 1>(r)?[0] as usize;
            let mut tags = Vec::with_capacity(m);
            for _ in 0..m {
                let axis = read_exact::<_, 1>(r)?[0] as usize;
                let sign = match read_exact::<_, 1>(r)?[0] {
                    0 => Sign::Negative,
                    1 => Sign::Positive,
                    b => return Err(Error::Format(format!("bad sign byte {b}"))),
                };
                tags.push((axis, sign));
            }
            Support::HalfSpaces(tags)
        }
        2 => Support::BoundaryFace(read_exact::<_, 1>(r)?[0] as usize),
        b => return Err(Error::Format(format!("bad support tag {b}"))),
    };
    let grid = Grid::new(nt, d - nt, &points, &half_width)?;
    let shape = GridFunction::expected_shape(&grid, &support);
    let count: usize = shape.iter().product();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_le_bytes(read_exact::<_, 8>(r)?);
        let im = f64::from_le_bytes(read_exact::<_, 8>(r)?);
        values.push(Complex64::new(re, im));
    }
    let values = ArrayD::from_shape_vec(IxDyn(&shape), values)
        .map_err(|e| Error::Format(format!("shape mismatch: {e}")))?;
    let f = GridFunction { grid, values, support };
    f.assert_finite()?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid_2d(n: usize, lx: f64, lr: f64) -> Grid {
        Grid::new(1, 1, &[n, n], &[lx, lr]).unwrap()
    }

    /// Naive O(N^2) analysis sum per axis, the oracle for the FFT path.
    fn dft_oracle(f: &GridFunction) -> ArrayD<Complex64> {
        let grid = &f.grid;
        let d = grid.dim();
        assert_eq!(d, 2);
        let (n0, n1) = (grid.points[0], grid.points[1]);
        let mut out = ArrayD::zeros(IxDyn(&[n0, n1]));
        let norm = (2.0 * PI).powi(d as i32);
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let f0 = grid.freq(0, k0);
                let f1 = grid.freq(1, k1);
                let mut acc = Complex64::default();
                for m0 in 0..n0 {
                    for m1 in 0..n1 {
                        let x0 = grid.coord(0, m0);
                        let x1 = grid.coord(1, m1);
                        let phase = -(x0 * f0 + x1 * f1);
                        acc += f.values[[m0, m1]] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[[k0, k1]] = acc * grid.spacing(0) * grid.spacing(1) / norm;
            }
        }
        out
    }

    #[test]
    fn fft_matches_direct_dft_on_cosine() {
        let grid = grid_2d(16, PI, PI);
        let f = GridFunction::from_fn(grid, Support::FullSpace, |c| {
            Complex64::new(c[0].cos() * (-c[1] * c[1]).exp(), 0.0)
        });
        let fast = fft_full(&f).unwrap();
        let slow = dft_oracle(&f);
        for (a, b) in fast.coeffs.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn cosine_transform_is_supported_on_pm_one() {
        // f = cos(x) on a box with L = pi: mass at xi = +-1 with equal
        // coefficients, zero elsewhere.
        let grid = grid_2d(32, PI, PI);
        let f = GridFunction::from_fn(grid.clone(), Support::FullSpace, |c| {
            Complex64::new(c[0].cos(), 0.0)
        });
        let data = fft_full(&f).unwrap();
        let mut freq = Vec::new();
        for (idx, v) in data.coeffs.indexed_iter() {
            let idx: Vec<usize> = idx.slice().to_vec();
            data.freq_at(&idx, &mut freq);
            let expect_mass = (freq[0].abs() - 1.0).abs() < 1e-12 && freq[1].abs() < 1e-12;
            if expect_mass {
                assert!(v.norm() > 1e-3);
            } else {
                assert!(v.norm() < 1e-12, "unexpected mass at {freq:?}: {v}");
            }
        }
        // the two coefficients are equal
        let v_plus = {
            let mut val = Complex64::default();
            for (idx, v) in data.coeffs.indexed_iter() {
                let idx: Vec<usize> = idx.slice().to_vec();
                data.freq_at(&idx, &mut freq);
                if (freq[0] - 1.0).abs() < 1e-12 && freq[1].abs() < 1e-12 {
                    val = *v;
                }
            }
            val
        };
        let v_minus = {
            let mut val = Complex64::default();
            for (idx, v) in data.coeffs.indexed_iter() {
                let idx: Vec<usize> = idx.slice().to_vec();
                data.freq_at(&idx, &mut freq);
                if (freq[0] + 1.0).abs() < 1e-12 && freq[1].abs() < 1e-12 {
                    val = *v;
                }
            }
            val
        };
        assert!((v_plus - v_minus).norm() < 1e-12);
    }

    #[test]
    fn round_trip_is_exact() {
        let grid = grid_2d(64, PI, PI);
        let f = GridFunction::from_fn(grid, Support::FullSpace, |c| {
            Complex64::new(
                (2.0 * c[0]).cos() * (-c[1] * c[1] * 2.0).exp(),
                (c[0]).sin() * (-c[1] * c[1]).exp(),
            )
        });
        let data = fft_full(&f).unwrap();
        let back = inverse(&data, Support::FullSpace);
        assert!(rel_l2_error(&back, &f) < 1e-12);
    }

    #[test]
    fn zero_in_zero_out() {
        let grid = grid_2d(16, PI, PI);
        let f = GridFunction::zeros(grid, Support::FullSpace);
        let data = fft_full(&f).unwrap();
        assert!(data.coeffs.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn partial_transform_keeps_normal_profile() {
        // f(x, rho) = cos(2x) h(rho): the partial transform is supported on
        // xi = +-2 and carries the profile h on the normal axis.
        let grid = grid_2d(32, PI, 4.0);
        let h = |r: f64| (-r * r).exp();
        let f = GridFunction::from_fn(grid.clone(), Support::FullSpace, |c| {
            Complex64::new((2.0 * c[0]).cos() * h(c[1]), 0.0)
        });
        let data = fft_partial(&f).unwrap();
        for (idx, v) in data.coeffs.indexed_iter() {
            let xi = grid.freq(0, idx[0]);
            let rho = grid.coord(1, idx[1]);
            if (xi.abs() - 2.0).abs() < 1e-12 {
                // coefficient of cos(2x) is 1/2 under the analysis convention
                // times the box factor h/(2 pi) * N per axis = L/pi = 1.
                assert_relative_eq!(v.re, 0.5 * h(rho), max_relative = 1e-10, epsilon = 1e-13);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn full_equals_normal_dft_of_partial() {
        let grid = grid_2d(32, PI, 4.0);
        let f = GridFunction::from_fn(grid.clone(), Support::FullSpace, |c| {
            Complex64::new((c[0] + 0.3).cos() * (-c[1] * c[1]).exp(), 0.1 * c[1].sin())
        });
        let full = fft_full(&f).unwrap();
        let partial = fft_partial(&f).unwrap();
        let wrapped = GridFunction {
            grid: grid.clone(),
            values: partial.coeffs.clone(),
            support: Support::FullSpace,
        };
        let mut both = wrapped.values.clone();
        transform_axis(&mut both, 1, grid.points[1], grid.spacing(1), grid.freq_step(1), true);
        for (a, b) in both.iter().zip(full.coeffs.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_holds() {
        let grid = grid_2d(64, PI, 2.0);
        let f = GridFunction::from_fn(grid, Support::FullSpace, |c| {
            Complex64::new(c[0].cos() * (-3.0 * c[1] * c[1]).exp(), 0.0)
        });
        let grid_side = f.l2_norm();
        let data = fft_full(&f).unwrap();
        let d = f.grid.dim() as i32;
        let dk: f64 = (0..f.grid.dim()).map(|a| f.grid.freq_step(a)).product();
        let freq_side =
            ((2.0 * PI).powi(d) * data.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>() * dk).sqrt();
        assert_relative_eq!(grid_side, freq_side, max_relative = 1e-10);
    }

    #[test]
    fn extend_by_zero_keeps_values_and_shrinks_tag() {
        let grid = grid_2d(32, 4.0, 4.0);
        let f = GridFunction::from_fn(
            grid.clone(),
            Support::HalfSpaces(vec![(1, Sign::Negative)]),
            |c| Complex64::new((c[1]).exp() * (-c[0] * c[0]).exp(), 0.0),
        );
        let e = extend_by_zero(&f, &[1]).unwrap();
        assert_eq!(e.support, Support::FullSpace);
        for (idx, v) in e.values.indexed_iter() {
            let rho = grid.coord(1, idx[1]);
            if rho >= 0.0 {
                assert_eq!(v.norm(), 0.0);
            } else {
                assert_eq!(*v, f.values[idx]);
            }
        }
        // J = empty set is the identity
        let id = extend_by_zero(&f, &[]).unwrap();
        assert_eq!(id.support, f.support);
        assert!(rel_l2_error(&id, &f) < 1e-15);
    }

    #[test]
    fn extend_by_zero_rejects_axis_outside_support() {
        let grid = grid_2d(16, 4.0, 4.0);
        let f = GridFunction::from_fn(
            grid,
            Support::HalfSpaces(vec![(1, Sign::Negative)]),
            |_| Complex64::new(1.0, 0.0),
        );
        assert!(extend_by_zero(&f, &[0]).is_err());
    }

    #[test]
    fn quarter_plane_extension_zeroes_plane_only() {
        // f = e^{rho1 + rho2} on the quarter-plane: extension by zero across
        // axis 0 zeroes the rho1 >= 0 samples (plane included) and keeps
        // every interior sample.  The L2 equality against the closed-form
        // value 1/2 is checked in the sobolev module where boundary planes
        // carry quadrature weight 1/2.
        let grid = Grid::new(0, 2, &[256, 256], &[16.0, 16.0]).unwrap();
        let f = GridFunction::from_fn(
            grid.clone(),
            Support::HalfSpaces(vec![(0, Sign::Negative), (1, Sign::Negative)]),
            |c| Complex64::new((c[0] + c[1]).exp(), 0.0),
        );
        let e = extend_by_zero(&f, &[0]).unwrap();
        assert_eq!(e.support, Support::HalfSpaces(vec![(1, Sign::Negative)]));
        for (idx, v) in e.values.indexed_iter() {
            let r0 = grid.coord(0, idx[0]);
            if r0 >= 0.0 {
                assert_eq!(v.norm(), 0.0);
            } else {
                assert_eq!(*v, f.values[idx]);
            }
        }
    }

    #[test]
    fn restriction_takes_boundary_values() {
        let grid = grid_2d(32, PI, 2.0);
        let f = GridFunction::from_fn(grid.clone(), Support::FullSpace, |c| {
            Complex64::new(c[1].exp() * c[0].cos(), 0.0)
        });
        let b = restrict_boundary(&f, 1).unwrap();
        assert_eq!(b.support, Support::BoundaryFace(1));
        for (idx, v) in b.values.indexed_iter() {
            let x = grid.coord(0, idx[0]);
            assert_relative_eq!(v.re, x.cos(), epsilon = 1e-12);
        }
        // rho * g vanishes on the face
        let g = GridFunction::from_fn(grid, Support::FullSpace, |c| {
            Complex64::new(c[1] * (c[0].cos() + 2.0), 0.0)
        });
        let bg = restrict_boundary(&g, 1).unwrap();
        assert!(bg.values.iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn restrict_after_extend_is_identity_on_region() {
        let grid = grid_2d(32, 2.0, 2.0);
        let f = GridFunction::from_fn(
            grid.clone(),
            Support::HalfSpaces(vec![(1, Sign::Negative)]),
            |c| Complex64::new((c[1] - c[0]).exp(), 0.2),
        );
        let e = extend_by_zero(&f, &[1]).unwrap();
        for (idx, v) in e.values.indexed_iter() {
            let rho = grid.coord(1, idx[1]);
            if rho < 0.0 {
                assert_eq!(*v, f.values[idx]);
            }
        }
    }

    #[test]
    fn psig_file_round_trip() {
        let grid = grid_2d(16, 1.0, 2.0);
        let f = GridFunction::from_fn(
            grid,
            Support::HalfSpaces(vec![(1, Sign::Negative)]),
            |c| Complex64::new(c[0] + c[1], c[0] - c[1]),
        );
        let mut buf = Vec::new();
        write_psig(&mut buf, &f).unwrap();
        let g = read_psig(&mut buf.as_slice()).unwrap();
        assert_eq!(g.support, f.support);
        assert_eq!(g.grid, f.grid);
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(1, 1, &[24, 32], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let grid = grid_2d(16, 1.0, 1.0);
        let mut f = GridFunction::zeros(grid, Support::FullSpace);
        f.values[[0, 0]] = Complex64::new(f64::NAN, 0.0);
        assert!(fft_full(&f).is_err());
    }
}
