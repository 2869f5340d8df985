//! Actions of pseudodifferential operators on volume and boundary data.
//!
//! Boundary distributions `g_b x delta(rho_j)` are never discretized along
//! the normal axis: their full transform is the face transform of the
//! density, constant in the normal frequency, and every action integrates
//! the normal frequency out in closed form (residues) or by quadrature.
//!
//! For `rho < 0` the synthesis contour closes in the lower half-plane, so
//! lower poles `q` with `Im q < 0` produce the decaying factors
//! `e^{i rho q}`; for `rho > 0` the upper poles take over.  The value on the
//! plane itself is the mean of the two one-sided limits.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{extend_by_zero, fft_full, fft_partial, inverse, GridFunction, Support, TransformKind};
use crate::symbol::{eta_derivative, boundary_symbol, HalfPlane, PoleData, Symbol};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Cost cap for pointwise Kohn-Nirenberg quantization paths.
pub const KN_COST_CAP: usize = 1 << 26;

/// A surface density `g_b` on the face `rho_j = 0`, representing
/// `g_b x delta(rho_j)`.
#[derive(Debug, Clone)]
pub struct BoundaryDistribution {
    pub density: GridFunction,
    pub axis: usize,
}

impl BoundaryDistribution {
    pub fn new(density: GridFunction) -> Result<Self> {
        let axis = match density.support {
            Support::BoundaryFace(j) => j,
            _ => {
                return Err(Error::Support(
                    "boundary distribution density must carry a BoundaryFace support".into(),
                ))
            }
        };
        density.assert_finite()?;
        Ok(BoundaryDistribution { density, axis })
    }
}

/// Zero-extend half-space inputs so the transform sees the whole box.
fn as_full_space(f: &GridFunction) -> Result<GridFunction> {
    match &f.support {
        Support::FullSpace => Ok(f.clone()),
        Support::HalfSpaces(tags) => {
            let axes: Vec<usize> = tags.iter().map(|(a, _)| *a).collect();
            extend_by_zero(f, &axes)
        }
        Support::BoundaryFace(_) => Err(Error::Support(
            "expected a volume function, got a boundary face".into(),
        )),
    }
}

/// Quantization `Op(a) f`: multiply the full transform by the symbol and
/// synthesize.  Constant-coefficient symbols run as a pure frequency
/// multiplier; `x`-dependent symbols use the pointwise Kohn-Nirenberg sum,
/// rejected above [`KN_COST_CAP`].
pub fn quantize(sym: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    let full = as_full_space(f)?;
    let data = fft_full(&full)?;
    if !sym.x_dependent {
        let mut out = data;
        let zero_space = vec![0.0; out.grid.dim()];
        let mut freq: Vec<Complex64> = Vec::with_capacity(out.grid.dim());
        let grid = out.grid.clone();
        for (idx, v) in out.coeffs.indexed_iter_mut() {
            freq.clear();
            for (pos, &n) in idx.slice().iter().enumerate() {
                freq.push(Complex64::new(grid.freq(pos, n), 0.0));
            }
            *v *= sym.eval(&zero_space, &freq);
        }
        let g = inverse(&out, Support::FullSpace);
        g.assert_finite()?;
        Ok(g)
    } else {
        let n_points: usize = full.values.len();
        let n_freqs: usize = data.coeffs.len();
        let cost = n_points.checked_mul(n_freqs).unwrap_or(usize::MAX);
        if cost > KN_COST_CAP {
            return Err(Error::CostCap(format!(
                "x-dependent quantization cost {n_points} x {n_freqs} exceeds {KN_COST_CAP}"
            )));
        }
        let grid = full.grid.clone();
        let d = grid.dim();
        let shape: Vec<usize> = grid.points.clone();
        let coeffs: Vec<(Vec<f64>, Complex64)> = data
            .coeffs
            .indexed_iter()
            .map(|(idx, v)| {
                let k: Vec<f64> = idx
                    .slice()
                    .iter()
                    .enumerate()
                    .map(|(pos, &n)| grid.freq(pos, n))
                    .collect();
                (k, *v)
            })
            .collect();
        let dk: f64 = (0..d).map(|a| grid.freq_step(a)).product();
        let mut out = GridFunction::zeros(grid.clone(), Support::FullSpace);
        let flat: Vec<Complex64> = {
            let indices: Vec<Vec<usize>> = out
                .values
                .indexed_iter()
                .map(|(idx, _)| idx.slice().to_vec())
                .collect();
            indices
                .par_iter()
                .map(|idx| {
                    let x: Vec<f64> = idx
                        .iter()
                        .enumerate()
                        .map(|(pos, &m)| grid.coord(pos, m))
                        .collect();
                    let mut acc = Complex64::default();
                    let mut freq = vec![Complex64::default(); d];
                    for (k, c) in &coeffs {
                        let mut phase = 0.0;
                        for a in 0..d {
                            phase += x[a] * k[a];
                            freq[a] = Complex64::new(k[a], 0.0);
                        }
                        acc += sym.eval(&x, &freq) * c * Complex64::from_polar(1.0, phase);
                    }
                    acc * dk
                })
                .collect()
        };
        out.values = ArrayD::from_shape_vec(IxDyn(&shape), flat).expect("shape");
        out.assert_finite()?;
        Ok(out)
    }
}

/// One-sided residue value of the normal-frequency synthesis at height
/// `rho`: the contour value of `(2 pi)^-1 Int a e^{i rho eta} d eta`.
fn residue_profile(
    poles: &[&PoleData],
    space: &[f64],
    freq_real: &[f64],
    rho: f64,
) -> Complex64 {
    let mut acc = Complex64::default();
    if rho == 0.0 {
        let mut lower = Complex64::default();
        let mut upper = Complex64::default();
        for p in poles {
            let r1 = (p.residue)(space, freq_real);
            match p.half_plane {
                HalfPlane::Lower => lower += -I * r1,
                HalfPlane::Upper => upper += I * r1,
            }
        }
        return (lower + upper) * 0.5;
    }
    let want = if rho < 0.0 { HalfPlane::Lower } else { HalfPlane::Upper };
    let orient = if rho < 0.0 { -I } else { I };
    for p in poles {
        if p.half_plane != want {
            continue;
        }
        let q = (p.location)(space, freq_real);
        let r1 = (p.residue)(space, freq_real);
        let phase = (I * rho * q).exp();
        let mut term = r1;
        if let Some(s2) = &p.second_order {
            term += I * rho * s2(space, freq_real);
        }
        acc += orient * phase * term;
    }
    acc
}

fn face_action(
    sym: &Symbol,
    g: &BoundaryDistribution,
    profile: &(dyn Fn(&[f64], &[f64], f64) -> Complex64 + Sync),
) -> Result<GridFunction> {
    if sym.x_dependent {
        return Err(Error::CostCap(
            "x-dependent boundary actions are not implemented; freeze the coefficients".into(),
        ));
    }
    let grid = g.density.grid.clone();
    let j = g.axis;
    let ghat = fft_full(&g.density)?;
    let face_axes = g.density.value_axes();
    let d = grid.dim();
    let zero_space = vec![0.0; d];
    // spectral array over the full box: face axes in frequency, rho_j in space
    let mut spectral = GridFunction::zeros(grid.clone(), Support::FullSpace);
    let n_j = grid.points[j];
    // iterate over face frequency combos
    let face_shape: Vec<usize> = face_axes.iter().map(|&a| grid.points[a]).collect();
    let mut face_idx = vec![0usize; face_shape.len()];
    let mut freq_real = vec![0.0; d];
    loop {
        let gval = ghat.coeffs[IxDyn(&face_idx)];
        for (pos, &a) in face_axes.iter().enumerate() {
            freq_real[a] = grid.freq(a, face_idx[pos]);
        }
        freq_real[j] = 0.0;
        if gval.norm() != 0.0 {
            for ij in 0..n_j {
                let rho = grid.coord(j, ij);
                let m = profile(&zero_space, &freq_real, rho);
                // full index: face indices with rho_j inserted at axis j
                let mut idx: Vec<usize> = face_idx.clone();
                idx.insert(j, ij);
                spectral.values[IxDyn(&idx)] = gval * m;
            }
        }
        // advance face_idx
        let mut carry = true;
        for pos in (0..face_idx.len()).rev() {
            if carry {
                face_idx[pos] += 1;
                if face_idx[pos] == face_shape[pos] {
                    face_idx[pos] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    // synthesize over the face axes only
    let data = crate::grid::FourierData {
        grid: grid.clone(),
        coeffs: spectral.values,
        kind: TransformKind::PartialTangential,
        axes: (0..d).collect(),
    };
    let out = inverse_over_axes(&data, &face_axes)?;
    out.assert_finite()?;
    Ok(out)
}

/// Synthesis over an explicit axis subset (the face axes of a boundary
/// action).
fn inverse_over_axes(data: &crate::grid::FourierData, which: &[usize]) -> Result<GridFunction> {
    let mut values = data.coeffs.clone();
    for (pos, &axis) in data.axes.iter().enumerate() {
        if !which.contains(&axis) {
            continue;
        }
        let n = data.grid.points[axis];
        let dk = data.grid.freq_step(axis);
        crate::grid::transform_axis(&mut values, pos, n, data.grid.spacing(axis), dk, false);
    }
    Ok(GridFunction {
        grid: data.grid.clone(),
        values,
        support: Support::FullSpace,
    })
}

/// Residue-calculus action of a meromorphic symbol on `g_b x delta`:
/// the field over the whole box, decaying away from the face.
pub fn apply_to_boundary(sym: &Symbol, g: &BoundaryDistribution) -> Result<GridFunction> {
    let j = g.axis;
    let poles = sym.poles_on(j);
    if poles.is_empty() {
        return Err(Error::Precondition(
            "apply_to_boundary needs pole data; use apply_to_boundary_direct".into(),
        ));
    }
    if poles.iter().all(|p| p.half_plane != HalfPlane::Lower) {
        return Err(Error::Precondition(
            "no lower-half-plane pole; nothing decays into rho < 0".into(),
        ));
    }
    if poles.iter().any(|p| p.order > 2) {
        return Err(Error::Precondition("pole order above two".into()));
    }
    let sym2 = sym.clone();
    face_action(sym, g, &move |space, freq, rho| {
        let poles = sym2.poles_on(j);
        residue_profile(&poles, space, freq, rho)
    })
}

/// Direct quadrature action `(2 pi)^-1 Int a(.., eta) e^{i rho eta} d eta`
/// per face frequency, for symbols of order at most `-1` without usable
/// pole data.
pub fn apply_to_boundary_direct(sym: &Symbol, g: &BoundaryDistribution) -> Result<GridFunction> {
    if sym.order > -1.0 {
        return Err(Error::Precondition(format!(
            "order {} > -1: eta quadrature will not converge",
            sym.order
        )));
    }
    let j = g.axis;
    let sym2 = sym.clone();
    let order = sym.order;
    face_action(sym, g, &move |space, freq, rho| {
        let fx: Vec<Complex64> = freq.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let val = crate::symbol::integrate_line(
            &|eta| {
                let mut fy = fx.clone();
                fy[j] = Complex64::new(eta, 0.0);
                sym2.eval(space, &fy) * (I * rho * eta).exp()
            },
            order,
            1e-9,
        )
        .unwrap_or(Complex64::new(f64::NAN, 0.0));
        val / (2.0 * std::f64::consts::PI)
    })
}

/// The Volterra action of an upper pole `q` on a half-space function:
/// per tangential mode,
/// `G(rho) = i Int_{-inf}^{rho} ftilde(t) e^{i q (rho - t)} dt`,
/// accumulated by the trapezoid rule on the rho grid, then multiplied by
/// the pole residue and synthesized.
pub fn volterra_apply(sym: &Symbol, f: &GridFunction) -> Result<GridFunction> {
    let grid = f.grid.clone();
    let d = grid.dim();
    if grid.n_normal != 1 {
        return Err(Error::Precondition(
            "volterra_apply works on the single-normal-axis half-space".into(),
        ));
    }
    let j = grid.n_tangential; // the normal axis
    let poles: Vec<PoleData> = sym
        .poles_on(j)
        .into_iter()
        .filter(|p| p.half_plane == HalfPlane::Upper)
        .cloned()
        .collect();
    if poles.is_empty() {
        return Err(Error::Precondition("no upper-half-plane pole".into()));
    }
    if poles.iter().any(|p| !p.elliptic_imaginary) {
        return Err(Error::Precondition(
            "upper pole without elliptic imaginary part: kernel would not decay".into(),
        ));
    }
    if poles.iter().any(|p| p.order != 1) {
        return Err(Error::Precondition("volterra path supports simple poles".into()));
    }
    let full = as_full_space(f)?;
    let part = fft_partial(&full)?;
    let zero_space = vec![0.0; d];
    let n_j = grid.points[j];
    let h = grid.spacing(j);
    // explicit indexed recursion over tangential modes
    let tang_shape: Vec<usize> = (0..d).filter(|&a| a != j).map(|a| grid.points[a]).collect();
    let mut tang_idx = vec![0usize; tang_shape.len()];
    let mut out_arr = ArrayD::<Complex64>::zeros(IxDyn(&grid.points.clone()));
    loop {
        let mut freq_real = vec![0.0; d];
        let tang_axes: Vec<usize> = (0..d).filter(|&a| a != j).collect();
        for (pos, &a) in tang_axes.iter().enumerate() {
            freq_real[a] = grid.freq(a, tang_idx[pos]);
        }
        for p in &poles {
            let q = (p.location)(&zero_space, &freq_real);
            let r1 = (p.residue)(&zero_space, &freq_real);
            let decay = (I * q * h).exp();
            let mut acc = Complex64::default();
            let mut prev = Complex64::default();
            for ij in 0..n_j {
                let mut idx = tang_idx.clone();
                idx.insert(j, ij);
                let ft = part.coeffs[IxDyn(&idx)];
                if ij > 0 {
                    acc = decay * acc + I * (h / 2.0) * (ft + decay * prev);
                }
                prev = ft;
                out_arr[IxDyn(&idx)] += r1 * acc;
            }
        }
        let mut carry = true;
        for pos in (0..tang_idx.len()).rev() {
            if carry {
                tang_idx[pos] += 1;
                if tang_idx[pos] == tang_shape[pos] {
                    tang_idx[pos] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    let data = crate::grid::FourierData {
        grid: grid.clone(),
        coeffs: out_arr,
        kind: TransformKind::PartialTangential,
        axes: (0..d).collect(),
    };
    let tang_axes: Vec<usize> = (0..d).filter(|&a| a != j).collect();
    let out = inverse_over_axes(&data, &tang_axes)?;
    out.assert_finite()?;
    Ok(out)
}

/// `Op((i d_eta)^p a)(g x delta)`.  Equals pointwise multiplication of the
/// residue action by `rho^p` up to discretization; falls back to direct
/// quadrature when the derived pole order would exceed two.
pub fn rho_compose(sym: &Symbol, g: &BoundaryDistribution, p: u32) -> Result<GridFunction> {
    if p == 0 {
        return apply_to_boundary(sym, g);
    }
    let mut current = sym.clone();
    let mut order_exceeded = false;
    for _ in 0..p {
        match eta_derivative(&current, g.axis) {
            Ok(next) => current = next,
            Err(_) => {
                order_exceeded = true;
                break;
            }
        }
    }
    if order_exceeded {
        // rebuild the exact derivative evaluator and integrate directly
        let mut derived = sym.clone();
        derived.poles.clear();
        for _ in 0..p {
            derived = eta_derivative(&derived, g.axis)?;
        }
        apply_to_boundary_direct(&derived, g)
    } else if current.poles_on(g.axis).iter().any(|q| q.order > 2) {
        apply_to_boundary_direct(&current, g)
    } else {
        apply_to_boundary(&current, g)
    }
}

/// `Op_b(alpha) g_b` with `alpha = boundary_symbol(sym, 0)`: the boundary
/// trace of the volume action, computed on the face.
pub fn restrict_compose(sym: &Symbol, g: &BoundaryDistribution) -> Result<GridFunction> {
    let decomposable_minus_one = sym.order == -1.0 && !sym.poles_on(g.axis).is_empty();
    if sym.order > -2.0 && !decomposable_minus_one {
        return Err(Error::Precondition(
            "restrict_compose needs order <= -2 or a decomposable order -1 symbol".into(),
        ));
    }
    let alpha = boundary_symbol(sym, 0.0, g.axis)?;
    quantize_face(&alpha, &g.density, g.axis)
}

/// Tangential quantization on a face: multiplier over the face frequencies.
pub fn quantize_face(sym: &Symbol, face: &GridFunction, face_axis: usize) -> Result<GridFunction> {
    let data = fft_full(face)?;
    let grid = face.grid.clone();
    let d = grid.dim();
    let face_axes = face.value_axes();
    if !sym.x_dependent {
        let mut out = data;
        let zero_space = vec![0.0; d];
        let mut freq = vec![Complex64::default(); d];
        for (idx, v) in out.coeffs.indexed_iter_mut() {
            for f in freq.iter_mut() {
                *f = Complex64::default();
            }
            for (pos, &a) in face_axes.iter().enumerate() {
                freq[a] = Complex64::new(grid.freq(a, idx[pos]), 0.0);
            }
            *v *= sym.eval(&zero_space, &freq);
        }
        let g = inverse(&out, Support::BoundaryFace(face_axis));
        g.assert_finite()?;
        Ok(g)
    } else {
        let n_points = face.values.len();
        let n_freqs = data.coeffs.len();
        if n_points * n_freqs > KN_COST_CAP {
            return Err(Error::CostCap("face quantization cost cap exceeded".into()));
        }
        let coeffs: Vec<(Vec<usize>, Complex64)> = data
            .coeffs
            .indexed_iter()
            .map(|(idx, v)| (idx.slice().to_vec(), *v))
            .collect();
        let dk: f64 = face_axes.iter().map(|&a| grid.freq_step(a)).product();
        let mut out = GridFunction::zeros(grid.clone(), Support::BoundaryFace(face_axis));
        let indices: Vec<Vec<usize>> = out
            .values
            .indexed_iter()
            .map(|(idx, _)| idx.slice().to_vec())
            .collect();
        let flat: Vec<Complex64> = indices
            .par_iter()
            .map(|idx| {
                // space point: face coordinates with rho_j = 0
                let mut x = vec![0.0; d];
                for (pos, &a) in face_axes.iter().enumerate() {
                    x[a] = grid.coord(a, idx[pos]);
                }
                let mut acc = Complex64::default();
                let mut freq = vec![Complex64::default(); d];
                for (kidx, c) in &coeffs {
                    let mut phase = 0.0;
                    for (pos, &a) in face_axes.iter().enumerate() {
                        let k = grid.freq(a, kidx[pos]);
                        freq[a] = Complex64::new(k, 0.0);
                        phase += x[a] * k;
                    }
                    acc += sym.eval(&x, &freq) * c * Complex64::from_polar(1.0, phase);
                }
                acc * dk
            })
            .collect();
        let shape: Vec<usize> = face_axes.iter().map(|&a| grid.points[a]).collect();
        out.values = ArrayD::from_shape_vec(IxDyn(&shape), flat).expect("shape");
        out.assert_finite()?;
        Ok(out)
    }
}
