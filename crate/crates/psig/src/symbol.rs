//! Symbols of pseudodifferential operators.
//!
//! A [`Symbol`] is an order-`k` function `a(x, rho, xi, eta)` evaluated over
//! grid points and (complex) frequencies, optionally carrying meromorphic
//! pole data in one of the normal frequencies.  Class membership
//! (`|a| <= C (1+|xi|^2+eta^2)^{k/2}` and the order drop of derivatives) is
//! checked statistically on dyadic frequency shells by [`validate_symbol`];
//! these are sampled fits, never proofs.
//!
//! Pole data stores the Laurent coefficients at each pole up to order two.
//! Higher pole orders are rejected by the calculus.

use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Binding, Expr, Var};

/// Evaluator over a real space point and complex frequency vector.
pub type SpaceFreqFn = Arc<dyn Fn(&[f64], &[Complex64]) -> Complex64 + Send + Sync>;

/// Coefficient callable of pole data: `(space, freqs)` with the pole-axis
/// frequency slot ignored.
pub type CoefFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfPlane {
    Upper,
    Lower,
}

/// A pole `eta = q(x, rho, xi)` of a symbol, with Laurent data.
///
/// `residue` is the coefficient of `1/(eta - q)`; `second_order`, when the
/// pole has order two, the coefficient of `1/(eta - q)^2`.
#[derive(Clone)]
pub struct PoleData {
    /// Frequency slot the pole lives in (a normal axis).
    pub axis: usize,
    pub location: CoefFn,
    pub half_plane: HalfPlane,
    pub residue: CoefFn,
    pub second_order: Option<CoefFn>,
    pub order: u8,
    pub elliptic_imaginary: bool,
}

impl fmt::Debug for PoleData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoleData")
            .field("axis", &self.axis)
            .field("half_plane", &self.half_plane)
            .field("order", &self.order)
            .field("elliptic_imaginary", &self.elliptic_imaginary)
            .finish()
    }
}

#[derive(Clone)]
enum Evaluator {
    /// Expression tree scaled by a complex constant (keeps eta derivatives
    /// exact to any order).
    Expr { tree: Expr, scale: Complex64 },
    Func(SpaceFreqFn),
}

/// An order-`k` symbol with optional pole structure.
#[derive(Clone)]
pub struct Symbol {
    pub order: f64,
    pub binding: Binding,
    eval: Evaluator,
    pub x_dependent: bool,
    pub poles: Vec<PoleData>,
    pub label: String,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({}, order {})", self.label, self.order)
    }
}

impl Symbol {
    pub fn from_expr(tree: Expr, order: f64, binding: Binding, label: &str) -> Self {
        let x_dependent = tree_uses_space(&tree);
        Symbol {
            order,
            binding,
            eval: Evaluator::Expr { tree, scale: Complex64::new(1.0, 0.0) },
            x_dependent,
            poles: Vec::new(),
            label: label.to_string(),
        }
    }

    pub fn parse(src: &str, order: f64, binding: Binding) -> Result<Self> {
        let tree = crate::expr::parse(src, binding)?;
        Ok(Self::from_expr(tree, order, binding, src))
    }

    pub fn from_fn(f: SpaceFreqFn, order: f64, binding: Binding, x_dependent: bool, label: &str) -> Self {
        Symbol {
            order,
            binding,
            eval: Evaluator::Func(f),
            x_dependent,
            poles: Vec::new(),
            label: label.to_string(),
        }
    }

    pub fn with_poles(mut self, poles: Vec<PoleData>) -> Self {
        self.poles = poles;
        self
    }

    pub fn eval(&self, space: &[f64], freq: &[Complex64]) -> Complex64 {
        match &self.eval {
            Evaluator::Expr { tree, scale } => *scale * tree.eval(space, freq),
            Evaluator::Func(f) => f(space, freq),
        }
    }

    /// Poles in a given frequency slot.
    pub fn poles_on(&self, axis: usize) -> Vec<&PoleData> {
        self.poles.iter().filter(|p| p.axis == axis).collect()
    }

    /// Frequency slot of the first normal axis, the default eta.
    pub fn eta_slot(&self) -> usize {
        self.binding.n_tangential
    }
}

fn tree_uses_space(e: &Expr) -> bool {
    match e {
        Expr::Num(_) => false,
        Expr::Var(Var::Space(_)) => true,
        Expr::Var(Var::Freq(_)) => false,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            tree_uses_space(a) || tree_uses_space(b)
        }
        Expr::Neg(a) | Expr::Exp(a) | Expr::Sqrt(a) => tree_uses_space(a),
        Expr::Pow(a, _) => tree_uses_space(a),
    }
}

/// The smooth compactly supported tangential cutoff: `chi(0) = 1`,
/// `chi = 0` for `|xi| >= R`.
pub fn bump(xi_norm_sq: f64, radius: f64) -> f64 {
    let s = xi_norm_sq / (radius * radius);
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s)).exp()
    }
}

/// `Lambda^{-|s|}`: symbol `(1 + |xi|^2 + eta^2)^{-|s|/2}` over all
/// frequency slots.
pub fn lambda_symbol(s: f64, binding: Binding) -> Symbol {
    lambda_symbol_masked(s, binding, &(0..binding.n_tangential + binding.n_normal).collect::<Vec<_>>())
}

/// Tangential/partial variant of [`lambda_symbol`]: only the listed
/// frequency slots enter the bracket (the `Lambda_{bj}` device).
pub fn lambda_symbol_masked(s: f64, binding: Binding, slots: &[usize]) -> Symbol {
    let slots = slots.to_vec();
    let order = -s.abs();
    let p = -s.abs() / 2.0;
    let label = format!("lambda^{{-{}}} on {:?}", s.abs(), slots);
    let slots2 = slots.clone();
    let f: SpaceFreqFn = Arc::new(move |_space, freq| {
        let mut b = Complex64::new(1.0, 0.0);
        for &i in &slots2 {
            b += freq[i] * freq[i];
        }
        b.powf(p)
    });
    Symbol::from_fn(f, order, binding, false, &label)
}

/// `1/(m^2 + |xi|^2 + |eta|^2)^power` with full pole data on `pole_axis`.
///
/// The poles sit at `eta = +- i c` with `c = sqrt(m^2 + rest)`, the model
/// inverse-elliptic symbol family used throughout the tests.
pub fn elliptic_inverse_symbol(binding: Binding, pole_axis: usize, mass_sq: f64, power: u8) -> Symbol {
    assert!(power == 1 || power == 2, "only powers 1 and 2 carry pole data");
    let dim = binding.n_tangential + binding.n_normal;
    let f: SpaceFreqFn = {
        let p = power as i32;
        Arc::new(move |_s, freq| {
            let mut b = Complex64::new(mass_sq, 0.0);
            for v in freq.iter() {
                b += v * v;
            }
            Complex64::new(1.0, 0.0) / b.powi(p)
        })
    };
    let c_of = move |freq: &[f64], axis: usize| -> f64 {
        let mut b = mass_sq;
        for (i, v) in freq.iter().enumerate() {
            if i != axis {
                b += v * v;
            }
        }
        b.sqrt()
    };
    let mut poles = Vec::new();
    for &up in &[true, false] {
        let sgn = if up { 1.0 } else { -1.0 };
        let location: CoefFn = Arc::new(move |_s, freq| Complex64::new(0.0, sgn * c_of(freq, pole_axis)));
        let (residue, second): (CoefFn, Option<CoefFn>) = if power == 1 {
            // 1/(eta^2+c^2): residue at +-ic is -+ i/(2c)
            let r: CoefFn = Arc::new(move |_s, freq| {
                let c = c_of(freq, pole_axis);
                Complex64::new(0.0, -sgn / (2.0 * c))
            });
            (r, None)
        } else {
            // 1/(eta^2+c^2)^2: at +-ic the order-two coefficient is
            // -1/(4c^2) and the residue -+ i/(4 c^3).
            let r: CoefFn = Arc::new(move |_s, freq| {
                let c = c_of(freq, pole_axis);
                Complex64::new(0.0, -sgn / (4.0 * c * c * c))
            });
            let s2: CoefFn = Arc::new(move |_s, freq| {
                let c = c_of(freq, pole_axis);
                Complex64::new(-1.0 / (4.0 * c * c), 0.0)
            });
            (r, Some(s2))
        };
        poles.push(PoleData {
            axis: pole_axis,
            location,
            half_plane: if up { HalfPlane::Upper } else { HalfPlane::Lower },
            residue,
            second_order: second,
            order: power,
            elliptic_imaginary: mass_sq + 1.0 > 0.0,
        });
    }
    let label = format!("(m2={mass_sq}+|k|^2)^-{power} over {dim} freqs");
    Symbol::from_fn(f, -2.0 * power as f64, binding, false, &label).with_poles(poles)
}

/// A single simple pole `1/(eta - q)` with `q = sign * i * c(rest)`,
/// an order `-1` meromorphic symbol.
pub fn single_pole_symbol(
    binding: Binding,
    pole_axis: usize,
    half_plane: HalfPlane,
    c: CoefFn,
    label: &str,
) -> Symbol {
    let sgn = match half_plane {
        HalfPlane::Upper => 1.0,
        HalfPlane::Lower => -1.0,
    };
    let c2 = c.clone();
    let f: SpaceFreqFn = Arc::new(move |space, freq| {
        let real: Vec<f64> = freq.iter().map(|v| v.re).collect();
        let q = I * sgn * c2(space, &real);
        Complex64::new(1.0, 0.0) / (freq[pole_axis] - q)
    });
    let c3 = c.clone();
    let location: CoefFn = Arc::new(move |space, freq| I * sgn * c3(space, freq));
    let residue: CoefFn = Arc::new(|_s, _f| Complex64::new(1.0, 0.0));
    Symbol::from_fn(f, -1.0, binding, false, label).with_poles(vec![PoleData {
        axis: pole_axis,
        location,
        half_plane,
        residue,
        second_order: None,
        order: 1,
        elliptic_imaginary: true,
    }])
}

/// Sampling lattice for the class-bound fits: dyadic radii and a handful of
/// directions and base points.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub radii: Vec<f64>,
    pub directions: usize,
    pub space_samples: Vec<Vec<f64>>,
}

impl LatticeSpec {
    pub fn standard(binding: Binding) -> Self {
        let radii = (0..8).map(|j| 2f64.powi(j)).collect();
        let dim = binding.n_tangential + binding.n_normal;
        LatticeSpec {
            radii,
            directions: 8,
            space_samples: vec![vec![0.0; dim], vec![0.5; dim], vec![-1.0; dim]],
        }
    }
}

/// Result of the sampled symbol-class validation.
#[derive(Debug, Clone)]
pub struct SymbolReport {
    /// Least-squares order fit of `ln |a|` against `ln (1+r^2)^(1/2)`.
    pub fitted_order: f64,
    /// Constant `C` in `|a| <= C (1+r^2)^{k/2}` at the fitted order.
    pub constant: f64,
    /// Fitted order of the first eta finite difference.
    pub eta_derivative_order: f64,
    /// Fitted order of the first xi finite difference.
    pub xi_derivative_order: f64,
    /// Per-space-sample constants (uniformity diagnostics).
    pub per_point_constants: Vec<f64>,
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

fn shell_points(dim: usize, r: f64, directions: usize) -> Vec<Vec<f64>> {
    // fixed quasi-random directions, deterministic
    let mut out = Vec::new();
    for d in 0..directions {
        let mut v = vec![0.0; dim];
        let mut norm = 0.0;
        for (i, vi) in v.iter_mut().enumerate() {
            let t = ((d * dim + i) as f64 + 1.0) * 0.7548776662466927;
            *vi = (2.0 * (t - t.floor()) - 1.0) + 0.1;
            norm += *vi * *vi;
        }
        let norm = norm.sqrt();
        for vi in v.iter_mut() {
            *vi *= r / norm;
        }
        out.push(v);
    }
    out
}

/// Sampled class-bound validation of a symbol.
pub fn validate_symbol(sym: &Symbol, lattice: &LatticeSpec) -> Result<SymbolReport> {
    let dim = sym.binding.n_tangential + sym.binding.n_normal;
    let mut ln_r = Vec::new();
    let mut ln_a = Vec::new();
    let mut ln_deta = Vec::new();
    let mut ln_dxi = Vec::new();
    let eta_slot = sym.eta_slot();
    let xi_slot = 0usize;
    let mut per_point: Vec<f64> = vec![0.0; lattice.space_samples.len()];
    for &r in &lattice.radii {
        let mut amax: f64 = 0.0;
        let mut deta_max: f64 = 0.0;
        let mut dxi_max: f64 = 0.0;
        for pt in shell_points(dim, r, lattice.directions) {
            let freq: Vec<Complex64> = pt.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for (pi, space) in lattice.space_samples.iter().enumerate() {
                let v = sym.eval(space, &freq);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "symbol {} non-finite at shell r={r}",
                        sym.label
                    )));
                }
                amax = amax.max(v.norm());
                let bracket = (1.0 + pt.iter().map(|x| x * x).sum::<f64>()).powf(sym.order / 2.0);
                per_point[pi] = per_point[pi].max(v.norm() / bracket);
                let h = 1e-4 * (1.0 + r);
                let mut fp = freq.clone();
                fp[eta_slot] += h;
                let mut fm = freq.clone();
                fm[eta_slot] -= h;
                let de = (sym.eval(space, &fp) - sym.eval(space, &fm)).norm() / (2.0 * h);
                deta_max = deta_max.max(de);
                let mut gp = freq.clone();
                gp[xi_slot] += h;
                let mut gm = freq.clone();
                gm[xi_slot] -= h;
                let dx = (sym.eval(space, &gp) - sym.eval(space, &gm)).norm() / (2.0 * h);
                dxi_max = dxi_max.max(dx);
            }
        }
        ln_r.push((1.0 + r * r).sqrt().ln());
        ln_a.push(amax.max(1e-300).ln());
        ln_deta.push(deta_max.max(1e-300).ln());
        ln_dxi.push(dxi_max.max(1e-300).ln());
    }
    // fit over the upper shells where the asymptotics dominate
    let tail = ln_r.len() / 2;
    let fitted_order = lsq_slope(&ln_r[tail..], &ln_a[tail..]);
    let eta_derivative_order = lsq_slope(&ln_r[tail..], &ln_deta[tail..]);
    let xi_derivative_order = lsq_slope(&ln_r[tail..], &ln_dxi[tail..]);
    let constant = per_point.iter().cloned().fold(0.0, f64::max);
    Ok(SymbolReport {
        fitted_order,
        constant,
        eta_derivative_order,
        xi_derivative_order,
        per_point_constants: per_point,
    })
}

/// `i d/d eta` of a symbol: order drops by one, pole orders increment.
///
/// Expression-backed symbols are differentiated exactly; closure-backed
/// symbols fall back to Richardson-extrapolated central differences.
pub fn eta_derivative(sym: &Symbol, axis: usize) -> Result<Symbol> {
    for p in sym.poles_on(axis) {
        if p.order >= 2 {
            return Err(Error::Symbol(
                "pole order above two after differentiation is not supported".into(),
            ));
        }
    }
    let eval = match &sym.eval {
        Evaluator::Expr { tree, scale } => Evaluator::Expr {
            tree: tree.derivative(Var::Freq(axis)),
            scale: scale * I,
        },
        Evaluator::Func(f) => {
            let f = f.clone();
            let g: SpaceFreqFn = Arc::new(move |space, freq| {
                let scale = 1.0 + freq[axis].norm();
                let h1 = 1e-5 * scale;
                let d = |h: f64| {
                    let mut fp = freq.to_vec();
                    fp[axis] += h;
                    let mut fm = freq.to_vec();
                    fm[axis] -= h;
                    (f(space, &fp) - f(space, &fm)) / (2.0 * h)
                };
                // one Richardson step on the central difference
                let d1 = d(h1);
                let d2 = d(h1 / 2.0);
                I * (d2 * 4.0 - d1) / 3.0
            });
            Evaluator::Func(g)
        }
    };
    let poles = sym
        .poles
        .iter()
        .map(|p| {
            if p.axis != axis {
                return p.clone();
            }
            // i d/d eta [ r/(eta-q) ] = -i r / (eta-q)^2
            let r = p.residue.clone();
            let second: CoefFn = Arc::new(move |space, freq| -I * r(space, freq));
            PoleData {
                axis: p.axis,
                location: p.location.clone(),
                half_plane: p.half_plane,
                residue: Arc::new(|_s, _f| Complex64::new(0.0, 0.0)),
                second_order: Some(second),
                order: 2,
                elliptic_imaginary: p.elliptic_imaginary,
            }
        })
        .collect();
    Ok(Symbol {
        order: sym.order - 1.0,
        binding: sym.binding,
        eval,
        x_dependent: sym.x_dependent,
        poles,
        label: format!("i d_eta {}", sym.label),
    })
}

/// Adaptive truncated trapezoid quadrature of `f` over the real line.
///
/// The half-width doubles and the step halves until both the increment and
/// the tail bound (from the order-`k` majorant) drop below `tol`.
pub fn integrate_line(
    f: &dyn Fn(f64) -> Complex64,
    order: f64,
    tol: f64,
) -> Result<Complex64> {
    if order > -1.0 {
        return Err(Error::Quadrature(format!(
            "symbol of order {order} is not integrable over eta"
        )));
    }
    let mut half = 64.0;
    let mut n = 2048usize;
    let trapz = |t: f64, m: usize| -> Complex64 {
        let h = 2.0 * t / m as f64;
        let mut acc = (f(-t) + f(t)) * 0.5;
        for i in 1..m {
            acc += f(-t + h * i as f64);
        }
        acc * h
    };
    let mut last = trapz(half, n);
    for _ in 0..24 {
        // tail estimate from the majorant |f| ~ C |eta|^order
        let edge = f(half).norm().max(f(-half).norm());
        let tail = edge * half / (order.abs() - 1.0).max(0.5);
        let finer = trapz(half, n * 2);
        let step_err = (finer - last).norm();
        if step_err < tol && tail < tol {
            return Ok(finer);
        }
        if tail >= tol {
            half *= 2.0;
            n *= 2;
            last = trapz(half, n);
        } else {
            n *= 2;
            last = finer;
        }
        if n > 1 << 22 {
            break;
        }
    }
    Err(Error::Quadrature("eta quadrature did not converge".into()))
}

/// Boundary symbol `alpha(x, rho0, xi) = (2 pi)^-1 Int a(x, rho0, xi, eta) d eta`.
///
/// With pole data present the integral is the one-sided residue limit
/// `-i * sum of lower-half-plane residues` (the contour value as
/// `rho -> 0^-`); otherwise the order must be at most `-2` and adaptive
/// quadrature is used.  The result is a tangential symbol of order `k+1`.
pub fn boundary_symbol(sym: &Symbol, rho0: f64, axis: usize) -> Result<Symbol> {
    let has_poles = !sym.poles_on(axis).is_empty();
    if !has_poles && sym.order > -2.0 {
        return Err(Error::Precondition(format!(
            "boundary symbol needs order <= -2 or pole data; got order {} without poles",
            sym.order
        )));
    }
    let binding = sym.binding;
    let label = format!("boundary[{}]", sym.label);
    let order = sym.order + 1.0;
    let sym2 = sym.clone();
    let f: SpaceFreqFn = Arc::new(move |space, freq| {
        // the space slot of the integrated normal coordinate matches the
        // frequency slot (space and frequency vectors are parallel)
        let mut space_fixed = space.to_vec();
        if axis < space_fixed.len() {
            space_fixed[axis] = rho0;
        }
        let real: Vec<f64> = freq.iter().map(|v| v.re).collect();
        let poles = sym2.poles_on(axis);
        if !poles.is_empty() {
            let mut acc = Complex64::default();
            for p in poles {
                if p.half_plane == HalfPlane::Lower {
                    let r1 = (p.residue)(&space_fixed, &real);
                    acc += -I * r1;
                }
            }
            acc
        } else {
            let fr = freq.to_vec();
            let val = integrate_line(
                &|eta| {
                    let mut fx = fr.clone();
                    fx[axis] = Complex64::new(eta, 0.0);
                    sym2.eval(&space_fixed, &fx)
                },
                sym2.order,
                1e-10,
            )
            .unwrap_or(Complex64::new(f64::NAN, 0.0));
            val / (2.0 * std::f64::consts::PI)
        }
    });
    Ok(Symbol::from_fn(f, order, binding, sym.x_dependent, &label))
}

/// Multiply a symbol by the fixed smooth bump `chi(xi)` of a given radius.
/// Pole residues are multiplied by the same cutoff; the class constant never
/// increases since `chi <= 1`.
pub fn apply_cutoff(sym: &Symbol, radius: f64) -> Symbol {
    let nt = sym.binding.n_tangential;
    let chi_of = move |freq_re: &[f64]| -> f64 {
        let s: f64 = freq_re[..nt].iter().map(|v| v * v).sum();
        bump(s, radius)
    };
    let inner = sym.clone();
    let f: SpaceFreqFn = Arc::new(move |space, freq| {
        let re: Vec<f64> = freq.iter().map(|v| v.re).collect();
        let chi = chi_of(&re);
        if chi == 0.0 {
            Complex64::default()
        } else {
            inner.eval(space, freq) * chi
        }
    });
    let poles = sym
        .poles
        .iter()
        .map(|p| {
            let r = p.residue.clone();
            let s2 = p.second_order.clone();
            let residue: CoefFn = Arc::new(move |space, freq| r(space, freq) * chi_of(freq));
            let second: Option<CoefFn> = s2.map(|s| {
                let s = s.clone();
                let g: CoefFn = Arc::new(move |space: &[f64], freq: &[f64]| s(space, freq) * chi_of(freq));
                g
            });
            PoleData {
                axis: p.axis,
                location: p.location.clone(),
                half_plane: p.half_plane,
                residue,
                second_order: second,
                order: p.order,
                elliptic_imaginary: p.elliptic_imaginary,
            }
        })
        .collect();
    Symbol {
        order: sym.order,
        binding: sym.binding,
        eval: Evaluator::Func(f),
        x_dependent: sym.x_dependent,
        poles,
        label: format!("chi_{radius} {}", sym.label),
    }
}

/// Decomposition into a meromorphic principal part plus an order `-N`
/// remainder.
pub struct SymbolDecomposition {
    pub principal: Symbol,
    pub remainder: Symbol,
    pub n: u32,
}

/// Split a symbol into its stored meromorphic part and a remainder, checking
/// that the remainder order fit is at most `-N` (within 0.5).
pub fn decompose(sym: &Symbol, axis: usize, n: u32) -> Result<SymbolDecomposition> {
    if sym.poles_on(axis).is_empty() {
        return Err(Error::Precondition("decompose needs pole data".into()));
    }
    if (n as f64) < sym.order.abs() {
        return Err(Error::Precondition("N must be at least |k|".into()));
    }
    let principal = principal_part(sym, axis);
    let psym = principal.clone();
    let ssym = sym.clone();
    let rem_eval: SpaceFreqFn = Arc::new(move |space, freq| ssym.eval(space, freq) - psym.eval(space, freq));
    let remainder = Symbol::from_fn(
        rem_eval,
        -(n as f64),
        sym.binding,
        sym.x_dependent,
        &format!("remainder[{}]", sym.label),
    );
    let report = validate_symbol(&remainder, &LatticeSpec::standard(sym.binding))?;
    if report.fitted_order > -(n as f64) + 0.5 {
        return Err(Error::Symbol(format!(
            "remainder order fit {:.2} exceeds -{n} by more than 0.5",
            report.fitted_order
        )));
    }
    Ok(SymbolDecomposition {
        principal,
        remainder,
        n,
    })
}

/// The evaluator of the stored meromorphic part:
/// `sum_p [ r1/(eta - q) + r2/(eta - q)^2 ]`.
pub fn principal_part(sym: &Symbol, axis: usize) -> Symbol {
    let poles: Vec<PoleData> = sym.poles_on(axis).into_iter().cloned().collect();
    let poles2 = poles.clone();
    let f: SpaceFreqFn = Arc::new(move |space, freq| {
        let real: Vec<f64> = freq.iter().map(|v| v.re).collect();
        let mut acc = Complex64::default();
        for p in &poles2 {
            let q = (p.location)(space, &real);
            let d = freq[axis] - q;
            acc += (p.residue)(space, &real) / d;
            if let Some(s2) = &p.second_order {
                acc += s2(space, &real) / (d * d);
            }
        }
        acc
    });
    Symbol {
        order: sym.order,
        binding: sym.binding,
        eval: Evaluator::Func(f),
        x_dependent: sym.x_dependent,
        poles,
        label: format!("principal[{}]", sym.label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn b2() -> Binding {
        Binding::new(1, 1)
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn order_fit_of_inverse_bracket() {
        let sym = Symbol::parse("1/(1+xi^2+eta^2)", -2.0, b2()).unwrap();
        let rep = validate_symbol(&sym, &LatticeSpec::standard(b2())).unwrap();
        assert!((rep.fitted_order + 2.0).abs() < 0.1, "{}", rep.fitted_order);
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
    }

    #[test]
    fn order_fit_of_constant_symbol() {
        let sym = Symbol::parse("1", 0.0, b2()).unwrap();
        let rep = validate_symbol(&sym, &LatticeSpec::standard(b2())).unwrap();
        assert!(rep.fitted_order.abs() < 0.05);
    }

    #[test]
    fn order_fit_of_odd_symbol() {
        let sym = Symbol::parse("eta/(1+xi^2+eta^2)", -1.0, b2()).unwrap();
        let rep = validate_symbol(&sym, &LatticeSpec::standard(b2())).unwrap();
        assert!((rep.fitted_order + 1.0).abs() < 0.1, "{}", rep.fitted_order);
    }

    #[test]
    fn eta_derivative_value_and_order() {
        let sym = Symbol::parse("1/(1+xi^2+eta^2)", -2.0, b2()).unwrap();
        let d = eta_derivative(&sym, 1).unwrap();
        // i d_eta a at (xi, eta) = (0, 1) equals -i/2
        let v = d.eval(&[0.0, 0.0], &[c(0.0), c(1.0)]);
        assert!((v - Complex64::new(0.0, -0.5)).norm() < 1e-12, "{v}");
        let rep = validate_symbol(&d, &LatticeSpec::standard(b2())).unwrap();
        assert!((rep.fitted_order + 3.0).abs() < 0.2, "{}", rep.fitted_order);
        // independent of eta -> derivative vanishes
        let flat = Symbol::parse("exp(-xi^2)", 0.0, b2()).unwrap();
        let dz = eta_derivative(&flat, 1).unwrap();
        assert!(dz.eval(&[0.0, 0.0], &[c(1.0), c(2.0)]).norm() < 1e-14);
    }

    #[test]
    fn closure_backed_derivative_close_to_exact() {
        let sym = elliptic_inverse_symbol(b2(), 1, 1.0, 1);
        let d = eta_derivative(&sym, 1).unwrap();
        let v = d.eval(&[0.0, 0.0], &[c(0.0), c(1.0)]);
        assert!((v - Complex64::new(0.0, -0.5)).norm() < 1e-9, "{v}");
    }

    #[test]
    fn derivative_drops_validated_order_by_about_one() {
        for (expr, k) in [("1/(1+xi^2+eta^2)", -2.0), ("1/(1+xi^2+eta^2)^2", -4.0)] {
            let sym = Symbol::parse(expr, k, b2()).unwrap();
            let d = eta_derivative(&sym, 1).unwrap();
            let r0 = validate_symbol(&sym, &LatticeSpec::standard(b2())).unwrap();
            let r1 = validate_symbol(&d, &LatticeSpec::standard(b2())).unwrap();
            let drop = r0.fitted_order - r1.fitted_order;
            assert!((drop - 1.0).abs() < 0.2, "drop {drop}");
        }
    }

    #[test]
    fn boundary_symbol_residue_and_quadrature_agree() {
        // alpha(xi) = 1/(2 sqrt(1+xi^2)); at xi = 0 the value is 1/2.
        let sym = elliptic_inverse_symbol(b2(), 1, 1.0, 1);
        let alpha = boundary_symbol(&sym, 0.0, 1).unwrap();
        let v0 = alpha.eval(&[0.0, 0.0], &[c(0.0), c(0.0)]);
        assert_relative_eq!(v0.re, 0.5, epsilon = 1e-12);
        assert!(v0.im.abs() < 1e-12);
        let v1 = alpha.eval(&[0.0, 0.0], &[c(1.5), c(0.0)]);
        assert_relative_eq!(v1.re, 0.5 / (1.0 + 2.25f64).sqrt(), epsilon = 1e-12);

        // quadrature path: same symbol without pole data
        let plain = Symbol::parse("1/(1+xi^2+eta^2)", -2.0, b2()).unwrap();
        let alpha_q = boundary_symbol(&plain, 0.0, 1).unwrap();
        for xi in [0.0, 0.7, 2.0] {
            let a = alpha.eval(&[0.0, 0.0], &[c(xi), c(0.0)]);
            let b = alpha_q.eval(&[0.0, 0.0], &[c(xi), c(0.0)]);
            assert!((a - b).norm() < 1e-8, "xi={xi}: {a} vs {b}");
        }
    }

    #[test]
    fn boundary_symbol_of_zero_is_zero() {
        let zero = Symbol::parse("0", -3.0, b2()).unwrap();
        let alpha = boundary_symbol(&zero, 0.0, 1).unwrap();
        assert!(alpha.eval(&[0.0, 0.0], &[c(0.3), c(0.0)]).norm() < 1e-12);
    }

    #[test]
    fn boundary_symbol_rejects_non_integrable() {
        let bad = Symbol::parse("1/(1+xi^2+eta^2)", -1.0, b2()).unwrap();
        // order -1 without pole data: rejected
        let mut s = bad;
        s.order = -1.0;
        assert!(boundary_symbol(&s, 0.0, 1).is_err());
    }

    #[test]
    fn cutoff_support_and_normalization() {
        let sym = Symbol::parse("1/(1+xi^2+eta^2)", -2.0, b2()).unwrap();
        let cut = apply_cutoff(&sym, 4.0);
        // outside twice the radius the cutoff kills the symbol
        assert!(cut.eval(&[0.0, 0.0], &[c(8.0), c(0.3)]).norm() == 0.0);
        // at xi = 0 the bump equals one
        let a = cut.eval(&[0.0, 0.0], &[c(0.0), c(0.7)]);
        let b = sym.eval(&[0.0, 0.0], &[c(0.0), c(0.7)]);
        assert!((a - b).norm() < 1e-15);
        // the class constant does not increase
        let r0 = validate_symbol(&sym, &LatticeSpec::standard(b2())).unwrap();
        let r1 = validate_symbol(&cut, &LatticeSpec::standard(b2())).unwrap();
        assert!(r1.constant <= r0.constant * (1.0 + 1e-12));
    }

    #[test]
    fn lambda_symbol_values() {
        let s2 = lambda_symbol(2.0, b2());
        assert!((s2.eval(&[0.0, 0.0], &[c(0.0), c(0.0)]) - c(1.0)).norm() < 1e-15);
        let s0 = lambda_symbol(0.0, b2());
        assert!((s0.eval(&[0.0, 0.0], &[c(3.0), c(-2.0)]) - c(1.0)).norm() < 1e-15);
        let s1 = lambda_symbol(1.0, b2());
        let v = s1.eval(&[0.0, 0.0], &[c(1.0), Complex64::new(2f64.sqrt(), 0.0)]);
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn decompose_rational_plus_gaussian() {
        let base = elliptic_inverse_symbol(b2(), 1, 1.0, 1);
        let gauss = Symbol::parse("exp(-xi^2-eta^2)", -8.0, b2()).unwrap();
        let sum_eval: SpaceFreqFn = {
            let b = base.clone();
            let g = gauss.clone();
            Arc::new(move |s, f| b.eval(s, f) + g.eval(s, f))
        };
        let sym = Symbol::from_fn(sum_eval, -2.0, b2(), false, "rational+gaussian")
            .with_poles(base.poles.clone());
        let dec = decompose(&sym, 1, 4).unwrap();
        // principal + remainder reproduces the evaluator pointwise
        for (xi, eta) in [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5)] {
            let f = [c(xi), c(eta)];
            let lhs = dec.principal.eval(&[0.0, 0.0], &f) + dec.remainder.eval(&[0.0, 0.0], &f);
            let rhs = sym.eval(&[0.0, 0.0], &f);
            assert!((lhs - rhs).norm() < 1e-10);
        }
        // purely rational symbol: remainder vanishes identically
        let dec0 = decompose(&base, 1, 4).unwrap();
        for (xi, eta) in [(0.5, 1.0), (2.0, -1.0)] {
            assert!(dec0.remainder.eval(&[0.0, 0.0], &[c(xi), c(eta)]).norm() < 1e-12);
        }
    }

    #[test]
    fn decompose_rejects_fat_remainder() {
        let base = elliptic_inverse_symbol(b2(), 1, 1.0, 1);
        let slow = Symbol::parse("1/(1+xi^2+eta^2)", -2.0, b2()).unwrap();
        let sum_eval: SpaceFreqFn = {
            let b = base.clone();
            let s = slow.clone();
            Arc::new(move |sp, f| b.eval(sp, f) + s.eval(sp, f) * c(2.0))
        };
        let sym = Symbol::from_fn(sum_eval, -2.0, b2(), false, "fat remainder")
            .with_poles(base.poles.clone());
        assert!(decompose(&sym, 1, 6).is_err());
    }

    #[test]
    fn pole_sign_matches_half_plane() {
        let sym = elliptic_inverse_symbol(b2(), 1, 1.0, 1);
        for p in &sym.poles {
            let q = (p.location)(&[0.0, 0.0], &[1.0, 0.0]);
            match p.half_plane {
                HalfPlane::Upper => assert!(q.im > 0.0),
                HalfPlane::Lower => assert!(q.im < 0.0),
            }
            // elliptic imaginary part: |Im q| >= c (1+|xi|) on |xi| >= 1
            let q1 = (p.location)(&[0.0, 0.0], &[3.0, 0.0]);
            assert!(q1.im.abs() >= 0.9 * (1.0 + 3.0) / 2.0);
        }
    }
}
