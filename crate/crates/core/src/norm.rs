//! Minkowski norms: evaluation, first and second derivatives, and the polar
//! (dual) norm whose unit ball is the Wulff shape.
//!
//! All built-in norms are even, 1-homogeneous and uniformly elliptic, i.e.
//! `D²(F²/2)` is positive definite away from the origin. The `lq` family is
//! blended with a small Euclidean part so that this holds on the axes too.

use alloc::{sync::Arc, vec, vec::Vec};
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::{cos, dot, norm2, powf, sin, sqrt};
use crate::small;

/// Below this Euclidean length a vector is treated as zero by the
/// derivative routines.
pub const GRADIENT_FLOOR: f64 = 1e-14;

/// Default Euclidean blending weight of the smoothed `lq` norm.
pub const DEFAULT_LQ_SMOOTHING: f64 = 0.05;

/// A user supplied norm. Implementations must be even, convex and
/// 1-homogeneous and must provide their own gradient.
pub trait CustomNorm: Send + Sync {
    fn eval(&self, xi: &[f64]) -> f64;

    fn grad(&self, xi: &[f64], out: &mut [f64]);

    /// Writes `D²F(ξ)` row-major into `out` and returns `true`, or returns
    /// `false` to fall back to central differences of [`CustomNorm::grad`].
    fn hess(&self, _xi: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn name(&self) -> &str {
        "custom"
    }
}

#[derive(Clone)]
pub enum NormKind {
    Euclidean,
    /// `F(ξ) = √(ξᵀAξ)`; the inverse is cached for the polar.
    Ellipsoidal { matrix: Vec<f64>, inverse: Vec<f64> },
    /// `F(ξ) = ((1−δ)‖ξ‖_q² + δ|ξ|²)^{1/2}`.
    Lq { q: f64, smoothing: f64 },
    Custom(Arc<dyn CustomNorm>),
}

impl fmt::Debug for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Euclidean => f.write_str("Euclidean"),
            NormKind::Ellipsoidal { matrix, .. } => {
                f.debug_struct("Ellipsoidal").field("matrix", matrix).finish()
            }
            NormKind::Lq { q, smoothing } => f
                .debug_struct("Lq")
                .field("q", q)
                .field("smoothing", smoothing)
                .finish(),
            NormKind::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinkowskiNorm {
    kind: NormKind,
    dim: usize,
}

impl PartialEq for MinkowskiNorm {
    fn eq(&self, other: &Self) -> bool {
        if self.dim != other.dim {
            return false;
        }
        match (&self.kind, &other.kind) {
            (NormKind::Euclidean, NormKind::Euclidean) => true,
            (NormKind::Ellipsoidal { matrix: a, .. }, NormKind::Ellipsoidal { matrix: b, .. }) => {
                a == b
            }
            (
                NormKind::Lq { q: q1, smoothing: s1 },
                NormKind::Lq { q: q2, smoothing: s2 },
            ) => q1 == q2 && s1 == s2,
            (NormKind::Custom(a), NormKind::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl MinkowskiNorm {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { kind: NormKind::Euclidean, dim })
    }

    /// `matrix` is row-major, symmetric positive definite.
    pub fn ellipsoidal(dim: usize, matrix: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: matrix.len() });
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (matrix[i * dim + j], matrix[j * dim + i]);
                if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter("ellipsoidal matrix is not symmetric".into()));
                }
            }
        }
        if !small::is_positive_definite(matrix, dim) {
            return Err(Error::InvalidParameter(
                "ellipsoidal matrix is not positive definite".into(),
            ));
        }
        let inverse = small::inverse(matrix, dim)
            .ok_or_else(|| Error::InvalidParameter("ellipsoidal matrix is singular".into()))?;
        Ok(Self { kind: NormKind::Ellipsoidal { matrix: matrix.to_vec(), inverse }, dim })
    }

    pub fn lq(dim: usize, q: f64, smoothing: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter("lq exponent must satisfy q > 1".into()));
        }
        if !(0.0..1.0).contains(&smoothing) {
            return Err(Error::InvalidParameter("lq smoothing must lie in [0, 1)".into()));
        }
        Ok(Self { kind: NormKind::Lq { q, smoothing }, dim })
    }

    pub fn custom(dim: usize, norm: Arc<dyn CustomNorm>) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { kind: NormKind::Custom(norm), dim })
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.check(xi.len())?;
        Ok(self.eval_unchecked(xi))
    }

    /// `F_ξ(ξ)`, written into `out`.
    pub fn grad(&self, xi: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(xi.len())?;
        self.check(out.len())?;
        check_floor(xi)?;
        self.grad_unchecked(xi, out);
        Ok(())
    }

    /// `D²F(ξ)`, row-major. Callers assemble `D²(F²/2) = F·D²F + F_ξ⊗F_ξ`.
    pub fn hess(&self, xi: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(xi.len())?;
        if out.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim * self.dim, found: out.len() });
        }
        check_floor(xi)?;
        self.hess_unchecked(xi, out)
    }

    /// Smallest eigenvalue of `F·D²F + F_ξ⊗F_ξ` over `samples` quasi-uniform
    /// unit directions. Diagnostic only.
    pub fn ellipticity_constant(&self, samples: usize) -> f64 {
        let n = self.dim;
        let dirs = sphere_directions(n, samples.max(8));
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        let mut worst = f64::INFINITY;
        for d in dirs.chunks(n) {
            let f = self.eval_unchecked(d);
            self.grad_unchecked(d, &mut g);
            if self.hess_unchecked(d, &mut h).is_err() {
                return 0.0;
            }
            let m: Vec<f64> = (0..n * n).map(|k| f * h[k] + g[k / n] * g[k % n]).collect();
            worst = worst.min(small::symmetric_eigenvalues(&m, n)[0]);
        }
        worst
    }

    /// The polar norm in its default mode: closed form when one exists,
    /// numeric supremum otherwise.
    pub fn polar(&self) -> PolarNorm {
        let mode = if self.has_closed_form_polar() {
            PolarMode::ClosedForm
        } else {
            PolarMode::NumericSup
        };
        PolarNorm { base: self.clone(), mode }
    }

    pub fn has_closed_form_polar(&self) -> bool {
        match self.kind {
            NormKind::Euclidean | NormKind::Ellipsoidal { .. } => true,
            NormKind::Lq { smoothing, .. } => smoothing == 0.0,
            NormKind::Custom(_) => false,
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: len });
        }
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Euclidean => norm2(xi),
            NormKind::Ellipsoidal { matrix, .. } => sqrt(quad_form(matrix, xi).max(0.0)),
            NormKind::Lq { q, smoothing } => {
                let m = xi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                let (mut s, mut e) = (0.0, 0.0);
                for x in xi {
                    let y = x.abs() / m;
                    s += powf(y, *q);
                    e += y * y;
                }
                m * sqrt((1.0 - smoothing) * powf(s, 2.0 / q) + smoothing * e)
            }
            NormKind::Custom(c) => c.eval(xi),
        }
    }

    pub(crate) fn grad_unchecked(&self, xi: &[f64], out: &mut [f64]) {
        match &self.kind {
            NormKind::Euclidean => {
                let r = norm2(xi);
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = x / r;
                }
            }
            NormKind::Ellipsoidal { matrix, .. } => {
                let n = self.dim;
                let f = sqrt(quad_form(matrix, xi));
                for i in 0..n {
                    out[i] = dot(&matrix[i * n..(i + 1) * n], xi) / f;
                }
            }
            NormKind::Lq { q, smoothing } => {
                let m = xi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let (s, e) = lq_sums(xi, m, *q);
                let phi = (1.0 - smoothing) * powf(s, 2.0 / q) + smoothing * e;
                let f = sqrt(phi);
                let c = (1.0 - smoothing) * powf(s, 2.0 / q - 1.0);
                for (o, x) in out.iter_mut().zip(xi) {
                    let y = x / m;
                    // ∇Φ / (2F) with Φ evaluated at ξ/m
                    *o = (c * powf(y.abs(), q - 1.0) * y.signum() + smoothing * y) / f;
                }
            }
            NormKind::Custom(c) => c.grad(xi, out),
        }
    }

    pub(crate) fn hess_unchecked(&self, xi: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim;
        match &self.kind {
            NormKind::Euclidean => {
                let r = norm2(xi);
                for i in 0..n {
                    for j in 0..n {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out[i * n + j] = (id - xi[i] * xi[j] / (r * r)) / r;
                    }
                }
            }
            NormKind::Ellipsoidal { matrix, .. } => {
                let f2 = quad_form(matrix, xi);
                let f = sqrt(f2);
                let ax: Vec<f64> = (0..n).map(|i| dot(&matrix[i * n..(i + 1) * n], xi)).collect();
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = (matrix[i * n + j] - ax[i] * ax[j] / f2) / f;
                    }
                }
            }
            NormKind::Lq { q, smoothing } => {
                let q = *q;
                let d = *smoothing;
                let m = xi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let y: Vec<f64> = xi.iter().map(|x| x / m).collect();
                let (s, e) = lq_sums(xi, m, q);
                if q < 2.0 && y.contains(&0.0) {
                    return Err(Error::Unsupported(
                        "lq Hessian with q < 2 is unbounded on coordinate hyperplanes".into(),
                    ));
                }
                let phi = (1.0 - d) * powf(s, 2.0 / q) + d * e;
                let f = sqrt(phi);
                let w: Vec<f64> = y.iter().map(|v| powf(v.abs(), q - 1.0) * v.signum()).collect();
                let c1 = 2.0 * (1.0 - d) * powf(s, 2.0 / q - 1.0);
                let dphi: Vec<f64> = (0..n).map(|i| c1 * w[i] + 2.0 * d * y[i]).collect();
                let c2 = 2.0 * (1.0 - d) * (2.0 - q) * powf(s, 2.0 / q - 2.0);
                for i in 0..n {
                    for j in 0..n {
                        let mut h = c2 * w[i] * w[j];
                        if i == j {
                            h += c1 * (q - 1.0) * powf(y[i].abs(), q - 2.0) + 2.0 * d;
                        }
                        out[i * n + j] =
                            (h / (2.0 * f) - dphi[i] * dphi[j] / (4.0 * f * f * f)) / m;
                    }
                }
            }
            NormKind::Custom(c) => {
                if !c.hess(xi, out) {
                    let r = norm2(xi);
                    let step = 1e-6 * r;
                    let mut xp = xi.to_vec();
                    let mut gp = vec![0.0; n];
                    let mut gm = vec![0.0; n];
                    for j in 0..n {
                        xp[j] = xi[j] + step;
                        c.grad(&xp, &mut gp);
                        xp[j] = xi[j] - step;
                        c.grad(&xp, &mut gm);
                        xp[j] = xi[j];
                        for i in 0..n {
                            out[i * n + j] = (gp[i] - gm[i]) / (2.0 * step);
                        }
                    }
                    for i in 0..n {
                        for j in 0..i {
                            let s = 0.5 * (out[i * n + j] + out[j * n + i]);
                            out[i * n + j] = s;
                            out[j * n + i] = s;
                        }
                    }
                }
            }
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::DegenerateGradient { magnitude: norm2(xi) })
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidParameter("norm dimension must be at least 2".into()));
    }
    Ok(())
}

fn check_floor(xi: &[f64]) -> Result<()> {
    let r = norm2(xi);
    if !(r >= GRADIENT_FLOOR) {
        return Err(Error::DegenerateGradient { magnitude: r });
    }
    Ok(())
}

fn quad_form(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    (0..n).map(|i| x[i] * dot(&a[i * n..(i + 1) * n], x)).sum()
}

/// `(Σ|ξᵢ/m|^q, Σ(ξᵢ/m)²)`.
fn lq_sums(xi: &[f64], m: f64, q: f64) -> (f64, f64) {
    xi.iter().fold((0.0, 0.0), |(s, e), x| {
        let y = x.abs() / m;
        (s + powf(y, q), e + y * y)
    })
}

/// Quasi-uniform unit directions, flattened `count × n`.
pub(crate) fn sphere_directions(n: usize, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * count);
    match n {
        2 => {
            for k in 0..count {
                let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                out.push(cos(t));
                out.push(sin(t));
            }
        }
        3 => {
            let golden = PI * (3.0 - sqrt(5.0));
            for k in 0..count {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                let r = sqrt((1.0 - z * z).max(0.0));
                let t = golden * k as f64;
                out.extend_from_slice(&[r * cos(t), r * sin(t), z]);
            }
        }
        _ => {
            // Kronecker sequence with square roots of primes, folded onto [-1, 1]^n.
            const PRIMES: [f64; 12] = [2., 3., 5., 7., 11., 13., 17., 19., 23., 29., 31., 37.];
            for k in 0..count {
                let start = out.len();
                for d in 0..n {
                    let a = sqrt(PRIMES[d % PRIMES.len()] + (d / PRIMES.len()) as f64);
                    let v = (k as f64 + 1.0) * a;
                    out.push(2.0 * (v - libm::floor(v)) - 1.0);
                }
                let r = norm2(&out[start..]);
                for v in &mut out[start..] {
                    *v /= r;
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolarMode {
    ClosedForm,
    NumericSup,
}

/// `F°(x) = sup_{ξ≠0} ⟨ξ,x⟩ / F(ξ)`.
#[derive(Clone, Debug)]
pub struct PolarNorm {
    base: MinkowskiNorm,
    mode: PolarMode,
}

impl PolarNorm {
    pub fn new(base: MinkowskiNorm, mode: PolarMode) -> Result<Self> {
        if mode == PolarMode::ClosedForm && !base.has_closed_form_polar() {
            return Err(Error::Unsupported("no closed-form polar for this norm".into()));
        }
        Ok(Self { base, mode })
    }

    pub fn base(&self) -> &MinkowskiNorm {
        &self.base
    }

    pub fn mode(&self) -> PolarMode {
        self.mode
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.base.check(x.len())?;
        Ok(self.eval_unchecked(x))
    }

    /// `F°_x(x)`. In numeric mode this is the maximizer `ξ*` with `F(ξ*) = 1`,
    /// which is the gradient of the supremum by the envelope theorem.
    pub fn grad(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.base.check(x.len())?;
        self.base.check(out.len())?;
        check_floor(x)?;
        match self.mode {
            PolarMode::ClosedForm => self.closed_grad(x, out),
            PolarMode::NumericSup => {
                numeric_sup(&self.base, x, Some(out));
            }
        }
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self.mode {
            PolarMode::ClosedForm => self.closed_eval(x),
            PolarMode::NumericSup => numeric_sup(&self.base, x, None),
        }
    }

    fn closed_eval(&self, x: &[f64]) -> f64 {
        match &self.base.kind {
            NormKind::Euclidean => norm2(x),
            NormKind::Ellipsoidal { inverse, .. } => sqrt(quad_form(inverse, x).max(0.0)),
            NormKind::Lq { q, .. } => {
                let qd = q / (q - 1.0);
                let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                m * powf(x.iter().map(|v| powf(v.abs() / m, qd)).sum::<f64>(), 1.0 / qd)
            }
            NormKind::Custom(_) => unreachable!("closed form checked at construction"),
        }
    }

    fn closed_grad(&self, x: &[f64], out: &mut [f64]) {
        match &self.base.kind {
            NormKind::Euclidean => {
                let r = norm2(x);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v / r;
                }
            }
            NormKind::Ellipsoidal { inverse, .. } => {
                let n = x.len();
                let f = sqrt(quad_form(inverse, x));
                for i in 0..n {
                    out[i] = dot(&inverse[i * n..(i + 1) * n], x) / f;
                }
            }
            NormKind::Lq { q, .. } => {
                let qd = q / (q - 1.0);
                let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let s: f64 = x.iter().map(|v| powf(v.abs() / m, qd)).sum();
                let norm = powf(s, 1.0 / qd);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = powf(v.abs() / m / norm, qd - 1.0) * v.signum();
                }
            }
            NormKind::Custom(_) => unreachable!("closed form checked at construction"),
        }
    }
}

/// Numeric polar: `2n·64` samples on the `F`-unit sphere, 20 projected
/// ascent steps from the best sample, then a Newton polish of the optimality
/// system `μ ∇G(ξ) = x, G(ξ) = ½` with `G = F²/2`.
fn numeric_sup(base: &MinkowskiNorm, x: &[f64], grad_out: Option<&mut [f64]>) -> f64 {
    let n = base.dim;
    let xn = norm2(x);
    if xn == 0.0 {
        if let Some(out) = grad_out {
            out.fill(0.0);
        }
        return 0.0;
    }
    let dirs = sphere_directions(n, 2 * n * 64);
    let mut best = vec![0.0; n];
    let mut best_val = f64::NEG_INFINITY;
    for d in dirs.chunks(n) {
        let v = dot(d, x) / base.eval_unchecked(d);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(d);
        }
    }
    let normalize = |v: &mut [f64]| {
        let f = base.eval_unchecked(v);
        for c in v.iter_mut() {
            *c /= f;
        }
    };
    normalize(&mut best);
    best_val = dot(&best, x);

    let objective = |v: &[f64]| dot(v, x) / base.eval_unchecked(v);
    let mut g = vec![0.0; n];
    let mut fx = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut step = 0.5 * norm2(&best) / xn;
    for _ in 0..20 {
        base.grad_unchecked(&best, &mut fx);
        // ∇(⟨ξ,x⟩/F) at F(ξ)=1
        for i in 0..n {
            g[i] = x[i] - best_val * fx[i];
        }
        if norm2(&g) <= 1e-16 * xn {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = best[i] + step * g[i];
            }
            let val = objective(&trial);
            if val > best_val {
                normalize(&mut trial);
                best.copy_from_slice(&trial);
                best_val = dot(&best, x);
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    if let Some(polished) = newton_polish(base, x, &best) {
        let val = objective(&polished);
        if val >= best_val - 1e-12 * best_val.abs() {
            best.copy_from_slice(&polished);
            best_val = val;
        }
    }
    if let Some(out) = grad_out {
        let f = base.eval_unchecked(&best);
        for i in 0..n {
            out[i] = best[i] / f;
        }
    }
    best_val
}

fn newton_polish(base: &MinkowskiNorm, x: &[f64], start: &[f64]) -> Option<Vec<f64>> {
    let n = base.dim;
    let mut xi = start.to_vec();
    let mut mu = dot(&xi, x);
    let mut fx = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    let mut jac = vec![0.0; (n + 1) * (n + 1)];
    let mut rhs = vec![0.0; n + 1];
    let scale = norm2(x);
    for _ in 0..30 {
        let f = base.eval_unchecked(&xi);
        base.grad_unchecked(&xi, &mut fx);
        base.hess_unchecked(&xi, &mut h).ok()?;
        let mut res = 0.0;
        for i in 0..n {
            rhs[i] = -(mu * f * fx[i] - x[i]);
            res += rhs[i] * rhs[i];
        }
        rhs[n] = -(0.5 * f * f - 0.5);
        res += rhs[n] * rhs[n] * scale * scale;
        if sqrt(res) <= 4e-16 * scale {
            return Some(xi);
        }
        let m = n + 1;
        for i in 0..n {
            for j in 0..n {
                jac[i * m + j] = mu * (f * h[i * n + j] + fx[i] * fx[j]);
            }
            jac[i * m + n] = f * fx[i];
            jac[n * m + i] = f * fx[i];
        }
        jac[n * m + n] = 0.0;
        if !small::solve_in_place(&mut jac, &mut rhs, m) {
            return None;
        }
        for i in 0..n {
            xi[i] += rhs[i];
        }
        mu += rhs[n];
        if !xi.iter().all(|v| v.is_finite()) || !mu.is_finite() {
            return None;
        }
    }
    let f = base.eval_unchecked(&xi);
    base.grad_unchecked(&xi, &mut fx);
    let res: f64 = (0..n).map(|i| { let r = mu * f * fx[i] - x[i]; r * r }).sum();
    (sqrt(res) <= 1e-10 * scale).then_some(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ell() -> MinkowskiNorm {
        MinkowskiNorm::ellipsoidal(2, &[4.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn euclidean_values() {
        let e = MinkowskiNorm::euclidean(2).unwrap();
        assert_eq!(e.eval(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.0);
        let mut g = [0.0; 2];
        e.grad(&[3.0, 4.0], &mut g).unwrap();
        assert_relative_eq!(g[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(g[1], 0.8, epsilon = 1e-15);
        let mut h = [0.0; 4];
        e.hess(&[1.0, 0.0], &mut h).unwrap();
        assert_eq!(h, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.polar().eval(&[3.0, 4.0]).unwrap(), 5.0);
        e.polar().grad(&[0.0, 2.0], &mut g).unwrap();
        assert_eq!(g, [0.0, 1.0]);
    }

    #[test]
    fn ellipsoidal_values() {
        let n = ell();
        // oracle √(ξᵀAξ)
        assert_relative_eq!(n.eval(&[1.0, 0.0]).unwrap(), 2.0);
        // oracle √(xᵀA⁻¹x)
        assert_relative_eq!(n.polar().eval(&[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn dimension_and_floor_errors() {
        let e = MinkowskiNorm::euclidean(2).unwrap();
        assert!(matches!(e.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let mut g = [0.0; 2];
        assert!(matches!(e.grad(&[1e-15, 0.0], &mut g), Err(Error::DegenerateGradient { .. })));
        let mut h = [0.0; 4];
        assert!(matches!(e.hess(&[0.0, 0.0], &mut h), Err(Error::DegenerateGradient { .. })));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MinkowskiNorm::euclidean(1).is_err());
        assert!(MinkowskiNorm::ellipsoidal(2, &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(MinkowskiNorm::ellipsoidal(2, &[1.0, 0.5, 0.0, 1.0]).is_err());
        assert!(MinkowskiNorm::lq(2, 1.0, 0.05).is_err());
        assert!(MinkowskiNorm::lq(2, 4.0, 1.0).is_err());
        assert!(PolarNorm::new(MinkowskiNorm::lq(2, 4.0, 0.05).unwrap(), PolarMode::ClosedForm)
            .is_err());
    }

    #[test]
    fn ellipsoidal_grad_matches_finite_differences() {
        let n = ell();
        let xi = [0.3, -1.7];
        let mut g = [0.0; 2];
        n.grad(&xi, &mut g).unwrap();
        for k in 0..2 {
            let mut a = xi;
            let mut b = xi;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (n.eval(&a).unwrap() - n.eval(&b).unwrap()) / 2e-6;
            assert_relative_eq!(g[k], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn lq_hessian_matches_finite_differences() {
        for norm in [ell(), MinkowskiNorm::lq(2, 4.0, 0.05).unwrap(), MinkowskiNorm::lq(3, 3.0, 0.1).unwrap()] {
            let d = norm.dim();
            let xi: Vec<f64> = (0..d).map(|i| 0.4 + 0.7 * i as f64 * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let mut h = vec![0.0; d * d];
            norm.hess(&xi, &mut h).unwrap();
            let mut gp = vec![0.0; d];
            let mut gm = vec![0.0; d];
            for j in 0..d {
                let mut a = xi.clone();
                let mut b = xi.clone();
                a[j] += 1e-6;
                b[j] -= 1e-6;
                norm.grad(&a, &mut gp).unwrap();
                norm.grad(&b, &mut gm).unwrap();
                for i in 0..d {
                    assert_relative_eq!(h[i * d + j], (gp[i] - gm[i]) / 2e-6, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn numeric_polar_matches_closed_forms() {
        for base in [ell(), MinkowskiNorm::lq(2, 3.0, 0.0).unwrap()] {
            let closed = base.polar();
            let numeric = PolarNorm::new(base.clone(), PolarMode::NumericSup).unwrap();
            for k in 0..100 {
                let t = 0.37 + k as f64 * 0.71;
                let x = [(1.0 + 0.01 * k as f64) * cos(t), 0.6 * sin(1.3 * t)];
                let a = closed.eval(&x).unwrap();
                let b = numeric.eval(&x).unwrap();
                assert!((a - b).abs() <= 1e-4 * a, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn smoothed_lq_is_elliptic() {
        let n = MinkowskiNorm::lq(2, 4.0, DEFAULT_LQ_SMOOTHING).unwrap();
        assert!(n.ellipticity_constant(256) > 0.0);
        assert!(ell().ellipticity_constant(64) > 0.0);
    }
}
