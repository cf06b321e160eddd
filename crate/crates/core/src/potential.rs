//! One-periodic misfit potentials and exterior stress fields.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type StressFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Tolerance for the equality clauses of the potential checks.
pub const EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind<T> {
    /// `W(t) = (1 - cos 2 pi t) / (4 pi^2 a)`.
    PeierlsNabarro {
        a: T,
    },
    /// `W(t) = sum_k c_k (1 - cos 2 pi k t) / (2 pi k)^2`, so `W'' = sum_k c_k cos 2 pi k t`.
    Fourier {
        coefficients: Vec<T>,
    },
    Custom,
}

/// A one-periodic potential given together with its first two derivatives.
#[derive(Clone)]
pub struct PotentialSpec<T> {
    kind: PotentialKind<T>,
    w: ScalarFn<T>,
    w1: ScalarFn<T>,
    w2: ScalarFn<T>,
    alpha: T,
    w2_sup: T,
}

impl<T: Scalar> fmt::Debug for PotentialSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("kind", &self.kind)
            .field("alpha", &self.alpha)
            .field("w2_sup", &self.w2_sup)
            .finish()
    }
}

impl<T: Scalar> PotentialSpec<T> {
    /// Wraps an arbitrary triple `(W, W', W'')`. No admissibility check is
    /// performed here; use [`validate_assumption_a`].
    pub fn custom(w: ScalarFn<T>, w1: ScalarFn<T>, w2: ScalarFn<T>) -> Self {
        Self::assemble(PotentialKind::Custom, w, w1, w2)
    }

    fn assemble(kind: PotentialKind<T>, w: ScalarFn<T>, w1: ScalarFn<T>, w2: ScalarFn<T>) -> Self {
        let alpha = w2(T::zero());
        let samples = 2048;
        let w2_sup = (0..=samples)
            .map(|k| w2(T::from_usize_lossy(k) / T::from_usize_lossy(samples)).abs())
            .fold(T::zero(), T::max);
        Self {
            kind,
            w,
            w1,
            w2,
            alpha,
            w2_sup,
        }
    }

    pub fn kind(&self) -> &PotentialKind<T> {
        &self.kind
    }

    #[inline]
    pub fn w(&self, v: T) -> T {
        (self.w)(v)
    }

    #[inline]
    pub fn w1(&self, v: T) -> T {
        (self.w1)(v)
    }

    #[inline]
    pub fn w2(&self, v: T) -> T {
        (self.w2)(v)
    }

    /// `W''(0)`.
    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// `sup |W''|` sampled over one period.
    pub fn w2_sup(&self) -> T {
        self.w2_sup
    }

    pub fn period(&self) -> T {
        T::one()
    }
}

/// The Peierls–Nabarro potential with parameter `a > 0`; its layer is
/// `(1/pi) arctan(x/a) + 1/2` and `W''(0) = 1/a`.
pub fn make_pn_potential<T: Scalar>(a: T) -> Result<PotentialSpec<T>> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Peierls-Nabarro parameter must be positive, got {a}"
        )));
    }
    let two_pi = T::lit(2.0) * T::PI();
    let w: ScalarFn<T> = Arc::new(move |t: T| (T::one() - (two_pi * t).cos()) / (two_pi * two_pi * a));
    let w1: ScalarFn<T> = Arc::new(move |t: T| -(two_pi * (t - T::lit(0.5))).sin() / (two_pi * a));
    let w2: ScalarFn<T> = Arc::new(move |t: T| -(two_pi * (t - T::lit(0.5))).cos() / a);
    let mut p = PotentialSpec::assemble(PotentialKind::PeierlsNabarro { a }, w, w1, w2);
    p.alpha = T::one() / a;
    Ok(p)
}

/// Cosine-series potential `W(t) = sum_k c_k (1 - cos 2 pi k t)/(2 pi k)^2`.
///
/// `W''(0) = sum_k c_k` must be positive. Positivity of `W` off the integers
/// holds when all coefficients are non-negative; other choices are accepted
/// and left to [`validate_assumption_a`].
pub fn make_fourier_potential<T: Scalar>(coefficients: &[T]) -> Result<PotentialSpec<T>> {
    if coefficients.is_empty() {
        return Err(Error::InvalidParameter(
            "cosine potential needs at least one coefficient".into(),
        ));
    }
    let alpha: T = coefficients.iter().copied().sum();
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "cosine potential has W''(0) = {alpha}, must be positive"
        )));
    }
    let two_pi = T::lit(2.0) * T::PI();
    let c: Arc<Vec<T>> = Arc::new(coefficients.to_vec());
    let (c0, c1, c2) = (c.clone(), c.clone(), c.clone());
    let w: ScalarFn<T> = Arc::new(move |t: T| {
        c0.iter().enumerate().fold(T::zero(), |acc, (k, ck)| {
            let q = two_pi * T::from_usize_lossy(k + 1);
            acc + *ck * (T::one() - (q * t).cos()) / (q * q)
        })
    });
    let w1: ScalarFn<T> = Arc::new(move |t: T| {
        c1.iter().enumerate().fold(T::zero(), |acc, (k, ck)| {
            let q = two_pi * T::from_usize_lossy(k + 1);
            acc + *ck * (q * t).sin() / q
        })
    });
    let w2: ScalarFn<T> = Arc::new(move |t: T| {
        c2.iter().enumerate().fold(T::zero(), |acc, (k, ck)| {
            let q = two_pi * T::from_usize_lossy(k + 1);
            acc + *ck * (q * t).cos()
        })
    });
    Ok(PotentialSpec::assemble(
        PotentialKind::Fourier {
            coefficients: coefficients.to_vec(),
        },
        w,
        w1,
        w2,
    ))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClauseCheck {
    pub clause: &'static str,
    pub pass: bool,
    /// Worst observed value of the clause's defect (or the extremal value for
    /// sign conditions).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AssumptionReport {
    pub clauses: Vec<ClauseCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseCheck> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

pub const CLAUSE_COVERS_PERIOD: &str = "grid covers a period";
pub const CLAUSE_PERIODIC: &str = "W(v+1) = W(v)";
pub const CLAUSE_ZERO_ON_LATTICE: &str = "W = 0 on Z";
pub const CLAUSE_POSITIVE: &str = "W > 0 off Z";
pub const CLAUSE_CONVEX_WELL: &str = "W''(0) > 0";
pub const CLAUSE_ALPHA_CONSISTENT: &str = "alpha matches W''(0)";

/// Sampled check of the admissibility conditions on a periodic potential.
///
/// Equalities are tested to [`EQUALITY_TOL`], relaxed to a few hundred ulps
/// for scalar types too coarse to resolve it.
pub fn validate_assumption_a<T: Scalar>(p: &PotentialSpec<T>, samples: &[T]) -> AssumptionReport {
    let tol = T::lit(EQUALITY_TOL).max(T::epsilon() * T::lit(256.0));
    let mut clauses = Vec::new();

    let (lo, hi) = samples.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let span = if samples.is_empty() { T::zero() } else { hi - lo };
    clauses.push(ClauseCheck {
        clause: CLAUSE_COVERS_PERIOD,
        pass: span >= T::one(),
        worst: span.as_f64(),
    });

    let periodic = samples
        .iter()
        .map(|v| (p.w(*v + T::one()) - p.w(*v)).abs())
        .fold(T::zero(), T::max);
    clauses.push(ClauseCheck {
        clause: CLAUSE_PERIODIC,
        pass: periodic <= tol,
        worst: periodic.as_f64(),
    });

    let mut lattice = T::zero();
    if !samples.is_empty() {
        let mut k = lo.floor();
        while k <= hi.ceil() {
            lattice = lattice.max(p.w(k).abs()).max(p.w1(k).abs());
            k = k + T::one();
        }
    }
    clauses.push(ClauseCheck {
        clause: CLAUSE_ZERO_ON_LATTICE,
        pass: lattice <= tol,
        worst: lattice.as_f64(),
    });

    let off = T::lit(1e-6);
    let min_off = samples
        .iter()
        .filter(|v| (**v - v.round()).abs() > off)
        .map(|v| p.w(*v))
        .fold(T::infinity(), T::min);
    clauses.push(ClauseCheck {
        clause: CLAUSE_POSITIVE,
        pass: min_off > T::zero(),
        worst: min_off.as_f64(),
    });

    clauses.push(ClauseCheck {
        clause: CLAUSE_CONVEX_WELL,
        pass: p.alpha() > T::zero(),
        worst: p.alpha().as_f64(),
    });

    let dh = T::lit(1e-4);
    let fd = (p.w1(dh) - p.w1(-dh)) / (T::lit(2.0) * dh);
    let defect = (fd - p.alpha()).abs();
    clauses.push(ClauseCheck {
        clause: CLAUSE_ALPHA_CONSISTENT,
        pass: defect <= T::lit(1e-6) * p.alpha().abs().max(T::one()),
        worst: defect.as_f64(),
    });

    AssumptionReport { clauses }
}

#[derive(Clone)]
pub enum StressKind<T> {
    Zero,
    Constant(T),
    /// `base + slope * clamp(x, -half_width, half_width)`.
    Affine {
        base: T,
        slope: T,
        half_width: T,
    },
    /// Piecewise-linear in `x`, constant beyond the first and last abscissa.
    Table {
        xs: Vec<T>,
        values: Vec<T>,
    },
    /// Arbitrary `sigma(t, x)` with a caller-supplied space Lipschitz bound.
    Custom {
        f: StressFn<T>,
        lipschitz: T,
    },
}

impl<T: fmt::Debug> fmt::Debug for StressKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(s) => write!(f, "Constant({s:?})"),
            Self::Affine {
                base,
                slope,
                half_width,
            } => write!(
                f,
                "Affine {{ base: {base:?}, slope: {slope:?}, half_width: {half_width:?} }}"
            ),
            Self::Table { xs, values } => f.debug_struct("Table").field("xs", xs).field("values", values).finish(),
            Self::Custom { lipschitz, .. } => write!(f, "Custom {{ lipschitz: {lipschitz:?} }}"),
        }
    }
}

/// Exterior stress `sigma(t, x)` plus a uniform offset (used for the shifted
/// barrier constructions).
#[derive(Debug, Clone)]
pub struct StressField<T> {
    kind: StressKind<T>,
    offset: T,
}

impl<T: Scalar> StressField<T> {
    pub fn zero() -> Self {
        Self {
            kind: StressKind::Zero,
            offset: T::zero(),
        }
    }

    pub fn constant(s: T) -> Self {
        Self {
            kind: StressKind::Constant(s),
            offset: T::zero(),
        }
    }

    pub fn affine(base: T, slope: T, half_width: T) -> Result<Self> {
        if !(half_width > T::zero()) {
            return Err(Error::InvalidParameter(
                "affine stress needs a positive clamp half-width".into(),
            ));
        }
        Ok(Self {
            kind: StressKind::Affine {
                base,
                slope,
                half_width,
            },
            offset: T::zero(),
        })
    }

    pub fn table(xs: Vec<T>, values: Vec<T>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != values.len() {
            return Err(Error::InvalidParameter(
                "stress table needs at least two (x, sigma) pairs of equal length".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "stress table abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            kind: StressKind::Table { xs, values },
            offset: T::zero(),
        })
    }

    pub fn custom(f: StressFn<T>, lipschitz: T) -> Self {
        Self {
            kind: StressKind::Custom { f, lipschitz },
            offset: T::zero(),
        }
    }

    /// Same field plus a constant `delta`.
    pub fn with_offset(&self, delta: T) -> Self {
        Self {
            kind: self.kind.clone(),
            offset: self.offset + delta,
        }
    }

    pub fn kind(&self) -> &StressKind<T> {
        &self.kind
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn value(&self, t: T, x: T) -> T {
        self.offset
            + match &self.kind {
                StressKind::Zero => T::zero(),
                StressKind::Constant(s) => *s,
                StressKind::Affine {
                    base,
                    slope,
                    half_width,
                } => *base + *slope * x.max(-*half_width).min(*half_width),
                StressKind::Table { xs, values } => table_eval(xs, values, x),
                StressKind::Custom { f, .. } => f(t, x),
            }
    }

    /// `d sigma / dx`.
    pub fn dx(&self, t: T, x: T) -> T {
        match &self.kind {
            StressKind::Zero | StressKind::Constant(_) => T::zero(),
            StressKind::Affine { slope, half_width, .. } => {
                if x.abs() < *half_width {
                    *slope
                } else {
                    T::zero()
                }
            }
            StressKind::Table { xs, values } => table_slope(xs, values, x),
            StressKind::Custom { f, .. } => {
                let d = T::lit(1e-5);
                (f(t, x + d) - f(t, x - d)) / (T::lit(2.0) * d)
            }
        }
    }

    /// `d sigma / dt`.
    pub fn dt(&self, t: T, x: T) -> T {
        match &self.kind {
            StressKind::Custom { f, .. } => {
                let d = T::lit(1e-5);
                (f(t + d, x) - f((t - d).max(T::zero()), x)) / (t + d - (t - d).max(T::zero()))
            }
            _ => T::zero(),
        }
    }

    /// Space Lipschitz constant `K`.
    pub fn lipschitz_k(&self) -> T {
        match &self.kind {
            StressKind::Zero | StressKind::Constant(_) => T::zero(),
            StressKind::Affine { slope, .. } => slope.abs(),
            StressKind::Table { xs, values } => xs
                .windows(2)
                .zip(values.windows(2))
                .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
                .fold(T::zero(), T::max),
            StressKind::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// True when `sigma` does not depend on `x`.
    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, StressKind::Zero | StressKind::Constant(_))
    }

    /// Sampled Lipschitz and boundedness probe.
    pub fn probe(&self, times: &[T], xs: &[T], step: T) -> StressProbe {
        let k = self.lipschitz_k();
        let mut worst_ratio = T::zero();
        let mut sup = T::zero();
        let mut lipschitz_ok = true;
        for &t in times {
            for &x in xs {
                let a = self.value(t, x);
                let b = self.value(t, x + step);
                sup = sup.max(a.abs());
                let jump = (b - a).abs();
                if jump > k * step.abs() * (T::one() + T::lit(1e-9)) + T::lit(1e-14) {
                    lipschitz_ok = false;
                }
                if step != T::zero() {
                    worst_ratio = worst_ratio.max(jump / step.abs());
                }
            }
        }
        StressProbe {
            lipschitz_ok,
            worst_ratio: worst_ratio.as_f64(),
            sup: sup.as_f64(),
            bounded: sup.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StressProbe {
    pub lipschitz_ok: bool,
    pub worst_ratio: f64,
    pub sup: f64,
    pub bounded: bool,
}

fn table_segment<T: Scalar>(xs: &[T], x: T) -> Option<usize> {
    if x <= xs[0] || x >= xs[xs.len() - 1] {
        return None;
    }
    Some(xs.partition_point(|v| *v <= x) - 1)
}

fn table_eval<T: Scalar>(xs: &[T], values: &[T], x: T) -> T {
    match table_segment(xs, x) {
        None if x <= xs[0] => values[0],
        None => values[values.len() - 1],
        Some(k) => {
            let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
            values[k] + s * (values[k + 1] - values[k])
        }
    }
}

fn table_slope<T: Scalar>(xs: &[T], values: &[T], x: T) -> T {
    match table_segment(xs, x) {
        None => T::zero(),
        Some(k) => (values[k + 1] - values[k]) / (xs[k + 1] - xs[k]),
    }
}
