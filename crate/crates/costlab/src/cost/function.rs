use std::fmt;
use std::sync::Arc;

use crate::rational::Rational;

/// Declared structural properties. Declarations are promises checked by
/// [`crate::cost::check_monotone`] and friends, not by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Props {
    pub monotone_main: bool,
    pub monotone_stage: bool,
    pub additive: bool,
    pub proper: bool,
}

impl Props {
    pub const NONE: Props = Props { monotone_main: false, monotone_stage: false, additive: false, proper: false };

    pub fn monotone() -> Props {
        Props { monotone_main: true, monotone_stage: true, ..Props::NONE }
    }

    pub fn additive() -> Props {
        Props { monotone_main: true, monotone_stage: true, additive: true, proper: false }
    }

    pub fn with_proper(mut self, proper: bool) -> Props {
        self.proper = proper;
        self
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone_main && self.monotone_stage
    }
}

/// Stage-evaluable cost `c(x, s)`.
pub trait CostEval: Send + Sync {
    fn eval(&self, x: u64, s: u64) -> Rational;

    /// `c(x, s)` for `x ≤ xmax`. Implementors override this where a stage
    /// column can be computed faster than pointwise.
    fn row(&self, s: u64, xmax: u64) -> Vec<Rational> {
        (0..=xmax).map(|x| self.eval(x, s)).collect()
    }
}

impl<F> CostEval for F
where
    F: Fn(u64, u64) -> Rational + Send + Sync,
{
    fn eval(&self, x: u64, s: u64) -> Rational {
        self(x, s)
    }
}

#[derive(Clone)]
pub struct CostFn {
    name: Arc<str>,
    horizon: u64,
    props: Props,
    inner: Arc<dyn CostEval>,
}

impl fmt::Debug for CostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFn")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("props", &self.props)
            .finish()
    }
}

impl CostFn {
    pub fn new(name: &str, horizon: u64, props: Props, eval: impl CostEval + 'static) -> Self {
        CostFn { name: name.into(), horizon, props, inner: Arc::new(eval) }
    }

    pub fn from_fn<F>(name: &str, horizon: u64, props: Props, f: F) -> Self
    where
        F: Fn(u64, u64) -> Rational + Send + Sync + 'static,
    {
        CostFn::new(name, horizon, props, f)
    }

    /// The identically zero cost function.
    pub fn zero(horizon: u64) -> Self {
        CostFn::from_fn("zero", horizon, Props::additive(), |_, _| Rational::zero())
    }

    /// `c(x, s) = 2^{-x}` for `x ≤ s`, else 0.
    pub fn geometric(horizon: u64) -> Self {
        CostFn::from_fn("geometric", horizon, Props::monotone().with_proper(true), |x, s| {
            if x <= s {
                Rational::pow2_neg(x as u32)
            } else {
                Rational::zero()
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn props(&self) -> Props {
        self.props
    }

    pub fn eval(&self, x: u64, s: u64) -> Rational {
        self.inner.eval(x, s)
    }

    pub fn row(&self, s: u64, xmax: u64) -> Vec<Rational> {
        self.inner.row(s, xmax)
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_props(mut self, props: Props) -> Self {
        self.props = props;
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    /// `N · c`.
    pub fn scaled(&self, n: u64) -> CostFn {
        let inner = self.inner.clone();
        let name = format!("{n}*{}", self.name);
        CostFn::new(&name, self.horizon, self.props, ScaledEval { inner, n })
    }

    /// `c · 2^{-k}`.
    pub fn halved(&self, k: u32) -> CostFn {
        let inner = self.inner.clone();
        let name = format!("{}/2^{k}", self.name);
        CostFn::new(&name, self.horizon, self.props, ShiftEval { inner, k })
    }

    /// `c + d`. Properties survive when both operands declare them.
    pub fn plus(&self, other: &CostFn) -> CostFn {
        let a = self.inner.clone();
        let b = other.inner.clone();
        let p = self.props;
        let q = other.props;
        let props = Props {
            monotone_main: p.monotone_main && q.monotone_main,
            monotone_stage: p.monotone_stage && q.monotone_stage,
            additive: p.additive && q.additive,
            proper: p.proper || q.proper,
        };
        let name = format!("{}+{}", self.name, other.name);
        CostFn::new(&name, self.horizon.min(other.horizon), props, SumEval { a, b })
    }
}

struct ScaledEval {
    inner: Arc<dyn CostEval>,
    n: u64,
}

impl CostEval for ScaledEval {
    fn eval(&self, x: u64, s: u64) -> Rational {
        self.inner.eval(x, s).mul_int(self.n)
    }

    fn row(&self, s: u64, xmax: u64) -> Vec<Rational> {
        self.inner.row(s, xmax).into_iter().map(|v| v.mul_int(self.n)).collect()
    }
}

struct ShiftEval {
    inner: Arc<dyn CostEval>,
    k: u32,
}

impl CostEval for ShiftEval {
    fn eval(&self, x: u64, s: u64) -> Rational {
        self.inner.eval(x, s) * Rational::pow2_neg(self.k)
    }

    fn row(&self, s: u64, xmax: u64) -> Vec<Rational> {
        let f = Rational::pow2_neg(self.k);
        self.inner.row(s, xmax).into_iter().map(|v| &v * &f).collect()
    }
}

struct SumEval {
    a: Arc<dyn CostEval>,
    b: Arc<dyn CostEval>,
}

impl CostEval for SumEval {
    fn eval(&self, x: u64, s: u64) -> Rational {
        self.a.eval(x, s) + self.b.eval(x, s)
    }

    fn row(&self, s: u64, xmax: u64) -> Vec<Rational> {
        self.a.row(s, xmax).into_iter().zip(self.b.row(s, xmax)).map(|(u, v)| u + v).collect()
    }
}
