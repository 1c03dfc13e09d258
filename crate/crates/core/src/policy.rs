//! Ordering policies.
//!
//! Every policy sees the same per-echelon [`OrderContext`] and returns a
//! nonnegative order. The smoothing policy's previous order is engine state
//! passed in explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// `max(0, x)`, with `-0.0` and NaN mapped to `0.0`.
#[inline(always)]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// z = Phi^-1(fractile).
pub fn safety_factor(fractile: f64) -> Result<f64> {
    if !(fractile > 0.0 && fractile < 1.0) {
        return Err(Error::invalid("service_fractile", format!("{fractile} is outside (0, 1)")));
    }
    Ok(normal::inverse_cdf(fractile))
}

/// Static quantities of one echelon's order-up-to target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderContext {
    pub lead_time: usize,
    pub z: f64,
    /// L + 1
    pub cover: f64,
    /// z * sqrt(L + 1)
    pub safety: f64,
}

impl OrderContext {
    pub fn new(lead_time: usize, service_fractile: f64) -> Result<Self> {
        if lead_time < 1 {
            return Err(Error::invalid("lead_time", "must be at least 1"));
        }
        let z = safety_factor(service_fractile)?;
        let cover = (lead_time + 1) as f64;
        Ok(OrderContext {
            lead_time,
            z,
            cover,
            safety: z * cover.sqrt(),
        })
    }

    /// S = (L+1) fm + z fs sqrt(L+1).
    #[inline(always)]
    pub fn out_level(&self, fm: f64, fs: f64) -> f64 {
        self.cover * fm + self.safety * fs
    }
}

/// The catalogued policies, dispatched without a virtual call by the
/// batch engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinPolicy {
    OrderUpTo,
    Proportional { alpha: f64 },
    Smoothing { beta: f64 },
    Constant { quantity: f64 },
}

impl BuiltinPolicy {
    #[inline(always)]
    pub fn order(&self, ctx: &OrderContext, ip: f64, fm: f64, fs: f64, prev: f64) -> f64 {
        match *self {
            BuiltinPolicy::OrderUpTo => positive_part(ctx.out_level(fm, fs) - ip),
            BuiltinPolicy::Proportional { alpha } => alpha * positive_part(ctx.out_level(fm, fs) - ip),
            BuiltinPolicy::Smoothing { beta } => {
                beta * positive_part(ctx.out_level(fm, fs) - ip) + (1.0 - beta) * prev
            }
            BuiltinPolicy::Constant { quantity } => quantity,
        }
    }
}

pub trait OrderingPolicy: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn compute_order(&self, ctx: &OrderContext, ip: f64, fm: f64, fs: f64, previous_order: f64) -> f64;

    /// Set for the catalogued policies; custom policies keep the default.
    fn builtin(&self) -> Option<BuiltinPolicy> {
        None
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(name, format!("{v} is outside (0, 1]")));
    }
    Ok(())
}

macro_rules! builtin_policy {
    ($ty:ident, $name:literal) => {
        impl OrderingPolicy for $ty {
            fn name(&self) -> &str {
                $name
            }

            #[inline]
            fn compute_order(&self, ctx: &OrderContext, ip: f64, fm: f64, fs: f64, prev: f64) -> f64 {
                self.kind().order(ctx, ip, fm, fs, prev)
            }

            fn builtin(&self) -> Option<BuiltinPolicy> {
                Some(self.kind())
            }
        }
    };
}

#[derive(Debug, Clone, Default)]
pub struct OrderUpTo;

impl OrderUpTo {
    fn kind(&self) -> BuiltinPolicy {
        BuiltinPolicy::OrderUpTo
    }
}
builtin_policy!(OrderUpTo, "order_up_to");

#[derive(Debug, Clone)]
pub struct ProportionalOut {
    pub alpha: f64,
}

impl ProportionalOut {
    pub fn new(alpha: f64) -> Result<Self> {
        check_unit_interval("alpha", alpha)?;
        Ok(ProportionalOut { alpha })
    }

    fn kind(&self) -> BuiltinPolicy {
        BuiltinPolicy::Proportional { alpha: self.alpha }
    }
}
builtin_policy!(ProportionalOut, "proportional_out");

/// O_t = beta * O_t^OUT + (1 - beta) * O_{t-1}.
#[derive(Debug, Clone)]
pub struct SmoothingOut {
    pub beta: f64,
}

impl SmoothingOut {
    pub fn new(beta: f64) -> Result<Self> {
        check_unit_interval("beta", beta)?;
        Ok(SmoothingOut { beta })
    }

    fn kind(&self) -> BuiltinPolicy {
        BuiltinPolicy::Smoothing { beta: self.beta }
    }
}
builtin_policy!(SmoothingOut, "smoothing_out");

#[derive(Debug, Clone)]
pub struct ConstantOrder {
    pub quantity: f64,
}

impl ConstantOrder {
    pub fn new(quantity: f64) -> Result<Self> {
        if !(quantity.is_finite() && quantity >= 0.0) {
            return Err(Error::invalid("quantity", "must be a nonnegative number"));
        }
        Ok(ConstantOrder { quantity })
    }

    fn kind(&self) -> BuiltinPolicy {
        BuiltinPolicy::Constant {
            quantity: self.quantity,
        }
    }
}
builtin_policy!(ConstantOrder, "constant_order");

/// Parameters of a single ordering decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub lead_time: usize,
    pub service_fractile: f64,
    pub smoothing_alpha: f64,
    pub constant_quantity: f64,
}

impl PolicyParams {
    pub fn context(&self) -> Result<OrderContext> {
        check_unit_interval("smoothing_alpha", self.smoothing_alpha)?;
        OrderContext::new(self.lead_time, self.service_fractile)
    }
}

pub fn out_level(p: &PolicyParams, fm: f64, fs: f64) -> Result<f64> {
    Ok(p.context()?.out_level(fm, fs))
}

pub fn out_order(p: &PolicyParams, ip: f64, fm: f64, fs: f64) -> Result<f64> {
    Ok(BuiltinPolicy::OrderUpTo.order(&p.context()?, ip, fm, fs, 0.0))
}

pub fn pout_order(p: &PolicyParams, ip: f64, fm: f64, fs: f64) -> Result<f64> {
    let kind = BuiltinPolicy::Proportional {
        alpha: p.smoothing_alpha,
    };
    Ok(kind.order(&p.context()?, ip, fm, fs, 0.0))
}

pub fn smoothing_out_order(p: &PolicyParams, ip: f64, fm: f64, fs: f64, previous_order: f64) -> Result<f64> {
    let kind = BuiltinPolicy::Smoothing {
        beta: p.smoothing_alpha,
    };
    Ok(kind.order(&p.context()?, ip, fm, fs, previous_order))
}

pub fn constant_order(p: &PolicyParams) -> f64 {
    p.constant_quantity
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64) -> PolicyParams {
        PolicyParams {
            lead_time: 2,
            service_fractile: 0.8,
            smoothing_alpha: alpha,
            constant_quantity: 100.0,
        }
    }

    #[test]
    fn safety_factor_examples() {
        assert_eq!(safety_factor(0.5).unwrap(), 0.0);
        assert!((safety_factor(0.8).unwrap() - 0.841_621_233_572_914_2).abs() < 1e-8);
        assert!((safety_factor(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-8);
        assert!(safety_factor(0.0).is_err());
        assert!(safety_factor(1.0).is_err());
    }

    #[test]
    fn out_examples() {
        let p = params(1.0);
        let s = out_level(&p, 100.0, 10.0).unwrap();
        assert!((s - (300.0 + 0.841_621_233_572_914_2 * 10.0 * 3f64.sqrt())).abs() < 1e-6);
        assert!((s - 314.578).abs() < 1e-3);
        assert_eq!(out_level(&p, 100.0, 0.0).unwrap(), 300.0);
        let half = PolicyParams { service_fractile: 0.5, ..p };
        assert_eq!(out_level(&half, 100.0, 55.0).unwrap(), 300.0);
        assert!((out_order(&p, 250.0, 100.0, 10.0).unwrap() - 64.578).abs() < 1e-3);
        assert_eq!(out_order(&p, 400.0, 100.0, 10.0).unwrap(), 0.0);
        assert_eq!(out_order(&p, 0.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pout_and_smoothing_examples() {
        assert!((pout_order(&params(0.5), 250.0, 100.0, 10.0).unwrap() - 32.289).abs() < 1e-3);
        assert_eq!(pout_order(&params(0.3), 1e4, 100.0, 10.0).unwrap(), 0.0);
        // OUT order 100 with S = 300 at fs = 0
        let sm = smoothing_out_order(&params(0.3), 200.0, 100.0, 0.0, 0.0).unwrap();
        assert!((sm - 30.0).abs() < 1e-12);
        let mut prev = 0.0;
        for _ in 0..200 {
            prev = smoothing_out_order(&params(0.3), 200.0, 100.0, 0.0, prev).unwrap();
        }
        assert!((prev - 100.0).abs() < 1e-9);
        assert_eq!(constant_order(&params(0.3)), 100.0);
        assert_eq!(ConstantOrder::new(0.0).unwrap().compute_order(&params(1.0).context().unwrap(), 5.0, 1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn constructors_validate() {
        assert!(ProportionalOut::new(0.0).is_err());
        assert!(SmoothingOut::new(1.2).is_err());
        assert!(ConstantOrder::new(-1.0).is_err());
        assert!(OrderContext::new(0, 0.8).is_err());
    }

    proptest! {
        #[test]
        fn orders_nonnegative_and_monotone(
            ip in -1e4f64..1e4, d in 0.0f64..500.0, fm in 0.0f64..500.0, fs in 0.0f64..100.0,
            frac in 0.01f64..0.99, l in 1usize..20, a in 0.01f64..1.0, prev in 0.0f64..500.0,
        ) {
            let ctx = OrderContext::new(l, frac).unwrap();
            for kind in [
                BuiltinPolicy::OrderUpTo,
                BuiltinPolicy::Proportional { alpha: a },
                BuiltinPolicy::Smoothing { beta: a },
                BuiltinPolicy::Constant { quantity: fm },
            ] {
                let o = kind.order(&ctx, ip, fm, fs, prev);
                prop_assert!(o >= 0.0);
                prop_assert!(kind.order(&ctx, ip + d, fm, fs, prev) <= o);
            }
            let out = BuiltinPolicy::OrderUpTo.order(&ctx, ip, fm, fs, prev);
            prop_assert_eq!(BuiltinPolicy::Proportional { alpha: 1.0 }.order(&ctx, ip, fm, fs, prev), out);
            prop_assert_eq!(BuiltinPolicy::Smoothing { beta: 1.0 }.order(&ctx, ip, fm, fs, prev), out);
        }

        #[test]
        fn safety_factor_monotone_and_odd(p in 0.001f64..0.999, dp in 1e-6f64..1e-3) {
            let z = safety_factor(p).unwrap();
            prop_assert!((z + safety_factor(1.0 - p).unwrap()).abs() <= 1e-8);
            if p + dp < 1.0 {
                prop_assert!(safety_factor(p + dp).unwrap() > z);
            }
        }
    }
}
