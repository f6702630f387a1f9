//! Word-level expressions: the bit-vector fragment that design
//! next-state functions use. Every node has a definite bit width derivable from
//! signal declarations; widths are capped at 64 so constants and evaluation
//! fit in a machine word.

use super::IrError;

pub const MAX_WIDTH: u32 = 64;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Const {
        width: u32,
        value: u64,
    },
    Signal(String),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    /// Modular addition; the carry out of the top bit is discarded.
    BvAdd(Box<Expr>, Box<Expr>),
    Extract {
        hi: u32,
        lo: u32,
        arg: Box<Expr>,
    },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Expr {
    pub fn constant(width: u32, value: u64) -> Result<Expr, IrError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(IrError::BadConstant { width, value });
        }
        if value & !mask(width) != 0 {
            return Err(IrError::BadConstant { width, value });
        }
        Ok(Expr::Const { width, value })
    }

    pub fn signal(name: impl Into<String>) -> Expr {
        Expr::Signal(name.into())
    }

    /// Computes and checks the width of the expression under the given
    /// signal-width lookup.
    pub fn width(&self, lookup: &dyn Fn(&str) -> Option<u32>) -> Result<u32, IrError> {
        match self {
            Expr::Const { width, .. } => Ok(*width),
            Expr::Signal(name) => lookup(name).ok_or_else(|| IrError::UnknownSignal(name.clone())),
            Expr::Ite(c, t, e) => {
                let wc = c.width(lookup)?;
                if wc != 1 {
                    return Err(IrError::WidthMismatch {
                        context: format!("ite condition has width {wc}, expected 1"),
                    });
                }
                let wt = t.width(lookup)?;
                let we = e.width(lookup)?;
                if wt != we {
                    return Err(IrError::WidthMismatch {
                        context: format!("ite branches have widths {wt} and {we}"),
                    });
                }
                Ok(wt)
            }
            Expr::Eq(a, b) => {
                let wa = a.width(lookup)?;
                let wb = b.width(lookup)?;
                if wa != wb {
                    return Err(IrError::WidthMismatch {
                        context: format!("eq operands have widths {wa} and {wb}"),
                    });
                }
                Ok(1)
            }
            Expr::BvAdd(a, b) => {
                let wa = a.width(lookup)?;
                let wb = b.width(lookup)?;
                if wa != wb {
                    return Err(IrError::WidthMismatch {
                        context: format!("bvadd operands have widths {wa} and {wb}"),
                    });
                }
                Ok(wa)
            }
            Expr::Extract { hi, lo, arg } => {
                let w = arg.width(lookup)?;
                if lo > hi || *hi >= w {
                    return Err(IrError::BadExtract {
                        hi: *hi,
                        lo: *lo,
                        width: w,
                    });
                }
                Ok(hi - lo + 1)
            }
            Expr::Not(a) => a.width(lookup),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) => {
                let wa = a.width(lookup)?;
                let wb = b.width(lookup)?;
                if wa != wb {
                    return Err(IrError::WidthMismatch {
                        context: format!("bitwise operands have widths {wa} and {wb}"),
                    });
                }
                Ok(wa)
            }
        }
    }

    /// Word-level evaluation. The environment returns (width, value) pairs
    /// for signal references; results are masked to the node width.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<(u32, u64)>) -> Result<(u32, u64), IrError> {
        match self {
            Expr::Const { width, value } => Ok((*width, *value)),
            Expr::Signal(name) => env(name).ok_or_else(|| IrError::UnknownSignal(name.clone())),
            Expr::Ite(c, t, e) => {
                let (_, vc) = c.eval(env)?;
                if vc & 1 == 1 {
                    t.eval(env)
                } else {
                    e.eval(env)
                }
            }
            Expr::Eq(a, b) => {
                let (_, va) = a.eval(env)?;
                let (_, vb) = b.eval(env)?;
                Ok((1, (va == vb) as u64))
            }
            Expr::BvAdd(a, b) => {
                let (w, va) = a.eval(env)?;
                let (_, vb) = b.eval(env)?;
                Ok((w, va.wrapping_add(vb) & mask(w)))
            }
            Expr::Extract { hi, lo, arg } => {
                let (_, v) = arg.eval(env)?;
                Ok((hi - lo + 1, (v >> lo) & mask(hi - lo + 1)))
            }
            Expr::Not(a) => {
                let (w, v) = a.eval(env)?;
                Ok((w, !v & mask(w)))
            }
            Expr::And(a, b) => {
                let (w, va) = a.eval(env)?;
                let (_, vb) = b.eval(env)?;
                Ok((w, va & vb))
            }
            Expr::Or(a, b) => {
                let (w, va) = a.eval(env)?;
                let (_, vb) = b.eval(env)?;
                Ok((w, va | vb))
            }
            Expr::Xor(a, b) => {
                let (w, va) = a.eval(env)?;
                let (_, vb) = b.eval(env)?;
                Ok((w, va ^ vb))
            }
        }
    }

    /// Names of all referenced signals, in first-occurrence order.
    pub fn referenced_signals(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_signals(&mut out);
        out
    }

    fn collect_signals(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const { .. } => {}
            Expr::Signal(name) => {
                if !out.iter().any(|n| n == name) {
                    out.push(name.clone());
                }
            }
            Expr::Ite(a, b, c) => {
                a.collect_signals(out);
                b.collect_signals(out);
                c.collect_signals(out);
            }
            Expr::Eq(a, b)
            | Expr::BvAdd(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Xor(a, b) => {
                a.collect_signals(out);
                b.collect_signals(out);
            }
            Expr::Extract { arg, .. } => arg.collect_signals(out),
            Expr::Not(a) => a.collect_signals(out),
        }
    }

    /// Rewrites every signal reference through `f`.
    pub fn rename_signals(&self, f: &dyn Fn(&str) -> String) -> Expr {
        match self {
            Expr::Const { width, value } => Expr::Const {
                width: *width,
                value: *value,
            },
            Expr::Signal(name) => Expr::Signal(f(name)),
            Expr::Ite(a, b, c) => Expr::Ite(
                Box::new(a.rename_signals(f)),
                Box::new(b.rename_signals(f)),
                Box::new(c.rename_signals(f)),
            ),
            Expr::Eq(a, b) => {
                Expr::Eq(Box::new(a.rename_signals(f)), Box::new(b.rename_signals(f)))
            }
            Expr::BvAdd(a, b) => {
                Expr::BvAdd(Box::new(a.rename_signals(f)), Box::new(b.rename_signals(f)))
            }
            Expr::Extract { hi, lo, arg } => Expr::Extract {
                hi: *hi,
                lo: *lo,
                arg: Box::new(arg.rename_signals(f)),
            },
            Expr::Not(a) => Expr::Not(Box::new(a.rename_signals(f))),
            Expr::And(a, b) => {
                Expr::And(Box::new(a.rename_signals(f)), Box::new(b.rename_signals(f)))
            }
            Expr::Or(a, b) => {
                Expr::Or(Box::new(a.rename_signals(f)), Box::new(b.rename_signals(f)))
            }
            Expr::Xor(a, b) => {
                Expr::Xor(Box::new(a.rename_signals(f)), Box::new(b.rename_signals(f)))
            }
        }
    }

    /// Records, per signal appearing in an `ite` condition, its minimum
    /// control depth: 1 for an outermost condition, +1 per ite nesting level.
    pub fn collect_control_depths(&self, depths: &mut std::collections::BTreeMap<String, u32>) {
        self.control_walk(None, 0, depths);
    }

    fn control_walk(
        &self,
        cond_depth: Option<u32>,
        ite_count: u32,
        depths: &mut std::collections::BTreeMap<String, u32>,
    ) {
        match self {
            Expr::Const { .. } => {}
            Expr::Signal(name) => {
                if let Some(d) = cond_depth {
                    depths
                        .entry(name.clone())
                        .and_modify(|cur| *cur = (*cur).min(d))
                        .or_insert(d);
                }
            }
            Expr::Ite(c, t, e) => {
                let d = ite_count + 1;
                c.control_walk(Some(d), d, depths);
                t.control_walk(None, d, depths);
                e.control_walk(None, d, depths);
            }
            Expr::Eq(a, b)
            | Expr::BvAdd(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Xor(a, b) => {
                a.control_walk(cond_depth, ite_count, depths);
                b.control_walk(cond_depth, ite_count, depths);
            }
            Expr::Extract { arg, .. } => arg.control_walk(cond_depth, ite_count, depths),
            Expr::Not(a) => a.control_walk(cond_depth, ite_count, depths),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::sexpr::parse_expr;
    use std::collections::BTreeMap;

    fn counter_next() -> Expr {
        parse_expr(
            "(ite (= reset #b1) #b000 (ite (= enable #b1) (bvadd counter #b010) (bvadd counter #b001)))",
        )
        .unwrap()
    }

    #[test]
    fn width_checking() {
        let lookup = |name: &str| match name {
            "reset" | "enable" => Some(1),
            "counter" => Some(3),
            _ => None,
        };
        assert_eq!(counter_next().width(&lookup).unwrap(), 3);
        // Mismatched ite branches are rejected.
        let bad = parse_expr("(ite reset #b00 #b1)").unwrap();
        assert!(matches!(
            bad.width(&lookup),
            Err(IrError::WidthMismatch { .. })
        ));
        let bad = parse_expr("(extract 3 1 counter)").unwrap();
        assert!(matches!(
            bad.width(&lookup),
            Err(IrError::BadExtract {
                hi: 3,
                lo: 1,
                width: 3
            })
        ));
    }

    #[test]
    fn counter_evaluation_wraps_modulo_width() {
        let next = counter_next();
        let env_for = |reset: u64, enable: u64, counter: u64| {
            move |name: &str| match name {
                "reset" => Some((1, reset)),
                "enable" => Some((1, enable)),
                "counter" => Some((3, counter)),
                _ => None,
            }
        };
        assert_eq!(next.eval(&env_for(1, 0, 5)).unwrap(), (3, 0));
        assert_eq!(next.eval(&env_for(0, 1, 3)).unwrap(), (3, 5));
        assert_eq!(
            next.eval(&env_for(0, 0, 7)).unwrap(),
            (3, 0),
            "3-bit counter wraps"
        );
        assert_eq!(next.eval(&env_for(0, 1, 7)).unwrap(), (3, 1));
    }

    #[test]
    fn control_depths_match_nesting() {
        let mut depths = BTreeMap::new();
        counter_next().collect_control_depths(&mut depths);
        assert_eq!(depths.get("reset"), Some(&1));
        assert_eq!(depths.get("enable"), Some(&2));
        assert_eq!(depths.get("counter"), None);
    }

    #[test]
    fn control_depth_takes_minimum_across_occurrences() {
        // `sel` appears at depth 2 inside the else branch and at depth 1.
        let e = parse_expr("(ite sel a (ite sel b c))").unwrap();
        let mut depths = BTreeMap::new();
        e.collect_control_depths(&mut depths);
        assert_eq!(depths.get("sel"), Some(&1));
    }
}
