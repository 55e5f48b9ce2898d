//! Flat postfix form of an [`Expr`] for tight simulation loops.

use super::{power, BinOp, DomainFault, Expr, Func};

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(f64),
    X,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Scale(f64),
    Shift(f64),
    Recip,
    Square,
    PowInt(i32),
    /// Exponent `m/4`.
    Quarter(i32),
    PowConst(f64),
    Sqrt,
    RecipSqrt,
    Exp,
    Log,
    Abs,
    Sign,
}

impl Op {
    fn is_unary(self) -> bool {
        !matches!(
            self,
            Op::Const(_) | Op::X | Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow
        )
    }
}

const SMALL_STACK: usize = 6;
const STACK: usize = 32;

/// Compiled `f64` evaluator. On any fault the original tree is re-evaluated to
/// produce a detailed [`DomainFault`].
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    depth: usize,
    /// `x` followed only by unary ops, evaluated without a stack.
    chain: bool,
    source: Expr,
}

impl CompiledExpr {
    pub fn new(e: &Expr) -> Self {
        let source = e.fold();
        let mut ops = Vec::new();
        emit(&source, &mut ops);
        let depth = max_depth(&ops);
        let chain = matches!(ops.first(), Some(Op::X)) && ops[1..].iter().all(|op| op.is_unary());
        CompiledExpr {
            ops,
            depth,
            chain,
            source,
        }
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    /// Constant value, if the expression does not depend on `x`.
    pub fn constant(&self) -> Option<f64> {
        match self.ops.as_slice() {
            [Op::Const(c)] => Some(*c),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Result<f64, DomainFault> {
        match self.try_eval(x) {
            Some(v) => Ok(v),
            None => self.slow_eval(x),
        }
    }

    /// Value without fault details; `None` wherever [`eval`](Self::eval) may fail.
    #[inline]
    pub fn try_eval(&self, x: f64) -> Option<f64> {
        if self.chain {
            self.run_chain(x)
        } else if self.depth <= SMALL_STACK {
            self.run::<SMALL_STACK>(x)
        } else if self.depth <= STACK {
            self.run::<STACK>(x)
        } else {
            None
        }
    }

    #[cold]
    #[inline(never)]
    fn slow_eval(&self, x: f64) -> Result<f64, DomainFault> {
        self.source.eval(x)
    }

    #[inline]
    fn run_chain(&self, x: f64) -> Option<f64> {
        let mut top = x;
        let mut finite = x.is_finite();
        for &op in &self.ops[1..] {
            top = apply_unary(op, top);
            finite &= top.is_finite();
        }
        finite.then_some(top)
    }

    #[inline]
    fn run<const N: usize>(&self, x: f64) -> Option<f64> {
        let mut st = [0.0_f64; N];
        let mut sp = 0usize;
        // Domain violations turn into NaN; overflow is tracked without branching.
        let mut top = 0.0_f64;
        let mut finite = true;
        for op in &self.ops {
            top = match *op {
                Op::Const(c) => {
                    st[sp] = top;
                    sp += 1;
                    c
                }
                Op::X => {
                    st[sp] = top;
                    sp += 1;
                    x
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    sp -= 1;
                    let a = st[sp];
                    match *op {
                        Op::Add => a + top,
                        Op::Sub => a - top,
                        Op::Mul => a * top,
                        Op::Div => guard(top != 0.0, a / top),
                        _ => power(a, top).unwrap_or(f64::NAN),
                    }
                }
                unary => apply_unary(unary, top),
            };
            finite &= top.is_finite();
        }
        finite.then_some(top)
    }
}

/// Ops that replace the top of the stack without touching the rest.
#[inline(always)]
fn apply_unary(op: Op, top: f64) -> f64 {
    match op {
        Op::Neg => -top,
        Op::Scale(c) => c * top,
        Op::Shift(c) => c + top,
        Op::Recip => guard(top != 0.0, 1.0 / top),
        Op::Square => top * top,
        Op::PowInt(n) => guard(top != 0.0 || n >= 0, top.powi(n)),
        Op::Quarter(m) => guard(top > 0.0 || (top == 0.0 && m > 0), quarter_pow(top, m)),
        Op::PowConst(c) => guard(top > 0.0 || (top == 0.0 && c > 0.0), top.powf(c)),
        Op::Sqrt => guard(top >= 0.0, top.sqrt()),
        Op::RecipSqrt => guard(top > 0.0, 1.0 / top.sqrt()),
        Op::Exp => top.exp(),
        Op::Log => guard(top > 0.0, top.ln()),
        Op::Abs => top.abs(),
        Op::Sign => {
            if top > 0.0 {
                1.0
            } else if top < 0.0 {
                -1.0
            } else {
                top
            }
        }
        Op::Const(_) | Op::X | Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => unreachable!("not a unary op"),
    }
}

#[inline(always)]
fn guard(ok: bool, v: f64) -> f64 {
    if ok {
        v
    } else {
        f64::NAN
    }
}

/// `a^(m/4)` for `a ≥ 0` through square roots.
#[inline]
fn quarter_pow(a: f64, m: i32) -> f64 {
    let k = m.unsigned_abs();
    let whole = a.powi((k / 4) as i32);
    let r = a.sqrt();
    let frac = match k % 4 {
        0 => 1.0,
        1 => r.sqrt(),
        2 => r,
        _ => r * r.sqrt(),
    };
    let v = whole * frac;
    if m < 0 {
        1.0 / v
    } else {
        v
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::X => ops.push(Op::X),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Bin(BinOp::Pow, ..) | Expr::Call(Func::Pow, _) if pow_parts(e).1.constant_value().is_some() => {
            let (a, b) = pow_parts(e);
            emit(a, ops);
            emit_const_pow(b.constant_value().unwrap(), ops);
        }
        Expr::Bin(BinOp::Div, a, b) if a.constant_value() == Some(1.0) => {
            emit(b, ops);
            ops.push(Op::Recip);
        }
        Expr::Bin(op @ (BinOp::Mul | BinOp::Add), a, b)
            if a.constant_value().is_some() || b.constant_value().is_some() =>
        {
            let (c, other) = match a.constant_value() {
                Some(c) => (c, b),
                None => (b.constant_value().unwrap(), a),
            };
            emit(other, ops);
            ops.push(if *op == BinOp::Mul { Op::Scale(c) } else { Op::Shift(c) });
        }
        Expr::Bin(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
                BinOp::Pow => Op::Pow,
            });
        }
        Expr::Call(f, args) => {
            for a in args {
                emit(a, ops);
            }
            ops.push(match f {
                Func::Exp => Op::Exp,
                Func::Log => Op::Log,
                Func::Sqrt => Op::Sqrt,
                Func::Abs => Op::Abs,
                Func::Sign => Op::Sign,
                Func::Pow => Op::Pow,
            });
        }
    }
}

fn pow_parts(e: &Expr) -> (&Expr, &Expr) {
    match e {
        Expr::Bin(BinOp::Pow, a, b) => (a, b),
        Expr::Call(Func::Pow, args) => (&args[0], &args[1]),
        _ => unreachable!("not a power"),
    }
}

fn emit_const_pow(c: f64, ops: &mut Vec<Op>) {
    if c == 2.0 {
        ops.push(Op::Square);
    } else if c == -1.0 {
        ops.push(Op::Recip);
    } else if c.fract() == 0.0 && c.abs() <= 1024.0 {
        ops.push(Op::PowInt(c as i32));
    } else if c == 0.5 {
        ops.push(Op::Sqrt);
    } else if c == -0.5 {
        ops.push(Op::RecipSqrt);
    } else if (4.0 * c).fract() == 0.0 && c.abs() <= 64.0 {
        ops.push(Op::Quarter((4.0 * c) as i32));
    } else {
        ops.push(Op::PowConst(c));
    }
}

fn max_depth(ops: &[Op]) -> usize {
    let mut sp = 0usize;
    let mut max = 0;
    for op in ops {
        match op {
            Op::Const(_) | Op::X => sp += 1,
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => sp -= 1,
            _ => {}
        }
        max = max.max(sp);
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn matches_tree_evaluation() {
        for src in [
            "1/x",
            "abs(x)^(-3/4)",
            "x^(-1/2)",
            "sqrt(x) + exp(-x) * log(x + 2)",
            "pow(x, 3) - sign(x - 1)",
            "(x - 1) * (x + 2) / (x^2 + 1)",
            "x^x",
        ] {
            let e = parse(src).unwrap();
            let c = CompiledExpr::new(&e);
            for &x in &[0.3, 1.0, 2.5, 7.0] {
                let (u, v) = (c.eval(x).unwrap(), e.eval(x).unwrap());
                assert!((u - v).abs() <= 1e-15 * v.abs(), "{src} at {x}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn faults_are_detailed() {
        let c = CompiledExpr::new(&parse("1/x").unwrap());
        let err = c.eval(0.0).unwrap_err();
        assert_eq!(err.reason, "division by zero");
        let c = CompiledExpr::new(&parse("x^(-1/2)").unwrap());
        assert!(c.eval(-1.0).is_err());
        assert_eq!(CompiledExpr::new(&parse("2*3").unwrap()).constant(), Some(6.0));
    }
}
