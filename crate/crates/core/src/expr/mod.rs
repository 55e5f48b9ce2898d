//! Coefficient expressions: a small arithmetic language in one variable `x`.
//!
//! Expressions are parsed from text (see [`parse`]), evaluated in any
//! [`Scalar`] type, composed into derived coefficients (`b²/σ²`, `2μ/σ²`, ...)
//! and inspected symbolically for singularity candidates and local power laws.

mod compile;
mod parse;
mod series;
mod singular;

use std::fmt;

use crate::scalar::Scalar;

pub use compile::CompiledExpr;
pub use parse::{parse, ParseError};
pub use series::{leading_exponent, local_behavior, LocalBehavior, Side};
pub use singular::{candidate_singularities, real_poly_roots, zeros_in};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
    Pow,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "pow" => Func::Pow,
            _ => return None,
        })
    }
}

/// Abstract syntax tree of a coefficient expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Evaluation outside the domain of some sub-expression.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("domain fault at x = {x}: {reason} in `{subexpr}`")]
pub struct DomainFault {
    pub subexpr: String,
    pub x: f64,
    pub reason: &'static str,
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn x() -> Expr {
        Expr::X
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Expr) -> Expr {
        Expr::bin(BinOp::Add, self, other)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Expr) -> Expr {
        Expr::bin(BinOp::Sub, self, other)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Expr) -> Expr {
        Expr::bin(BinOp::Mul, self, other)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, other: Expr) -> Expr {
        Expr::bin(BinOp::Div, self, other)
    }

    pub fn pow(self, other: Expr) -> Expr {
        Expr::bin(BinOp::Pow, self, other)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }

    pub fn abs(self) -> Expr {
        Expr::Call(Func::Abs, vec![self])
    }

    pub fn square(self) -> Expr {
        self.pow(Expr::Num(2.0))
    }

    /// `|x − p|`.
    pub fn distance_to(p: f64) -> Expr {
        Expr::X.sub(Expr::Num(p)).abs()
    }

    /// True if the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X => false,
            Expr::Neg(a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Call(_, args) => args.iter().all(Expr::is_constant),
        }
    }

    /// Value of a constant tree, if it is defined.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_constant() {
            self.eval::<f64>(0.0).ok()
        } else {
            None
        }
    }

    /// Replaces every occurrence of `x` with `with`.
    pub fn substitute(&self, with: &Expr) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::X => with.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(with))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(with), b.substitute(with)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(with)).collect()),
        }
    }

    /// Bottom-up constant folding with the identities `0·e = 0`, `0/e = 0`,
    /// `e ± 0 = e`, `1·e = e`, `e^1 = e`, `e^0 = 1`.
    pub fn fold(&self) -> Expr {
        let folded = match self {
            Expr::Num(v) => return Expr::Num(*v),
            Expr::X => return Expr::X,
            Expr::Neg(a) => Expr::Neg(Box::new(a.fold())),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.fold(), b.fold());
                let (ca, cb) = (num_of(&a), num_of(&b));
                match (op, ca, cb) {
                    (BinOp::Mul, Some(z), _) | (BinOp::Mul, _, Some(z)) if z == 0.0 => return Expr::Num(0.0),
                    (BinOp::Div, Some(z), _) if z == 0.0 => return Expr::Num(0.0),
                    (BinOp::Add, Some(z), _) if z == 0.0 => return b,
                    (BinOp::Add | BinOp::Sub, _, Some(z)) if z == 0.0 => return a,
                    (BinOp::Mul, Some(o), _) if o == 1.0 => return b,
                    (BinOp::Mul | BinOp::Div, _, Some(o)) if o == 1.0 => return a,
                    (BinOp::Pow, _, Some(o)) if o == 1.0 => return a,
                    (BinOp::Pow, _, Some(z)) if z == 0.0 => return Expr::Num(1.0),
                    _ => Expr::bin(*op, a, b),
                }
            }
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(Expr::fold).collect()),
        };
        if folded.is_constant() {
            if let Ok(v) = folded.eval::<f64>(0.0) {
                return Expr::Num(v);
            }
        }
        folded
    }

    /// True if the expression folds to the literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.fold(), Expr::Num(v) if v == 0.0)
    }

    /// Evaluates at `x`. Any undefined operation or non-finite intermediate
    /// value is reported as a [`DomainFault`].
    pub fn eval<T: Scalar>(&self, x: T) -> Result<T, DomainFault> {
        let fault = |reason| DomainFault {
            subexpr: self.to_string(),
            x: x.as_f64(),
            reason,
        };
        let v = match self {
            Expr::Num(v) => T::lit(*v),
            Expr::X => x,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Bin(op, a, b) => {
                let (u, w) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => u + w,
                    BinOp::Sub => u - w,
                    BinOp::Mul => u * w,
                    BinOp::Div => {
                        if w == T::zero() {
                            return Err(fault("division by zero"));
                        }
                        u / w
                    }
                    BinOp::Pow => power(u, w).map_err(fault)?,
                }
            }
            Expr::Call(f, args) => {
                let u = args[0].eval(x)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= T::zero() {
                            return Err(fault("log of a non-positive value"));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < T::zero() {
                            return Err(fault("sqrt of a negative value"));
                        }
                        u.sqrt()
                    }
                    Func::Abs => u.abs(),
                    Func::Sign => {
                        if u > T::zero() {
                            T::one()
                        } else if u < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        }
                    }
                    Func::Pow => power(u, args[1].eval(x)?).map_err(fault)?,
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fault("non-finite value"))
        }
    }
}

fn num_of(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

pub(crate) fn power<T: Scalar>(base: T, exponent: T) -> Result<T, &'static str> {
    let integral = exponent.fract() == T::zero();
    if base < T::zero() && !integral {
        return Err("non-integer power of a negative base");
    }
    if base == T::zero() && exponent < T::zero() {
        return Err("division by zero");
    }
    if integral && exponent.abs() <= T::lit(1024.0) {
        Ok(base.powi(exponent.to_i32().unwrap_or(0)))
    } else {
        Ok(base.powf(exponent))
    }
}

/// Fully parenthesized rendering; re-parsing yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
