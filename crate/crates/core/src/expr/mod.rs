//! Scalar expressions in named variables, with real and dual-number
//! evaluation.
//!
//! Curves, reparameterizations and condition functions arrive as text in
//! configuration files. They are parsed once into an [`Expression`] whose
//! variables are resolved to positional slots, so evaluation in hot loops
//! is a plain tree walk over `&[f64]`.

mod dual;
mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

pub use dual::Dual;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable '{name}' at offset {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("unknown function '{name}' at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("math domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => " * ",
            BinOp::Div => " / ",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree node. Variables are indices into the owning
/// [`Expression`]'s variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Binary(op, ..) => op.precedence(),
            Node::Neg(_) => 3,
            Node::Const(v) if *v < 0.0 || !v.is_finite() => 0,
            _ => 5,
        }
    }

    fn collect_vars(&self, used: &mut [bool]) {
        match self {
            Node::Var(i) => used[*i] = true,
            Node::Const(_) => {}
            Node::Neg(a) | Node::Call(_, a) => a.collect_vars(used),
            Node::Binary(_, a, b) => {
                a.collect_vars(used);
                b.collect_vars(used);
            }
        }
    }

    fn map_vars(&self, f: &impl Fn(usize) -> Node) -> Node {
        match self {
            Node::Var(i) => f(*i),
            Node::Const(v) => Node::Const(*v),
            Node::Neg(a) => Node::Neg(Box::new(a.map_vars(f))),
            Node::Call(func, a) => Node::Call(*func, Box::new(a.map_vars(f))),
            Node::Binary(op, a, b) => {
                Node::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f)))
            }
        }
    }
}

/// A parsed scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    vars: Vec<String>,
    free: Vec<usize>,
}

/// Parse `source` allowing only the variables in `allowed_vars`.
///
/// Operator precedence from tightest: `^` (right-associative), unary minus,
/// `* /`, `+ -`. Functions: `sin cos exp log sqrt abs`. The name `pi` is
/// the constant unless shadowed by a variable.
pub fn parse(source: &str, allowed_vars: &[&str]) -> Result<Expression, ExprError> {
    if source.trim().is_empty() {
        return Err(ExprError::InvalidInput("empty expression".into()));
    }
    if allowed_vars.is_empty() {
        return Err(ExprError::InvalidInput("no variables allowed".into()));
    }
    for (i, v) in allowed_vars.iter().enumerate() {
        let valid = v
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid || Func::from_name(v).is_some() {
            return Err(ExprError::InvalidInput(format!(
                "invalid variable name '{v}'"
            )));
        }
        if allowed_vars[..i].contains(v) {
            return Err(ExprError::InvalidInput(format!("duplicate variable '{v}'")));
        }
    }
    let vars: Vec<String> = allowed_vars.iter().map(|s| s.to_string()).collect();
    let root = parse::parse_node(source, &vars)?;
    Ok(Expression::from_parts(root, vars))
}

impl Expression {
    fn from_parts(root: Node, vars: Vec<String>) -> Expression {
        let mut used = vec![false; vars.len()];
        root.collect_vars(&mut used);
        let free = (0..vars.len()).filter(|&i| used[i]).collect();
        Expression { root, vars, free }
    }

    /// A constant expression over the given variable list.
    pub fn constant(value: f64, vars: &[&str]) -> Expression {
        Expression::from_parts(
            Node::Const(value),
            vars.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Variables this expression may reference, in slot order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Variables that actually occur, in slot order.
    pub fn free_vars(&self) -> Vec<&str> {
        self.free.iter().map(|&i| self.vars[i].as_str()).collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    fn slots(&self, bindings: &[(&str, f64)]) -> Result<Vec<f64>, ExprError> {
        let mut values = vec![f64::NAN; self.vars.len()];
        for &i in &self.free {
            let name = &self.vars[i];
            let (_, v) = bindings
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| ExprError::UnboundVariable(name.clone()))?;
            values[i] = *v;
        }
        Ok(values)
    }

    /// Evaluate with named bindings. Every free variable must be bound;
    /// extra bindings are ignored.
    pub fn eval(&self, bindings: &[(&str, f64)]) -> Result<f64, ExprError> {
        self.eval_at(&self.slots(bindings)?)
    }

    /// Evaluate with values given positionally in [`Expression::vars`] order.
    pub fn eval_at(&self, values: &[f64]) -> Result<f64, ExprError> {
        check_arity(values, self.vars.len())?;
        eval_node(&self.root, &|i| values[i])
    }

    /// Value and partial derivative with respect to `seed`.
    ///
    /// A seed that does not occur in the expression yields a zero
    /// derivative; it still has to be a declared variable.
    pub fn eval_dual(&self, bindings: &[(&str, f64)], seed: &str) -> Result<Dual, ExprError> {
        let seed_idx = self
            .var_index(seed)
            .ok_or_else(|| ExprError::UnboundVariable(seed.to_string()))?;
        self.eval_dual_at(&self.slots(bindings)?, seed_idx)
    }

    pub fn eval_dual_at(&self, values: &[f64], seed: usize) -> Result<Dual, ExprError> {
        check_arity(values, self.vars.len())?;
        eval_node(&self.root, &|i| {
            if i == seed {
                Dual::variable(values[i])
            } else {
                Dual::constant(values[i])
            }
        })
    }

    /// Replace variable `var` by `replacement`. The result's variables are
    /// this expression's variables minus `var`, followed by any new
    /// variables of `replacement`.
    pub fn substitute(&self, var: &str, replacement: &Expression) -> Result<Expression, ExprError> {
        let target = self
            .var_index(var)
            .ok_or_else(|| ExprError::UnboundVariable(var.to_string()))?;
        let mut vars: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target)
            .map(|(_, v)| v.clone())
            .collect();
        for v in &replacement.vars {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        let index_of = |name: &str| vars.iter().position(|v| v == name).unwrap();
        let outer: Vec<usize> = self
            .vars
            .iter()
            .map(|v| if v == var { usize::MAX } else { index_of(v) })
            .collect();
        let inner_map: Vec<usize> = replacement.vars.iter().map(|v| index_of(v)).collect();
        let inner = replacement.root.map_vars(&|i| Node::Var(inner_map[i]));
        let root = self.root.map_vars(&|i| {
            if i == target {
                inner.clone()
            } else {
                Node::Var(outer[i])
            }
        });
        Ok(Expression::from_parts(root, vars))
    }
}

fn check_arity(values: &[f64], n: usize) -> Result<(), ExprError> {
    if values.len() != n {
        return Err(ExprError::InvalidInput(format!(
            "expected {n} values, got {}",
            values.len()
        )));
    }
    Ok(())
}

trait Number:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lit(v: f64) -> Self;
    fn val(self) -> f64;
    fn slope(self) -> f64;
    fn is_finite(self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn pow(self, e: Self) -> Self;
}

impl Number for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn val(self) -> f64 {
        self
    }
    fn slope(self) -> f64 {
        0.0
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn pow(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

impl Number for Dual {
    fn lit(v: f64) -> Self {
        Dual::constant(v)
    }
    fn val(self) -> f64 {
        self.value
    }
    fn slope(self) -> f64 {
        self.deriv
    }
    fn is_finite(self) -> bool {
        self.value.is_finite() && self.deriv.is_finite()
    }
    fn sin(self) -> Self {
        Dual::sin(self)
    }
    fn cos(self) -> Self {
        Dual::cos(self)
    }
    fn exp(self) -> Self {
        Dual::exp(self)
    }
    fn ln(self) -> Self {
        Dual::ln(self)
    }
    fn sqrt(self) -> Self {
        Dual::sqrt(self)
    }
    fn abs(self) -> Self {
        Dual::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        Dual::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        Dual::powf(self, p)
    }
    fn pow(self, e: Self) -> Self {
        Dual::pow(self, e)
    }
}

fn eval_node<N: Number>(node: &Node, var: &impl Fn(usize) -> N) -> Result<N, ExprError> {
    let out = match node {
        Node::Const(v) => N::lit(*v),
        Node::Var(i) => var(*i),
        Node::Neg(a) => -eval_node(a, var)?,
        Node::Call(func, a) => {
            let x = eval_node(a, var)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Abs => x.abs(),
                Func::Log => {
                    if x.val() <= 0.0 {
                        return Err(ExprError::Domain(format!("log of {}", x.val())));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x.val() < 0.0 {
                        return Err(ExprError::Domain(format!("sqrt of {}", x.val())));
                    }
                    x.sqrt()
                }
            }
        }
        Node::Binary(op, a, b) => {
            let x = eval_node(a, var)?;
            let y = eval_node(b, var)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.val() == 0.0 {
                        return Err(ExprError::Domain("division by zero".into()));
                    }
                    x / y
                }
                BinOp::Pow => power(x, y)?,
            }
        }
    };
    if !out.is_finite() {
        return Err(ExprError::Domain("non-finite result".into()));
    }
    Ok(out)
}

fn power<N: Number>(base: N, exponent: N) -> Result<N, ExprError> {
    let p = exponent.val();
    if exponent.slope() == 0.0 {
        if p.fract() == 0.0 && p.abs() <= f64::from(i32::MAX) {
            if base.val() == 0.0 && p < 0.0 {
                return Err(ExprError::Domain("zero to a negative power".into()));
            }
            return Ok(base.powi(p as i32));
        }
        if base.val() < 0.0 {
            return Err(ExprError::Domain(format!(
                "negative base {} to non-integer power {p}",
                base.val()
            )));
        }
        return Ok(base.powf(p));
    }
    if base.val() <= 0.0 {
        return Err(ExprError::Domain(format!(
            "variable exponent needs a positive base, got {}",
            base.val()
        )));
    }
    Ok(base.pow(exponent))
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.vars)
    }
}

fn write_child(
    f: &mut fmt::Formatter<'_>,
    node: &Node,
    vars: &[String],
    parens: bool,
) -> fmt::Result {
    if parens {
        f.write_str("(")?;
        write_node(f, node, vars)?;
        f.write_str(")")
    } else {
        write_node(f, node, vars)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, vars: &[String]) -> fmt::Result {
    match node {
        Node::Const(v) => {
            if *v < 0.0 {
                write!(f, "({v})")
            } else {
                write!(f, "{v}")
            }
        }
        Node::Var(i) => f.write_str(&vars[*i]),
        Node::Neg(a) => {
            f.write_str("-")?;
            write_child(f, a, vars, a.precedence() < 3)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, vars)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            let p = op.precedence();
            let right_assoc = *op == BinOp::Pow;
            let left_parens = a.precedence() < p || (right_assoc && a.precedence() == p);
            let right_parens = b.precedence() < p || (!right_assoc && b.precedence() == p);
            write_child(f, a, vars, left_parens)?;
            f.write_str(op.symbol())?;
            write_child(f, b, vars, right_parens)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(src: &str) -> Expression {
        parse(src, &["t"]).unwrap()
    }

    #[test]
    fn cube_parses_to_power_node() {
        let e = t("t^3");
        assert_eq!(
            e.root(),
            &Node::Binary(
                BinOp::Pow,
                Box::new(Node::Var(0)),
                Box::new(Node::Const(3.0))
            )
        );
        assert_eq!(e.eval(&[("t", 2.0)]).unwrap(), 8.0);
    }

    #[test]
    fn polynomial_arithmetic() {
        assert_eq!(t("3*t^2 + 1").eval(&[("t", 2.0)]).unwrap(), 13.0);
    }

    #[test]
    fn incomplete_input_reports_offset() {
        match parse("2*", &["t"]) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn implicit_multiplication_is_rejected() {
        assert!(matches!(
            parse("2t", &["t"]),
            Err(ExprError::Syntax { offset: 1, .. })
        ));
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(
            parse("t + y", &["t"]),
            Err(ExprError::UnknownVariable { offset: 4, .. })
        ));
        assert!(matches!(
            parse("tan(t)", &["t"]),
            Err(ExprError::UnknownFunction { offset: 0, .. })
        ));
        assert!(matches!(
            parse("sin", &["t"]),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(parse("", &["t"]), Err(ExprError::InvalidInput(_))));
        assert!(matches!(parse("t", &[]), Err(ExprError::InvalidInput(_))));
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str, x: f64| t(s).eval(&[("t", x)]).unwrap();
        assert_eq!(v("-t^2", 3.0), -9.0);
        assert_eq!(v("2^3^2", 0.0), 512.0);
        assert_eq!(v("2^-t", 1.0), 0.5);
        assert_eq!(v("-t*2", 3.0), -6.0);
        assert_eq!(v("8 - 4 - 2", 0.0), 2.0);
        assert_eq!(v("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(v("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(v("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(v("1.5e1 + .5", 0.0), 15.5);
    }

    #[test]
    fn domain_violations_are_errors() {
        assert!(matches!(
            t("sqrt(t)").eval(&[("t", -1.0)]),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(
            t("log(t)").eval(&[("t", 0.0)]),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(
            t("1/t").eval(&[("t", 0.0)]),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(
            t("t^0.5").eval(&[("t", -2.0)]),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(
            t("exp(t)").eval(&[("t", 1e4)]),
            Err(ExprError::Domain(_))
        ));
        assert_eq!(t("t^0.5").eval(&[("t", 4.0)]).unwrap(), 2.0);
        assert_eq!(t("t^3").eval(&[("t", -2.0)]).unwrap(), -8.0);
    }

    #[test]
    fn unbound_variable() {
        let e = parse("a + b", &["a", "b"]).unwrap();
        assert_eq!(
            e.eval(&[("a", 1.0)]),
            Err(ExprError::UnboundVariable("b".into()))
        );
        assert_eq!(e.eval(&[("b", 2.0), ("a", 1.0)]).unwrap(), 3.0);
    }

    #[test]
    fn pythagorean_identity() {
        let y = t("sin(t)^2 + cos(t)^2").eval(&[("t", 0.7)]).unwrap();
        assert!((y - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn dual_polynomials() {
        assert_eq!(
            t("t^3 + t").eval_dual(&[("t", 1.0)], "t").unwrap(),
            Dual::new(2.0, 4.0)
        );
        assert_eq!(
            t("t^3").eval_dual(&[("t", 2.0)], "t").unwrap(),
            Dual::new(8.0, 12.0)
        );
    }

    #[test]
    fn dual_gaussian_matches_finite_difference() {
        let e = t("exp(-t^2/2)");
        let d = e.eval_dual(&[("t", 1.0)], "t").unwrap();
        let h = 1e-5;
        let fd =
            (e.eval(&[("t", 1.0 + h)]).unwrap() - e.eval(&[("t", 1.0 - h)]).unwrap()) / (2.0 * h);
        let expected = (-0.5f64).exp();
        assert!((d.value - expected).abs() <= 1e-12);
        assert!((d.deriv + expected).abs() <= 1e-12);
        assert!((d.deriv - fd).abs() <= 1e-9);
    }

    #[test]
    fn dual_abs_at_zero_and_partial_seeds() {
        assert_eq!(
            t("abs(t)").eval_dual(&[("t", 0.0)], "t").unwrap().deriv,
            0.0
        );
        let c = parse("theta1^2 + 3*theta2", &["theta1", "theta2"]).unwrap();
        let b = [("theta1", 2.0), ("theta2", 1.0)];
        assert_eq!(c.eval_dual(&b, "theta1").unwrap(), Dual::new(7.0, 4.0));
        assert_eq!(c.eval_dual(&b, "theta2").unwrap(), Dual::new(7.0, 3.0));
        assert!(c.eval_dual(&b, "t").is_err());
    }

    #[test]
    fn variable_exponent() {
        let e = parse("t^t", &["t"]).unwrap();
        let d = e.eval_dual(&[("t", 2.0)], "t").unwrap();
        assert!((d.value - 4.0).abs() < 1e-15);
        assert!((d.deriv - 4.0 * (2f64.ln() + 1.0)).abs() < 1e-12);
        assert!(e.eval_dual(&[("t", -1.0)], "t").is_err());
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "t^3",
            "-t^2",
            "(-t)^2",
            "2^-t",
            "2^3^2",
            "(2^3)^2",
            "a - (b - c)",
            "a - b - c",
            "a / (b * c)",
            "-(a + b) * c",
            "--a",
            "a * -b",
            "sin(a)^2 + cos(b / c)",
            "0.1 + 1e-300 * a",
            "pi * a",
        ] {
            let vars = ["t", "a", "b", "c"];
            let e = parse(src, &vars).unwrap();
            let printed = e.to_string();
            let again = parse(&printed, &vars).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
        }
        assert_eq!(t("t^3").to_string(), "t^3");
        assert_eq!(t("3*t^2+1").to_string(), "3 * t^2 + 1");
    }

    #[test]
    fn substitution_composes_maps() {
        let mu = t("t^3");
        let phi = parse("r + r^3/3", &["r"]).unwrap();
        let composed = mu.substitute("t", &phi).unwrap();
        assert_eq!(composed.vars(), &["r".to_string()]);
        let r = 1.0;
        let tv = r + r * r * r / 3.0;
        let d = composed.eval_dual(&[("r", r)], "r").unwrap();
        assert!((d.value - tv.powi(3)).abs() < 1e-12);
        assert!((d.deriv - 3.0 * tv * tv * (1.0 + r * r)).abs() < 1e-12);
    }

    #[test]
    fn free_vars_are_subset_in_order() {
        let e = parse("c * a", &["a", "b", "c"]).unwrap();
        assert_eq!(e.free_vars(), vec!["a", "c"]);
    }
}
