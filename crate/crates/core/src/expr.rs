//! Arithmetic expressions for user-defined fields and absorption terms.
//!
//! Expressions are parsed by recursive descent into an immutable AST that
//! supports evaluation and exact symbolic differentiation. Divergences of
//! user fields are obtained by differentiating each component with respect
//! to its own coordinate, so no finite-difference error enters custom
//! problems.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | 'x' digits | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt | abs
//! ```
//!
//! `^` is right-associative and `-x0^2` parses as `-(x0^2)`. There is no
//! implicit multiplication: `2x0` is a parse error.

use std::fmt;
use std::sync::Arc;

/// Unary operations supported by the AST.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }
}

/// Binary operations supported by the AST.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// Immutable expression tree. Variables are indexed coordinates `x0..x{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Constant(f64),
    Variable(usize),
    Unary(UnaryOp, Arc<ExprAst>),
    Binary(BinaryOp, Arc<ExprAst>, Arc<ExprAst>),
}

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, thiserror::Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseDiagnostics {
    pub position: usize,
    pub message: String,
}

/// Runtime evaluation failure (division by zero, sqrt of a negative, ...).
#[derive(Debug, Clone, thiserror::Error)]
#[error("evaluation error: {0}")]
pub struct EvalError(pub String);

/// Differentiation failure. The function set has no logarithm, so powers
/// with a non-constant exponent have no derivative in this language.
#[derive(Debug, Clone, thiserror::Error)]
#[error("differentiation error: {0}")]
pub struct DiffError(pub String);

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    dimension: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, dimension: usize) -> Self {
        Parser {
            input: text.as_bytes(),
            pos: 0,
            dimension,
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseDiagnostics {
        ParseDiagnostics {
            position: self.pos.min(self.input.len()),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.input.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseDiagnostics> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Binary(BinaryOp::Add, Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Binary(BinaryOp::Sub, Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst, ParseDiagnostics> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::Binary(BinaryOp::Mul, Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprAst::Binary(BinaryOp::Div, Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ExprAst, ParseDiagnostics> {
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(ExprAst::Unary(UnaryOp::Neg, Arc::new(inner)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let exponent = self.factor()?;
            return Ok(ExprAst::Binary(
                BinaryOp::Pow,
                Arc::new(base),
                Arc::new(exponent),
            ));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<ExprAst, ParseDiagnostics> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<ExprAst, ParseDiagnostics> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.input.len()
            && (self.input[self.pos].is_ascii_digit() || self.input[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // optional exponent part: e.g. 1e-3
        if self.pos < self.input.len() && (self.input[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.input.len()
                && (self.input[self.pos] == b'+' || self.input[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseDiagnostics {
            position: start,
            message: format!("invalid number '{text}'"),
        })?;
        // reject implicit multiplication like "2x0"
        if self
            .input
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphabetic())
        {
            return Err(self.error("implicit multiplication is not allowed"));
        }
        Ok(ExprAst::Constant(value))
    }

    fn identifier(&mut self) -> Result<ExprAst, ParseDiagnostics> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
        if name == "x" {
            let digit_start = self.pos;
            while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digit_start == self.pos {
                return Err(ParseDiagnostics {
                    position: start,
                    message: "variable must be 'x' followed by an index, e.g. x0".into(),
                });
            }
            let idx: usize = std::str::from_utf8(&self.input[digit_start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| ParseDiagnostics {
                    position: digit_start,
                    message: "variable index out of range".into(),
                })?;
            if idx >= self.dimension {
                return Err(ParseDiagnostics {
                    position: start,
                    message: format!(
                        "variable x{idx} exceeds problem dimension {}",
                        self.dimension
                    ),
                });
            }
            return Ok(ExprAst::Variable(idx));
        }
        let op = match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => {
                return Err(ParseDiagnostics {
                    position: start,
                    message: format!("unknown identifier '{name}'"),
                })
            }
        };
        if !self.eat(b'(') {
            return Err(self.error(format!("expected '(' after '{name}'")));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.error("expected ')'"));
        }
        Ok(ExprAst::Unary(op, Arc::new(arg)))
    }
}

/// Parse `text` into an AST for a problem of the given dimension.
pub fn parse(text: &str, dimension: usize) -> Result<ExprAst, ParseDiagnostics> {
    let mut parser = Parser::new(text, dimension);
    let ast = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.input.len() {
        return Err(parser.error("trailing input"));
    }
    Ok(ast)
}

/// Evaluate the AST at a point. Singular operations (division by zero,
/// sqrt of a negative, fractional power of a negative base) return an
/// [`EvalError`] rather than NaN.
pub fn evaluate(ast: &ExprAst, x: &[f64]) -> Result<f64, EvalError> {
    match ast {
        ExprAst::Constant(c) => Ok(*c),
        ExprAst::Variable(i) => x
            .get(*i)
            .copied()
            .ok_or_else(|| EvalError(format!("point has no coordinate x{i}"))),
        ExprAst::Unary(op, inner) => {
            let v = evaluate(inner, x)?;
            match op {
                UnaryOp::Neg => Ok(-v),
                UnaryOp::Sin => Ok(v.sin()),
                UnaryOp::Cos => Ok(v.cos()),
                UnaryOp::Exp => Ok(v.exp()),
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        Err(EvalError(format!("sqrt of negative value {v}")))
                    } else {
                        Ok(v.sqrt())
                    }
                }
                UnaryOp::Abs => Ok(v.abs()),
            }
        }
        ExprAst::Binary(op, lhs, rhs) => {
            let a = evaluate(lhs, x)?;
            let b = evaluate(rhs, x)?;
            match op {
                BinaryOp::Add => Ok(a + b),
                BinaryOp::Sub => Ok(a - b),
                BinaryOp::Mul => Ok(a * b),
                BinaryOp::Div => {
                    if b == 0.0 {
                        Err(EvalError("division by zero".into()))
                    } else {
                        Ok(a / b)
                    }
                }
                BinaryOp::Pow => pow_real(a, b),
            }
        }
    }
}

/// Real-valued power: integer exponents of negative bases are exact,
/// fractional exponents of negative bases are rejected.
fn pow_real(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() < 2_147_483_647.0 {
        return Ok(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return Err(EvalError(format!(
            "fractional power {exponent} of negative base {base}"
        )));
    }
    Ok(base.powf(exponent))
}

/// Exact symbolic partial derivative with respect to variable `var`.
///
/// `abs` differentiates as `u / abs(u)` (i.e. sign, undefined at 0);
/// powers require a constant exponent.
pub fn differentiate(ast: &ExprAst, var: usize) -> Result<ExprAst, DiffError> {
    use BinaryOp::*;
    use UnaryOp::*;
    let d = |node: &ExprAst| differentiate(node, var);
    let bin = |op, a: ExprAst, b: ExprAst| ExprAst::Binary(op, Arc::new(a), Arc::new(b));
    let un = |op, a: ExprAst| ExprAst::Unary(op, Arc::new(a));
    match ast {
        ExprAst::Constant(_) => Ok(ExprAst::Constant(0.0)),
        ExprAst::Variable(i) => Ok(ExprAst::Constant(if *i == var { 1.0 } else { 0.0 })),
        ExprAst::Unary(op, inner) => {
            let du = d(inner)?;
            let u = (**inner).clone();
            let chain = match op {
                Neg => un(Neg, du),
                Sin => bin(Mul, un(Cos, u), du),
                Cos => un(Neg, bin(Mul, un(Sin, u), du)),
                Exp => bin(Mul, un(Exp, u), du),
                Sqrt => bin(Div, du, bin(Mul, ExprAst::Constant(2.0), un(Sqrt, u))),
                Abs => bin(Mul, bin(Div, u.clone(), un(Abs, u)), du),
            };
            Ok(chain)
        }
        ExprAst::Binary(op, lhs, rhs) => {
            let u = (**lhs).clone();
            let v = (**rhs).clone();
            match op {
                Add => Ok(bin(Add, d(lhs)?, d(rhs)?)),
                Sub => Ok(bin(Sub, d(lhs)?, d(rhs)?)),
                Mul => Ok(bin(Add, bin(Mul, d(lhs)?, v.clone()), bin(Mul, u, d(rhs)?))),
                Div => Ok(bin(
                    Div,
                    bin(Sub, bin(Mul, d(lhs)?, v.clone()), bin(Mul, u, d(rhs)?)),
                    bin(Mul, v.clone(), v),
                )),
                Pow => match **rhs {
                    ExprAst::Constant(c) => {
                        // d(u^c) = c * u^(c-1) * u'
                        Ok(bin(
                            Mul,
                            bin(
                                Mul,
                                ExprAst::Constant(c),
                                bin(Pow, u, ExprAst::Constant(c - 1.0)),
                            ),
                            d(lhs)?,
                        ))
                    }
                    _ => Err(DiffError(
                        "power with non-constant exponent has no derivative in this language"
                            .into(),
                    )),
                },
            }
        }
    }
}

impl fmt::Display for ExprAst {
    /// Conservative pretty-printer: every compound subexpression is
    /// parenthesized, so reparsing reproduces the tree exactly. The
    /// grammar has no signed literals, so a negative constant (these
    /// arise from differentiation, never from parsing) prints through an
    /// explicit negation to keep the value intact.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Constant(c) if *c < 0.0 => write!(f, "(-{})", -c),
            ExprAst::Constant(c) => write!(f, "{c}"),
            ExprAst::Variable(i) => write!(f, "x{i}"),
            ExprAst::Unary(UnaryOp::Neg, inner) => write!(f, "(-{inner})"),
            ExprAst::Unary(op, inner) => write!(f, "{}({inner})", op.name()),
            ExprAst::Binary(op, lhs, rhs) => write!(f, "({lhs} {} {rhs})", op.symbol()),
        }
    }
}

/// Highest variable index referenced plus one; 0 for constant expressions.
pub fn arity(ast: &ExprAst) -> usize {
    match ast {
        ExprAst::Constant(_) => 0,
        ExprAst::Variable(i) => i + 1,
        ExprAst::Unary(_, inner) => arity(inner),
        ExprAst::Binary(_, lhs, rhs) => arity(lhs).max(arity(rhs)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, dim: usize) -> ExprAst {
        parse(text, dim).expect("parse")
    }

    fn eval_at(text: &str, x: &[f64]) -> f64 {
        evaluate(&p(text, x.len()), x).expect("eval")
    }

    #[test]
    fn parses_linear_combination() {
        let ast = p("x0 + 2*x1", 2);
        assert_eq!(
            ast,
            ExprAst::Binary(
                BinaryOp::Add,
                Arc::new(ExprAst::Variable(0)),
                Arc::new(ExprAst::Binary(
                    BinaryOp::Mul,
                    Arc::new(ExprAst::Constant(2.0)),
                    Arc::new(ExprAst::Variable(1)),
                )),
            )
        );
    }

    #[test]
    fn unary_minus_evaluates() {
        assert_eq!(eval_at("-x1", &[0.0, 5.0, 0.0]), -5.0);
    }

    #[test]
    fn power_and_sin() {
        assert_eq!(eval_at("x0^2 + sin(x1)", &[2.0, 0.0]), 4.0);
    }

    #[test]
    fn constants_and_exp() {
        assert_eq!(eval_at("3", &[7.0]), 3.0);
        assert_eq!(eval_at("exp(0)", &[0.0]), 1.0);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let ast = p("x0/x1", 2);
        assert!(evaluate(&ast, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sqrt_of_negative_is_an_error() {
        let ast = p("sqrt(x0)", 1);
        assert!(evaluate(&ast, &[-1.0]).is_err());
    }

    #[test]
    fn fractional_power_of_negative_base_is_an_error() {
        let ast = p("x0^0.5", 1);
        assert!(evaluate(&ast, &[-2.0]).is_err());
        // integer powers of negative bases stay exact
        assert_eq!(eval_at("x0^2", &[-3.0]), 9.0);
        assert_eq!(eval_at("x0^3", &[-2.0]), -8.0);
    }

    #[test]
    fn unary_minus_binds_below_power() {
        // -x0^2 must parse as -(x0^2)
        assert_eq!(eval_at("-x0^2", &[3.0]), -9.0);
        assert_eq!(eval_at("(-x0)^2", &[3.0]), 9.0);
    }

    #[test]
    fn power_is_right_associative() {
        // 2^3^2 = 2^(3^2) = 512
        assert_eq!(eval_at("2^3^2", &[]), 512.0);
    }

    #[test]
    fn implicit_multiplication_rejected() {
        assert!(parse("2x0", 1).is_err());
    }

    #[test]
    fn variable_index_beyond_dimension_rejected() {
        let err = parse("x2", 2).unwrap_err();
        assert!(err.message.contains("dimension"));
    }

    #[test]
    fn unbalanced_parens_rejected() {
        assert!(parse("(x0 + 1", 1).is_err());
        assert!(parse("sin(x0", 1).is_err());
    }

    #[test]
    fn unknown_identifier_rejected() {
        let err = parse("tan(x0)", 1).unwrap_err();
        assert!(err.message.contains("unknown identifier"));
    }

    #[test]
    fn diagnostics_position_within_input() {
        let text = "x0 + tan(x0)";
        let err = parse(text, 1).unwrap_err();
        assert!(err.position <= text.len());
    }

    #[test]
    fn derivative_of_square() {
        let dast = differentiate(&p("x0^2", 1), 0).unwrap();
        assert_eq!(evaluate(&dast, &[3.0]).unwrap(), 6.0);
    }

    #[test]
    fn derivative_of_other_variable_is_zero() {
        let dast = differentiate(&p("x1", 2), 0).unwrap();
        assert_eq!(evaluate(&dast, &[4.0, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn rotation_field_divergence_vanishes() {
        // field (-x1, x0): d/dx0(-x1) + d/dx1(x0) = 0 everywhere
        let d0 = differentiate(&p("-x1", 2), 0).unwrap();
        let d1 = differentiate(&p("x0", 2), 1).unwrap();
        for point in [[0.3, -1.2], [5.0, 2.0], [0.0, 0.0]] {
            let div = evaluate(&d0, &point).unwrap() + evaluate(&d1, &point).unwrap();
            assert_eq!(div, 0.0);
        }
    }

    #[test]
    fn derivative_of_abs_is_sign() {
        let dast = differentiate(&p("abs(x0)", 1), 0).unwrap();
        assert_eq!(evaluate(&dast, &[2.5]).unwrap(), 1.0);
        assert_eq!(evaluate(&dast, &[-2.5]).unwrap(), -1.0);
        assert!(evaluate(&dast, &[0.0]).is_err());
    }

    #[test]
    fn variable_exponent_cannot_differentiate() {
        assert!(differentiate(&p("x0^x1", 2), 0).is_err());
    }

    #[test]
    fn pretty_print_reparses_to_same_ast() {
        for text in [
            "x0 + 2*x1",
            "-x0^2",
            "sin(x1)*cos(x0) - sqrt(abs(x0))/2",
            "1e-3 * exp(x0) + 7",
            "x0^2^3",
        ] {
            let ast = p(text, 2);
            let printed = ast.to_string();
            let reparsed = parse(&printed, 2).expect("reparse");
            assert_eq!(ast, reparsed, "round trip failed for {text}");
        }
    }
}
