//! Canonical multivariate expressions with rational exponents.
//!
//! Every value is a sum of power products with rational coefficients. Radical
//! constants such as `3^(3/2)` are kept exactly as prime atoms, so canonical
//! forms compare structurally.

mod expr;
mod order;
mod parse;
mod render;

pub use expr::{Atom, Exp, Monomial, SymExpr};
pub use order::{leading_term, Assumption, GrowthOrder};
pub use parse::{parse_expr, BinOp, Expr, ParseError};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolicError {
    #[error("symbol `{0}` is neither growing nor bounded")]
    UnclassifiedSymbol(String),
    #[error("cannot raise the sum `{0}` to a fractional or negative power")]
    NonMonomialPower(String),
    #[error("fractional power of negative value `{0}`")]
    NegativeBase(String),
    #[error("coefficient `{0}` is too large to factor")]
    Overflow(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression is not polynomial in `{0}`")]
    NonPolynomial(String),
}

/// Parses an expression, panicking on malformed input. Intended for literals.
pub fn sym(text: &str) -> SymExpr {
    text.parse().unwrap_or_else(|e| panic!("bad expression `{text}`: {e}"))
}
