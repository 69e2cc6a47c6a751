//! Global minimization of real polynomials through moment relaxations whose
//! size is reduced by border bases of the gradient ideal.

pub mod border_basis;
pub(crate) mod linalg;
pub mod minimizer;
pub mod moment;
pub mod parser;
pub mod poly;
pub mod roots;
pub mod sdp;

pub use border_basis::{
    check_border_basis, complete_in_degree, BorderBasisError, CompletionOptions, RewriteRule,
    RewritingFamily,
};
pub use parser::{format_polynomial, parse_polynomial, ParseError};
pub use poly::{Monomial, MonomialBasis, PolyError, Polynomial};
