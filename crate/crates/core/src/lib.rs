//! Kernel-space constructions: gaussian and indefinite reproducing kernels,
//! delta-functional embeddings of flat and curved (pseudo-)Riemannian
//! manifolds, group actions extended to delta spans, and Schrödinger
//! dynamics on time-sliced subspaces.

pub mod catalog;
pub mod dynamics;
pub mod element;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod gaussian;
pub mod groups;
pub mod inner;
pub mod kernel;
pub mod poly;
pub mod quadrature;

pub use element::{even_odd_split, DeltaJetTerm, GaussianTerm, SpaceElement};
pub use error::{Error, Result};
pub use inner::{inner_product, norm_squared};
pub use kernel::{gram_matrix, kernel_eval, KernelFamily, KernelSpec, Signature};
pub use poly::{Poly, C64};
pub use quadrature::{quadrature_inner_product, QuadratureConfig};
