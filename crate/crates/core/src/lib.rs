//! Implicit material point method with frictional contact.
//!
//! Bodies are seeded from tetrahedral meshes (one particle per tet, each
//! particle carrying its tet as a contact primitive). Every step runs an
//! implicit grid update per object, localizes contacts between deformed
//! particle tets, lifts them onto grid nodes through barycentric vertex
//! proxies, and solves the resulting Coulomb friction complementarity
//! problem over contact impulses with ADMM before transferring back.

pub mod collision;
pub mod constitutive;
pub mod contact;
pub mod driver;
pub mod error;
pub mod implicit;
pub mod kernels;
pub mod math;
pub mod ncp;
pub mod presets;
pub mod scene;
pub mod sim;
pub mod transfers;

pub use error::{MpmError, Result};
