//! Elastic laws, their exact tangents and plastic return mappings.
//!
//! Every law is written in terms of the first Piola-Kirchhoff stress
//! `P(F)` and its directional derivative `dP(F)[dF]`; the full fourth-order
//! tangent is assembled from nine directional derivatives.

use nalgebra::SMatrix;

use crate::error::{MpmError, Result};
use crate::math::{polar, signed_svd, Mat3, Vec3};
use crate::scene::{ElasticLaw, MaterialParams, Plasticity, TangentOptions};

/// `dP/dF` flattened row-major: entry `(3a + b, 3c + d)` is `dP_ab / dF_cd`.
pub type Tangent = SMatrix<f64, 9, 9>;

#[derive(Debug, Clone)]
pub struct StressEval {
    pub p: Mat3,
    pub tangent: Tangent,
    /// `det F_e`.
    pub j: f64,
    /// Strain energy density, diagnostic only.
    pub energy: f64,
}

pub fn energy_density(f: &Mat3, m: &MaterialParams) -> Result<f64> {
    let (mu, lambda) = (m.mu, m.lambda);
    let id = Mat3::identity();
    Ok(match m.law {
        ElasticLaw::Linear => {
            let eps = (f + f.transpose()) * 0.5 - id;
            mu * eps.norm_squared() + 0.5 * lambda * eps.trace().powi(2)
        }
        ElasticLaw::StVK => {
            let e = (f.transpose() * f - id) * 0.5;
            mu * e.norm_squared() + 0.5 * lambda * e.trace().powi(2)
        }
        ElasticLaw::Corotational => {
            let (r, s) = polar(f);
            mu * (f - r).norm_squared() + 0.5 * lambda * (s.trace() - 3.0).powi(2)
        }
        ElasticLaw::NeoHookean => {
            let j = checked_det(f)?;
            let lj = j.ln();
            0.5 * mu * (f.norm_squared() - 3.0) - mu * lj + 0.5 * lambda * lj * lj
        }
    })
}

fn checked_det(f: &Mat3) -> Result<f64> {
    let j = f.determinant();
    if j > 0.0 && j.is_finite() {
        Ok(j)
    } else {
        Err(MpmError::NonInvertible { det: j })
    }
}

/// First Piola-Kirchhoff stress.
pub fn piola(f: &Mat3, m: &MaterialParams) -> Result<Mat3> {
    let (mu, lambda) = (m.mu, m.lambda);
    let id = Mat3::identity();
    Ok(match m.law {
        ElasticLaw::Linear => (f + f.transpose() - id * 2.0) * mu + id * (lambda * (f - id).trace()),
        ElasticLaw::StVK => {
            let e = (f.transpose() * f - id) * 0.5;
            f * (e * (2.0 * mu) + id * (lambda * e.trace()))
        }
        ElasticLaw::Corotational => {
            let (r, _) = polar(f);
            (f - r) * (2.0 * mu) + r * (lambda * ((r.transpose() * f).trace() - 3.0))
        }
        ElasticLaw::NeoHookean => {
            let j = checked_det(f)?;
            let f_inv_t = f.try_inverse().ok_or(MpmError::NonInvertible { det: j })?.transpose();
            (f - f_inv_t) * mu + f_inv_t * (lambda * j.ln())
        }
    })
}

/// Rotation variation `dR` of the polar factor for a perturbation `df`.
fn rotation_differential(r: &Mat3, s: &Mat3, df: &Mat3) -> Mat3 {
    let rt_df = r.transpose() * df;
    // Skew part of R^T dF equals [w]x S + S [w]x = [(tr S I - S) w]x.
    let rhs = crate::math::axial(&(rt_df - rt_df.transpose()));
    let sys = Mat3::identity() * s.trace() - s;
    let w = sys.try_inverse().map(|inv| inv * rhs).unwrap_or_else(Vec3::zeros);
    r * crate::math::skew(&w)
}

/// Directional derivative `dP(F)[df]`.
pub fn piola_differential(f: &Mat3, df: &Mat3, m: &MaterialParams, opts: TangentOptions) -> Result<Mat3> {
    let (mu, lambda) = (m.mu, m.lambda);
    let id = Mat3::identity();
    Ok(match m.law {
        ElasticLaw::Linear => (df + df.transpose()) * mu + id * (lambda * df.trace()),
        ElasticLaw::StVK => {
            let e = (f.transpose() * f - id) * 0.5;
            let de = (df.transpose() * f + f.transpose() * df) * 0.5;
            df * (e * (2.0 * mu) + id * (lambda * e.trace())) + f * (de * (2.0 * mu) + id * (lambda * de.trace()))
        }
        ElasticLaw::Corotational => {
            let (r, s) = polar(f);
            let dr = if opts.fixed_rotation { Mat3::zeros() } else { rotation_differential(&r, &s, df) };
            // tr(dR^T F) = tr(W^T S) = 0 since W is skew and S symmetric.
            (df - dr) * (2.0 * mu) + r * (lambda * (r.transpose() * df).trace()) + dr * (lambda * (s.trace() - 3.0))
        }
        ElasticLaw::NeoHookean => {
            let j = checked_det(f)?;
            let f_inv = f.try_inverse().ok_or(MpmError::NonInvertible { det: j })?;
            let f_inv_t = f_inv.transpose();
            df * mu + f_inv_t * df.transpose() * f_inv_t * (mu - lambda * j.ln())
                + f_inv_t * (lambda * (f_inv * df).trace())
        }
    })
}

/// Full `dP/dF`, optionally projected to the nearest positive semi-definite
/// matrix.
pub fn tangent(f: &Mat3, m: &MaterialParams, opts: TangentOptions) -> Result<Tangent> {
    let mut t = Tangent::zeros();
    for c in 0..3 {
        for d in 0..3 {
            let mut df = Mat3::zeros();
            df[(c, d)] = 1.0;
            let dp = piola_differential(f, &df, m, opts)?;
            for a in 0..3 {
                for b in 0..3 {
                    t[(3 * a + b, 3 * c + d)] = dp[(a, b)];
                }
            }
        }
    }
    if opts.project_spd {
        let sym = (t + t.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        t = eig.eigenvectors * Tangent::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    }
    Ok(t)
}

pub fn stress(f: &Mat3, m: &MaterialParams, opts: TangentOptions) -> Result<StressEval> {
    Ok(StressEval {
        p: piola(f, m)?,
        tangent: tangent(f, m, opts)?,
        j: f.determinant(),
        energy: energy_density(f, m)?,
    })
}

/// Result of a plastic return mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticUpdate {
    pub f_elastic: Mat3,
    pub f_plastic: Mat3,
    /// Clamped singular values for the box-clamp model.
    pub singular_values: Option<Vec3>,
}

/// Projects a trial elastic deformation gradient back onto the yield set
/// while keeping `F = F_e F_pla` fixed.
pub fn plastic_project(f_trial: &Mat3, f_plastic: &Mat3, m: &MaterialParams) -> Result<PlasticUpdate> {
    match m.plasticity {
        Plasticity::None => Ok(PlasticUpdate { f_elastic: *f_trial, f_plastic: *f_plastic, singular_values: None }),
        Plasticity::BoxClamp { compression, stretch } => {
            let j = checked_det(f_trial)?;
            let (u, sigma, v) = signed_svd(f_trial);
            if sigma.iter().any(|&s| s <= 0.0) {
                return Err(MpmError::NonInvertible { det: j });
            }
            let clamped = sigma.map(|s| s.clamp(1.0 - compression, 1.0 + stretch));
            let f_elastic = u * Mat3::from_diagonal(&clamped) * v.transpose();
            let ratio = sigma.component_div(&clamped);
            let f_plastic = v * Mat3::from_diagonal(&ratio) * v.transpose() * f_plastic;
            Ok(PlasticUpdate { f_elastic, f_plastic, singular_values: Some(clamped) })
        }
        Plasticity::DeviatoricEraser => {
            let j = checked_det(f_trial)?;
            let c = j.cbrt();
            Ok(PlasticUpdate {
                f_elastic: Mat3::identity() * c,
                f_plastic: f_trial * f_plastic / c,
                singular_values: None,
            })
        }
    }
}
