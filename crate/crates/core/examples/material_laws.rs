//! Stress and tangent of the four elastic laws, and the two plastic
//! return maps.

use frictional_mpm::constitutive::{plastic_project, stress};
use frictional_mpm::math::{signed_svd, Mat3, Vec3};
use frictional_mpm::scene::{ElasticLaw, MaterialParams, Plasticity, TangentOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = Mat3::new(1.1, 0.05, 0.0, 0.0, 0.95, 0.02, 0.0, 0.0, 1.0);
    for law in [ElasticLaw::Linear, ElasticLaw::StVK, ElasticLaw::Corotational, ElasticLaw::NeoHookean] {
        let m = MaterialParams::new(law, 1e5, 0.3, 1000.0, Plasticity::None)?;
        let e = stress(&f, &m, TangentOptions::default())?;
        let min_eig = e.tangent.symmetric_eigenvalues().min();
        println!("{law:?}: energy {:.2} J/m^3, P_xx {:.1} Pa, smallest tangent eigenvalue {min_eig:.3e}", e.energy, e.p[(0, 0)]);
    }

    let stretched = Mat3::from_diagonal(&Vec3::new(1.2, 0.9, 1.0));
    let snow = MaterialParams::new(
        ElasticLaw::NeoHookean,
        1.4e5,
        0.2,
        400.0,
        Plasticity::BoxClamp { compression: 0.025, stretch: 0.0075 },
    )?;
    let up = plastic_project(&stretched, &Mat3::identity(), &snow)?;
    let (_, s, _) = signed_svd(&up.f_elastic);
    println!("box clamp: elastic singular values {:.4} {:.4} {:.4}, det Fp {:.4}", s[0], s[1], s[2], up.f_plastic.determinant());

    let fluid = MaterialParams::new(ElasticLaw::NeoHookean, 2e4, 0.3, 1000.0, Plasticity::DeviatoricEraser)?;
    let up = plastic_project(&stretched, &Mat3::identity(), &fluid)?;
    println!(
        "deviatoric eraser: F_e = {:.4} I, det kept {:.3e} vs {:.3e}",
        up.f_elastic[(0, 0)],
        up.f_elastic.determinant(),
        stretched.determinant()
    );
    Ok(())
}
