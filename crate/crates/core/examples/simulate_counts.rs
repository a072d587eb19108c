//! Simulate a standardized Gaussian VAR(1) and map it to count marginals.

use latent_count::marginals::MarginalSpec;
use latent_count::var_model::{check_causal, simulate, standardize, transform_counts, VarModel};
use nalgebra::DMatrix;

fn main() -> latent_count::Result<()> {
    let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.2, 0.0, -0.4, 0.0, 0.3, 0.0, 0.3]);
    let model = VarModel::new(vec![a], DMatrix::identity(3, 3))?;
    println!("spectral radius {:.4}", check_causal(&model).spectral_radius);

    let st = standardize(&model, 1)?;
    println!("standardized Gamma_Z(0):{}", st.acvf.at(0));
    println!("Gamma_Z(1):{}", st.acvf.at(1));

    let specs = vec![
        MarginalSpec::bernoulli(0.3)?,
        MarginalSpec::poisson(1.5)?,
        MarginalSpec::neg_binomial(3, 0.6)?,
    ];
    let z = simulate(&st.model, 2000, 42, None)?;
    let x = transform_counts(&z, &specs)?;
    for (i, spec) in specs.iter().enumerate() {
        let col = x.column(i);
        let mean = col.iter().map(|&v| v as f64).sum::<f64>() / col.len() as f64;
        println!(
            "{:<12} sample mean {mean:.4}  true mean {:.4}",
            spec.name(),
            spec.mean()?
        );
    }
    println!("first rows of counts:{}", x.rows(0, 5));
    Ok(())
}
