use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn non_empty(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        Err(Error::InvalidArgument(format!("{name} scores are empty")))
    } else {
        Ok(())
    }
}

/// Critic hinge loss: `mean(max(0, 1 - real)) + mean(max(0, 1 + fake))`.
pub fn hinge_d(real: &[f64], fake: &[f64]) -> Result<f64> {
    non_empty("real", real)?;
    non_empty("fake", fake)?;
    let r: Vec<f64> = real.iter().map(|&s| (1.0 - s).max(0.0)).collect();
    let f: Vec<f64> = fake.iter().map(|&s| (1.0 + s).max(0.0)).collect();
    Ok(mean(&r) + mean(&f))
}

/// Generator hinge loss: `-mean(fake)`.
pub fn hinge_g(fake: &[f64]) -> Result<f64> {
    non_empty("fake", fake)?;
    Ok(-mean(fake))
}
