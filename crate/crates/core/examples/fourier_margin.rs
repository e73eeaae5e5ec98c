//! Fourier spectra of the named targets and their majority margins.
//!
//! Usage: `cargo run --release --example fourier_margin -- [N]`

use latent_clusters::boolean::{majority_coefficient, majority_margin, named_target, NamedTarget};

fn main() -> latent_clusters::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(3, |s| s.parse().expect("N"));
    println!("majority coefficients by subset size:");
    for k in 0..=n {
        println!("  |T|={k}: {:+.6}", majority_coefficient(n, k)?);
    }
    for name in [NamedTarget::Parity, NamedTarget::Majority, NamedTarget::Dictator, NamedTarget::Constant] {
        let f = named_target(name, n)?;
        let nonzero: Vec<String> = f
            .fourier()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > 1e-12)
            .map(|(t, c)| format!("{t:0width$b}:{c:+.3}", width = n))
            .collect();
        let margin = majority_margin(&f)?;
        println!("{name:<9} spectrum [{}]  margin {:.4}  alpha {:?}", nonzero.join(" "), margin.delta, margin.alpha);
    }
    Ok(())
}
