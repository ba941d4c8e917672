//! One fine Brownian path, viewed at several step sizes.

use sdde::BrownianPath;

fn main() -> sdde::Result<()> {
    let fine = BrownianPath::generate(42, 0, 0.0, 2.0, 1 << 12)?;
    println!(
        "fine path: {} steps of {}",
        fine.fine_steps(),
        fine.fine_step()
    );

    for steps in [8usize, 64, 512] {
        let coarse = fine.coarsened(fine.fine_steps() / steps)?;
        let factor = fine.fine_steps() / steps;
        let max_gap = (0..=steps)
            .map(|k| {
                (coarse.wiener_value(k).unwrap() - fine.wiener_value(k * factor).unwrap()).abs()
            })
            .fold(0.0, f64::max);
        println!(
            "{steps:>4} steps: W(T) = {:+.12}, max |W_coarse - W_fine| on the grid = {max_gap:e}",
            coarse.wiener_value(steps)?
        );
    }

    // a different stream is independent; the same stream is reproducible
    let again = BrownianPath::generate(42, 0, 0.0, 2.0, 1 << 12)?;
    let other = BrownianPath::generate(42, 1, 0.0, 2.0, 1 << 12)?;
    println!(
        "same stream identical: {}",
        again.increments() == fine.increments()
    );
    println!(
        "stream 1 W(T) = {:+.12}",
        other.wiener_value(other.fine_steps())?
    );
    Ok(())
}
