//! Cohen's kappa from a confusion matrix, and the agreement/kappa pairs of
//! balanced 4-class and 2-class problems.

use sstdpn::train::{kappa_from_agreement, ConfusionMatrix};

fn main() -> sstdpn::Result<()> {
    let truth = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3];
    let predicted = [0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 3, 2, 3, 3, 3, 0];
    let cm = ConfusionMatrix::from_predictions(&truth, &predicted, 4)?;
    for row in cm.counts() {
        println!("{row:?}");
    }
    println!(
        "accuracy {:.4}  chance {:.4}  kappa {:.4}",
        cm.accuracy(),
        cm.chance_agreement(),
        cm.kappa()
    );

    println!("\nbalanced classes, uniform predictions:");
    for (p0, classes) in [(0.8411, 4), (0.8665, 2), (0.25, 4), (1.0, 2)] {
        let pe = 1.0 / classes as f64;
        println!("  {classes} classes, accuracy {p0:.4} -> kappa {:.4}", kappa_from_agreement(p0, pe));
    }
    Ok(())
}
