//! Walks through the proximal operators on small vectors: elementwise
//! soft thresholding, Euclidean row shrinkage, and max-norm row shrinkage
//! together with its l1-ball projection complement.
//!
//!     cargo run --example prox_operators

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use autosize_nnlm::prox::{l2_norm, project_l1_ball, prox_l1, prox_l2_row, prox_linf_row};

fn show(label: &str, v: &[f64]) {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:+.4}")).collect();
    println!("  {label:<24} [{}]", cells.join(", "));
}

fn main() {
    let v = [3.0, -1.5, 0.4, -0.2, 2.2];
    let delta = 0.5;
    println!("one weight row, prox step size delta = {delta}");
    show("v", &v);
    println!();

    // Elementwise: every entry moves toward zero by delta and stops there.
    let mut soft = v;
    prox_l1(&mut soft, delta);
    show("l1 prox (soft threshold)", &soft);

    // Euclidean: the whole row keeps its direction and loses delta of its
    // length, so entries shrink proportionally and hit zero together.
    let mut shrunk = v;
    prox_l2_row(&mut shrunk, delta);
    show("l2 prox (length - delta)", &shrunk);
    println!(
        "  {:<24} {:.4} -> {:.4}",
        "row length",
        l2_norm(&v),
        l2_norm(&shrunk)
    );

    // Max-norm: only the largest magnitudes pay, clamped to a shared
    // water level; small entries are untouched. The complement of the
    // clamp is exactly the projection of v onto the l1 ball of radius
    // delta (Moreau decomposition), which is how the operator is tested.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut clamped = v;
    prox_linf_row(&mut clamped, delta, &mut rng);
    show("linf prox (clamp peaks)", &clamped);
    let projected = project_l1_ball(&v, delta);
    show("l1-ball projection", &projected);
    let residual: f64 = v
        .iter()
        .zip(clamped.iter().zip(&projected))
        .map(|(orig, (a, b))| (orig - a - b).abs())
        .fold(0.0, f64::max);
    println!("  {:<24} {residual:.1e}", "max |v - prox - proj|");
    println!();

    // Group sparsity comes from the terminal behavior: once delta reaches
    // the row's l1 norm (max-norm penalty) or l2 norm (Euclidean penalty),
    // the prox returns the exact zero row, killing the unit outright.
    let small = [0.2f64, -0.1, 0.15];
    println!(
        "a weak row dies in one step once delta covers its norm (sum |v| = {:.2}):",
        small.iter().map(|x| x.abs()).sum::<f64>()
    );
    show("v", &small);
    let mut dead = small;
    prox_linf_row(&mut dead, 0.5, &mut rng);
    show("linf prox, delta 0.5", &dead);
    let mut dead = small;
    prox_l2_row(&mut dead, 0.5);
    show("l2 prox, delta 0.5", &dead);
}
