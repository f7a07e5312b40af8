//! Group norms and their exact proximal operators.
//!
//! A hidden unit disappears when its incoming weights and bias are all
//! exactly zero, so the regularizers here act on whole rows: the l2,1
//! norm sums row Euclidean norms, the linf,1 norm sums row maxima. Their
//! proximal maps are applied after every gradient step and produce literal
//! `0.0` entries, never merely small ones.
//!
//! The linf row prox runs in expected linear time with randomized-pivot
//! partitioning. It is the Moreau dual of projection onto an l1 ball
//! ([`project_l1_ball`]), which gives an independent cross-check:
//! `v == prox_linf_row(v, d) + project_l1_ball(v, d)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{HiddenLayer, ModelParams};

/// Which penalty shapes the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    None,
    L1,
    L21,
    Linf1,
}

impl RegularizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegularizerKind::None => "none",
            RegularizerKind::L1 => "l1",
            RegularizerKind::L21 => "l21",
            RegularizerKind::Linf1 => "linf1",
        }
    }
}

impl std::fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RegularizerKind::None),
            "l1" => Ok(RegularizerKind::L1),
            "l21" => Ok(RegularizerKind::L21),
            "linf1" => Ok(RegularizerKind::Linf1),
            other => Err(Error::Config(format!(
                "unknown regularizer {other:?} (expected none, l1, l21 or linf1)"
            ))),
        }
    }
}

/// A regularizer kind together with its strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda: f64,
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!(
                "regularizer strength must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(RegularizerSpec { kind, lambda })
    }

    pub fn none() -> Self {
        RegularizerSpec {
            kind: RegularizerKind::None,
            lambda: 0.0,
        }
    }

    /// True when the prox step is the identity and may be skipped.
    pub fn is_identity(&self) -> bool {
        self.kind == RegularizerKind::None || self.lambda == 0.0
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Sum of row l2 norms over flattened row groups (bias included in the row).
pub fn group_norm_l21<'a, I>(rows: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter().map(l2_norm).sum()
}

/// Sum of row max-absolute values over flattened row groups.
pub fn group_norm_linf1<'a, I>(rows: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter().map(max_abs).sum()
}

/// Proximal map of `delta * l2 norm`: shrinks the whole row toward zero
/// along its own direction, to exactly zero once `delta` reaches the norm.
pub fn prox_l2_row(v: &mut [f64], delta: f64) {
    debug_assert!(delta >= 0.0);
    if delta == 0.0 {
        return;
    }
    let norm = l2_norm(v);
    if norm <= delta {
        v.fill(0.0);
    } else {
        let alpha = norm - delta;
        for x in v.iter_mut() {
            *x = (*x * alpha) / norm;
        }
    }
}

/// Proximal map of `delta * linf norm`: clips every entry into `[-xi, xi]`
/// where the threshold `xi` is chosen so the total absolute reduction is
/// exactly `min(delta, l1(v))`. Entries strictly inside the threshold are
/// untouched; if the whole l1 mass fits in `delta` the row becomes exactly
/// zero.
///
/// The threshold search partitions the absolute values around random
/// pivots, keeping a running sum of the prefix confirmed to lie above the
/// threshold, so the expected cost is linear in the row length.
pub fn prox_linf_row<R: Rng + ?Sized>(v: &mut [f64], delta: f64, rng: &mut R) {
    debug_assert!(delta >= 0.0);
    if v.is_empty() || delta == 0.0 {
        return;
    }
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total <= delta {
        v.fill(0.0);
        return;
    }
    let mut abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let mut lo = 0usize;
    let mut hi = abs.len();
    let mut s = 0.0;
    let mut rho = 0usize;
    while lo < hi {
        let pivot = rng.gen_range(lo..hi);
        let p = partition_descending(&mut abs, lo, hi, pivot);
        let cand_sum = s + abs[lo..=p].iter().sum::<f64>();
        let cand_rho = p + 1;
        let xi = (cand_sum - delta) / cand_rho as f64;
        if xi <= abs[p] {
            // Clipping the p+1 largest entries down to xi is consistent;
            // look right for a larger feasible prefix.
            s = cand_sum;
            rho = cand_rho;
            lo = p + 1;
        } else {
            hi = p;
        }
    }
    // total > delta guarantees rho >= 1 and xi > 0.
    let xi = (s - delta) / rho as f64;
    for x in v.iter_mut() {
        *x = x.clamp(-xi, xi);
    }
}

/// Partitions `a[lo..hi]` descending around the value at `pivot`:
/// afterwards everything left of the returned index is >= the pivot value,
/// which sits at the returned index.
fn partition_descending(a: &mut [f64], lo: usize, hi: usize, pivot: usize) -> usize {
    a.swap(lo, pivot);
    let pivot_value = a[lo];
    let mut i = lo + 1;
    for j in lo + 1..hi {
        if a[j] >= pivot_value {
            a.swap(i, j);
            i += 1;
        }
    }
    a.swap(lo, i - 1);
    i - 1
}

/// Euclidean projection onto the l1 ball of the given radius (sort-based).
/// Independent of [`prox_linf_row`] on purpose: the two are Moreau duals
/// and the tests hold them against each other.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius >= 0.0);
    if radius == 0.0 {
        return vec![0.0; v.len()];
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (j, &aj) in abs.iter().enumerate() {
        prefix += aj;
        let cand = (prefix - radius) / (j + 1) as f64;
        if cand < aj {
            theta = cand;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| {
            if x > theta {
                x - theta
            } else if x < -theta {
                x + theta
            } else {
                0.0
            }
        })
        .collect()
}

/// Elementwise soft-threshold, the proximal map of `delta * l1 norm`.
pub fn prox_l1(v: &mut [f64], delta: f64) {
    debug_assert!(delta >= 0.0);
    if delta == 0.0 {
        return;
    }
    for x in v.iter_mut() {
        *x = if *x > delta {
            *x - delta
        } else if *x < -delta {
            *x + delta
        } else {
            0.0
        };
    }
}

/// Regularizer half-step of proximal gradient descent: applies the row
/// prox with `delta = eta * lambda` to every hidden-unit group of both
/// hidden layers (for l1, soft-thresholds the same matrices and biases
/// elementwise). Embeddings and the output layer are never touched. With
/// kind `none` or `lambda = 0` this returns immediately and consumes no
/// randomness, so such runs are bit-identical to unregularized ones.
pub fn apply_prox<R: Rng + ?Sized>(
    params: &mut ModelParams,
    spec: &RegularizerSpec,
    eta: f64,
    rng: &mut R,
) {
    debug_assert!(eta > 0.0);
    if spec.is_identity() {
        return;
    }
    let delta = eta * spec.lambda;
    match spec.kind {
        RegularizerKind::None => unreachable!("is_identity covers kind none"),
        RegularizerKind::L1 => {
            for block in params.hidden1.iter_mut() {
                prox_l1(block.as_slice_mut().expect("standard layout"), delta);
            }
            prox_l1(params.bias1.as_slice_mut().expect("standard layout"), delta);
            prox_l1(
                params.hidden2.as_slice_mut().expect("standard layout"),
                delta,
            );
            prox_l1(params.bias2.as_slice_mut().expect("standard layout"), delta);
        }
        RegularizerKind::L21 | RegularizerKind::Linf1 => {
            let mut group = Vec::new();
            for layer in HiddenLayer::BOTH {
                for unit in 0..params.layer_units(layer) {
                    params.gather_group(layer, unit, &mut group);
                    match spec.kind {
                        RegularizerKind::L21 => prox_l2_row(&mut group, delta),
                        RegularizerKind::Linf1 => prox_linf_row(&mut group, delta, rng),
                        _ => unreachable!(),
                    }
                    params.scatter_group(layer, unit, &group);
                }
            }
        }
    }
}

/// Value of the chosen norm R(W) over the regularized matrices (hidden
/// layers and their biases), unweighted by lambda. Zero for kind `none`.
pub fn regularizer_value(params: &ModelParams, kind: RegularizerKind) -> f64 {
    match kind {
        RegularizerKind::None => 0.0,
        RegularizerKind::L1 => {
            let mut total = 0.0;
            for block in &params.hidden1 {
                total += block.iter().map(|x| x.abs()).sum::<f64>();
            }
            total += params.bias1.iter().map(|x| x.abs()).sum::<f64>();
            total += params.hidden2.iter().map(|x| x.abs()).sum::<f64>();
            total += params.bias2.iter().map(|x| x.abs()).sum::<f64>();
            total
        }
        RegularizerKind::L21 | RegularizerKind::Linf1 => {
            let mut group = Vec::new();
            let mut total = 0.0;
            for layer in HiddenLayer::BOTH {
                for unit in 0..params.layer_units(layer) {
                    params.gather_group(layer, unit, &mut group);
                    total += match kind {
                        RegularizerKind::L21 => l2_norm(&group),
                        RegularizerKind::Linf1 => max_abs(&group),
                        _ => unreachable!(),
                    };
                }
            }
            total
        }
    }
}

/// Per-unit `(linf, l2)` norms of the flattened incoming groups of one
/// hidden layer, in unit order. Feeds the weight-snapshot export.
pub fn row_group_norms(params: &ModelParams, layer: HiddenLayer) -> Vec<(f64, f64)> {
    let mut group = Vec::new();
    (0..params.layer_units(layer))
        .map(|unit| {
            params.gather_group(layer, unit, &mut group);
            (max_abs(&group), l2_norm(&group))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_params;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Sort-based reference for the linf row prox: scan prefixes of the
    /// descending absolute values for the largest feasible clip count.
    fn prox_linf_sorted(v: &[f64], delta: f64) -> Vec<f64> {
        if v.is_empty() || delta == 0.0 {
            return v.to_vec();
        }
        let total: f64 = v.iter().map(|x| x.abs()).sum();
        if total <= delta {
            return vec![0.0; v.len()];
        }
        let mut abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut prefix = 0.0;
        let mut xi = f64::INFINITY;
        for (j, &aj) in abs.iter().enumerate() {
            prefix += aj;
            let cand = (prefix - delta) / (j + 1) as f64;
            if cand <= aj {
                xi = cand;
            } else {
                break;
            }
        }
        v.iter().map(|x| x.clamp(-xi, xi)).collect()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn l2_prox_frozen_cases() {
        let mut v = [3.0, 4.0];
        prox_l2_row(&mut v, 2.0);
        assert_eq!(v, [1.8, 2.4]);

        let mut v = [3.0, 4.0];
        prox_l2_row(&mut v, 5.0);
        assert_eq!(v.map(f64::to_bits), [0u64, 0u64]);

        let mut v = [3.0, -4.0];
        prox_l2_row(&mut v, 0.0);
        assert_eq!(v, [3.0, -4.0]);
    }

    #[test]
    fn linf_prox_frozen_cases() {
        let mut r = rng();

        let mut v = [3.0, 1.0];
        prox_linf_row(&mut v, 1.0, &mut r);
        assert_eq!(v, [2.0, 1.0]);

        let mut v = [3.0, 3.0, 1.0];
        prox_linf_row(&mut v, 2.0, &mut r);
        assert_eq!(v, [2.0, 2.0, 1.0]);

        let mut v = [-3.0, 1.0];
        prox_linf_row(&mut v, 1.0, &mut r);
        assert_eq!(v, [-2.0, 1.0]);

        let mut v = [3.0, 4.0];
        prox_linf_row(&mut v, 2.0, &mut r);
        assert_eq!(v, [2.5, 2.5]);

        // Total mass removable: exact positive zeros.
        let mut v = [0.5, -0.25, 0.25];
        prox_linf_row(&mut v, 1.0, &mut r);
        assert_eq!(v.map(f64::to_bits), [0u64, 0, 0]);

        let mut v = [3.0, 1.0];
        prox_linf_row(&mut v, 0.0, &mut r);
        assert_eq!(v, [3.0, 1.0]);

        let mut v: [f64; 0] = [];
        prox_linf_row(&mut v, 1.0, &mut r);
    }

    #[test]
    fn l1_ball_projection_frozen_cases() {
        assert_eq!(project_l1_ball(&[0.5, 0.2], 1.0), vec![0.5, 0.2]);
        assert_eq!(project_l1_ball(&[3.0, 1.0], 1.0), vec![1.0, 0.0]);
        let zeroed = project_l1_ball(&[3.0, -1.0], 0.0);
        assert_eq!(zeroed.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), vec![0u64, 0]);
    }

    #[test]
    fn l1_prox_frozen_cases() {
        let mut v = [3.0, -1.0];
        prox_l1(&mut v, 1.0);
        assert_eq!(v, [2.0, 0.0]);
        assert_eq!(v[1].to_bits(), 0);

        let mut v = [3.0, -1.0];
        prox_l1(&mut v, 0.0);
        assert_eq!(v, [3.0, -1.0]);

        let mut v = [0.5, -0.5];
        prox_l1(&mut v, 0.5);
        assert_eq!(v.map(f64::to_bits), [0u64, 0]);
    }

    #[test]
    fn group_norm_frozen_cases() {
        let row: &[f64] = &[3.0, 4.0, 0.0];
        assert_eq!(group_norm_l21([row]), 5.0);
        assert_eq!(group_norm_l21([&[0.0, 0.0][..]]), 0.0);
        assert_eq!(group_norm_l21([&[1.0, 0.0][..], &[0.0, 1.0][..]]), 2.0);

        assert_eq!(group_norm_linf1([&[3.0, -4.0, 0.0][..]]), 4.0);
        assert_eq!(group_norm_linf1([&[0.0, 0.0][..]]), 0.0);
        assert_eq!(group_norm_linf1([&[1.0, 2.0][..], &[-5.0, 0.0][..]]), 7.0);
    }

    #[test]
    fn linf_prox_matches_sorted_reference() {
        let mut r = rng();
        for case in 0..20_000 {
            let len = 1 + case % 50;
            let v: Vec<f64> = (0..len).map(|_| r.gen_range(-10.0..10.0)).collect();
            let l1: f64 = v.iter().map(|x| x.abs()).sum();
            let delta = r.gen_range(0.0..1.5 * l1.max(1e-12));
            let expected = prox_linf_sorted(&v, delta);
            let mut got = v.clone();
            prox_linf_row(&mut got, delta, &mut r);
            for (g, e) in got.iter().zip(&expected) {
                assert!(
                    (g - e).abs() <= 1e-12,
                    "case {case}: {g} vs {e} (len {len}, delta {delta})"
                );
            }
        }
    }

    #[test]
    fn linf_prox_certificates() {
        let mut r = rng();
        for _ in 0..5_000 {
            let len = 1 + r.gen_range(0..30);
            let v: Vec<f64> = (0..len).map(|_| r.gen_range(-5.0..5.0)).collect();
            let l1: f64 = v.iter().map(|x| x.abs()).sum();
            let delta = r.gen_range(0.0..1.5 * l1.max(1e-12));
            let mut w = v.clone();
            prox_linf_row(&mut w, delta, &mut r);

            let removed: f64 = v
                .iter()
                .zip(&w)
                .map(|(a, b)| a.abs() - b.abs())
                .sum();
            assert!((removed - delta.min(l1)).abs() <= 1e-10);

            let max_w = max_abs(&w);
            for (a, b) in v.iter().zip(&w) {
                assert!(b.abs() <= a.abs());
                assert!(*b == 0.0 || b.signum() == a.signum());
                if a.abs() < max_w {
                    assert_eq!(a.to_bits(), b.to_bits(), "sub-threshold entry changed");
                }
            }
        }
    }

    #[test]
    fn apply_prox_identity_paths_consume_no_rng() {
        let mut params = init_params(3, 7, 2, 4, 3, 11).unwrap();
        let reference = params.clone();

        let mut r1 = rng();
        let r_untouched = rng();
        apply_prox(&mut params, &RegularizerSpec::none(), 0.1, &mut r1);
        assert_eq!(params, reference);

        let zero_lambda = RegularizerSpec::new(RegularizerKind::Linf1, 0.0).unwrap();
        apply_prox(&mut params, &zero_lambda, 0.1, &mut r1);
        assert_eq!(params, reference);

        // Identity paths left the RNG stream untouched.
        assert_eq!(r1.get_word_pos(), r_untouched.get_word_pos());
    }

    #[test]
    fn apply_prox_zeroes_small_groups_exactly() {
        let mut params = init_params(3, 7, 2, 4, 3, 11).unwrap();
        // Shrink unit 2's incoming group so its l1 mass is below delta.
        for block in params.hidden1.iter_mut() {
            for x in block.row_mut(2).iter_mut() {
                *x *= 1e-6;
            }
        }
        params.bias1[2] = 1e-9;
        let spec = RegularizerSpec::new(RegularizerKind::Linf1, 1.0).unwrap();
        let mut r = rng();
        apply_prox(&mut params, &spec, 0.05, &mut r);
        for block in &params.hidden1 {
            for x in block.row(2).iter() {
                assert_eq!(x.to_bits(), 0);
            }
        }
        assert_eq!(params.bias1[2].to_bits(), 0);
    }

    #[test]
    fn apply_prox_leaves_embeddings_and_output_alone() {
        let mut params = init_params(3, 7, 2, 4, 3, 11).unwrap();
        let reference = params.clone();
        let mut r = rng();
        for kind in [RegularizerKind::L1, RegularizerKind::L21, RegularizerKind::Linf1] {
            let spec = RegularizerSpec::new(kind, 10.0).unwrap();
            apply_prox(&mut params, &spec, 1.0, &mut r);
            assert_eq!(params.embed, reference.embed);
            assert_eq!(params.output, reference.output);
            assert_eq!(params.output_bias, reference.output_bias);
        }
        // Everything regularized got crushed to zero at this strength.
        assert_eq!(regularizer_value(&params, RegularizerKind::L1), 0.0);
    }

    #[test]
    fn regularizer_value_matches_hand_computation() {
        let mut params = init_params(2, 5, 2, 2, 1, 3).unwrap();
        params.hidden1[0]
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&[3.0, 4.0, 0.0, 0.0]);
        params.bias1[0] = 0.0;
        params.bias1[1] = 2.0;
        params.hidden2.as_slice_mut().unwrap().copy_from_slice(&[1.0, -2.0]);
        params.bias2[0] = 0.5;
        assert_eq!(regularizer_value(&params, RegularizerKind::None), 0.0);
        assert_eq!(regularizer_value(&params, RegularizerKind::L1), 12.5);
        assert_eq!(
            regularizer_value(&params, RegularizerKind::L21),
            5.0 + 2.0 + 5.25f64.sqrt()
        );
        assert_eq!(regularizer_value(&params, RegularizerKind::Linf1), 4.0 + 2.0 + 2.0);
    }

    #[test]
    fn spec_validation() {
        assert!(RegularizerSpec::new(RegularizerKind::L21, -1.0).is_err());
        assert!(RegularizerSpec::new(RegularizerKind::L21, f64::NAN).is_err());
        assert!("l21".parse::<RegularizerKind>().is_ok());
        assert!("bogus".parse::<RegularizerKind>().is_err());
        assert_eq!(RegularizerKind::Linf1.to_string(), "linf1");
    }

    fn vec_and_delta() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (
            proptest::collection::vec(-10.0f64..10.0, 0..50),
            0.0f64..1.5,
        )
            .prop_map(|(v, frac)| {
                let l1: f64 = v.iter().map(|x| x.abs()).sum();
                let delta = frac * l1.max(1e-9);
                (v, delta)
            })
    }

    proptest! {
        #[test]
        fn moreau_decomposition((v, delta) in vec_and_delta()) {
            let mut prox = v.clone();
            let mut r = rng();
            prox_linf_row(&mut prox, delta, &mut r);
            let proj = project_l1_ball(&v, delta);
            for i in 0..v.len() {
                prop_assert!((v[i] - (prox[i] + proj[i])).abs() <= 1e-12);
            }
        }

        #[test]
        fn row_proxes_are_non_expansive(
            (u, delta) in vec_and_delta(),
            shift in proptest::collection::vec(-3.0f64..3.0, 0..50),
        ) {
            let v: Vec<f64> = u
                .iter()
                .zip(shift.iter().chain(std::iter::repeat(&0.0)))
                .map(|(a, b)| a + b)
                .collect();
            let dist: f64 = l2_norm(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());

            let mut r = rng();
            for use_linf in [false, true] {
                let (mut pu, mut pv) = (u.clone(), v.clone());
                if use_linf {
                    prox_linf_row(&mut pu, delta, &mut r);
                    prox_linf_row(&mut pv, delta, &mut r);
                } else {
                    prox_l2_row(&mut pu, delta);
                    prox_l2_row(&mut pv, delta);
                }
                let out: f64 =
                    l2_norm(&pu.iter().zip(&pv).map(|(a, b)| a - b).collect::<Vec<_>>());
                prop_assert!(out <= dist * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn l2_prox_certificates((v, delta) in vec_and_delta()) {
            let mut w = v.clone();
            prox_l2_row(&mut w, delta);
            let norm_v = l2_norm(&v);
            let norm_w = l2_norm(&w);
            prop_assert!((norm_w - (norm_v - delta).max(0.0)).abs() <= 1e-12 * norm_v.max(1.0));
            // Collinearity: cross products vanish.
            for i in 0..v.len() {
                for j in (i + 1)..v.len() {
                    prop_assert!((w[i] * v[j] - w[j] * v[i]).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn projection_lands_inside_ball((v, radius) in vec_and_delta()) {
            let p = project_l1_ball(&v, radius);
            let l1: f64 = p.iter().map(|x| x.abs()).sum();
            prop_assert!(l1 <= radius * (1.0 + 1e-12) + 1e-12);
        }
    }
}
