//! Finite-difference verification of tape gradients.

use super::{NumericsError, Tape, Tensor};

/// Outcome of a [`gradient_check`] run.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest relative error over all checked coordinates.
    pub max_rel_err: f64,
    /// Flat index (input-major) where the maximum occurred.
    pub worst_index: usize,
    /// Analytic gradient at the worst coordinate.
    pub analytic: f64,
    /// Central-difference estimate at the worst coordinate.
    pub numeric: f64,
    /// Number of coordinates compared.
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Checks the tape gradient of a scalar function against central
/// differences with step `h`. `f` rebuilds the computation from scratch for
/// each perturbed input and returns the scalar output node together with the
/// leaf nodes corresponding to `inputs` (in order).
///
/// The relative error at a coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`, so agreement on tiny gradients is not
/// penalized by the division.
pub fn gradient_check<F>(
    inputs: &[Vec<f64>],
    shapes: &[Vec<usize>],
    h: f64,
    f: F,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&mut Tape, &[Vec<f64>]) -> Result<(Tensor, Vec<Tensor>), NumericsError>,
{
    gradient_check_with(inputs, shapes, h, 0.0, f)
}

/// [`gradient_check`] with an absolute agreement cutoff: coordinates where
/// `|a - n| <= abs_tol` count as exact matches. Large compositions need this
/// because the difference quotient carries rounding noise of order
/// `eps * |loss| / h`, which can exceed the relative-error floor on
/// coordinates whose true gradient is essentially zero.
pub fn gradient_check_with<F>(
    inputs: &[Vec<f64>],
    shapes: &[Vec<usize>],
    h: f64,
    abs_tol: f64,
    mut f: F,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&mut Tape, &[Vec<f64>]) -> Result<(Tensor, Vec<Tensor>), NumericsError>,
{
    assert_eq!(inputs.len(), shapes.len());
    for (x, s) in inputs.iter().zip(shapes) {
        assert_eq!(x.len(), s.iter().product::<usize>());
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let (loss, leaves) = f(&mut tape, inputs)?;
    assert_eq!(leaves.len(), inputs.len(), "leaf count mismatch");
    if !tape.value(loss)[0].is_finite() {
        return Err(NumericsError::NonFinite("gradient_check loss"));
    }
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaves.iter().map(|&l| tape.grad(l).to_vec()).collect();

    let eval = |f: &mut F, xs: &[Vec<f64>]| -> Result<f64, NumericsError> {
        let mut t = Tape::new();
        let (out, _) = f(&mut t, xs)?;
        let v = t.value(out)[0];
        if !v.is_finite() {
            return Err(NumericsError::NonFinite("gradient_check perturbed loss"));
        }
        Ok(v)
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut flat = 0usize;
    let mut xs: Vec<Vec<f64>> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        for ci in 0..input.len() {
            let orig = xs[ti][ci];
            xs[ti][ci] = orig + h;
            let fp = eval(&mut f, &xs)?;
            xs[ti][ci] = orig - h;
            let fm = eval(&mut f, &xs)?;
            xs[ti][ci] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[ti][ci];
            if !a.is_finite() || !numeric.is_finite() {
                return Err(NumericsError::NonFinite("gradient_check comparison"));
            }
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = if (a - numeric).abs() <= abs_tol { 0.0 } else { (a - numeric).abs() / denom };
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_index = flat;
                report.analytic = a;
                report.numeric = numeric;
            }
            report.checked += 1;
            flat += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    #[test]
    fn checks_a_small_network_end_to_end() {
        // x @ W1 + b1 -> relu -> layer_norm -> @ W2 -> cross entropy.
        let mut rng = Prng::new(11);
        let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let w1: Vec<f64> = (0..12).map(|_| rng.normal() * 0.5).collect();
        let b1: Vec<f64> = (0..4).map(|_| rng.normal() * 0.1).collect();
        let g: Vec<f64> = (0..4).map(|_| 1.0 + rng.normal() * 0.1).collect();
        let w2: Vec<f64> = (0..20).map(|_| rng.normal() * 0.5).collect();
        let inputs = vec![x, w1, b1, g, w2];
        let shapes = vec![
            vec![2, 3],
            vec![3, 4],
            vec![4],
            vec![4],
            vec![4, 5],
        ];
        let report = gradient_check(&inputs, &shapes, 1e-5, |t, xs| {
            let x = t.param(&xs[0], &[2, 3]);
            let w1 = t.param(&xs[1], &[3, 4]);
            let b1 = t.param(&xs[2], &[4]);
            let g = t.param(&xs[3], &[4]);
            let w2 = t.param(&xs[4], &[4, 5]);
            let zero = t.constant(vec![0.0; 4], &[4]);
            let h = t.matmul(x, w1)?;
            let h = t.add_bias(h, b1);
            let h = t.relu(h);
            let h = t.layer_norm(h, g, zero, 1e-6);
            let logits = t.matmul(h, w2)?;
            let loss = t.cross_entropy(logits, &[3, 1], 0.1, 0)?;
            Ok((loss, vec![x, w1, b1, g, w2]))
        })
        .unwrap();
        assert_eq!(report.checked, 6 + 12 + 4 + 4 + 20);
        assert!(
            report.passes(1e-4),
            "max rel err {} at {} (analytic {}, numeric {})",
            report.max_rel_err,
            report.worst_index,
            report.analytic,
            report.numeric
        );
    }

    #[test]
    fn checks_softmax_and_elementwise_paths() {
        let mut rng = Prng::new(23);
        let a: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let inputs = vec![a, b];
        let shapes = vec![vec![2, 4], vec![2, 4]];
        let report = gradient_check(&inputs, &shapes, 1e-5, |t, xs| {
            let a = t.param(&xs[0], &[2, 4]);
            let b = t.param(&xs[1], &[2, 4]);
            let sm = t.softmax_rows(a);
            let prod = t.mul(sm, b);
            let sum_ab = t.add(prod, b);
            let scaled = t.scale(sum_ab, 0.5);
            let nt = t.matmul_nt(scaled, a)?;
            Ok((t.sum(nt), vec![a, b]))
        })
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn checks_embedding_gather() {
        let mut rng = Prng::new(7);
        let table: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let report = gradient_check(&[table], &[vec![4, 3]], 1e-5, |t, xs| {
            let table = t.param(&xs[0], &[4, 3]);
            let e = t.embed(table, &[2, 0, 2, 3]);
            let sq = t.mul(e, e);
            Ok((t.sum(sq), vec![table]))
        })
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err);
    }
}
