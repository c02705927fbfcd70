use crate::linalg::Matrix;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        row.iter_mut().for_each(|x| *x /= sum);
    }
    out
}

/// Mean over rows of `−log softmax(logits)[label]`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> f64 {
    assert_eq!(logits.rows(), labels.len(), "one label per row");
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            let row = logits.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .sum();
    total / labels.len() as f64
}

/// `∂ mean CE / ∂ logits = (softmax − one_hot) / B`.
pub(crate) fn cross_entropy_grad(logits: &Matrix, labels: &[usize]) -> Matrix {
    let mut g = softmax_rows(logits);
    let inv = 1.0 / labels.len() as f64;
    for (r, &y) in labels.iter().enumerate() {
        let row = g.row_mut(r);
        row[y] -= 1.0;
        row.iter_mut().for_each(|x| *x *= inv);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let uniform = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!((cross_entropy(&uniform, &[0]) - std::f64::consts::LN_2).abs() < 1e-15);
        let saturated = Matrix::from_rows(&[[100.0, 0.0]]).unwrap();
        assert!(cross_entropy(&saturated, &[0]) < 1e-40);
        let m = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let softplus1 = (1.0 + 1f64.exp()).ln();
        assert!((cross_entropy(&m, &[0]) - softplus1).abs() < 1e-15);
        assert!((softplus1 - 1.3133).abs() < 1e-4);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Matrix::from_rows(&[[1000.0, -1000.0, 3.0], [0.1, 0.2, 0.3]]).unwrap();
        let s = softmax_rows(&m);
        for r in 0..2 {
            assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
