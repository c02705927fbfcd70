use crate::error::{Error, Result};

/// One non-zero entry of the tensor-product B-spline basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplineTerm {
    /// Flattened kernel index; dimension 0 has stride 1.
    pub index: usize,
    pub value: f64,
}

/// Degree-1 open B-spline basis of `u ∈ [0,1]³` over `kernel_size` knots per
/// dimension. Zero-valued products are omitted, so at most 8 terms remain;
/// values sum to 1.
pub fn spline_basis(u: [f64; 3], kernel_size: usize, degree: usize) -> Result<Vec<SplineTerm>> {
    if degree != 1 {
        return Err(Error::InvalidArgument(format!(
            "spline degree {degree} is not supported"
        )));
    }
    let mut terms = Vec::with_capacity(8);
    for_each_term(u, kernel_size, |t| terms.push(t))?;
    Ok(terms)
}

/// Degree-1 basis terms of `u` passed to `f` in corner order, without allocating.
pub(crate) fn for_each_term(u: [f64; 3], kernel_size: usize, mut f: impl FnMut(SplineTerm)) -> Result<()> {
    if kernel_size < 2 {
        return Err(Error::InvalidArgument("kernel_size must be ≥ 2".into()));
    }
    if !u.iter().all(|&x| (0.0..=1.0).contains(&x)) {
        return Err(Error::PseudoCoordinate(u));
    }
    let mut lower = [0usize; 3];
    let mut frac = [0.0; 3];
    for d in 0..3 {
        let pos = u[d] * (kernel_size - 1) as f64;
        let i = (pos.floor() as usize).min(kernel_size - 2);
        lower[d] = i;
        frac[d] = pos - i as f64;
    }
    for corner in 0..8usize {
        let mut value = 1.0;
        let mut index = 0;
        let mut stride = 1;
        for d in 0..3 {
            let upper = (corner >> d) & 1 == 1;
            value *= if upper { frac[d] } else { 1.0 - frac[d] };
            index += (lower[d] + usize::from(upper)) * stride;
            stride *= kernel_size;
        }
        if value != 0.0 {
            f(SplineTerm { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knot_aligned_corners() {
        assert_eq!(
            spline_basis([0.0; 3], 5, 1).unwrap(),
            vec![SplineTerm { index: 0, value: 1.0 }]
        );
        assert_eq!(
            spline_basis([1.0; 3], 5, 1).unwrap(),
            vec![SplineTerm { index: 124, value: 1.0 }]
        );
    }

    #[test]
    fn midpoint_in_first_dimension() {
        let t = spline_basis([0.125, 0.0, 0.0], 5, 1).unwrap();
        assert_eq!(
            t,
            vec![
                SplineTerm { index: 0, value: 0.5 },
                SplineTerm { index: 1, value: 0.5 }
            ]
        );
    }

    #[test]
    fn strides() {
        // u = 0.25 is knot 1 in each dimension
        let t = spline_basis([0.0, 0.25, 0.5], 5, 1).unwrap();
        assert_eq!(t, vec![SplineTerm { index: 5 + 2 * 25, value: 1.0 }]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(spline_basis([1.1, 0.0, 0.0], 5, 1).is_err());
        assert!(spline_basis([f64::NAN, 0.0, 0.0], 5, 1).is_err());
        assert!(spline_basis([0.5; 3], 5, 2).is_err());
    }
}
