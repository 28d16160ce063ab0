use crate::scalar::Scalar;

/// Euclidean projection onto the probability simplex `{y >= 0, 1^T y = 1}`.
///
/// Sort-based threshold search; the rounding residual of the sum is folded
/// into the largest entry so the output sums to one to machine precision.
pub fn simplex_project<T: Scalar>(x: &[T]) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - T::one()) / T::from_usize_lossy(j + 1);
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    let mut y: Vec<T> = x.iter().map(|&v| (v - theta).max(T::zero())).collect();
    let sum: T = y.iter().copied().sum();
    let (imax, _) = y
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    y[imax] += T::one() - sum;
    y
}
