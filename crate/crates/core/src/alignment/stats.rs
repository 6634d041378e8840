use super::AlignmentError;

/// `m_i = 10^(log10(0.5) + (i−1)/(M−1)·log10(4))`, written as `0.5·4^((i−1)/(M−1))`
/// so both endpoints are exact.
pub fn multipliers(m: usize) -> Result<Vec<f64>, AlignmentError> {
    if m < 2 {
        return Err(AlignmentError::TooFewMultipliers(m));
    }
    Ok((0..m)
        .map(|i| 0.5 * 4f64.powf(i as f64 / (m - 1) as f64))
        .collect())
}

/// 1-based ranks, ties sharing the mean of the positions they occupy.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let r = (start + 1 + end) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation; `None` when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's r_s: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, AlignmentError> {
    if a.len() != b.len() {
        return Err(AlignmentError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(AlignmentError::TooShort(a.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AlignmentError::InvalidArgument("non-finite input".into()));
    }
    let distinct = |v: &[f64]| v.iter().any(|&x| x != v[0]);
    if !distinct(a) {
        return Err(AlignmentError::Degenerate(
            "first input has a single distinct value".into(),
        ));
    }
    if !distinct(b) {
        return Err(AlignmentError::Degenerate(
            "second input has a single distinct value".into(),
        ));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)).expect("non-constant ranks"))
}
