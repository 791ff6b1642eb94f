use std::collections::HashMap;

use statrs::function::gamma::gamma_ur;

use super::MetricsError;

/// 1 − sup_x |F_real(x) − F_synth(x)| over the two empirical CDFs.
pub fn ks_complement(real: &[f64], synth: &[f64]) -> Result<f64, MetricsError> {
    if real.is_empty() || synth.is_empty() {
        return Err(MetricsError::EmptyColumn);
    }
    let sorted = |xs: &[f64]| {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(real), sorted(synth));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(1.0 - d)
}

fn counts(values: &[u32], n_categories: usize) -> Vec<f64> {
    let mut c = vec![0.0; n_categories];
    for &v in values {
        c[v as usize] += 1.0;
    }
    c
}

/// Pearson statistic of synthetic counts against expectations from the real
/// proportions, over categories the real column contains. Returns (statistic, dof).
pub fn chi_square_statistic(real: &[u32], synth: &[u32], n_categories: usize) -> (f64, usize) {
    let r = counts(real, n_categories);
    let s = counts(synth, n_categories);
    let (nr, ns) = (real.len() as f64, synth.len() as f64);
    let mut stat = 0.0;
    let mut used = 0usize;
    for (rc, sc) in r.iter().zip(&s) {
        if *rc == 0.0 {
            continue;
        }
        let expected = rc * ns / nr;
        stat += (sc - expected).powi(2) / expected;
        used += 1;
    }
    (stat, used.saturating_sub(1))
}

/// Chi-square test p-value of the synthetic category counts given the real
/// proportions. Category codes must be below `n_categories`.
pub fn cs_pvalue(real: &[u32], synth: &[u32], n_categories: usize) -> Result<f64, MetricsError> {
    if real.is_empty() || synth.is_empty() {
        return Err(MetricsError::EmptyColumn);
    }
    let (stat, dof) = chi_square_statistic(real, synth, n_categories);
    if dof == 0 {
        log::warn!("chi-square test on a single observed category; p = 1");
        return Ok(1.0);
    }
    if stat == 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(dof as f64 / 2.0, stat / 2.0).clamp(0.0, 1.0))
}

/// ½ Σ_v |p̂_real(v) − p̂_synth(v)|, accumulated on integer counts so identical
/// and disjoint inputs give exactly 0 and 1.
pub fn marginal_tvd(real: &[u32], synth: &[u32]) -> Result<f64, MetricsError> {
    if real.is_empty() || synth.is_empty() {
        return Err(MetricsError::EmptyColumn);
    }
    let mut counts: HashMap<u32, (u128, u128)> = HashMap::new();
    for &v in real {
        counts.entry(v).or_default().0 += 1;
    }
    for &v in synth {
        counts.entry(v).or_default().1 += 1;
    }
    let (nr, ns) = (real.len() as u128, synth.len() as u128);
    let total: u128 = counts.values().map(|&(r, s)| (r * ns).abs_diff(s * nr)).sum();
    Ok(total as f64 / (2 * nr * ns) as f64)
}

/// Area under the ROC curve with tied scores counted as one half.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    assert_eq!(labels.len(), scores.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let avg_rank = (start + end + 1) as f64 / 2.0;
        rank_sum += avg_rank * idx[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}
