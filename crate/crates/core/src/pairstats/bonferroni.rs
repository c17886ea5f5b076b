/// Bonferroni adjustment over one family of `m = p_values.len()` tests.
///
/// Returns `(min(1, p·m), adjusted < alpha)` for each input, in input order.
pub fn bonferroni_adjust(p_values: &[f64], alpha: f64) -> Vec<(f64, bool)> {
    let m = p_values.len() as f64;
    p_values
        .iter()
        .map(|&p| {
            let adjusted = (p * m).min(1.0);
            (adjusted, adjusted < alpha)
        })
        .collect()
}
