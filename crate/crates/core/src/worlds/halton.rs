/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Halton points in bases 2 and 3 for indices `start, start + 1, ...`.
pub fn halton_2d(start: u64, n: usize) -> Vec<[f64; 2]> {
    (0..n as u64)
        .map(|k| [radical_inverse(start + k, 2), radical_inverse(start + k, 3)])
        .collect()
}
