use num_complex::Complex64;

/// Current-saturation limiter: scales the reference down to `i_max` when it
/// exceeds the limit, keeping its angle. Returns the limited current and
/// whether the limit was binding.
pub fn csa_limit(i_ref: Complex64, i_max: f64) -> (Complex64, bool) {
    let mag = i_ref.norm();
    if mag <= i_max {
        (i_ref, false)
    } else {
        (i_ref * (i_max / mag), true)
    }
}
