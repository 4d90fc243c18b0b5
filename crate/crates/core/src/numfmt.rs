//! Fixed-precision float formatting for text outputs.

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

/// Shortest decimal text of `v` rounded to 9 significant digits.
pub fn sig9(v: f64) -> String {
    let r = round_sig(v, 9);
    if r.is_finite() && r != 0.0 && (r.abs() < 1e-6 || r.abs() >= 1e15) {
        // avoid long runs of zeros for tiny/huge values
        let s = format!("{r:e}");
        return s;
    }
    format!("{r}")
}

pub(crate) fn ser_sig9_array<S: serde::Serializer>(v: &[f64; 3], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(3)?;
    for x in v {
        t.serialize_element(&round_sig(*x, 9))?;
    }
    t.end()
}
