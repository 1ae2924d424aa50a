//! Number formatting shared by the text and CSV outputs.

/// Formats `x` with 9 significant digits, `%g` style: fixed notation for
/// decimal exponents in `[-5, 9)`, scientific otherwise, trailing zeros
/// removed. Infinities print as `inf`.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Joins integers with `;` so a vector fits in one CSV cell.
pub fn join_u64(values: &[u64]) -> String {
    values.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub fn join_f64(values: &[f64]) -> String {
    values.iter().map(|&v| sig9(v)).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(sig9(250.0), "250");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(123456.789012), "123456.789");
        assert_eq!(sig9(2.4157304831192494e-11), "2.41573048e-11");
        assert_eq!(sig9(1.5e12), "1.5e12");
        assert_eq!(sig9(-0.125), "-0.125");
        assert_eq!(sig9(f64::INFINITY), "inf");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(99999999.96), "100000000");
        assert_eq!(sig9(999999999.6), "1e9");
    }

    #[test]
    fn joins() {
        assert_eq!(join_u64(&[11, 5]), "11;5");
        assert_eq!(join_f64(&[0.0, 49.5]), "0;49.5");
    }
}
