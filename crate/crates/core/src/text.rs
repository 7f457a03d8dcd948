//! Number and list formatting shared by the environments.

/// Fixed-point formatting that never prints a negative zero.
pub fn num(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_owned()
    } else {
        s
    }
}

/// Whole numbers without a fractional part, otherwise three decimals.
pub fn reward(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        num(x, 0)
    } else {
        num(x, 3)
    }
}

pub fn point(xs: &[f64], decimals: usize) -> String {
    let parts: Vec<String> = xs.iter().map(|x| num(*x, decimals)).collect();
    format!("[{}]", parts.join(", "))
}

/// "a", "a and b", "a, b and c".
pub fn join_list<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_owned(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{} and {}", head.join(", "), last.as_ref())
        }
    }
}

/// Every decimal number in `s`, in order.
pub fn numbers(s: &str) -> Vec<f64> {
    use std::sync::OnceLock;
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        regex::Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?(?i:inf(?:inity)?|nan)").unwrap()
    });
    re.find_iter(s).filter_map(|m| m.as_str().parse().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(num(-0.0001, 2), "0.00");
        assert_eq!(num(-1.234, 2), "-1.23");
        assert_eq!(reward(1.0), "1");
        assert_eq!(reward(0.25), "0.250");
        assert_eq!(point(&[1.0, -2.5], 2), "[1.00, -2.50]");
        assert_eq!(join_list(&["a", "b", "c"]), "a, b and c");
        assert_eq!(join_list(&["a"]), "a");
    }

    #[test]
    fn number_scan() {
        assert_eq!(numbers("x = [1.5, -2], 3e2"), vec![1.5, -2.0, 300.0]);
        assert_eq!(numbers("throttle=.5, steering=-0.1"), vec![0.5, -0.1]);
        assert!(numbers("nan, 1").first().unwrap().is_nan());
    }
}
