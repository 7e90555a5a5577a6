//! File formats, reports and command-line plumbing around `tinyfl-core`.

pub mod bench_report;
pub mod params_file;
pub mod sim_report;

/// Parses a non-negative count written as digits, `a^b` or `aeb`
/// (`1000`, `10^9`, `1e9`).
pub fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    if let Some((base, exp)) = s.split_once('^') {
        let base: u64 = base.trim().parse().ok()?;
        let exp: u32 = exp.trim().parse().ok()?;
        return base.checked_pow(exp);
    }
    if let Some((mantissa, exp)) = s.split_once(['e', 'E']) {
        let m: u64 = mantissa.parse().ok()?;
        let exp: u32 = exp.parse().ok()?;
        return m.checked_mul(10u64.checked_pow(exp)?);
    }
    s.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::parse_count;

    #[test]
    fn count_notations() {
        assert_eq!(parse_count("64"), Some(64));
        assert_eq!(parse_count("10^9"), Some(1_000_000_000));
        assert_eq!(parse_count("2^64"), None);
        assert_eq!(parse_count("2^63"), Some(1 << 63));
        assert_eq!(parse_count("5e3"), Some(5000));
        assert_eq!(parse_count("1_000"), Some(1000));
        assert_eq!(parse_count("-1"), None);
        assert_eq!(parse_count("x"), None);
    }
}
