//! Unit-suffixed CLI value parsing. Physical quantities must carry an
//! explicit suffix (15km, 0.1us, 10ohm); bare numbers are rejected as
//! ambiguous.

fn parse_with(s: &str, table: &[(&str, f64)], kind: &str) -> Result<f64, String> {
    let lower = s.trim().to_ascii_lowercase();
    // Longest suffix first so "kohm" wins over "ohm".
    let mut best: Option<(&str, f64)> = None;
    for &(suffix, scale) in table {
        if lower.ends_with(suffix) {
            match best {
                Some((prev, _)) if prev.len() >= suffix.len() => {}
                _ => best = Some((suffix, scale)),
            }
        }
    }
    let (suffix, scale) = best.ok_or_else(|| {
        format!(
            "`{s}` has no {kind} unit suffix (expected one of: {})",
            table.iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
        )
    })?;
    let number = lower[..lower.len() - suffix.len()].trim();
    if number.is_empty() {
        return Err(format!("`{s}` has a unit but no value"));
    }
    let value: f64 = number
        .parse()
        .map_err(|e| format!("`{s}`: bad number `{number}`: {e}"))?;
    Ok(value * scale)
}

pub fn parse_length(s: &str) -> Result<f64, String> {
    parse_with(s, &[("km", 1e3), ("cm", 1e-2), ("mm", 1e-3), ("m", 1.0)], "length")
}

pub fn parse_time(s: &str) -> Result<f64, String> {
    parse_with(s, &[("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9), ("s", 1.0)], "time")
}

pub fn parse_voltage(s: &str) -> Result<f64, String> {
    parse_with(s, &[("kv", 1e3), ("v", 1.0)], "voltage")
}

pub fn parse_resistance(s: &str) -> Result<f64, String> {
    parse_with(s, &[("kohm", 1e3), ("mohm", 1e6), ("ohm", 1.0)], "resistance")
}

pub fn parse_frequency(s: &str) -> Result<f64, String> {
    parse_with(s, &[("khz", 1e3), ("mhz", 1e6), ("hz", 1.0)], "frequency")
}

pub fn parse_angle_deg(s: &str) -> Result<f64, String> {
    let lower = s.trim().to_ascii_lowercase();
    if let Some(num) = lower.strip_suffix("deg") {
        num.trim().parse().map_err(|e| format!("`{s}`: {e}"))
    } else if let Some(num) = lower.strip_suffix("rad") {
        num.trim()
            .parse::<f64>()
            .map(f64::to_degrees)
            .map_err(|e| format!("`{s}`: {e}"))
    } else {
        Err(format!("`{s}` has no angle unit suffix (expected deg or rad)"))
    }
}
