//! Inline symbol specs such as `ar1:rho=0.5` or `lines:(0.7854,1),(1.2,0.5)`.

use anyhow::{anyhow, bail, Context, Result};
use pdapprox::model::{Symbol, SymbolFamily};

pub fn parse(spec: &str) -> Result<Symbol> {
    let spec = spec.trim();
    let (family, rest) = match spec.split_once(':') {
        Some((f, r)) => (f.trim(), r.trim()),
        None => (spec, ""),
    };
    let symbol = match family.to_ascii_lowercase().as_str() {
        "white" => {
            let kv = key_values(rest, &["scale"])?;
            Symbol::new(SymbolFamily::White, scale_of(&kv)?)?
        }
        "bandlimited" | "band-limited" | "bl" => {
            let kv = key_values(rest, &["w", "scale"])?;
            let w = required(&kv, "w", family)?;
            Symbol::new(SymbolFamily::BandLimited { half_bandwidth: w }, scale_of(&kv)?)?
        }
        "ar1" => {
            let kv = key_values(rest, &["rho", "scale"])?;
            let rho = required(&kv, "rho", family)?;
            Symbol::new(SymbolFamily::Ar1 { rho }, scale_of(&kv)?)?
        }
        "lines" => Symbol::lines(&parse_lines(rest)?)?,
        other => bail!("--symbol: unknown family {other:?} (expected white, bandlimited, ar1 or lines)"),
    };
    Ok(symbol)
}

fn key_values(rest: &str, allowed: &[&str]) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("--symbol: expected key=value, found {part:?}"))?;
        let k = k.trim().to_ascii_lowercase();
        if !allowed.contains(&k.as_str()) {
            bail!("--symbol: unknown parameter {k:?} (allowed: {})", allowed.join(", "));
        }
        let v: f64 = v
            .trim()
            .parse()
            .with_context(|| format!("--symbol.{k}: not a number: {v:?}"))?;
        out.push((k, v));
    }
    Ok(out)
}

fn required(kv: &[(String, f64)], key: &str, family: &str) -> Result<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| anyhow!("--symbol: {family} needs {key}=<value>"))
}

fn scale_of(kv: &[(String, f64)]) -> Result<f64> {
    Ok(kv.iter().find(|(k, _)| k == "scale").map_or(1.0, |(_, v)| *v))
}

fn parse_lines(rest: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = Vec::new();
    let mut s = rest.trim();
    while !s.is_empty() {
        s = s.trim_start_matches([',', ';', ' ']);
        if s.is_empty() {
            break;
        }
        let body = s
            .strip_prefix('(')
            .ok_or_else(|| anyhow!("--symbol: lines must look like (theta,power), found {s:?}"))?;
        let close = body
            .find(')')
            .ok_or_else(|| anyhow!("--symbol: unclosed parenthesis in {rest:?}"))?;
        let (theta, power) = body[..close]
            .split_once(',')
            .ok_or_else(|| anyhow!("--symbol: line {:?} needs theta,power", &body[..close]))?;
        let theta: f64 = theta.trim().parse().with_context(|| format!("--symbol: bad frequency {theta:?}"))?;
        let power: f64 = power.trim().parse().with_context(|| format!("--symbol: bad power {power:?}"))?;
        lines.push((theta, power));
        s = &body[close + 1..];
    }
    if lines.is_empty() {
        bail!("--symbol: lines needs at least one (theta,power) pair");
    }
    Ok(lines)
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // literals mirror command-line input
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        assert!(matches!(parse("white").unwrap().family(), SymbolFamily::White));
        match parse("bandlimited:W=0.7854").unwrap().family() {
            SymbolFamily::BandLimited { half_bandwidth } => assert_eq!(*half_bandwidth, 0.7854),
            f => panic!("{f:?}"),
        }
        let s = parse("ar1:rho=0.5,scale=2").unwrap();
        assert_eq!(s.scale(), 2.0);
        assert!(matches!(s.family(), SymbolFamily::Ar1 { rho } if *rho == 0.5));
        let l = parse("lines:(0.7854,1),(1.2, 0.5)").unwrap();
        assert_eq!(l.scaled_lines().unwrap().len(), 2);
        assert_eq!(parse("lines:(0.5,1);(1,2)").unwrap().scaled_lines().unwrap().len(), 2);
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in [
            "pink",
            "ar1",
            "ar1:rho=x",
            "ar1:rho=1.5",
            "ar1:phi=0.5",
            "lines:",
            "lines:(1)",
            "lines:(1,2",
            "bandlimited:W",
        ] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
