//! Effective-coupling estimates for microring platforms.
//!
//! `g̃/Γ_s = (γ_nl v_g² / 2πR) · √(ħ ω_s P_p / Γ_s³)` with `Γ_s = ω_s / Q0`,
//! where the pump amplitude is `|α_p| = √(P_p / (ħ ω_s Γ_s))`. Everything here
//! is in SI units.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comb::SPEED_OF_LIGHT;
use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Default working angular frequency, `2π · 193 THz`.
pub const DEFAULT_OMEGA_S: f64 = 2.0 * PI * 193e12;
/// Relative disagreement between `γ_nl` and `ω_s n₂ / (A_eff c)` that triggers a warning.
pub const CROSS_CHECK_TOL: f64 = 0.05;
/// Platform data shipped with the crate.
pub const BUNDLED_PLATFORMS: &str = include_str!("../data/platforms.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialPlatform {
    pub name: String,
    pub n: f64,
    /// Nonlinear index n₂, m²/W.
    pub n2: f64,
    pub q0: f64,
    /// Ring radius, m.
    pub radius: f64,
    /// Nonlinear parameter, 1/(W·m).
    pub gamma_nl: Option<f64>,
    /// Effective mode area, m².
    pub a_eff: Option<f64>,
    /// Group velocity, m/s; `c/n` when absent.
    pub v_g: Option<f64>,
    /// Angular frequency, rad/s.
    pub omega_s: f64,
    /// Published `g̃/Γ_s` at 0.1, 1 and 10 W, if any.
    pub tabulated: Option<[f64; 3]>,
    pub citation: String,
}

impl MaterialPlatform {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{}: {field} must be positive, got {v}", self.name)))
            }
        };
        positive("n", self.n)?;
        positive("n2", self.n2)?;
        positive("q0", self.q0)?;
        positive("radius", self.radius)?;
        positive("omega_s", self.omega_s)?;
        for (field, v) in [("gamma_nl", self.gamma_nl), ("a_eff", self.a_eff), ("v_g", self.v_g)] {
            if let Some(v) = v {
                positive(field, v)?;
            }
        }
        if self.gamma_nl.is_none() && self.a_eff.is_none() {
            return Err(Error::InvalidParameter(format!("{}: need gamma_nl or a_eff", self.name)));
        }
        Ok(())
    }

    /// Tabulated `γ_nl`, or `ω_s n₂ / (A_eff c)` when only the area is known.
    pub fn gamma_nl(&self) -> f64 {
        match (self.gamma_nl, self.a_eff) {
            (Some(g), _) => g,
            (None, Some(a)) => nonlinear_parameter(self.n2, a, self.omega_s),
            (None, None) => f64::NAN,
        }
    }

    pub fn group_velocity(&self) -> f64 {
        self.v_g.unwrap_or(SPEED_OF_LIGHT / self.n)
    }

    /// Intrinsic linewidth `ω_s / Q0`, 1/s.
    pub fn gamma_s(&self) -> f64 {
        self.omega_s / self.q0
    }

    /// Relative mismatch between the given `γ_nl` and the value implied by
    /// `n₂` and `A_eff`, when both are present.
    pub fn cross_check(&self) -> Option<f64> {
        let (g, a) = (self.gamma_nl?, self.a_eff?);
        let implied = nonlinear_parameter(self.n2, a, self.omega_s);
        Some((g - implied).abs() / implied)
    }
}

/// `γ_nl = ω_s n₂ / (A_eff c)`.
pub fn nonlinear_parameter(n2: f64, a_eff: f64, omega_s: f64) -> f64 {
    omega_s * n2 / (a_eff * SPEED_OF_LIGHT)
}

/// `A_eff` that yields `gamma_nl` for the given `n₂`.
pub fn effective_area(n2: f64, gamma_nl: f64, omega_s: f64) -> f64 {
    omega_s * n2 / (gamma_nl * SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEstimate {
    /// `g̃_nl / Γ_s`.
    pub ratio: f64,
    /// Single-photon rate `g_nl / Γ_s`.
    pub g_nl_over_gamma: f64,
    /// `|α_p|`.
    pub alpha_p: f64,
}

/// `g_nl / Γ_s = ħ ω_s v_g² γ_nl / (2πR Γ_s)`.
pub fn single_photon_ratio(p: &MaterialPlatform) -> f64 {
    let v = p.group_velocity();
    HBAR * p.omega_s * v * v * p.gamma_nl() / (2.0 * PI * p.radius * p.gamma_s())
}

/// Effective coupling at pump power `power` (W).
pub fn effective_coupling(p: &MaterialPlatform, power: f64) -> Result<CouplingEstimate> {
    p.validate()?;
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::InvalidParameter(format!("pump power must be non-negative, got {power}")));
    }
    let g = single_photon_ratio(p);
    let alpha_p = (power / (HBAR * p.omega_s * p.gamma_s())).sqrt();
    Ok(CouplingEstimate {
        ratio: g * alpha_p,
        g_nl_over_gamma: g,
        alpha_p,
    })
}

/// Pump power (W) at which `g̃/Γ_s` reaches `target_ratio`.
pub fn power_threshold(p: &MaterialPlatform, target_ratio: f64) -> Result<f64> {
    p.validate()?;
    if !(target_ratio > 0.0) || !target_ratio.is_finite() {
        return Err(Error::InvalidParameter(format!("target ratio must be positive, got {target_ratio}")));
    }
    let v = p.group_velocity();
    let k = target_ratio * 2.0 * PI * p.radius / (p.gamma_nl() * v * v);
    Ok(k * k * p.gamma_s().powi(3) / (HBAR * p.omega_s))
}

/// Published estimate for a non-ring geometry, as `(P_p [W], g̃/Γ_s)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReference {
    pub name: String,
    pub geometry: String,
    pub points: Vec<(f64, f64)>,
    pub citation: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlatformSet {
    pub platforms: Vec<MaterialPlatform>,
    pub estimates: Vec<CouplingReference>,
    pub warnings: Vec<String>,
}

impl PlatformSet {
    pub fn get(&self, name: &str) -> Option<&MaterialPlatform> {
        self.platforms.iter().find(|p| p.name == name)
    }

    /// Platform names sorted by decreasing `g̃/Γ_s` at `power`.
    pub fn ranking(&self, power: f64) -> Result<Vec<(String, f64)>> {
        let mut v = self
            .platforms
            .iter()
            .map(|p| Ok((p.name.clone(), effective_coupling(p, power)?.ratio)))
            .collect::<Result<Vec<_>>>()?;
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(v)
    }

    /// Names sorted by decreasing tabulated value at 0.1 W.
    pub fn tabulated_ranking(&self) -> Vec<(String, f64)> {
        let mut v: Vec<_> = self
            .platforms
            .iter()
            .filter_map(|p| p.tabulated.map(|t| (p.name.clone(), t[0])))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

/// Platforms bundled with the crate.
pub fn bundled_platforms() -> Result<PlatformSet> {
    parse_platforms(BUNDLED_PLATFORMS)
}

pub fn load_platforms(path: impl AsRef<Path>) -> Result<PlatformSet> {
    let text = std::fs::read_to_string(path)?;
    parse_platforms(&text)
}

fn schema(row: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        row,
        field: field.into(),
        message: message.into(),
    }
}

fn number(table: &toml::Table, row: usize, field: &str) -> Result<Option<f64>> {
    match table.get(field) {
        None => Ok(None),
        Some(toml::Value::Float(x)) => Ok(Some(*x)),
        Some(toml::Value::Integer(x)) => Ok(Some(*x as f64)),
        Some(other) => Err(schema(row, field, format!("expected a number, found {}", other.type_str()))),
    }
}

fn required_number(table: &toml::Table, row: usize, field: &str) -> Result<f64> {
    let v = number(table, row, field)?.ok_or_else(|| schema(row, field, "missing"))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(schema(row, field, format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn optional_positive(table: &toml::Table, row: usize, field: &str) -> Result<Option<f64>> {
    match number(table, row, field)? {
        Some(v) if !(v > 0.0) || !v.is_finite() => Err(schema(row, field, format!("must be positive, got {v}"))),
        v => Ok(v),
    }
}

fn string(table: &toml::Table, row: usize, field: &str) -> Result<Option<String>> {
    match table.get(field) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(schema(row, field, format!("expected a string, found {}", other.type_str()))),
    }
}

fn records<'a>(doc: &'a toml::Table, key: &str) -> Result<Vec<&'a toml::Table>> {
    match doc.get(key) {
        None => Ok(Vec::new()),
        Some(toml::Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(row, v)| v.as_table().ok_or_else(|| schema(row, key, "expected a table")))
            .collect(),
        Some(_) => Err(schema(0, key, "expected an array of tables")),
    }
}

const PLATFORM_FIELDS: [&str; 11] = [
    "name", "n", "n2", "q0", "radius", "gamma_nl", "a_eff", "v_g", "omega_s", "tabulated", "citation",
];

fn parse_platform(t: &toml::Table, row: usize) -> Result<MaterialPlatform> {
    if let Some(unknown) = t.keys().find(|k| !PLATFORM_FIELDS.contains(&k.as_str())) {
        return Err(schema(row, unknown, "unknown field"));
    }
    let name = string(t, row, "name")?.ok_or_else(|| schema(row, "name", "missing"))?;
    let tabulated = match t.get("tabulated") {
        None => None,
        Some(toml::Value::Array(items)) if items.len() == 3 => {
            let mut out = [0.0; 3];
            for (slot, item) in out.iter_mut().zip(items) {
                *slot = item
                    .as_float()
                    .or_else(|| item.as_integer().map(|i| i as f64))
                    .ok_or_else(|| schema(row, "tabulated", "expected three numbers"))?;
            }
            Some(out)
        }
        Some(_) => return Err(schema(row, "tabulated", "expected three numbers")),
    };
    let p = MaterialPlatform {
        name,
        n: required_number(t, row, "n")?,
        n2: required_number(t, row, "n2")?,
        q0: required_number(t, row, "q0")?,
        radius: required_number(t, row, "radius")?,
        gamma_nl: optional_positive(t, row, "gamma_nl")?,
        a_eff: optional_positive(t, row, "a_eff")?,
        v_g: optional_positive(t, row, "v_g")?,
        omega_s: optional_positive(t, row, "omega_s")?.unwrap_or(DEFAULT_OMEGA_S),
        tabulated,
        citation: string(t, row, "citation")?.unwrap_or_default(),
    };
    if p.gamma_nl.is_none() && p.a_eff.is_none() {
        return Err(schema(row, "gamma_nl", "need gamma_nl or a_eff"));
    }
    Ok(p)
}

fn parse_estimate(t: &toml::Table, row: usize) -> Result<CouplingReference> {
    let points = match t.get("points") {
        Some(toml::Value::Array(items)) => items
            .iter()
            .map(|item| {
                let pair = item.as_array().filter(|a| a.len() == 2);
                let nums: Option<Vec<f64>> =
                    pair.map(|a| a.iter().filter_map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64))).collect());
                match nums.as_deref() {
                    Some(&[p, r]) => Ok((p, r)),
                    _ => Err(schema(row, "points", "expected [power, ratio] pairs")),
                }
            })
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(schema(row, "points", "missing")),
    };
    Ok(CouplingReference {
        name: string(t, row, "name")?.ok_or_else(|| schema(row, "name", "missing"))?,
        geometry: string(t, row, "geometry")?.unwrap_or_default(),
        points,
        citation: string(t, row, "citation")?.unwrap_or_default(),
    })
}

/// Parses platform records; see `data/platforms.toml` for the schema.
pub fn parse_platforms(text: &str) -> Result<PlatformSet> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let mut set = PlatformSet::default();
    for (row, t) in records(&doc, "platform")?.into_iter().enumerate() {
        let p = parse_platform(t, row)?;
        if let Some(mismatch) = p.cross_check() {
            if mismatch > CROSS_CHECK_TOL {
                set.warnings.push(format!(
                    "{}: gamma_nl differs from omega_s n2/(A_eff c) by {:.1}%",
                    p.name,
                    100.0 * mismatch
                ));
            }
        }
        set.platforms.push(p);
    }
    for (row, t) in records(&doc, "estimate")?.into_iter().enumerate() {
        set.estimates.push(parse_estimate(t, row)?);
    }
    if set.platforms.is_empty() {
        set.warnings.push("no platform records found".into());
    }
    Ok(set)
}

/// `n` log-spaced powers from `lo` to `hi` (inclusive), in watts.
pub fn log_power_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidParameter(format!("invalid power grid {lo}:{hi}:{n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ops::{Div, Mul};

    fn algaas() -> MaterialPlatform {
        bundled_platforms().unwrap().get("AlGaAs").unwrap().clone()
    }

    #[test]
    fn bundled_file_has_six_rings_and_one_estimate() {
        let set = bundled_platforms().unwrap();
        assert_eq!(set.platforms.len(), 6);
        assert_eq!(set.estimates.len(), 1);
        assert!(set.warnings.is_empty());
        let si3n4 = set.get("Si3N4").unwrap();
        assert_eq!((si3n4.q0, si3n4.radius, si3n4.gamma_nl), (37e6, 115e-6, Some(0.7)));
        assert_eq!(set.estimates[0].points, vec![(0.1, 0.02), (1.0, 0.064)]);
    }

    #[test]
    fn nonlinear_parameter_scaling() {
        let base = nonlinear_parameter(2.6e-17, 2.7e-13, DEFAULT_OMEGA_S);
        assert!((nonlinear_parameter(2.6e-17, 5.4e-13, DEFAULT_OMEGA_S) - base / 2.0).abs() < 1e-12 * base);
        assert!((nonlinear_parameter(5.2e-17, 2.7e-13, DEFAULT_OMEGA_S) - 2.0 * base).abs() < 1e-12 * base);
    }

    #[test]
    fn area_inversion_for_algaas() {
        let a = effective_area(2.6e-17, 390.0, DEFAULT_OMEGA_S);
        // 2π·193e12 · 2.6e-17 / (390 · c)
        let expected = 2.0 * PI * 193e12 * 2.6e-17 / (390.0 * 299_792_458.0);
        assert!((a - expected).abs() / expected < 1e-14);
        assert!((a - 2.70e-13).abs() / 2.70e-13 < 0.01);
        assert!((nonlinear_parameter(2.6e-17, a, DEFAULT_OMEGA_S) - 390.0).abs() < 1e-9);
    }

    #[test]
    fn algaas_at_hundred_milliwatts() {
        let r = effective_coupling(&algaas(), 0.1).unwrap();
        assert!((r.ratio - 0.273).abs() < 0.005, "{}", r.ratio);
        assert!((r.ratio - 0.23).abs() / 0.23 <= 0.25);
        assert!((r.ratio - r.g_nl_over_gamma * r.alpha_p).abs() < 1e-15);
    }

    #[test]
    fn zero_power_gives_zero() {
        assert_eq!(effective_coupling(&algaas(), 0.0).unwrap().ratio, 0.0);
        assert!(effective_coupling(&algaas(), -1.0).is_err());
    }

    #[test]
    fn threshold_round_trip_and_quadratic_scaling() {
        let p = algaas();
        for x in [0.01, 0.325, 1.7] {
            let power = power_threshold(&p, x).unwrap();
            let back = effective_coupling(&p, power).unwrap().ratio;
            assert!((back - x).abs() <= 1e-12 * x);
        }
        let ratio = power_threshold(&p, 4.0 * 0.2).unwrap() / power_threshold(&p, 0.2).unwrap();
        assert!((ratio - 16.0).abs() < 1e-12);
        let pth = power_threshold(&p, 0.325).unwrap();
        assert!((0.13..0.2).contains(&pth), "{pth}");
    }

    #[test]
    fn area_only_platform_uses_derived_gamma() {
        let mut p = algaas();
        p.gamma_nl = None;
        p.a_eff = Some(effective_area(p.n2, 390.0, p.omega_s));
        assert!((p.gamma_nl() - 390.0).abs() < 1e-9);
    }

    #[test]
    fn schema_errors_name_row_and_field() {
        let text = "[[platform]]\nname='a'\nn=2.0\nn2=1e-19\nq0=1e6\nradius=1e-4\ngamma_nl=1.0\n\
                    [[platform]]\nname='b'\nn=2.0\nn2=1e-19\nq0='big'\nradius=1e-4\ngamma_nl=1.0\n";
        match parse_platforms(text) {
            Err(Error::Schema { row, field, .. }) => assert_eq!((row, field.as_str()), (1, "q0")),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "[[platform]]\nname='a'\nn=2.0\nn2=1e-19\nq0=1e6\nradius=1e-4\n";
        assert!(matches!(parse_platforms(missing), Err(Error::Schema { .. })));
        let negative = "[[platform]]\nname='a'\nn=-2.0\nn2=1e-19\nq0=1e6\nradius=1e-4\ngamma_nl=1.0\n";
        assert!(matches!(parse_platforms(negative), Err(Error::Schema { .. })));
    }

    #[test]
    fn cross_check_mismatch_is_a_warning() {
        let text = "[[platform]]\nname='a'\nn=2.0\nn2=2.6e-17\nq0=1e6\nradius=1e-4\ngamma_nl=390.0\na_eff=1.08e-13\n";
        let set = parse_platforms(text).unwrap();
        assert_eq!(set.platforms.len(), 1);
        assert_eq!(set.warnings.len(), 1);
        let ok = "[[platform]]\nname='a'\nn=2.0\nn2=2.6e-17\nq0=1e6\nradius=1e-4\ngamma_nl=390.0\na_eff=2.7e-13\n";
        assert!(parse_platforms(ok).unwrap().warnings.is_empty());
    }

    #[test]
    fn empty_file_warns() {
        let set = parse_platforms("").unwrap();
        assert!(set.platforms.is_empty());
        assert_eq!(set.warnings.len(), 1);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_power_grid(1e-6, 10.0, 8).unwrap();
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[7] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| (w[1] / w[0] - 10.0).abs() < 1e-9));
    }

    /// Exponents of (kg, m, s).
    #[derive(Debug, Clone, Copy, PartialEq)]
    struct Dim(i32, i32, i32);

    impl Mul for Dim {
        type Output = Dim;
        fn mul(self, o: Dim) -> Dim {
            Dim(self.0 + o.0, self.1 + o.1, self.2 + o.2)
        }
    }

    impl Div for Dim {
        type Output = Dim;
        fn div(self, o: Dim) -> Dim {
            Dim(self.0 - o.0, self.1 - o.1, self.2 - o.2)
        }
    }

    #[test]
    fn estimator_is_dimensionless() {
        let one = Dim(0, 0, 0);
        let meter = Dim(0, 1, 0);
        let second = Dim(0, 0, 1);
        let joule = Dim(1, 2, -2);
        let watt = joule / second;
        let rate = one / second;
        let gamma_nl = one / (watt * meter);
        let v_g = meter / second;
        let hbar = joule * second;
        let hbar_omega = hbar * rate;

        let prefactor = gamma_nl * v_g * v_g / meter;
        let root_squared = hbar_omega * watt / (rate * rate * rate);
        // √x is dimensionless iff x is.
        assert_eq!(prefactor * prefactor * root_squared, one);
        assert_eq!(hbar_omega * v_g * v_g * gamma_nl / (meter * rate), one);
        assert_eq!(watt / (hbar_omega * rate), one);
    }
}
