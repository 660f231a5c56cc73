//! Resonance comb of two coupled rings with radii `R` and `R/2`.
//!
//! Every mode of the small ring coincides with an even-`m` mode of the large
//! ring. Those aligned pairs hybridize into doublets `ω̄ ± J`, while the odd-`m`
//! modes of the large ring stay bare. An odd mode `ω_s` with its two even
//! neighbours forms two equally spaced triplets, `(ω⁻_p, ω_s, ω⁺_i)` and
//! `(ω⁺_p, ω_s, ω⁻_i)`, because `ω̄_{m−1} + ω̄_{m+1} = 2ω_m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Relative tolerance on `|ω_p + ω_i − 2ω_s| / ω_s`.
pub const TRIPLET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub n_eff: f64,
    /// Radius of the large ring, meters.
    pub radius: f64,
    /// Small-ring radius over large-ring radius.
    #[serde(default = "default_ratio")]
    pub radius_ratio: f64,
    /// Inter-ring coupling J, rad/s.
    pub coupling_j: f64,
    /// Inclusive range of large-ring azimuthal numbers.
    pub m_range: (u64, u64),
}

fn default_ratio() -> f64 {
    0.5
}

impl MoleculeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_eff > 1.0) || !self.n_eff.is_finite() {
            return Err(Error::InvalidParameter(format!("n_eff must exceed 1, got {}", self.n_eff)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.coupling_j >= 0.0) || !self.coupling_j.is_finite() {
            return Err(Error::InvalidParameter(format!("J must be non-negative, got {}", self.coupling_j)));
        }
        if (self.radius_ratio - 0.5).abs() > 1e-12 {
            return Err(Error::UnsupportedRatio(self.radius_ratio));
        }
        let (lo, hi) = self.m_range;
        if lo == 0 || hi < lo {
            return Err(Error::InvalidParameter(format!("invalid azimuthal range [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Free spectral range `c / (n_eff R)` of the large ring, rad/s.
    pub fn fsr(&self) -> f64 {
        SPEED_OF_LIGHT / (self.n_eff * self.radius)
    }
}

/// `ω_m = m c / (n_eff R)` for each `m` in `m_range` (inclusive).
pub fn ring_resonances(n_eff: f64, radius: f64, m_range: (u64, u64)) -> Result<Vec<(u64, f64)>> {
    ring_resonances_dispersive(|_| n_eff, radius, m_range)
}

/// Same as [`ring_resonances`] with an `m`-dependent effective index.
pub fn ring_resonances_dispersive(
    n_eff: impl Fn(u64) -> f64,
    radius: f64,
    m_range: (u64, u64),
) -> Result<Vec<(u64, f64)>> {
    let (lo, hi) = m_range;
    if lo == 0 || hi < lo {
        return Err(Error::InvalidParameter(format!("invalid azimuthal range [{lo}, {hi}]")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    Ok((lo..=hi).map(|m| (m, m as f64 * SPEED_OF_LIGHT / (n_eff(m) * radius))).collect())
}

/// Doublet `(ω̄ − J, ω̄ + J)` of two aligned resonances.
pub fn hybridize(omega_bar: f64, j: f64) -> Result<(f64, f64)> {
    if !(j >= 0.0) {
        return Err(Error::InvalidParameter(format!("J must be non-negative, got {j}")));
    }
    Ok((omega_bar - j, omega_bar + j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Plus,
    /// Unhybridized large-ring mode.
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Large-ring azimuthal number.
    pub m: u64,
    pub branch: Branch,
    pub omega_rad_per_s: f64,
    pub frequency_hz: f64,
}

impl Resonance {
    fn new(m: u64, branch: Branch, omega: f64) -> Self {
        Self {
            m,
            branch,
            omega_rad_per_s: omega,
            frequency_hz: omega / (2.0 * PI),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub pump: Resonance,
    pub seed: Resonance,
    pub idler: Resonance,
    /// `|ω_p + ω_i − 2ω_s| / ω_s`.
    pub mismatch: f64,
    /// Distance from any triplet member to the nearest other resonance, rad/s.
    pub isolation: f64,
    /// False when `J = 0`: the triplet is part of the evenly spaced bare comb.
    pub isolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombReport {
    pub spec: MoleculeSpec,
    pub fsr_rad_per_s: f64,
    pub resonances: Vec<Resonance>,
    pub triplets: Vec<Triplet>,
    pub diagnostics: Vec<String>,
}

/// Spectrum of the molecule and all equally spaced triplets in range.
pub fn find_triplets(spec: &MoleculeSpec) -> Result<CombReport> {
    find_triplets_dispersive(spec, |_| spec.n_eff)
}

/// [`find_triplets`] with an `m`-dependent effective index. Triplets whose
/// mismatch exceeds [`TRIPLET_TOL`] are dropped with a diagnostic; this path
/// is not validated against measured dispersion.
pub fn find_triplets_dispersive(spec: &MoleculeSpec, n_eff: impl Fn(u64) -> f64) -> Result<CombReport> {
    spec.validate()?;
    let bare = ring_resonances_dispersive(&n_eff, spec.radius, spec.m_range)?;
    let mut resonances = Vec::with_capacity(bare.len() * 3 / 2 + 1);
    for &(m, omega) in &bare {
        if m % 2 == 0 {
            let (lo, hi) = hybridize(omega, spec.coupling_j)?;
            resonances.push(Resonance::new(m, Branch::Minus, lo));
            resonances.push(Resonance::new(m, Branch::Plus, hi));
        } else {
            resonances.push(Resonance::new(m, Branch::Bare, omega));
        }
    }
    resonances.sort_by(|a, b| a.omega_rad_per_s.total_cmp(&b.omega_rad_per_s));

    let find = |m: u64, branch: Branch| resonances.iter().find(|r| r.m == m && r.branch == branch).copied();
    let mut triplets = Vec::new();
    let mut diagnostics = Vec::new();
    for seed in resonances.iter().filter(|r| r.branch == Branch::Bare) {
        let (Some(m_lo), m_hi) = (seed.m.checked_sub(1), seed.m + 1) else {
            continue;
        };
        for (bp, bi) in [(Branch::Minus, Branch::Plus), (Branch::Plus, Branch::Minus)] {
            let (Some(pump), Some(idler)) = (find(m_lo, bp), find(m_hi, bi)) else {
                continue;
            };
            let mismatch = (pump.omega_rad_per_s + idler.omega_rad_per_s - 2.0 * seed.omega_rad_per_s).abs()
                / seed.omega_rad_per_s;
            if mismatch > TRIPLET_TOL {
                diagnostics.push(format!(
                    "triplet around m={} dropped: relative mismatch {mismatch:e}",
                    seed.m
                ));
                continue;
            }
            let members = [pump, *seed, idler];
            let isolation = members
                .iter()
                .map(|member| {
                    resonances
                        .iter()
                        .filter(|r| !members.contains(r))
                        .map(|r| (r.omega_rad_per_s - member.omega_rad_per_s).abs())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            triplets.push(Triplet {
                pump,
                seed: *seed,
                idler,
                mismatch,
                isolation,
                isolated: spec.coupling_j > 0.0,
            });
        }
    }
    if triplets.is_empty() {
        diagnostics.push(format!(
            "no aligned doublet pair straddles a bare resonance in m ∈ [{}, {}]",
            spec.m_range.0, spec.m_range.1
        ));
    }
    if spec.coupling_j == 0.0 {
        diagnostics.push("J = 0: doublets are degenerate and triplets are not isolated".into());
    }
    Ok(CombReport {
        spec: *spec,
        fsr_rad_per_s: spec.fsr(),
        resonances,
        triplets,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(j: f64, m_range: (u64, u64)) -> MoleculeSpec {
        MoleculeSpec {
            n_eff: 2.0,
            radius: 100e-6,
            radius_ratio: 0.5,
            coupling_j: j,
            m_range,
        }
    }

    #[test]
    fn fsr_of_hundred_micron_ring() {
        let r = ring_resonances(2.0, 100e-6, (1000, 1001)).unwrap();
        let fsr = r[1].1 - r[0].1;
        assert!((fsr - 1.499e12).abs() / 1.499e12 < 1e-3);
        assert!((spec(0.0, (1, 2)).fsr() - SPEED_OF_LIGHT / 2e-4).abs() < 1e-3);
    }

    #[test]
    fn halving_radius_doubles_fsr() {
        let a = ring_resonances(2.2, 80e-6, (10, 11)).unwrap();
        let b = ring_resonances(2.2, 40e-6, (10, 11)).unwrap();
        let (fa, fb) = (a[1].1 - a[0].1, b[1].1 - b[0].1);
        assert!((fb / fa - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hybridization_preserves_midpoint() {
        let (lo, hi) = hybridize(1.2e15, 3e9).unwrap();
        assert_eq!(0.5 * (lo + hi), 1.2e15);
        assert_eq!(hybridize(5.0, 0.0).unwrap(), (5.0, 5.0));
        assert!(hybridize(5.0, -1.0).is_err());
    }

    #[test]
    fn two_branches_per_alignment_pair() {
        let report = find_triplets(&spec(2e10, (1200, 1206))).unwrap();
        // Bare seeds at m = 1201, 1203, 1205, each with two branch assignments.
        assert_eq!(report.triplets.len(), 6);
        for pair in report.triplets.chunks(2) {
            assert_eq!(pair[0].seed.m, pair[1].seed.m);
            assert_eq!((pair[0].pump.branch, pair[0].idler.branch), (Branch::Minus, Branch::Plus));
            assert_eq!((pair[1].pump.branch, pair[1].idler.branch), (Branch::Plus, Branch::Minus));
            assert!(pair.iter().all(|t| t.isolated));
        }
    }

    #[test]
    fn zero_coupling_is_flagged() {
        let report = find_triplets(&spec(0.0, (10, 14))).unwrap();
        assert!(!report.triplets.is_empty());
        assert!(report.triplets.iter().all(|t| !t.isolated));
        assert!(report.diagnostics.iter().any(|d| d.contains("J = 0")));
    }

    #[test]
    fn empty_range_gives_diagnostic() {
        let report = find_triplets(&spec(1e9, (4, 5))).unwrap();
        assert!(report.triplets.is_empty());
        assert!(!report.diagnostics.is_empty());
    }

    #[test]
    fn other_ratios_rejected() {
        let mut s = spec(1e9, (4, 9));
        s.radius_ratio = 1.0 / 3.0;
        assert!(matches!(find_triplets(&s), Err(Error::UnsupportedRatio(_))));
    }

    #[test]
    fn isolation_metric_matches_geometry() {
        let s = spec(1e11, (100, 110));
        let report = find_triplets(&s).unwrap();
        let fsr = s.fsr();
        let bound = s.coupling_j.min(fsr - 2.0 * s.coupling_j);
        for t in &report.triplets {
            assert!(t.isolation >= bound * (1.0 - 1e-9));
        }
    }

    proptest! {
        #[test]
        fn triplets_are_equally_spaced(
            n_eff in 1.5f64..3.5,
            radius in 10e-6f64..300e-6,
            frac in 0.0f64..0.45,
            m0 in 10u64..5000,
        ) {
            let mut s = spec(0.0, (m0, m0 + 9));
            s.n_eff = n_eff;
            s.radius = radius;
            s.coupling_j = frac * s.fsr();
            let report = find_triplets(&s).unwrap();
            prop_assert!(!report.triplets.is_empty());
            for t in &report.triplets {
                let lhs = (t.pump.omega_rad_per_s + t.idler.omega_rad_per_s - 2.0 * t.seed.omega_rad_per_s).abs();
                prop_assert!(lhs <= TRIPLET_TOL * t.seed.omega_rad_per_s);
            }
            let doublets: Vec<_> = report.resonances.iter().filter(|r| r.branch != Branch::Bare).collect();
            for pair in doublets.chunks(2) {
                if pair[0].m == pair[1].m {
                    let split = (pair[1].omega_rad_per_s - pair[0].omega_rad_per_s).abs();
                    prop_assert!((split - 2.0 * s.coupling_j).abs() <= 1e-12 * pair[0].omega_rad_per_s);
                }
            }
        }
    }
}
