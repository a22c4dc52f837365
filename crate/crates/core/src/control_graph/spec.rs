use std::fmt;

use crate::error::{Error, Result};

/// Per-node observation channels, in canonical layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObsFlag {
    /// Cartesian position.
    P,
    /// Cartesian velocity.
    V,
    /// Orientation quaternion.
    Q,
    /// Angular velocity.
    A,
    /// Joint angles of the parent joint.
    Ja,
    /// Joint ranges of the parent joint.
    Jr,
    /// Joint velocities.
    Jv,
    /// Normalized node index.
    Id,
    /// Position relative to the parent module.
    Rp,
    /// Orientation relative to the parent module.
    Rr,
    /// Morphological parameters.
    M,
}

impl ObsFlag {
    pub const ALL: [ObsFlag; 11] = [
        ObsFlag::P,
        ObsFlag::V,
        ObsFlag::Q,
        ObsFlag::A,
        ObsFlag::Ja,
        ObsFlag::Jr,
        ObsFlag::Jv,
        ObsFlag::Id,
        ObsFlag::Rp,
        ObsFlag::Rr,
        ObsFlag::M,
    ];

    pub const BASE_SET: [ObsFlag; 6] =
        [ObsFlag::P, ObsFlag::V, ObsFlag::Q, ObsFlag::A, ObsFlag::Ja, ObsFlag::Jr];

    pub fn width(self) -> usize {
        match self {
            ObsFlag::P | ObsFlag::V | ObsFlag::A | ObsFlag::Ja | ObsFlag::Jv | ObsFlag::Rp => 3,
            ObsFlag::Q | ObsFlag::Rr => 4,
            ObsFlag::Jr => 6,
            ObsFlag::Id => 1,
            ObsFlag::M => 8,
        }
    }

    pub fn bit(self) -> u16 {
        1 << (self as u16)
    }

    pub fn name(self) -> &'static str {
        match self {
            ObsFlag::P => "p",
            ObsFlag::V => "v",
            ObsFlag::Q => "q",
            ObsFlag::A => "a",
            ObsFlag::Ja => "ja",
            ObsFlag::Jr => "jr",
            ObsFlag::Jv => "jv",
            ObsFlag::Id => "id",
            ObsFlag::Rp => "rp",
            ObsFlag::Rr => "rr",
            ObsFlag::M => "m",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ObsFlag::ALL.iter().copied().find(|f| f.name() == s)
    }
}

/// Column layout of per-node observation features.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationSpec {
    flags: Vec<ObsFlag>,
}

impl ObservationSpec {
    pub fn flags(&self) -> &[ObsFlag] {
        &self.flags
    }

    pub fn contains(&self, f: ObsFlag) -> bool {
        self.flags.contains(&f)
    }

    pub fn width(&self) -> usize {
        self.flags.iter().map(|f| f.width()).sum()
    }

    /// Column offset of `flag`, if enabled.
    pub fn offset(&self, flag: ObsFlag) -> Option<usize> {
        let mut off = 0;
        for &f in &self.flags {
            if f == flag {
                return Some(off);
            }
            off += f.width();
        }
        None
    }

    pub fn bitmask(&self) -> u16 {
        self.flags.iter().fold(0, |m, f| m | f.bit())
    }

    pub fn from_bitmask(mask: u16) -> Result<Self> {
        if mask >> ObsFlag::ALL.len() != 0 {
            return Err(Error::Value(format!("unknown observation bits in {mask:#06x}")));
        }
        build_observation_spec(ObsFlag::ALL.iter().copied().filter(|f| mask & f.bit() != 0))
    }

    pub fn base_set() -> Self {
        ObservationSpec { flags: ObsFlag::BASE_SET.to_vec() }
    }

    /// `base_set` plus morphological parameters, the default node features.
    pub fn base_set_m() -> Self {
        let mut flags = ObsFlag::BASE_SET.to_vec();
        flags.push(ObsFlag::M);
        ObservationSpec { flags }
    }

    pub fn full() -> Self {
        ObservationSpec { flags: ObsFlag::ALL.to_vec() }
    }

    /// Parses `base_set`, `base_set+m+id`, `p,v,q` and similar spellings.
    pub fn parse(s: &str) -> Result<Self> {
        let mut flags = Vec::new();
        for tok in s.split(|c| c == '+' || c == ',' || c == '-').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "base_set" => flags.extend_from_slice(&ObsFlag::BASE_SET),
                "full" | "all" => flags.extend_from_slice(&ObsFlag::ALL),
                t => flags.push(ObsFlag::parse(t).ok_or_else(|| Error::Value(format!("unknown observation flag '{t}'")))?),
            }
        }
        build_observation_spec(flags)
    }
}

impl fmt::Display for ObservationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = ObsFlag::BASE_SET.iter().all(|b| self.contains(*b));
        let mut parts: Vec<&str> = Vec::new();
        if base {
            parts.push("base_set");
        }
        for flag in &self.flags {
            if !(base && ObsFlag::BASE_SET.contains(flag)) {
                parts.push(flag.name());
            }
        }
        f.write_str(&parts.join("+"))
    }
}

/// Canonical spec for a set of flags; duplicates collapse.
pub fn build_observation_spec(flags: impl IntoIterator<Item = ObsFlag>) -> Result<ObservationSpec> {
    let mut flags: Vec<ObsFlag> = flags.into_iter().collect();
    flags.sort();
    flags.dedup();
    if flags.is_empty() {
        return Err(Error::Value("observation spec needs at least one flag".into()));
    }
    Ok(ObservationSpec { flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(ObservationSpec::base_set().width(), 22);
        assert_eq!(ObservationSpec::base_set_m().width(), 30);
        assert_eq!(ObservationSpec::full().width(), 22 + 3 + 1 + 3 + 4 + 8);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(build_observation_spec([]), Err(Error::Value(_))));
    }

    #[test]
    fn canonical_order_and_text() {
        let s = build_observation_spec([ObsFlag::M, ObsFlag::P, ObsFlag::P]).unwrap();
        assert_eq!(s.flags(), &[ObsFlag::P, ObsFlag::M]);
        assert_eq!(s.offset(ObsFlag::M), Some(3));
        let b = ObservationSpec::parse("base_set+m").unwrap();
        assert_eq!(b, ObservationSpec::base_set_m());
        assert_eq!(b.to_string(), "base_set+m");
        assert_eq!(ObservationSpec::from_bitmask(b.bitmask()).unwrap(), b);
    }
}
