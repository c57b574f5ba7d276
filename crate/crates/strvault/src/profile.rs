//! STR profile parsing and canonicalization over the 20 CODIS core loci.
//!
//! Every key in the system is derived from a profile, so there must be
//! exactly one byte representation per genotype. Alleles are stored as
//! integer deci-repeats (9.3 repeats = 93) so that no floating point ever
//! touches the key path, and [`StrProfile::canonical_string`] emits loci in
//! a fixed lexicographic order regardless of input order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// The 20 CODIS core loci, pre-sorted lexicographically. Key derivation
/// walks this array in order, so it is compiled in and never read from a
/// data file.
pub const ROSTER: [&str; 20] = [
    "CSF1PO", "D10S1248", "D12S391", "D13S317", "D16S539", "D18S51", "D19S433", "D1S1656",
    "D21S11", "D22S1045", "D2S1338", "D2S441", "D3S1358", "D5S818", "D7S820", "D8S1179", "FGA",
    "TH01", "TPOX", "VWA",
];

/// Number of loci in a complete profile.
pub const LOCUS_COUNT: usize = ROSTER.len();

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum ProfileError {
    #[error("line {line}: expected `LOCUS,allele1,allele2`, found {fields} field(s)")]
    Syntax { line: usize, fields: usize },
    #[error("line {line}: unknown locus `{name}`")]
    UnknownLocus { line: usize, name: String },
    #[error("line {line}: duplicate locus {locus}")]
    DuplicateLocus { line: usize, locus: LocusName },
    #[error("line {line}: malformed allele `{value}`")]
    MalformedAllele { line: usize, value: String },
    #[error("missing locus {}", .0.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", "))]
    MissingLocus(Vec<LocusName>),
}

/// Error for byte sequences that are not a canonical profile encoding.
#[derive(Debug, Error, PartialEq, Eq, Clone, Copy)]
#[error("invalid canonical profile encoding at byte {offset}")]
pub struct CanonicalError {
    pub offset: usize,
}

/// One of the 20 roster loci. Ordering is lexicographic on the name
/// (the roster array is pre-sorted, so index order is name order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocusName(u8);

impl LocusName {
    /// Look up a locus by name, case-insensitively (`vWA` and `VWA` match).
    pub fn parse(name: &str) -> Option<LocusName> {
        let upper = name.to_ascii_uppercase();
        ROSTER
            .iter()
            .position(|&r| r == upper)
            .map(|i| LocusName(i as u8))
    }

    pub fn as_str(&self) -> &'static str {
        ROSTER[self.0 as usize]
    }

    /// Position in the roster; also the profile storage index.
    pub fn index(&self) -> usize {
        self.0 as usize
    }

    /// All 20 loci in roster (lexicographic) order.
    pub fn all() -> impl Iterator<Item = LocusName> {
        (0..LOCUS_COUNT as u8).map(LocusName)
    }
}

impl fmt::Display for LocusName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocusName {
    type Err = CanonicalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LocusName::parse(s).ok_or(CanonicalError { offset: 0 })
    }
}

/// An STR allele in deci-repeats: allele 9.3 is stored as 93.
///
/// Valid range is 1..=999 (0 < repeats <= 99.9) and the fractional digit is
/// restricted to .0/.1/.2/.3, the microvariants that occur in practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allele(u16);

impl Allele {
    pub fn from_deci(deci: u16) -> Option<Allele> {
        if (1..=999).contains(&deci) && deci % 10 <= 3 {
            Some(Allele(deci))
        } else {
            None
        }
    }

    /// Deci-repeat value (allele 9.3 -> 93).
    pub fn deci(&self) -> u16 {
        self.0
    }

    /// Parse a decimal numeral with an optional single fractional digit.
    pub fn parse(s: &str) -> Option<Allele> {
        let (int_part, frac) = match s.split_once('.') {
            Some((i, f)) => {
                let mut fc = f.chars();
                let d = fc.next()?.to_digit(10)?;
                if fc.next().is_some() {
                    return None;
                }
                (i, d as u16)
            }
            None => (s, 0),
        };
        if int_part.is_empty() || int_part.len() > 2 || !int_part.bytes().all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let int: u16 = int_part.parse().ok()?;
        Allele::from_deci(int * 10 + frac)
    }
}

impl fmt::Display for Allele {
    /// Always one decimal digit: `6.0`, `9.3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

/// Unordered allele pair, stored sorted so `low <= high` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genotype {
    low: Allele,
    high: Allele,
}

impl Genotype {
    pub fn new(a: Allele, b: Allele) -> Genotype {
        if a <= b {
            Genotype { low: a, high: b }
        } else {
            Genotype { low: b, high: a }
        }
    }

    pub fn low(&self) -> Allele {
        self.low
    }

    pub fn high(&self) -> Allele {
        self.high
    }
}

/// A complete 20-locus STR profile, the identity-bearing object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrProfile {
    genotypes: [Genotype; LOCUS_COUNT],
}

impl StrProfile {
    /// Build from a locus -> genotype map; all 20 roster loci must be present.
    pub fn from_entries(entries: &BTreeMap<LocusName, Genotype>) -> Result<StrProfile, ProfileError> {
        let missing: Vec<LocusName> = LocusName::all()
            .filter(|l| !entries.contains_key(l))
            .collect();
        if !missing.is_empty() {
            return Err(ProfileError::MissingLocus(missing));
        }
        let mut genotypes = [Genotype::new(Allele(1), Allele(1)); LOCUS_COUNT];
        for (locus, geno) in entries {
            genotypes[locus.index()] = *geno;
        }
        Ok(StrProfile { genotypes })
    }

    pub(crate) fn from_genotypes(genotypes: [Genotype; LOCUS_COUNT]) -> StrProfile {
        StrProfile { genotypes }
    }

    pub fn genotype(&self, locus: LocusName) -> Genotype {
        self.genotypes[locus.index()]
    }

    /// Loci with genotypes, in roster order.
    pub fn entries(&self) -> impl Iterator<Item = (LocusName, Genotype)> + '_ {
        LocusName::all().map(|l| (l, self.genotypes[l.index()]))
    }

    /// The canonical byte encoding: `LOCUS=low/high;` per locus, loci in
    /// lexicographic order, alleles with exactly one decimal digit.
    /// Injective over valid profiles and independent of construction order.
    pub fn canonical_string(&self) -> String {
        let mut out = String::with_capacity(LOCUS_COUNT * 20);
        for (locus, geno) in self.entries() {
            out.push_str(locus.as_str());
            out.push('=');
            out.push_str(&geno.low().to_string());
            out.push('/');
            out.push_str(&geno.high().to_string());
            out.push(';');
        }
        out
    }

    /// Strict inverse of [`canonical_string`](Self::canonical_string): accepts
    /// exactly the canonical encoding and nothing else, so re-emission is
    /// byte-identical. Used when validating decrypted record frames.
    pub fn parse_canonical(bytes: &[u8]) -> Result<StrProfile, CanonicalError> {
        let mut pos = 0;
        let err = |pos: usize| CanonicalError { offset: pos };
        let mut genotypes = [Genotype::new(Allele(1), Allele(1)); LOCUS_COUNT];
        for locus in LocusName::all() {
            let name = locus.as_str().as_bytes();
            if bytes.len() < pos + name.len() || &bytes[pos..pos + name.len()] != name {
                return Err(err(pos));
            }
            pos += name.len();
            if bytes.get(pos) != Some(&b'=') {
                return Err(err(pos));
            }
            pos += 1;
            let low = Self::parse_canonical_allele(bytes, &mut pos)?;
            if bytes.get(pos) != Some(&b'/') {
                return Err(err(pos));
            }
            pos += 1;
            let high = Self::parse_canonical_allele(bytes, &mut pos)?;
            if low > high {
                return Err(err(pos));
            }
            if bytes.get(pos) != Some(&b';') {
                return Err(err(pos));
            }
            pos += 1;
            genotypes[locus.index()] = Genotype { low, high };
        }
        if pos != bytes.len() {
            return Err(err(pos));
        }
        Ok(StrProfile { genotypes })
    }

    // `D.F` or `DD.F`, no leading zero on a two-digit integer part.
    fn parse_canonical_allele(bytes: &[u8], pos: &mut usize) -> Result<Allele, CanonicalError> {
        let err = CanonicalError { offset: *pos };
        let d0 = *bytes.get(*pos).ok_or(err)?;
        if !d0.is_ascii_digit() {
            return Err(err);
        }
        *pos += 1;
        let mut int = (d0 - b'0') as u16;
        if bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
            if d0 == b'0' {
                return Err(err);
            }
            int = int * 10 + (bytes[*pos] - b'0') as u16;
            *pos += 1;
        }
        if bytes.get(*pos) != Some(&b'.') {
            return Err(CanonicalError { offset: *pos });
        }
        *pos += 1;
        let f = *bytes.get(*pos).ok_or(CanonicalError { offset: *pos })?;
        if !f.is_ascii_digit() {
            return Err(CanonicalError { offset: *pos });
        }
        *pos += 1;
        Allele::from_deci(int * 10 + (f - b'0') as u16).ok_or(CanonicalError { offset: *pos - 1 })
    }

    /// Profile with uniformly random alleles (deci-repeats 50..=299, any
    /// microvariant digit). Synthetic data for benchmarks and tests; real
    /// populations come from `population::sample_individual`.
    pub fn random_uniform<R: Rng + ?Sized>(rng: &mut R) -> StrProfile {
        let mut pick = |_: ()| {
            let deci = rng.gen_range(5..30) * 10 + rng.gen_range(0..4);
            Allele::from_deci(deci).expect("constructed in range")
        };
        let genotypes =
            std::array::from_fn(|_| Genotype::new(pick(()), pick(())));
        StrProfile { genotypes }
    }
}

/// Parse a profile file: one `LOCUS,allele1,allele2` record per line,
/// `#` comments and blank lines ignored, CRLF tolerated, line order free.
pub fn parse_profile(text: &str) -> Result<StrProfile, ProfileError> {
    let mut entries: BTreeMap<LocusName, Genotype> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(ProfileError::Syntax {
                line,
                fields: fields.len(),
            });
        }
        let locus = LocusName::parse(fields[0]).ok_or_else(|| ProfileError::UnknownLocus {
            line,
            name: fields[0].to_string(),
        })?;
        let allele = |s: &str| {
            Allele::parse(s).ok_or_else(|| ProfileError::MalformedAllele {
                line,
                value: s.to_string(),
            })
        };
        let (a, b) = (allele(fields[1])?, allele(fields[2])?);
        if entries.insert(locus, Genotype::new(a, b)).is_some() {
            return Err(ProfileError::DuplicateLocus { line, locus });
        }
    }
    StrProfile::from_entries(&entries)
}
