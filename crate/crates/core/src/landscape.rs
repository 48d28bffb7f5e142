//! Landscape geometry, patch environment, species traits and the
//! strategy-space orderings used to classify a pair of competitors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Patch boundaries `0 = x_0 < x_1 < ... < x_n = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape<T> {
    boundaries: Vec<T>,
}

impl<T: Scalar> Landscape<T> {
    pub fn new(boundaries: Vec<T>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::validation(
                "landscape.boundaries",
                "need at least two boundary points",
            ));
        }
        if boundaries[0] != T::zero() {
            return Err(Error::validation(
                "landscape.boundaries",
                "x_0 must be 0",
            ));
        }
        for (i, w) in boundaries.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::validation(
                    format!("landscape.boundaries[{}]", i + 1),
                    "boundaries must be finite and strictly increasing",
                ));
            }
        }
        Ok(Self { boundaries })
    }

    /// Patches of the given lengths laid end to end starting at 0.
    pub fn from_lengths(lengths: &[T]) -> Result<Self> {
        let mut b = Vec::with_capacity(lengths.len() + 1);
        let mut x = T::zero();
        b.push(x);
        for &l in lengths {
            x += l;
            b.push(x);
        }
        Self::new(b)
    }

    pub fn n(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn left(&self, patch: usize) -> T {
        self.boundaries[patch]
    }

    pub fn right(&self, patch: usize) -> T {
        self.boundaries[patch + 1]
    }

    pub fn patch_length(&self, patch: usize) -> T {
        self.boundaries[patch + 1] - self.boundaries[patch]
    }

    pub fn total_length(&self) -> T {
        self.boundaries[self.n()]
    }
}

/// Per-patch intrinsic growth rates and carrying capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEnvironment<T> {
    pub r: Vec<T>,
    pub k: Vec<T>,
}

impl<T: Scalar> PatchEnvironment<T> {
    pub fn new(r: Vec<T>, k: Vec<T>) -> Result<Self> {
        if r.len() != k.len() {
            return Err(Error::DimensionMismatch {
                what: "environment.k",
                expected: r.len(),
                got: k.len(),
            });
        }
        check_positive("environment.r", &r)?;
        check_positive("environment.k", &k)?;
        Ok(Self { r, k })
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn max_k(&self) -> T {
        self.k.iter().fold(T::zero(), |m, &x| m.max(x))
    }

    pub fn min_k(&self) -> T {
        self.k.iter().fold(T::infinity(), |m, &x| m.min(x))
    }
}

/// A positive vector indexed by interface: jump ratios `p`, `p̂` or the
/// ideal-free strategy `k̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyVector<T>(Vec<T>);

impl<T: Scalar> StrategyVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_positive("strategy", &values)?;
        Ok(Self(values))
    }

    /// Same value at every one of `len` interfaces.
    pub fn uniform(value: T, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cumulative products `P_i = Π_{j<i} p_j` for patches `0..=len`.
    pub fn cumulative(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        let mut acc = T::one();
        out.push(acc);
        for &p in &self.0 {
            acc *= p;
            out.push(acc);
        }
        out
    }
}

/// Diffusion rates and interface behaviour of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTraits<T> {
    pub d: Vec<T>,
    pub p: StrategyVector<T>,
}

impl<T: Scalar> SpeciesTraits<T> {
    /// Traits from explicit jump ratios.
    pub fn with_ratios(d: Vec<T>, p: Vec<T>) -> Result<Self> {
        check_positive("traits.d", &d)?;
        if d.is_empty() {
            return Err(Error::validation("traits.d", "empty diffusion vector"));
        }
        if p.len() + 1 != d.len() {
            return Err(Error::DimensionMismatch {
                what: "traits.p",
                expected: d.len() - 1,
                got: p.len(),
            });
        }
        let p = StrategyVector::new(p)?;
        Ok(Self { d, p })
    }

    /// Traits from interface preferences `alpha_i`.
    pub fn with_preferences(d: Vec<T>, alpha: &[T]) -> Result<Self> {
        let p = derive_jump_ratios(alpha, &d)?;
        Self::with_ratios(d, p.0)
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Recovers the preferences that generate the current jump ratios.
    pub fn preferences(&self) -> Vec<T> {
        recover_preferences(&self.p, &self.d)
    }

    pub fn check_dims(&self, n: usize, field: &'static str) -> Result<()> {
        if self.d.len() != n {
            return Err(Error::DimensionMismatch {
                what: field,
                expected: n,
                got: self.d.len(),
            });
        }
        Ok(())
    }
}

/// Everything that defines one competition problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionModel<T> {
    pub landscape: Landscape<T>,
    pub env: PatchEnvironment<T>,
    pub resident: SpeciesTraits<T>,
    pub mutant: SpeciesTraits<T>,
}

impl<T: Scalar> CompetitionModel<T> {
    pub fn new(
        landscape: Landscape<T>,
        env: PatchEnvironment<T>,
        resident: SpeciesTraits<T>,
        mutant: SpeciesTraits<T>,
    ) -> Result<Self> {
        let n = landscape.n();
        if env.n() != n {
            return Err(Error::DimensionMismatch {
                what: "environment",
                expected: n,
                got: env.n(),
            });
        }
        resident.check_dims(n, "resident.d")?;
        mutant.check_dims(n, "mutant.d")?;
        Ok(Self {
            landscape,
            env,
            resident,
            mutant,
        })
    }

    pub fn n(&self) -> usize {
        self.landscape.n()
    }

    /// The same problem with the roles of the two species exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            landscape: self.landscape.clone(),
            env: self.env.clone(),
            resident: self.mutant.clone(),
            mutant: self.resident.clone(),
        }
    }
}

/// Parameter region of a (resident, mutant) pair relative to the IFD strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    L1,
    L1Star,
    L2,
    L3,
    S1,
    S1Star,
    S2,
    S3,
    IfdResident,
    Unclassified,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::L1 => "L1",
            RegionLabel::L1Star => "L1star",
            RegionLabel::L2 => "L2",
            RegionLabel::L3 => "L3",
            RegionLabel::S1 => "S1",
            RegionLabel::S1Star => "S1star",
            RegionLabel::S2 => "S2",
            RegionLabel::S3 => "S3",
            RegionLabel::IfdResident => "IFDResident",
            RegionLabel::Unclassified => "Unclassified",
        }
    }

    pub fn is_large(self) -> bool {
        matches!(
            self,
            RegionLabel::L1 | RegionLabel::L1Star | RegionLabel::L2 | RegionLabel::L3
        )
    }

    pub fn is_small(self) -> bool {
        matches!(
            self,
            RegionLabel::S1 | RegionLabel::S1Star | RegionLabel::S2 | RegionLabel::S3
        )
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The ideal-free strategy `(k_2/k_1, ..., k_n/k_{n-1})`.
pub fn ifd_strategy<T: Scalar>(env: &PatchEnvironment<T>) -> Result<StrategyVector<T>> {
    if env.n() < 2 {
        return Err(Error::NoInterfaces);
    }
    StrategyVector::new(env.k.windows(2).map(|w| w[1] / w[0]).collect())
}

/// `p_i = alpha_i / (1 - alpha_i) * d_i / d_{i+1}`.
pub fn derive_jump_ratios<T: Scalar>(alpha: &[T], d: &[T]) -> Result<StrategyVector<T>> {
    if alpha.len() + 1 != d.len() {
        return Err(Error::DimensionMismatch {
            what: "traits.alpha",
            expected: d.len().saturating_sub(1),
            got: alpha.len(),
        });
    }
    check_positive("traits.d", d)?;
    for (i, &a) in alpha.iter().enumerate() {
        if !(a > T::zero() && a < T::one()) {
            return Err(Error::validation(
                format!("traits.alpha[{i}]"),
                "preference must lie strictly inside (0, 1)",
            ));
        }
    }
    StrategyVector::new(
        alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| a / (T::one() - a) * (d[i] / d[i + 1]))
            .collect(),
    )
}

/// Inverse of [`derive_jump_ratios`].
pub fn recover_preferences<T: Scalar>(p: &StrategyVector<T>, d: &[T]) -> Vec<T> {
    p.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            let odds = pi * d[i + 1] / d[i];
            odds / (T::one() + odds)
        })
        .collect()
}

fn same_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "strategy comparison",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// `a ≫ b`: every component strictly larger.
pub fn strict_dominates<T: Scalar>(a: &[T], b: &[T]) -> Result<bool> {
    same_len(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| x > y))
}

/// `a ≥ b` componentwise.
pub fn dominates<T: Scalar>(a: &[T], b: &[T]) -> Result<bool> {
    same_len(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| x >= y))
}

/// True when `a` and `b` lie strictly on opposite sides of `pivot`.
pub fn opposite_sides<T: Scalar>(a: &[T], b: &[T], pivot: &[T]) -> Result<bool> {
    Ok((strict_dominates(a, pivot)? && strict_dominates(pivot, b)?)
        || (strict_dominates(pivot, a)? && strict_dominates(b, pivot)?))
}

/// Assigns the region tag of a (resident, mutant) pair.
///
/// Exact comparisons only: a pair on any region boundary is `Unclassified`.
/// Where regions overlap the precedence is L3/S3, then the starred sets,
/// then L1/S1, then L2/S2.
pub fn classify_region<T: Scalar>(
    p: &[T],
    p_hat: &[T],
    d: &[T],
    d_hat: &[T],
    kbar: &[T],
) -> Result<RegionLabel> {
    same_len(p, p_hat)?;
    same_len(p, kbar)?;
    same_len(d, d_hat)?;
    if d.len() != p.len() + 1 {
        return Err(Error::DimensionMismatch {
            what: "diffusion vector",
            expected: p.len() + 1,
            got: d.len(),
        });
    }
    if p == kbar {
        return Ok(RegionLabel::IfdResident);
    }
    let d_ge = dominates(d, d_hat)?;
    let dhat_ge = dominates(d_hat, d)?;
    let label = if strict_dominates(p, kbar)? {
        if strict_dominates(kbar, p_hat)? {
            RegionLabel::L3
        } else if strict_dominates(p, p_hat)? && d_ge {
            if strict_dominates(p_hat, kbar)? {
                RegionLabel::L1Star
            } else {
                RegionLabel::L1
            }
        } else if strict_dominates(p_hat, p)? && dhat_ge {
            RegionLabel::L2
        } else {
            RegionLabel::Unclassified
        }
    } else if strict_dominates(kbar, p)? {
        if strict_dominates(p_hat, kbar)? {
            RegionLabel::S3
        } else if strict_dominates(p_hat, p)? && d_ge {
            if strict_dominates(kbar, p_hat)? {
                RegionLabel::S1Star
            } else {
                RegionLabel::S1
            }
        } else if strict_dominates(p, p_hat)? && dhat_ge {
            RegionLabel::S2
        } else {
            RegionLabel::Unclassified
        }
    } else {
        RegionLabel::Unclassified
    };
    Ok(label)
}

fn check_positive<T: Scalar>(field: &str, xs: &[T]) -> Result<()> {
    for (i, &x) in xs.iter().enumerate() {
        if !(x > T::zero()) || !x.is_finite() {
            return Err(Error::validation(
                format!("{field}[{i}]"),
                "must be finite and positive",
            ));
        }
    }
    Ok(())
}
