use std::fmt;

use super::{Complex, TolerancePolicy};

/// Backward-error multiple of `eps * ||A||` assumed when grouping perturbed multiple eigenvalues.
const DEFECT_BACKWARD_FACTOR: f64 = 1e3;

/// Numerically multiple eigenvalue: `center` is the mean of the grouped values.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub center: Complex,
    /// Indices into the spectrum.
    pub members: Vec<usize>,
    /// Largest distance from a member to the center.
    pub spread: f64,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// Multiset of eigenvalues.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum {
    values: Vec<Complex>,
}

impl Spectrum {
    pub fn new(values: Vec<Complex>) -> Self {
        Self { values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| Complex::new(v, 0.0)).collect())
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values sorted by real part, then imaginary part.
    pub fn sorted(&self) -> Self {
        let mut values = self.values.clone();
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Self { values }
    }

    pub fn max_real_part(&self) -> Option<f64> {
        self.values.iter().map(|v| v.re).reduce(f64::max)
    }

    /// Every non-real value has a partner within `tol` of its conjugate.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        self.first_unpaired(tol).is_none()
    }

    pub(crate) fn first_unpaired(&self, tol: f64) -> Option<Complex> {
        let mut used = vec![false; self.values.len()];
        for i in 0..self.values.len() {
            if used[i] {
                continue;
            }
            let v = self.values[i];
            if v.im.abs() <= tol {
                used[i] = true;
                continue;
            }
            let partner = (0..self.values.len())
                .filter(|&j| j != i && !used[j])
                .min_by(|&a, &b| {
                    (self.values[a] - v.conj())
                        .norm()
                        .total_cmp(&(self.values[b] - v.conj()).norm())
                });
            match partner {
                Some(j) if (self.values[j] - v.conj()).norm() <= tol => {
                    used[i] = true;
                    used[j] = true;
                }
                _ => return Some(v),
            }
        }
        None
    }

    /// Largest matched distance when every value of `sub` is paired with a
    /// distinct value of `self` (greedy on globally sorted distances).
    /// `None` if `sub` has more values than `self`.
    pub fn containment_error(&self, sub: &Spectrum) -> Option<f64> {
        if sub.len() > self.len() {
            return None;
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(sub.len() * self.len());
        for (i, a) in sub.values.iter().enumerate() {
            for (j, b) in self.values.iter().enumerate() {
                pairs.push(((a - b).norm(), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut sub_used = vec![false; sub.len()];
        let mut self_used = vec![false; self.len()];
        let mut worst: f64 = 0.0;
        let mut matched = 0;
        for (d, i, j) in pairs {
            if sub_used[i] || self_used[j] {
                continue;
            }
            sub_used[i] = true;
            self_used[j] = true;
            worst = worst.max(d);
            matched += 1;
            if matched == sub.len() {
                break;
            }
        }
        Some(worst)
    }

    /// `sub` is a sub-multiset of `self` within `tol`.
    pub fn contains(&self, sub: &Spectrum, tol: f64) -> bool {
        self.containment_error(sub).is_some_and(|e| e <= tol)
    }

    /// Same multiset within `tol`.
    pub fn matches(&self, other: &Spectrum, tol: f64) -> bool {
        self.len() == other.len() && self.contains(other, tol)
    }

    /// Multiset union.
    pub fn union(&self, other: &Spectrum) -> Spectrum {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Spectrum { values }
    }

    /// Group numerically multiple eigenvalues of a matrix with norm `scale`.
    ///
    /// A `k`-fold defective eigenvalue perturbed by a backward error `δ` splits
    /// into values about `δ^(1/k)` apart, so for `k = n, ..., 2` any single-linkage
    /// group of at least `k` values within `max(match radius, (1e3 eps scale)^(1/k))`
    /// is taken as one eigenvalue. Remaining values are grouped at the match radius.
    pub fn clusters(&self, scale: f64, tol: &TolerancePolicy) -> Vec<EigenCluster> {
        let n = self.values.len();
        let mut assigned = vec![false; n];
        let mut out = Vec::new();
        let backward = DEFECT_BACKWARD_FACTOR * f64::EPSILON * scale.max(1.0);
        for k in (1..=n).rev() {
            let root = if k == 1 { 0.0 } else { backward.powf(1.0 / k as f64) };
            let free: Vec<usize> = (0..n).filter(|&i| !assigned[i]).collect();
            for group in self.linkage(&free, |v| root.max(tol.eigen_match_tol * v.norm().max(1.0))) {
                if group.len() >= k {
                    for &i in &group {
                        assigned[i] = true;
                    }
                    out.push(self.cluster_of(group));
                }
            }
        }
        out
    }

    /// Single-linkage components of `idx` where `radius(v)` bounds the link length at `v`.
    fn linkage(&self, idx: &[usize], radius: impl Fn(Complex) -> f64) -> Vec<Vec<usize>> {
        let mut comp: Vec<usize> = (0..idx.len()).collect();
        fn find(comp: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while comp[r] != r {
                r = comp[r];
            }
            comp[i] = r;
            r
        }
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                let (va, vb) = (self.values[idx[a]], self.values[idx[b]]);
                if (va - vb).norm() <= radius(va).max(radius(vb)) {
                    let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                    comp[ra] = rb;
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut label: Vec<Option<usize>> = vec![None; idx.len()];
        for a in 0..idx.len() {
            let r = find(&mut comp, a);
            match label[r] {
                Some(g) => groups[g].push(idx[a]),
                None => {
                    label[r] = Some(groups.len());
                    groups.push(vec![idx[a]]);
                }
            }
        }
        groups
    }

    fn cluster_of(&self, members: Vec<usize>) -> EigenCluster {
        let sum: Complex = members.iter().map(|&i| self.values[i]).sum();
        let mut center = sum / members.len() as f64;
        let spread = members.iter().map(|&i| (self.values[i] - center).norm()).fold(0.0, f64::max);
        // a group that contains its own conjugate sits on the real axis
        if center.im.abs() <= spread {
            center.im = 0.0;
        }
        EigenCluster { center, members, spread }
    }

    /// `[re, im]` pairs, sorted.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.sorted().values.iter().map(|v| [v.re, v.im]).collect()
    }
}

/// Serialized as a list of `[re, im]` pairs in stored order.
impl serde::Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.values.len()))?;
        for v in &self.values {
            seq.serialize_element(&[v.re, v.im])?;
        }
        seq.end()
    }
}

impl<'de> serde::Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs: Vec<[f64; 2]> = serde::Deserialize::deserialize(deserializer)?;
        Ok(Self::new(pairs.iter().map(|p| Complex::new(p[0], p[1])).collect()))
    }
}

impl From<Vec<Complex>> for Spectrum {
    fn from(values: Vec<Complex>) -> Self {
        Self::new(values)
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.sorted().values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if v.im == 0.0 {
                write!(f, "{}", v.re)?;
            } else {
                write!(f, "{}{:+}i", v.re, v.im)?;
            }
        }
        write!(f, "}}")
    }
}
