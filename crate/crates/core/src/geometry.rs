//! Closed intervals, axis-aligned hyper-boxes, finite box unions and the
//! uniform grid partitioning that every other module builds on.
//!
//! All sets are closed: boxes that share a face or a corner intersect.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ReachError, Result};

/// A closed interval `[lo, hi]` with finite endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(ReachError::InvalidInterval { lo, hi })
        }
    }

    /// Degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Result<Self> {
        Self::new(x, x)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Distance from `x` to the nearest point of the interval.
    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Widens both ends by `eps >= 0`.
    pub fn inflate(&self, eps: f64) -> Result<Interval> {
        Interval::new(self.lo - eps, self.hi + eps)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = ReachError;

    fn try_from(value: [f64; 2]) -> Result<Self> {
        Interval::new(value[0], value[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(value: Interval) -> Self {
        [value.lo, value.hi]
    }
}

/// Axis-aligned box `I_1 x ... x I_n` with `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct HyperBox {
    dims: Vec<Interval>,
}

impl HyperBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self> {
        if dims.is_empty() {
            return Err(ReachError::InvalidArgument(
                "a box needs at least one dimension".into(),
            ));
        }
        Ok(Self { dims })
    }

    /// Builds a box from lower and upper corner vectors.
    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        check_dim("box corners", lower.len(), upper.len())?;
        let dims = lower
            .iter()
            .zip(upper)
            .map(|(&lo, &hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn point(x: &[f64]) -> Result<Self> {
        Self::from_bounds(x, x)
    }

    /// The sup-norm ball `{x : ||x - center||_inf <= radius}`.
    pub fn cube(center: &[f64], radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(ReachError::InvalidArgument(format!(
                "cube radius must be non-negative, got {radius}"
            )));
        }
        let dims = center
            .iter()
            .map(|&c| Interval::new(c - radius, c + radius))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn intervals(&self) -> &[Interval] {
        &self.dims
    }

    #[inline]
    pub fn interval(&self, i: usize) -> Interval {
        self.dims[i]
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::hi).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::midpoint).collect()
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().map(Interval::width).product()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.dims.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    pub fn contains_box(&self, other: &HyperBox) -> bool {
        other.dim() == self.dim()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.contains_interval(b))
    }

    /// Euclidean distance from `x` to the nearest point of the box.
    pub fn distance_to_point(&self, x: &[f64]) -> Result<f64> {
        check_dim("point-to-box distance", self.dim(), x.len())?;
        let sq: f64 = self
            .dims
            .iter()
            .zip(x)
            .map(|(iv, &v)| iv.distance_to(v).powi(2))
            .sum();
        Ok(sq.sqrt())
    }

    /// Widens every side by `eps`; `eps == 0` returns an identical box.
    pub fn inflate(&self, eps: f64) -> Result<HyperBox> {
        if eps == 0.0 {
            return Ok(self.clone());
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ReachError::InvalidArgument(format!(
                "padding must be finite and non-negative, got {eps}"
            )));
        }
        let dims = self
            .dims
            .iter()
            .map(|iv| iv.inflate(eps))
            .collect::<Result<Vec<_>>>()?;
        Ok(HyperBox { dims })
    }

    fn with_interval(&self, i: usize, iv: Interval) -> HyperBox {
        let mut dims = self.dims.clone();
        dims[i] = iv;
        HyperBox { dims }
    }
}

impl TryFrom<Vec<Interval>> for HyperBox {
    type Error = ReachError;

    fn try_from(value: Vec<Interval>) -> Result<Self> {
        HyperBox::new(value)
    }
}

impl From<HyperBox> for Vec<Interval> {
    fn from(value: HyperBox) -> Self {
        value.dims
    }
}

/// Finite union of equal-dimension boxes, optionally tagged with the index
/// of the partition cell each box was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxUnion {
    dim: usize,
    boxes: Vec<HyperBox>,
    sources: Option<Vec<usize>>,
}

impl BoxUnion {
    pub fn new(boxes: Vec<HyperBox>) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or(ReachError::EmptySet("a box union needs at least one box"))?;
        let dim = first.dim();
        for b in &boxes {
            check_dim("box union", dim, b.dim())?;
        }
        Ok(Self {
            dim,
            boxes,
            sources: None,
        })
    }

    /// The empty set in `dim` dimensions.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            boxes: Vec::new(),
            sources: None,
        }
    }

    pub fn singleton(b: HyperBox) -> Self {
        Self {
            dim: b.dim(),
            boxes: vec![b],
            sources: None,
        }
    }

    /// Builds a union where `boxes[k]` came from partition cell `sources[k]`.
    pub fn with_sources(boxes: Vec<HyperBox>, sources: Vec<usize>) -> Result<Self> {
        check_dim("box union source tags", boxes.len(), sources.len())?;
        let mut u = Self::new(boxes)?;
        u.sources = Some(sources);
        Ok(u)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[HyperBox] {
        &self.boxes
    }

    pub fn sources(&self) -> Option<&[usize]> {
        self.sources.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HyperBox> {
        self.boxes.iter()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains_point(x))
    }

    pub fn intersects_box(&self, b: &HyperBox) -> bool {
        self.boxes.iter().any(|own| own.dim() == b.dim() && overlap(own, b))
    }

    /// Exact test of `target ⊆ ⋃ boxes`, by repeatedly subtracting each
    /// member box from the still-uncovered pieces of `target`.
    pub fn covers(&self, target: &HyperBox) -> bool {
        if target.dim() != self.dim {
            return false;
        }
        let mut uncovered = vec![target.clone()];
        for b in &self.boxes {
            let mut next = Vec::with_capacity(uncovered.len());
            for piece in uncovered {
                subtract_into(&piece, b, &mut next);
            }
            uncovered = next;
            if uncovered.is_empty() {
                return true;
            }
        }
        false
    }

    /// Pads every member box by `eps`, keeping source tags.
    pub fn inflate(&self, eps: f64) -> Result<BoxUnion> {
        let boxes = self
            .boxes
            .iter()
            .map(|b| b.inflate(eps))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoxUnion {
            dim: self.dim,
            boxes,
            sources: self.sources.clone(),
        })
    }
}

/// Appends the closure of `piece \ cut` to `out` as a list of boxes.
fn subtract_into(piece: &HyperBox, cut: &HyperBox, out: &mut Vec<HyperBox>) {
    if !overlap(piece, cut) {
        out.push(piece.clone());
        return;
    }
    let mut rest = piece.clone();
    for i in 0..rest.dim() {
        let r = rest.dims[i];
        let c = cut.dims[i];
        if r.lo < c.lo {
            out.push(rest.with_interval(i, Interval { lo: r.lo, hi: c.lo }));
            rest.dims[i].lo = c.lo;
        }
        if r.hi > c.hi {
            out.push(rest.with_interval(i, Interval { lo: c.hi, hi: r.hi }));
            rest.dims[i].hi = c.hi;
        }
    }
}

fn overlap(a: &HyperBox, b: &HyperBox) -> bool {
    a.dims.iter().zip(&b.dims).all(|(x, y)| x.intersects(y))
}

/// Number of equal segments per dimension used to grid a box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PartitionSpec {
    counts: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(ReachError::InvalidArgument(
                "partition needs at least one segment count".into(),
            ));
        }
        if let Some(bad) = counts.iter().position(|&m| m < 1) {
            return Err(ReachError::InvalidArgument(format!(
                "segment count for dimension {bad} must be >= 1"
            )));
        }
        let spec = Self { counts };
        spec.cell_count()?;
        Ok(spec)
    }

    /// Same count `m` in each of `dim` dimensions.
    pub fn uniform(dim: usize, m: usize) -> Result<Self> {
        Self::new(vec![m; dim])
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn cell_count(&self) -> Result<usize> {
        self.counts
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| ReachError::InvalidArgument("partition has too many cells".into()))
    }

    /// Lexicographic multi-index of cell `id`; the first dimension varies slowest.
    pub fn multi_index(&self, mut id: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for (slot, &m) in idx.iter_mut().zip(&self.counts).rev() {
            *slot = id % m;
            id /= m;
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&k, &m)| acc * m + k)
    }

    /// Cell `id` of the grid laid over `bounding`.
    pub fn cell(&self, bounding: &HyperBox, id: usize) -> Result<HyperBox> {
        check_dim("partition cell", self.dim(), bounding.dim())?;
        let idx = self.multi_index(id);
        let dims = bounding
            .dims
            .iter()
            .zip(&self.counts)
            .zip(&idx)
            .map(|((iv, &m), &k)| Interval {
                lo: grid_point(iv, k, m),
                hi: grid_point(iv, k + 1, m),
            })
            .collect();
        Ok(HyperBox { dims })
    }
}

impl TryFrom<Vec<usize>> for PartitionSpec {
    type Error = ReachError;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        PartitionSpec::new(value)
    }
}

impl From<PartitionSpec> for Vec<usize> {
    fn from(value: PartitionSpec) -> Self {
        value.counts
    }
}

/// Boundary `j` of `m` equal segments of `iv`.
///
/// The fraction `j / m` is rounded once, so boundaries of nested grids
/// (`m' = k m`, `j' = k j`) coincide bit for bit. The last boundary is
/// pinned to `hi`.
fn grid_point(iv: &Interval, j: usize, m: usize) -> f64 {
    if j == 0 {
        iv.lo
    } else if j >= m {
        iv.hi
    } else {
        let frac = j as f64 / m as f64;
        (iv.lo + (iv.hi - iv.lo) * frac).min(iv.hi)
    }
}

/// Splits `h` into `prod M_i` cells on a uniform grid, in lexicographic order.
pub fn partition_box(h: &HyperBox, m: &PartitionSpec) -> Result<BoxUnion> {
    check_dim("partition_box", h.dim(), m.dim())?;
    let total = m.cell_count()?;
    let boundaries: Vec<Vec<f64>> = h
        .dims
        .iter()
        .zip(&m.counts)
        .map(|(iv, &count)| (0..=count).map(|j| grid_point(iv, j, count)).collect())
        .collect();
    let mut boxes = Vec::with_capacity(total);
    for id in 0..total {
        let idx = m.multi_index(id);
        let dims = idx
            .iter()
            .zip(&boundaries)
            .map(|(&k, b)| Interval {
                lo: b[k],
                hi: b[k + 1],
            })
            .collect();
        boxes.push(HyperBox { dims });
    }
    BoxUnion::with_sources(boxes, (0..total).collect())
}

/// Grids `bounding` and keeps only the cells that meet some box of `h`.
/// Source tags are the cell indices in the full grid.
pub fn partition_union(h: &BoxUnion, bounding: &HyperBox, m: &PartitionSpec) -> Result<BoxUnion> {
    if h.is_empty() {
        return Err(ReachError::EmptySet("cannot partition an empty union"));
    }
    check_dim("partition_union", bounding.dim(), h.dim())?;
    if let Some(k) = h.iter().position(|b| !bounding.contains_box(b)) {
        return Err(ReachError::InvalidArgument(format!(
            "box {k} of the input union is not inside the bounding box"
        )));
    }
    let grid = partition_box(bounding, m)?;
    let (boxes, sources): (Vec<_>, Vec<_>) = grid
        .boxes
        .into_iter()
        .enumerate()
        .filter(|(_, cell)| h.intersects_box(cell))
        .map(|(id, cell)| (cell, id))
        .unzip();
    BoxUnion::with_sources(boxes, sources)
}

/// Closed-set intersection test.
pub fn boxes_intersect(a: &HyperBox, b: &HyperBox) -> Result<bool> {
    check_dim("boxes_intersect", a.dim(), b.dim())?;
    Ok(overlap(a, b))
}

/// Smallest box containing every member of `u`.
pub fn interval_hull(u: &BoxUnion) -> Result<HyperBox> {
    let mut it = u.boxes.iter();
    let first = it
        .next()
        .ok_or(ReachError::EmptySet("interval hull of an empty union"))?;
    let mut dims = first.dims.clone();
    for b in it {
        for (acc, iv) in dims.iter_mut().zip(&b.dims) {
            *acc = acc.hull(iv);
        }
    }
    Ok(HyperBox { dims })
}

/// Stacks `a`'s intervals followed by `b`'s.
pub fn cartesian_product(a: &HyperBox, b: &HyperBox) -> HyperBox {
    let mut dims = Vec::with_capacity(a.dim() + b.dim());
    dims.extend_from_slice(&a.dims);
    dims.extend_from_slice(&b.dims);
    HyperBox { dims }
}

/// Largest Euclidean distance from a sample to the nearest box of
/// `estimate`. Zero when every sample is covered. A tightness diagnostic,
/// not a soundness check.
pub fn sampled_hausdorff_gap(estimate: &BoxUnion, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(ReachError::InvalidArgument("no sample points given".into()));
    }
    if estimate.is_empty() {
        return Err(ReachError::EmptySet("distance to an empty union"));
    }
    let mut gap = 0.0f64;
    for s in samples {
        check_dim("sampled_hausdorff_gap", estimate.dim(), s.len())?;
        let mut nearest = f64::INFINITY;
        for b in estimate.iter() {
            nearest = nearest.min(b.distance_to_point(s)?);
        }
        gap = gap.max(nearest);
    }
    Ok(gap)
}
