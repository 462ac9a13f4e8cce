//! Dense axis-aligned regions over a schema and exact region subtraction.
//!
//! A [`Region`] carries one constraint per schema attribute: an interval for
//! numeric attributes (already intersected with the domain) and a bitset over
//! the declared values for categorical ones. Satisfiability of a signed
//! conjunction reduces to "does the positive region survive removal of every
//! negative region", decided by recursive box subtraction.

use crate::schema::{Domain, Schema};

use super::Interval;

/// A subset of a categorical domain, stored as a bitset over value positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CatSet {
    words: Vec<u64>,
    size: usize,
}

impl CatSet {
    pub fn empty(size: usize) -> Self {
        CatSet { words: vec![0; size.div_ceil(64)], size }
    }

    pub fn full(size: usize) -> Self {
        let mut s = CatSet::empty(size);
        for i in 0..size {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.size && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn domain_size(&self) -> usize {
        self.size
    }

    pub fn intersect(&self, other: &CatSet) -> CatSet {
        CatSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(), size: self.size }
    }

    pub fn difference(&self, other: &CatSet) -> CatSet {
        CatSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(), size: self.size }
    }

    pub fn intersects(&self, other: &CatSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &CatSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).filter(|i| self.contains(*i))
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dim {
    Num(Interval),
    Cat(CatSet),
}

impl Dim {
    fn is_empty(&self) -> bool {
        match self {
            Dim::Num(i) => i.is_empty(),
            Dim::Cat(s) => s.is_empty(),
        }
    }

    fn intersect(&self, other: &Dim) -> Dim {
        match (self, other) {
            (Dim::Num(a), Dim::Num(b)) => Dim::Num(a.intersect(b)),
            (Dim::Cat(a), Dim::Cat(b)) => Dim::Cat(a.intersect(b)),
            _ => unreachable!("regions over different schemas"),
        }
    }

    fn intersects(&self, other: &Dim) -> bool {
        match (self, other) {
            (Dim::Num(a), Dim::Num(b)) => a.intersects(b),
            (Dim::Cat(a), Dim::Cat(b)) => a.intersects(b),
            _ => unreachable!("regions over different schemas"),
        }
    }

    fn is_within(&self, other: &Dim) -> bool {
        match (self, other) {
            (Dim::Num(a), Dim::Num(b)) => a.is_within(b),
            (Dim::Cat(a), Dim::Cat(b)) => a.is_subset(b),
            _ => unreachable!("regions over different schemas"),
        }
    }

    fn contains(&self, x: f64) -> bool {
        match self {
            Dim::Num(i) => i.contains(x),
            Dim::Cat(s) => x >= 0.0 && s.contains(x as usize),
        }
    }
}

/// An axis-aligned box over every attribute of a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    dims: Vec<Dim>,
}

impl Region {
    /// The whole domain of `schema`.
    pub fn domain(schema: &Schema) -> Region {
        Region {
            dims: schema
                .attributes()
                .iter()
                .map(|a| match &a.domain {
                    Domain::Numeric { lo, hi } => Dim::Num(Interval::closed(*lo, *hi)),
                    Domain::Categorical { values } => Dim::Cat(CatSet::full(values.len())),
                })
                .collect(),
        }
    }

    /// A region of `schema` containing no point.
    pub fn empty(schema: &Schema) -> Region {
        let mut r = Region::domain(schema);
        if let Some(d) = r.dims.first_mut() {
            *d = match d {
                Dim::Num(_) => Dim::Num(Interval::closed(1.0, 0.0)),
                Dim::Cat(s) => Dim::Cat(CatSet::empty(s.domain_size())),
            };
        }
        r
    }

    pub fn from_dims(dims: Vec<Dim>) -> Region {
        Region { dims }
    }

    pub fn dims(&self) -> &[Dim] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> &Dim {
        &self.dims[i]
    }

    pub(crate) fn set_dim(&mut self, i: usize, d: Dim) {
        self.dims[i] = d;
    }

    pub fn interval(&self, i: usize) -> Option<Interval> {
        match &self.dims[i] {
            Dim::Num(iv) => Some(*iv),
            Dim::Cat(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().any(Dim::is_empty)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region { dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.intersect(b)).collect() }
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.dims.iter().zip(&other.dims).all(|(a, b)| a.intersects(b))
    }

    pub fn is_within(&self, other: &Region) -> bool {
        self.is_empty() || self.dims.iter().zip(&other.dims).all(|(a, b)| a.is_within(b))
    }

    /// Membership of a point in the encoding of [`Schema::encode`].
    pub fn contains_encoded(&self, point: &[f64]) -> bool {
        self.dims.iter().zip(point).all(|(d, x)| d.contains(*x))
    }

    /// A point of a nonempty region in the encoding of [`Schema::encode`].
    pub fn representative(&self) -> Vec<f64> {
        self.dims
            .iter()
            .map(|d| match d {
                Dim::Num(i) => i.representative(),
                Dim::Cat(s) => s.first().map_or(f64::NAN, |v| v as f64),
            })
            .collect()
    }

    /// Disjoint pieces of `self` outside `other`. At most two pieces per
    /// numeric attribute and one per categorical attribute.
    pub fn subtract(&self, other: &Region) -> Vec<Region> {
        let mut pieces = Vec::new();
        if !self.intersects(other) {
            if !self.is_empty() {
                pieces.push(self.clone());
            }
            return pieces;
        }
        let mut core = self.clone();
        for (d, cut) in other.dims.iter().enumerate() {
            match (&core.dims[d], cut) {
                (Dim::Num(base), Dim::Num(cut)) => {
                    let (below, above, inside) = (base.below(cut), base.above(cut), base.intersect(cut));
                    for part in [below, above] {
                        if !part.is_empty() {
                            let mut piece = core.clone();
                            piece.dims[d] = Dim::Num(part);
                            pieces.push(piece);
                        }
                    }
                    core.dims[d] = Dim::Num(inside);
                }
                (Dim::Cat(base), Dim::Cat(cut)) => {
                    let outside = base.difference(cut);
                    if !outside.is_empty() {
                        let mut piece = core.clone();
                        piece.dims[d] = Dim::Cat(outside);
                        pieces.push(piece);
                    }
                    core.dims[d] = Dim::Cat(base.intersect(cut));
                }
                _ => unreachable!("regions over different schemas"),
            }
        }
        pieces
    }

    /// Bounding interval of a numeric attribute over a set of regions.
    pub fn hull(regions: &[Region], attr: usize) -> Option<Interval> {
        let mut acc: Option<Interval> = None;
        for r in regions {
            let Some(iv) = r.interval(attr) else { continue };
            acc = Some(match acc {
                None => iv,
                Some(a) => {
                    let (lo, lo_open) =
                        if iv.lo < a.lo || (iv.lo == a.lo && !iv.lo_open) { (iv.lo, iv.lo_open) } else { (a.lo, a.lo_open) };
                    let (hi, hi_open) =
                        if iv.hi > a.hi || (iv.hi == a.hi && !iv.hi_open) { (iv.hi, iv.hi_open) } else { (a.hi, a.hi_open) };
                    Interval { lo, hi, lo_open, hi_open }
                }
            });
        }
        acc
    }
}

/// Finds a piece of `base` that lies outside every region in `negatives`,
/// or `None` when the negatives cover `base`.
pub fn escape(base: &Region, negatives: &[&Region]) -> Option<Region> {
    if base.is_empty() {
        return None;
    }
    let mut out = Vec::new();
    residual(base, negatives, &mut out, true);
    out.pop()
}

/// All disjoint pieces of `base` minus the union of `negatives`.
pub fn residual_pieces(base: &Region, negatives: &[&Region]) -> Vec<Region> {
    let mut out = Vec::new();
    if !base.is_empty() {
        residual(base, negatives, &mut out, false);
    }
    out
}

/// Returns true when the search should stop (first piece found and only one
/// was requested).
fn residual(base: &Region, negatives: &[&Region], out: &mut Vec<Region>, first_only: bool) -> bool {
    let Some(pos) = negatives.iter().position(|n| n.intersects(base)) else {
        out.push(base.clone());
        return first_only;
    };
    let cut = negatives[pos];
    let rest = &negatives[pos + 1..];
    for piece in base.subtract(cut) {
        if residual(&piece, rest, out, first_only) {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Attribute;

    fn schema_1d() -> Schema {
        Schema::new(vec![Attribute::numeric("x", 0.0, 10.0)]).unwrap()
    }

    fn num(i: Interval) -> Region {
        Region::from_dims(vec![Dim::Num(i)])
    }

    #[test]
    fn subtract_pieces_are_disjoint_and_outside() {
        let base = Region::domain(&schema_1d());
        let cut = num(Interval::closed(2.0, 3.0));
        let pieces = base.subtract(&cut);
        assert_eq!(pieces.len(), 2);
        assert!(!pieces[0].intersects(&pieces[1]));
        assert!(pieces.iter().all(|p| !p.intersects(&cut)));
    }

    #[test]
    fn closed_cover_leaves_nothing() {
        let base = num(Interval::closed(0.0, 10.0));
        let a = num(Interval::closed(0.0, 4.0));
        let b = num(Interval::closed(4.0, 10.0));
        assert!(escape(&base, &[&a, &b]).is_none());
    }

    #[test]
    fn open_cover_leaves_the_gap_point() {
        let base = num(Interval::closed(0.0, 10.0));
        let a = num(Interval::right_open(0.0, 4.0));
        let b = num(Interval::new(4.0, 10.0, true, false));
        let piece = escape(&base, &[&a, &b]).expect("x = 4 survives");
        assert_eq!(piece.representative(), vec![4.0]);
    }

    #[test]
    fn categorical_complement() {
        let schema = Schema::new(vec![Attribute::categorical("b", ["A", "B", "C"])]).unwrap();
        let base = Region::domain(&schema);
        let mut ab = CatSet::empty(3);
        ab.insert(0);
        ab.insert(1);
        let cut = Region::from_dims(vec![Dim::Cat(ab)]);
        let piece = escape(&base, &[&cut]).unwrap();
        assert_eq!(piece.representative(), vec![2.0]);
    }

    #[test]
    fn hull_over_pieces() {
        let pieces = vec![num(Interval::right_open(0.0, 2.0)), num(Interval::closed(5.0, 7.0))];
        assert_eq!(Region::hull(&pieces, 0), Some(Interval::closed(0.0, 7.0)));
    }
}
