use super::{Dim, Region};

/// Candidate coordinates along one attribute.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxis {
    /// Sorted distinct endpoints, and representatives: every endpoint plus
    /// the midpoint of each pair of consecutive endpoints.
    Numeric { cuts: Vec<f64>, representatives: Vec<f64> },
    /// Value positions of the categorical domain.
    Categorical { values: Vec<usize> },
}

impl GridAxis {
    pub fn representatives(&self) -> Vec<f64> {
        match self {
            GridAxis::Numeric { representatives, .. } => representatives.clone(),
            GridAxis::Categorical { values } => values.iter().map(|v| *v as f64).collect(),
        }
    }
}

/// Endpoint grid of a set of regions over a common schema. For axis-aligned
/// boxes every sign pattern that is realisable at all is realised at one of
/// the grid's representative points.
pub fn endpoint_grid(boxes: &[Region]) -> Vec<GridAxis> {
    let Some(first) = boxes.first() else {
        return Vec::new();
    };
    (0..first.dims().len())
        .map(|d| match first.dim(d) {
            Dim::Num(_) => {
                let mut cuts: Vec<f64> = boxes
                    .iter()
                    .filter_map(|b| b.interval(d))
                    .filter(|i| !i.is_empty())
                    .flat_map(|i| [i.lo, i.hi])
                    .filter(|x| x.is_finite())
                    .collect();
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut representatives = Vec::with_capacity(cuts.len() * 2);
                for (k, c) in cuts.iter().enumerate() {
                    if k > 0 {
                        representatives.push(cuts[k - 1] / 2.0 + c / 2.0);
                    }
                    representatives.push(*c);
                }
                GridAxis::Numeric { cuts, representatives }
            }
            Dim::Cat(s) => GridAxis::Categorical { values: (0..s.domain_size()).collect() },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::Interval;

    fn b(lo: f64, hi: f64) -> Region {
        Region::from_dims(vec![Dim::Num(Interval::closed(lo, hi))])
    }

    #[test]
    fn midpoint_construction() {
        let g = endpoint_grid(&[b(0.0, 2.0), b(1.0, 3.0)]);
        assert_eq!(g, vec![GridAxis::Numeric { cuts: vec![0.0, 1.0, 2.0, 3.0], representatives: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] }]);
    }

    #[test]
    fn degenerate_box() {
        let g = endpoint_grid(&[b(5.0, 5.0)]);
        assert_eq!(g, vec![GridAxis::Numeric { cuts: vec![5.0], representatives: vec![5.0] }]);
    }

    #[test]
    fn no_boxes_no_grid() {
        assert!(endpoint_grid(&[]).is_empty());
    }
}
