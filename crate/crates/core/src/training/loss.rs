//! Distances, triplet classification, semi-hard mining and the combined
//! bidirectional triplet loss with its gradient.

use serde::{Deserialize, Serialize};

use super::TrainingError;
use crate::encoders::Real;

/// `d(text_i, shape_j)` for a paired batch, rows are texts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> DistanceMatrix<T> {
    pub fn get(&self, text: usize, shape: usize) -> T {
        self.data[text * self.n + shape]
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        Self { n, data: (0..n * n).map(|k| self.data[(k % n) * n + k / n]).collect() }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "distance matrix must be square");
        Self { n, data: rows.concat() }
    }
}

fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Euclidean distances between every text and every shape embedding.
pub fn pairwise_distances<T: Real>(texts: &[Vec<T>], shapes: &[Vec<T>]) -> Result<DistanceMatrix<T>, TrainingError> {
    if texts.len() != shapes.len() {
        return Err(TrainingError::Dimension(format!("{} texts but {} shapes", texts.len(), shapes.len())));
    }
    let dim = texts.first().map_or(0, Vec::len);
    if texts.iter().chain(shapes).any(|e| e.len() != dim) {
        return Err(TrainingError::Dimension("embeddings differ in width".into()));
    }
    let n = texts.len();
    let mut data = Vec::with_capacity(n * n);
    for t in texts {
        data.extend(shapes.iter().map(|s| euclidean(t, s)));
    }
    Ok(DistanceMatrix { n, data })
}

/// `max(d_ap − d_an + margin, 0)`.
pub fn triplet_loss<T: Real>(d_ap: T, d_an: T, margin: T) -> T {
    (d_ap - d_an + margin).max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletClass {
    Easy,
    Hard,
    SemiHard,
}

/// `d_an ≤ d_ap` is hard, `d_an ≥ d_ap + margin` is easy, anything strictly
/// between is semi-hard.
pub fn classify_triplet<T: Real>(d_ap: T, d_an: T, margin: T) -> TripletClass {
    if d_an <= d_ap {
        TripletClass::Hard
    } else if d_an < d_ap + margin {
        TripletClass::SemiHard
    } else {
        TripletClass::Easy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Text anchors, shape positives and negatives.
    TextToShape,
    /// Shape anchors, text positives and negatives.
    ShapeToText,
}

/// Batch indices of one mined triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub direction: Direction,
    pub class: TripletClass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
}

impl TripletSet {
    pub fn in_direction(&self, direction: Direction) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter().filter(move |t| t.direction == direction)
    }
}

/// Per anchor and direction: the semi-hard negative with the smallest
/// `d_an`, else the overall smallest `d_an`; ties go to the lower index.
/// Negatives are batch members whose id differs from the anchor's.
pub fn mine_semihard<T: Real, S: AsRef<str>>(dists: &DistanceMatrix<T>, ids: &[S], margin: T) -> Result<TripletSet, TrainingError> {
    let n = dists.n;
    if ids.len() != n {
        return Err(TrainingError::Dimension(format!("{} ids for a {n}×{n} distance matrix", ids.len())));
    }
    if n < 2 {
        return Err(TrainingError::NoNegatives(n));
    }
    let mut triplets = Vec::with_capacity(2 * n);
    for direction in [Direction::TextToShape, Direction::ShapeToText] {
        let d = |anchor: usize, other: usize| match direction {
            Direction::TextToShape => dists.get(anchor, other),
            Direction::ShapeToText => dists.get(other, anchor),
        };
        for a in 0..n {
            let d_ap = d(a, a);
            let mut semi: Option<(T, usize)> = None;
            let mut hardest: Option<(T, usize)> = None;
            for j in (0..n).filter(|&j| ids[j].as_ref() != ids[a].as_ref()) {
                let d_an = d(a, j);
                if hardest.is_none_or(|(best, _)| d_an < best) {
                    hardest = Some((d_an, j));
                }
                if classify_triplet(d_ap, d_an, margin) == TripletClass::SemiHard && semi.is_none_or(|(best, _)| d_an < best) {
                    semi = Some((d_an, j));
                }
            }
            if let Some((d_an, negative)) = semi.or(hardest) {
                triplets.push(Triplet { anchor: a, positive: a, negative, direction, class: classify_triplet(d_ap, d_an, margin) });
            }
        }
    }
    if triplets.is_empty() {
        return Err(TrainingError::NoNegatives(n));
    }
    Ok(TripletSet { triplets })
}

/// Loss terms of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub t2s: T,
    pub s2t: T,
    pub total: T,
}

/// Loss plus its gradient with respect to every embedding.
#[derive(Debug, Clone)]
pub struct LossGrad<T> {
    pub loss: LossBreakdown<T>,
    pub triplets: TripletSet,
    pub d_text: Vec<Vec<T>>,
    pub d_shape: Vec<Vec<T>>,
}

/// Adds `scale · ∂‖x − y‖/∂(x, y)` into `gx` and `gy`.
fn add_distance_grad<T: Real>(x: &[T], y: &[T], dist: T, scale: T, gx: &mut [T], gy: &mut [T]) {
    if dist <= T::zero() {
        return;
    }
    let s = scale / dist;
    for k in 0..x.len() {
        let g = (x[k] - y[k]) * s;
        gx[k] += g;
        gy[k] -= g;
    }
}

fn mean<T: Real>(values: impl Iterator<Item = T>) -> T {
    let (sum, count) = values.fold((T::zero(), 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        T::zero()
    } else {
        sum / T::of(count as f64)
    }
}

/// `Loss_t2s + μ·Loss_s2t` with each term the mean hinge over its mined
/// triplets, and the gradient with respect to the embeddings.
pub fn combined_loss_grad<T: Real, S: AsRef<str>>(
    texts: &[Vec<T>],
    shapes: &[Vec<T>],
    ids: &[S],
    margin: T,
    mu: T,
) -> Result<LossGrad<T>, TrainingError> {
    let dists = pairwise_distances(texts, shapes)?;
    let triplets = mine_semihard(&dists, ids, margin)?;
    let dim = texts[0].len();
    let mut d_text = vec![vec![T::zero(); dim]; texts.len()];
    let mut d_shape = vec![vec![T::zero(); dim]; shapes.len()];
    let mut terms = [T::zero(), T::zero()];
    for (slot, direction, weight) in [(0, Direction::TextToShape, T::one()), (1, Direction::ShapeToText, mu)] {
        let count = triplets.in_direction(direction).count();
        if count == 0 {
            continue;
        }
        let per = weight / T::of(count as f64);
        let d = |a: usize, o: usize| match direction {
            Direction::TextToShape => dists.get(a, o),
            Direction::ShapeToText => dists.get(o, a),
        };
        terms[slot] = mean(triplets.in_direction(direction).map(|t| triplet_loss(d(t.anchor, t.positive), d(t.anchor, t.negative), margin)));
        for t in triplets.in_direction(direction) {
            let (d_ap, d_an) = (d(t.anchor, t.positive), d(t.anchor, t.negative));
            if triplet_loss(d_ap, d_an, margin) <= T::zero() {
                continue;
            }
            match direction {
                Direction::TextToShape => {
                    let (a, p, n) = (t.anchor, t.positive, t.negative);
                    let mut ga = d_text[a].clone();
                    add_distance_grad(&texts[a], &shapes[p], d_ap, per, &mut ga, &mut d_shape[p]);
                    add_distance_grad(&texts[a], &shapes[n], d_an, -per, &mut ga, &mut d_shape[n]);
                    d_text[a] = ga;
                }
                Direction::ShapeToText => {
                    let (a, p, n) = (t.anchor, t.positive, t.negative);
                    let mut ga = d_shape[a].clone();
                    add_distance_grad(&shapes[a], &texts[p], d_ap, per, &mut ga, &mut d_text[p]);
                    add_distance_grad(&shapes[a], &texts[n], d_an, -per, &mut ga, &mut d_text[n]);
                    d_shape[a] = ga;
                }
            }
        }
    }
    let loss = LossBreakdown { t2s: terms[0], s2t: terms[1], total: terms[0] + mu * terms[1] };
    Ok(LossGrad { loss, triplets, d_text, d_shape })
}

/// Loss value only.
pub fn combined_loss<T: Real, S: AsRef<str>>(
    texts: &[Vec<T>],
    shapes: &[Vec<T>],
    ids: &[S],
    margin: T,
    mu: T,
) -> Result<LossBreakdown<T>, TrainingError> {
    combined_loss_grad(texts, shapes, ids, margin, mu).map(|g| g.loss)
}
