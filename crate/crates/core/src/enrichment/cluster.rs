//! Bottom-up agglomerative clustering over unit embeddings.

use serde::{Deserialize, Serialize};

use super::EnrichmentError;

/// Linkage values closer than this are treated as tied.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Mean pairwise cosine distance between members.
    #[default]
    Average,
    /// Ward's merge cost on unit vectors, `|A||B|/(|A|+|B|) · ‖c_A − c_B‖²`.
    /// For two singletons this is their cosine distance, so the same
    /// threshold scale applies.
    WardNormalizedEuclidean,
}

/// `1 − cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, EnrichmentError> {
    if u.len() != v.len() {
        return Err(EnrichmentError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EnrichmentError::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((1.0 - (dot / (nu * nv)).clamp(-1.0, 1.0)).clamp(0.0, 2.0))
}

struct Group {
    id: usize,
    members: Vec<usize>,
    centroid: Vec<f64>,
}

fn mean(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[members[0]].len();
    let mut c = vec![0.0; dim];
    for &m in members {
        for (ci, x) in c.iter_mut().zip(&points[m]) {
            *ci += x;
        }
    }
    let n = members.len() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Partitions `points` (indices `0..n`) into clusters.
///
/// At every step the pair with the smallest linkage is merged, as long as
/// that linkage does not exceed `threshold`. Pairs within [`TIE_EPSILON`]
/// of the minimum tie, and the lexicographically smallest `(id, id)` pair
/// wins. A cluster's id is its smallest member index. Clusters come back
/// sorted by id with members ascending.
pub fn agglomerate(
    points: &[Vec<f64>],
    threshold: f64,
    linkage: Linkage,
) -> Result<Vec<Vec<usize>>, EnrichmentError> {
    if points.is_empty() {
        return Err(EnrichmentError::EmptyInput);
    }
    if !(threshold > 0.0) {
        return Err(EnrichmentError::InvalidThreshold(threshold));
    }
    let n = points.len();
    let points: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                Err(EnrichmentError::ZeroVector)
            } else {
                Ok(unit(p))
            }
        })
        .collect::<Result<_, _>>()?;

    // pairwise distance sums between current groups, indexed by group slot
    let mut sums = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&points[i], &points[j])?;
            sums[i][j] = d;
            sums[j][i] = d;
        }
    }
    let mut groups: Vec<Option<Group>> = (0..n)
        .map(|i| {
            Some(Group {
                id: i,
                members: vec![i],
                centroid: points[i].clone(),
            })
        })
        .collect();

    let link = |a: &Group, b: &Group, sums: &Vec<Vec<f64>>| -> f64 {
        match linkage {
            Linkage::Average => sums[a.id][b.id] / (a.members.len() * b.members.len()) as f64,
            Linkage::WardNormalizedEuclidean => {
                let (na, nb) = (a.members.len() as f64, b.members.len() as f64);
                let sq: f64 = a
                    .centroid
                    .iter()
                    .zip(&b.centroid)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                na * nb / (na + nb) * sq
            }
        }
    };

    loop {
        let live: Vec<&Group> = groups.iter().flatten().collect();
        if live.len() < 2 {
            break;
        }
        let mut cands = Vec::new();
        for (x, a) in live.iter().enumerate() {
            for b in &live[x + 1..] {
                cands.push((link(a, b, &sums), a.id.min(b.id), a.id.max(b.id)));
            }
        }
        let min = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        if min > threshold {
            break;
        }
        let (_, keep, gone) = cands
            .into_iter()
            .filter(|c| c.0 <= min + TIE_EPSILON)
            .min_by_key(|c| (c.1, c.2))
            .expect("at least one candidate");

        let absorbed = groups[gone].take().expect("live group");
        for other in 0..n {
            if other != keep && other != gone {
                sums[keep][other] += sums[gone][other];
                sums[other][keep] = sums[keep][other];
            }
        }
        let g = groups[keep].as_mut().expect("live group");
        g.members.extend(absorbed.members);
        g.members.sort_unstable();
        g.centroid = mean(&points, &g.members);
    }
    Ok(groups.into_iter().flatten().map(|g| g.members).collect())
}
