//! Elastic moment tensors `M^j_{alpha beta}(B)` from transmission solves with
//! monomial sources `x^alpha e_j`, `|alpha| in {1, 2}`, `1 <= |beta| <= 3 - |alpha|`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::freespace::{BackgroundField, TransmissionOperator};
use crate::geometry::{BoundaryGrid, Point};
use crate::material::ContrastPair;
use crate::potentials::Density;

/// `(alpha_1, alpha_2)`.
pub type MultiIndex = [usize; 2];

pub fn order(alpha: MultiIndex) -> usize {
    alpha[0] + alpha[1]
}

/// `alpha! = alpha_1! alpha_2!`.
pub fn factorial(alpha: MultiIndex) -> f64 {
    let f = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    f(alpha[0]) * f(alpha[1])
}

/// All multi-indices of the given order, `x1`-heavy first.
pub fn multi_indices(order: usize) -> Vec<MultiIndex> {
    (0..=order).rev().map(|a| [a, order - a]).collect()
}

/// `x^alpha`.
pub fn monomial(alpha: MultiIndex, x: &Point) -> f64 {
    x.x.powi(alpha[0] as i32) * x.y.powi(alpha[1] as i32)
}

/// `h(x) = x^alpha e_j` as formal data.
pub fn polynomial_source(alpha: MultiIndex, j: usize) -> Result<BackgroundField> {
    BackgroundField::monomial(alpha, j)
}

/// The `(|alpha|, |beta|)` blocks entering the two-dimensional expansion.
pub const ORDER_BLOCKS: [(usize, usize); 3] = [(1, 1), (1, 2), (2, 1)];

/// Key `(alpha, beta, j)` of one vector entry.
pub type EmtKey = (MultiIndex, MultiIndex, usize);

#[derive(Debug, Clone)]
pub struct EmtTable {
    pub pair: ContrastPair,
    pub nodes: usize,
    entries: BTreeMap<EmtKey, Point>,
    densities: BTreeMap<(MultiIndex, usize), Density>,
}

impl EmtTable {
    pub fn get(&self, alpha: MultiIndex, beta: MultiIndex, j: usize) -> Result<Point> {
        self.entries
            .get(&(alpha, beta, j))
            .copied()
            .ok_or_else(|| Error::MissingEntry(format!("M^{j}_{alpha:?},{beta:?}")))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&EmtKey, &Point)> {
        self.entries.iter()
    }

    /// The exterior density `phi^j_alpha` behind the table.
    pub fn density(&self, alpha: MultiIndex, j: usize) -> Option<&Density> {
        self.densities.get(&(alpha, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.amax()).fold(0.0, f64::max)
    }

    pub fn insert(&mut self, alpha: MultiIndex, beta: MultiIndex, j: usize, value: Point) {
        self.entries.insert((alpha, beta, j), value);
    }

    /// An empty table, to be filled with [`EmtTable::insert`].
    pub fn empty(pair: ContrastPair) -> Self {
        Self {
            pair,
            nodes: 0,
            entries: BTreeMap::new(),
            densities: BTreeMap::new(),
        }
    }

    /// One line per `(alpha, beta, j, p)`: `a1 a2 b1 b2 j p value`, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# emt.v1 alpha1 alpha2 beta1 beta2 j p value\n");
        for ((alpha, beta, j), v) in &self.entries {
            for p in 0..2 {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {} {} {:.16e}",
                    alpha[0],
                    alpha[1],
                    beta[0],
                    beta[1],
                    j + 1,
                    p + 1,
                    v[p]
                );
            }
        }
        out
    }

    /// Parses [`EmtTable::to_text`] output back into a table for `pair`.
    pub fn from_text(pair: ContrastPair, text: &str) -> Result<Self> {
        let mut table = Self::empty(pair);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Invalid(format!("line {}: malformed EMT record", lineno + 1));
            if f.len() != 7 {
                return Err(bad());
            }
            let ix = |k: usize| f[k].parse::<usize>().map_err(|_| bad());
            let (alpha, beta) = ([ix(0)?, ix(1)?], [ix(2)?, ix(3)?]);
            let (j, p) = (ix(4)?, ix(5)?);
            if !(1..=2).contains(&j) || !(1..=2).contains(&p) {
                return Err(bad());
            }
            let value: f64 = f[6].parse().map_err(|_| bad())?;
            let entry = table.entries.entry((alpha, beta, j - 1)).or_insert_with(Point::zeros);
            entry[p - 1] = value;
        }
        Ok(table)
    }
}

/// Solves the ten monomial problems on `b` with one factorization and
/// integrates `x^beta` against each exterior density.
pub fn compute_emt(pair: &ContrastPair, b: &BoundaryGrid) -> Result<EmtTable> {
    let op = TransmissionOperator::new(*pair, vec![b.clone()])?;
    let mut table = EmtTable::empty(*pair);
    table.nodes = b.len();
    for a_ord in 1..=2 {
        for alpha in multi_indices(a_ord) {
            for j in 0..2 {
                let sol = op.solve(&polynomial_source(alpha, j)?)?;
                let phi = sol.phi.into_iter().next().expect("one component");
                for b_ord in 1..=(3 - a_ord) {
                    for beta in multi_indices(b_ord) {
                        let m: Point = b
                            .points()
                            .iter()
                            .zip(b.weights())
                            .zip(phi.values())
                            .map(|((x, w), f)| f * (w * monomial(beta, x)))
                            .sum();
                        table.insert(alpha, beta, j, m);
                    }
                }
                table.densities.insert((alpha, j), phi);
            }
        }
    }
    Ok(table)
}

/// `m[i][j][p][q] = M^j_{e_i, e_q}[p]`.
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

pub fn emt_as_tensor(table: &EmtTable) -> Result<Tensor4> {
    let e = |k: usize| if k == 0 { [1, 0] } else { [0, 1] };
    let mut m = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for q in 0..2 {
                let v = table.get(e(i), e(q), j)?;
                for p in 0..2 {
                    m[i][j][p][q] = v[p];
                }
            }
        }
    }
    Ok(m)
}

pub fn tensor_norm(m: &Tensor4) -> f64 {
    m.iter().flatten().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// `max |m_ijpq - m_pqij|`.
pub fn major_asymmetry(m: &Tensor4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    worst = worst.max((m[i][j][p][q] - m[p][q][i][j]).abs());
                }
            }
        }
    }
    worst
}

/// `R_ia R_jb R_pc R_qd m_abcd` with `R` a rotation by `angle`.
pub fn rotate_tensor(m: &Tensor4, angle: f64) -> Tensor4 {
    let (c, s) = (angle.cos(), angle.sin());
    let r = [[c, -s], [s, c]];
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for cc in 0..2 {
                                for d in 0..2 {
                                    acc += r[i][a] * r[j][b] * r[p][cc] * r[q][d] * m[a][b][cc][d];
                                }
                            }
                        }
                    }
                    out[i][j][p][q] = acc;
                }
            }
        }
    }
    out
}

pub fn tensor_distance(a: &Tensor4, b: &Tensor4) -> f64 {
    let mut d = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    d += (a[i][j][p][q] - b[i][j][p][q]).powi(2);
                }
            }
        }
    }
    d.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_grid, Curve};
    use crate::material::LameParams;
    use crate::potentials::{rigid_pairings, sobolev_norm};
    use std::f64::consts::FRAC_PI_2;

    fn disk_pair() -> ContrastPair {
        ContrastPair::new(LameParams::planar(0.0, 1.0).unwrap(), LameParams::planar(0.0, 2.0).unwrap())
    }

    fn disk(n: usize) -> BoundaryGrid {
        sample_grid(&Curve::circle(1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn multi_index_helpers() {
        assert_eq!(factorial([2, 0]), 2.0);
        assert_eq!(factorial([1, 1]), 1.0);
        assert_eq!(multi_indices(2), vec![[2, 0], [1, 1], [0, 2]]);
        assert_eq!(monomial([1, 2], &Point::new(2.0, 3.0)), 18.0);
        assert!(polynomial_source([2, 1], 0).is_err());
        assert!(polynomial_source([1, 0], 0).is_ok());
    }

    #[test]
    fn zero_contrast_table_vanishes() {
        let p = LameParams::planar(0.5, 1.0).unwrap();
        let t = compute_emt(&ContrastPair::new(p, p), &disk(64)).unwrap();
        assert_eq!(t.entries().count(), 2 * 2 * 5 + 3 * 2 * 2);
        assert!(t.max_abs() <= 1e-10);
        assert!(tensor_norm(&emt_as_tensor(&t).unwrap()) <= 1e-10);
    }

    #[test]
    fn disk_tensor_symmetries() {
        let t = compute_emt(&disk_pair(), &disk(128)).unwrap();
        let m = emt_as_tensor(&t).unwrap();
        let norm = tensor_norm(&m);
        assert!(norm > 0.1);
        assert!(major_asymmetry(&m) <= 1e-8 * norm);
        assert!(tensor_distance(&rotate_tensor(&m, FRAC_PI_2), &m) <= 1e-8 * norm);
        for alpha in [[1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
            for j in 0..2 {
                let phi = t.density(alpha, j).unwrap();
                let s = sobolev_norm(phi, -0.5);
                for v in rigid_pairings(&disk(128), phi) {
                    assert!(v.abs() <= 1e-9 * s.max(1.0));
                }
            }
        }
    }

    #[test]
    fn disk_tensor_self_converges() {
        let coarse = emt_as_tensor(&compute_emt(&disk_pair(), &disk(128)).unwrap()).unwrap();
        let fine = emt_as_tensor(&compute_emt(&disk_pair(), &disk(512)).unwrap()).unwrap();
        assert!(tensor_distance(&coarse, &fine) <= 1e-8 * tensor_norm(&fine));
    }

    #[test]
    fn text_round_trip() {
        let t = compute_emt(&disk_pair(), &disk(64)).unwrap();
        let text = t.to_text();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2 * t.entries().count());
        let back = EmtTable::from_text(disk_pair(), &text).unwrap();
        for (k, v) in t.entries() {
            assert_eq!(back.get(k.0, k.1, k.2).unwrap(), *v);
        }
        assert!(EmtTable::from_text(disk_pair(), "1 0 1 0 3 1 0.5").is_err());
        assert!(emt_as_tensor(&EmtTable::empty(disk_pair())).is_err());
    }
}
