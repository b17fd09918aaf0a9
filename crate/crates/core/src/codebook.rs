//! Spreading codebooks.
//!
//! NOMA codebooks are Grassmannian packings: M unit-norm signatures of
//! length L whose maximum pairwise cross-correlation is pushed toward
//! the Welch bound by alternating projection on the Gram matrix. OMA
//! codebooks are identity columns, reused round-robin when K > M.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::HermitianMatrix;
use crate::{Error, Result};

/// A frozen set of unit-norm spreading signatures (columns of an L x M
/// matrix) with its cross-correlation profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    signatures: DMatrix<Complex64>,
    max_xcorr: f64,
}

impl Codebook {
    fn from_signatures(signatures: DMatrix<Complex64>) -> Self {
        let max_xcorr = max_cross_correlation(&signatures);
        Self { signatures, max_xcorr }
    }

    /// Signature length L.
    pub fn length(&self) -> usize {
        self.signatures.nrows()
    }

    /// Number of signatures M.
    pub fn size(&self) -> usize {
        self.signatures.ncols()
    }

    pub fn signature(&self, m: usize) -> DVector<Complex64> {
        self.signatures.column(m).into_owned()
    }

    pub fn signatures(&self) -> &DMatrix<Complex64> {
        &self.signatures
    }

    /// Largest |s_m^H s_m'| over distinct pairs.
    pub fn max_xcorr(&self) -> f64 {
        self.max_xcorr
    }

    /// Writes the codebook as CSV: L rows of real parts then L rows of
    /// imaginary parts, M columns each.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        let (l, m) = (self.length(), self.size());
        for part in 0..2 {
            for row in 0..l {
                let cells: Vec<String> = (0..m)
                    .map(|col| {
                        let z = self.signatures[(row, col)];
                        format!("{}", if part == 0 { z.re } else { z.im })
                    })
                    .collect();
                writeln!(file, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }

    /// Reads a codebook written by [`Codebook::write_csv`].
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad CSV cell {cell:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() || rows.len() % 2 != 0 {
            return Err(Error::Parse(format!(
                "codebook CSV must have 2L rows, got {}",
                rows.len()
            )));
        }
        let l = rows.len() / 2;
        let m = rows[0].len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Parse("ragged codebook CSV".into()));
        }
        let signatures =
            DMatrix::from_fn(l, m, |r, c| Complex64::new(rows[r][c], rows[l + r][c]));
        Ok(Self::from_signatures(signatures))
    }
}

fn max_cross_correlation(signatures: &DMatrix<Complex64>) -> f64 {
    let m = signatures.ncols();
    let mut max = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let x = signatures.column(i).dotc(&signatures.column(j)).norm();
            max = max.max(x);
        }
    }
    max
}

/// Lower bound on the maximum cross-correlation of m unit vectors in
/// dimension l: `sqrt((m - l) / (l (m - 1)))`, and 0 when m == l.
pub fn welch_bound(l: usize, m: usize) -> Result<f64> {
    if l < 1 || m < l {
        return Err(Error::InvalidDimensions(format!(
            "welch bound requires m >= l >= 1, got l={l}, m={m}"
        )));
    }
    if m == l {
        return Ok(0.0);
    }
    Ok(((m - l) as f64 / (l * (m - 1)) as f64).sqrt())
}

/// Identity-column OMA codebook (M == L, zero cross-correlation).
pub fn oma_codebook(l: usize) -> Codebook {
    Codebook::from_signatures(DMatrix::identity(l, l))
}

/// Round-robin signature assignment: UE i gets signature `i mod M`.
pub fn assign_signatures(k: usize, codebook: &Codebook) -> Vec<usize> {
    (0..k).map(|i| i % codebook.size()).collect()
}

/// Iterations without a best-so-far improvement before the design
/// restarts from a fresh random frame. Alternating projection converges
/// to a fixed point of the two projections, and a sizable fraction of
/// random starts lead to bad ones; restarts make the success odds
/// compound across the iteration budget.
const DESIGN_STALL: usize = 100;

/// Designs an M-signature Grassmannian codebook in dimension L by
/// alternating projection on the Gram matrix: clip off-diagonal
/// magnitudes to the Welch bound, project back onto the set of Gram
/// matrices of unit-norm frames (Hermitian, rank <= L, trace M), and
/// refactor. Stalled runs restart from a fresh random frame until the
/// iteration budget is spent; returns the best iterate seen.
pub fn grassmannian_design<R: Rng>(
    l: usize,
    m: usize,
    rng: &mut R,
    iters: usize,
) -> Result<Codebook> {
    let mu = welch_bound(l, m)?;
    if iters < 1 {
        return Err(Error::InvalidConfig("iters must be >= 1".into()));
    }

    let draw = |rng: &mut R| {
        let mut s = DMatrix::from_fn(l, m, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        normalize_columns(&mut s);
        s
    };
    let mut signatures = draw(rng);

    let mut best = signatures.clone();
    let mut best_xcorr = max_cross_correlation(&signatures);
    let mut stall = 0usize;

    for _ in 0..iters {
        // Correlation clipping on the Gram matrix.
        let mut gram = signatures.adjoint() * &signatures;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    gram[(i, j)] = Complex64::new(1.0, 0.0);
                } else {
                    let mag = gram[(i, j)].norm();
                    if mag > mu {
                        gram[(i, j)] *= mu / mag;
                    }
                }
            }
        }

        // Spectral projection: rank <= L, trace M, PSD.
        let (vals, vecs) = HermitianMatrix::symmetrize(gram).eigh()?;
        let mut top: Vec<(f64, usize)> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| (v.max(0.0), i))
            .collect();
        top.sort_by(|a, b| b.0.total_cmp(&a.0));
        top.truncate(l);
        let spectral_mass: f64 = top.iter().map(|(v, _)| v).sum();
        if spectral_mass <= 0.0 {
            return Err(Error::DesignFailure(best_xcorr));
        }
        let scale = m as f64 / spectral_mass;
        signatures = DMatrix::from_rows(
            &top.iter()
                .map(|&(v, idx)| (vecs.column(idx).adjoint() * Complex64::new((v * scale).sqrt(), 0.0)).row(0).into_owned())
                .collect::<Vec<_>>(),
        );
        normalize_columns(&mut signatures);

        let xcorr = max_cross_correlation(&signatures);
        if xcorr < best_xcorr - 1e-12 {
            best_xcorr = xcorr;
            best = signatures.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= DESIGN_STALL {
                signatures = draw(rng);
                stall = 0;
            }
        }
        if best_xcorr <= mu * (1.0 + 1e-9) + 1e-9 {
            break;
        }
    }

    if best_xcorr > 0.9 {
        return Err(Error::DesignFailure(best_xcorr));
    }
    Ok(Codebook::from_signatures(best))
}

fn normalize_columns(s: &mut DMatrix<Complex64>) {
    let l = s.nrows();
    for mut col in s.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        } else {
            col[0] = Complex64::new(1.0, 0.0);
            for i in 1..l {
                col[i] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn welch_bound_values() {
        assert_eq!(welch_bound(4, 4).unwrap(), 0.0);
        assert!((welch_bound(4, 16).unwrap() - (12.0f64 / 60.0).sqrt()).abs() < 1e-15);
        assert!((welch_bound(4, 16).unwrap() - 0.44721).abs() < 1e-5);
        assert!((welch_bound(2, 4).unwrap() - (2.0f64 / 6.0).sqrt()).abs() < 1e-15);
        assert!(matches!(welch_bound(4, 2), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn oma_codebook_is_identity() {
        for l in [1usize, 2, 4] {
            let cb = oma_codebook(l);
            assert_eq!(cb.length(), l);
            assert_eq!(cb.size(), l);
            assert_eq!(cb.max_xcorr(), 0.0);
            for m in 0..l {
                let s = cb.signature(m);
                assert_eq!(s[m], Complex64::new(1.0, 0.0));
                assert!((s.norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn assignment_round_robin() {
        let cb16 = grassmannian_design(4, 16, &mut StdRng::seed_from_u64(1), 50).unwrap();
        assert_eq!(assign_signatures(12, &cb16), (0..12).collect::<Vec<_>>());
        let cb4 = oma_codebook(4);
        assert_eq!(
            assign_signatures(12, &cb4),
            vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3]
        );
        assert_eq!(assign_signatures(1, &cb4), vec![0]);
        // Each signature reused floor(k/M) or ceil(k/M) times.
        let assign = assign_signatures(10, &cb4);
        for sig in 0..4 {
            let count = assign.iter().filter(|&&a| a == sig).count();
            assert!(count == 2 || count == 3);
        }
    }

    #[test]
    fn design_square_case_is_orthonormal() {
        let cb = grassmannian_design(4, 4, &mut StdRng::seed_from_u64(3), 100).unwrap();
        assert!(cb.max_xcorr() <= 1e-6, "max_xcorr {}", cb.max_xcorr());
    }

    #[test]
    fn design_two_three_meets_known_optimum() {
        // The optimal 3-vector packing in dimension 2 meets the Welch
        // bound of 0.5 (equiangular tight frame exists).
        let cb = grassmannian_design(2, 3, &mut StdRng::seed_from_u64(4), 3_000).unwrap();
        let mu = welch_bound(2, 3).unwrap();
        assert!((mu - 0.5).abs() < 1e-15);
        assert!(cb.max_xcorr() >= mu - 1e-9);
        assert!(cb.max_xcorr() <= 0.51, "max_xcorr {}", cb.max_xcorr());
    }

    #[test]
    fn design_is_deterministic_and_unit_norm() {
        let a = grassmannian_design(3, 7, &mut StdRng::seed_from_u64(9), 200).unwrap();
        let b = grassmannian_design(3, 7, &mut StdRng::seed_from_u64(9), 200).unwrap();
        assert_eq!(a.signatures(), b.signatures());
        for m in 0..a.size() {
            assert!((a.signature(m).norm() - 1.0).abs() < 1e-12);
        }
        assert!(a.max_xcorr() >= welch_bound(3, 7).unwrap() - 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let cb = grassmannian_design(4, 16, &mut StdRng::seed_from_u64(11), 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codebook.csv");
        cb.write_csv(&path).unwrap();
        let back = Codebook::read_csv(&path).unwrap();
        assert_eq!(back.length(), cb.length());
        assert_eq!(back.size(), cb.size());
        assert!((back.signatures() - cb.signatures()).norm() < 1e-9);
        assert!((back.max_xcorr() - cb.max_xcorr()).abs() < 1e-9);
    }
}
