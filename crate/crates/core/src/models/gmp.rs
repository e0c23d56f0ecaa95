//! Single-carrier generalized memory polynomial.
//!
//! ```text
//! y(n) = sum_{k<Ka, l<La}            a_kl  x(n-l) |x(n-l)|^k
//!      + sum_{1<=k<=Kb, l<Lb, 1<=m<=Mb} b_klm x(n-l) |x(n-l-m)|^k
//!      + sum_{1<=k<=Kc, l<Lc, 1<=m<=Mc} c_klm x(n-l) |x(n-l+m)|^k
//! ```
//!
//! Columns (and coefficients) are ordered aligned, lagging, leading; inside
//! each block by `k`, then `l`, then `m`. Samples outside the record are 0.

use serde::{Deserialize, Serialize};

use super::lstsq::{complex_lstsq, CMatrix};
use crate::eval::nmse_db_slices;
use crate::signals::ComplexSeries;
use crate::{Complex64, Error, Result};

pub const BASIS_ORDER: &str = "aligned[k][l], lagging[k][l][m], leading[k][l][m]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GmpIndex {
    pub ka: usize,
    pub la: usize,
    pub kb: usize,
    pub lb: usize,
    pub mb: usize,
    #[serde(default)]
    pub kc: usize,
    #[serde(default)]
    pub lc: usize,
    #[serde(default)]
    pub mc: usize,
}

impl Default for GmpIndex {
    /// The single-carrier reference configuration (107 complex terms).
    fn default() -> Self {
        Self {
            ka: 11,
            la: 7,
            kb: 3,
            lb: 5,
            mb: 2,
            kc: 0,
            lc: 0,
            mc: 0,
        }
    }
}

impl GmpIndex {
    pub fn aligned_terms(&self) -> usize {
        self.ka * self.la
    }

    pub fn lagging_terms(&self) -> usize {
        self.kb * self.lb * self.mb
    }

    pub fn leading_terms(&self) -> usize {
        self.kc * self.lc * self.mc
    }

    /// Number of complex coefficients.
    pub fn num_terms(&self) -> usize {
        self.aligned_terms() + self.lagging_terms() + self.leading_terms()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_terms() == 0 {
            return Err(Error::Config("GMP index arrays describe an empty model".into()));
        }
        Ok(())
    }

    /// Largest backward reach `l + m` of any term.
    pub fn max_lag(&self) -> usize {
        let a = self.la.saturating_sub(1);
        let b = if self.lagging_terms() > 0 {
            self.lb - 1 + self.mb
        } else {
            0
        };
        let c = if self.leading_terms() > 0 { self.lc - 1 } else { 0 };
        a.max(b).max(c)
    }

    /// `(block, k, l, m)` for every column in order; `m` is 0 in the
    /// aligned block.
    pub fn terms(&self) -> Vec<(Block, usize, usize, usize)> {
        let mut t = Vec::with_capacity(self.num_terms());
        for k in 0..self.ka {
            for l in 0..self.la {
                t.push((Block::Aligned, k, l, 0));
            }
        }
        for k in 1..=self.kb {
            for l in 0..self.lb {
                for m in 1..=self.mb {
                    t.push((Block::Lagging, k, l, m));
                }
            }
        }
        for k in 1..=self.kc {
            for l in 0..self.lc {
                for m in 1..=self.mc {
                    t.push((Block::Leading, k, l, m));
                }
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Aligned,
    Lagging,
    Leading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmpModel {
    pub index: GmpIndex,
    pub coeffs: Vec<Complex64>,
    /// Training-set residual, `10 log10(||y - Phi a||^2 / ||y||^2)`, when
    /// known and finite.
    pub residual_nmse_db: Option<f64>,
    pub rank_deficient: bool,
}

impl GmpModel {
    pub fn new(index: GmpIndex, coeffs: Vec<Complex64>) -> Result<Self> {
        index.validate()?;
        if coeffs.len() != index.num_terms() {
            return Err(Error::Config(format!(
                "{} coefficients for {} GMP terms",
                coeffs.len(),
                index.num_terms()
            )));
        }
        Ok(Self {
            index,
            coeffs,
            residual_nmse_db: None,
            rank_deficient: false,
        })
    }

    /// Real scalars: two per complex coefficient.
    pub fn coefficient_count(&self) -> usize {
        2 * self.coeffs.len()
    }
}

fn at(x: &[Complex64], i: isize) -> Complex64 {
    if i >= 0 && (i as usize) < x.len() {
        x[i as usize]
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn env_at(env: &[f64], i: isize) -> f64 {
    if i >= 0 && (i as usize) < env.len() {
        env[i as usize]
    } else {
        0.0
    }
}

fn design_columns(x: &[Complex64], idx: &GmpIndex) -> Vec<Vec<Complex64>> {
    let env: Vec<f64> = x.iter().map(|v| v.norm()).collect();
    let n = x.len() as isize;
    idx.terms()
        .into_iter()
        .map(|(block, k, l, m)| {
            let (l, m) = (l as isize, m as isize);
            (0..n)
                .map(|i| {
                    let base = at(x, i - l);
                    let e = match block {
                        Block::Aligned => env_at(&env, i - l),
                        Block::Lagging => env_at(&env, i - l - m),
                        Block::Leading => env_at(&env, i - l + m),
                    };
                    base * e.powi(k as i32)
                })
                .collect()
        })
        .collect()
}

/// `N x C` basis matrix in the fixed column order.
pub fn gmp_design_matrix(x: &ComplexSeries, idx: &GmpIndex) -> Result<CMatrix> {
    idx.validate()?;
    if x.len() <= idx.max_lag() {
        return Err(Error::Argument(format!(
            "series of {} samples does not exceed the model's maximum lag {}",
            x.len(),
            idx.max_lag()
        )));
    }
    CMatrix::from_columns(x.len(), design_columns(x.samples(), idx))
}

/// Least-squares identification of the GMP coefficients.
pub fn gmp_fit(x: &ComplexSeries, y: &ComplexSeries, idx: &GmpIndex) -> Result<GmpModel> {
    idx.validate()?;
    if x.len() != y.len() {
        return Err(Error::Shape(format!("input {} vs output {} samples", x.len(), y.len())));
    }
    let c = idx.num_terms();
    if x.len() < 2 * c {
        return Err(Error::Argument(format!(
            "{} samples too few for {c} GMP terms (need at least {})",
            x.len(),
            2 * c
        )));
    }
    let phi = gmp_design_matrix(x, idx)?;
    let sol = complex_lstsq(&phi, y.samples())?;
    let energy: f64 = y.samples().iter().map(|v| v.norm_sqr()).sum();
    let residual_nmse_db = Some(10.0 * (sol.residual_norm_sqr / energy).log10()).filter(|v| v.is_finite());
    Ok(GmpModel {
        index: *idx,
        coeffs: sol.x,
        residual_nmse_db,
        rank_deficient: sol.rank_deficient,
    })
}

/// `Phi(x) a`, evaluated term by term without materializing `Phi`.
pub fn gmp_predict(model: &GmpModel, x: &ComplexSeries) -> Result<ComplexSeries> {
    let xs = x.samples();
    let env: Vec<f64> = xs.iter().map(|v| v.norm()).collect();
    let terms = model.index.terms();
    let n = xs.len() as isize;
    let y: Vec<Complex64> = (0..n)
        .map(|i| {
            terms
                .iter()
                .zip(&model.coeffs)
                .map(|(&(block, k, l, m), a)| {
                    let (l, m) = (l as isize, m as isize);
                    let e = match block {
                        Block::Aligned => env_at(&env, i - l),
                        Block::Lagging => env_at(&env, i - l - m),
                        Block::Leading => env_at(&env, i - l + m),
                    };
                    a * at(xs, i - l) * e.powi(k as i32)
                })
                .sum()
        })
        .collect();
    ComplexSeries::new(y, x.sample_rate_hz())
}

/// NMSE of the model's prediction against `y`, in dB.
pub fn gmp_residual_db(model: &GmpModel, x: &ComplexSeries, y: &ComplexSeries) -> Result<f64> {
    let p = gmp_predict(model, x)?;
    nmse_db_slices(p.samples(), y.samples())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: Vec<Complex64>) -> ComplexSeries {
        ComplexSeries::new(v, 1.0).unwrap()
    }

    fn ramp(n: usize) -> ComplexSeries {
        series(
            (0..n)
                .map(|i| Complex64::from_polar(0.2 + 0.7 * ((i * 37) % 101) as f64 / 101.0, i as f64 * 0.7))
                .collect(),
        )
    }

    fn only_aligned(ka: usize, la: usize) -> GmpIndex {
        GmpIndex {
            ka,
            la,
            kb: 0,
            lb: 0,
            mb: 0,
            ..GmpIndex::default()
        }
    }

    #[test]
    fn reference_term_count() {
        let idx = GmpIndex::default();
        assert_eq!(idx.num_terms(), 107);
        assert_eq!(
            (idx.aligned_terms(), idx.lagging_terms(), idx.leading_terms()),
            (77, 30, 0)
        );
        let m = GmpModel::new(idx, vec![Complex64::new(0.0, 0.0); 107]).unwrap();
        assert_eq!(m.coefficient_count(), 214);
    }

    #[test]
    fn linear_column_is_input() {
        let x = ramp(10);
        let phi = gmp_design_matrix(&x, &only_aligned(1, 1)).unwrap();
        assert_eq!(phi.cols(), 1);
        assert_eq!(phi.column(0), x.samples());
    }

    #[test]
    fn constant_input_columns() {
        let c = Complex64::new(0.3, -0.4);
        let x = series(vec![c; 5]);
        let phi = gmp_design_matrix(&x, &only_aligned(2, 1)).unwrap();
        assert!(phi.column(0).iter().all(|v| *v == c));
        assert!(phi.column(1).iter().all(|v| (v - c * 0.5).norm() < 1e-16));
    }

    #[test]
    fn cross_term_reaches_back() {
        let idx = GmpIndex {
            ka: 0,
            la: 0,
            kb: 1,
            lb: 1,
            mb: 1,
            ..GmpIndex::default()
        };
        let x = ramp(6);
        let phi = gmp_design_matrix(&x, &idx).unwrap();
        assert_eq!(phi.get(0, 0), Complex64::new(0.0, 0.0));
        let want = x.samples()[3] * x.samples()[2].norm();
        assert_eq!(phi.get(3, 0), want);
        let lead = GmpIndex {
            ka: 0,
            la: 0,
            kb: 0,
            lb: 0,
            mb: 0,
            kc: 1,
            lc: 1,
            mc: 1,
        };
        let phi = gmp_design_matrix(&x, &lead).unwrap();
        assert_eq!(phi.get(3, 0), x.samples()[3] * x.samples()[4].norm());
        assert_eq!(phi.get(5, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn exact_linear_fit() {
        let x = ramp(50);
        let y = series(x.samples().iter().map(|v| v * 3.0).collect());
        let m = gmp_fit(&x, &y, &only_aligned(1, 1)).unwrap();
        assert!((m.coeffs[0] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
        let id = GmpModel::new(only_aligned(1, 1), vec![Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(gmp_predict(&id, &x).unwrap(), x);
    }

    #[test]
    fn errors() {
        let zero = GmpIndex {
            ka: 0,
            la: 0,
            kb: 0,
            lb: 0,
            mb: 0,
            ..GmpIndex::default()
        };
        assert!(matches!(gmp_design_matrix(&ramp(10), &zero), Err(Error::Config(_))));
        assert!(matches!(
            gmp_fit(&ramp(100), &ramp(100), &GmpIndex::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn predict_matches_design_matrix() {
        let idx = GmpIndex {
            ka: 3,
            la: 2,
            kb: 2,
            lb: 2,
            mb: 2,
            kc: 1,
            lc: 2,
            mc: 1,
        };
        let x = ramp(40);
        let coeffs: Vec<Complex64> = (0..idx.num_terms())
            .map(|i| Complex64::new(1.0 / (i + 1) as f64, 0.1 * i as f64))
            .collect();
        let m = GmpModel::new(idx, coeffs.clone()).unwrap();
        let direct = gmp_design_matrix(&x, &idx).unwrap().mul_vec(&coeffs);
        for (a, b) in gmp_predict(&m, &x).unwrap().samples().iter().zip(&direct) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
