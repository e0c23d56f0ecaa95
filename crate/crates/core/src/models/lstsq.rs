//! Dense complex least squares by Householder QR with column pivoting.
//!
//! Columns are equilibrated to unit norm first. A rank-deficient system is
//! solved for the minimum-norm (in the equilibrated basis) solution by a
//! second QR of the leading rows of `R`. One step of iterative refinement
//! follows the direct solve.

use crate::{Complex64, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<Complex64>>) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape(format!("every column must have {rows} rows")));
        }
        let cols = columns.len();
        Ok(Self {
            rows,
            cols,
            data: columns.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.rows + i]
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.column(j)) {
                *yi += a * xj;
            }
        }
        y
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Reflector `H = I - 2 v v^H / (v^H v)` mapping `x` onto `alpha e_1`.
struct Reflector {
    v: Vec<Complex64>,
    vnorm2: f64,
}

impl Reflector {
    fn new(x: &[Complex64]) -> (Option<Self>, Complex64) {
        let sigma = norm_sqr(x).sqrt();
        if sigma == 0.0 {
            return (None, ZERO);
        }
        let phase = if x[0] == ZERO {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let alpha = -phase * sigma;
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2 = norm_sqr(&v);
        (Some(Self { v, vnorm2 }), alpha)
    }

    fn apply(&self, y: &mut [Complex64]) {
        let dot: Complex64 = self.v.iter().zip(y.iter()).map(|(v, y)| v.conj() * y).sum();
        let s = dot * (2.0 / self.vnorm2);
        for (yi, v) in y.iter_mut().zip(&self.v) {
            *yi -= v * s;
        }
    }
}

/// Pivoted QR factors of an `m x n` matrix, `m >= n`.
struct PivotedQr {
    r: CMatrix,
    reflectors: Vec<(usize, Option<Reflector>)>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    fn new(mut a: CMatrix) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| norm_sqr(a.column(j))).collect();
        let mut reflectors = Vec::with_capacity(n);
        for j in 0..n.min(m) {
            // recompute the trailing norms every few steps to avoid drift
            if j % 8 == 0 {
                for (jj, nrm) in norms.iter_mut().enumerate().skip(j) {
                    *nrm = norm_sqr(&a.column(jj)[j..]);
                }
            }
            let p = (j..n)
                .max_by(|&x, &y| norms[x].total_cmp(&norms[y]).then(y.cmp(&x)))
                .expect("nonempty range");
            if p != j {
                for i in 0..m {
                    a.data.swap(j * m + i, p * m + i);
                }
                perm.swap(j, p);
                norms.swap(j, p);
            }
            let (h, alpha) = Reflector::new(&a.column(j)[j..]);
            if let Some(h) = &h {
                for jj in j + 1..n {
                    let col = &mut a.column_mut(jj)[j..];
                    h.apply(col);
                    norms[jj] -= col[0].norm_sqr();
                }
            }
            let col = a.column_mut(j);
            col[j] = alpha;
            col[j + 1..].iter_mut().for_each(|v| *v = ZERO);
            reflectors.push((j, h));
        }
        let diag: Vec<f64> = (0..n.min(m)).map(|j| a.get(j, j).norm()).collect();
        let tol = diag.first().copied().unwrap_or(0.0) * m.max(n) as f64 * f64::EPSILON;
        let rank = diag.iter().take_while(|d| **d > tol).count();
        Self {
            r: a,
            reflectors,
            perm,
            rank,
        }
    }

    fn apply_qh(&self, b: &mut [Complex64]) {
        for (j, h) in &self.reflectors {
            if let Some(h) = h {
                h.apply(&mut b[*j..]);
            }
        }
    }

    /// Solves `min ||A x - b||` for the factored `A`, minimum norm when
    /// rank deficient. `x` is returned in the original column order.
    fn solve(&self, b: &[Complex64], complete: Option<&PivotedQr>) -> Vec<Complex64> {
        let n = self.r.cols;
        let r = self.rank;
        let mut c = b.to_vec();
        self.apply_qh(&mut c);
        let z = match complete {
            None => {
                let mut z = vec![ZERO; n];
                for i in (0..r).rev() {
                    let mut s = c[i];
                    for (k, zk) in z.iter().enumerate().take(r).skip(i + 1) {
                        s -= self.r.get(i, k) * zk;
                    }
                    z[i] = s / self.r.get(i, i);
                }
                z
            }
            Some(t) => {
                // R1 = [R11 R12] (r x n); R1^H = Q2 R2, so R1 z = c has the
                // min-norm solution z = Q2 [R2^-H c; 0].
                let mut w = vec![ZERO; n];
                for i in 0..r {
                    let mut s = c[i];
                    for (k, wk) in w.iter().enumerate().take(i) {
                        s -= t.r.get(k, i).conj() * wk;
                    }
                    w[i] = s / t.r.get(i, i).conj();
                }
                for (j, h) in t.reflectors.iter().rev() {
                    if let Some(h) = h {
                        h.apply(&mut w[*j..]);
                    }
                }
                w
            }
        };
        let mut x = vec![ZERO; n];
        for (j, &p) in self.perm.iter().enumerate() {
            x[p] = z[j];
        }
        x
    }

    /// QR of `R1^H` without pivoting, for the minimum-norm solve.
    fn complete(&self) -> PivotedQr {
        let n = self.r.cols;
        let r = self.rank;
        let mut t = CMatrix::zeros(n, r);
        for i in 0..r {
            for k in 0..n {
                t.data[i * n + k] = self.r.get(i, k).conj();
            }
        }
        let mut reflectors = Vec::with_capacity(r);
        for j in 0..r {
            let (h, alpha) = Reflector::new(&t.column(j)[j..]);
            if let Some(h) = &h {
                for jj in j + 1..r {
                    h.apply(&mut t.column_mut(jj)[j..]);
                }
            }
            let col = t.column_mut(j);
            col[j] = alpha;
            col[j + 1..].iter_mut().for_each(|v| *v = ZERO);
            reflectors.push((j, h));
        }
        PivotedQr {
            r: t,
            reflectors,
            perm: (0..r).collect(),
            rank: r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub x: Vec<Complex64>,
    pub rank: usize,
    pub rank_deficient: bool,
    /// `||A x - b||^2` at the returned solution.
    pub residual_norm_sqr: f64,
}

/// Solves `argmin_x ||A x - b||^2` for a tall complex `A`.
pub fn complex_lstsq(a: &CMatrix, b: &[Complex64]) -> Result<LstsqSolution> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(Error::Shape(format!("rhs has {} rows, matrix {m}", b.len())));
    }
    if n == 0 || m < n {
        return Err(Error::Argument(format!("need a tall matrix, got {m}x{n}")));
    }
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let s = norm_sqr(a.column(j)).sqrt();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    let qr = PivotedQr::new(scaled.clone());
    let complete = (qr.rank < n).then(|| qr.complete());
    let mut z = qr.solve(b, complete.as_ref());

    let residual = |z: &[Complex64]| -> Vec<Complex64> {
        let az = scaled.mul_vec(z);
        b.iter().zip(az).map(|(b, v)| b - v).collect()
    };
    let dz = qr.solve(&residual(&z), complete.as_ref());
    z.iter_mut().zip(dz).for_each(|(z, d)| *z += d);

    let residual_norm_sqr = norm_sqr(&residual(&z));
    let x = z.iter().zip(&scale).map(|(z, s)| z * s).collect();
    Ok(LstsqSolution {
        x,
        rank: qr.rank,
        rank_deficient: qr.rank < n,
        residual_norm_sqr,
    })
}
