use super::sparse::CsrMatrix;
use super::LinearOperatorAction;
use crate::error::{Error, Result};

/// Zero-fill incomplete LU factors stored in place of the matrix pattern.
///
/// `L` is unit lower triangular (strictly-lower entries), `U` holds the diagonal
/// and everything above it.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
    /// When set, the factors approximate `diag(scale) * A` and the input residual
    /// is scaled before the triangular solves.
    row_scale: Option<Vec<f64>>,
}

impl Ilu0 {
    pub fn factors(&self) -> &CsrMatrix {
        &self.lu
    }

    /// Lower factor with its unit diagonal made explicit.
    pub fn lower(&self) -> CsrMatrix {
        let n = self.lu.n();
        CsrMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let (c, v) = self.lu.row(i);
                    c.iter()
                        .zip(v)
                        .filter(|(&j, _)| j < i)
                        .map(|(&j, &a)| (j, a))
                        .chain(std::iter::once((i, 1.0)))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn upper(&self) -> CsrMatrix {
        let n = self.lu.n();
        CsrMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let (c, v) = self.lu.row(i);
                    c.iter()
                        .zip(v)
                        .filter(|(&j, _)| j >= i)
                        .map(|(&j, &a)| (j, a))
                        .collect()
                })
                .collect(),
        )
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n();
        let cols = self.lu.cols();
        let vals = self.lu.vals();
        match &self.row_scale {
            Some(s) => z.iter_mut().zip(r).zip(s).for_each(|((z, r), s)| *z = r * s),
            None => z.copy_from_slice(r),
        }
        for i in 0..n {
            let mut acc = z[i];
            for k in self.lu.row_range(i).start..self.diag_pos[i] {
                acc -= vals[k] * z[cols[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let range = self.lu.row_range(i);
            let mut acc = z[i];
            for k in self.diag_pos[i] + 1..range.end {
                acc -= vals[k] * z[cols[k]];
            }
            z[i] = acc / vals[self.diag_pos[i]];
        }
    }
}

#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    /// Point-Jacobi: elementwise inverse of the operator diagonal.
    Jacobi { inv_diag: Vec<f64> },
    Ilu0(Ilu0),
}

impl Preconditioner {
    /// `z = M⁻¹ r`. ILU0 application is a sequential sweep.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi { inv_diag } => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(inv_diag) {
                    *z = r * d;
                }
            }
            Preconditioner::Ilu0(f) => f.solve(r, z),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::Identity => "none",
            Preconditioner::Jacobi { .. } => "jacobi",
            Preconditioner::Ilu0(_) => "ilu0",
        }
    }
}

pub fn build_jacobi<A: LinearOperatorAction + ?Sized>(a: &A) -> Result<Preconditioner> {
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Indefinite(format!(
            "diagonal entry {i} is {:e}; point-Jacobi needs a positive diagonal",
            diag[i]
        )));
    }
    Ok(Preconditioner::Jacobi {
        inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
    })
}

/// ILU0 of an assembled matrix in natural row order.
pub fn build_ilu0(a: &CsrMatrix) -> Result<Preconditioner> {
    Ok(Preconditioner::Ilu0(factorize(a.clone(), None)?))
}

/// ILU0 of `diag(weights) * a`, for operators that are self-adjoint in a
/// weighted inner product: the factored matrix is then symmetric and the
/// preconditioner stays self-adjoint in the same inner product.
pub fn build_ilu0_weighted(a: &CsrMatrix, weights: &[f64]) -> Result<Preconditioner> {
    let mut s = a.clone();
    s.scale_rows(weights);
    Ok(Preconditioner::Ilu0(factorize(s, Some(weights.to_vec()))?))
}

fn factorize(mut lu: CsrMatrix, row_scale: Option<Vec<f64>>) -> Result<Ilu0> {
    let n = lu.n();
    let mut diag_pos = Vec::with_capacity(n);
    for i in 0..n {
        let range = lu.row_range(i);
        match lu.cols()[range.clone()].binary_search(&i) {
            Ok(k) => diag_pos.push(range.start + k),
            Err(_) => return Err(Error::ZeroPivot { row: i }),
        }
    }
    // position of column j within the current row, or usize::MAX
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let range = lu.row_range(i);
        for k in range.clone() {
            slot[lu.cols()[k]] = k;
        }
        for kk in range.start..diag_pos[i] {
            let k = lu.cols()[kk];
            let pivot = lu.vals()[diag_pos[k]];
            let lik = lu.vals()[kk] / pivot;
            lu.vals_mut()[kk] = lik;
            for m in diag_pos[k] + 1..lu.row_range(k).end {
                let j = lu.cols()[m];
                let pos = slot[j];
                if pos != usize::MAX {
                    let ukj = lu.vals()[m];
                    lu.vals_mut()[pos] -= lik * ukj;
                }
            }
        }
        let piv = lu.vals()[diag_pos[i]];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        for k in range {
            slot[lu.cols()[k]] = usize::MAX;
        }
    }
    Ok(Ilu0 {
        lu,
        diag_pos,
        row_scale,
    })
}
