//! Bounds-checked strided view over `matrixmultiply::dgemm`.

/// Strided read-only matrix view: element (r, c) lives at `off + r*rs + c*cs`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    /// Row-major `[rows × cols]` matrix starting at `off`.
    pub fn rows(data: &'a [f64], off: usize, cols: usize) -> Self {
        Self { data, off, rs: cols, cs: 1 }
    }

    /// Transpose of a view.
    pub fn t(self) -> Self {
        Self { rs: self.cs, cs: self.rs, ..self }
    }

    fn last(&self, m: usize, n: usize) -> usize {
        if m == 0 || n == 0 {
            self.off
        } else {
            self.off + (m - 1) * self.rs + (n - 1) * self.cs
        }
    }
}

/// `C[m×n] = alpha·A[m×k]·B[k×n] + beta·C`; with `beta == 0` the prior
/// contents of C are ignored.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: View<'_>,
    b: View<'_>,
    beta: f64,
    c: &mut [f64],
    c_off: usize,
    c_rs: usize,
    c_cs: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.last(m, k) < a.data.len(), "gemm: A out of bounds");
    assert!(k == 0 || b.last(k, n) < b.data.len(), "gemm: B out of bounds");
    assert!(c_off + (m - 1) * c_rs + (n - 1) * c_cs < c.len(), "gemm: C out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c[c_off + i * c_rs + j * c_cs];
                *x = if beta == 0.0 { 0.0 } else { beta * *x };
            }
        }
        return;
    }
    // SAFETY: every addressed element was bounds-checked above; A and B are
    // shared borrows and C is a distinct exclusive borrow.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.off),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.off),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr().add(c_off),
            c_rs as isize,
            c_cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_with_strides() {
        // A 2×3 row-major, B given as the transpose of a 2×3 row-major.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let bt = [1.0, 0.0, -1.0, 2.0, 1.0, 0.5];
        let mut c = [10.0; 4];
        gemm(2, 3, 2, 1.0, View::rows(&a, 0, 3), View::rows(&bt, 0, 3).t(), 1.0, &mut c, 0, 2, 1);
        let mut want = [10.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..3 {
                    want[i * 2 + j] += a[i * 3 + l] * bt[j * 3 + l];
                }
            }
        }
        assert_eq!(c, want);
    }
}
