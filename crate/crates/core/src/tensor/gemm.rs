//! Strided matrix multiply on top of `matrixmultiply`.

/// A row-major matrix stored in a slice, optionally read transposed.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> MatRef<'a> {
    /// View of `data` stored as `stored_rows × stored_cols`; when `trans`
    /// is set the view is the transpose of the stored matrix.
    pub fn new(data: &'a [f64], stored_rows: usize, stored_cols: usize, trans: bool) -> Self {
        assert!(data.len() >= stored_rows * stored_cols);
        if trans {
            Self { data, rows: stored_cols, cols: stored_rows, rs: 1, cs: stored_cols as isize }
        } else {
            Self { data, rows: stored_rows, cols: stored_cols, rs: stored_cols as isize, cs: 1 }
        }
    }

    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }
}

/// Destination matrix with explicit strides.
pub(crate) struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], stored_rows: usize, stored_cols: usize, trans: bool) -> Self {
        assert!(data.len() >= stored_rows * stored_cols);
        if trans {
            Self { data, rows: stored_cols, cols: stored_rows, rs: 1, cs: stored_cols as isize }
        } else {
            Self { data, rows: stored_rows, cols: stored_cols, rs: stored_cols as isize, cs: 1 }
        }
    }
}

fn extent(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
}

/// `c = beta·c + a·b`.
pub(crate) fn gemm(a: MatRef<'_>, b: MatRef<'_>, c: MatMut<'_>, beta: f64) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(a.rows, c.rows, "gemm output rows");
    assert_eq!(b.cols, c.cols, "gemm output cols");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let idx = i * c.rs as usize + j * c.cs as usize;
                c.data[idx] *= beta;
            }
        }
        return;
    }
    assert!(a.rs > 0 && a.cs > 0 && b.rs > 0 && b.cs > 0 && c.rs > 0 && c.cs > 0);
    assert!(extent(m, k, a.rs, a.cs) <= a.data.len());
    assert!(extent(k, n, b.rs, b.cs) <= b.data.len());
    assert!(extent(m, n, c.rs, c.cs) <= c.data.len());
    // SAFETY: all three extents were checked against their slices above and
    // the output slice is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.data.as_mut_ptr(),
            c.rs,
            c.cs,
        );
    }
}
