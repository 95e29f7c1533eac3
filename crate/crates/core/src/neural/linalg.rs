//! Small dense kernels. Accumulation order is fixed so results are
//! bit-reproducible.

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += W x` for row-major `W` of shape `out.len() × x.len()`.
pub fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), cols * out.len());
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ y` for row-major `W` of shape `y.len() × out.len()`.
pub fn matvec_t_acc(w: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), cols * y.len());
    for (yr, row) in y.iter().zip(w.chunks_exact(cols)) {
        if *yr != 0.0 {
            axpy(*yr, row, out);
        }
    }
}

/// `g += a bᵀ` for row-major `g` of shape `a.len() × b.len()`.
pub fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    debug_assert_eq!(g.len(), cols * a.len());
    for (ar, row) in a.iter().zip(g.chunks_exact_mut(cols)) {
        if *ar != 0.0 {
            axpy(*ar, b, row);
        }
    }
}
