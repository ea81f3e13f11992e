//! Dual projected-gradient solver for `‖y − X̃b‖² + λ‖Db‖₁` with `X̃ᵀX̃`
//! and `D` invertible. Works on the generalized criterion directly.

use nalgebra::{DMatrix, DVector};

pub fn generalized_objective(xt: &DMatrix<f64>, y: &DVector<f64>, d: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> f64 {
    (y - xt * b).norm_squared() + lambda * (d * b).lp_norm(1)
}

/// Maximizes the dual over the box `‖v‖∞ ≤ λ` with accelerated projected
/// gradient and returns the primal point `b(v)`.
pub fn dual_solve(xt: &DMatrix<f64>, y: &DVector<f64>, d: &DMatrix<f64>, lambda: f64, iters: usize) -> DVector<f64> {
    let gram = xt.tr_mul(xt);
    let chol = gram.cholesky().expect("oracle needs a full column rank design");
    let xty = xt.tr_mul(y);
    let primal = |v: &DVector<f64>| chol.solve(&(&xty - d.tr_mul(v) * 0.5));
    // ∇h(v) = D b(v) is affine with Hessian −½ D (X̃ᵀX̃)^{-1} Dᵀ
    let h = d * chol.solve(&d.transpose()) * 0.5;
    let eig = h.symmetric_eigenvalues();
    let step = 1.0 / eig.max();
    let p = d.nrows();
    let clip = |v: DVector<f64>| v.map(|x| x.clamp(-lambda, lambda));
    let mut v = DVector::zeros(p);
    let mut w = v.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let next = clip(&w + d * primal(&w) * step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = &next + (&next - &v) * ((t - 1.0) / t_next);
        v = next;
        t = t_next;
    }
    primal(&v)
}
