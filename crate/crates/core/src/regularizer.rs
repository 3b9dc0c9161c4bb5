//! Isotropic total variation and its proximal operator by fast gradient projection on the dual.
//!
//! For an `m×n` image (rows × columns) the forward differences are
//! `p[a,b] = x[a,b] − x[a+1,b]` for `a < m−1` and `q[a,b] = x[a,b] − x[a,b+1]` for `b < n−1`;
//! differences past the last row or column are zero.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::linalg;
use crate::Real;

/// Dual variables of the TV prox: `p` has `(m−1)×n` entries, `q` has `m×(n−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    pub rows: usize,
    pub cols: usize,
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> GradientField<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            p: vec![T::zero(); rows.saturating_sub(1) * cols],
            q: vec![T::zero(); rows * cols.saturating_sub(1)],
        }
    }

    /// Forward differences of `x` (row-major `rows × cols`).
    pub fn gradient_of(x: &[T], rows: usize, cols: usize) -> Self {
        let mut g = Self::zeros(rows, cols);
        g.set_gradient(x);
        g
    }

    fn set_gradient(&mut self, x: &[T]) {
        let (m, n) = (self.rows, self.cols);
        for a in 0..m.saturating_sub(1) {
            for b in 0..n {
                self.p[a * n + b] = x[a * n + b] - x[(a + 1) * n + b];
            }
        }
        let nq = n.saturating_sub(1);
        for a in 0..m {
            for b in 0..nq {
                self.q[a * nq + b] = x[a * n + b] - x[a * n + b + 1];
            }
        }
    }

    /// Adjoint of the difference operator applied to this field, `out ← Dᵀ(p, q)`.
    pub fn adjoint_into(&self, out: &mut [T]) {
        let (m, n) = (self.rows, self.cols);
        out.iter_mut().for_each(|v| *v = T::zero());
        for a in 0..m.saturating_sub(1) {
            for b in 0..n {
                let v = self.p[a * n + b];
                out[a * n + b] += v;
                out[(a + 1) * n + b] -= v;
            }
        }
        let nq = n.saturating_sub(1);
        for a in 0..m {
            for b in 0..nq {
                let v = self.q[a * nq + b];
                out[a * n + b] += v;
                out[a * n + b + 1] -= v;
            }
        }
    }

    /// Projects onto the dual feasible set: pairs `(p[a,b], q[a,b])` that share an origin pixel
    /// into the unit disc, lone boundary components into `[−1, 1]`.
    pub fn project(&mut self) {
        let (m, n) = (self.rows, self.cols);
        let nq = n.saturating_sub(1);
        let one = T::one();
        for a in 0..m {
            for b in 0..n {
                let has_p = a + 1 < m;
                let has_q = b + 1 < n;
                match (has_p, has_q) {
                    (true, true) => {
                        let (ip, iq) = (a * n + b, a * nq + b);
                        let r = (self.p[ip] * self.p[ip] + self.q[iq] * self.q[iq]).sqrt();
                        if r > one {
                            self.p[ip] /= r;
                            self.q[iq] /= r;
                        }
                    }
                    (true, false) => {
                        let ip = a * n + b;
                        self.p[ip] = self.p[ip].max(-one).min(one);
                    }
                    (false, true) => {
                        let iq = a * nq + b;
                        self.q[iq] = self.q[iq].max(-one).min(one);
                    }
                    (false, false) => {}
                }
            }
        }
    }

    /// Largest pointwise magnitude under the pairing used by [`project`](Self::project).
    pub fn max_pair_norm(&self) -> T {
        let (m, n) = (self.rows, self.cols);
        let nq = n.saturating_sub(1);
        let mut best = T::zero();
        for a in 0..m {
            for b in 0..n {
                let pv = if a + 1 < m {
                    self.p[a * n + b]
                } else {
                    T::zero()
                };
                let qv = if b + 1 < n {
                    self.q[a * nq + b]
                } else {
                    T::zero()
                };
                best = best.max((pv * pv + qv * qv).sqrt());
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Dual step as a multiple of `1/τ`; `1/8` is the reciprocal of the bound on `‖D‖²`.
    pub dual_step: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rel_tol: 1e-6,
            dual_step: 0.125,
        }
    }
}

impl ProxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("prox max_iter must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("prox rel_tol must be > 0".into()));
        }
        if !(self.dual_step > 0.0) {
            return Err(Error::InvalidParameter("prox dual step must be > 0".into()));
        }
        Ok(())
    }
}

/// `TV_I(x)` for a row-major `rows × cols` image.
pub fn tv_raw<T: Real>(x: &[T], rows: usize, cols: usize) -> T {
    let mut acc = T::zero();
    for a in 0..rows {
        for b in 0..cols {
            let v = x[a * cols + b];
            let dv = if a + 1 < rows {
                v - x[(a + 1) * cols + b]
            } else {
                T::zero()
            };
            let dh = if b + 1 < cols {
                v - x[a * cols + b + 1]
            } else {
                T::zero()
            };
            acc += (dv * dv + dh * dh).sqrt();
        }
    }
    acc
}

/// `λ·TV_I(x)`.
pub fn tv_value<T: Real>(x: &Image<T>, lambda: T) -> T {
    if lambda == T::zero() {
        return T::zero();
    }
    lambda * tv_raw(&x.data, x.height, x.width)
}

/// Result of a TV prox evaluation, including the dual field it converged to.
#[derive(Debug, Clone)]
pub struct ProxOutcome<T> {
    pub image: Vec<T>,
    pub dual: GradientField<T>,
    pub iterations: usize,
}

/// `argmin_u ½‖u − z‖² + τ·TV_I(u)` over a row-major `rows × cols` image.
///
/// `warm` optionally seeds the dual iterate (it must be feasible and of matching shape).
pub fn tv_prox_slice<T: Real>(
    z: &[T],
    rows: usize,
    cols: usize,
    tau: T,
    cfg: &ProxConfig,
    warm: Option<&GradientField<T>>,
) -> ProxOutcome<T> {
    debug_assert_eq!(z.len(), rows * cols);
    if tau <= T::zero() {
        return ProxOutcome {
            image: z.to_vec(),
            dual: GradientField::zeros(rows, cols),
            iterations: 0,
        };
    }
    let step = T::lit(cfg.dual_step) / tau;
    let rel_tol = T::lit(cfg.rel_tol);

    let mut dual = match warm {
        Some(w) if w.rows == rows && w.cols == cols => w.clone(),
        _ => GradientField::zeros(rows, cols),
    };
    let mut extrap = dual.clone();
    let mut grad = GradientField::zeros(rows, cols);
    let mut u = vec![T::zero(); z.len()];
    let mut div = vec![T::zero(); z.len()];
    let mut u_prev = primal_from_dual(z, tau, &dual, &mut div);
    let mut t = T::one();
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        // u(extrap) = z − τ·Dᵀ extrap; ascend the dual along D·u and project.
        extrap.adjoint_into(&mut div);
        for ((ui, &zi), &di) in u.iter_mut().zip(z).zip(&div) {
            *ui = zi - tau * di;
        }
        grad.set_gradient(&u);
        let prev = dual.clone();
        for (d, (&e, &g)) in dual.p.iter_mut().zip(extrap.p.iter().zip(&grad.p)) {
            *d = e + step * g;
        }
        for (d, (&e, &g)) in dual.q.iter_mut().zip(extrap.q.iter().zip(&grad.q)) {
            *d = e + step * g;
        }
        dual.project();

        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let beta = (t - T::one()) / t_next;
        t = t_next;
        for ((e, &d), &pv) in extrap.p.iter_mut().zip(&dual.p).zip(&prev.p) {
            *e = d + beta * (d - pv);
        }
        for ((e, &d), &pv) in extrap.q.iter_mut().zip(&dual.q).zip(&prev.q) {
            *e = d + beta * (d - pv);
        }

        let u_new = primal_from_dual(z, tau, &dual, &mut div);
        let change = linalg::dist(&u_new, &u_prev);
        let scale = linalg::norm(&u_new);
        u_prev = u_new;
        if change <= rel_tol * scale || change == T::zero() {
            break;
        }
    }
    ProxOutcome {
        image: u_prev,
        dual,
        iterations,
    }
}

fn primal_from_dual<T: Real>(z: &[T], tau: T, dual: &GradientField<T>, div: &mut [T]) -> Vec<T> {
    dual.adjoint_into(div);
    z.iter()
        .zip(div.iter())
        .map(|(&zi, &di)| zi - tau * di)
        .collect()
}

/// Prox of `τ·TV_I` on an image.
pub fn tv_prox<T: Real>(z: &Image<T>, tau: T, cfg: &ProxConfig) -> Image<T> {
    let out = tv_prox_slice(&z.data, z.height, z.width, tau, cfg, None);
    Image {
        width: z.width,
        height: z.height,
        data: out.image,
    }
}

/// Prox of `h = λ·TV_I` with step `scale`, i.e. `tv_prox(z, scale·λ)`.
pub fn prox_h<T: Real>(z: &Image<T>, lambda: T, scale: T, cfg: &ProxConfig) -> Image<T> {
    tv_prox(z, scale * lambda, cfg)
}

/// `h(x) = λ·TV_I(x)` on a fixed image shape, with its prox.
#[derive(Debug, Clone)]
pub struct TotalVariation<T> {
    pub lambda: T,
    pub rows: usize,
    pub cols: usize,
    pub prox: ProxConfig,
}

impl<T: Real> TotalVariation<T> {
    pub fn new(lambda: T, rows: usize, cols: usize, prox: ProxConfig) -> Result<Self> {
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "regularization weight must be >= 0, got {lambda}"
            )));
        }
        prox.validate()?;
        Ok(Self {
            lambda,
            rows,
            cols,
            prox,
        })
    }

    pub fn value(&self, x: &[T]) -> T {
        if self.lambda == T::zero() {
            return T::zero();
        }
        self.lambda * tv_raw(x, self.rows, self.cols)
    }

    pub fn prox(&self, z: &[T], scale: T) -> Result<Vec<T>> {
        check_len("TV prox input", self.rows * self.cols, z.len())?;
        Ok(tv_prox_slice(
            z,
            self.rows,
            self.cols,
            scale * self.lambda,
            &self.prox,
            None,
        )
        .image)
    }
}
