//! Manufactured time-dependent solution for the temporal-convergence mode,
//! with forward-mode jets supplying exact derivatives of the closed-form
//! fields (no hand-derived gradients, no finite differences).
//!
//! Fields on the annulus 1/2 <= |x| <= 3/2 over t in [7/2, 9/2]:
//!
//! ```text
//! T(t,x)   = x0 x1 cos(t sqrt((x0 + sin 3t)^2 + (x1 - cos 3t)^2))
//! u(t,x)   = (2 + cos(3 pi t + x0 x1 t)) (-x1, x0)
//! eta(x,T) = |x|^2 exp(-T)
//! ```
//!
//! The residual forcing is the transport equation's left-hand side
//! evaluated on these fields:
//! f = T_t + u . grad T - k lap T - T (u . g) - tau(u):eps(u) - 1.

/// Second-order 2D jet: value, gradient and Hessian carried through
/// arithmetic by the chain rule.
#[derive(Clone, Copy, Debug)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 {
            v,
            dx: 0.0,
            dy: 0.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    pub fn var_x(v: f64) -> Self {
        Jet2 {
            v,
            dx: 1.0,
            dy: 0.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    pub fn var_y(v: f64) -> Self {
        Jet2 {
            v,
            dx: 0.0,
            dy: 1.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    fn chain(self, f: f64, fp: f64, fpp: f64) -> Self {
        Jet2 {
            v: f,
            dx: fp * self.dx,
            dy: fp * self.dy,
            dxx: fpp * self.dx * self.dx + fp * self.dxx,
            dxy: fpp * self.dx * self.dy + fp * self.dxy,
            dyy: fpp * self.dy * self.dy + fp * self.dyy,
        }
    }

    pub fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos(), -self.v.sin())
    }

    pub fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin(), -self.v.cos())
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
            dxx: self.dxx - o.dxx,
            dxy: self.dxy - o.dxy,
            dyy: self.dyy - o.dyy,
        }
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl std::ops::Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        Jet2 {
            v: self.v * s,
            dx: self.dx * s,
            dy: self.dy * s,
            dxx: self.dxx * s,
            dxy: self.dxy * s,
            dyy: self.dyy * s,
        }
    }
}

/// First-order dual number in the time variable.
#[derive(Clone, Copy, Debug)]
pub struct Dual {
    pub v: f64,
    pub dt: f64,
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Dual { v, dt: 0.0 }
    }

    pub fn var(v: f64) -> Self {
        Dual { v, dt: 1.0 }
    }

    pub fn sin(self) -> Self {
        Dual {
            v: self.v.sin(),
            dt: self.v.cos() * self.dt,
        }
    }

    pub fn cos(self) -> Self {
        Dual {
            v: self.v.cos(),
            dt: -self.v.sin() * self.dt,
        }
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual {
            v: s,
            dt: 0.5 / s * self.dt,
        }
    }
}

impl std::ops::Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            dt: self.dt + o.dt,
        }
    }
}

impl std::ops::Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            dt: self.dt - o.dt,
        }
    }
}

impl std::ops::Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            dt: self.dt * o.v + self.v * o.dt,
        }
    }
}

// ---------------------------------------------------------------------------
// The manufactured fields
// ---------------------------------------------------------------------------

/// sin(z)/z, series for small arguments.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// (cos z - sinc z) / z^2, series for small arguments.
fn cos_sinc_over_z2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        -1.0 / 3.0 + z2 / 30.0 - z2 * z2 / 840.0
    } else {
        (z.cos() - sinc(z)) / (z * z)
    }
}

/// cos(t sqrt(y)) chained onto a jet of y >= 0. The composition is smooth in
/// y (the distance point may cross quadrature points), so the chain uses the
/// sinc-form derivatives instead of differentiating the square root:
/// d/dy = -(t^2/2) sinc(z), d^2/dy^2 = -(t^4/4) (cos z - sinc z)/z^2,
/// with z = t sqrt(y).
fn cos_t_sqrt(y: Jet2, t: f64) -> Jet2 {
    let z = t * y.v.max(0.0).sqrt();
    let f = z.cos();
    let fp = -0.5 * t * t * sinc(z);
    let fpp = -0.25 * t.powi(4) * cos_sinc_over_z2(z);
    y.chain(f, fp, fpp)
}

pub fn temperature(t: f64, x: [f64; 2]) -> f64 {
    let y = (x[0] + (3.0 * t).sin()).powi(2) + (x[1] - (3.0 * t).cos()).powi(2);
    x[0] * x[1] * (t * y.sqrt()).cos()
}

/// Temperature with spatial gradient and Hessian at fixed t.
pub fn temperature_jet(t: f64, x: [f64; 2]) -> Jet2 {
    let x0 = Jet2::var_x(x[0]);
    let x1 = Jet2::var_y(x[1]);
    let a = x0 + Jet2::constant((3.0 * t).sin());
    let b = x1 - Jet2::constant((3.0 * t).cos());
    let y = a * a + b * b;
    x0 * x1 * cos_t_sqrt(y, t)
}

/// Time derivative of the temperature at fixed x:
/// d/dt cos(sqrt(w)) = -(1/2) sinc(sqrt(w)) w' with w = t^2 y(t).
pub fn temperature_dt(t: f64, x: [f64; 2]) -> f64 {
    let tt = Dual::var(t);
    let a = Dual::constant(x[0]) + (tt * Dual::constant(3.0)).sin();
    let b = Dual::constant(x[1]) - (tt * Dual::constant(3.0)).cos();
    let y = a * a + b * b;
    let w = tt * tt * y;
    x[0] * x[1] * (-0.5) * sinc(w.v.max(0.0).sqrt()) * w.dt
}

pub fn velocity(t: f64, x: [f64; 2]) -> [f64; 2] {
    let s = 2.0 + (3.0 * std::f64::consts::PI * t + x[0] * x[1] * t).cos();
    [-x[1] * s, x[0] * s]
}

/// Velocity components with spatial gradients at fixed t.
pub fn velocity_jet(t: f64, x: [f64; 2]) -> [Jet2; 2] {
    let x0 = Jet2::var_x(x[0]);
    let x1 = Jet2::var_y(x[1]);
    let phase = Jet2::constant(3.0 * std::f64::consts::PI * t) + x0 * x1 * Jet2::constant(t);
    let s = Jet2::constant(2.0) + phase.cos();
    [Jet2::constant(0.0) - x1 * s, x0 * s]
}

pub fn viscosity(x: [f64; 2], temp: f64) -> f64 {
    (x[0] * x[0] + x[1] * x[1]) * (-temp).exp()
}

/// Residual forcing of the transport equation on the manufactured fields:
/// f = T_t + u . grad T - k lap T - T (u . g) - 2 eta dev(u):dev(u) - 1,
/// with g = -x/|x|.
pub fn forcing(t: f64, x: [f64; 2], k: f64) -> f64 {
    let tj = temperature_jet(t, x);
    let t_t = temperature_dt(t, x);
    let uj = velocity_jet(t, x);
    let u = [uj[0].v, uj[1].v];
    let grad_t = [tj.dx, tj.dy];
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let g = [-x[0] / r, -x[1] / r];
    let du = [[uj[0].dx, uj[0].dy], [uj[1].dx, uj[1].dy]];
    let div = du[0][0] + du[1][1];
    let e00 = du[0][0] - 0.5 * div;
    let e11 = du[1][1] - 0.5 * div;
    let e01 = 0.5 * (du[0][1] + du[1][0]);
    let dev2 = e00 * e00 + e11 * e11 + 2.0 * e01 * e01;
    let eta = viscosity(x, tj.v);
    t_t + u[0] * grad_t[0] + u[1] * grad_t[1]
        - k * tj.laplacian()
        - tj.v * (u[0] * g[0] + u[1] * g[1])
        - 2.0 * eta * dev2
        - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: impl Fn([f64; 2]) -> f64, x: [f64; 2], h: f64) -> [f64; 2] {
        [
            (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h),
            (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h),
        ]
    }

    #[test]
    fn jets_match_finite_differences() {
        let (t, x) = (3.7, [0.8, -0.4]);
        let j = temperature_jet(t, x);
        assert!((j.v - temperature(t, x)).abs() < 1e-14);
        let g = fd_grad(|p| temperature(t, p), x, 1e-6);
        assert!((j.dx - g[0]).abs() < 1e-7, "{} vs {}", j.dx, g[0]);
        assert!((j.dy - g[1]).abs() < 1e-7);
        // Laplacian against second differences.
        let h = 1e-4;
        let lap_fd = (temperature(t, [x[0] + h, x[1]])
            + temperature(t, [x[0] - h, x[1]])
            + temperature(t, [x[0], x[1] + h])
            + temperature(t, [x[0], x[1] - h])
            - 4.0 * temperature(t, x))
            / (h * h);
        assert!((j.laplacian() - lap_fd).abs() < 1e-5);
        // Time derivative.
        let ht = 1e-6;
        let dt_fd = (temperature(t + ht, x) - temperature(t - ht, x)) / (2.0 * ht);
        assert!((temperature_dt(t, x) - dt_fd).abs() < 1e-7);
        // Velocity gradients.
        let vj = velocity_jet(t, x);
        for c in 0..2 {
            let gv = fd_grad(|p| velocity(t, p)[c], x, 1e-6);
            assert!((vj[c].dx - gv[0]).abs() < 1e-7);
            assert!((vj[c].dy - gv[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn forcing_is_finite_and_smooth_on_the_test_annulus() {
        for i in 0..50 {
            let th = i as f64 * 0.13;
            let r = 0.55 + 0.9 * (i as f64 / 50.0);
            let x = [r * th.cos(), r * th.sin()];
            let f = forcing(3.5 + 0.02 * i as f64, x, 0.1);
            assert!(f.is_finite());
        }
    }

    #[test]
    fn jets_stay_finite_at_the_moving_centre() {
        // The distance argument vanishes where x = (-sin 3t, cos 3t), a
        // point inside the annulus; derivatives must stay finite there.
        for t in [3.5f64, 3.875, 4.1, 4.5] {
            let c = [-(3.0 * t).sin(), (3.0 * t).cos()];
            for d in [0.0, 1e-12, 1e-8, 1e-5, 1e-3] {
                let x = [c[0] + d, c[1] - 0.3 * d];
                let j = temperature_jet(t, x);
                assert!(
                    j.v.is_finite()
                        && j.dx.is_finite()
                        && j.dy.is_finite()
                        && j.laplacian().is_finite(),
                    "t={t}, d={d}: {j:?}"
                );
                assert!(temperature_dt(t, x).is_finite());
                assert!(forcing(t, x, 0.1).is_finite());
            }
        }
        // Branch consistency across the series switch.
        for t in [3.6f64, 4.2] {
            let c = [-(3.0 * t).sin(), (3.0 * t).cos()];
            let j_lo = temperature_jet(t, [c[0] + 2.4e-4, c[1]]);
            let j_hi = temperature_jet(t, [c[0] + 2.6e-4, c[1]]);
            assert!((j_lo.laplacian() - j_hi.laplacian()).abs() < 1e-2);
        }
    }
}
