//! Constitutive models and nondimensionalisation.
//!
//! All solver-facing quantities are nondimensional; dimensional reference
//! constants appear only here and at the configuration boundary. Velocity
//! scale u0, length scale d (mantle thickness) and temperature scale dT give
//! the derived scales for time, pressure and heating, and the dimensionless
//! groups Ra, Pe, Di, gamma and xi.

use std::sync::Arc;

/// Dimensional reference constants (SI units).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceConstants {
    /// Mantle thickness [m].
    pub d: f64,
    /// Temperature difference [K].
    pub delta_t: f64,
    /// Viscosity [Pa s].
    pub eta0: f64,
    /// Density [kg/m^3].
    pub rho0: f64,
    /// Specific heat capacity [J/(K kg)].
    pub cp0: f64,
    /// Thermal expansivity [1/K].
    pub alpha0: f64,
    /// Gravity [m/s^2].
    pub g0: f64,
    /// Velocity [m/s].
    pub u0: f64,
    /// Thermal conductivity [W/(m K)].
    pub k0: f64,
    /// Grueneisen parameter [-].
    pub gamma0: f64,
    /// Surface radius [m].
    pub r_surface_m: f64,
    /// Core-mantle boundary radius [m].
    pub r_cmb_m: f64,
    /// Surface temperature [K].
    pub t_surface: f64,
    /// CMB temperature [K].
    pub t_cmb: f64,
    /// Density at the top of the mantle [kg/m^3].
    pub rho_top: f64,
    /// Adiabatic temperature at the top of the mantle [K].
    pub t_adiabatic: f64,
}

impl Default for ReferenceConstants {
    fn default() -> Self {
        ReferenceConstants {
            d: 2.891e6,
            delta_t: 3.900e3,
            eta0: 1.000e22,
            rho0: 4.686e3,
            cp0: 1.250e3,
            alpha0: 2.000e-5,
            g0: 9.810,
            u0: 5.000e-9,
            k0: 3.000,
            gamma0: 1.200,
            r_surface_m: 6.371e6,
            r_cmb_m: 3.480e6,
            t_surface: 3.000e2,
            t_cmb: 4.200e3,
            rho_top: 3.381e3,
            t_adiabatic: 1.600e3,
        }
    }
}

/// Derived scales and dimensionless groups.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionlessNumbers {
    pub ra: f64,
    pub pe: f64,
    pub di: f64,
    /// Mantle compressibility gamma = Di / Gamma_0.
    pub gamma: f64,
    /// Driving term xi = alpha_0 dT.
    pub xi: f64,
    /// Thermal diffusivity scale [m^2/s].
    pub kappa0_d: f64,
    /// Time scale [s].
    pub t0: f64,
    /// Pressure scale [Pa].
    pub p0: f64,
    /// Internal heating scale [W/kg].
    pub h0: f64,
    /// Latent heat scale [W/m^3].
    pub ql0: f64,
    /// Isothermal bulk modulus scale [Pa].
    pub kt0: f64,
    /// Isothermal compressibility scale [1/Pa].
    pub kappa_t0: f64,
}

pub fn nondimensionalize(rc: &ReferenceConstants) -> DimensionlessNumbers {
    let kappa0_d = rc.k0 / (rc.rho0 * rc.cp0);
    let di = rc.alpha0 * rc.g0 * rc.d / rc.cp0;
    let kappa_t0 = rc.alpha0 / (rc.gamma0 * rc.rho0 * rc.cp0);
    DimensionlessNumbers {
        ra: rc.rho0 * rc.alpha0 * rc.g0 * rc.delta_t * rc.d.powi(3) / (kappa0_d * rc.eta0),
        pe: rc.u0 * rc.d / kappa0_d,
        di,
        gamma: di / rc.gamma0,
        xi: rc.alpha0 * rc.delta_t,
        kappa0_d,
        t0: rc.d / rc.u0,
        p0: rc.eta0 * rc.u0 / rc.d,
        h0: rc.cp0 * rc.delta_t * rc.u0 / rc.d,
        ql0: rc.rho0 * rc.u0 * rc.delta_t * rc.cp0 / rc.d,
        kt0: 1.0 / kappa_t0,
        kappa_t0,
    }
}

/// Human-readable block of the derived scales and dimensionless groups,
/// printed at startup for audit.
pub fn derived_constants_report(rc: &ReferenceConstants) -> String {
    let n = nondimensionalize(rc);
    format!(
        "derived reference constants:\n\
           thermal diffusivity  kappa0_d = {:.4e} m^2/s\n\
           time scale           t0       = {:.4e} s\n\
           pressure scale       p0       = {:.4e} Pa\n\
           internal heating     H0       = {:.4e} W/kg\n\
           latent heat          QL0      = {:.4e} W/m^3\n\
           bulk modulus         KT0      = {:.4e} Pa\n\
           compressibility      kappaT0  = {:.4e} 1/Pa\n\
         dimensionless groups:\n\
           Ra = {:.4e}   Pe = {:.4e}   Di = {:.4e}\n\
           gamma = {:.4e}   xi = {:.4e}\n",
        n.kappa0_d, n.t0, n.p0, n.h0, n.ql0, n.kt0, n.kappa_t0, n.ra, n.pe, n.di, n.gamma, n.xi
    )
}

/// Piecewise degree-6 polynomial surrogate for exp on a fixed interval,
/// Chebyshev-fitted per subinterval; relative error kept below the budget by
/// increasing the subinterval count. Outside the fitted range the exact
/// exponential is used.
#[derive(Clone, Debug)]
pub struct ExpSurrogate {
    pub lo: f64,
    pub hi: f64,
    pub intervals: usize,
    /// Chebyshev coefficients per subinterval, degree 6 (7 each).
    coeffs: Vec<[f64; 7]>,
}

impl ExpSurrogate {
    pub const DEGREE: usize = 6;

    pub fn fit(lo: f64, hi: f64, rel_err_budget: f64) -> Self {
        assert!(hi > lo);
        let mut intervals = 1;
        loop {
            let s = Self::fit_with_intervals(lo, hi, intervals);
            if s.scan_max_relative_error(100_000) < 0.9 * rel_err_budget {
                return s;
            }
            intervals += 1;
            assert!(intervals <= 64, "surrogate fit failed to meet budget");
        }
    }

    fn fit_with_intervals(lo: f64, hi: f64, intervals: usize) -> Self {
        let n = Self::DEGREE + 1;
        let width = (hi - lo) / intervals as f64;
        let mut coeffs = Vec::with_capacity(intervals);
        for m in 0..intervals {
            let a = lo + m as f64 * width;
            let b = a + width;
            // Chebyshev interpolation points and coefficients on [a, b].
            let mut f = [0.0; 7];
            for (k, fk) in f.iter_mut().enumerate() {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                let xk = 0.5 * (a + b) + 0.5 * (b - a) * theta.cos();
                *fk = xk.exp();
            }
            let mut c = [0.0; 7];
            for (j, cj) in c.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, fk) in f.iter().enumerate() {
                    let theta = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                    acc += fk * (j as f64 * theta).cos();
                }
                *cj = 2.0 * acc / n as f64;
            }
            c[0] *= 0.5;
            coeffs.push(c);
        }
        ExpSurrogate {
            lo,
            hi,
            intervals,
            coeffs,
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        if z < self.lo || z > self.hi {
            return z.exp();
        }
        let width = (self.hi - self.lo) / self.intervals as f64;
        let m = (((z - self.lo) / width) as usize).min(self.intervals - 1);
        let a = self.lo + m as f64 * width;
        let t = 2.0 * (z - a) / width - 1.0;
        // Clenshaw recurrence.
        let c = &self.coeffs[m];
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for j in (1..=Self::DEGREE).rev() {
            let b0 = 2.0 * t * b1 - b2 + c[j];
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + c[0]
    }

    pub fn scan_max_relative_error(&self, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=samples {
            let z = self.lo + (self.hi - self.lo) * i as f64 / samples as f64;
            let exact = z.exp();
            worst = worst.max((self.eval(z) - exact).abs() / exact);
        }
        worst
    }
}

/// Frank-Kamenetskii type viscosity: a radial base profile modulated by
/// exp(-E_A T + V_A (r_surface - |x|)).
#[derive(Clone)]
pub struct ViscosityModel {
    /// (radius, eta) knots, ascending radius; log-linear in between.
    pub base_table: Vec<(f64, f64)>,
    pub activation_energy: f64,
    pub activation_volume: f64,
    pub r_surface: f64,
    surrogate: Option<Arc<ExpSurrogate>>,
}

impl ViscosityModel {
    pub fn new(
        base_table: Vec<(f64, f64)>,
        activation_energy: f64,
        activation_volume: f64,
        r_cmb: f64,
        r_surface: f64,
        t_cmb_nd: f64,
        use_surrogate: bool,
    ) -> Self {
        assert!(!base_table.is_empty());
        for pair in base_table.windows(2) {
            assert!(pair[0].0 < pair[1].0, "base table radii must ascend");
        }
        assert!(base_table.iter().all(|&(_, e)| e > 0.0));
        let surrogate = if use_surrogate {
            // Exponent range attained for T in [0, T_cmb/dT] over the shell.
            let lo = -activation_energy * t_cmb_nd;
            let hi = activation_volume * (r_surface - r_cmb);
            Some(Arc::new(ExpSurrogate::fit(lo, hi, 6e-4)))
        } else {
            None
        };
        ViscosityModel {
            base_table,
            activation_energy,
            activation_volume,
            r_surface,
            surrogate,
        }
    }

    /// Constant viscosity (isoviscous tests).
    pub fn constant(value: f64, r_cmb: f64, r_surface: f64) -> Self {
        ViscosityModel::new(
            vec![(r_cmb, value), (r_surface, value)],
            0.0,
            0.0,
            r_cmb,
            r_surface,
            1.0,
            false,
        )
    }

    /// Radial base profile, log-linear between knots, clamped at the ends.
    pub fn base_viscosity(&self, r: f64) -> f64 {
        let t = &self.base_table;
        if r <= t[0].0 {
            return t[0].1;
        }
        if r >= t[t.len() - 1].0 {
            return t[t.len() - 1].1;
        }
        let k = t.partition_point(|&(rk, _)| rk < r).max(1);
        let (r0, e0) = t[k - 1];
        let (r1, e1) = t[k];
        let s = (r - r0) / (r1 - r0);
        (e0.ln() + s * (e1.ln() - e0.ln())).exp()
    }

    fn exponent(&self, x: [f64; 2], temperature: f64) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        -self.activation_energy * temperature + self.activation_volume * (self.r_surface - r)
    }

    /// eta(x, T) with the exact exponential.
    pub fn eta(&self, x: [f64; 2], temperature: f64) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        self.base_viscosity(r) * self.exponent(x, temperature).exp()
    }

    /// eta(x, T) with the piecewise-polynomial exponential (coarse levels).
    pub fn eta_surrogate(&self, x: [f64; 2], temperature: f64) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let z = self.exponent(x, temperature);
        match &self.surrogate {
            Some(s) => self.base_viscosity(r) * s.eval(z),
            None => self.base_viscosity(r) * z.exp(),
        }
    }

    pub fn surrogate(&self) -> Option<&ExpSurrogate> {
        self.surrogate.as_deref()
    }
}

/// Nondimensional model parameters of a simulation.
#[derive(Clone)]
pub struct PhysicalParams {
    pub numbers: DimensionlessNumbers,
    /// Nondimensional shell radii.
    pub r_cmb: f64,
    pub r_surface: f64,
    /// Nondimensional boundary and reference temperatures.
    pub t_surface_nd: f64,
    pub t_cmb_nd: f64,
    pub t_adiabatic_nd: f64,
    /// Nondimensional density at the top of the mantle.
    pub rho_top_nd: f64,
    pub viscosity: ViscosityModel,
    /// Nondimensional material constants (unity by model choice).
    pub alpha: f64,
    pub k: f64,
    pub cp: f64,
    pub h: f64,
    /// Zero shear heating on elements touching the surface.
    pub shear_cutoff_surface: bool,
    /// Keep the extrapolated-velocity advection term on the left-hand side
    /// of the diffusion solve (the characteristics transport already carries
    /// advection; default off).
    pub include_lhs_advection: bool,
    /// Relative amplitude of the initial temperature noise.
    pub noise_amplitude: f64,
}

impl PhysicalParams {
    pub fn from_reference(rc: &ReferenceConstants, use_surrogate: bool) -> Self {
        let numbers = nondimensionalize(rc);
        let r_cmb = rc.r_cmb_m / rc.d;
        let r_surface = rc.r_surface_m / rc.d;
        let t_cmb_nd = rc.t_cmb / rc.delta_t;
        let viscosity = ViscosityModel::new(
            default_base_viscosity_table(r_cmb, r_surface),
            4.610,
            2.996,
            r_cmb,
            r_surface,
            t_cmb_nd,
            use_surrogate,
        );
        PhysicalParams {
            numbers,
            r_cmb,
            r_surface,
            t_surface_nd: rc.t_surface / rc.delta_t,
            t_cmb_nd,
            t_adiabatic_nd: rc.t_adiabatic / rc.delta_t,
            rho_top_nd: rc.rho_top / rc.rho0,
            viscosity,
            alpha: 1.0,
            k: 1.0,
            cp: 1.0,
            h: 1.0,
            shear_cutoff_surface: true,
            include_lhs_advection: false,
            noise_amplitude: 0.03,
        }
    }

    /// Nondimensional density rho_top exp(gamma (r_s - |x|)).
    pub fn density(&self, x: [f64; 2]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!(r > 0.0, "density undefined at the origin");
        self.rho_top_nd * (self.numbers.gamma * (self.r_surface - r)).exp()
    }

    /// grad ln rho = -gamma x/|x| (closed form for the exponential profile).
    pub fn grad_ln_density(&self, x: [f64; 2]) -> [f64; 2] {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!(r > 0.0);
        [
            -self.numbers.gamma * x[0] / r,
            -self.numbers.gamma * x[1] / r,
        ]
    }

    /// Reference temperature T^s = T_adiabatic exp(Di (r_s - |x|)),
    /// nondimensionalised by dT.
    pub fn reference_temperature(&self, x: [f64; 2]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!(r > 0.0);
        self.t_adiabatic_nd * (self.numbers.di * (self.r_surface - r)).exp()
    }
}

/// Illustrative four-layer radial viscosity profile (in units of eta0):
/// stiff lithosphere, weak asthenosphere, transition, stiffer lower mantle.
/// Spans a contrast above 1e4; ships as data, not as a reproduced curve.
pub fn default_base_viscosity_table(r_cmb: f64, r_surface: f64) -> Vec<(f64, f64)> {
    let depth = |d: f64| r_surface - d;
    vec![
        (r_cmb, 5.0),
        (depth(0.35), 2.0),
        (depth(0.26), 1.0),
        (depth(0.23), 5e-2),
        (depth(0.08), 1e-2),
        (depth(0.05), 1e-2),
        (depth(0.033), 1e2),
        (r_surface, 1e2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn reference_table_reproduced_to_four_digits() {
        let n = nondimensionalize(&ReferenceConstants::default());
        assert!(close(n.kappa0_d, 5.122e-7, 1e-3));
        assert!(close(n.t0, 5.782e14, 1e-3));
        assert!(close(n.p0, 1.730e7, 1e-3));
        assert!(close(n.h0, 8.431e-9, 1e-3));
        assert!(close(n.ql0, 3.951e-5, 1e-3));
        assert!(close(n.kt0, 3.514e11, 1e-3));
        assert!(close(n.kappa_t0, 2.845e-12, 1e-3));
        assert!(close(n.ra, 1.692e7, 1e-3));
        assert!(close(n.di, 4.538e-1, 1e-3));
        assert!(close(n.pe, 2.822e4, 1e-3));
        assert!(close(n.gamma, 3.781e-1, 1e-3));
        assert!(close(n.xi, 7.800e-2, 1e-3));
    }

    #[test]
    fn scaling_homogeneity() {
        let rc = ReferenceConstants::default();
        let n = nondimensionalize(&rc);
        let mut rc2 = rc;
        rc2.eta0 *= 2.0;
        let n2 = nondimensionalize(&rc2);
        assert!(close(n2.ra, 0.5 * n.ra, 1e-14));
        assert!(close(n2.pe, n.pe, 1e-14));
        assert!(close(n2.di, n.di, 1e-14));
    }

    #[test]
    fn time_scale_round_trip() {
        let n = nondimensionalize(&ReferenceConstants::default());
        let myr = 1.0e6 * 365.25 * 24.0 * 3600.0;
        let nd = myr / n.t0;
        assert!(close(nd, 0.05458, 2e-3), "1 Myr -> {nd}");
    }

    #[test]
    fn viscosity_law_examples() {
        let p = PhysicalParams::from_reference(&ReferenceConstants::default(), false);
        let x_surf = [p.r_surface, 0.0];
        let base = p.viscosity.base_viscosity(p.r_surface);
        assert!(close(p.viscosity.eta(x_surf, 0.0), base, 1e-14));
        let at_one = p.viscosity.eta(x_surf, 1.0);
        assert!(close(at_one, base * (-4.610f64).exp(), 1e-12));
        assert!(close(at_one / base, 9.95e-3, 1e-2));
        // Monotone decreasing in T.
        assert!(p.viscosity.eta(x_surf, 0.5) > p.viscosity.eta(x_surf, 0.6));
    }

    #[test]
    fn density_and_reference_temperature() {
        let p = PhysicalParams::from_reference(&ReferenceConstants::default(), false);
        let x_surf = [0.0, p.r_surface];
        assert!(close(p.density(x_surf), 3381.0 / 4686.0, 1e-12));
        assert!(close(
            p.reference_temperature(x_surf),
            1600.0 / 3900.0,
            1e-12
        ));
        // Denser and hotter with depth.
        let x_cmb = [p.r_cmb, 0.0];
        assert!(p.density(x_cmb) > p.density(x_surf));
        assert!(p.reference_temperature(x_cmb) > p.reference_temperature(x_surf));
        // Finite differences of ln rho match the closed-form gradient.
        let x = [1.31, 0.64];
        let g = p.grad_ln_density(x);
        let h = 1e-6;
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let fd = (p.density(xp).ln() - p.density(xm).ln()) / (2.0 * h);
            assert!((fd - g[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn base_profile_interpolation() {
        let m = ViscosityModel::new(
            vec![(1.0, 4.0), (2.0, 16.0)],
            0.0,
            0.0,
            1.0,
            2.0,
            1.0,
            false,
        );
        // Knot values exact, midpoint is the geometric mean.
        assert_eq!(m.base_viscosity(1.0), 4.0);
        assert_eq!(m.base_viscosity(2.0), 16.0);
        assert!((m.base_viscosity(1.5) - 8.0).abs() < 1e-12);
        // Clamped outside.
        assert_eq!(m.base_viscosity(0.5), 4.0);
        assert_eq!(m.base_viscosity(2.5), 16.0);
        // Single-entry table is constant.
        let c = ViscosityModel::new(vec![(1.5, 7.0)], 0.0, 0.0, 1.0, 2.0, 1.0, false);
        assert_eq!(c.base_viscosity(1.2), 7.0);
    }

    #[test]
    fn default_profile_has_high_contrast() {
        let p = PhysicalParams::from_reference(&ReferenceConstants::default(), false);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..=400 {
            let r = p.r_cmb + (p.r_surface - p.r_cmb) * i as f64 / 400.0;
            for t in [p.t_surface_nd, 0.5, p.t_cmb_nd] {
                let e = p.viscosity.eta([r, 0.0], t);
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        assert!(hi / lo >= 1e4, "contrast {:.3e}", hi / lo);
    }

    #[test]
    fn exp_surrogate_meets_error_budget() {
        let s = ExpSurrogate::fit(-4.965, 2.996, 6e-4);
        assert!(s.scan_max_relative_error(200_000) < 6e-4);
        // Exact exp outside the fitted range.
        assert_eq!(s.eval(5.0), (5.0f64).exp());
    }
}
