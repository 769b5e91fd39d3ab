//! Wireless coverage: choose transmission rates `c_i` of minimum total so
//! that the received energy `E(z) = Σ c_i / ‖z − t_i‖²` is at least `C` on
//! every region.
//!
//! Clearing denominators gives the polynomial condition
//! `p(z) = −C Π_i d_i(z) + Σ_i c_i Π_{k≠i} d_k(z) ≥ 0` on each region, with
//! `d_i(z) = ‖z − t_i‖²`. Each region gets its own Putinar identity and all of
//! them share the rate variables.

use std::fmt::Write;

use thiserror::Error;

use crate::certify::{
    add_putinar, finish_putinar, CertifyError, ConeTag, LinPoly, PutinarCertificate,
    SemialgebraicSet, VERIFY_TOL,
};
use crate::conic::{self, Backend, ConicProgram, LinExpr, SolveOptions, SolveStatus};
use crate::poly::Polynomial;

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("point ({0}, {1}) coincides with a transmitter")]
    AtTransmitter(f64, f64),
    #[error("infeasible at this multiplier degree and cone (solver: {0})")]
    Infeasible(String),
    #[error("unknown built-in instance '{0}'")]
    UnknownInstance(String),
    #[error("instance format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

/// `{z : (z − center)ᵀ A (z − center) ≤ alpha}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Symmetric, stored as `[a11, a12, a22]`.
    pub a: [f64; 3],
    pub alpha: f64,
}

impl Ellipse {
    pub fn quad_form(&self, z: [f64; 2]) -> f64 {
        let dx = z[0] - self.center[0];
        let dy = z[1] - self.center[1];
        self.a[0] * dx * dx + 2.0 * self.a[1] * dx * dy + self.a[2] * dy * dy
    }

    /// `alpha − (z − center)ᵀ A (z − center)`.
    pub fn constraint(&self) -> Polynomial {
        let dx = &Polynomial::var(2, 0) - &Polynomial::constant(2, self.center[0]);
        let dy = &Polynomial::var(2, 1) - &Polynomial::constant(2, self.center[1]);
        let q = &(&(&dx * &dx).scale(self.a[0]) + &(&dx * &dy).scale(2.0 * self.a[1]))
            + &(&dy * &dy).scale(self.a[2]);
        &Polynomial::constant(2, self.alpha) - &q
    }

    pub fn set(&self) -> SemialgebraicSet {
        SemialgebraicSet::new(2)
            .with_inequality(self.constraint())
            .expect("bivariate constraint")
    }

    /// Boundary point at angle `theta` of the unit-circle parameterization.
    pub fn boundary_point(&self, theta: f64) -> [f64; 2] {
        // A = LLᵀ; z = center + √α L⁻ᵀ (cos θ, sin θ)
        let l11 = self.a[0].sqrt();
        let l21 = self.a[1] / l11;
        let l22 = (self.a[2] - l21 * l21).sqrt();
        let (c, s) = (theta.cos(), theta.sin());
        let r = self.alpha.sqrt();
        // solve Lᵀ w = (c, s)
        let w2 = s / l22;
        let w1 = (c - l21 * w2) / l11;
        [self.center[0] + r * w1, self.center[1] + r * w2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageInstance {
    pub transmitters: Vec<[f64; 2]>,
    /// Upper bound per rate; `f64::INFINITY` when unbounded.
    pub rate_bounds: Vec<f64>,
    pub level: f64,
    pub regions: Vec<Ellipse>,
}

impl CoverageInstance {
    /// The two-transmitter, five-ellipse instance with `C = 10`, `γ = 11`.
    ///
    /// The ellipse levels are the published `α_j` divided by 10. Taken
    /// literally, `α_5 = 0.2` puts transmitter 2 inside region 5, and the
    /// published single-transmitter optima (17.594, 11.446) come out as
    /// 24.156 and 16.064. With `α_j / 10` both optima are reproduced and every
    /// transmitter is outside every region.
    pub fn paper_fig1() -> Self {
        let e = |cx: f64, cy: f64, a: [f64; 3], alpha: f64| Ellipse {
            center: [cx, cy],
            a,
            alpha: alpha / 10.0,
        };
        CoverageInstance {
            transmitters: vec![[1.0, 1.5], [2.0, 1.0]],
            rate_bounds: vec![11.0, 11.0],
            level: 10.0,
            regions: vec![
                e(1.1, 1.75, [3.0, 1.0, 1.0], 0.1),
                e(1.25, 2.0, [1.0, 0.0, 3.0], 0.1),
                e(1.5, 1.75, [1.0, 0.0, 1.0], 0.1),
                e(1.8, 1.8, [1.0, -1.0, 3.0], 0.1),
                e(2.0, 1.4, [5.0, 0.0, 1.0], 0.2),
            ],
        }
    }

    pub fn builtin(name: &str) -> Result<Self, CoverageError> {
        match name {
            "paper-fig1" => Ok(Self::paper_fig1()),
            other => Err(CoverageError::UnknownInstance(other.to_string())),
        }
    }

    /// Keeps only transmitter `i`, with its rate bound lifted.
    pub fn single(&self, i: usize) -> Self {
        CoverageInstance {
            transmitters: vec![self.transmitters[i]],
            rate_bounds: vec![f64::INFINITY],
            level: self.level,
            regions: self.regions.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        let bad = |m: String| Err(CoverageError::Invalid(m));
        if self.transmitters.is_empty() {
            return bad("no transmitters".into());
        }
        if self.rate_bounds.len() != self.transmitters.len() {
            return bad("one rate bound per transmitter required".into());
        }
        if !(self.level > 0.0) {
            return bad("required level must be positive".into());
        }
        if let Some(g) = self.rate_bounds.iter().find(|&&g| !(g > 0.0)) {
            return bad(format!("rate bound {g} must be positive"));
        }
        for (j, e) in self.regions.iter().enumerate() {
            if !(e.alpha > 0.0 && e.a[0] > 0.0 && e.a[0] * e.a[2] - e.a[1] * e.a[1] > 0.0) {
                return bad(format!("region {j} is not a nondegenerate ellipse"));
            }
            for (i, t) in self.transmitters.iter().enumerate() {
                if e.quad_form(*t) <= e.alpha {
                    return bad(format!("transmitter {i} lies in region {j}"));
                }
            }
        }
        Ok(())
    }

    /// `d_i(z) = ‖z − t_i‖²`.
    fn sq_dist(&self, i: usize) -> Polynomial {
        let [tx, ty] = self.transmitters[i];
        let dx = &Polynomial::var(2, 0) - &Polynomial::constant(2, tx);
        let dy = &Polynomial::var(2, 1) - &Polynomial::constant(2, ty);
        &(&dx * &dx) + &(&dy * &dy)
    }

    /// `−C Π d_i + Σ c_i Π_{k≠i} d_k` with affine rate expressions.
    pub fn numerator(&self, rates: &[LinExpr]) -> LinPoly {
        assert_eq!(rates.len(), self.transmitters.len());
        let d: Vec<Polynomial> = (0..self.transmitters.len()).map(|i| self.sq_dist(i)).collect();
        let all = d.iter().fold(Polynomial::constant(2, 1.0), |acc, di| &acc * di);
        let mut p = LinPoly::from(&all.scale(-self.level));
        for (i, c) in rates.iter().enumerate() {
            let others = d
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .fold(Polynomial::constant(2, 1.0), |acc, (_, dk)| &acc * dk);
            for (m, coef) in others.terms() {
                p.add_term(m.clone(), c, coef);
            }
        }
        p
    }

    /// The numerator at fixed rates.
    pub fn numerator_at(&self, rates: &[f64]) -> Polynomial {
        let exprs: Vec<LinExpr> = rates.iter().map(|&c| LinExpr::constant_expr(c)).collect();
        self.numerator(&exprs).value_at(&[])
    }

    /// Product of all squared distances at `z`.
    pub fn denominator_at(&self, z: [f64; 2]) -> f64 {
        (0..self.transmitters.len())
            .map(|i| self.sq_dist(i).eval(&z))
            .product()
    }

    pub fn energy(&self, rates: &[f64], z: [f64; 2]) -> Result<f64, CoverageError> {
        energy_field(&self.transmitters, rates, z)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "level {:?}", self.level).unwrap();
        for (t, g) in self.transmitters.iter().zip(&self.rate_bounds) {
            writeln!(s, "transmitter {:?} {:?} {:?}", t[0], t[1], g).unwrap();
        }
        for e in &self.regions {
            writeln!(
                s,
                "ellipse {:?} {:?} {:?} {:?} {:?} {:?}",
                e.center[0], e.center[1], e.a[0], e.a[1], e.a[2], e.alpha
            )
            .unwrap();
        }
        s
    }

    /// Line-based instance file:
    ///
    /// ```text
    /// # comment
    /// level 10
    /// transmitter <x> <y> <rate bound or inf>
    /// ellipse <cx> <cy> <a11> <a12> <a22> <alpha>
    /// ```
    pub fn from_text(text: &str) -> Result<Self, CoverageError> {
        let mut inst = CoverageInstance {
            transmitters: Vec::new(),
            rate_bounds: Vec::new(),
            level: f64::NAN,
            regions: Vec::new(),
        };
        for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or("");
            let nums = it
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CoverageError::Format {
                    line: ln,
                    msg: e.to_string(),
                })?;
            let want = |k: usize| -> Result<(), CoverageError> {
                if nums.len() == k {
                    Ok(())
                } else {
                    Err(CoverageError::Format {
                        line: ln,
                        msg: format!("'{key}' takes {k} numbers, got {}", nums.len()),
                    })
                }
            };
            match key {
                "level" => {
                    want(1)?;
                    inst.level = nums[0];
                }
                "transmitter" => {
                    want(3)?;
                    inst.transmitters.push([nums[0], nums[1]]);
                    inst.rate_bounds.push(nums[2]);
                }
                "ellipse" => {
                    want(6)?;
                    inst.regions.push(Ellipse {
                        center: [nums[0], nums[1]],
                        a: [nums[2], nums[3], nums[4]],
                        alpha: nums[5],
                    });
                }
                other => {
                    return Err(CoverageError::Format {
                        line: ln,
                        msg: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        inst.validate()?;
        Ok(inst)
    }
}

/// `Σ c_i / ‖z − t_i‖²`.
pub fn energy_field(transmitters: &[[f64; 2]], rates: &[f64], z: [f64; 2]) -> Result<f64, CoverageError> {
    let mut e = 0.0;
    for (t, c) in transmitters.iter().zip(rates) {
        let d = (z[0] - t[0]).powi(2) + (z[1] - t[1]).powi(2);
        if d == 0.0 {
            return Err(CoverageError::AtTransmitter(z[0], z[1]));
        }
        e += c / d;
    }
    Ok(e)
}

#[derive(Clone, Debug)]
pub struct CoverageSolution {
    pub rates: Vec<f64>,
    pub total: f64,
    /// One per region, each already verified.
    pub certificates: Vec<PutinarCertificate>,
    pub solve_time: f64,
}

impl CoverageSolution {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "polycert-coverage 1").unwrap();
        let rates: Vec<String> = self.rates.iter().map(|c| conic::real(*c)).collect();
        writeln!(s, "rates {}", rates.join(" ")).unwrap();
        writeln!(s, "total {}", conic::real(self.total)).unwrap();
        writeln!(s, "regions {}", self.certificates.len()).unwrap();
        for c in &self.certificates {
            s.push_str(&c.to_text());
        }
        s
    }
}

/// Minimizes the total rate subject to certified coverage of every region.
pub fn solve_coverage(
    inst: &CoverageInstance,
    mult_degree: u32,
    cone: ConeTag,
    backend: &dyn Backend,
) -> Result<CoverageSolution, CoverageError> {
    inst.validate()?;
    let mut prog = ConicProgram::new();
    let rates = prog.add_variables(inst.transmitters.len());
    prog.add_nonneg(&rates).map_err(CertifyError::from)?;
    for (&c, &g) in rates.iter().zip(&inst.rate_bounds) {
        if g.is_finite() {
            let mut slack = LinExpr::constant_expr(g);
            slack.add_term(c, -1.0);
            prog.add_linear_nonneg(&slack).map_err(CertifyError::from)?;
        }
        prog.add_objective_term(c, 1.0).map_err(CertifyError::from)?;
    }
    let exprs: Vec<LinExpr> = rates.iter().map(|&c| LinExpr::var(c)).collect();
    let p = inst.numerator(&exprs);
    let handles = inst
        .regions
        .iter()
        .map(|e| add_putinar(&mut prog, &p, &e.set(), cone, mult_degree))
        .collect::<Result<Vec<_>, _>>()?;

    let sol = conic::solve(&prog, backend, &SolveOptions::default()).map_err(CertifyError::from)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(CoverageError::Infeasible(sol.backend_status)),
        SolveStatus::Optimal | SolveStatus::Inaccurate => {}
        _ => return Err(CertifyError::SolverFailure(sol.backend_status).into()),
    }
    let certificates = handles
        .iter()
        .map(|h| finish_putinar(h, &sol, VERIFY_TOL))
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = rates.iter().map(|&c| sol.value(c)).collect();
    Ok(CoverageSolution {
        total: values.iter().sum(),
        rates: values,
        certificates,
        solve_time: sol.solve_time,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSample {
    pub x: f64,
    pub y: f64,
    /// `None` exactly at a transmitter.
    pub energy: Option<f64>,
    pub covered: bool,
}

/// Energy on a `resolution × resolution` grid including the box corners.
pub fn sample_energy_grid(
    inst: &CoverageInstance,
    rates: &[f64],
    bbox: [f64; 4],
    resolution: usize,
) -> Vec<GridSample> {
    let [x0, x1, y0, y1] = bbox;
    let step = |lo: f64, hi: f64, k: usize| {
        if resolution <= 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (resolution - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            let z = [step(x0, x1, i), step(y0, y1, j)];
            let energy = inst.energy(rates, z).ok();
            out.push(GridSample {
                x: z[0],
                y: z[1],
                energy,
                covered: energy.is_none_or(|e| e >= inst.level),
            });
        }
    }
    out
}

/// CSV with columns `x,y,energy,log_energy,covered`.
pub fn grid_csv(samples: &[GridSample]) -> String {
    let mut s = String::from("x,y,energy,log_energy,covered\n");
    for g in samples {
        let (e, le) = match g.energy {
            Some(e) => (format!("{e:.9e}"), format!("{:.9e}", e.ln())),
            None => ("inf".into(), "inf".into()),
        };
        writeln!(s, "{:.9e},{:.9e},{e},{le},{}", g.x, g.y, u8::from(g.covered)).unwrap();
    }
    s
}

/// Default plotting box and resolution.
pub const DEFAULT_BBOX: [f64; 4] = [0.5, 2.5, 0.5, 2.5];
pub const DEFAULT_RESOLUTION: usize = 400;

/// Smallest energy over the points of a `bbox` grid that lie in some region.
pub fn min_energy_on_regions(
    inst: &CoverageInstance,
    rates: &[f64],
    bbox: [f64; 4],
    resolution: usize,
) -> f64 {
    sample_energy_grid(inst, rates, bbox, resolution)
        .iter()
        .filter(|g| inst.regions.iter().any(|e| e.quad_form([g.x, g.y]) <= e.alpha))
        .filter_map(|g| g.energy)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest energy over a grid on the bounding box of region `j`.
pub fn min_energy_in_region(inst: &CoverageInstance, rates: &[f64], j: usize, resolution: usize) -> f64 {
    let e = &inst.regions[j];
    // half-widths of the bounding box
    let det = e.a[0] * e.a[2] - e.a[1] * e.a[1];
    let hx = (e.alpha * e.a[2] / det).sqrt();
    let hy = (e.alpha * e.a[0] / det).sqrt();
    let bbox = [e.center[0] - hx, e.center[0] + hx, e.center[1] - hy, e.center[1] + hy];
    sample_energy_grid(inst, rates, bbox, resolution)
        .iter()
        .filter(|g| e.quad_form([g.x, g.y]) <= e.alpha)
        .filter_map(|g| g.energy)
        .fold(f64::INFINITY, f64::min)
}
