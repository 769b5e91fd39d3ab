//! Barrier-certificate collision avoidance for a Dubins-style UAV.
//!
//! State `(x, y, ψ)` with `ẋ = −v sin ψ + w`, `ẏ = v cos ψ`, `ψ̇ = u`, unit speed
//! and bounded cross-wind `|w| ≤ 0.05`. Each control primitive servos the yaw
//! to a fixed heading. Before executing a primitive for one replanning period
//! the planner looks for a degree-4 `V` with
//!
//! * `V(x₀) = 0`,
//! * `V > 1` on each nearby obstacle (within the ball `X` around `x₀`),
//! * `V̇ < 0` on `X` for every admissible wind,
//!
//! using Taylor-expanded dynamics about the current yaw. Certificates are
//! computed in local coordinates `δ = (x − x₀, y − y₀, ψ − ψ₀)`, so `V` has no
//! constant term and `V(x₀) = 0` holds exactly.

use std::f64::consts::PI;
use std::fmt::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::certify::{
    add_putinar, declare_poly_var_with_basis, finish_putinar, CertifyError, ConeTag,
    PutinarCertificate, SemialgebraicSet, VERIFY_TOL,
};
use crate::conic::{self, Backend, BackendHandle, ConicProgram, SolveOptions, SolveStatus};
use crate::poly::{graded_basis, taylor_trig, Monomial, Polynomial, Trig};

pub const SPEED: f64 = 1.0;
pub const WIND_BOUND: f64 = 0.05;
pub const GAIN: f64 = 50.0;
pub const REPLAN_PERIOD: f64 = 0.05;
pub const SIM_DT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("no barrier certificate at this degree and cone (solver: {0})")]
    Infeasible(String),
    #[error("start state lies inside an obstacle")]
    StartInObstacle,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("environment format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

impl From<crate::poly::PolyError> for BarrierError {
    fn from(e: crate::poly::PolyError) -> Self {
        BarrierError::Certify(e.into())
    }
}

impl From<conic::ConicError> for BarrierError {
    fn from(e: conic::ConicError) -> Self {
        BarrierError::Certify(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UavState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl UavState {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        UavState { x, y, psi }
    }

    pub fn heading(&self) -> [f64; 2] {
        [-self.psi.sin(), self.psi.cos()]
    }

    fn local(&self, anchor: &UavState) -> [f64; 3] {
        [self.x - anchor.x, self.y - anchor.y, self.psi - anchor.psi]
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self, BarrierError> {
        if !(radius > 0.0) {
            return Err(BarrierError::Invalid(format!("obstacle radius {radius} must be positive")));
        }
        Ok(Obstacle { center, radius })
    }

    /// `(x − x_c)² + (y − y_c)² − r²`, nonnegative outside.
    pub fn outside(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2) - self.radius.powi(2)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.outside(p) < 0.0
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)).sqrt()
    }

    /// Interior `r² − ‖p − c‖² ≥ 0` in local coordinates `(δx, δy, δψ)` about `anchor`.
    fn interior_local(&self, anchor: &UavState) -> Polynomial {
        let mut g = Polynomial::constant(3, self.radius.powi(2));
        for (k, a) in [(0, anchor.x - self.center[0]), (1, anchor.y - self.center[1])] {
            let d = &Polynomial::var(3, k) + &Polynomial::constant(3, a);
            g = &g - &(&d * &d);
        }
        g
    }
}

/// `u = −K(ψ − ψ_des)`; indices 1 to 5 as in the primitive library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Primitive(usize);

impl Primitive {
    pub const ALL: [Primitive; 5] = [Primitive(1), Primitive(2), Primitive(3), Primitive(4), Primitive(5)];

    pub fn new(index: usize) -> Option<Self> {
        (1..=5).contains(&index).then_some(Primitive(index))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn psi_des(self) -> f64 {
        let deg = [0.0, -20.0, 20.0, -45.0, 45.0][self.0 - 1];
        deg * PI / 180.0
    }

    pub fn control(self, psi: f64) -> f64 {
        -GAIN * (psi - self.psi_des())
    }
}

/// `(ẋ, ẏ, ψ̇)`.
pub fn dubins_dynamics(s: &UavState, u: f64, w: f64) -> [f64; 3] {
    [-SPEED * s.psi.sin() + w, SPEED * s.psi.cos(), u]
}

/// Degree-3 Taylor model of the translational dynamics about `center`.
///
/// Variables are `(x, y, δψ, w)` with `δψ = ψ − center`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyDynamics {
    pub xdot: Polynomial,
    pub ydot: Polynomial,
}

pub fn taylor_dynamics(center: f64) -> PolyDynamics {
    let sin = taylor_trig(Trig::Sin, center, 3).embed(4, &[2]);
    let cos = taylor_trig(Trig::Cos, center, 3).embed(4, &[2]);
    PolyDynamics {
        xdot: &sin.scale(-SPEED) + &Polynomial::var(4, 3),
        ydot: cos.scale(SPEED),
    }
}

/// Closed-loop local field in `(δx, δy, δψ, w)`; the last component is `ẇ = 0`.
fn closed_loop_field(psi0: f64, primitive: Primitive) -> Vec<Polynomial> {
    let d = taylor_dynamics(psi0);
    let mut psidot = Polynomial::var(4, 2).scale(-GAIN);
    psidot.add_term(Monomial::one(4), -GAIN * (psi0 - primitive.psi_des()));
    vec![d.xdot, d.ydot, psidot, Polynomial::zero(4)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierOptions {
    pub v_degree: u32,
    /// Multiplier degree for the obstacle conditions.
    pub obstacle_mult_degree: u32,
    /// Multiplier degree for the decrease condition.
    pub decrease_mult_degree: u32,
    /// Radius of the ball `X` around the current state.
    pub ball_radius: f64,
    pub wind_bound: f64,
    /// Strictness margin on the obstacle and decrease conditions.
    pub eps: f64,
    pub solve: SolveOptions,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            v_degree: 4,
            obstacle_mult_degree: 2,
            decrease_mult_degree: 4,
            ball_radius: 1.0,
            wind_bound: WIND_BOUND,
            eps: 1e-4,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BarrierCertificate {
    /// `V` in local coordinates `(δx, δy, δψ)` about `anchor`.
    pub v: Polynomial,
    pub anchor: UavState,
    pub primitive: Primitive,
    pub cone: ConeTag,
    /// One per obstacle meeting `X`.
    pub obstacle_certs: Vec<PutinarCertificate>,
    pub decrease_cert: PutinarCertificate,
    pub solve_time: f64,
}

impl BarrierCertificate {
    pub fn value(&self, s: &UavState) -> f64 {
        self.v.eval(&s.local(&self.anchor))
    }

    /// `V` in global coordinates `(x, y, ψ)`.
    pub fn global(&self) -> Polynomial {
        let id = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let a = &self.anchor;
        self.v
            .substitute_affine(&id, &[-a.x, -a.y, -a.psi])
            .expect("three variables")
    }
}

fn ball(nvars: usize, on: usize, radius: f64) -> Polynomial {
    let mut g = Polynomial::constant(nvars, radius * radius);
    for i in 0..on {
        let mut e = vec![0; nvars];
        e[i] = 2;
        g.add_term(Monomial::new(e), -1.0);
    }
    g
}

/// Whether the obstacle disc meets the position slice of `X`.
pub fn obstacle_meets_ball(ob: &Obstacle, anchor: &UavState, radius: f64) -> bool {
    ob.distance([anchor.x, anchor.y]) < radius + ob.radius
}

/// Searches for a barrier certificate for `primitive` from `x0`.
///
/// Obstacles whose disc misses `X` have a vacuous condition and are skipped.
pub fn synthesize_barrier(
    x0: &UavState,
    obstacles: &[Obstacle],
    primitive: Primitive,
    cone: ConeTag,
    backend: &dyn Backend,
    opts: &BarrierOptions,
) -> Result<BarrierCertificate, BarrierError> {
    let started = Instant::now();
    if obstacles.iter().any(|o| o.contains([x0.x, x0.y])) {
        return Err(BarrierError::StartInObstacle);
    }
    let r = opts.ball_radius;
    let mut prog = ConicProgram::new();
    let v = declare_poly_var_with_basis(&mut prog, 3, graded_basis(3, 1, opts.v_degree));
    let v3 = v.to_linpoly();

    let ball3 = ball(3, 3, r);
    let mut obstacle_handles = Vec::new();
    for ob in obstacles.iter().filter(|o| obstacle_meets_ball(o, x0, r)) {
        let set = SemialgebraicSet::new(3)
            .with_inequality(ob.interior_local(x0))?
            .with_inequality(ball3.clone())?;
        let p = v3.add_poly(&Polynomial::constant(3, -1.0 - opts.eps));
        obstacle_handles.push(add_putinar(&mut prog, &p, &set, cone, opts.obstacle_mult_degree)?);
    }

    let v4 = v3.embed(4, &[0, 1, 2]);
    let vdot = v4.lie_derivative(&closed_loop_field(x0.psi, primitive))?;
    let neg = vdot.scale(-1.0).add_poly(&Polynomial::constant(4, -opts.eps));
    let mut wind = Polynomial::constant(4, opts.wind_bound * opts.wind_bound);
    wind.add_term(Monomial::new(vec![0, 0, 0, 2]), -1.0);
    let set4 = SemialgebraicSet::new(4)
        .with_inequality(ball(4, 3, r))?
        .with_inequality(wind)?;
    let decrease = add_putinar(&mut prog, &neg, &set4, cone, opts.decrease_mult_degree)?;

    let sol = conic::solve(&prog, backend, &opts.solve)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(BarrierError::Infeasible(sol.backend_status)),
        SolveStatus::Optimal | SolveStatus::Inaccurate => {}
        _ => return Err(CertifyError::SolverFailure(sol.backend_status).into()),
    }
    let obstacle_certs = obstacle_handles
        .iter()
        .map(|h| finish_putinar(h, &sol, VERIFY_TOL))
        .collect::<Result<Vec<_>, _>>()?;
    let decrease_cert = finish_putinar(&decrease, &sol, VERIFY_TOL)?;
    Ok(BarrierCertificate {
        v: v.value(&sol),
        anchor: *x0,
        primitive,
        cone,
        obstacle_certs,
        decrease_cert,
        solve_time: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Environment {
    pub obstacles: Vec<Obstacle>,
}

impl Environment {
    /// Obstacles with centers ahead of the vehicle, nearest first.
    pub fn in_front(&self, s: &UavState) -> Vec<Obstacle> {
        let h = s.heading();
        let mut v: Vec<Obstacle> = self
            .obstacles
            .iter()
            .filter(|o| (o.center[0] - s.x) * h[0] + (o.center[1] - s.y) * h[1] > 0.0)
            .copied()
            .collect();
        v.sort_by(|a, b| a.distance([s.x, s.y]).total_cmp(&b.distance([s.x, s.y])));
        v
    }

    pub fn penetrated(&self, p: [f64; 2]) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn clearance(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance(p) - o.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for o in &self.obstacles {
            writeln!(s, "obstacle {:?} {:?} {:?}", o.center[0], o.center[1], o.radius).unwrap();
        }
        s
    }

    /// Lines `obstacle <x_c> <y_c> <r>`; `#` starts a comment. Returns the
    /// environment and an optional `start <x> <y> <ψ>` line.
    pub fn from_text(text: &str) -> Result<(Environment, Option<UavState>), BarrierError> {
        let mut env = Environment::default();
        let mut start = None;
        for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or("");
            let nums = it
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| BarrierError::Format {
                    line: ln,
                    msg: e.to_string(),
                })?;
            if nums.len() != 3 {
                return Err(BarrierError::Format {
                    line: ln,
                    msg: format!("'{key}' takes 3 numbers"),
                });
            }
            match key {
                "obstacle" => env.obstacles.push(Obstacle::new([nums[0], nums[1]], nums[2])?),
                "start" => start = Some(UavState::new(nums[0], nums[1], nums[2])),
                other => {
                    return Err(BarrierError::Format {
                        line: ln,
                        msg: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        Ok((env, start))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttemptOutcome {
    Certified,
    /// No obstacle meets `X`; nothing to certify.
    Vacuous,
    /// The yaw excursion over one period would leave `X`.
    LeavesBall,
    Infeasible,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct Attempt {
    pub primitive: Primitive,
    pub outcome: AttemptOutcome,
    pub time: f64,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    /// `None` when no primitive could be certified.
    pub primitive: Option<Primitive>,
    pub certificate: Option<BarrierCertificate>,
    pub obstacles: Vec<Obstacle>,
    pub attempts: Vec<Attempt>,
}

#[derive(Clone)]
pub struct Planner {
    pub cone: ConeTag,
    pub backend: BackendHandle,
    pub opts: BarrierOptions,
    pub horizon: f64,
}

impl Planner {
    pub fn new(cone: ConeTag, backend: BackendHandle) -> Self {
        Planner {
            cone,
            backend,
            opts: BarrierOptions::default(),
            horizon: REPLAN_PERIOD,
        }
    }

    /// Whether executing `primitive` for one horizon from `s` stays in `X`.
    ///
    /// Yaw moves by at most `|ψ_des − ψ|(1 − e^{−K T})` and position by at
    /// most `T·√(v² + 2v·w̄ + w̄²)`.
    pub fn stays_in_ball(&self, s: &UavState, primitive: Primitive) -> bool {
        let dpsi = (primitive.psi_des() - s.psi).abs() * (1.0 - (-GAIN * self.horizon).exp());
        let dp = self.horizon * (SPEED + self.opts.wind_bound);
        dpsi * dpsi + dp * dp < self.opts.ball_radius.powi(2)
    }

    /// Tries primitives in index order; the first certified one wins.
    pub fn plan(&self, s: &UavState, env: &Environment) -> PlanResult {
        let obstacles: Vec<Obstacle> = env.in_front(s).into_iter().take(2).collect();
        let relevant = obstacles
            .iter()
            .any(|o| obstacle_meets_ball(o, s, self.opts.ball_radius));
        let mut attempts = Vec::new();
        for p in Primitive::ALL {
            let started = Instant::now();
            if !self.stays_in_ball(s, p) {
                attempts.push(Attempt {
                    primitive: p,
                    outcome: AttemptOutcome::LeavesBall,
                    time: 0.0,
                });
                continue;
            }
            if !relevant {
                attempts.push(Attempt {
                    primitive: p,
                    outcome: AttemptOutcome::Vacuous,
                    time: 0.0,
                });
                return PlanResult {
                    primitive: Some(p),
                    certificate: None,
                    obstacles,
                    attempts,
                };
            }
            match synthesize_barrier(s, &obstacles, p, self.cone, self.backend.as_ref(), &self.opts) {
                Ok(cert) => {
                    attempts.push(Attempt {
                        primitive: p,
                        outcome: AttemptOutcome::Certified,
                        time: cert.solve_time,
                    });
                    return PlanResult {
                        primitive: Some(p),
                        certificate: Some(cert),
                        obstacles,
                        attempts,
                    };
                }
                Err(e) => attempts.push(Attempt {
                    primitive: p,
                    outcome: match e {
                        BarrierError::Infeasible(_) | BarrierError::StartInObstacle => {
                            AttemptOutcome::Infeasible
                        }
                        other => AttemptOutcome::Failed(other.to_string()),
                    },
                    time: started.elapsed().as_secs_f64(),
                }),
            }
        }
        PlanResult {
            primitive: None,
            certificate: None,
            obstacles,
            attempts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindPolicy {
    Constant(f64),
    /// Fresh `U[−w̄, w̄]` draw every integration step.
    UniformRandom,
    /// `±w̄`, flipping sign every `period` seconds, starting positive.
    Switching { period: f64 },
}

impl WindPolicy {
    fn sample(&self, t: f64, bound: f64, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            WindPolicy::Constant(w) => w,
            WindPolicy::UniformRandom => rng.gen_range(-bound..=bound),
            WindPolicy::Switching { period } => {
                if ((t / period).floor() as i64) % 2 == 0 {
                    bound
                } else {
                    -bound
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub duration: f64,
    pub dt: f64,
    pub replan_period: f64,
    pub wind: WindPolicy,
    pub seed: u64,
    /// When false, primitive 1 is held for the whole run and no planning happens.
    pub plan: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: 1.0,
            dt: SIM_DT,
            replan_period: REPLAN_PERIOD,
            wind: WindPolicy::Constant(0.0),
            seed: 0,
            plan: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Certified,
    Vacuous,
    /// No safe primitive; the previous one is held.
    Fallback,
    Open,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Certified => "certified",
            StepStatus::Vacuous => "vacuous",
            StepStatus::Fallback => "fallback",
            StepStatus::Open => "open",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: UavState,
    pub u: f64,
    pub w: f64,
    pub primitive: Primitive,
    pub status: StepStatus,
    /// Index into [`Trajectory::plans`].
    pub plan: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct PlanRecord {
    pub t: f64,
    pub state: UavState,
    pub result: PlanResult,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub plans: Vec<PlanRecord>,
    pub fallbacks: usize,
    pub penetrations: usize,
    pub min_clearance: f64,
}

impl Trajectory {
    /// Every replan produced a certificate or was vacuous.
    pub fn all_certified(&self) -> bool {
        self.fallbacks == 0 && self.plans.iter().all(|p| p.result.primitive.is_some())
    }

    pub fn final_state(&self) -> UavState {
        self.points.last().map(|p| p.state).expect("nonempty trajectory")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y,psi,u,w,primitive,status\n");
        for p in &self.points {
            writeln!(
                s,
                "{:.6},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
                p.t,
                p.state.x,
                p.state.y,
                p.state.psi,
                p.u,
                p.w,
                p.primitive.index(),
                p.status.as_str()
            )
            .unwrap();
        }
        s
    }
}

fn rk4(s: &UavState, primitive: Primitive, w: f64, dt: f64) -> UavState {
    let f = |st: &UavState| dubins_dynamics(st, primitive.control(st.psi), w);
    let add = |st: &UavState, k: [f64; 3], h: f64| UavState::new(st.x + h * k[0], st.y + h * k[1], st.psi + h * k[2]);
    let k1 = f(s);
    let k2 = f(&add(s, k1, dt / 2.0));
    let k3 = f(&add(s, k2, dt / 2.0));
    let k4 = f(&add(s, k3, dt));
    let mut out = *s;
    out.x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    out.y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    out.psi = wrap_angle(s.psi + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]));
    out
}

/// Fixed-step RK4 on the exact dynamics with periodic replanning.
pub fn simulate(env: &Environment, init: UavState, cfg: &SimConfig, planner: &Planner) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let per_plan = ((cfg.replan_period / cfg.dt).round() as usize).max(1);
    let mut s = init;
    let mut primitive = Primitive(1);
    let mut status = if cfg.plan { StepStatus::Vacuous } else { StepStatus::Open };
    let mut plan_idx = None;
    let mut points = Vec::with_capacity(steps + 1);
    let mut plans = Vec::new();
    let mut fallbacks = 0;
    let mut penetrations = 0;
    let mut min_clearance = env.clearance([s.x, s.y]);

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        if cfg.plan && k % per_plan == 0 && k < steps {
            let result = planner.plan(&s, env);
            status = match (&result.primitive, &result.certificate) {
                (Some(p), Some(_)) => {
                    primitive = *p;
                    StepStatus::Certified
                }
                (Some(p), None) => {
                    primitive = *p;
                    StepStatus::Vacuous
                }
                (None, _) => {
                    fallbacks += 1;
                    StepStatus::Fallback
                }
            };
            plans.push(PlanRecord { t, state: s, result });
            plan_idx = Some(plans.len() - 1);
        }
        let w = cfg.wind.sample(t, WIND_BOUND, &mut rng);
        points.push(TrajectoryPoint {
            t,
            state: s,
            u: primitive.control(s.psi),
            w,
            primitive,
            status,
            plan: plan_idx,
        });
        if env.penetrated([s.x, s.y]) {
            penetrations += 1;
        }
        min_clearance = min_clearance.min(env.clearance([s.x, s.y]));
        if k < steps {
            s = rk4(&s, primitive, w, cfg.dt);
        }
    }
    Trajectory {
        points,
        plans,
        fallbacks,
        penetrations,
        min_clearance,
    }
}

/// Random obstacle field for closed-loop runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub n_obstacles: usize,
    pub radius: f64,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    /// Minimum distance from the start position to any obstacle surface.
    pub start_clearance: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_obstacles: 8,
            radius: 0.03,
            x_range: [-0.3, 0.3],
            y_range: [0.1, 1.0],
            start_clearance: 0.05,
        }
    }
}

pub fn random_environment(cfg: &EnvConfig, start: &UavState, rng: &mut ChaCha8Rng) -> Environment {
    let mut obstacles = Vec::with_capacity(cfg.n_obstacles);
    while obstacles.len() < cfg.n_obstacles {
        let c = [
            rng.gen_range(cfg.x_range[0]..=cfg.x_range[1]),
            rng.gen_range(cfg.y_range[0]..=cfg.y_range[1]),
        ];
        let o = Obstacle {
            center: c,
            radius: cfg.radius,
        };
        if o.distance([start.x, start.y]) - o.radius >= cfg.start_clearance {
            obstacles.push(o);
        }
    }
    Environment { obstacles }
}

/// Seeded substream for task `index` of a run.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Config {
    pub psi0_deg: Vec<f64>,
    pub n_envs: usize,
    pub seed: u64,
    pub cones: Vec<ConeTag>,
    pub radius: f64,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            psi0_deg: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            n_envs: 100,
            seed: 7,
            cones: vec![ConeTag::Sdsos, ConeTag::Sos],
            radius: 0.03,
            x_range: [-0.2, 0.2],
            y_range: [0.0, 0.2],
        }
    }
}

/// Two obstacles for environment `env` at yaw index `row`; independent of the cone.
pub fn table1_environment(cfg: &Table1Config, row: usize, env: usize) -> [Obstacle; 2] {
    let mut rng = task_rng(cfg.seed, (row * cfg.n_envs + env) as u64);
    let mut draw = || Obstacle {
        center: [
            rng.gen_range(cfg.x_range[0]..=cfg.x_range[1]),
            rng.gen_range(cfg.y_range[0]..=cfg.y_range[1]),
        ],
        radius: cfg.radius,
    };
    [draw(), draw()]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Record {
    pub psi0_deg: f64,
    pub env: usize,
    pub cone: ConeTag,
    pub success: bool,
    pub time: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Result {
    pub config: Table1Config,
    pub records: Vec<Table1Record>,
}

impl Table1Result {
    pub fn success_pct(&self, psi0_deg: f64, cone: ConeTag) -> f64 {
        let rows: Vec<&Table1Record> = self
            .records
            .iter()
            .filter(|r| r.psi0_deg == psi0_deg && r.cone == cone)
            .collect();
        100.0 * rows.iter().filter(|r| r.success).count() as f64 / rows.len().max(1) as f64
    }

    pub fn median_time(&self, cone: ConeTag) -> f64 {
        let mut t: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.cone == cone)
            .map(|r| r.time)
            .collect();
        if t.is_empty() {
            return f64::NAN;
        }
        t.sort_by(f64::total_cmp);
        let n = t.len();
        if n % 2 == 1 {
            t[n / 2]
        } else {
            0.5 * (t[n / 2 - 1] + t[n / 2])
        }
    }

    /// Environments certified by `lo` but not by `hi`.
    pub fn inclusion_violations(&self, lo: ConeTag, hi: ConeTag) -> usize {
        self.records
            .iter()
            .filter(|r| r.cone == lo && r.success)
            .filter(|r| {
                !self.records.iter().any(|h| {
                    h.cone == hi && h.psi0_deg == r.psi0_deg && h.env == r.env && h.success
                })
            })
            .count()
    }

    /// One row per yaw with a success column per cone; deterministic for a seed.
    pub fn summary_csv(&self) -> String {
        let cones = &self.config.cones;
        let mut s = String::from("psi0_deg");
        for c in cones {
            write!(s, ",{c}_success_pct").unwrap();
        }
        s.push('\n');
        for &psi in &self.config.psi0_deg {
            write!(s, "{psi}").unwrap();
            for &c in cones {
                write!(s, ",{:.1}", self.success_pct(psi, c)).unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Median wall-clock time per cone; varies between runs.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("cone,median_time_s,calls\n");
        for &c in &self.config.cones {
            let calls = self.records.iter().filter(|r| r.cone == c).count();
            writeln!(s, "{c},{:.6},{calls}", self.median_time(c)).unwrap();
        }
        s
    }

    /// Per-call records for timing histograms.
    pub fn records_csv(&self) -> String {
        let mut s = String::from("psi0_deg,env,cone,success,time_s\n");
        for r in &self.records {
            writeln!(s, "{},{},{},{},{:.6}", r.psi0_deg, r.env, r.cone, u8::from(r.success), r.time).unwrap();
        }
        s
    }
}

/// For each yaw and environment, tries primitive 1 from `(0, 0, ψ₀)` under every cone.
pub fn run_table1(
    cfg: &Table1Config,
    backend_for: &dyn Fn(ConeTag) -> BackendHandle,
    opts: &BarrierOptions,
) -> Table1Result {
    let mut records = Vec::new();
    for (row, &psi) in cfg.psi0_deg.iter().enumerate() {
        let x0 = UavState::new(0.0, 0.0, psi * PI / 180.0);
        for env in 0..cfg.n_envs {
            let obstacles = table1_environment(cfg, row, env);
            for &cone in &cfg.cones {
                let backend = backend_for(cone);
                let started = Instant::now();
                let out = synthesize_barrier(&x0, &obstacles, Primitive(1), cone, backend.as_ref(), opts);
                let time = started.elapsed().as_secs_f64();
                let (success, detail) = match out {
                    Ok(_) => (true, String::from("certified")),
                    Err(e) => (false, e.to_string()),
                };
                records.push(Table1Record {
                    psi0_deg: psi,
                    env,
                    cone,
                    success,
                    time,
                    detail,
                });
            }
        }
    }
    Table1Result {
        config: cfg.clone(),
        records,
    }
}
