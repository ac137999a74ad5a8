use super::{CondatVuForm, SolverConfig, SplitProblem, Splitting, Start};
use crate::error::{check_len, Error, Result};
use crate::operators::{OperatorKind, Vector};

fn initial_x(p: &SplitProblem, s: &Start) -> Result<Vector> {
    let x = s
        .x
        .clone()
        .or_else(|| p.initial.clone())
        .unwrap_or_else(|| Vector::zeros(p.dim()));
    check_len("start x", p.dim(), x.len())?;
    Ok(x)
}

fn initial_y(p: &SplitProblem, s: &Start) -> Result<Vector> {
    let y = s.y.clone().unwrap_or_else(|| Vector::zeros(p.dual_dim()));
    check_len("start y", p.dual_dim(), y.len())?;
    Ok(y)
}

/// `(z0, prox_{gamma g}(z0))` for the three-operator schemes.
fn initial_z(p: &SplitProblem, s: &Start, gamma: f64) -> Result<(Vector, Vector)> {
    let z = match &s.z {
        Some(z) => z.clone(),
        None => initial_x(p, s)?,
    };
    check_len("start z", p.dim(), z.len())?;
    let x = p.g.prox_unchecked(gamma, &z);
    Ok((z, x))
}

fn initial_v(p: &SplitProblem, s: &Start, x: &Vector) -> Result<Vector> {
    let v = s.v.clone().unwrap_or_else(|| x.clone());
    check_len("start v", p.dim(), v.len())?;
    Ok(v)
}

/// Outer forward-backward step with a dual forward-backward inner loop.
///
/// ```text
/// u      = x - gamma grad f(x)
/// y     <- prox_{(lambda/gamma) h*}(y + (lambda/gamma) B prox_{gamma g}(u - gamma B^T y))   (J times)
/// x_next = prox_{gamma g}(u - gamma B^T y)
/// ```
pub struct DualForwardBackward<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    lambda: f64,
    inner: usize,
    warm: bool,
    x: Vector,
    y: Vector,
}

impl<'a> DualForwardBackward<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_dual(p)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            lambda: c.lambda,
            inner: c.inner_iters,
            warm: c.warm_start_dual,
            x: initial_x(p, &start)?,
            y: initial_y(p, &start)?,
        })
    }
}

impl Splitting for DualForwardBackward<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let ratio = self.lambda / gamma;
        let u = &self.x - p.f.gradient(&self.x) * gamma;
        if !self.warm {
            self.y.fill(0.0);
        }
        for _ in 0..self.inner {
            let w = p.g.prox_unchecked(gamma, &(&u - p.b.adjoint_unchecked(&self.y) * gamma));
            self.y = p
                .h
                .prox_conjugate_unchecked(ratio, &(&self.y + p.b.apply_unchecked(&w) * ratio));
        }
        self.x = p.g.prox_unchecked(gamma, &(&u - p.b.adjoint_unchecked(&self.y) * gamma));
        self.inner
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Single-loop primal-dual fixed-point scheme.
///
/// ```text
/// v = prox_{gamma g}(x - gamma grad f(x) - gamma B^T y)
/// y = prox_{(lambda/gamma) h*}(y + (lambda/gamma) B v)
/// x = prox_{gamma g}(x - gamma grad f(x) - gamma B^T y)
/// ```
pub struct Pdfp<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    lambda: f64,
    x: Vector,
    y: Vector,
}

impl<'a> Pdfp<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_dual(p)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            lambda: c.lambda,
            x: initial_x(p, &start)?,
            y: initial_y(p, &start)?,
        })
    }
}

impl Splitting for Pdfp<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let ratio = self.lambda / gamma;
        let u = &self.x - p.f.gradient(&self.x) * gamma;
        let v = p.g.prox_unchecked(gamma, &(&u - p.b.adjoint_unchecked(&self.y) * gamma));
        self.y = p
            .h
            .prox_conjugate_unchecked(ratio, &(&self.y + p.b.apply_unchecked(&v) * ratio));
        self.x = p.g.prox_unchecked(gamma, &(&u - p.b.adjoint_unchecked(&self.y) * gamma));
        1
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// `gamma * prox_{(sigma/gamma) h*}(w / gamma)`, i.e. `prox_{sigma (gamma h)*}(w)`.
fn scaled_dual_prox(p: &SplitProblem, gamma: f64, sigma: f64, w: &Vector) -> Vector {
    p.h.prox_conjugate_unchecked(sigma / gamma, &(w / gamma)) * gamma
}

/// Outer forward-backward step with a primal-dual inner loop.
///
/// ```text
/// u     = x - gamma grad f(x)
/// xb'   = prox_{tau gamma/(1+tau) g}((xb - tau B^T y + tau u) / (1 + tau))
/// y     = gamma prox_{(sigma/gamma) h*}((y + sigma B(2 xb' - xb)) / gamma)      (J times)
/// x     = xb
/// ```
///
/// The inner primal variable `xb` carries over between outer iterations.
pub struct PrimalDualForwardBackward<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    sigma: f64,
    tau: f64,
    inner: usize,
    warm: bool,
    x: Vector,
    xbar: Vector,
    y: Vector,
}

impl<'a> PrimalDualForwardBackward<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_primal_dual(p)?;
        let x = initial_x(p, &start)?;
        let xbar = initial_v(p, &start, &x)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            sigma: c.sigma,
            tau: c.tau,
            inner: c.inner_iters,
            warm: c.warm_start_dual,
            x,
            xbar,
            y: initial_y(p, &start)?,
        })
    }
}

impl Splitting for PrimalDualForwardBackward<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma, sigma, tau) = (self.p, self.gamma, self.sigma, self.tau);
        let u = &self.x - p.f.gradient(&self.x) * gamma;
        if !self.warm {
            self.y.fill(0.0);
        }
        let g_step = tau * gamma / (1.0 + tau);
        for _ in 0..self.inner {
            let arg = (&self.xbar - p.b.adjoint_unchecked(&self.y) * tau + &u * tau) / (1.0 + tau);
            let next = p.g.prox_unchecked(g_step, &arg);
            let extrapolated = &next * 2.0 - &self.xbar;
            let w = &self.y + p.b.apply_unchecked(&extrapolated) * sigma;
            self.y = scaled_dual_prox(p, gamma, sigma, &w);
            self.xbar = next;
        }
        self.x.copy_from(&self.xbar);
        self.inner
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Single-loop Condat-Vu iteration.
///
/// ```text
/// x' = prox_{tau' g}(x - tau' B^T y - tau' grad f(x))
/// y  = prox_{sigma' h*}(y + sigma' B (2 x' - x))
/// ```
pub struct CondatVu<'a> {
    p: &'a SplitProblem,
    tau: f64,
    sigma: f64,
    x: Vector,
    y: Vector,
}

impl<'a> CondatVu<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, form: CondatVuForm, start: Start) -> Result<Self> {
        let (tau, sigma) = match form {
            CondatVuForm::Standard => {
                if !(c.tau > 0.0 && c.sigma >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Condat-Vu needs tau' > 0 and sigma' >= 0, got tau' = {}, sigma' = {}",
                        c.tau, c.sigma
                    )));
                }
                let margin = 1.0 / c.tau - c.sigma * p.spectral.estimate;
                let half_l = p.f.lipschitz() / 2.0;
                if !(margin > half_l) {
                    return Err(Error::InvalidParameter(format!(
                        "Condat-Vu requires 1/tau' - sigma' |B|^2 > L/2, got {margin} <= {half_l}"
                    )));
                }
                (c.tau, c.sigma)
            }
            CondatVuForm::Tau1 => {
                let unit_tau = SolverConfig { tau: 1.0, ..c.clone() };
                unit_tau.validate_primal_dual(p)?;
                (c.gamma / 2.0, c.sigma / c.gamma)
            }
        };
        Ok(Self {
            p,
            tau,
            sigma,
            x: initial_x(p, &start)?,
            y: initial_y(p, &start)?,
        })
    }

    /// `(tau', sigma')` actually used by the iteration.
    pub fn steps(&self) -> (f64, f64) {
        (self.tau, self.sigma)
    }
}

impl Splitting for CondatVu<'_> {
    fn step(&mut self) -> usize {
        let (p, tau, sigma) = (self.p, self.tau, self.sigma);
        let arg = &self.x - p.b.adjoint_unchecked(&self.y) * tau - p.f.gradient(&self.x) * tau;
        let next = p.g.prox_unchecked(tau, &arg);
        let extrapolated = &next * 2.0 - &self.x;
        let w = &self.y + p.b.apply_unchecked(&extrapolated) * sigma;
        self.y = if sigma > 0.0 {
            p.h.prox_conjugate_unchecked(sigma, &w)
        } else {
            self.y.clone()
        };
        self.x = next;
        1
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Outer three-operator step with a dual forward-backward inner loop.
///
/// ```text
/// x = prox_{gamma g}(z)
/// r = 2x - z - gamma grad f(x)
/// y <- prox_{(lambda/gamma) h*}((I - lambda B B^T) y + (lambda/gamma) B r)     (J times)
/// z = z + (r - gamma B^T y) - x
/// ```
pub struct DualThreeOperator<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    lambda: f64,
    inner: usize,
    warm: bool,
    z: Vector,
    x: Vector,
    y: Vector,
}

impl<'a> DualThreeOperator<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_dual(p)?;
        let (z, x) = initial_z(p, &start, c.gamma)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            lambda: c.lambda,
            inner: c.inner_iters,
            warm: c.warm_start_dual,
            z,
            x,
            y: initial_y(p, &start)?,
        })
    }

    pub fn shadow(&self) -> &Vector {
        &self.z
    }
}

/// One dual forward-backward step on `min_y 1/2 |B^T y - r/gamma|^2 + h*(y)/gamma`.
fn dual_inner_step(p: &SplitProblem, gamma: f64, lambda: f64, y: &Vector, r: &Vector) -> Vector {
    let ratio = lambda / gamma;
    let residual = r - p.b.adjoint_unchecked(y) * gamma;
    p.h.prox_conjugate_unchecked(ratio, &(y + p.b.apply_unchecked(&residual) * ratio))
}

impl Splitting for DualThreeOperator<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let r = &self.x * 2.0 - &self.z - p.f.gradient(&self.x) * gamma;
        if !self.warm {
            self.y.fill(0.0);
        }
        for _ in 0..self.inner {
            self.y = dual_inner_step(p, gamma, self.lambda, &self.y, &r);
        }
        let s = &r - p.b.adjoint_unchecked(&self.y) * gamma;
        self.z += s - &self.x;
        self.x = p.g.prox_unchecked(gamma, &self.z);
        self.inner
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Primal-dual three-operator scheme.
///
/// ```text
/// x = prox_{gamma g}(z)
/// y = prox_{(lambda/gamma) h*}((I - lambda B B^T) y + (lambda/gamma) B (2x - z - gamma grad f(x)))
/// z = x - gamma grad f(x) - gamma B^T y
/// ```
pub struct Pd3o<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    lambda: f64,
    z: Vector,
    x: Vector,
    y: Vector,
}

impl<'a> Pd3o<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_dual(p)?;
        let (z, x) = initial_z(p, &start, c.gamma)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            lambda: c.lambda,
            z,
            x,
            y: initial_y(p, &start)?,
        })
    }

    pub fn shadow(&self) -> &Vector {
        &self.z
    }
}

impl Splitting for Pd3o<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let forward = &self.x - p.f.gradient(&self.x) * gamma;
        let r = &forward + &self.x - &self.z;
        self.y = dual_inner_step(p, gamma, self.lambda, &self.y, &r);
        self.z = forward - p.b.adjoint_unchecked(&self.y) * gamma;
        self.x = p.g.prox_unchecked(gamma, &self.z);
        1
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Three-operator splitting for `B = I`.
///
/// ```text
/// x = prox_{gamma g}(z)
/// y = prox_{h*/gamma}((2x - z - gamma grad f(x)) / gamma)
/// z = x - gamma grad f(x) - gamma y
/// ```
pub struct DavisYin<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    z: Vector,
    x: Vector,
    y: Vector,
}

impl<'a> DavisYin<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        if p.b.kind() != OperatorKind::Identity {
            return Err(Error::InvalidParameter(format!(
                "Davis-Yin requires B = identity, got {:?}",
                p.b.kind()
            )));
        }
        c.check_common(p)?;
        let (z, x) = initial_z(p, &start, c.gamma)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            z,
            x,
            y: initial_y(p, &start)?,
        })
    }

    pub fn shadow(&self) -> &Vector {
        &self.z
    }
}

impl Splitting for DavisYin<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let forward = &self.x - p.f.gradient(&self.x) * gamma;
        let r = &forward + &self.x - &self.z;
        self.y = p.h.prox_conjugate_unchecked(1.0 / gamma, &(r / gamma));
        self.z = forward - &self.y * gamma;
        self.x = p.g.prox_unchecked(gamma, &self.z);
        1
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Outer three-operator step with a primal-dual inner loop.
///
/// ```text
/// x  = prox_{gamma g}(z)
/// u  = 2x - z - gamma grad f(x)
/// v' = (v - tau B^T y + tau u) / (1 + tau)
/// y  = gamma prox_{(sigma/gamma) h*}(y/gamma + (sigma/gamma) B (2v' - v))       (J times)
/// z  = z + v - x
/// ```
pub struct PrimalDualThreeOperator<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    sigma: f64,
    tau: f64,
    inner: usize,
    warm: bool,
    z: Vector,
    x: Vector,
    v: Vector,
    y: Vector,
}

impl<'a> PrimalDualThreeOperator<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_primal_dual(p)?;
        let (z, x) = initial_z(p, &start, c.gamma)?;
        let v = initial_v(p, &start, &x)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            sigma: c.sigma,
            tau: c.tau,
            inner: c.inner_iters,
            warm: c.warm_start_dual,
            z,
            x,
            v,
            y: initial_y(p, &start)?,
        })
    }

    pub fn shadow(&self) -> &Vector {
        &self.z
    }

    pub fn inner_primal(&self) -> &Vector {
        &self.v
    }
}

fn pd_inner_step(p: &SplitProblem, gamma: f64, sigma: f64, tau: f64, v: &mut Vector, y: &mut Vector, u: &Vector) {
    let next = (&*v - p.b.adjoint_unchecked(y) * tau + u * tau) / (1.0 + tau);
    let extrapolated = &next * 2.0 - &*v;
    let w = &*y + p.b.apply_unchecked(&extrapolated) * sigma;
    *y = scaled_dual_prox(p, gamma, sigma, &w);
    *v = next;
}

impl Splitting for PrimalDualThreeOperator<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let u = &self.x * 2.0 - &self.z - p.f.gradient(&self.x) * gamma;
        if !self.warm {
            self.y.fill(0.0);
        }
        for _ in 0..self.inner {
            pd_inner_step(p, gamma, self.sigma, self.tau, &mut self.v, &mut self.y, &u);
        }
        self.z += &self.v - &self.x;
        self.x = p.g.prox_unchecked(gamma, &self.z);
        self.inner
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}

/// Single-loop form of [`PrimalDualThreeOperator`]:
///
/// ```text
/// x = prox_{gamma g}(z)
/// u = 2x - z - gamma grad f(x)
/// v' = (v - tau B^T y + tau u) / (1 + tau)
/// y = gamma prox_{(sigma/gamma) h*}(y/gamma + (sigma/gamma) B (2v' - v))
/// z = z + v' - x
/// ```
pub struct NewScheme<'a> {
    p: &'a SplitProblem,
    gamma: f64,
    sigma: f64,
    tau: f64,
    z: Vector,
    x: Vector,
    v: Vector,
    y: Vector,
}

impl<'a> NewScheme<'a> {
    pub fn new(p: &'a SplitProblem, c: &SolverConfig, start: Start) -> Result<Self> {
        c.validate_primal_dual(p)?;
        let (z, x) = initial_z(p, &start, c.gamma)?;
        let v = initial_v(p, &start, &x)?;
        Ok(Self {
            p,
            gamma: c.gamma,
            sigma: c.sigma,
            tau: c.tau,
            z,
            x,
            v,
            y: initial_y(p, &start)?,
        })
    }

    pub fn inner_primal(&self) -> &Vector {
        &self.v
    }
}

impl Splitting for NewScheme<'_> {
    fn step(&mut self) -> usize {
        let (p, gamma) = (self.p, self.gamma);
        let u = &self.x * 2.0 - &self.z - p.f.gradient(&self.x) * gamma;
        pd_inner_step(p, gamma, self.sigma, self.tau, &mut self.v, &mut self.y, &u);
        self.z += &self.v - &self.x;
        self.x = p.g.prox_unchecked(gamma, &self.z);
        1
    }

    fn primal(&self) -> &Vector {
        &self.x
    }

    fn dual(&self) -> &Vector {
        &self.y
    }
}
