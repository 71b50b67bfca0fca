//! Far-field traces `(U, I, H)` from the Bernoulli system driven by a
//! prescribed total pressure `P(t, x)`.
//!
//! Space: second-order central differences on the periodic x-circle.
//! Time: Heun's RK2, followed by a fourth-difference filter each step.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::l2_norm_periodic;
use crate::state::PhysicalParams;

/// Trace values and derivatives at one time level, one entry per x node.
#[derive(Debug, Clone, PartialEq)]
pub struct OutflowLevel {
    pub t: f64,
    pub u: Vec<f64>,
    pub i: Vec<f64>,
    pub h: Vec<f64>,
    pub p: Vec<f64>,
    pub p_t: Vec<f64>,
    pub p_x: Vec<f64>,
    pub u_x: Vec<f64>,
    pub i_x: Vec<f64>,
    pub h_x: Vec<f64>,
    pub u_t: Vec<f64>,
    pub i_t: Vec<f64>,
    pub h_t: Vec<f64>,
}

impl OutflowLevel {
    /// Spatially and temporally constant trace.
    pub fn constant(nx: usize, t: f64, u: f64, i: f64, h: f64, p: f64) -> Self {
        let z = vec![0.0; nx];
        OutflowLevel {
            t,
            u: vec![u; nx],
            i: vec![i; nx],
            h: vec![h; nx],
            p: vec![p; nx],
            p_t: z.clone(),
            p_x: z.clone(),
            u_x: z.clone(),
            i_x: z.clone(),
            h_x: z.clone(),
            u_t: z.clone(),
            i_t: z.clone(),
            h_t: z,
        }
    }

    pub fn nx(&self) -> usize {
        self.u.len()
    }

    /// `H²/2` at node `i`.
    pub fn k(&self, i: usize) -> f64 {
        0.5 * self.h[i] * self.h[i]
    }
}

/// Time series of trace levels with uniform step.
#[derive(Debug, Clone, PartialEq)]
pub struct OutflowTrace {
    pub lx: f64,
    pub dt: f64,
    pub levels: Vec<OutflowLevel>,
}

impl OutflowTrace {
    /// A trace that repeats one constant level at every step.
    pub fn constant(nx: usize, lx: f64, dt: f64, steps: usize, u: f64, i: f64, h: f64, p: f64) -> Self {
        let levels = (0..=steps)
            .map(|m| OutflowLevel::constant(nx, m as f64 * dt, u, i, h, p))
            .collect();
        OutflowTrace { lx, dt, levels }
    }

    pub fn nx(&self) -> usize {
        self.levels[0].nx()
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
}

/// Tabulated `P(t, x)` on a tensor table, periodic in x.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureTable {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Row-major, time outer.
    pub values: Vec<f64>,
    pub lx: f64,
    d_t: Vec<f64>,
    d_x: Vec<f64>,
}

impl PressureTable {
    pub fn new(times: Vec<f64>, xs: Vec<f64>, values: Vec<f64>, lx: f64) -> Result<Self> {
        let (nt, nx) = (times.len(), xs.len());
        if nt < 2 || nx < 3 || values.len() != nt * nx {
            return Err(Error::Config(format!(
                "pressure table needs >=2 times and >=3 x nodes on a full tensor grid (got {nt} x {nx}, {} values)",
                values.len()
            )));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&times) || !increasing(&xs) || xs[0] < 0.0 || *xs.last().unwrap() >= lx {
            return Err(Error::Config(
                "pressure table coordinates must be increasing with x in [0, Lx)".into(),
            ));
        }
        let mut d_t = vec![0.0; nt * nx];
        let mut d_x = vec![0.0; nt * nx];
        for a in 0..nt {
            let (lo, hi) = (a.saturating_sub(1), (a + 1).min(nt - 1));
            for b in 0..nx {
                d_t[a * nx + b] =
                    (values[hi * nx + b] - values[lo * nx + b]) / (times[hi] - times[lo]);
                let (bm, bp) = ((b + nx - 1) % nx, (b + 1) % nx);
                let xm = if b == 0 { xs[bm] - lx } else { xs[bm] };
                let xp = if b == nx - 1 { xs[bp] + lx } else { xs[bp] };
                d_x[a * nx + b] = (values[a * nx + bp] - values[a * nx + bm]) / (xp - xm);
            }
        }
        Ok(PressureTable {
            times,
            xs,
            values,
            lx,
            d_t,
            d_x,
        })
    }

    /// Read a whitespace-separated table with header `t x P`.
    pub fn read(path: &Path, lx: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema = |detail: String| Error::Schema {
            path: path.display().to_string(),
            detail,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| schema("empty file".into()))?
            .split_whitespace()
            .collect();
        if header != ["t", "x", "P"] {
            return Err(schema(format!("expected header \"t x P\", found {header:?}")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| schema(format!("row {}: {e}", n + 1)))?;
            if vals.len() != 3 {
                return Err(schema(format!("row {} has {} columns", n + 1, vals.len())));
            }
            rows.push([vals[0], vals[1], vals[2]]);
        }
        let mut times: Vec<f64> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for r in &rows {
            if times.last() != Some(&r[0]) {
                times.push(r[0]);
            }
            if times.len() == 1 {
                xs.push(r[1]);
            }
        }
        let values = rows.iter().map(|r| r[2]).collect();
        Self::new(times, xs, values, lx).map_err(|e| schema(e.to_string()))
    }

    fn bilinear(&self, data: &[f64], t: f64, x: f64) -> f64 {
        let nt = self.times.len();
        let nx = self.xs.len();
        let t = t.clamp(self.times[0], self.times[nt - 1]);
        let a = (self.times.partition_point(|&s| s <= t).max(1) - 1).min(nt - 2);
        let st = (t - self.times[a]) / (self.times[a + 1] - self.times[a]);
        let x = x.rem_euclid(self.lx);
        let pp = self.xs.partition_point(|&s| s <= x);
        let (b0, b1, x0, x1) = if pp == 0 {
            (nx - 1, 0, self.xs[nx - 1] - self.lx, self.xs[0])
        } else if pp == nx {
            (nx - 1, 0, self.xs[nx - 1], self.xs[0] + self.lx)
        } else {
            (pp - 1, pp, self.xs[pp - 1], self.xs[pp])
        };
        let sx = (x - x0) / (x1 - x0);
        let at = |r: usize, c: usize| data[r * nx + c];
        let lo = (1.0 - sx) * at(a, b0) + sx * at(a, b1);
        let hi = (1.0 - sx) * at(a + 1, b0) + sx * at(a + 1, b1);
        (1.0 - st) * lo + st * hi
    }
}

/// Prescribed total pressure `P = p + h1²/2`.
#[derive(Debug, Clone, PartialEq)]
pub enum PressureSpec {
    Constant { value: f64 },
    /// `P = base + amplitude·cos(kx)·(1 + ramp·t)`.
    Cosine {
        base: f64,
        amplitude: f64,
        wavenumber: f64,
        ramp: f64,
    },
    Table(PressureTable),
}

impl PressureSpec {
    /// `(P, P_t, P_x)` at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        match self {
            PressureSpec::Constant { value } => (*value, 0.0, 0.0),
            PressureSpec::Cosine {
                base,
                amplitude,
                wavenumber: k,
                ramp,
            } => {
                let env = 1.0 + ramp * t;
                let c = (k * x).cos();
                (
                    base + amplitude * c * env,
                    amplitude * c * ramp,
                    -amplitude * k * (k * x).sin() * env,
                )
            }
            PressureSpec::Table(tab) => (
                tab.bilinear(&tab.values, t, x),
                tab.bilinear(&tab.d_t, t, x),
                tab.bilinear(&tab.d_x, t, x),
            ),
        }
    }
}

/// Initial trace `(U, I, H)(0, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutflowInit {
    pub u: Vec<f64>,
    pub i: Vec<f64>,
    pub h: Vec<f64>,
}

impl OutflowInit {
    /// `U = u_mean + u_amp sin(kx)`, `I = i_mean + i_amp sin(kx)`,
    /// `H = h_mean + h_amp cos(kx)`.
    #[allow(clippy::too_many_arguments)]
    pub fn harmonic(
        nx: usize,
        lx: f64,
        k: f64,
        u: (f64, f64),
        i: (f64, f64),
        h: (f64, f64),
    ) -> Self {
        let x = |n: usize| n as f64 * lx / nx as f64;
        OutflowInit {
            u: (0..nx).map(|n| u.0 + u.1 * (k * x(n)).sin()).collect(),
            i: (0..nx).map(|n| i.0 + i.1 * (k * x(n)).sin()).collect(),
            h: (0..nx).map(|n| h.0 + h.1 * (k * x(n)).cos()).collect(),
        }
    }

    /// `U = 0.1 sin x`, `I = 0`, `H = 1` on `[0, 2π)`.
    pub fn canonical(nx: usize) -> Self {
        Self::harmonic(nx, 2.0 * PI, 1.0, (0.0, 0.1), (0.0, 0.0), (1.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliOptions {
    /// Coefficient of the undivided fourth-difference filter.
    pub filter: f64,
    pub cfl_safety: f64,
}

impl Default for BernoulliOptions {
    fn default() -> Self {
        BernoulliOptions {
            filter: 0.01,
            cfl_safety: 0.4,
        }
    }
}

fn diff_periodic(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| (f[(i + 1) % n] - f[(i + n - 1) % n]) / (2.0 * dx))
        .collect()
}

fn fourth_difference(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            f[(i + 2) % n] - 4.0 * f[(i + 1) % n] + 6.0 * f[i] - 4.0 * f[(i + n - 1) % n]
                + f[(i + n - 2) % n]
        })
        .collect()
}

/// `𝒜_H = (a/(P − H²/2))^{1/γ}` and `Q_H = γ(P − H²/2) + H²`.
pub fn acal_q_trace(p: f64, h: f64, params: &PhysicalParams) -> (f64, f64) {
    let pr = p - 0.5 * h * h;
    let acal = ((params.a / pr).ln() / params.gamma).exp();
    (acal, params.gamma * pr + h * h)
}

/// Largest characteristic speed `|U| + sqrt(𝒜γpH²/Q)` over the circle.
pub fn max_wave_speed(u: &[f64], h: &[f64], p: &[f64], params: &PhysicalParams) -> f64 {
    u.iter()
        .zip(h)
        .zip(p)
        .map(|((&u, &h), &p)| {
            let (acal, q) = acal_q_trace(p, h, params);
            let pr = p - 0.5 * h * h;
            u.abs() + (acal * params.gamma * pr * h * h / q).sqrt()
        })
        .fold(0.0, f64::max)
}

struct Rates {
    u_t: Vec<f64>,
    i_t: Vec<f64>,
    h_t: Vec<f64>,
}

fn level_at(
    t: f64,
    u: &[f64],
    i: &[f64],
    h: &[f64],
    spec: &PressureSpec,
    params: &PhysicalParams,
    dx: f64,
) -> (OutflowLevel, Rates) {
    let nx = u.len();
    let (mut p, mut p_t, mut p_x) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    for n in 0..nx {
        (p[n], p_t[n], p_x[n]) = spec.eval(t, n as f64 * dx);
    }
    let u_x = diff_periodic(u, dx);
    let i_x = diff_periodic(i, dx);
    let h_x = diff_periodic(h, dx);
    let mut r = Rates {
        u_t: vec![0.0; nx],
        i_t: vec![0.0; nx],
        h_t: vec![0.0; nx],
    };
    for n in 0..nx {
        let (acal, q) = acal_q_trace(p[n], h[n], params);
        let pr = p[n] - 0.5 * h[n] * h[n];
        r.u_t[n] = -u[n] * u_x[n] - acal * (p_x[n] - h[n] * h_x[n]);
        r.i_t[n] = -u[n] * i_x[n];
        r.h_t[n] = -u[n] * h_x[n]
            + h[n] * (p_t[n] + p_x[n] * u[n]) / q
            + params.gamma * pr / q * h[n] * u_x[n];
    }
    let level = OutflowLevel {
        t,
        u: u.to_vec(),
        i: i.to_vec(),
        h: h.to_vec(),
        p,
        p_t,
        p_x,
        u_x,
        i_x,
        h_x,
        u_t: r.u_t.clone(),
        i_t: r.i_t.clone(),
        h_t: r.h_t.clone(),
    };
    (level, r)
}

fn check_band(level: &OutflowLevel, margin: f64, dx: f64) -> Result<()> {
    for n in 0..level.nx() {
        let k = level.k(n);
        let detail = if !level.h[n].is_finite() || !level.u[n].is_finite() {
            Some("non-finite trace value".to_string())
        } else if k < margin {
            Some(format!("H^2/2 = {k} below {margin}"))
        } else if k > level.p[n] - margin {
            Some(format!("H^2/2 = {k} above P - {margin} = {}", level.p[n] - margin))
        } else {
            None
        };
        if let Some(detail) = detail {
            return Err(Error::TraceAdmissibility {
                t: level.t,
                x: n as f64 * dx,
                detail,
            });
        }
    }
    Ok(())
}

/// Number of steps of size `dt` spanning `[0, t_end]`; `t_end` must be a
/// whole multiple of `dt`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Config(format!(
            "time window {t_end} and step {dt} must be positive"
        )));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::Config(format!(
            "window {t_end} is not a whole multiple of dt={dt}"
        )));
    }
    Ok(n as usize)
}

/// March the Bernoulli system from `init` to `t_end`, storing every step.
pub fn solve_bernoulli(
    spec: &PressureSpec,
    init: &OutflowInit,
    params: &PhysicalParams,
    lx: f64,
    t_end: f64,
    dt: f64,
    opts: BernoulliOptions,
) -> Result<OutflowTrace> {
    let nx = init.u.len();
    if nx < 4 || init.i.len() != nx || init.h.len() != nx {
        return Err(Error::Config("initial trace arrays must share a length >= 4".into()));
    }
    let steps = step_count(t_end, dt)?;
    let dx = lx / nx as f64;
    let (mut u, mut i, mut h) = (init.u.clone(), init.i.clone(), init.h.clone());

    let (first, _) = level_at(0.0, &u, &i, &h, spec, params, dx);
    check_band(&first, 2.0 * params.delta, dx)?;
    let steep = first.u_x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if steep * t_end >= 0.5 {
        return Err(Error::Config(format!(
            "window {t_end} too long for the outflow: max|U_x|*t_end = {} must stay below 0.5",
            steep * t_end
        )));
    }

    let mut levels = Vec::with_capacity(steps + 1);
    levels.push(first);
    for m in 0..steps {
        let t = m as f64 * dt;
        let cur = levels.last().expect("at least one level");
        let dt_max = opts.cfl_safety * dx / max_wave_speed(&u, &h, &cur.p, params).max(1e-300);
        if dt > dt_max {
            return Err(Error::Cfl { dt, dt_max });
        }
        let k1 = Rates {
            u_t: cur.u_t.clone(),
            i_t: cur.i_t.clone(),
            h_t: cur.h_t.clone(),
        };
        let stage = |a: &[f64], r: &[f64]| -> Vec<f64> {
            a.iter().zip(r).map(|(x, y)| x + dt * y).collect()
        };
        let (us, is, hs) = (stage(&u, &k1.u_t), stage(&i, &k1.i_t), stage(&h, &k1.h_t));
        let (_, k2) = level_at(t + dt, &us, &is, &hs, spec, params, dx);
        let combine = |a: &mut Vec<f64>, r1: &[f64], r2: &[f64]| {
            for n in 0..nx {
                a[n] += 0.5 * dt * (r1[n] + r2[n]);
            }
            let d4 = fourth_difference(a);
            for n in 0..nx {
                a[n] -= opts.filter * d4[n];
            }
        };
        combine(&mut u, &k1.u_t, &k2.u_t);
        combine(&mut i, &k1.i_t, &k2.i_t);
        combine(&mut h, &k1.h_t, &k2.h_t);
        let (next, _) = level_at((m + 1) as f64 * dt, &u, &i, &h, spec, params, dx);
        check_band(&next, params.delta, dx)?;
        levels.push(next);
    }

    let sup_k = levels
        .iter()
        .flat_map(|l| (0..nx).map(move |n| l.k(n)))
        .fold(0.0f64, f64::max);
    let min_p = levels
        .iter()
        .flat_map(|l| l.p.iter().copied())
        .fold(f64::INFINITY, f64::min);
    if min_p < 4.0 * params.delta + sup_k {
        return Err(Error::TraceAdmissibility {
            t: t_end,
            x: 0.0,
            detail: format!(
                "min P = {min_p} below 4*delta + sup H^2/2 = {}",
                4.0 * params.delta + sup_k
            ),
        });
    }
    Ok(OutflowTrace { lx, dt, levels })
}

/// L² norms (periodic, rectangle rule) of the three Bernoulli residuals at
/// every interior stored level, using central differences in time.
pub fn bernoulli_residual(trace: &OutflowTrace, params: &PhysicalParams) -> Result<Vec<[f64; 3]>> {
    let lv = &trace.levels;
    if lv.len() < 3 {
        return Err(Error::Config(
            "residual needs at least three stored time levels".into(),
        ));
    }
    let dx = trace.dx();
    let nx = trace.nx();
    let mut out = Vec::with_capacity(lv.len() - 2);
    for m in 1..lv.len() - 1 {
        let (prev, cur, next) = (&lv[m - 1], &lv[m], &lv[m + 1]);
        let span = next.t - prev.t;
        let mut r = [vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]];
        for n in 0..nx {
            let (acal, q) = acal_q_trace(cur.p[n], cur.h[n], params);
            let pr = cur.p[n] - cur.k(n);
            let u_t = (next.u[n] - prev.u[n]) / span;
            let i_t = (next.i[n] - prev.i[n]) / span;
            let h_t = (next.h[n] - prev.h[n]) / span;
            r[0][n] = u_t + cur.u[n] * cur.u_x[n] + acal * (cur.p_x[n] - cur.h[n] * cur.h_x[n]);
            r[1][n] = i_t + cur.u[n] * cur.i_x[n];
            r[2][n] = h_t + cur.u[n] * cur.h_x[n]
                - cur.h[n] * (cur.p_t[n] + cur.p_x[n] * cur.u[n]) / q
                - params.gamma * pr / q * cur.h[n] * cur.u_x[n];
        }
        out.push([
            l2_norm_periodic(dx, &r[0]),
            l2_norm_periodic(dx, &r[1]),
            l2_norm_periodic(dx, &r[2]),
        ]);
    }
    Ok(out)
}
