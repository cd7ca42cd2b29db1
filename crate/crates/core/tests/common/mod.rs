//! Independent oracles shared by the integration tests. Nothing here calls the
//! library's own circuit or return code.
#![allow(dead_code)]

use qcartpole::agents::{Agent, Backend, Transition};
use qcartpole::hardware::PrxPulse;
use qcartpole::neural::huber;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C {
    pub re: f64,
    pub im: f64,
}

impl C {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }
    pub fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }
    pub fn mul(self, o: C) -> C {
        C::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    pub fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    /// `e^{i a}`
    pub fn cis(a: f64) -> C {
        C::new(a.cos(), a.sin())
    }
}

pub type M = [[C; 2]; 2];

pub fn matmul(a: &M, b: &M) -> M {
    let mut out = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0].mul(b[0][j]).add(a[i][1].mul(b[1][j]));
        }
    }
    out
}

pub fn hadamard() -> M {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[C::new(h, 0.0), C::new(h, 0.0)], [C::new(h, 0.0), C::new(-h, 0.0)]]
}

pub fn rx(a: f64) -> M {
    let (s, c) = (a / 2.0).sin_cos();
    [[C::new(c, 0.0), C::new(0.0, -s)], [C::new(0.0, -s), C::new(c, 0.0)]]
}

pub fn ry(a: f64) -> M {
    let (s, c) = (a / 2.0).sin_cos();
    [[C::new(c, 0.0), C::new(-s, 0.0)], [C::new(s, 0.0), C::new(c, 0.0)]]
}

pub fn rz(a: f64) -> M {
    [
        [C::cis(-a / 2.0), C::new(0.0, 0.0)],
        [C::new(0.0, 0.0), C::cis(a / 2.0)],
    ]
}

/// `cos(a/2) I - i sin(a/2) (cos(p) X + sin(p) Y)`
pub fn prx(phase: f64, angle: f64) -> M {
    let (s, c) = (angle / 2.0).sin_cos();
    let minus_i_s = C::new(0.0, -s);
    [
        [C::new(c, 0.0), minus_i_s.mul(C::cis(-phase))],
        [minus_i_s.mul(C::cis(phase)), C::new(c, 0.0)],
    ]
}

/// `<Z>` of `U |0>`.
pub fn z_of(u: &M) -> f64 {
    u[0][0].abs2() - u[1][0].abs2()
}

/// `<Z>` of `Rx(theta) Rz(b3) Ry(b2) Rz(b1) H |0>` by explicit matrix products.
pub fn circuit_z(b1: f64, b2: f64, b3: f64, theta: f64) -> f64 {
    let u = [rx(theta), rz(b3), ry(b2), rz(b1), hadamard()]
        .iter()
        .fold(identity(), |acc, g| matmul(&acc, g));
    z_of(&u)
}

pub fn identity() -> M {
    [
        [C::new(1.0, 0.0), C::new(0.0, 0.0)],
        [C::new(0.0, 0.0), C::new(1.0, 0.0)],
    ]
}

/// `<Z>` after playing `pulses` in order on `|0>`.
pub fn pulses_z(pulses: &[PrxPulse]) -> f64 {
    let u = pulses
        .iter()
        .fold(identity(), |acc, p| matmul(&prx(p.phase, p.angle), &acc));
    z_of(&u)
}

/// `R_k = sum_{j >= k} gamma^{j-k} r_j`, truncated after the first terminal
/// step at or after `k`, plus `gamma^{T-k} bootstrap` if no terminal step follows.
pub fn direct_returns(rewards: &[f64], dones: &[bool], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let t = rewards.len();
    (0..t)
        .map(|k| {
            let mut total = 0.0;
            for j in k..t {
                total += gamma.powi((j - k) as i32) * rewards[j];
                if dones[j] {
                    return total;
                }
            }
            total + gamma.powi((t - k) as i32) * bootstrap
        })
        .collect()
}

/// Episode loss recomputed from scratch with the analytic backend:
/// actor term uses the recorded advantages, critic term the fresh values.
pub fn episode_loss(agent: &Agent, transitions: &[Transition], returns: &[f64], delta: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inv_t = 1.0 / transitions.len() as f64;
    let (mut actor, mut critic) = (0.0, 0.0);
    for (tr, &ret) in transitions.iter().zip(returns) {
        let out = agent.forward(&tr.observation, &Backend::Analytic, &mut rng).unwrap();
        let advantage = ret - tr.value;
        actor -= inv_t * advantage * out.action_probs[tr.action.index()].ln();
        critic += inv_t * huber(ret - out.value, delta);
    }
    (actor, critic)
}

/// Central differences of `f` around `x`.
pub fn finite_diff(x: &[f64], h: f64, f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    finite_diff_at(x, &(0..x.len()).collect::<Vec<_>>(), h, f)
}

/// Central differences along the coordinates in `indices` only.
pub fn finite_diff_at(x: &[f64], indices: &[usize], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    indices
        .iter()
        .map(|&i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest per-entry relative error; entries where both values are below
/// `floor` in magnitude are compared absolutely against `floor`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
