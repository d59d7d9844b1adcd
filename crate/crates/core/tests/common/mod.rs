//! Shared helpers for the integration tests: random systems and an
//! independent nested-`Vec` matrix evaluator used as a residual oracle.
#![allow(dead_code)]

use mfhinf::recursions::CoupledGains;
use mfhinf::{
    h2hinf_solve, Channel, Dimensions, LinearPolicy, Mat, MeanFieldSystem, StageParams, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Naive = Vec<Vec<f64>>;

pub fn naive(m: &Mat) -> Naive {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn mul(a: &Naive, b: &Naive) -> Naive {
    let (r, inner, c) = (a.len(), b.len(), b[0].len());
    assert_eq!(a[0].len(), inner);
    let mut out = vec![vec![0.0; c]; r];
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for t in 0..inner {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn mul3(a: &Naive, b: &Naive, c: &Naive) -> Naive {
    mul(&mul(a, b), c)
}

pub fn add(a: &Naive, b: &Naive) -> Naive {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn sub(a: &Naive, b: &Naive) -> Naive {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

pub fn t(a: &Naive) -> Naive {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn eye(n: usize) -> Naive {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn scale(a: &Naive, s: f64) -> Naive {
    a.iter()
        .map(|r| r.iter().map(|x| x * s).collect())
        .collect()
}

pub fn max_abs(a: &Naive) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// `X^T P X`
pub fn congruence(x: &Naive, p: &Naive) -> Naive {
    mul3(&t(x), p, x)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, s: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-s..s))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Mat {
    let m = uniform_mat(rng, n, n, s);
    (&m + m.transpose()) * 0.5
}

/// Orthogonal factor of a random matrix, so `Psi^T Psi = I` to rounding.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, q: usize) -> Mat {
    uniform_mat(rng, q, q, 1.0).qr().q()
}

pub fn random_stage(rng: &mut ChaCha8Rng, dims: &Dimensions, s: f64) -> StageParams {
    let (n, l, q, m) = (dims.n, dims.l, dims.q, dims.m_phi);
    StageParams {
        a: uniform_mat(rng, n, n, s),
        at: uniform_mat(rng, n, n, s),
        b: uniform_mat(rng, n, l, s),
        bt: uniform_mat(rng, n, l, s),
        c: uniform_mat(rng, n, n, s),
        ct: uniform_mat(rng, n, n, s),
        d: uniform_mat(rng, n, l, s),
        dt: uniform_mat(rng, n, l, s),
        f1: uniform_mat(rng, n, q, s),
        phi: uniform_mat(rng, m, n, s),
        psi: random_orthogonal(rng, q),
    }
}

pub fn random_system(rng: &mut ChaCha8Rng, dims: Dimensions, s: f64) -> MeanFieldSystem {
    let stages = (0..dims.stages())
        .map(|_| random_stage(rng, &dims, s))
        .collect();
    let x0 = Vector::from_fn(dims.n, |_, _| rng.gen_range(-1.0..1.0));
    MeanFieldSystem::new(dims, stages, x0)
}

pub fn square_dims(n: usize, horizon: usize) -> Dimensions {
    Dimensions {
        n,
        l: n,
        q: n,
        m_phi: n,
        horizon,
    }
}

/// Draws random systems until the coupled recursion is feasible at `gamma`.
pub fn random_feasible_system(
    rng: &mut ChaCha8Rng,
    dims: Dimensions,
    s: f64,
    gamma: f64,
) -> MeanFieldSystem {
    loop {
        let sys = random_system(rng, dims, s);
        if h2hinf_solve(&sys, gamma).is_ok() {
            return sys;
        }
    }
}

pub fn random_policy(
    rng: &mut ChaCha8Rng,
    channel: Channel,
    dims: &Dimensions,
    s: f64,
) -> LinearPolicy {
    let p = channel.width(dims);
    let gains = (0..dims.stages())
        .map(|_| uniform_mat(rng, p, dims.n, s))
        .collect();
    let mean_gains = (0..dims.stages())
        .map(|_| uniform_mat(rng, p, dims.n, s))
        .collect();
    LinearPolicy::new(channel, gains, mean_gains)
}

/// `base` plus a random perturbation of every gain entry.
pub fn perturb(rng: &mut ChaCha8Rng, base: &LinearPolicy, s: f64) -> LinearPolicy {
    let jitter = |m: &Mat, rng: &mut ChaCha8Rng| m + uniform_mat(rng, m.nrows(), m.ncols(), s);
    let gains = base.gains.iter().map(|g| jitter(g, rng)).collect();
    let mean_gains = base.mean_gains.iter().map(|g| jitter(g, rng)).collect();
    LinearPolicy::new(base.channel, gains, mean_gains)
}

pub struct Bars {
    pub a: Naive,
    pub b: Naive,
    pub c: Naive,
    pub d: Naive,
}

pub fn bars(s: &StageParams) -> Bars {
    Bars {
        a: add(&naive(&s.a), &naive(&s.at)),
        b: add(&naive(&s.b), &naive(&s.bt)),
        c: add(&naive(&s.c), &naive(&s.ct)),
        d: add(&naive(&s.d), &naive(&s.dt)),
    }
}

/// Largest entry of the eight defining identities at step `k`, written
/// without inverses: `H V + G_u^T = 0`, `P1 = ... + G_u V`, and so on.
#[allow(clippy::too_many_arguments)]
pub fn coupled_residual(
    s: &StageParams,
    p1: &[Mat],
    q1: &[Mat],
    pt1: &[Mat],
    qt1: &[Mat],
    g: &CoupledGains,
    k: usize,
    gamma: f64,
) -> f64 {
    let (a, b, c, d, f1) = (
        naive(&s.a),
        naive(&s.b),
        naive(&s.c),
        naive(&s.d),
        naive(&s.f1),
    );
    let bar = bars(s);
    let phi_w = congruence(&naive(&s.phi), &eye(s.phi.nrows()));
    let (p, q, pt, qt) = (
        naive(&p1[k + 1]),
        naive(&q1[k + 1]),
        naive(&pt1[k + 1]),
        naive(&qt1[k + 1]),
    );
    let (u, ub, v, vb) = (naive(&g.u), naive(&g.u_bar), naive(&g.v), naive(&g.v_bar));
    let (l, nq, n) = (s.b.ncols(), s.f1.ncols(), s.a.nrows());
    let g2 = scale(&eye(l), gamma * gamma);

    let h = add(&add(&g2, &congruence(&b, &p)), &congruence(&d, &p));
    let h_bar = add(&add(&g2, &congruence(&bar.b, &q)), &congruence(&bar.d, &p));
    let h1 = add(&eye(nq), &congruence(&f1, &pt));
    let h1_bar = add(&eye(nq), &congruence(&f1, &qt));

    let a_u = add(&a, &mul(&f1, &u));
    let g_u = add(&mul3(&t(&a_u), &p, &b), &mul3(&t(&c), &p, &d));
    let a_v = add(&a, &mul(&b, &v));
    let c_v = add(&c, &mul(&d, &v));
    let g_v = mul3(&t(&a_v), &pt, &f1);
    let ab_u = add(&bar.a, &mul(&f1, &ub));
    let g_ub = add(&mul3(&t(&ab_u), &q, &bar.b), &mul3(&t(&bar.c), &p, &bar.d));
    let ab_v = add(&bar.a, &mul(&bar.b, &vb));
    let cb_v = add(&bar.c, &mul(&bar.d, &vb));
    let g_vb = mul3(&t(&ab_v), &qt, &f1);

    let eqs = [
        add(&mul(&h, &v), &t(&g_u)),
        add(&mul(&h1, &u), &t(&g_v)),
        add(&mul(&h_bar, &vb), &t(&g_ub)),
        add(&mul(&h1_bar, &ub), &t(&g_vb)),
        sub(
            &naive(&p1[k]),
            &add(
                &sub(
                    &sub(&add(&congruence(&a_u, &p), &congruence(&c, &p)), &phi_w),
                    &congruence(&u, &eye(nq)),
                ),
                &mul(&g_u, &v),
            ),
        ),
        sub(
            &naive(&q1[k]),
            &add(
                &sub(
                    &sub(
                        &add(&congruence(&ab_u, &q), &congruence(&bar.c, &p)),
                        &phi_w,
                    ),
                    &congruence(&ub, &eye(nq)),
                ),
                &mul(&g_ub, &vb),
            ),
        ),
        sub(
            &naive(&pt1[k]),
            &add(
                &add(
                    &add(&add(&congruence(&a_v, &pt), &congruence(&c_v, &pt)), &phi_w),
                    &eye(n),
                ),
                &mul(&g_v, &u),
            ),
        ),
        sub(
            &naive(&qt1[k]),
            &add(
                &add(
                    &add(
                        &add(&congruence(&ab_v, &qt), &congruence(&cb_v, &pt)),
                        &phi_w,
                    ),
                    &eye(n),
                ),
                &mul(&g_vb, &ub),
            ),
        ),
    ];
    eqs.iter().map(max_abs).fold(0.0, f64::max)
}
