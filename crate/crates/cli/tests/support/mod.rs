//! Independent reference implementations for the acceptance suite.
//!
//! Everything here is deliberately written from scratch against textbook
//! formulas — closed-form 2x2 matrix exponential, explicit Gaussian emission
//! densities, plain per-step normalization — so that agreement with the
//! library is a genuine two-route check, not the same code twice.

/// Closed-form 2x2 transition matrix for the generator
/// [[-up, up], [down, -down]]:
///
///   exp(tA) = Pi + exp(-(up+down) t) (I - Pi),
///
/// where both rows of Pi equal the stationary law (down, up)/(up+down).
pub fn transition_2x2(up: f64, down: f64, t: f64) -> [[f64; 2]; 2] {
    let s = up + down;
    assert!(s > 0.0, "degenerate generator");
    let pi = [down / s, up / s];
    let decay = (-s * t).exp();
    let mut p = [[0.0; 2]; 2];
    for (i, row) in p.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let identity = if i == j { 1.0 } else { 0.0 };
            *entry = pi[j] + decay * (identity - pi[j]);
        }
    }
    p
}

/// Textbook discrete-time forward algorithm for a two-state hidden Markov
/// model observed through Gaussian increments:
/// transition `exp(A dt)`, emission `N(c_i dt, noise_scale^2 dt)` at the
/// destination state, normalized every step.
pub struct ForwardOracle {
    p: [[f64; 2]; 2],
    c: [f64; 2],
    dt: f64,
    var: f64,
}

impl ForwardOracle {
    pub fn new(up: f64, down: f64, c: [f64; 2], noise_scale: f64, dt: f64) -> Self {
        Self {
            p: transition_2x2(up, down, dt),
            c,
            dt,
            var: noise_scale * noise_scale * dt,
        }
    }

    /// One predict-update step; returns the normalized posterior.
    pub fn step(&self, alpha: [f64; 2], dy: f64) -> [f64; 2] {
        let predicted = [
            alpha[0] * self.p[0][0] + alpha[1] * self.p[1][0],
            alpha[0] * self.p[0][1] + alpha[1] * self.p[1][1],
        ];
        let density = |i: usize| {
            let z = dy - self.c[i] * self.dt;
            (-z * z / (2.0 * self.var)).exp()
        };
        let w = [predicted[0] * density(0), predicted[1] * density(1)];
        let mass = w[0] + w[1];
        assert!(mass > 0.0 && mass.is_finite(), "oracle lost mass");
        [w[0] / mass, w[1] / mass]
    }

    /// Run over a whole increment sequence, returning every posterior
    /// (starting law included).
    pub fn run(&self, p0: [f64; 2], increments: impl Iterator<Item = f64>) -> Vec<[f64; 2]> {
        let mut alpha = p0;
        let mut out = vec![alpha];
        for dy in increments {
            alpha = self.step(alpha, dy);
            out.push(alpha);
        }
        out
    }
}

/// Median of a set of values (mean of the middle two for even counts).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Small deterministic PRNG (splitmix64) for test fixtures that just need
/// arbitrary-looking numbers, independent of the library's RNG stack.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform double in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
