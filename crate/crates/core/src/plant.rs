//! Plaintext reference world: plant dynamics, max-out controller fixtures,
//! state sampling, and closed-loop simulation. Everything here operates on
//! cleartext values and serves as the oracle the secure pipeline is checked
//! against.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::quantize::{NetworkDocument, QuantizationConfig, QuantizedNetwork, RealNetwork, StateDomain};
use crate::ring;

/// Discrete-time linear plant x+ = A x + B u with scalar input.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl LinearSystem {
    pub fn step(&self, x: &[f64], u: f64) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| row.iter().zip(x).map(|(&a, &xj)| a * xj).sum::<f64>() + bi * u)
            .collect()
    }
}

/// The standard double integrator benchmark plant.
pub fn double_integrator() -> LinearSystem {
    LinearSystem {
        a: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
        b: vec![0.5, 1.0],
    }
}

/// Benchmark state constraint box |x1| <= 25, |x2| <= 5.
pub fn paper_domain() -> StateDomain {
    StateDomain::new(vec![25.0, 5.0]).expect("static domain")
}

/// A max-out controller together with the input saturation bound of the
/// constraint set U.
#[derive(Clone, Debug)]
pub struct MaxoutController {
    pub network: RealNetwork,
    pub input_bound: f64,
}

/// g(x) = max{Kx + b} - max{Lx + c}.
pub fn maxout_eval(ctrl: &MaxoutController, x: &[f64]) -> f64 {
    let branch = |mat: &[Vec<f64>], off: &[f64]| {
        mat.iter()
            .zip(off)
            .map(|(row, &o)| row.iter().zip(x).map(|(&m, &xi)| m * xi).sum::<f64>() + o)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    branch(&ctrl.network.k, &ctrl.network.b) - branch(&ctrl.network.l, &ctrl.network.c)
}

/// Integer preactivations v = Kq*xi + bq and w = Lq*xi + cq, exact i64
/// arithmetic (no reduction). The overflow certificate guarantees these fit
/// Z_q for in-domain states.
pub fn integer_preactivations(netq: &QuantizedNetwork, xi: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let branch = |mat: &[Vec<i64>], off: &[i64]| -> Vec<i64> {
        mat.iter()
            .zip(off)
            .map(|(row, &o)| row.iter().zip(xi).map(|(&m, &x)| m * x).sum::<i64>() + o)
            .collect()
    };
    (
        branch(&netq.kq, &netq.bq),
        branch(&netq.lq, &netq.cq),
    )
}

/// The plaintext integer pipeline: u = (1/s3) * mu((max{v} - max{w}) mod q).
/// This is the exact value the protocol must reproduce bit for bit.
pub fn integer_pipeline_u(netq: &QuantizedNetwork, cfg: &QuantizationConfig, xi: &[i64]) -> f64 {
    let (v, w) = integer_preactivations(netq, xi);
    let max_v = *v.iter().max().expect("p >= 1");
    let max_w = *w.iter().max().expect("p >= 1");
    let diff = ring::reduce_signed(max_v.wrapping_sub(max_w), cfg.l).expect("valid width");
    ring::mu(diff).value() as f64 / cfg.s3
}

/// A trained p = 8 controller for the double integrator, shipped as a
/// JSON asset. Used for pipeline-exactness and sizing tests.
pub fn fixture_paper_p8() -> MaxoutController {
    let doc = NetworkDocument::parse(include_str!("../assets/paper_p8.json"))
        .expect("embedded asset parses");
    MaxoutController {
        network: doc.network().expect("embedded asset is well-shaped"),
        input_bound: 1.0,
    }
}

/// A p = 2 controller that represents clamp(k.x, -1, 1) exactly:
/// K = [k; 0], b = (0, -1), L = [k; 0], c = (-1, 0).
pub fn fixture_saturated_feedback(k: [f64; 2]) -> MaxoutController {
    let net = RealNetwork::new(
        vec![k.to_vec(), vec![0.0, 0.0]],
        vec![k.to_vec(), vec![0.0, 0.0]],
        vec![0.0, -1.0],
        vec![-1.0, 0.0],
    )
    .expect("static shape");
    MaxoutController {
        network: net,
        input_bound: 1.0,
    }
}

/// Gain used by the benchmark saturated-feedback fixture. The unsaturated
/// closed loop A + B k^T has spectral radius sqrt(0.2) < 1.
pub const SATURATED_FIXTURE_GAIN: [f64; 2] = [-0.4, -1.0];

/// One simulated trajectory.
#[derive(Clone, Debug)]
pub struct SimulationTrace {
    pub controller_id: String,
    pub seed: u64,
    /// (k, x(k), u(k))
    pub steps: Vec<(usize, Vec<f64>, f64)>,
    /// set when the state left the guard box and the run was cut short
    pub truncated: bool,
}

impl SimulationTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,x1,x2,u\n");
        for (k, x, u) in &self.steps {
            out.push_str(&format!("{k},{},{},{u}\n", x[0], x[1]));
        }
        out
    }
}

/// Iterates x+ = A x + B u with u supplied by `controller` (plaintext or
/// protocol-in-the-loop). Truncates when the state leaves `guard`.
pub fn closed_loop<F>(
    sys: &LinearSystem,
    mut controller: F,
    x0: &[f64],
    steps: usize,
    guard: &StateDomain,
    controller_id: &str,
    seed: u64,
) -> Result<SimulationTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut x = x0.to_vec();
    let mut trace = SimulationTrace {
        controller_id: controller_id.to_string(),
        seed,
        steps: Vec::with_capacity(steps),
        truncated: false,
    };
    for k in 0..steps {
        if !guard.contains(&x) {
            trace.truncated = true;
            break;
        }
        let u = controller(&x)?;
        trace.steps.push((k, x.clone(), u));
        x = sys.step(&x, u);
    }
    Ok(trace)
}

/// Final state after a trace (the state following the last recorded step).
pub fn final_state(sys: &LinearSystem, trace: &SimulationTrace) -> Option<Vec<f64>> {
    trace
        .steps
        .last()
        .map(|(_, x, u)| sys.step(x, *u))
}

/// Uniform samples over the state box, deterministic per seed.
pub fn sample_states(dom: &StateDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            dom.half_widths
                .iter()
                .map(|&r| rng.gen_range(-r..=r))
                .collect()
        })
        .collect()
}

/// Spectral radius of a 2x2 matrix, used to sanity-check fixture gains.
pub fn spectral_radius_2x2(m: &[Vec<f64>]) -> Result<f64> {
    if m.len() != 2 || m[0].len() != 2 {
        return Err(Error::ShapeMismatch {
            expected: "2x2".into(),
            got: format!("{}x{}", m.len(), m.first().map_or(0, Vec::len)),
        });
    }
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        Ok((tr / 2.0 + r).abs().max((tr / 2.0 - r).abs()))
    } else {
        Ok(det.abs().sqrt())
    }
}
