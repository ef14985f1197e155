//! Real-to-integer conversion of controller data.
//!
//! Weights and states are scaled by s2 and s1 respectively and rounded to
//! the nearest integer (ties away from zero), offsets by s3 = s1*s2. The
//! module also evaluates the closed-form approximation error bound, sizes
//! s3 against the ring width, and certifies that no preactivation can leave
//! Z_q anywhere in the declared state box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::signed_range;

/// Scaling factors and error-bound data tying real weights to ring integers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationConfig {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub l: u8,
    pub eta: f64,
    pub n: usize,
}

impl QuantizationConfig {
    /// `eta` must satisfy the assumed bounds for the intended domain and
    /// weights; use [`eta_for`] to compute the smallest admissible value.
    pub fn new(s1: f64, s2: f64, l: u8, eta: f64, n: usize) -> Result<Self> {
        if s1 <= 0.0 || s2 <= 0.0 || eta < 0.0 {
            return Err(Error::Setup(format!(
                "scaling factors must be positive (s1={s1}, s2={s2}, eta={eta})"
            )));
        }
        if l < 2 {
            return Err(Error::InvalidWidth(l));
        }
        Ok(Self {
            s1,
            s2,
            s3: s1 * s2,
            l,
            eta,
            n,
        })
    }
}

/// Real-valued max-out controller weights: g(x) = max{Kx+b} - max{Lx+c}.
#[derive(Clone, Debug, PartialEq)]
pub struct RealNetwork {
    /// p x n, row-major
    pub k: Vec<Vec<f64>>,
    /// p x n, row-major
    pub l: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl RealNetwork {
    pub fn new(k: Vec<Vec<f64>>, l: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let p = k.len();
        let n = k.first().map_or(0, Vec::len);
        let shape_ok = l.len() == p
            && b.len() == p
            && c.len() == p
            && k.iter().chain(l.iter()).all(|row| row.len() == n);
        if !shape_ok || p == 0 || n == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("K, L p x n with b, c of length p (p={p}, n={n})"),
                got: format!("K {}x?, L {}x?, b {}, c {}", k.len(), l.len(), b.len(), c.len()),
            });
        }
        Ok(Self { k, l, b, c })
    }

    pub fn p(&self) -> usize {
        self.k.len()
    }

    pub fn n(&self) -> usize {
        self.k[0].len()
    }

    /// Largest absolute entry over both weight matrices.
    pub fn weight_max(&self) -> f64 {
        self.k
            .iter()
            .chain(self.l.iter())
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Integer controller weights living in Z_q.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedNetwork {
    pub kq: Vec<Vec<i64>>,
    pub lq: Vec<Vec<i64>>,
    pub bq: Vec<i64>,
    pub cq: Vec<i64>,
    pub l: u8,
}

impl QuantizedNetwork {
    pub fn p(&self) -> usize {
        self.kq.len()
    }

    pub fn n(&self) -> usize {
        self.kq[0].len()
    }
}

/// Symmetric state box |x_i| <= half_widths[i].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDomain {
    pub half_widths: Vec<f64>,
}

impl StateDomain {
    pub fn new(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.is_empty() || half_widths.iter().any(|&r| r <= 0.0) {
            return Err(Error::Setup(format!(
                "state box half-widths must be positive: {half_widths:?}"
            )));
        }
        Ok(Self { half_widths })
    }

    pub fn n(&self) -> usize {
        self.half_widths.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n() && x.iter().zip(&self.half_widths).all(|(&xi, &r)| xi.abs() <= r)
    }
}

/// Round half away from zero; f64::round has exactly this tie behavior.
pub fn round_nearest(x: f64) -> i64 {
    x.round() as i64
}

/// Smallest eta satisfying the assumed bounds over the box for the given
/// scaling factors.
pub fn eta_for(net: &RealNetwork, dom: &StateDomain, s1: f64, s2: f64) -> f64 {
    let r_max = dom.half_widths.iter().fold(0.0f64, |m, &r| m.max(r));
    (2.0 * s1 * r_max).max(2.0 * s2 * net.weight_max())
}

fn quantize_entry(x: f64, scale: f64, l: u8, place: &str) -> Result<i64> {
    let v = round_nearest(scale * x);
    let (lo, hi) = signed_range(l);
    if v < lo || v > hi {
        return Err(Error::QuantizeOverflow {
            place: place.to_string(),
            value: scale * x,
            l,
        });
    }
    Ok(v)
}

/// Entrywise rounding of the scaled network into Z_q.
pub fn quantize_network(net: &RealNetwork, cfg: &QuantizationConfig) -> Result<QuantizedNetwork> {
    let q_mat = |m: &[Vec<f64>], name: &str| -> Result<Vec<Vec<i64>>> {
        m.iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| quantize_entry(v, cfg.s2, cfg.l, &format!("{name}[{i}][{j}]")))
                    .collect()
            })
            .collect()
    };
    let q_vec = |v: &[f64], name: &str| -> Result<Vec<i64>> {
        v.iter()
            .enumerate()
            .map(|(i, &e)| quantize_entry(e, cfg.s3, cfg.l, &format!("{name}[{i}]")))
            .collect()
    };
    Ok(QuantizedNetwork {
        kq: q_mat(&net.k, "K")?,
        lq: q_mat(&net.l, "L")?,
        bq: q_vec(&net.b, "b")?,
        cq: q_vec(&net.c, "c")?,
        l: cfg.l,
    })
}

/// xi = round(s1 * x), after checking the state against the domain.
pub fn quantize_state(x: &[f64], cfg: &QuantizationConfig, dom: &StateDomain) -> Result<Vec<i64>> {
    for (i, (&xi, &r)) in x.iter().zip(&dom.half_widths).enumerate() {
        if xi.abs() > r {
            return Err(Error::DomainViolation {
                index: i,
                value: xi,
                limit: r,
            });
        }
    }
    if x.len() != dom.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("state of dimension {}", dom.n()),
            got: format!("{}", x.len()),
        });
    }
    Ok(x.iter().map(|&xi| round_nearest(cfg.s1 * xi)).collect())
}

/// The closed-form approximation error bound and its half value Delta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBound {
    /// (1/s3)(n*eta + n/2 + 1)
    pub bound: f64,
    /// Delta = bound / 2, the per-neuron deviation bound used for sizing.
    pub half: f64,
}

pub fn error_bound(cfg: &QuantizationConfig) -> ErrorBound {
    let n = cfg.n as f64;
    let bound = (n * cfg.eta + n / 2.0 + 1.0) / cfg.s3;
    ErrorBound {
        bound,
        half: bound / 2.0,
    }
}

/// Largest |row . x + offset| over the state box, in closed form:
/// per row, sum_j |M_ij| r_j + |off_i|.
fn box_max(mat: &[Vec<f64>], off: &[f64], dom: &StateDomain) -> f64 {
    mat.iter()
        .zip(off)
        .map(|(row, &o)| {
            row.iter()
                .zip(&dom.half_widths)
                .map(|(&m, &r)| m.abs() * r)
                .sum::<f64>()
                + o.abs()
        })
        .fold(0.0, f64::max)
}

/// Upper bound on s3 so that all preactivations stay in Z_q over the box:
/// 2^{l-1} / (M + delta_cap) with M the box maximum over both branches.
pub fn s3_max(net: &RealNetwork, dom: &StateDomain, l: u8, delta_cap: f64) -> f64 {
    let m = box_max(&net.k, &net.b, dom).max(box_max(&net.l, &net.c, dom));
    (1u64 << (l - 1)) as f64 / (m + delta_cap)
}

/// Proof (by interval arithmetic over the box) that every preactivation of
/// the quantized network fits Z_q, together with margins for the pairwise
/// differences the paper-exact sign-bit circuit relies on.
#[derive(Clone, Debug)]
pub struct Certificate {
    /// min over rows of (2^{l-1} - 1) - attained preactivation bound
    pub preactivation_margin: i64,
    /// true if every within-branch pairwise difference v_i - v_j (and
    /// w_i - w_j) fits Z_q; required by the paper-exact circuit mode
    pub pairwise_fit: bool,
    pub pairwise_margin: i64,
    /// true if max{v} - max{w} fits Z_q over the whole box: the actuator
    /// reconstruction condition
    pub cross_fit: bool,
    pub cross_margin: i64,
}

/// Names the offending row when certification fails.
#[derive(Clone, Debug)]
pub struct ViolationReport {
    pub branch: String,
    pub row: usize,
    pub attained: i64,
    pub limit: i64,
}

impl std::fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "branch {} row {}: attained bound {} exceeds limit {}",
            self.branch, self.row, self.attained, self.limit
        )
    }
}

fn xi_max(cfg: &QuantizationConfig, dom: &StateDomain) -> Vec<i64> {
    dom.half_widths
        .iter()
        .map(|&r| round_nearest(cfg.s1 * r))
        .collect()
}

fn row_bound(row: &[i64], off: i64, xi: &[i64]) -> i64 {
    row.iter()
        .zip(xi)
        .map(|(&m, &x)| m.abs() * x)
        .sum::<i64>()
        + off.abs()
}

/// Certify that K*xi + beta and L*xi + gamma stay in Z_q for every
/// quantized state of the box.
pub fn certify_no_overflow(
    netq: &QuantizedNetwork,
    dom: &StateDomain,
    cfg: &QuantizationConfig,
) -> std::result::Result<Certificate, ViolationReport> {
    let limit = signed_range(cfg.l).1;
    let xi = xi_max(cfg, dom);
    let mut margin = i64::MAX;
    for (branch, mat, off) in [("v", &netq.kq, &netq.bq), ("w", &netq.lq, &netq.cq)] {
        for (i, row) in mat.iter().enumerate() {
            let attained = row_bound(row, off[i], &xi);
            if attained > limit {
                return Err(ViolationReport {
                    branch: branch.to_string(),
                    row: i,
                    attained,
                    limit,
                });
            }
            margin = margin.min(limit - attained);
        }
    }

    // pairwise differences within each branch
    let pair_bound = |mat: &[Vec<i64>], off: &[i64]| -> i64 {
        let p = mat.len();
        let mut worst = 0i64;
        for i in 0..p {
            for j in 0..p {
                let row: Vec<i64> = mat[i].iter().zip(&mat[j]).map(|(a, b)| a - b).collect();
                worst = worst.max(row_bound(&row, off[i] - off[j], &xi));
            }
        }
        worst
    };
    let pw = pair_bound(&netq.kq, &netq.bq).max(pair_bound(&netq.lq, &netq.cq));

    // max{v} - max{w}: at every state, max{v} <= max_i upper(v_i) and
    // max{w} >= max_j lower(w_j) (witnessed by the row with the best lower
    // corner), so the difference is bracketed by the corner extremes
    let upper = |mat: &[Vec<i64>], off: &[i64]| -> i64 {
        mat.iter()
            .zip(off)
            .map(|(row, &o)| row_bound(row, 0, &xi) + o)
            .max()
            .expect("p >= 1")
    };
    let lower = |mat: &[Vec<i64>], off: &[i64]| -> i64 {
        mat.iter()
            .zip(off)
            .map(|(row, &o)| -row_bound(row, 0, &xi) + o)
            .max()
            .expect("p >= 1")
    };
    let (uv, lv) = (upper(&netq.kq, &netq.bq), lower(&netq.kq, &netq.bq));
    let (uw, lw) = (upper(&netq.lq, &netq.cq), lower(&netq.lq, &netq.cq));
    let cross = (uv - lw).max(uw - lv);

    Ok(Certificate {
        preactivation_margin: margin,
        pairwise_fit: pw <= limit,
        pairwise_margin: limit - pw,
        cross_fit: cross <= limit,
        cross_margin: limit - cross,
    })
}

/// JSON document carrying network weights and optionally a quantization
/// config: fields K, L (row-major, length p*n), b, c, p, n, s1, s2, l.
#[derive(Serialize, Deserialize)]
pub struct NetworkDocument {
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    #[serde(rename = "L")]
    pub l_mat: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub p: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u8>,
}

impl NetworkDocument {
    pub fn parse(json: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(json)?;
        if doc.k.len() != doc.p * doc.n || doc.l_mat.len() != doc.p * doc.n {
            return Err(Error::FileFormat(format!(
                "K/L must hold p*n = {} entries",
                doc.p * doc.n
            )));
        }
        if doc.b.len() != doc.p || doc.c.len() != doc.p {
            return Err(Error::FileFormat(format!("b/c must hold p = {} entries", doc.p)));
        }
        Ok(doc)
    }

    pub fn network(&self) -> Result<RealNetwork> {
        let unflatten = |flat: &[f64]| -> Vec<Vec<f64>> {
            flat.chunks(self.n).map(<[f64]>::to_vec).collect()
        };
        RealNetwork::new(
            unflatten(&self.k),
            unflatten(&self.l_mat),
            self.b.clone(),
            self.c.clone(),
        )
    }

    pub fn from_network(net: &RealNetwork) -> Self {
        Self {
            k: net.k.iter().flatten().copied().collect(),
            l_mat: net.l.iter().flatten().copied().collect(),
            b: net.b.clone(),
            c: net.c.clone(),
            p: net.p(),
            n: net.n(),
            s1: None,
            s2: None,
            l: None,
        }
    }
}
