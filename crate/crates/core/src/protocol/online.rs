//! The per-time-step online schedule. Four roles: the sensor shares the
//! quantized state, the two clouds run the Beaver openings, garble one
//! circuit each (CloudAlpha the v branch, CloudBeta the w branch),
//! exchange evaluator labels via oblivious transfer, evaluate each other's
//! circuit, and the actuator reconstructs u from the two masked maxima.
//!
//! Each party is a deterministic state machine; clouds run on their own
//! threads and talk only through [`Channel`]s.

use std::collections::{HashMap, HashSet};
use std::thread;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::circuit::{build_neuron_circuit, value_to_bits, Circuit};
use crate::error::{Error, Result};
use crate::garble::{
    self, circuit_hash, evaluate_garbled, garble, GarbledCircuit, WireLabel, HEADER_BYTES,
    LABEL_BYTES,
};
use crate::ot::{ot_receive_phase1, ot_receive_phase2, ot_send, OtRequest, OtResponse};
use crate::quantize::quantize_state;
use crate::ring;
use crate::shares::{
    beaver_open, file as share_file, preactivation_shares, replicate_rows, share_matrix,
    OpenedContribution, OpenedValue, PartyIndex, ShareMatrix,
};

use super::channel::{memory_pair, tcp_pair, Channel};
use super::message::{Frame, Tag};
use super::setup::{PartyBundle, SessionConfig};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Role {
    Sensor,
    CloudAlpha,
    CloudBeta,
    Actuator,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Sensor => "sensor",
            Role::CloudAlpha => "cloud_alpha",
            Role::CloudBeta => "cloud_beta",
            Role::Actuator => "actuator",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    Sent,
    Received,
}

/// One frame as seen by one party; payloads are logged as digests so a
/// whole session transcript stays small but remains replay-comparable.
#[derive(Clone, Debug)]
pub struct FrameLog {
    pub role: Role,
    pub dir: Direction,
    pub tag: Tag,
    pub time_step: u32,
    pub len: usize,
    pub digest: [u8; 32],
}

impl FrameLog {
    fn new(role: Role, dir: Direction, frame: &Frame) -> Self {
        FrameLog {
            role,
            dir,
            tag: frame.tag,
            time_step: frame.time_step,
            len: frame.payload.len(),
            digest: Sha256::digest(&frame.payload).into(),
        }
    }

    /// One line per frame: role, direction, tag, step, length, digest.
    pub fn to_line(&self) -> String {
        let dir = match self.dir {
            Direction::Sent => "->",
            Direction::Received => "<-",
        };
        let hex: String = self.digest.iter().map(|b| format!("{b:02x}")).collect();
        format!(
            "{} {} {} step={} len={} sha256={}",
            self.role.as_str(),
            dir,
            self.tag.as_str(),
            self.time_step,
            self.len,
            hex
        )
    }
}

pub fn tag_counts(frames: &[FrameLog]) -> HashMap<Tag, usize> {
    let mut out = HashMap::new();
    for f in frames {
        if f.dir == Direction::Sent {
            *out.entry(f.tag).or_insert(0) += 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CloudOptions {
    /// Test mode: fix r_i = 0 so the masked results equal the unmasked
    /// maxima. Never use outside tests.
    pub force_zero_mask: bool,
}

/// A cloud's live state across time steps.
pub struct CloudState {
    pub bundle: PartyBundle,
    pub options: CloudOptions,
    circuit: Circuit,
    topology_hash: [u8; 32],
    rng: ChaCha12Rng,
    step: u32,
    seen_gc: HashSet<[u8; 32]>,
}

impl CloudState {
    pub fn new(bundle: PartyBundle, options: CloudOptions) -> Result<Self> {
        let circuit = build_neuron_circuit(&bundle.cfg.circuit_spec())?;
        let topology_hash = circuit_hash(&circuit);
        let salt = match bundle.party {
            PartyIndex::P1 => 0xA1u64,
            PartyIndex::P2 => 0xBE7Au64,
        };
        let rng = ChaCha12Rng::seed_from_u64(bundle.cfg.seed ^ salt);
        Ok(CloudState {
            bundle,
            options,
            circuit,
            topology_hash,
            rng,
            step: 0,
            seen_gc: HashSet::new(),
        })
    }

    pub fn role(&self) -> Role {
        match self.bundle.party {
            PartyIndex::P1 => Role::CloudAlpha,
            PartyIndex::P2 => Role::CloudBeta,
        }
    }
}

/// What one cloud did in one step, for transcripts and invariant checks.
#[derive(Clone, Debug)]
pub struct CloudStepReport {
    pub delta: u64,
    pub gc_hash: [u8; 32],
    pub triple_ids: [u64; 2],
    pub frames: Vec<FrameLog>,
}

fn proto_err(step: u32, message: impl Into<String>) -> Error {
    Error::Protocol {
        step,
        message: message.into(),
    }
}

// --- payload codecs -----------------------------------------------------

fn encode_contribution(c: &OpenedContribution) -> Vec<u8> {
    let n = ring::byte_len(c.width);
    let mut out = Vec::with_capacity(17 + 2 * c.d.len() * n);
    out.extend_from_slice(&c.triple_id.to_le_bytes());
    out.extend_from_slice(&(c.rows as u32).to_le_bytes());
    out.extend_from_slice(&(c.cols as u32).to_le_bytes());
    out.push(c.width);
    for &v in c.d.iter().chain(&c.e) {
        out.extend_from_slice(&v.to_le_bytes()[..n]);
    }
    out
}

fn decode_contribution(step: u32, bytes: &[u8]) -> Result<OpenedContribution> {
    if bytes.len() < 17 {
        return Err(proto_err(step, "BEAVER_OPEN payload truncated"));
    }
    let triple_id = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let width = bytes[16];
    let n = ring::byte_len(width);
    let body = &bytes[17..];
    if width == 0 || width > 64 || body.len() != 2 * rows * cols * n {
        return Err(proto_err(step, "BEAVER_OPEN payload malformed"));
    }
    let parse = |chunk: &[u8]| -> Result<Vec<u64>> {
        chunk
            .chunks(n)
            .map(|c| Ok(ring::RingElement::from_le_bytes(c, width)?.value()))
            .collect()
    };
    let half = rows * cols * n;
    Ok(OpenedContribution {
        triple_id,
        rows,
        cols,
        width,
        d: parse(&body[..half])?,
        e: parse(&body[half..])?,
    })
}

fn encode_two(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + a.len() + b.len());
    out.extend_from_slice(&(a.len() as u32).to_le_bytes());
    out.extend_from_slice(a);
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
    out
}

fn decode_two(step: u32, bytes: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    let err = || proto_err(step, "paired payload malformed");
    if bytes.len() < 4 {
        return Err(err());
    }
    let la = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() < 8 + la {
        return Err(err());
    }
    let a = bytes[4..4 + la].to_vec();
    let lb = u32::from_le_bytes(bytes[4 + la..8 + la].try_into().unwrap()) as usize;
    if bytes.len() != 8 + la + lb {
        return Err(err());
    }
    Ok((a, bytes[8 + la..].to_vec()))
}

fn labels_to_bytes(labels: &[WireLabel]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.0).collect()
}

fn bytes_to_labels(step: u32, bytes: &[u8]) -> Result<Vec<WireLabel>> {
    if bytes.len() % LABEL_BYTES != 0 {
        return Err(proto_err(step, "label payload not a multiple of 16 bytes"));
    }
    Ok(bytes
        .chunks_exact(LABEL_BYTES)
        .map(|c| WireLabel(c.try_into().unwrap()))
        .collect())
}

/// LSB-first bits of every entry of a shared column vector, entry-major —
/// exactly the circuit's input ordering.
fn vector_bits(m: &ShareMatrix) -> Vec<bool> {
    m.data
        .iter()
        .flat_map(|&v| value_to_bits(v, m.width))
        .collect()
}

// --- the four roles -----------------------------------------------------

/// Quantizes and shares the state; returns one STATE_SHARE frame per cloud.
pub fn sensor_step(
    x: &[f64],
    cfg: &SessionConfig,
    time_step: u32,
    rng: &mut impl Rng,
) -> Result<(Frame, Frame)> {
    let xi = quantize_state(x, &cfg.quantization(), &cfg.state_domain()?)?;
    let (s1, s2) = share_matrix(&xi, cfg.n, 1, cfg.l, rng)?;
    let frame = |m: &ShareMatrix| Frame {
        tag: Tag::StateShare,
        session_id: cfg.session_id,
        time_step,
        payload: share_file::encode(m),
    };
    Ok((frame(&s1), frame(&s2)))
}

/// u = (1/s3) * mu((dv - dw) mod q); both masks cancel in the difference.
pub fn actuator_reconstruct(dv: u64, dw: u64, cfg: &SessionConfig) -> Result<f64> {
    let a = ring::RingElement::new(dv, cfg.l)?;
    let b = ring::RingElement::new(dw, cfg.l)?;
    Ok(ring::mu(ring::mod_sub(a, b)?).value() as f64 / cfg.s3)
}

/// Runs one cloud through one full time step.
pub fn cloud_step(
    state: &mut CloudState,
    peer: &mut dyn Channel,
    harness: &mut dyn Channel,
) -> Result<CloudStepReport> {
    let cfg = state.bundle.cfg.clone();
    let step = state.step;
    let role = state.role();
    let mut frames: Vec<FrameLog> = Vec::new();

    let send = |ch: &mut dyn Channel, frames: &mut Vec<FrameLog>, tag: Tag, payload: Vec<u8>| -> Result<()> {
        let frame = Frame {
            tag,
            session_id: cfg.session_id,
            time_step: step,
            payload,
        };
        frames.push(FrameLog::new(role, Direction::Sent, &frame));
        ch.send(&frame)
    };
    let recv = |ch: &mut dyn Channel, frames: &mut Vec<FrameLog>, tag: Tag| -> Result<Frame> {
        let frame = ch.recv_expect(tag, cfg.session_id, step)?;
        frames.push(FrameLog::new(role, Direction::Received, &frame));
        Ok(frame)
    };

    // (i) state share in, Beaver openings for both branches
    let xi_frame = recv(harness, &mut frames, Tag::StateShare)?;
    let xi_share = share_file::decode(&xi_frame.payload)?;
    if xi_share.party != state.bundle.party || xi_share.rows != cfg.n || xi_share.cols != 1 {
        return Err(proto_err(step, "STATE_SHARE does not match this party"));
    }
    let x_mat = replicate_rows(&xi_share, cfg.p)?;
    let idx = step as usize;
    let (kq, lq) = (state.bundle.kq.clone(), state.bundle.lq.clone());
    let tv = state
        .bundle
        .triples_v
        .get_mut(idx)
        .ok_or(Error::TriplesExhausted)?;
    let cv = beaver_open(tv, &kq, &x_mat)?;
    let tw = state
        .bundle
        .triples_w
        .get_mut(idx)
        .ok_or(Error::TriplesExhausted)?;
    let cw = beaver_open(tw, &lq, &x_mat)?;
    send(
        peer,
        &mut frames,
        Tag::BeaverOpen,
        encode_two(&encode_contribution(&cv), &encode_contribution(&cw)),
    )?;
    let peer_open = recv(peer, &mut frames, Tag::BeaverOpen)?;
    let (pv_bytes, pw_bytes) = decode_two(step, &peer_open.payload)?;
    let pcv = decode_contribution(step, &pv_bytes)?;
    let pcw = decode_contribution(step, &pw_bytes)?;
    let ov = OpenedValue::combine(&cv, &pcv)?;
    let ow = OpenedValue::combine(&cw, &pcw)?;
    let v_share = preactivation_shares(&ov, &state.bundle.triples_v[idx], &state.bundle.beta)?;
    let w_share = preactivation_shares(&ow, &state.bundle.triples_w[idx], &state.bundle.gamma)?;

    // (ii) garble own branch: Alpha the v circuit, Beta the w circuit
    let (my_branch, other_branch) = match state.bundle.party {
        PartyIndex::P1 => (&v_share, &w_share),
        PartyIndex::P2 => (&w_share, &v_share),
    };
    let r_mask: u64 = if state.options.force_zero_mask {
        0
    } else {
        state.rng.next_u64() & ((u128::from(1u64) << cfg.l) - 1) as u64
    };
    let (gc, encoding) = garble(&state.circuit, cfg.p as u16, &mut state.rng);
    let gc_hash = gc.material_hash();
    if !state.seen_gc.insert(gc_hash) {
        return Err(proto_err(step, "garbled circuit reused within session"));
    }
    let gc_bytes = gc.to_bytes();
    let tables_end = HEADER_BYTES + 64 * gc.and_count as usize;
    send(
        peer,
        &mut frames,
        Tag::GarbledCircuit,
        gc_bytes[..tables_end].to_vec(),
    )?;
    send(
        peer,
        &mut frames,
        Tag::OutputDecode,
        gc_bytes[tables_end..].to_vec(),
    )?;
    let mut garbler_bits = vector_bits(my_branch);
    garbler_bits.extend(value_to_bits(r_mask, cfg.l));
    let garbler_labels = encoding.encode_garbler(&garbler_bits)?;
    send(
        peer,
        &mut frames,
        Tag::GarblerInputLabels,
        labels_to_bytes(&garbler_labels),
    )?;

    // peer's circuit material
    let peer_gc_frame = recv(peer, &mut frames, Tag::GarbledCircuit)?;
    let peer_decode_frame = recv(peer, &mut frames, Tag::OutputDecode)?;
    let mut peer_gc_bytes = peer_gc_frame.payload;
    peer_gc_bytes.extend_from_slice(&peer_decode_frame.payload);
    let peer_gc = GarbledCircuit::from_bytes(&peer_gc_bytes)?;
    if peer_gc.circuit_hash != state.topology_hash {
        return Err(proto_err(step, "peer garbled a different circuit topology"));
    }
    let peer_garbler_labels =
        bytes_to_labels(step, &recv(peer, &mut frames, Tag::GarblerInputLabels)?.payload)?;
    if peer_garbler_labels.len() != (cfg.p + 1) * cfg.l as usize {
        return Err(proto_err(step, "wrong garbler label count"));
    }

    // (iii) oblivious transfer both ways: we are receiver for our share of
    // the peer's branch, sender for the peer's share of ours
    let params = cfg.ot_params();
    let choices = vector_bits(other_branch);
    let (request, receiver_state) = ot_receive_phase1(&params, &choices, &mut state.rng);
    send(peer, &mut frames, Tag::OtRequest, request.to_bytes(&params))?;
    let peer_request =
        OtRequest::from_bytes(&params, &recv(peer, &mut frames, Tag::OtRequest)?.payload)?;
    let response = ot_send(&params, &peer_request, &encoding.evaluator, &mut state.rng)?;
    send(peer, &mut frames, Tag::OtResponse, response.to_bytes(&params))?;
    let my_response =
        OtResponse::from_bytes(&params, &recv(peer, &mut frames, Tag::OtResponse)?.payload)?;
    let evaluator_labels = ot_receive_phase2(&params, &my_response, receiver_state)?;

    // (iv) evaluate the peer's circuit and forward the re-masked maximum
    let out_labels = evaluate_garbled(
        &peer_gc,
        &state.circuit,
        &peer_garbler_labels,
        &evaluator_labels,
    )?;
    let bits = garble::decode_outputs(&out_labels, &peer_gc.decode)?;
    let masked_max = crate::circuit::bits_to_value(&bits);
    // peer output is max{branch} + r_peer; add our own mask so the
    // actuator sees (max + r_peer + r_own) and the r's cancel pairwise
    let delta = ring::mod_add(
        ring::RingElement::new(masked_max, cfg.l)?,
        ring::RingElement::new(r_mask, cfg.l)?,
    )?
    .value();
    send(
        harness,
        &mut frames,
        Tag::MaskedResult,
        ring::RingElement::new(delta, cfg.l)?.to_le_bytes(),
    )?;

    state.step += 1;
    Ok(CloudStepReport {
        delta,
        gc_hash,
        triple_ids: [
            state.bundle.triples_v[idx].id,
            state.bundle.triples_w[idx].id,
        ],
        frames,
    })
}

// --- session orchestration ----------------------------------------------

/// Transcript of one completed time step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: u32,
    pub u: f64,
    /// masked results as received by the actuator
    pub dv: u64,
    pub dw: u64,
    pub millis: f64,
    /// [alpha, beta] garbled-material hashes
    pub gc_hashes: [[u8; 32]; 2],
    pub triple_ids: Vec<u64>,
    pub frames: Vec<FrameLog>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Transport {
    Memory,
    Tcp,
}

/// A live four-role session. The harness thread plays sensor and actuator;
/// the clouds run on scoped threads for every step.
pub struct Session {
    pub cfg: SessionConfig,
    alpha: CloudState,
    beta: CloudState,
    alpha_peer: Box<dyn Channel>,
    beta_peer: Box<dyn Channel>,
    alpha_cloud_end: Box<dyn Channel>,
    beta_cloud_end: Box<dyn Channel>,
    harness_alpha: Box<dyn Channel>,
    harness_beta: Box<dyn Channel>,
    sensor_rng: ChaCha12Rng,
    next_step: u32,
    pub records: Vec<StepRecord>,
}

impl Session {
    pub fn new(
        b1: PartyBundle,
        b2: PartyBundle,
        options: CloudOptions,
        transport: Transport,
    ) -> Result<Self> {
        if b1.cfg != b2.cfg || b1.party != PartyIndex::P1 || b2.party != PartyIndex::P2 {
            return Err(Error::Setup(
                "session needs matching bundles for party 1 and party 2".into(),
            ));
        }
        let cfg = b1.cfg.clone();
        let seed = cfg.seed;
        let (alpha_peer, beta_peer, ha, ac, hb, bc): (
            Box<dyn Channel>,
            Box<dyn Channel>,
            Box<dyn Channel>,
            Box<dyn Channel>,
            Box<dyn Channel>,
            Box<dyn Channel>,
        ) = match transport {
            Transport::Memory => {
                let (ap, bp) = memory_pair();
                let (ha, ac) = memory_pair();
                let (hb, bc) = memory_pair();
                (
                    Box::new(ap),
                    Box::new(bp),
                    Box::new(ha),
                    Box::new(ac),
                    Box::new(hb),
                    Box::new(bc),
                )
            }
            Transport::Tcp => {
                let (ap, bp) = tcp_pair()?;
                let (ha, ac) = tcp_pair()?;
                let (hb, bc) = tcp_pair()?;
                (
                    Box::new(ap),
                    Box::new(bp),
                    Box::new(ha),
                    Box::new(ac),
                    Box::new(hb),
                    Box::new(bc),
                )
            }
        };
        Ok(Session {
            alpha: CloudState::new(b1, options)?,
            beta: CloudState::new(b2, options)?,
            alpha_peer,
            beta_peer,
            alpha_cloud_end: ac,
            beta_cloud_end: bc,
            harness_alpha: ha,
            harness_beta: hb,
            sensor_rng: ChaCha12Rng::seed_from_u64(seed ^ 0x5E25),
            next_step: 0,
            cfg,
        records: Vec::new(),
        })
    }

    pub fn in_memory(b1: PartyBundle, b2: PartyBundle) -> Result<Self> {
        Session::new(b1, b2, CloudOptions::default(), Transport::Memory)
    }

    /// Runs one full protocol time step and returns the control input.
    pub fn step(&mut self, x: &[f64]) -> Result<f64> {
        let start = Instant::now();
        let step = self.next_step;
        if step as usize >= self.cfg.steps {
            return Err(Error::TriplesExhausted);
        }
        let (fa, fb) = sensor_step(x, &self.cfg, step, &mut self.sensor_rng)?;
        let mut harness_frames = vec![
            FrameLog::new(Role::Sensor, Direction::Sent, &fa),
            FrameLog::new(Role::Sensor, Direction::Sent, &fb),
        ];

        let alpha = &mut self.alpha;
        let beta = &mut self.beta;
        let alpha_peer = self.alpha_peer.as_mut();
        let beta_peer = self.beta_peer.as_mut();
        let alpha_cloud_end = self.alpha_cloud_end.as_mut();
        let beta_cloud_end = self.beta_cloud_end.as_mut();
        let harness_alpha = self.harness_alpha.as_mut();
        let harness_beta = self.harness_beta.as_mut();
        let cfg = &self.cfg;

        let (res_a, res_b, res_h) = thread::scope(|s| {
            let ha = s.spawn(move || cloud_step(alpha, alpha_peer, alpha_cloud_end));
            let hb = s.spawn(move || cloud_step(beta, beta_peer, beta_cloud_end));
            let res_h = (|| -> Result<(u64, u64, Vec<FrameLog>)> {
                let mut logs = Vec::new();
                harness_alpha.send(&fa)?;
                harness_beta.send(&fb)?;
                // Alpha evaluates the w circuit and returns delta-omega;
                // Beta returns delta-nu
                let dw_frame =
                    harness_alpha.recv_expect(Tag::MaskedResult, cfg.session_id, step)?;
                logs.push(FrameLog::new(Role::Actuator, Direction::Received, &dw_frame));
                let dv_frame =
                    harness_beta.recv_expect(Tag::MaskedResult, cfg.session_id, step)?;
                logs.push(FrameLog::new(Role::Actuator, Direction::Received, &dv_frame));
                let dw = ring::RingElement::from_le_bytes(&dw_frame.payload, cfg.l)?.value();
                let dv = ring::RingElement::from_le_bytes(&dv_frame.payload, cfg.l)?.value();
                Ok((dv, dw, logs))
            })();
            let join = |h: thread::ScopedJoinHandle<'_, Result<CloudStepReport>>| {
                h.join()
                    .unwrap_or_else(|_| Err(proto_err(step, "cloud thread panicked")))
            };
            (join(ha), join(hb), res_h)
        });

        let report_a = res_a?;
        let report_b = res_b?;
        let (dv, dw, mut actuator_logs) = res_h?;
        let u = actuator_reconstruct(dv, dw, &self.cfg)?;

        harness_frames.append(&mut actuator_logs);
        let mut frames = harness_frames;
        frames.extend(report_a.frames.iter().cloned());
        frames.extend(report_b.frames.iter().cloned());
        self.records.push(StepRecord {
            step,
            u,
            dv,
            dw,
            millis: start.elapsed().as_secs_f64() * 1e3,
            gc_hashes: [report_a.gc_hash, report_b.gc_hash],
            // both clouds consume the same two logical triples
            triple_ids: {
                if report_a.triple_ids != report_b.triple_ids {
                    return Err(proto_err(step, "clouds consumed different triples"));
                }
                report_a.triple_ids.to_vec()
            },
            frames,
        });
        self.next_step += 1;
        Ok(u)
    }

    pub fn mean_step_millis(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        Some(self.records.iter().map(|r| r.millis).sum::<f64>() / self.records.len() as f64)
    }

    /// Line-oriented transcript dump of all steps so far.
    pub fn transcript_dump(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            for f in &rec.frames {
                out.push_str(&f.to_line());
                out.push('\n');
            }
        }
        out
    }
}
