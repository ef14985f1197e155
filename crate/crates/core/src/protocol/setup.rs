//! Offline provisioning: quantize and certify the controller, split the
//! weights into additive shares, deal per-step Beaver triples, and package
//! everything into one bundle per cloud.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitMode, NeuronCircuitSpec};
use crate::error::{Error, Result};
use crate::ot::OtParams;
use crate::quantize::{
    certify_no_overflow, eta_for, quantize_network, Certificate, QuantizationConfig, RealNetwork,
    StateDomain,
};
use crate::shares::{
    deal_triples, file as share_file, share_matrix, BeaverTripleMatrix, PartyIndex, ShareMatrix,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtGroup {
    /// 256-bit prime-order subgroup.
    Secure,
    /// ~2^61 subgroup: fast, for tests only.
    TestInsecure,
}

/// Public session parameters; both clouds hold an identical copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: u32,
    pub seed: u64,
    pub l: u8,
    pub p: usize,
    pub n: usize,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub eta: f64,
    pub mode: CircuitMode,
    pub ot_group: OtGroup,
    /// state box half-widths, one per component
    pub domain: Vec<f64>,
    /// number of provisioned time steps (one triple pair per step)
    pub steps: usize,
}

impl SessionConfig {
    pub fn quantization(&self) -> QuantizationConfig {
        QuantizationConfig {
            s1: self.s1,
            s2: self.s2,
            s3: self.s3,
            l: self.l,
            eta: self.eta,
            n: self.n,
        }
    }

    pub fn state_domain(&self) -> Result<StateDomain> {
        StateDomain::new(self.domain.clone())
    }

    pub fn circuit_spec(&self) -> NeuronCircuitSpec {
        NeuronCircuitSpec {
            p: self.p,
            l: self.l,
            mode: self.mode,
        }
    }

    pub fn ot_params(&self) -> OtParams {
        match self.ot_group {
            OtGroup::Secure => OtParams::secure(),
            OtGroup::TestInsecure => OtParams::test_insecure(),
        }
    }
}

/// One cloud's provisioning: weight shares and per-step triples.
#[derive(Clone, Debug)]
pub struct PartyBundle {
    pub cfg: SessionConfig,
    pub party: PartyIndex,
    pub kq: ShareMatrix,
    pub lq: ShareMatrix,
    pub beta: ShareMatrix,
    pub gamma: ShareMatrix,
    pub triples_v: Vec<BeaverTripleMatrix>,
    pub triples_w: Vec<BeaverTripleMatrix>,
}

#[derive(Clone, Copy, Debug)]
pub struct SetupOptions {
    pub mode: CircuitMode,
    pub steps: usize,
    pub session_id: u32,
    pub seed: u64,
    pub ot_group: OtGroup,
}

impl Default for SetupOptions {
    fn default() -> Self {
        SetupOptions {
            mode: CircuitMode::PaperExact,
            steps: 64,
            session_id: 1,
            seed: 1,
            ot_group: OtGroup::Secure,
        }
    }
}

/// Quantizes, certifies, shares, and deals. Fails rather than provisioning
/// a configuration whose ring arithmetic could overflow: the preactivation
/// and cross-difference bounds must fit Z_q always, and the pairwise bound
/// additionally in paper-exact circuit mode.
pub fn offline_setup(
    net: &RealNetwork,
    dom: &StateDomain,
    s1: f64,
    s2: f64,
    l: u8,
    opts: &SetupOptions,
) -> Result<(PartyBundle, PartyBundle, Certificate)> {
    let eta = eta_for(net, dom, s1, s2);
    let qcfg = QuantizationConfig::new(s1, s2, l, eta, net.n())?;
    let netq = quantize_network(net, &qcfg)?;
    let cert =
        certify_no_overflow(&netq, dom, &qcfg).map_err(|v| Error::Uncertified(v.to_string()))?;
    if !cert.cross_fit {
        return Err(Error::Uncertified(format!(
            "cross differences v_i - w_j may leave Z_q (margin {})",
            cert.cross_margin
        )));
    }
    if opts.mode == CircuitMode::PaperExact && !cert.pairwise_fit {
        return Err(Error::Uncertified(format!(
            "pairwise differences may leave Z_q (margin {}); \
             paper_exact sign bits would be wrong — use safe_sign",
            cert.pairwise_margin
        )));
    }

    let cfg = SessionConfig {
        session_id: opts.session_id,
        seed: opts.seed,
        l,
        p: net.p(),
        n: net.n(),
        s1,
        s2,
        s3: qcfg.s3,
        eta,
        mode: opts.mode,
        ot_group: opts.ot_group,
        domain: dom.half_widths.clone(),
        steps: opts.steps,
    };

    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let (p, n) = (net.p(), net.n());
    let flat = |m: &[Vec<i64>]| -> Vec<i64> { m.iter().flatten().copied().collect() };
    let (kq1, kq2) = share_matrix(&flat(&netq.kq), p, n, l, &mut rng)?;
    let (lq1, lq2) = share_matrix(&flat(&netq.lq), p, n, l, &mut rng)?;
    let (b1, b2) = share_matrix(&netq.bq, p, 1, l, &mut rng)?;
    let (c1, c2) = share_matrix(&netq.cq, p, 1, l, &mut rng)?;
    let (tv1, tv2) = deal_triples(p, n, l, opts.steps, 1, &mut rng);
    let (tw1, tw2) = deal_triples(p, n, l, opts.steps, 1 + opts.steps as u64, &mut rng);

    let bundle = |party, kq, lq, beta, gamma, tv, tw| PartyBundle {
        cfg: cfg.clone(),
        party,
        kq,
        lq,
        beta,
        gamma,
        triples_v: tv,
        triples_w: tw,
    };
    Ok((
        bundle(PartyIndex::P1, kq1, lq1, b1, c1, tv1, tw1),
        bundle(PartyIndex::P2, kq2, lq2, b2, c2, tv2, tw2),
        cert,
    ))
}

const BUNDLE_MAGIC: &[u8; 4] = b"MXBD";
const BUNDLE_VERSION: u16 = 1;

fn push_section(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

fn read_section<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    let short = || Error::FileFormat("bundle truncated".into());
    if bytes.len() < *pos + 4 {
        return Err(short());
    }
    let len = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap()) as usize;
    *pos += 4;
    if bytes.len() < *pos + len {
        return Err(short());
    }
    let out = &bytes[*pos..*pos + len];
    *pos += len;
    Ok(out)
}

pub fn encode_bundle(b: &PartyBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BUNDLE_MAGIC);
    out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    out.push(b.party.as_u8());
    for m in [&b.kq, &b.lq, &b.beta, &b.gamma] {
        push_section(&mut out, &share_file::encode(m));
    }
    for triples in [&b.triples_v, &b.triples_w] {
        out.extend_from_slice(&(triples.len() as u32).to_le_bytes());
        for t in triples {
            out.extend_from_slice(&t.id.to_le_bytes());
            for m in [&t.a, &t.b, &t.c] {
                push_section(&mut out, &share_file::encode(m));
            }
        }
    }
    out
}

pub fn decode_bundle(cfg: &SessionConfig, bytes: &[u8]) -> Result<PartyBundle> {
    if bytes.len() < 7 || &bytes[..4] != BUNDLE_MAGIC {
        return Err(Error::FileFormat("bad bundle magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != BUNDLE_VERSION {
        return Err(Error::FileFormat(format!(
            "unsupported bundle version {version}"
        )));
    }
    let party = PartyIndex::from_u8(bytes[6])?;
    let mut pos = 7;
    let mut mats = Vec::with_capacity(4);
    for _ in 0..4 {
        mats.push(share_file::decode(read_section(bytes, &mut pos)?)?);
    }
    let gamma = mats.pop().unwrap();
    let beta = mats.pop().unwrap();
    let lq = mats.pop().unwrap();
    let kq = mats.pop().unwrap();
    let read_triples = |pos: &mut usize| -> Result<Vec<BeaverTripleMatrix>> {
        if bytes.len() < *pos + 4 {
            return Err(Error::FileFormat("bundle truncated".into()));
        }
        let count = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap()) as usize;
        *pos += 4;
        let mut triples = Vec::with_capacity(count);
        for _ in 0..count {
            if bytes.len() < *pos + 8 {
                return Err(Error::FileFormat("bundle truncated".into()));
            }
            let id = u64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
            *pos += 8;
            let a = share_file::decode(read_section(bytes, pos)?)?;
            let b = share_file::decode(read_section(bytes, pos)?)?;
            let c = share_file::decode(read_section(bytes, pos)?)?;
            triples.push(BeaverTripleMatrix::new(id, a, b, c)?);
        }
        Ok(triples)
    };
    let triples_v = read_triples(&mut pos)?;
    let triples_w = read_triples(&mut pos)?;
    if pos != bytes.len() {
        return Err(Error::FileFormat("trailing bytes in bundle".into()));
    }
    Ok(PartyBundle {
        cfg: cfg.clone(),
        party,
        kq,
        lq,
        beta,
        gamma,
        triples_v,
        triples_w,
    })
}

/// Writes `session.json`, `party1.bin`, `party2.bin` into `dir`.
pub fn save_bundles(dir: &Path, b1: &PartyBundle, b2: &PartyBundle) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("session.json"),
        serde_json::to_string_pretty(&b1.cfg)?,
    )?;
    fs::write(dir.join("party1.bin"), encode_bundle(b1))?;
    fs::write(dir.join("party2.bin"), encode_bundle(b2))?;
    Ok(())
}

pub fn load_bundle(dir: &Path, party: PartyIndex) -> Result<PartyBundle> {
    let cfg: SessionConfig = serde_json::from_str(&fs::read_to_string(dir.join("session.json"))?)?;
    let name = match party {
        PartyIndex::P1 => "party1.bin",
        PartyIndex::P2 => "party2.bin",
    };
    let bundle = decode_bundle(&cfg, &fs::read(dir.join(name))?)?;
    if bundle.party != party {
        return Err(Error::FileFormat(format!(
            "bundle file {name} holds shares for the other party"
        )));
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{fixture_paper_p8, fixture_saturated_feedback, SATURATED_FIXTURE_GAIN};
    use crate::quantize::StateDomain;
    use crate::shares::reconstruct_matrix;

    fn saturated_net() -> RealNetwork {
        fixture_saturated_feedback(SATURATED_FIXTURE_GAIN).network
    }

    fn dom() -> StateDomain {
        StateDomain::new(vec![25.0, 5.0]).unwrap()
    }

    fn opts() -> SetupOptions {
        SetupOptions {
            steps: 3,
            ..Default::default()
        }
    }

    #[test]
    fn bundles_recombine_to_quantized_network() {
        let net = saturated_net();
        let (b1, b2, cert) = offline_setup(&net, &dom(), 20.0, 100.0, 16, &opts()).unwrap();
        assert!(cert.pairwise_fit && cert.cross_fit);
        let qcfg = b1.cfg.quantization();
        let netq = quantize_network(&net, &qcfg).unwrap();
        let flat: Vec<i64> = netq.kq.iter().flatten().copied().collect();
        assert_eq!(reconstruct_matrix(&b1.kq, &b2.kq).unwrap(), flat);
        assert_eq!(reconstruct_matrix(&b1.beta, &b2.beta).unwrap(), netq.bq);
        assert_eq!(reconstruct_matrix(&b1.gamma, &b2.gamma).unwrap(), netq.cq);
        assert_eq!(b1.triples_v.len(), 3);
        // triple ids are unique across both branches
        let mut ids: Vec<u64> = b1
            .triples_v
            .iter()
            .chain(&b1.triples_w)
            .map(|t| t.id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn different_seeds_give_different_shares_same_secret() {
        let net = saturated_net();
        let (a1, a2, _) = offline_setup(&net, &dom(), 20.0, 100.0, 16, &opts()).unwrap();
        let mut o2 = opts();
        o2.seed = 99;
        let (b1, b2, _) = offline_setup(&net, &dom(), 20.0, 100.0, 16, &o2).unwrap();
        assert_ne!(a1.kq.data, b1.kq.data);
        assert_eq!(
            reconstruct_matrix(&a1.kq, &a2.kq).unwrap(),
            reconstruct_matrix(&b1.kq, &b2.kq).unwrap()
        );
    }

    #[test]
    fn share_entries_pass_uniformity_smell_test() {
        // chi-square at l = 8 over many dealt entries
        let net = saturated_net();
        let small_dom = StateDomain::new(vec![5.0, 2.0]).unwrap();
        let mut o = opts();
        o.steps = 60;
        let (b1, _, _) = offline_setup(&net, &small_dom, 2.0, 4.0, 8, &o).unwrap();
        let mut counts = [0usize; 256];
        let mut total = 0usize;
        for t in b1.triples_v.iter().chain(&b1.triples_w) {
            for m in [&t.a, &t.b, &t.c] {
                for &v in &m.data {
                    counts[v as usize] += 1;
                    total += 1;
                }
            }
        }
        let expected = total as f64 / 256.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // df = 255, alpha = 0.001
        assert!(chi2 < 327.0, "chi2 = {chi2} over {total} entries");
    }

    #[test]
    fn paper_exact_requires_pairwise_certificate() {
        // the p = 8 fixture violates the pairwise bound at l = 16 over the
        // full box, so paper-exact provisioning must refuse
        let net = fixture_paper_p8().network;
        let err = offline_setup(&net, &dom(), 20.0, 100.0, 16, &opts()).unwrap_err();
        assert!(matches!(err, Error::Uncertified(_)), "{err}");
        let mut o = opts();
        o.mode = CircuitMode::SafeSign;
        offline_setup(&net, &dom(), 20.0, 100.0, 16, &o).unwrap();
    }

    #[test]
    fn oversized_scaling_is_rejected() {
        let net = saturated_net();
        // preactivations would reach ~150000 over the box, far past 2^15
        let err = offline_setup(&net, &dom(), 100.0, 100.0, 16, &opts()).unwrap_err();
        assert!(matches!(err, Error::Uncertified(_)), "{err}");
        // even larger factors already overflow single weight entries
        assert!(offline_setup(&net, &dom(), 2000.0, 10000.0, 16, &opts()).is_err());
    }

    #[test]
    fn bundle_files_round_trip() {
        let net = saturated_net();
        let (b1, b2, _) = offline_setup(&net, &dom(), 20.0, 100.0, 16, &opts()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundles(dir.path(), &b1, &b2).unwrap();
        for (party, orig) in [(PartyIndex::P1, &b1), (PartyIndex::P2, &b2)] {
            let loaded = load_bundle(dir.path(), party).unwrap();
            assert_eq!(loaded.cfg, orig.cfg);
            assert_eq!(loaded.kq, orig.kq);
            assert_eq!(loaded.gamma, orig.gamma);
            assert_eq!(loaded.triples_w.len(), orig.triples_w.len());
            assert_eq!(loaded.triples_w[2].c, orig.triples_w[2].c);
        }
        // swapped file content is caught
        std::fs::copy(dir.path().join("party2.bin"), dir.path().join("party1.bin")).unwrap();
        assert!(load_bundle(dir.path(), PartyIndex::P1).is_err());
    }
}
