//! End-to-end verification session driver: after oblivious selection, the
//! user inputs the masked design and compiled property, the vendor inputs
//! its session masks, the design is demasked inside the backend (XOR only,
//! zero AND gates), property columns are appended, and the solver verdict is
//! revealed to both parties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, SharedBackend, TripleSource};
use crate::ir::SemanticMap;
use crate::portfolio::{
    fetch_selection, serve_selection, MaskPair, MaskedPortfolio, PortfolioError, PortfolioPublic,
    SelectedDesign,
};
use crate::property::{compile_property, CompiledProperty, PropertyError, PropertySpec};
use crate::solver::{
    share_heuristic, solve, GiantStepStats, Heuristic, SharedMatrix, SolverError, Verdict,
};
use crate::transport::{FrameChannel, FrameType, Role, SessionId, TransportError};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("bad session config: {0}")]
    BadConfig(String),
    #[error("mask dimensions {mask_rows}x{mask_cols} do not match portfolio {n_max}x{m_max}")]
    MaskMismatch {
        mask_rows: usize,
        mask_cols: usize,
        n_max: u32,
        m_max: u32,
    },
    #[error("parties disagree on the verdict: ours {ours}, peer {theirs}")]
    VerdictMismatch { ours: String, theirs: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Dlis,
    Ctrl,
}

/// Public session parameters the user announces after the handshake; both
/// parties must run the identically-shaped computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerificationParams {
    pub heuristic: HeuristicKind,
    pub step_limit: u64,
    pub property_cols: u32,
    pub aux_vars: u32,
    pub insecure_test_ot: bool,
}

impl VerificationParams {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18);
        out.extend_from_slice(&self.step_limit.to_le_bytes());
        out.push(match self.heuristic {
            HeuristicKind::Dlis => 0,
            HeuristicKind::Ctrl => 1,
        });
        out.extend_from_slice(&self.property_cols.to_le_bytes());
        out.extend_from_slice(&self.aux_vars.to_le_bytes());
        out.push(self.insecure_test_ot as u8);
        out
    }

    fn decode(payload: &[u8]) -> Result<Self, SessionError> {
        if payload.len() != 18 {
            return Err(SessionError::BadConfig("bad parameter frame".into()));
        }
        Ok(VerificationParams {
            step_limit: u64::from_le_bytes(payload[0..8].try_into().unwrap()),
            heuristic: match payload[8] {
                0 => HeuristicKind::Dlis,
                1 => HeuristicKind::Ctrl,
                other => {
                    return Err(SessionError::BadConfig(format!(
                        "unknown heuristic {other}"
                    )))
                }
            },
            property_cols: u32::from_le_bytes(payload[9..13].try_into().unwrap()),
            aux_vars: u32::from_le_bytes(payload[13..17].try_into().unwrap()),
            insecure_test_ot: payload[17] != 0,
        })
    }
}

fn encode_public(public: &PortfolioPublic) -> Vec<u8> {
    let mut out = Vec::with_capacity(20);
    for v in [
        public.count,
        public.n_max,
        public.m_max,
        public.bound,
        public.h_max,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_public(payload: &[u8]) -> Result<PortfolioPublic, SessionError> {
    if payload.len() != 20 {
        return Err(SessionError::BadConfig("bad portfolio header frame".into()));
    }
    let field = |k: usize| u32::from_le_bytes(payload[4 * k..4 * k + 4].try_into().unwrap());
    Ok(PortfolioPublic {
        count: field(0),
        n_max: field(1),
        m_max: field(2),
        bound: field(3),
        h_max: field(4),
    })
}

/// Outcome of one verification session.
#[derive(Clone, Debug)]
pub struct SessionReport {
    pub verdict: Verdict,
    pub stats: GiantStepStats,
    /// AND gates consumed by demasking and instance assembly; the demask is
    /// XOR-only so this is zero.
    pub demask_and_gates: u64,
    pub public: PortfolioPublic,
    /// The selected design's id; absent on the vendor side, which must not
    /// learn the selection.
    pub design_id: Option<[u8; 32]>,
}

/// Joint 2PC phase run identically by both parties once the user holds the
/// masked design. `selected`/`property` are the user's secrets, `masks` the
/// vendor's.
#[allow(clippy::too_many_arguments)]
fn joint_solve<C: FrameChannel>(
    backend: &mut SharedBackend<C>,
    public: &PortfolioPublic,
    params: &VerificationParams,
    selected: Option<&SelectedDesign>,
    property: Option<&CompiledProperty>,
    masks: Option<&MaskPair>,
) -> Result<(Verdict, GiantStepStats, u64), SessionError> {
    let n_max = public.n_max as usize;
    let m_max = public.m_max as usize;
    let n_total = n_max + params.aux_vars as usize;
    let m_prop = params.property_cols as usize;

    let demask_start = backend.stats().and_count;
    // User inputs the masked design, vendor inputs the session masks.
    let masked_pos = SharedMatrix::share(
        backend,
        Role::User,
        selected.map(|s| &s.masked_pos),
        n_max,
        m_max,
    )?;
    let masked_neg = SharedMatrix::share(
        backend,
        Role::User,
        selected.map(|s| &s.masked_neg),
        n_max,
        m_max,
    )?;
    let mask_pos =
        SharedMatrix::share(backend, Role::Vendor, masks.map(|m| &m.r_pos), n_max, m_max)?;
    let mask_neg =
        SharedMatrix::share(backend, Role::Vendor, masks.map(|m| &m.r_neg), n_max, m_max)?;
    // Demask: XOR only.
    let design_pos = masked_pos.xor(backend, &mask_pos)?;
    let design_neg = masked_neg.xor(backend, &mask_neg)?;

    // Property columns, expressed over design literals plus auxiliaries.
    let prop_matrices = property.map(|p| crate::formula::encode_cnf(&p.cnf));
    let prop_pos = SharedMatrix::share(
        backend,
        Role::User,
        prop_matrices.as_ref().map(|m| m.pos()),
        n_total,
        m_prop,
    )?;
    let prop_neg = SharedMatrix::share(
        backend,
        Role::User,
        prop_matrices.as_ref().map(|m| m.neg()),
        n_total,
        m_prop,
    )?;
    let full_pos = design_pos.append_columns(backend, &prop_pos);
    let full_neg = design_neg.append_columns(backend, &prop_neg);
    let demask_and_gates = backend.stats().and_count - demask_start;

    let heuristic = match params.heuristic {
        HeuristicKind::Dlis => Heuristic::Dlis,
        HeuristicKind::Ctrl => {
            let shared = share_heuristic(
                backend,
                Role::User,
                selected.map(|s| &s.heuristic),
                public.h_max as usize,
                n_total,
            )?;
            Heuristic::Ctrl(shared)
        }
    };

    let (verdict, stats) = solve(backend, &full_pos, &full_neg, &heuristic, params.step_limit)?;

    // Cross-check the revealed verdict; the vendor announces first.
    let ours = verdict.as_str().as_bytes().to_vec();
    let theirs = match backend.role() {
        Role::Vendor => {
            backend
                .channel_mut()
                .send_frame(FrameType::Verdict, &ours)?;
            backend.channel_mut().expect_frame(FrameType::Verdict)?
        }
        Role::User => {
            let theirs = backend.channel_mut().expect_frame(FrameType::Verdict)?;
            backend
                .channel_mut()
                .send_frame(FrameType::Verdict, &ours)?;
            theirs
        }
    };
    if theirs != ours {
        return Err(SessionError::VerdictMismatch {
            ours: String::from_utf8_lossy(&ours).into_owned(),
            theirs: String::from_utf8_lossy(&theirs).into_owned(),
        });
    }
    Ok((verdict, stats, demask_and_gates))
}

/// Vendor side: serve the portfolio over OT, then co-run the verification.
pub fn vendor_session<C: FrameChannel>(
    mut channel: C,
    session_id: SessionId,
    portfolio: &MaskedPortfolio,
    masks: &MaskPair,
    triples: TripleSource,
    seed: [u8; 32],
) -> Result<SessionReport, SessionError> {
    if masks.r_pos.rows() != portfolio.public.n_max as usize
        || masks.r_pos.cols() != portfolio.public.m_max as usize
    {
        let reason = SessionError::MaskMismatch {
            mask_rows: masks.r_pos.rows(),
            mask_cols: masks.r_pos.cols(),
            n_max: portfolio.public.n_max,
            m_max: portfolio.public.m_max,
        };
        let _ = channel.send_abort(&reason.to_string());
        return Err(reason);
    }
    channel.send_frame(FrameType::Handshake, &encode_public(&portfolio.public))?;
    let params = VerificationParams::decode(&channel.expect_frame(FrameType::Handshake)?)?;

    let mut rng = ChaCha20Rng::from_seed(seed);
    serve_selection(
        &mut channel,
        portfolio,
        &session_id,
        params.insecure_test_ot,
        &mut rng,
    )?;

    let mut backend = SharedBackend::new(channel, Role::Vendor, rng.gen(), triples);
    let (verdict, stats, demask_and_gates) = joint_solve(
        &mut backend,
        &portfolio.public,
        &params,
        None,
        None,
        Some(masks),
    )?;
    Ok(SessionReport {
        verdict,
        stats,
        demask_and_gates,
        public: portfolio.public,
        design_id: None,
    })
}

/// User side: select a design obliviously, compile the property against the
/// announced dimensions, and co-run the verification.
#[allow(clippy::too_many_arguments)]
pub fn user_session<C: FrameChannel>(
    mut channel: C,
    session_id: SessionId,
    selection: u32,
    property: &PropertySpec,
    map: &SemanticMap,
    heuristic: HeuristicKind,
    step_limit: u64,
    insecure_test_ot: bool,
    triples: TripleSource,
    seed: [u8; 32],
) -> Result<SessionReport, SessionError> {
    let public = decode_public(&channel.expect_frame(FrameType::Handshake)?)?;
    let aux_base = public.n_max + 1;
    let compiled = compile_property(property, map, aux_base, public.bound)?;
    let prop_cnf_cols = compiled.cnf.num_clauses() as u32;
    let params = VerificationParams {
        heuristic,
        step_limit,
        property_cols: prop_cnf_cols,
        aux_vars: compiled.num_aux,
        insecure_test_ot,
    };
    channel.send_frame(FrameType::Handshake, &params.encode())?;

    let mut rng = ChaCha20Rng::from_seed(seed);
    let selected = fetch_selection(
        &mut channel,
        &public,
        &session_id,
        selection,
        insecure_test_ot,
        &mut rng,
    )?;

    let mut backend = SharedBackend::new(channel, Role::User, rng.gen(), triples);
    let (verdict, stats, demask_and_gates) = joint_solve(
        &mut backend,
        &public,
        &params,
        Some(&selected),
        Some(&compiled),
        None,
    )?;
    Ok(SessionReport {
        verdict,
        stats,
        demask_and_gates,
        public,
        design_id: Some(selected.design_id),
    })
}

/// Session configuration file: role, endpoint, artifact paths, and solve
/// options. Command-line flags override individual fields.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SessionConfig {
    pub role: Option<String>,
    pub endpoint: Option<String>,
    #[serde(default)]
    pub portfolio: Option<String>,
    #[serde(default)]
    pub mask: Option<String>,
    #[serde(default)]
    pub selection: Option<u32>,
    #[serde(default)]
    pub property: Option<String>,
    #[serde(default)]
    pub map: Option<String>,
    #[serde(default)]
    pub heuristic: Option<String>,
    #[serde(default)]
    pub step_limit: Option<u64>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub triples: Option<String>,
    #[serde(default)]
    pub insecure_test_ot: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SessionConfig {
    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        serde_json::from_str(text).map_err(|e| SessionError::BadConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::TripleSource;
    use crate::formula::{encode_cnf, parse_dimacs};
    use crate::ir::HeuristicSet;
    use crate::portfolio::{build_portfolio, DesignEntry};
    use crate::property::{PropertyKind, TemporalOp};
    use crate::transport::{DuplexChannel, FrameChannel, Role};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    /// A tiny portfolio whose design 1 conjoined with the test property is
    /// satisfiable and design 2 is not.
    fn fixture() -> (MaskedPortfolio, MaskPair, SemanticMap) {
        // Design over variables 1..3; variable 1 plays "flag#1".
        let d1 = encode_cnf(&parse_dimacs("p cnf 3 2\n1 2 0\n-2 3 0\n").unwrap());
        let d2 = encode_cnf(&parse_dimacs("p cnf 3 2\n-1 2 0\n-1 -2 0\n").unwrap());
        let designs = vec![
            DesignEntry {
                design_id: [1; 32],
                matrix: d1,
                heuristic: HeuristicSet(vec![1]),
                description: "d1".into(),
            },
            DesignEntry {
                design_id: [2; 32],
                matrix: d2,
                heuristic: HeuristicSet(vec![1]),
                description: "d2".into(),
            },
        ];
        let mut rng = StdRng::seed_from_u64(77);
        let (portfolio, masks) = build_portfolio(&designs, 2, &mut rng).unwrap();
        let mut map = SemanticMap::new();
        map.insert("flag#1".into(), 1);
        map.insert("flag#2".into(), 2);
        (portfolio, masks, map)
    }

    /// Cover "flag at frame 1 and again at frame 2": units (1) and (2).
    fn cover_flag_property() -> PropertySpec {
        PropertySpec {
            kind: PropertyKind::Cover,
            op: TemporalOp::Concat(1),
            frame: 1,
            lhs: crate::ir::sexpr::parse_expr("flag").unwrap(),
            rhs: crate::ir::sexpr::parse_expr("flag").unwrap(),
        }
    }

    fn run_session(selection: u32, heuristic: HeuristicKind) -> (SessionReport, SessionReport) {
        let (portfolio, masks, map) = fixture();
        let (ca, cb) = DuplexChannel::pair();
        let sid = [9u8; 16];
        let dealer_seed = [5u8; 32];
        let vendor = std::thread::spawn(move || {
            vendor_session(
                ca,
                sid,
                &portfolio,
                &masks,
                TripleSource::dealer(dealer_seed, Role::Vendor),
                [1u8; 32],
            )
            .unwrap()
        });
        let property = cover_flag_property();
        let user = user_session(
            cb,
            sid,
            selection,
            &property,
            &map,
            heuristic,
            1000,
            false,
            TripleSource::dealer(dealer_seed, Role::User),
            [2u8; 32],
        )
        .unwrap();
        (vendor.join().unwrap(), user)
    }

    #[test]
    fn both_parties_reveal_the_same_verdict() {
        let (vendor, user) = run_session(1, HeuristicKind::Dlis);
        assert_eq!(vendor.verdict, Verdict::Sat);
        assert_eq!(user.verdict, Verdict::Sat);
        assert_eq!(vendor.stats.giant_steps, user.stats.giant_steps);
        assert_eq!(user.design_id, Some([1; 32]));
        assert_eq!(vendor.design_id, None);
    }

    #[test]
    fn demask_costs_zero_and_gates() {
        let (vendor, user) = run_session(2, HeuristicKind::Ctrl);
        assert_eq!(vendor.demask_and_gates, 0);
        assert_eq!(user.demask_and_gates, 0);
        // Design 2 forces variable 1 false; covering flag=1 is unsatisfiable.
        assert_eq!(user.verdict, Verdict::Unsat);
    }

    #[test]
    fn mask_dimension_mismatch_aborts_before_any_share() {
        let (portfolio, masks, _) = fixture();
        let bad_masks = MaskPair {
            r_pos: crate::formula::BitMatrix::zeros(1, 1),
            r_neg: crate::formula::BitMatrix::zeros(1, 1),
            session_id: masks.session_id,
        };
        let (ca, mut cb) = DuplexChannel::pair();
        let res = vendor_session(
            ca,
            [9u8; 16],
            &portfolio,
            &bad_masks,
            TripleSource::dealer([5u8; 32], Role::Vendor),
            [1u8; 32],
        );
        assert!(matches!(res, Err(SessionError::MaskMismatch { .. })));
        // The peer sees an abort, not a protocol frame.
        let (ty, _) = cb.recv_frame().unwrap();
        assert_eq!(ty, crate::transport::FrameType::Abort);
    }

    #[test]
    fn session_config_round_trip() {
        let config = SessionConfig {
            role: Some("user".into()),
            endpoint: Some("127.0.0.1:7001".into()),
            selection: Some(3),
            heuristic: Some("ctrl".into()),
            step_limit: Some(20_000),
            backend: Some("shared".into()),
            ..Default::default()
        };
        let back = SessionConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(back.selection, Some(3));
        assert_eq!(back.heuristic.as_deref(), Some("ctrl"));
    }
}
