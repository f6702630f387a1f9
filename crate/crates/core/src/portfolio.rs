//! Vendor-side portfolio construction and user-side oblivious selection.
//!
//! Every design is padded to the portfolio-wide dimensions (extra variable
//! rows are zero; extra clause columns are tautology columns on one reserved
//! padding variable, so padding never introduces an empty clause), then
//! XOR-masked with one mask pair sampled fresh per verification session.
//! Matrices and the per-design heuristic set travel in a single OT payload.

use std::io::{self, Read, Write};

use rand::{CryptoRng, Rng};
use thiserror::Error;

use crate::formula::{BitMatrix, ClauseMatrix, FormulaError};
use crate::ir::{DesignId, HeuristicSet};
use crate::ot::{self, OtError, OtMessageVector};
use crate::transport::{FrameChannel, SessionId};

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("portfolio needs at least one design")]
    Empty,
    #[error("design {0} is already padded")]
    AlreadyPadded(usize),
    #[error("selection index {index} out of range 1..={count}")]
    IndexOutOfRange { index: u32, count: u32 },
    #[error("portfolio file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One design offered for licensing: its matrix encoding, decision
/// heuristic, and public description.
#[derive(Clone, Debug)]
pub struct DesignEntry {
    pub design_id: DesignId,
    pub matrix: ClauseMatrix,
    pub heuristic: HeuristicSet,
    pub description: String,
}

/// The vendor's session masks. Sampled fresh for every verification session
/// and never reused: stale masks would let colluding users cancel them
/// across sessions.
#[derive(Clone)]
pub struct MaskPair {
    pub r_pos: BitMatrix,
    pub r_neg: BitMatrix,
    pub session_id: SessionId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortfolioEntry {
    pub design_id: DesignId,
    pub masked_pos: BitMatrix,
    pub masked_neg: BitMatrix,
    /// Padded to `h_max` entries with sentinel literal 0.
    pub heuristic: Vec<u32>,
    /// Pre-padding variable count, delivered only inside the OT payload.
    pub orig_vars: u32,
    pub padding_cols: u32,
}

/// Public parameters of a portfolio; everything per-design stays masked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PortfolioPublic {
    pub count: u32,
    pub n_max: u32,
    pub m_max: u32,
    pub bound: u32,
    pub h_max: u32,
}

#[derive(Clone)]
pub struct MaskedPortfolio {
    pub entries: Vec<PortfolioEntry>,
    pub public: PortfolioPublic,
    pub descriptions: Vec<String>,
}

/// What the user walks away with after oblivious selection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectedDesign {
    pub design_id: DesignId,
    pub masked_pos: BitMatrix,
    pub masked_neg: BitMatrix,
    pub heuristic: HeuristicSet,
    pub orig_vars: u32,
    pub padding_cols: u32,
}

/// Pads a design to `(n_max, m_max)`: zero rows, then tautology columns on
/// the reserved padding row.
pub fn pad_design(mat: &ClauseMatrix, n_max: u32, m_max: u32) -> ClauseMatrix {
    let padding_cols = m_max - mat.num_clauses();
    let mut pos = BitMatrix::zeros(n_max as usize, m_max as usize);
    let mut neg = BitMatrix::zeros(n_max as usize, m_max as usize);
    for i in 0..mat.num_variables() as usize {
        for j in 0..mat.num_clauses() as usize {
            pos.set(i, j, mat.pos().get(i, j));
            neg.set(i, j, mat.neg().get(i, j));
        }
    }
    for j in mat.num_clauses() as usize..m_max as usize {
        pos.set(n_max as usize - 1, j, true);
        neg.set(n_max as usize - 1, j, true);
    }
    ClauseMatrix::from_parts(n_max, m_max, pos, neg, padding_cols).expect("consistent shape")
}

/// Inverse of `pad_design` given the original dimensions.
pub fn strip_padding(
    mat: &ClauseMatrix,
    orig_vars: u32,
    padding_cols: u32,
) -> Result<ClauseMatrix, PortfolioError> {
    if orig_vars > mat.num_variables() || padding_cols > mat.num_clauses() {
        return Err(PortfolioError::BadFile(
            "strip dimensions exceed matrix".into(),
        ));
    }
    let m = mat.num_clauses() - padding_cols;
    let mut pos = BitMatrix::zeros(orig_vars as usize, m as usize);
    let mut neg = BitMatrix::zeros(orig_vars as usize, m as usize);
    for i in 0..orig_vars as usize {
        for j in 0..m as usize {
            pos.set(i, j, mat.pos().get(i, j));
            neg.set(i, j, mat.neg().get(i, j));
        }
    }
    Ok(ClauseMatrix::from_parts(orig_vars, m, pos, neg, 0)?)
}

/// Plaintext demask (vendor-side tooling and tests); the in-protocol demask
/// happens on shares inside the secure backend.
pub fn demask(
    masked_pos: &BitMatrix,
    masked_neg: &BitMatrix,
    masks: &MaskPair,
) -> (BitMatrix, BitMatrix) {
    (masked_pos.xor(&masks.r_pos), masked_neg.xor(&masks.r_neg))
}

/// Builds a masked portfolio with one fresh mask pair.
pub fn build_portfolio<R: Rng + CryptoRng>(
    designs: &[DesignEntry],
    bound: u32,
    rng: &mut R,
) -> Result<(MaskedPortfolio, MaskPair), PortfolioError> {
    if designs.is_empty() {
        return Err(PortfolioError::Empty);
    }
    for (k, d) in designs.iter().enumerate() {
        if d.matrix.padding_cols() != 0 {
            return Err(PortfolioError::AlreadyPadded(k));
        }
    }
    let m_max = designs
        .iter()
        .map(|d| d.matrix.num_clauses())
        .max()
        .unwrap();
    let needs_pad_row = designs.iter().any(|d| d.matrix.num_clauses() < m_max);
    let n_max = designs
        .iter()
        .map(|d| d.matrix.num_variables())
        .max()
        .unwrap()
        + u32::from(needs_pad_row);
    let h_max = designs.iter().map(|d| d.heuristic.len()).max().unwrap() as u32;

    let mut session_id = [0u8; 16];
    rng.fill_bytes(&mut session_id);
    let masks = MaskPair {
        r_pos: BitMatrix::random(n_max as usize, m_max as usize, rng),
        r_neg: BitMatrix::random(n_max as usize, m_max as usize, rng),
        session_id,
    };

    let mut entries = Vec::with_capacity(designs.len());
    for d in designs {
        let padded = pad_design(&d.matrix, n_max, m_max);
        let mut heuristic = d.heuristic.literals().to_vec();
        heuristic.resize(h_max as usize, 0);
        entries.push(PortfolioEntry {
            design_id: d.design_id,
            masked_pos: padded.pos().xor(&masks.r_pos),
            masked_neg: padded.neg().xor(&masks.r_neg),
            heuristic,
            orig_vars: d.matrix.num_variables(),
            padding_cols: padded.padding_cols(),
        });
    }
    let portfolio = MaskedPortfolio {
        entries,
        public: PortfolioPublic {
            count: designs.len() as u32,
            n_max,
            m_max,
            bound,
            h_max,
        },
        descriptions: designs.iter().map(|d| d.description.clone()).collect(),
    };
    Ok((portfolio, masks))
}

fn payload_len(public: &PortfolioPublic) -> usize {
    let row_bytes = (public.m_max as usize).div_ceil(8);
    32 + 4 + 4 + public.h_max as usize * 4 + 2 * public.n_max as usize * row_bytes
}

fn encode_payload(entry: &PortfolioEntry, public: &PortfolioPublic) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload_len(public));
    out.extend_from_slice(&entry.design_id);
    out.extend_from_slice(&entry.orig_vars.to_le_bytes());
    out.extend_from_slice(&entry.padding_cols.to_le_bytes());
    for &lit in &entry.heuristic {
        out.extend_from_slice(&lit.to_le_bytes());
    }
    entry.masked_pos.write_rows(&mut out).expect("vec write");
    entry.masked_neg.write_rows(&mut out).expect("vec write");
    debug_assert_eq!(out.len(), payload_len(public));
    out
}

fn decode_payload(
    bytes: &[u8],
    public: &PortfolioPublic,
) -> Result<SelectedDesign, PortfolioError> {
    if bytes.len() != payload_len(public) {
        return Err(PortfolioError::BadFile(format!(
            "selection payload is {} bytes, expected {}",
            bytes.len(),
            payload_len(public)
        )));
    }
    let mut cursor = bytes;
    let mut design_id = [0u8; 32];
    cursor.read_exact(&mut design_id)?;
    let mut buf4 = [0u8; 4];
    cursor.read_exact(&mut buf4)?;
    let orig_vars = u32::from_le_bytes(buf4);
    cursor.read_exact(&mut buf4)?;
    let padding_cols = u32::from_le_bytes(buf4);
    let mut heuristic = Vec::with_capacity(public.h_max as usize);
    for _ in 0..public.h_max {
        cursor.read_exact(&mut buf4)?;
        heuristic.push(u32::from_le_bytes(buf4));
    }
    while heuristic.last() == Some(&0) {
        heuristic.pop();
    }
    let masked_pos =
        BitMatrix::read_rows(public.n_max as usize, public.m_max as usize, &mut cursor)?;
    let masked_neg =
        BitMatrix::read_rows(public.n_max as usize, public.m_max as usize, &mut cursor)?;
    Ok(SelectedDesign {
        design_id,
        masked_pos,
        masked_neg,
        heuristic: HeuristicSet(heuristic),
        orig_vars,
        padding_cols,
    })
}

/// Vendor side of oblivious selection: serves all designs through one
/// 1-of-N transfer, padded with dummy messages to a power-of-two count.
pub fn serve_selection<C, R>(
    channel: &mut C,
    portfolio: &MaskedPortfolio,
    session_id: &SessionId,
    insecure_test_ot: bool,
    rng: &mut R,
) -> Result<(), PortfolioError>
where
    C: FrameChannel,
    R: Rng + CryptoRng,
{
    let payloads: Vec<Vec<u8>> = portfolio
        .entries
        .iter()
        .map(|e| encode_payload(e, &portfolio.public))
        .collect();
    let mut vector = OtMessageVector::new(payloads)?;
    vector.pad_to(portfolio.public.count.next_power_of_two());
    if insecure_test_ot {
        ot::insecure_test_ot::ot_send(channel, &vector)?;
    } else {
        ot::ot_send(channel, session_id, &vector, rng)?;
    }
    Ok(())
}

/// User side of oblivious selection: index `choice` is validated locally
/// and never transmitted outside the transfer.
pub fn fetch_selection<C, R>(
    channel: &mut C,
    public: &PortfolioPublic,
    session_id: &SessionId,
    choice: u32,
    insecure_test_ot: bool,
    rng: &mut R,
) -> Result<SelectedDesign, PortfolioError>
where
    C: FrameChannel,
    R: Rng + CryptoRng,
{
    if choice == 0 || choice > public.count {
        return Err(PortfolioError::IndexOutOfRange {
            index: choice,
            count: public.count,
        });
    }
    let count = public.count.next_power_of_two();
    let len = payload_len(public);
    let bytes = if insecure_test_ot {
        ot::insecure_test_ot::ot_receive(channel, count, len, choice)?
    } else {
        ot::ot_receive(channel, session_id, count, len, choice, rng)?
    };
    decode_payload(&bytes, public)
}

const BMPF_MAGIC: &[u8; 4] = b"BMPF";
const BMSK_MAGIC: &[u8; 4] = b"BMSK";
const FILE_VERSION: u16 = 1;

impl MaskedPortfolio {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), PortfolioError> {
        out.write_all(BMPF_MAGIC)?;
        out.write_all(&FILE_VERSION.to_le_bytes())?;
        out.write_all(&self.public.count.to_le_bytes())?;
        out.write_all(&self.public.n_max.to_le_bytes())?;
        out.write_all(&self.public.m_max.to_le_bytes())?;
        out.write_all(&self.public.bound.to_le_bytes())?;
        out.write_all(&self.public.h_max.to_le_bytes())?;
        for e in &self.entries {
            out.write_all(&encode_payload(e, &self.public))?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self, PortfolioError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BMPF_MAGIC {
            return Err(PortfolioError::BadFile("bad magic, expected BMPF".into()));
        }
        let mut buf2 = [0u8; 2];
        input.read_exact(&mut buf2)?;
        if u16::from_le_bytes(buf2) != FILE_VERSION {
            return Err(PortfolioError::BadFile("unsupported version".into()));
        }
        let mut buf4 = [0u8; 4];
        let mut next = || -> Result<u32, io::Error> {
            input.read_exact(&mut buf4)?;
            Ok(u32::from_le_bytes(buf4))
        };
        let count = next()?;
        let n_max = next()?;
        let m_max = next()?;
        let bound = next()?;
        let h_max = next()?;
        let public = PortfolioPublic {
            count,
            n_max,
            m_max,
            bound,
            h_max,
        };
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut payload = vec![0u8; payload_len(&public)];
            input.read_exact(&mut payload)?;
            let sel = decode_payload(&payload, &public)?;
            let mut heuristic = sel.heuristic.literals().to_vec();
            heuristic.resize(h_max as usize, 0);
            entries.push(PortfolioEntry {
                design_id: sel.design_id,
                masked_pos: sel.masked_pos,
                masked_neg: sel.masked_neg,
                heuristic,
                orig_vars: sel.orig_vars,
                padding_cols: sel.padding_cols,
            });
        }
        Ok(MaskedPortfolio {
            entries,
            public,
            descriptions: Vec::new(),
        })
    }

    pub fn write_to_file(&self, path: &std::path::Path) -> Result<(), PortfolioError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn read_from_file(path: &std::path::Path) -> Result<Self, PortfolioError> {
        let mut f = io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

impl MaskPair {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), PortfolioError> {
        out.write_all(BMSK_MAGIC)?;
        out.write_all(&FILE_VERSION.to_le_bytes())?;
        out.write_all(&(self.r_pos.rows() as u32).to_le_bytes())?;
        out.write_all(&(self.r_pos.cols() as u32).to_le_bytes())?;
        out.write_all(&self.session_id)?;
        self.r_pos.write_rows(out)?;
        self.r_neg.write_rows(out)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self, PortfolioError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BMSK_MAGIC {
            return Err(PortfolioError::BadFile("bad magic, expected BMSK".into()));
        }
        let mut buf2 = [0u8; 2];
        input.read_exact(&mut buf2)?;
        if u16::from_le_bytes(buf2) != FILE_VERSION {
            return Err(PortfolioError::BadFile("unsupported version".into()));
        }
        let mut buf4 = [0u8; 4];
        input.read_exact(&mut buf4)?;
        let rows = u32::from_le_bytes(buf4) as usize;
        input.read_exact(&mut buf4)?;
        let cols = u32::from_le_bytes(buf4) as usize;
        let mut session_id = [0u8; 16];
        input.read_exact(&mut session_id)?;
        let r_pos = BitMatrix::read_rows(rows, cols, input)?;
        let r_neg = BitMatrix::read_rows(rows, cols, input)?;
        Ok(MaskPair {
            r_pos,
            r_neg,
            session_id,
        })
    }

    pub fn write_to_file(&self, path: &std::path::Path) -> Result<(), PortfolioError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn read_from_file(path: &std::path::Path) -> Result<Self, PortfolioError> {
        let mut f = io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{encode_cnf, parse_dimacs};
    use crate::transport::DuplexChannel;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn design(k: u8, dimacs: &str, h: &[u32]) -> DesignEntry {
        DesignEntry {
            design_id: [k; 32],
            matrix: encode_cnf(&parse_dimacs(dimacs).unwrap()),
            heuristic: HeuristicSet(h.to_vec()),
            description: format!("design {k}"),
        }
    }

    fn two_designs() -> Vec<DesignEntry> {
        vec![
            design(1, "p cnf 3 3\n1 -2 0\n-1 3 0\n2 -3 0\n", &[2, 1]),
            design(2, "p cnf 2 2\n1 2 0\n-1 -2 0\n", &[1]),
        ]
    }

    #[test]
    fn pad_mask_demask_strip_round_trip() {
        let designs = two_designs();
        let mut rng = StdRng::seed_from_u64(42);
        let (portfolio, masks) = build_portfolio(&designs, 2, &mut rng).unwrap();
        assert_eq!(
            portfolio.public.n_max, 4,
            "3 variables plus the reserved padding row"
        );
        assert_eq!(portfolio.public.m_max, 3);
        for (entry, original) in portfolio.entries.iter().zip(&designs) {
            let (pos, neg) = demask(&entry.masked_pos, &entry.masked_neg, &masks);
            let padded = ClauseMatrix::from_parts(4, 3, pos, neg, entry.padding_cols).unwrap();
            let stripped = strip_padding(&padded, entry.orig_vars, entry.padding_cols).unwrap();
            assert_eq!(stripped, original.matrix);
        }
    }

    #[test]
    fn single_design_no_padding_mask_is_pure_xor() {
        let designs = vec![two_designs().remove(0)];
        let mut rng = StdRng::seed_from_u64(1);
        let (portfolio, masks) = build_portfolio(&designs, 2, &mut rng).unwrap();
        // No column padding needed, so no reserved row is added.
        assert_eq!(portfolio.public.n_max, 3);
        let entry = &portfolio.entries[0];
        assert_eq!(entry.padding_cols, 0);
        assert_eq!(entry.masked_pos.xor(&masks.r_pos), *designs[0].matrix.pos());
    }

    #[test]
    fn padding_columns_are_tautologies_on_reserved_row() {
        let designs = two_designs();
        let mut rng = StdRng::seed_from_u64(9);
        let (portfolio, masks) = build_portfolio(&designs, 2, &mut rng).unwrap();
        let entry = &portfolio.entries[1];
        assert_eq!(entry.padding_cols, 1);
        let (pos, neg) = demask(&entry.masked_pos, &entry.masked_neg, &masks);
        let pad_row = 3;
        let pad_col = 2;
        assert!(pos.get(pad_row, pad_col) && neg.get(pad_row, pad_col));
        for i in 0..3 {
            assert!(!pos.get(i, pad_col) && !neg.get(i, pad_col));
        }
    }

    #[test]
    fn mask_freshness_blocks_cross_session_cancellation() {
        let designs = two_designs();
        let mut rng = StdRng::seed_from_u64(7);
        let (s1, _) = build_portfolio(&designs, 2, &mut rng).unwrap();
        let (s2, _) = build_portfolio(&designs, 2, &mut rng).unwrap();
        // Within one session the mask cancels pairwise (inherent structure).
        let in_session = s1.entries[0].masked_pos.xor(&s1.entries[1].masked_pos);
        let plain_xor = {
            let p0 = pad_design(&designs[0].matrix, 4, 3);
            let p1 = pad_design(&designs[1].matrix, 4, 3);
            p0.pos().xor(p1.pos())
        };
        assert_eq!(in_session, plain_xor);
        // Across sessions the fresh masks do not cancel.
        let cross_session = s1.entries[0].masked_pos.xor(&s2.entries[1].masked_pos);
        assert_ne!(cross_session, plain_xor);
        assert_ne!(s1.entries[0].masked_pos, s2.entries[0].masked_pos);
    }

    fn run_selection(designs: Vec<DesignEntry>, choice: u32) -> (MaskedPortfolio, SelectedDesign) {
        let mut rng = StdRng::seed_from_u64(5);
        let (portfolio, _masks) = build_portfolio(&designs, 2, &mut rng).unwrap();
        let public = portfolio.public;
        let (mut ca, mut cb) = DuplexChannel::pair();
        let sid = [8u8; 16];
        let served = portfolio.clone();
        let vendor = std::thread::spawn(move || {
            let mut rng = StdRng::seed_from_u64(11);
            serve_selection(&mut ca, &served, &sid, false, &mut rng).unwrap();
        });
        let mut rng = StdRng::seed_from_u64(13);
        let selected = fetch_selection(&mut cb, &public, &sid, choice, false, &mut rng).unwrap();
        vendor.join().unwrap();
        (portfolio, selected)
    }

    #[test]
    fn selection_returns_vendor_bytes_exactly() {
        let (portfolio, selected) = run_selection(two_designs(), 2);
        let entry = &portfolio.entries[1];
        assert_eq!(selected.masked_pos, entry.masked_pos);
        assert_eq!(selected.masked_neg, entry.masked_neg);
        assert_eq!(selected.design_id, entry.design_id);
        assert_eq!(selected.orig_vars, 2);
        assert_eq!(selected.padding_cols, 1);
    }

    #[test]
    fn selection_of_single_design_portfolio() {
        let (portfolio, selected) = run_selection(vec![two_designs().remove(0)], 1);
        assert_eq!(selected.masked_pos, portfolio.entries[0].masked_pos);
    }

    #[test]
    fn heuristic_sets_delivered_for_every_index() {
        let designs = vec![
            design(1, "p cnf 2 1\n1 2 0\n", &[1]),
            design(2, "p cnf 2 1\n-1 2 0\n", &[2, 1]),
            design(3, "p cnf 2 1\n1 -2 0\n", &[]),
            design(4, "p cnf 2 1\n-1 -2 0\n", &[1, 2]),
        ];
        for choice in 1..=4u32 {
            let (_, selected) = run_selection(designs.clone(), choice);
            assert_eq!(
                selected.heuristic,
                designs[(choice - 1) as usize].heuristic,
                "choice {choice}"
            );
        }
    }

    #[test]
    fn out_of_range_index_is_rejected_locally() {
        let mut rng = StdRng::seed_from_u64(3);
        let (portfolio, _) = build_portfolio(&two_designs(), 2, &mut rng).unwrap();
        let (_ca, mut cb) = DuplexChannel::pair();
        let res = fetch_selection(&mut cb, &portfolio.public, &[0u8; 16], 3, false, &mut rng);
        assert!(matches!(
            res,
            Err(PortfolioError::IndexOutOfRange { index: 3, count: 2 })
        ));
    }

    #[test]
    fn portfolio_and_mask_files_round_trip() {
        let mut rng = StdRng::seed_from_u64(21);
        let (portfolio, masks) = build_portfolio(&two_designs(), 2, &mut rng).unwrap();
        let mut bytes = Vec::new();
        portfolio.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"BMPF");
        let back = MaskedPortfolio::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.public, portfolio.public);
        assert_eq!(back.entries, portfolio.entries);

        let mut mask_bytes = Vec::new();
        masks.write_to(&mut mask_bytes).unwrap();
        let masks_back = MaskPair::read_from(&mut mask_bytes.as_slice()).unwrap();
        assert_eq!(masks_back.r_pos, masks.r_pos);
        assert_eq!(masks_back.r_neg, masks.r_neg);
        assert_eq!(masks_back.session_id, masks.session_id);
    }

    #[test]
    fn empty_portfolio_rejected() {
        let mut rng = StdRng::seed_from_u64(2);
        assert!(matches!(
            build_portfolio(&[], 2, &mut rng),
            Err(PortfolioError::Empty)
        ));
    }
}
