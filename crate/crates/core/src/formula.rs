//! CNF formulas, literals, the paired positive/negative clause-matrix encoding,
//! DIMACS I/O, and instance composition.
//!
//! A formula over `n` variables with `m` clauses is encoded as two `n x m` bit
//! matrices `(P, N)`: row `i`, column `j` of `P` is set when `x_i` occurs
//! positively in clause `j`, and of `N` when it occurs negated. Rows are
//! variables, columns are clauses.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use thiserror::Error;

/// Errors from formula construction, encoding, and I/O.
#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("variable index {var} out of range 1..={max}")]
    VariableOutOfRange { var: u32, max: u32 },
    #[error("duplicate literal for variable {0} in clause")]
    DuplicateLiteral(u32),
    #[error("clause contains both polarities of variable {0}")]
    BothPolarities(u32),
    #[error("both polarity bits set at variable {var}, clause {clause}")]
    MalformedMatrix { var: u32, clause: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("auxiliary range starting at {aux_base} overlaps design variables 1..={design_vars}")]
    AuxOverlap { aux_base: u32, design_vars: u32 },
    #[error("matrix file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A propositional literal: a 1-based variable index with a polarity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: u32,
    negative: bool,
}

impl Literal {
    pub fn new(var: u32, negative: bool) -> Self {
        assert!(var >= 1, "variable index must be >= 1");
        Literal { var, negative }
    }

    pub fn positive(var: u32) -> Self {
        Self::new(var, false)
    }

    pub fn negative(var: u32) -> Self {
        Self::new(var, true)
    }

    /// Parses the DIMACS integer convention: `v` is positive, `-v` negated.
    pub fn from_dimacs(value: i32) -> Option<Self> {
        if value == 0 || value == i32::MIN {
            return None;
        }
        Some(Self::new(value.unsigned_abs(), value < 0))
    }

    pub fn to_dimacs(self) -> i32 {
        if self.negative {
            -(self.var as i32)
        } else {
            self.var as i32
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        !self.negative
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;
    fn not(self) -> Literal {
        Literal {
            var: self.var,
            negative: !self.negative,
        }
    }
}

impl std::fmt::Debug for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals. Literals are kept sorted by ascending variable
/// index; the empty clause is permitted (it is unsatisfiable).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, canonicalizing literal order. Rejects duplicate
    /// literals and clauses containing both polarities of one variable;
    /// tautologies exist only as explicit portfolio padding columns.
    pub fn new(mut literals: Vec<Literal>) -> Result<Self, FormulaError> {
        literals.sort_by_key(|l| (l.var(), l.is_positive()));
        for pair in literals.windows(2) {
            if pair[0].var() == pair[1].var() {
                if pair[0].is_positive() == pair[1].is_positive() {
                    return Err(FormulaError::DuplicateLiteral(pair[0].var()));
                }
                return Err(FormulaError::BothPolarities(pair[0].var()));
            }
        }
        Ok(Clause { literals })
    }

    pub fn empty() -> Self {
        Clause {
            literals: Vec::new(),
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

/// A CNF formula: a variable count and a clause list.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        for clause in &clauses {
            for lit in clause.literals() {
                if lit.var() > num_vars {
                    return Err(FormulaError::VariableOutOfRange {
                        var: lit.var(),
                        max: num_vars,
                    });
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn empty() -> Self {
        CnfFormula {
            num_vars: 0,
            clauses: Vec::new(),
        }
    }

    pub fn num_variables(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }
}

/// A packed bit matrix, row-major, 64 bits per word. Trailing bits of the
/// last word in each row are kept zero so whole-word comparison is valid.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    pub fn random<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        for word in m.words.iter_mut() {
            *word = rng.gen();
        }
        m.clear_slack();
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        let word = self.words[row * self.words_per_row + col / 64];
        (word >> (col % 64)) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        let word = &mut self.words[row * self.words_per_row + col / 64];
        if value {
            *word |= 1 << (col % 64);
        } else {
            *word &= !(1 << (col % 64));
        }
    }

    /// Bitwise XOR with a matrix of identical shape.
    pub fn xor(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        BitMatrix {
            rows: self.rows,
            cols: self.cols,
            words_per_row: self.words_per_row,
            words,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    fn clear_slack(&mut self) {
        let rem = self.cols % 64;
        if rem != 0 && self.words_per_row > 0 {
            let mask = (1u64 << rem) - 1;
            for row in 0..self.rows {
                self.words[row * self.words_per_row + self.words_per_row - 1] &= mask;
            }
        }
    }

    /// Packs each row into `ceil(cols/8)` bytes, bit `j` at byte `j/8`,
    /// position `j%8` (LSB first).
    pub fn write_rows<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let bytes_per_row = self.cols.div_ceil(8);
        let mut buf = vec![0u8; bytes_per_row];
        for row in 0..self.rows {
            buf.iter_mut().for_each(|b| *b = 0);
            for col in 0..self.cols {
                if self.get(row, col) {
                    buf[col / 8] |= 1 << (col % 8);
                }
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_rows<R: Read>(rows: usize, cols: usize, input: &mut R) -> io::Result<Self> {
        let bytes_per_row = cols.div_ceil(8);
        let mut m = Self::zeros(rows, cols);
        let mut buf = vec![0u8; bytes_per_row];
        for row in 0..rows {
            input.read_exact(&mut buf)?;
            for col in 0..cols {
                if (buf[col / 8] >> (col % 8)) & 1 == 1 {
                    m.set(row, col, true);
                }
            }
        }
        Ok(m)
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for row in 0..self.rows {
            for col in 0..self.cols {
                f.write_char(if self.get(row, col) { '1' } else { '0' })?;
            }
            f.write_char('\n')?;
        }
        Ok(())
    }
}

const BMPN_MAGIC: &[u8; 4] = b"BMPN";
const BMPN_VERSION: u16 = 1;

/// The paired `(P, N)` occurrence matrices of a CNF formula.
///
/// The last `padding_cols` columns, when nonzero, are tautology columns
/// introduced by portfolio padding; both polarity bits may be set there on
/// the reserved padding row.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClauseMatrix {
    num_vars: u32,
    num_clauses: u32,
    pos: BitMatrix,
    neg: BitMatrix,
    padding_cols: u32,
}

impl ClauseMatrix {
    pub fn from_parts(
        num_vars: u32,
        num_clauses: u32,
        pos: BitMatrix,
        neg: BitMatrix,
        padding_cols: u32,
    ) -> Result<Self, FormulaError> {
        if pos.rows() != num_vars as usize
            || pos.cols() != num_clauses as usize
            || neg.rows() != num_vars as usize
            || neg.cols() != num_clauses as usize
        {
            return Err(FormulaError::BadFile(
                "matrix shape does not match header".into(),
            ));
        }
        if padding_cols > num_clauses {
            return Err(FormulaError::BadFile(
                "padding column count exceeds clause count".into(),
            ));
        }
        Ok(ClauseMatrix {
            num_vars,
            num_clauses,
            pos,
            neg,
            padding_cols,
        })
    }

    pub fn num_variables(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> u32 {
        self.num_clauses
    }

    pub fn padding_cols(&self) -> u32 {
        self.padding_cols
    }

    pub fn pos(&self) -> &BitMatrix {
        &self.pos
    }

    pub fn neg(&self) -> &BitMatrix {
        &self.neg
    }

    /// Positive occurrence of variable `var` (1-based) in clause `clause`
    /// (0-based column).
    pub fn pos_bit(&self, var: u32, clause: usize) -> bool {
        self.pos.get(var as usize - 1, clause)
    }

    pub fn neg_bit(&self, var: u32, clause: usize) -> bool {
        self.neg.get(var as usize - 1, clause)
    }

    /// Serializes as `BMPN`: magic, version u16, n u32, m u32, padding
    /// column count u32, then `P` rows and `N` rows packed little-endian.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), FormulaError> {
        out.write_all(BMPN_MAGIC)?;
        out.write_all(&BMPN_VERSION.to_le_bytes())?;
        out.write_all(&self.num_vars.to_le_bytes())?;
        out.write_all(&self.num_clauses.to_le_bytes())?;
        out.write_all(&self.padding_cols.to_le_bytes())?;
        self.pos.write_rows(out)?;
        self.neg.write_rows(out)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self, FormulaError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BMPN_MAGIC {
            return Err(FormulaError::BadFile("bad magic, expected BMPN".into()));
        }
        let mut buf2 = [0u8; 2];
        input.read_exact(&mut buf2)?;
        let version = u16::from_le_bytes(buf2);
        if version != BMPN_VERSION {
            return Err(FormulaError::BadFile(format!(
                "unsupported version {version}"
            )));
        }
        let mut buf4 = [0u8; 4];
        input.read_exact(&mut buf4)?;
        let n = u32::from_le_bytes(buf4);
        input.read_exact(&mut buf4)?;
        let m = u32::from_le_bytes(buf4);
        input.read_exact(&mut buf4)?;
        let padding_cols = u32::from_le_bytes(buf4);
        let pos = BitMatrix::read_rows(n as usize, m as usize, input)?;
        let neg = BitMatrix::read_rows(n as usize, m as usize, input)?;
        Self::from_parts(n, m, pos, neg, padding_cols)
    }

    pub fn write_to_file(&self, path: &std::path::Path) -> Result<(), FormulaError> {
        let mut file = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn read_from_file(path: &std::path::Path) -> Result<Self, FormulaError> {
        let mut file = io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

/// Encodes a formula into its `(P, N)` occurrence matrices.
pub fn encode_cnf(formula: &CnfFormula) -> ClauseMatrix {
    let n = formula.num_variables() as usize;
    let m = formula.num_clauses();
    let mut pos = BitMatrix::zeros(n, m);
    let mut neg = BitMatrix::zeros(n, m);
    for (j, clause) in formula.clauses().iter().enumerate() {
        for lit in clause.literals() {
            let i = lit.var() as usize - 1;
            if lit.is_positive() {
                pos.set(i, j, true);
            } else {
                neg.set(i, j, true);
            }
        }
    }
    ClauseMatrix {
        num_vars: formula.num_variables(),
        num_clauses: m as u32,
        pos,
        neg,
        padding_cols: 0,
    }
}

/// Decodes the non-padding columns of a clause matrix back into a formula.
/// Literal order within each clause is ascending variable index.
pub fn decode_matrix(matrix: &ClauseMatrix) -> Result<CnfFormula, FormulaError> {
    let n = matrix.num_variables();
    let real_cols = (matrix.num_clauses() - matrix.padding_cols()) as usize;
    let mut clauses = Vec::with_capacity(real_cols);
    for j in 0..real_cols {
        let mut literals = Vec::new();
        for var in 1..=n {
            let p = matrix.pos_bit(var, j);
            let nn = matrix.neg_bit(var, j);
            if p && nn {
                return Err(FormulaError::MalformedMatrix {
                    var,
                    clause: j as u32,
                });
            }
            if p {
                literals.push(Literal::positive(var));
            } else if nn {
                literals.push(Literal::negative(var));
            }
        }
        clauses.push(Clause::new(literals).expect("per-variable scan cannot duplicate"));
    }
    CnfFormula::new(n, clauses)
}

/// Appends property columns to a design matrix. Property variables above
/// `property_aux_base` are Tseytin auxiliaries and must sit above the
/// design's variable range.
pub fn conjoin(
    design: &ClauseMatrix,
    property: &ClauseMatrix,
    property_aux_base: u32,
) -> Result<ClauseMatrix, FormulaError> {
    if property.num_variables() > design.num_variables()
        && property_aux_base <= design.num_variables()
    {
        return Err(FormulaError::AuxOverlap {
            aux_base: property_aux_base,
            design_vars: design.num_variables(),
        });
    }
    let n = design.num_variables().max(property.num_variables()) as usize;
    let m_design = design.num_clauses() as usize;
    let m = m_design + property.num_clauses() as usize;
    let mut pos = BitMatrix::zeros(n, m);
    let mut neg = BitMatrix::zeros(n, m);
    for i in 0..design.num_variables() as usize {
        for j in 0..m_design {
            pos.set(i, j, design.pos().get(i, j));
            neg.set(i, j, design.neg().get(i, j));
        }
    }
    for i in 0..property.num_variables() as usize {
        for j in 0..property.num_clauses() as usize {
            pos.set(i, m_design + j, property.pos().get(i, j));
            neg.set(i, m_design + j, property.neg().get(i, j));
        }
    }
    ClauseMatrix::from_parts(n as u32, m as u32, pos, neg, 0)
}

/// Parses a DIMACS `p cnf` document.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, FormulaError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<Literal> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(FormulaError::Parse {
                    line: lineno,
                    msg: "duplicate header".into(),
                });
            }
            let mut fields = rest.split_ascii_whitespace();
            match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some("cnf"), Some(n), Some(m), None) => {
                    let n: u32 = n.parse().map_err(|_| FormulaError::Parse {
                        line: lineno,
                        msg: format!("bad variable count '{n}'"),
                    })?;
                    let m: usize = m.parse().map_err(|_| FormulaError::Parse {
                        line: lineno,
                        msg: format!("bad clause count '{m}'"),
                    })?;
                    header = Some((n, m));
                }
                _ => {
                    return Err(FormulaError::Parse {
                        line: lineno,
                        msg: format!("expected 'p cnf <vars> <clauses>', got '{line}'"),
                    })
                }
            }
            continue;
        }
        let (n, _) = header.ok_or(FormulaError::Parse {
            line: lineno,
            msg: "clause before 'p cnf' header".into(),
        })?;
        for token in line.split_ascii_whitespace() {
            let value: i32 = token.parse().map_err(|_| FormulaError::Parse {
                line: lineno,
                msg: format!("bad literal '{token}'"),
            })?;
            if value == 0 {
                let clause =
                    Clause::new(std::mem::take(&mut pending)).map_err(|e| FormulaError::Parse {
                        line: lineno,
                        msg: e.to_string(),
                    })?;
                clauses.push(clause);
            } else {
                let lit = Literal::from_dimacs(value).expect("nonzero");
                if lit.var() > n {
                    return Err(FormulaError::Parse {
                        line: lineno,
                        msg: format!("literal {value} exceeds declared {n} variables"),
                    });
                }
                pending.push(lit);
            }
        }
    }
    let (n, m) = header.ok_or(FormulaError::Parse {
        line: 0,
        msg: "missing 'p cnf' header".into(),
    })?;
    if !pending.is_empty() {
        return Err(FormulaError::Parse {
            line: 0,
            msg: "unterminated clause at end of input".into(),
        });
    }
    if clauses.len() != m {
        return Err(FormulaError::Parse {
            line: 0,
            msg: format!("header declares {m} clauses, found {}", clauses.len()),
        });
    }
    CnfFormula::new(n, clauses)
}

/// Emits a DIMACS document, one clause per line.
pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "p cnf {} {}",
        formula.num_variables(),
        formula.num_clauses()
    );
    for clause in formula.clauses() {
        for lit in clause.literals() {
            let _ = write!(out, "{} ", lit.to_dimacs());
        }
        let _ = writeln!(out, "0");
    }
    out
}
