//! Signed block permutations on A/B strings and the quaternion group they form.
//!
//! An operator acts on every block of `block_size` consecutive symbols the same
//! way: output position `j` takes input position `index_map[j]`, complemented
//! when `flip_mask[j]` is set. Composition is right to left: `compose([f, g])`
//! applies `g` first.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::symbolic::Symbol;

/// A/B string whose length is a positive multiple of four.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    symbols: Vec<Symbol>,
}

impl BitString {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.len() < 4 || symbols.len() % 4 != 0 {
            return Err(invalid(format!(
                "bit string length {} is not a positive multiple of 4",
                symbols.len()
            )));
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Every string of the given length, in lexicographic order.
    pub fn all_of_length(len: usize) -> Result<Vec<BitString>> {
        if len < 4 || len % 4 != 0 || len > 24 {
            return Err(invalid("enumeration needs a length in {4, 8, ..., 24}"));
        }
        Ok((0..1u32 << len)
            .map(|code| BitString {
                symbols: (0..len)
                    .map(|i| if code >> (len - 1 - i) & 1 == 1 { Symbol::B } else { Symbol::A })
                    .collect(),
            })
            .collect())
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        BitString { symbols }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .filter(|c| !matches!(c, ',' | ' ' | '(' | ')'))
            .map(|c| Symbol::from_char(c).ok_or_else(|| invalid(format!("bad symbol {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols)
    }
}

#[derive(Debug, Clone, Eq)]
pub struct StringOperator {
    block_size: usize,
    index_map: Vec<usize>,
    flip_mask: Vec<bool>,
    name: Option<String>,
}

impl PartialEq for StringOperator {
    /// Equal action on strings, regardless of name or block representation.
    fn eq(&self, other: &Self) -> bool {
        let size = lcm(self.block_size, other.block_size);
        let (a, b) = (self.lifted(size), other.lifted(size));
        a.index_map == b.index_map && a.flip_mask == b.flip_mask
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl StringOperator {
    pub fn new(index_map: Vec<usize>, flip_mask: Vec<bool>) -> Result<Self> {
        let n = index_map.len();
        if n == 0 || flip_mask.len() != n {
            return Err(invalid("index map and flip mask must share a positive block size"));
        }
        let mut seen = vec![false; n];
        for &i in &index_map {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(invalid("index map is not a permutation of the block"));
            }
        }
        Ok(Self { block_size: n, index_map, flip_mask, name: None })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn flip_mask(&self) -> &[bool] {
        &self.flip_mask
    }

    fn build(map: &[usize], flips: &[bool], name: &str) -> Self {
        Self::new(map.to_vec(), flips.to_vec()).expect("valid built-in operator").named(name)
    }

    pub fn identity() -> Self {
        Self::build(&[0, 1], &[false, false], "1")
    }

    /// `-S`: every symbol complemented.
    pub fn negate() -> Self {
        Self::build(&[0, 1], &[true, true], "-1")
    }

    /// `(a1, a2) -> (!a2, a1)` on each pair.
    pub fn i() -> Self {
        Self::build(&[1, 0], &[true, false], "i")
    }

    /// `(a1, a2, a3, a4) -> (!a2, a1, a4, !a3)`.
    pub fn e1() -> Self {
        Self::build(&[1, 0, 3, 2], &[true, false, false, true], "e1")
    }

    /// `(a1, a2, a3, a4) -> (!a3, !a4, a1, a2)`.
    pub fn e2() -> Self {
        Self::build(&[2, 3, 0, 1], &[true, true, false, false], "e2")
    }

    /// `(a1, a2, a3, a4) -> (a4, !a3, a2, !a1)`.
    pub fn e3() -> Self {
        Self::build(&[3, 2, 1, 0], &[false, true, false, true], "e3")
    }

    pub fn e(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::e1()),
            2 => Ok(Self::e2()),
            3 => Ok(Self::e3()),
            _ => Err(invalid(format!("no quaternion unit e{k}"))),
        }
    }

    /// Same action written on blocks of `size` (a multiple of the block size).
    pub fn lifted(&self, size: usize) -> Self {
        debug_assert_eq!(size % self.block_size, 0);
        let b = self.block_size;
        let index_map = (0..size).map(|j| j / b * b + self.index_map[j % b]).collect();
        let flip_mask = (0..size).map(|j| self.flip_mask[j % b]).collect();
        Self { block_size: size, index_map, flip_mask, name: self.name.clone() }
    }

    pub fn apply_symbols(&self, s: &[Symbol]) -> Result<Vec<Symbol>> {
        let b = self.block_size;
        if s.len() % b != 0 {
            return Err(invalid(format!(
                "string length {} is not a multiple of the operator block {b}",
                s.len()
            )));
        }
        Ok(s.chunks_exact(b)
            .flat_map(|block| {
                (0..b).map(move |j| {
                    let v = block[self.index_map[j]];
                    if self.flip_mask[j] { v.complement() } else { v }
                })
            })
            .collect())
    }

    pub fn apply(&self, s: &BitString) -> BitString {
        // blocks of 1, 2 and 4 always divide a valid bit string
        BitString {
            symbols: self.apply_symbols(&s.symbols).expect("block divides string length"),
        }
    }

    /// `self` after `first`.
    pub fn after(&self, first: &StringOperator) -> Result<StringOperator> {
        compose(&[self.clone(), first.clone()])
    }

    /// True when the operator is a bijection of the block with per-position flips.
    pub fn is_signed_block_permutation(&self) -> bool {
        let mut seen = vec![false; self.block_size];
        self.index_map.len() == self.block_size
            && self.flip_mask.len() == self.block_size
            && self
                .index_map
                .iter()
                .all(|&i| i < self.block_size && !std::mem::replace(&mut seen[i], true))
    }
}

/// Right-to-left composition; the empty product is the identity.
pub fn compose(ops: &[StringOperator]) -> Result<StringOperator> {
    let Some(size) = ops.iter().map(|o| o.block_size).max() else {
        return Ok(StringOperator::identity());
    };
    if let Some(bad) = ops.iter().find(|o| size % o.block_size != 0) {
        return Err(invalid(format!(
            "block sizes {} and {size} are incompatible",
            bad.block_size
        )));
    }
    let mut acc = StringOperator::identity().lifted(size);
    // walking right to left: acc <- op . acc
    for op in ops.iter().rev() {
        let f = op.lifted(size);
        let g = acc;
        let index_map = (0..size).map(|j| g.index_map[f.index_map[j]]).collect();
        let flip_mask = (0..size).map(|j| f.flip_mask[j] ^ g.flip_mask[f.index_map[j]]).collect();
        acc = StringOperator { block_size: size, index_map, flip_mask, name: None };
    }
    Ok(acc)
}

pub fn negate(s: &BitString) -> BitString {
    StringOperator::negate().apply(s)
}

pub fn apply_i(s: &BitString) -> BitString {
    StringOperator::i().apply(s)
}

pub fn apply_e(k: usize, s: &BitString) -> Result<BitString> {
    Ok(StringOperator::e(k)?.apply(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// `sigma_z = i e1`, `sigma_y = i e2`, `sigma_x = -i e3`.
pub fn pauli(axis: PauliAxis) -> StringOperator {
    let (ops, name) = match axis {
        PauliAxis::Z => (vec![StringOperator::i(), StringOperator::e1()], "sigma_z"),
        PauliAxis::Y => (vec![StringOperator::i(), StringOperator::e2()], "sigma_y"),
        PauliAxis::X => (
            vec![StringOperator::negate(), StringOperator::i(), StringOperator::e3()],
            "sigma_x",
        ),
    };
    compose(&ops).expect("compatible blocks").named(name)
}

/// `(matches - mismatches) / length`.
pub fn correlation(s: &BitString, t: &BitString) -> Result<f64> {
    if s.len() != t.len() {
        return Err(invalid("correlation needs equal lengths"));
    }
    let matches = s.symbols.iter().zip(&t.symbols).filter(|(a, b)| a == b).count() as f64;
    let n = s.len() as f64;
    Ok((2.0 * matches - n) / n)
}

/// `S, e1(S), e1^2(S), ...` for `n_steps` steps.
pub fn phase_cycle(s: &BitString, n_steps: usize) -> Vec<BitString> {
    let e1 = StringOperator::e1();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(s.clone());
    for _ in 0..n_steps {
        let next = e1.apply(out.last().expect("non-empty"));
        out.push(next);
    }
    out
}

/// Element of the abstract quaternion group: sign and unit in {1, i, j, k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Quaternion {
    negative: bool,
    unit: usize,
}

impl Quaternion {
    const ALL: [Quaternion; 8] = [
        Quaternion { negative: false, unit: 0 },
        Quaternion { negative: true, unit: 0 },
        Quaternion { negative: false, unit: 1 },
        Quaternion { negative: true, unit: 1 },
        Quaternion { negative: false, unit: 2 },
        Quaternion { negative: true, unit: 2 },
        Quaternion { negative: false, unit: 3 },
        Quaternion { negative: true, unit: 3 },
    ];

    fn mul(self, other: Self) -> Self {
        // unit products: rows 1,i,j,k times columns 1,i,j,k as (negative, unit)
        const TABLE: [[(bool, usize); 4]; 4] = [
            [(false, 0), (false, 1), (false, 2), (false, 3)],
            [(false, 1), (true, 0), (false, 3), (true, 2)],
            [(false, 2), (true, 3), (true, 0), (false, 1)],
            [(false, 3), (false, 2), (true, 1), (true, 0)],
        ];
        let (neg, unit) = TABLE[self.unit][other.unit];
        Quaternion { negative: neg ^ self.negative ^ other.negative, unit }
    }

    fn name(self, units: &[&str; 4]) -> String {
        match (self.negative, self.unit) {
            (false, 0) => "1".into(),
            (true, 0) => "-1".into(),
            (false, u) => units[u].into(),
            (true, u) => format!("-{}", units[u]),
        }
    }
}

/// Outcome of the quaternion-group verification.
#[derive(Debug, Clone, Serialize)]
pub struct Q8Report {
    pub order: usize,
    pub center: Vec<String>,
    pub relations_checked: usize,
    pub failures: Vec<String>,
    /// `table[a][b]` names the product `a . b`.
    #[serde(skip)]
    pub table: Vec<Vec<String>>,
    #[serde(skip)]
    pub elements: Vec<String>,
}

impl Q8Report {
    /// 8x8 multiplication table; the header row lists the right factors.
    pub fn write_table_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "product,{}", self.elements.join(","))?;
        for (name, row) in self.elements.iter().zip(&self.table) {
            writeln!(w, "{name},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Checks that `(units[1], units[2], units[3])` with `negate` generate a copy
/// of Q8 under `i -> units[1]`, `j -> units[2]`, `k -> units[3]`.
pub fn quaternion_report(units: [StringOperator; 3]) -> Result<Q8Report> {
    let names = ["1", "e1", "e2", "e3"];
    let size = 4;
    let neg = StringOperator::negate().lifted(size);
    let image = |q: Quaternion| -> Result<StringOperator> {
        let base = if q.unit == 0 {
            StringOperator::identity().lifted(size)
        } else {
            units[q.unit - 1].lifted(size)
        };
        if q.negative { neg.after(&base) } else { Ok(base) }
    };
    let images: Vec<StringOperator> =
        Quaternion::ALL.iter().map(|&q| image(q)).collect::<Result<_>>()?;
    let elements: Vec<String> = Quaternion::ALL.iter().map(|q| q.name(&names)).collect();
    let mut failures = Vec::new();
    let mut relations = 0;

    // closure of the generators under composition
    let mut group: Vec<StringOperator> = vec![StringOperator::identity().lifted(size), neg.clone()];
    group.extend(units.iter().map(|u| u.lifted(size)));
    group.dedup();
    let mut grew = true;
    while grew && group.len() <= 64 {
        grew = false;
        for a in group.clone() {
            for b in group.clone() {
                let p = a.after(&b)?;
                if !group.contains(&p) {
                    group.push(p);
                    grew = true;
                }
            }
        }
    }
    let order = group.len();
    if order != 8 {
        failures.push(format!("closure has order {order}, expected 8"));
    }
    for (i, a) in images.iter().enumerate() {
        relations += 1;
        if images[..i].contains(a) {
            failures.push(format!("{} and an earlier element act identically", elements[i]));
        }
        if !a.is_signed_block_permutation() {
            failures.push(format!("{} is not a signed block permutation", elements[i]));
        }
    }

    let mut table = vec![vec![String::new(); 8]; 8];
    for (ia, &qa) in Quaternion::ALL.iter().enumerate() {
        for (ib, &qb) in Quaternion::ALL.iter().enumerate() {
            relations += 1;
            let product = images[ia].after(&images[ib])?;
            let expected = qa.mul(qb);
            let found = images.iter().position(|g| *g == product);
            table[ia][ib] = found.map_or_else(|| "?".to_string(), |k| elements[k].clone());
            if product != image(expected)? {
                failures.push(format!(
                    "{} . {} should be {} but is {}",
                    elements[ia],
                    elements[ib],
                    expected.name(&names),
                    table[ia][ib]
                ));
            }
        }
    }

    // the defining relations, stated directly on the generators
    let minus = StringOperator::negate();
    let [e1, e2, e3] = &units;
    let defining = [
        ("e1 . e1", compose(&[e1.clone(), e1.clone()])?),
        ("e2 . e2", compose(&[e2.clone(), e2.clone()])?),
        ("e3 . e3", compose(&[e3.clone(), e3.clone()])?),
        ("e1 . e2 . e3", compose(&[e1.clone(), e2.clone(), e3.clone()])?),
    ];
    for (label, op) in defining {
        relations += 1;
        if op != minus {
            failures.push(format!("{label} is not -1"));
        }
    }

    let center: Vec<String> = (0..8)
        .filter(|&a| (0..8).all(|b| table[a][b] == table[b][a]))
        .map(|a| elements[a].clone())
        .collect();
    if center != ["1", "-1"] {
        failures.push(format!("center is {center:?}, expected [1, -1]"));
    }

    Ok(Q8Report { order, center, relations_checked: relations, failures, table, elements })
}

/// Verifies that `{1, -1, e1, e2, e3}` generate the quaternion group.
pub fn verify_q8() -> Result<Q8Report> {
    let report = quaternion_report([StringOperator::e1(), StringOperator::e2(), StringOperator::e3()])?;
    ensure_passed(&report)?;
    Ok(report)
}

pub fn ensure_passed(report: &Q8Report) -> Result<()> {
    match report.failures.first() {
        None => Ok(()),
        Some(first) => Err(Error::Verification(first.clone())),
    }
}
