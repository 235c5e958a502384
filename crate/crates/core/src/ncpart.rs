//! Non-crossing partition combinatorics.
//!
//! This module carries the combinatorial core of free probability: explicit
//! enumeration of non-crossing partitions, the moment↔free-cumulant
//! dictionary, mixed moments of words in free variables, and joint cumulants
//! of arbitrary word families.
//!
//! Two implementations of each conversion are deliberately kept side by side.
//! The *definitional* routes ([`moments_from_cumulants`],
//! [`cumulants_from_moments`], [`free_mixed_moment`]) sum over enumerated
//! partitions and are guarded at ground size 14, past which Catalan growth
//! makes exact enumeration pointless. The *production* routes
//! ([`CumulantSequence::moments`], [`MomentSequence::cumulants`],
//! [`FreeMomentEngine`]) go through series reversion and a memoized
//! word-splitting recursion and scale to the orders the generating-function
//! work needs. The test suite holds the two sides against each other.

use crate::scalar::Scalar;
use crate::series::TruncatedSeries;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest ground-set size for which partitions are enumerated explicitly.
pub const ENUMERATION_GUARD: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NcError {
    #[error("ground-set size {0} outside the supported range 1..={ENUMERATION_GUARD}")]
    GroundSizeOutOfRange(usize),
    #[error("word of length {0} exceeds the exact-enumeration guard of {ENUMERATION_GUARD}")]
    WordTooLong(usize),
    #[error("no cumulant sequence registered for label '{0}'")]
    MissingLabel(char),
    #[error("label '{label}' needs cumulants up to order {needed}, only {available} available")]
    InsufficientCumulants {
        label: char,
        needed: usize,
        available: usize,
    },
    #[error("blocks do not partition the ground set: {0}")]
    MalformedPartition(String),
    #[error("blocks cross: {0}")]
    CrossingPartition(String),
    #[error("the empty word has no moment decomposition")]
    EmptyWord,
    #[error("cannot parse colored word {0:?}: expected letters with optional exponent digits")]
    WordParse(String),
}

/// n-th Catalan number, by the additive convolution recurrence (no division,
/// no intermediate overflow for n ≤ 64).
pub fn catalan(n: usize) -> u128 {
    assert!(n <= 64, "catalan({n}) would overflow u128");
    let mut c = vec![0u128; n + 1];
    c[0] = 1;
    for m in 1..=n {
        c[m] = (0..m).map(|i| c[i] * c[m - 1 - i]).sum();
    }
    c[n]
}

type Blocks = Vec<Vec<usize>>;

/// A partition of {0, …, k−1} whose blocks do not interleave.
#[derive(Clone, PartialEq, Eq)]
pub struct NonCrossingPartition {
    ground: usize,
    blocks: Blocks,
}

impl NonCrossingPartition {
    /// Validates that `blocks` partition {0..ground} with no crossing pair.
    /// Blocks are stored with ascending elements, ordered by least element.
    pub fn new(ground: usize, mut blocks: Blocks) -> Result<Self, NcError> {
        let mut seen = vec![false; ground];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(NcError::MalformedPartition("empty block".into()));
            }
            b.sort_unstable();
            for &x in b.iter() {
                if x >= ground {
                    return Err(NcError::MalformedPartition(format!(
                        "element {x} outside ground set of size {ground}"
                    )));
                }
                if seen[x] {
                    return Err(NcError::MalformedPartition(format!(
                        "element {x} appears in two blocks"
                    )));
                }
                seen[x] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(NcError::MalformedPartition(format!(
                "element {missing} is not covered"
            )));
        }
        blocks.sort_by_key(|b| b[0]);
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                if blocks_cross(&blocks[i], &blocks[j]) {
                    return Err(NcError::CrossingPartition(format!(
                        "{:?} and {:?}",
                        blocks[i], blocks[j]
                    )));
                }
            }
        }
        Ok(Self { ground, blocks })
    }

    fn from_canonical_unchecked(ground: usize, blocks: Blocks) -> Self {
        Self { ground, blocks }
    }

    pub fn ground_size(&self) -> usize {
        self.ground
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// True when this is the one-block partition of its ground set.
    pub fn is_full(&self) -> bool {
        self.blocks.len() == 1
    }
}

impl fmt::Debug for NonCrossingPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NC{:?}", self.blocks)
    }
}

/// Two sorted blocks interleave iff their merged element sequence changes
/// ownership at least three times (the pattern a…b…a…b).
fn blocks_cross(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    let mut runs = 0u32;
    let mut last: Option<bool> = None; // true = element of a
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i] < b[j]);
        if last != Some(take_a) {
            runs += 1;
            last = Some(take_a);
        }
        if take_a {
            i += 1;
        } else {
            j += 1;
        }
    }
    runs >= 4
}

/// All non-crossing partitions of a ground set of size `k`, 1 ≤ k ≤ 14,
/// memoized process-wide behind an `Arc` so concurrent readers share one copy.
pub fn nc_partitions(k: usize) -> Result<Arc<Vec<NonCrossingPartition>>, NcError> {
    if k == 0 || k > ENUMERATION_GUARD {
        return Err(NcError::GroundSizeOutOfRange(k));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<NonCrossingPartition>>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&k) {
        return Ok(Arc::clone(hit));
    }
    let mut memo: Vec<Option<Rc<Vec<Blocks>>>> = vec![None; k + 1];
    let generated = generate_nc(k, &mut memo);
    let out: Vec<NonCrossingPartition> = generated
        .iter()
        .map(|blocks| NonCrossingPartition::from_canonical_unchecked(k, blocks.clone()))
        .collect();
    let arc = Arc::new(out);
    cache.lock().unwrap().insert(k, Arc::clone(&arc));
    Ok(arc)
}

/// Recursive generation: the block containing element 0 splits the rest into
/// independent gaps, each partitioned recursively. Sub-results are memoized
/// by gap length and shifted into place, so total work is proportional to the
/// output size.
fn generate_nc(len: usize, memo: &mut Vec<Option<Rc<Vec<Blocks>>>>) -> Rc<Vec<Blocks>> {
    if let Some(hit) = memo[len].as_ref() {
        return Rc::clone(hit);
    }
    let mut out: Vec<Blocks> = Vec::new();
    if len == 0 {
        out.push(Vec::new());
    } else {
        let mut block = vec![0usize];
        let mut gaps: Vec<(usize, usize)> = Vec::new();
        extend_first_block(len, 0, &mut block, &mut gaps, &mut out, memo);
    }
    let rc = Rc::new(out);
    memo[len] = Some(Rc::clone(&rc));
    rc
}

fn extend_first_block(
    len: usize,
    last: usize,
    block: &mut Vec<usize>,
    gaps: &mut Vec<(usize, usize)>,
    out: &mut Vec<Blocks>,
    memo: &mut Vec<Option<Rc<Vec<Blocks>>>>,
) {
    gaps.push((last + 1, len));
    emit_products(block, gaps, out, memo);
    gaps.pop();
    for nxt in last + 1..len {
        gaps.push((last + 1, nxt));
        block.push(nxt);
        extend_first_block(len, nxt, block, gaps, out, memo);
        block.pop();
        gaps.pop();
    }
}

fn emit_products(
    block: &[usize],
    gaps: &[(usize, usize)],
    out: &mut Vec<Blocks>,
    memo: &mut Vec<Option<Rc<Vec<Blocks>>>>,
) {
    let lists: Vec<Rc<Vec<Blocks>>> = gaps
        .iter()
        .map(|&(s, e)| generate_nc(e - s, memo))
        .collect();
    let mut idx = vec![0usize; lists.len()];
    loop {
        let mut part: Blocks = vec![block.to_vec()];
        for (g, &(s, _)) in gaps.iter().enumerate() {
            for sub in &lists[g][idx[g]] {
                part.push(sub.iter().map(|x| x + s).collect());
            }
        }
        part.sort_by_key(|b| b[0]);
        out.push(part);
        let mut g = 0;
        loop {
            if g == lists.len() {
                return;
            }
            idx[g] += 1;
            if idx[g] < lists[g].len() {
                break;
            }
            idx[g] = 0;
            g += 1;
        }
    }
}

/// Free cumulants κ₁…κ_K of one variable, tagged with its letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulantSequence<T> {
    label: char,
    values: Vec<T>,
}

impl<T: Scalar> CumulantSequence<T> {
    pub fn new(label: char, values: Vec<T>) -> Self {
        assert!(!values.is_empty(), "a cumulant sequence needs at least κ₁");
        Self { label, values }
    }

    pub fn label(&self) -> char {
        self.label
    }

    /// Highest available order K.
    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// κ_n, 1-indexed.
    pub fn kappa(&self, n: usize) -> &T {
        assert!(n >= 1 && n <= self.values.len(), "κ_{n} not available");
        &self.values[n - 1]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Moments m₁…m_K by series reversion: the shifted moment series
    /// g(z) = z + m₁z² + … is the compositional inverse of z/(1 + Σ κ_n zⁿ).
    pub fn moments(&self) -> MomentSequence<T> {
        let k = self.order();
        let mut one_plus_r = vec![T::zero(); k + 2];
        one_plus_r[0] = T::one();
        for (i, kap) in self.values.iter().enumerate() {
            one_plus_r[i + 1] = kap.clone();
        }
        let h = TruncatedSeries::new(one_plus_r)
            .reciprocal()
            .expect("constant term is 1")
            .shift_up(1)
            .truncated(k + 1);
        let g = h.revert().expect("linear coefficient is 1");
        MomentSequence::new(
            self.label,
            (1..=k).map(|n| g.coeff(n + 1).clone()).collect(),
        )
    }
}

/// Moments m₁…m_K of one variable (m₀ is implicitly 1), tagged with its letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSequence<T> {
    label: char,
    values: Vec<T>,
}

impl<T: Scalar> MomentSequence<T> {
    pub fn new(label: char, values: Vec<T>) -> Self {
        assert!(!values.is_empty(), "a moment sequence needs at least m₁");
        Self { label, values }
    }

    pub fn label(&self) -> char {
        self.label
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// m_n by value, with m₀ = 1.
    pub fn moment(&self, n: usize) -> T {
        if n == 0 {
            T::one()
        } else {
            self.values[n - 1].clone()
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Free cumulants κ₁…κ_K, inverting [`CumulantSequence::moments`] by the
    /// reverse reversion: 1 + Σ κ_n zⁿ = z / g^{⟨−1⟩}(z).
    pub fn cumulants(&self) -> CumulantSequence<T> {
        let k = self.order();
        let mut g = vec![T::zero(); k + 2];
        g[1] = T::one();
        for (i, m) in self.values.iter().enumerate() {
            g[i + 2] = m.clone();
        }
        let h = TruncatedSeries::new(g)
            .revert()
            .expect("linear coefficient is 1");
        let one_plus_r = h
            .shift_down(1)
            .expect("reversion has zero constant term")
            .reciprocal()
            .expect("constant term is 1");
        CumulantSequence::new(
            self.label,
            (1..=k).map(|n| one_plus_r.coeff(n).clone()).collect(),
        )
    }
}

/// The letter → cumulant-sequence assignment describing a free family.
#[derive(Debug, Clone, Default)]
pub struct CumulantMap<T> {
    inner: BTreeMap<char, CumulantSequence<T>>,
}

impl<T: Scalar> CumulantMap<T> {
    pub fn new() -> Self {
        Self {
            inner: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, seq: CumulantSequence<T>) {
        self.inner.insert(seq.label(), seq);
    }

    pub fn get(&self, label: char) -> Option<&CumulantSequence<T>> {
        self.inner.get(&label)
    }

    pub fn labels(&self) -> impl Iterator<Item = char> + '_ {
        self.inner.keys().copied()
    }
}

/// A word in non-commuting variables, stored in run-length form with adjacent
/// equal letters merged and all exponents ≥ 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ColoredWord {
    runs: Vec<(char, usize)>,
}

impl ColoredWord {
    pub fn new(runs: Vec<(char, usize)>) -> Self {
        let mut merged: Vec<(char, usize)> = Vec::with_capacity(runs.len());
        for (c, e) in runs {
            assert!(e >= 1, "exponents must be positive");
            match merged.last_mut() {
                Some((lc, le)) if *lc == c => *le += e,
                _ => merged.push((c, e)),
            }
        }
        Self { runs: merged }
    }

    pub fn from_letters(letters: &[char]) -> Self {
        Self::new(letters.iter().map(|&c| (c, 1)).collect())
    }

    /// Parses words like `"VUVU"` or `"V2U"` (a digit run after a letter is
    /// that letter's exponent), as well as the spaced form this type
    /// displays as (`"V U V U"`, `"V2 U"`), so reported words can be pasted
    /// back in verbatim. Exponent digits must follow their letter directly.
    pub fn parse(s: &str) -> Result<Self, NcError> {
        let mut runs = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            if c.is_ascii_whitespace() {
                continue;
            }
            if !c.is_ascii_alphabetic() {
                return Err(NcError::WordParse(s.to_string()));
            }
            let mut digits = String::new();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            let exp = if digits.is_empty() {
                1
            } else {
                digits
                    .parse::<usize>()
                    .ok()
                    .filter(|&e| e >= 1)
                    .ok_or_else(|| NcError::WordParse(s.to_string()))?
            };
            runs.push((c, exp));
        }
        if runs.is_empty() {
            return Err(NcError::WordParse(s.to_string()));
        }
        Ok(Self::new(runs))
    }

    pub fn runs(&self) -> &[(char, usize)] {
        &self.runs
    }

    /// Exponent-1 letter sequence.
    pub fn expanded(&self) -> Vec<char> {
        let mut out = Vec::with_capacity(self.len());
        for &(c, e) in &self.runs {
            out.extend(std::iter::repeat(c).take(e));
        }
        out
    }

    /// Length of the expanded word.
    pub fn len(&self) -> usize {
        self.runs.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Cyclic left rotation by `k` letters of the expanded word.
    pub fn rotated_left(&self, k: usize) -> Self {
        let mut letters = self.expanded();
        let n = letters.len();
        if n > 0 {
            letters.rotate_left(k % n);
        }
        Self::from_letters(&letters)
    }
}

impl fmt::Debug for ColoredWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ColoredWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(c, e)) in self.runs.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if e == 1 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}{e}")?;
            }
        }
        Ok(())
    }
}

/// m_n of a single variable as the sum over non-crossing partitions of
/// products of cumulants — the definitional route, enumeration-guarded.
pub fn moments_from_cumulants<T: Scalar>(
    c: &CumulantSequence<T>,
    n: usize,
) -> Result<T, NcError> {
    if n == 0 {
        return Ok(T::one());
    }
    if n > c.order() {
        return Err(NcError::InsufficientCumulants {
            label: c.label(),
            needed: n,
            available: c.order(),
        });
    }
    let parts = nc_partitions(n)?;
    let mut total = T::zero();
    for p in parts.iter() {
        let mut prod = T::one();
        for b in p.blocks() {
            prod = prod * c.kappa(b.len()).clone();
        }
        total = total + prod;
    }
    Ok(total)
}

/// κ_n of a single variable by the defining recursion: subtract from m_n the
/// contribution of every partition other than the one-block partition.
pub fn cumulants_from_moments<T: Scalar>(m: &MomentSequence<T>, n: usize) -> Result<T, NcError> {
    if n == 0 || n > m.order() {
        return Err(NcError::InsufficientCumulants {
            label: m.label(),
            needed: n.max(1),
            available: m.order(),
        });
    }
    let mut kappas: Vec<T> = Vec::with_capacity(n);
    for j in 1..=n {
        let parts = nc_partitions(j)?;
        let mut lower = T::zero();
        for p in parts.iter() {
            if p.is_full() {
                continue;
            }
            let mut prod = T::one();
            for b in p.blocks() {
                prod = prod * kappas[b.len() - 1].clone();
            }
            lower = lower + prod;
        }
        kappas.push(m.moment(j) - lower);
    }
    Ok(kappas.pop().expect("n >= 1"))
}

/// Joint moment of a word in free variables: the partition sum restricted to
/// monochromatic blocks, because mixed cumulants of free variables vanish.
/// Definitional route, enumeration-guarded.
pub fn free_mixed_moment<T: Scalar>(w: &ColoredWord, cum: &CumulantMap<T>) -> Result<T, NcError> {
    let letters = w.expanded();
    if letters.is_empty() {
        return Err(NcError::EmptyWord);
    }
    if letters.len() > ENUMERATION_GUARD {
        return Err(NcError::WordTooLong(letters.len()));
    }
    for &(label, _) in w.runs() {
        let need = letters.iter().filter(|&&c| c == label).count();
        let seq = cum.get(label).ok_or(NcError::MissingLabel(label))?;
        if seq.order() < need {
            return Err(NcError::InsufficientCumulants {
                label,
                needed: need,
                available: seq.order(),
            });
        }
    }
    let parts = nc_partitions(letters.len())?;
    let mut total = T::zero();
    'parts: for p in parts.iter() {
        let mut prod = T::one();
        for b in p.blocks() {
            let label = letters[b[0]];
            if b.iter().any(|&i| letters[i] != label) {
                continue 'parts;
            }
            let seq = cum.get(label).expect("checked above");
            prod = prod * seq.kappa(b.len()).clone();
        }
        total = total + prod;
    }
    Ok(total)
}

/// Joint cumulant of the word's letters, computed from a moment oracle by the
/// defining recursion: the full-block term of the moment's partition sum,
/// isolated by subtracting every coarser-than-nothing split recursively.
pub fn joint_cumulant<T, F>(w: &ColoredWord, oracle: &mut F) -> Result<T, NcError>
where
    T: Scalar,
    F: FnMut(&ColoredWord) -> Result<T, NcError>,
{
    let letters = w.expanded();
    if letters.is_empty() {
        return Err(NcError::EmptyWord);
    }
    let mut memo: HashMap<Vec<char>, T> = HashMap::new();
    joint_cumulant_inner(&letters, oracle, &mut memo)
}

fn joint_cumulant_inner<T, F>(
    letters: &[char],
    oracle: &mut F,
    memo: &mut HashMap<Vec<char>, T>,
) -> Result<T, NcError>
where
    T: Scalar,
    F: FnMut(&ColoredWord) -> Result<T, NcError>,
{
    if let Some(hit) = memo.get(letters) {
        return Ok(hit.clone());
    }
    let n = letters.len();
    let mut total = oracle(&ColoredWord::from_letters(letters))?;
    if n > 1 {
        let parts = nc_partitions(n)?;
        for p in parts.iter() {
            if p.is_full() {
                continue;
            }
            let mut prod = T::one();
            for b in p.blocks() {
                let sub: Vec<char> = b.iter().map(|&i| letters[i]).collect();
                prod = prod * joint_cumulant_inner(&sub, oracle, memo)?;
            }
            total = total - prod;
        }
    }
    memo.insert(letters.to_vec(), total.clone());
    Ok(total)
}

/// Word moment assembled by splitting on the positions coupled to the first
/// letter: the first letter couples through its own cumulants to later
/// occurrences of the same letter (couplings to other letters drop out when
/// the families are free, since their mixed cumulants vanish), and each gap
/// between coupled positions is evaluated by the supplied oracle.
pub fn bls_alternating_moment<T, F>(
    w: &ColoredWord,
    head: &CumulantSequence<T>,
    oracle: &mut F,
) -> Result<T, NcError>
where
    T: Scalar,
    F: FnMut(&ColoredWord) -> Result<T, NcError>,
{
    let letters = w.expanded();
    if letters.is_empty() {
        return Err(NcError::EmptyWord);
    }
    let label = letters[0];
    if label != head.label() {
        return Err(NcError::MissingLabel(label));
    }
    let positions: Vec<usize> = (0..letters.len())
        .filter(|&i| letters[i] == label)
        .collect();
    if positions.len() > head.order() {
        return Err(NcError::InsufficientCumulants {
            label,
            needed: positions.len(),
            available: head.order(),
        });
    }
    let mut gap = |lo: usize, hi: usize| -> Result<T, NcError> {
        if lo >= hi {
            Ok(T::one())
        } else {
            oracle(&ColoredWord::from_letters(&letters[lo..hi]))
        }
    };
    // chains[i] = Σ over coupled chains of length k starting at positions[i]
    // of the product of gap moments, one entry per chain length k.
    let m = positions.len();
    let n = letters.len();
    let mut chains: Vec<Vec<T>> = vec![Vec::new(); m];
    for i in (0..m).rev() {
        let mut row = vec![gap(positions[i] + 1, n)?];
        for k in 2..=m - i {
            let mut acc = T::zero();
            for j in i + 1..m {
                if k - 1 <= m - j {
                    let g = gap(positions[i] + 1, positions[j])?;
                    acc = acc + g * chains[j][k - 2].clone();
                }
            }
            row.push(acc);
        }
        chains[i] = row;
    }
    let mut total = T::zero();
    for (k, u) in chains[0].iter().enumerate() {
        total = total + head.kappa(k + 1).clone() * u.clone();
    }
    Ok(total)
}

/// Memoized evaluator for joint moments of words in a free family, applying
/// the word-splitting recursion at every level. Handles word lengths far past
/// the enumeration guard; the cache is shared behind a mutex so the engine
/// can be used from several threads.
pub struct FreeMomentEngine<T> {
    cumulants: CumulantMap<T>,
    memo: Mutex<HashMap<Vec<char>, T>>,
}

impl<T: Scalar> FreeMomentEngine<T> {
    pub fn new(cumulants: CumulantMap<T>) -> Self {
        Self {
            cumulants,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn cumulants(&self) -> &CumulantMap<T> {
        &self.cumulants
    }

    pub fn moment(&self, w: &ColoredWord) -> Result<T, NcError> {
        let letters = w.expanded();
        if letters.is_empty() {
            return Err(NcError::EmptyWord);
        }
        self.moment_letters(&letters)
    }

    fn moment_letters(&self, letters: &[char]) -> Result<T, NcError> {
        if letters.is_empty() {
            return Ok(T::one());
        }
        if let Some(hit) = self.memo.lock().unwrap().get(letters) {
            return Ok(hit.clone());
        }
        let label = letters[0];
        let head = self
            .cumulants
            .get(label)
            .ok_or(NcError::MissingLabel(label))?;
        let positions: Vec<usize> = (0..letters.len())
            .filter(|&i| letters[i] == label)
            .collect();
        if positions.len() > head.order() {
            return Err(NcError::InsufficientCumulants {
                label,
                needed: positions.len(),
                available: head.order(),
            });
        }
        let m = positions.len();
        let n = letters.len();
        // Same chain recursion as `bls_alternating_moment`, with gaps fed
        // back into the engine itself.
        let mut chains: Vec<Vec<T>> = vec![Vec::new(); m];
        for i in (0..m).rev() {
            let mut row = vec![self.moment_letters(&letters[positions[i] + 1..n])?];
            for k in 2..=m - i {
                let mut acc = T::zero();
                for j in i + 1..m {
                    if k - 1 <= m - j {
                        let g = self.moment_letters(&letters[positions[i] + 1..positions[j]])?;
                        acc = acc + g * chains[j][k - 2].clone();
                    }
                }
                row.push(acc);
            }
            chains[i] = row;
        }
        let mut total = T::zero();
        for (k, u) in chains[0].iter().enumerate() {
            total = total + head.kappa(k + 1).clone() * u.clone();
        }
        self.memo
            .lock()
            .unwrap()
            .insert(letters.to_vec(), total.clone());
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::from_ratio(n, d)
    }

    fn i(n: i64) -> Rat {
        Rat::from_int(n)
    }

    /// Brute-force oracle: all set partitions of {0..n-1} via restricted
    /// growth strings, filtered by the crossing predicate.
    fn brute_force_nc(n: usize) -> Vec<Blocks> {
        let mut rgs = vec![0usize; n];
        let mut out = Vec::new();
        loop {
            let nblocks = rgs.iter().copied().max().unwrap_or(0) + 1;
            let mut blocks: Blocks = vec![Vec::new(); nblocks];
            for (i, &b) in rgs.iter().enumerate() {
                blocks[b].push(i);
            }
            if blocks
                .iter()
                .enumerate()
                .all(|(i, a)| blocks[i + 1..].iter().all(|b| !blocks_cross(a, b)))
            {
                blocks.sort_by_key(|b| b[0]);
                out.push(blocks);
            }
            // next restricted growth string
            let mut k = n;
            loop {
                if k == 1 {
                    return out;
                }
                k -= 1;
                let cap = rgs[..k].iter().copied().max().unwrap() + 1;
                if rgs[k] < cap {
                    rgs[k] += 1;
                    for x in rgs[k + 1..].iter_mut() {
                        *x = 0;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn catalan_small_values() {
        let expect = [1u128, 1, 2, 5, 14, 42, 132, 429, 1430, 4862];
        for (n, &c) in expect.iter().enumerate() {
            assert_eq!(catalan(n), c);
        }
        assert_eq!(catalan(14), 2674440);
    }

    #[test]
    fn enumeration_counts_match_catalan() {
        for k in 1..=9 {
            assert_eq!(nc_partitions(k).unwrap().len() as u128, catalan(k));
        }
    }

    #[test]
    fn enumeration_matches_brute_force_filter() {
        for k in 1..=7 {
            let mut fast: Vec<Blocks> = nc_partitions(k)
                .unwrap()
                .iter()
                .map(|p| p.blocks().to_vec())
                .collect();
            let mut slow = brute_force_nc(k);
            fast.sort();
            slow.sort();
            assert_eq!(fast, slow, "mismatch at ground size {k}");
        }
    }

    #[test]
    fn enumeration_rejects_out_of_range_sizes() {
        assert!(matches!(
            nc_partitions(0),
            Err(NcError::GroundSizeOutOfRange(0))
        ));
        assert!(matches!(
            nc_partitions(15),
            Err(NcError::GroundSizeOutOfRange(15))
        ));
    }

    #[test]
    fn partition_validation_catches_bad_inputs() {
        assert!(NonCrossingPartition::new(4, vec![vec![0, 2], vec![1, 3]]).is_err());
        assert!(NonCrossingPartition::new(3, vec![vec![0, 1]]).is_err());
        assert!(NonCrossingPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        let ok = NonCrossingPartition::new(4, vec![vec![3, 0], vec![2, 1]]).unwrap();
        assert_eq!(ok.blocks(), &[vec![0, 3], vec![1, 2]]);
    }

    #[test]
    fn every_generated_partition_is_noncrossing() {
        for p in nc_partitions(6).unwrap().iter() {
            assert!(NonCrossingPartition::new(6, p.blocks().to_vec()).is_ok());
        }
    }

    #[test]
    fn moments_from_cumulants_small_frozen_values() {
        let c = CumulantSequence::new('a', vec![r(1, 2), i(3)]);
        // m2 = κ2 + κ1²
        assert_eq!(moments_from_cumulants(&c, 2).unwrap(), i(3) + r(1, 4));
        let ones = CumulantSequence::new('a', vec![i(1); 3]);
        assert_eq!(moments_from_cumulants(&ones, 3).unwrap(), i(5));
        let twos = CumulantSequence::new('a', vec![i(2); 3]);
        assert_eq!(moments_from_cumulants(&twos, 3).unwrap(), i(22));
    }

    #[test]
    fn constant_cumulants_give_catalan_moments() {
        let ones = CumulantSequence::new('a', vec![i(1); 10]);
        for n in 1..=10 {
            assert_eq!(
                moments_from_cumulants(&ones, n).unwrap(),
                i(catalan(n) as i64)
            );
        }
    }

    #[test]
    fn cumulants_from_moments_inverts_known_sequences() {
        let m1 = MomentSequence::new('a', vec![r(7, 3)]);
        assert_eq!(cumulants_from_moments(&m1, 1).unwrap(), r(7, 3));
        let catalans = MomentSequence::new(
            'a',
            (1..=10).map(|n| i(catalan(n) as i64)).collect(),
        );
        for n in 1..=10 {
            assert_eq!(cumulants_from_moments(&catalans, n).unwrap(), i(1));
        }
    }

    #[test]
    fn series_route_agrees_with_partition_sums() {
        let c = CumulantSequence::new('a', vec![i(2), r(-1, 3), r(5, 7), i(1), r(2, 5), i(4)]);
        let m = c.moments();
        for n in 1..=6 {
            assert_eq!(m.moment(n), moments_from_cumulants(&c, n).unwrap());
        }
        let back = m.cumulants();
        assert_eq!(back.values(), c.values());
        for n in 1..=6 {
            assert_eq!(
                cumulants_from_moments(&m, n).unwrap(),
                c.kappa(n).clone()
            );
        }
    }

    #[test]
    fn colored_word_parsing_and_normalization() {
        let w = ColoredWord::parse("V2U3V").unwrap();
        assert_eq!(w.runs(), &[('V', 2), ('U', 3), ('V', 1)]);
        assert_eq!(w.len(), 6);
        let merged = ColoredWord::new(vec![('V', 1), ('V', 2), ('U', 1)]);
        assert_eq!(merged.runs(), &[('V', 3), ('U', 1)]);
        assert_eq!(ColoredWord::parse("VUVU").unwrap().len(), 4);
        assert!(ColoredWord::parse("").is_err());
        assert!(ColoredWord::parse("V0").is_err());
        assert!(ColoredWord::parse("V^2").is_err());
        let rot = ColoredWord::parse("VUU").unwrap().rotated_left(1);
        assert_eq!(rot.runs(), &[('U', 2), ('V', 1)]);
    }

    #[test]
    fn displayed_words_parse_back_to_themselves() {
        for s in ["V", "UVUV", "V2U3V", "U4", "XYXY"] {
            let w = ColoredWord::parse(s).unwrap();
            assert_eq!(ColoredWord::parse(&w.to_string()).unwrap(), w);
        }
        // The spaced display form is accepted directly…
        assert_eq!(
            ColoredWord::parse("U V U V").unwrap(),
            ColoredWord::parse("UVUV").unwrap()
        );
        assert_eq!(
            ColoredWord::parse("V2 U3 V").unwrap(),
            ColoredWord::parse("V2U3V").unwrap()
        );
        // …but an exponent still cannot float free of its letter.
        assert!(ColoredWord::parse("U 2").is_err());
        assert!(ColoredWord::parse("  ").is_err());
    }

    /// Cumulants of the two running examples: a rate-2 jump-1 free-Poisson
    /// letter V (κ_n = 2) and the symmetric two-parameter letter U with
    /// moments 1/2, 3/8, 5/16, ….
    fn uv_map(order: usize) -> CumulantMap<Rat> {
        assert!(order <= 8);
        let u_moments: Vec<Rat> = vec![
            r(1, 2),
            r(3, 8),
            r(5, 16),
            r(35, 128),
            r(63, 256),
            r(231, 1024),
            r(429, 2048),
            r(6435, 32768),
        ];
        let u = MomentSequence::new('U', u_moments[..order].to_vec()).cumulants();
        let v = CumulantSequence::new('V', vec![i(2); order]);
        let mut map = CumulantMap::new();
        map.insert(u);
        map.insert(v);
        map
    }

    #[test]
    fn mixed_moments_of_free_letters_factor_as_expected() {
        let map = uv_map(4);
        let uv = ColoredWord::parse("UV").unwrap();
        assert_eq!(free_mixed_moment(&uv, &map).unwrap(), i(1));
        // φ(UVUV) = φ(U²)φ(V)² + φ(U)²φ(V²) − φ(U)²φ(V)²
        let uvuv = ColoredWord::parse("UVUV").unwrap();
        assert_eq!(free_mixed_moment(&uvuv, &map).unwrap(), i(2));
    }

    #[test]
    fn single_color_word_reduces_to_moment() {
        let map = uv_map(6);
        for n in 1..=6 {
            let w = ColoredWord::new(vec![('V', n)]);
            let direct =
                moments_from_cumulants(map.get('V').unwrap(), n).unwrap();
            assert_eq!(free_mixed_moment(&w, &map).unwrap(), direct);
        }
    }

    #[test]
    fn mixed_moment_is_cyclically_invariant() {
        let map = uv_map(6);
        let w = ColoredWord::parse("UUVUVV").unwrap();
        let base = free_mixed_moment(&w, &map).unwrap();
        for k in 1..w.len() {
            assert_eq!(free_mixed_moment(&w.rotated_left(k), &map).unwrap(), base);
        }
    }

    #[test]
    fn single_occurrence_of_centered_letter_kills_the_moment() {
        let mut map = uv_map(5);
        map.insert(CumulantSequence::new(
            'W',
            vec![i(0), r(2, 3), r(-1, 5), i(1), i(2)],
        ));
        for w in ["VWV", "VVWVV", "UWU", "UVWVU"] {
            let word = ColoredWord::parse(w).unwrap();
            assert_eq!(
                free_mixed_moment(&word, &map).unwrap(),
                i(0),
                "word {w} should vanish"
            );
        }
    }

    #[test]
    fn engine_agrees_with_definitional_sum_on_all_short_words() {
        let map = uv_map(8);
        let engine = FreeMomentEngine::new(map.clone());
        for len in 1..=7usize {
            for mask in 0..(1u32 << len) {
                let letters: Vec<char> = (0..len)
                    .map(|b| if mask >> b & 1 == 1 { 'U' } else { 'V' })
                    .collect();
                let w = ColoredWord::from_letters(&letters);
                assert_eq!(
                    engine.moment(&w).unwrap(),
                    free_mixed_moment(&w, &map).unwrap(),
                    "word {w}"
                );
            }
        }
    }

    #[test]
    fn split_formula_agrees_with_definitional_sum() {
        let map = uv_map(8);
        let engine = FreeMomentEngine::new(map.clone());
        let mut oracle =
            |w: &ColoredWord| -> Result<Rat, NcError> { engine.moment(w) };
        for word in ["V", "VU", "VUVU", "VVUUVU", "VUVUVU", "VUUVVUUV"] {
            let w = ColoredWord::parse(word).unwrap();
            let head = map.get(w.expanded()[0]).unwrap();
            assert_eq!(
                bls_alternating_moment(&w, head, &mut oracle).unwrap(),
                free_mixed_moment(&w, &map).unwrap(),
                "word {word}"
            );
        }
    }

    #[test]
    fn split_formula_base_cases() {
        let map = uv_map(3);
        let engine = FreeMomentEngine::new(map.clone());
        let mut oracle =
            |w: &ColoredWord| -> Result<Rat, NcError> { engine.moment(w) };
        let v = ColoredWord::parse("V").unwrap();
        assert_eq!(
            bls_alternating_moment(&v, map.get('V').unwrap(), &mut oracle).unwrap(),
            i(2)
        );
        let vu = ColoredWord::parse("VU").unwrap();
        assert_eq!(
            bls_alternating_moment(&vu, map.get('V').unwrap(), &mut oracle).unwrap(),
            i(1)
        );
    }

    #[test]
    fn joint_cumulants_of_free_letters_vanish_when_mixed() {
        let map = uv_map(6);
        let engine = FreeMomentEngine::new(map.clone());
        let mut oracle =
            |w: &ColoredWord| -> Result<Rat, NcError> { engine.moment(w) };
        for word in ["UV", "VU", "UVU", "VUV", "UUVV", "UVUV", "VUVUV", "UUVUVV"] {
            let w = ColoredWord::parse(word).unwrap();
            assert_eq!(
                joint_cumulant(&w, &mut oracle).unwrap(),
                i(0),
                "mixed cumulant of {word} should vanish"
            );
        }
    }

    #[test]
    fn joint_cumulant_of_repeated_letter_recovers_marginal_cumulants() {
        let map = uv_map(6);
        let engine = FreeMomentEngine::new(map.clone());
        let mut oracle =
            |w: &ColoredWord| -> Result<Rat, NcError> { engine.moment(w) };
        for n in 1..=6usize {
            let w = ColoredWord::new(vec![('U', n)]);
            assert_eq!(
                joint_cumulant(&w, &mut oracle).unwrap(),
                map.get('U').unwrap().kappa(n).clone(),
                "order {n}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn moment_cumulant_roundtrip_is_exact(
            nums in proptest::collection::vec(-12i64..=12, 8),
            dens in proptest::collection::vec(1i64..=9, 8),
        ) {
            let kappas: Vec<Rat> = nums.iter().zip(&dens).map(|(&n, &d)| r(n, d)).collect();
            let c = CumulantSequence::new('a', kappas.clone());
            let back = c.moments().cumulants();
            prop_assert_eq!(back.values(), &kappas[..]);
        }

        #[test]
        fn definitional_and_series_conversions_agree(
            nums in proptest::collection::vec(-9i64..=9, 6),
            dens in proptest::collection::vec(1i64..=7, 6),
        ) {
            let kappas: Vec<Rat> = nums.iter().zip(&dens).map(|(&n, &d)| r(n, d)).collect();
            let c = CumulantSequence::new('a', kappas);
            let m = c.moments();
            for n in 1..=6 {
                prop_assert_eq!(m.moment(n), moments_from_cumulants(&c, n).unwrap());
                prop_assert_eq!(
                    cumulants_from_moments(&m, n).unwrap(),
                    c.kappa(n).clone()
                );
            }
        }

        #[test]
        fn engine_matches_definitional_sum_on_random_words(
            mask in 0u32..256,
            len in 2usize..=8,
            u_nums in proptest::collection::vec(-6i64..=6, 8),
            v_nums in proptest::collection::vec(-6i64..=6, 8),
        ) {
            let u = CumulantSequence::new('U', u_nums.iter().map(|&n| r(n, 4)).collect());
            let v = CumulantSequence::new('V', v_nums.iter().map(|&n| r(n, 3)).collect());
            let mut map = CumulantMap::new();
            map.insert(u);
            map.insert(v);
            let letters: Vec<char> = (0..len)
                .map(|b| if mask >> b & 1 == 1 { 'U' } else { 'V' })
                .collect();
            let w = ColoredWord::from_letters(&letters);
            let engine = FreeMomentEngine::new(map.clone());
            prop_assert_eq!(
                engine.moment(&w).unwrap(),
                free_mixed_moment(&w, &map).unwrap()
            );
        }
    }
}
