//! Prime-power finite fields GF(p^e) with q <= 2^16 and exact linear algebra over them.
//!
//! Elements are stored as `u16`. For extension fields an element's base-p digits are the
//! coefficients of its polynomial representative (least significant digit = constant term).
//!
//! Reduction polynomials are pinned so that every run uses the same representation:
//!
//! | field      | modulus                                            |
//! |------------|----------------------------------------------------|
//! | GF(2^e)    | [`BINARY_MODULI`] (primitive trinomials/pentanomials) |
//! | GF(p^e), p odd | monic irreducible with the smallest digit encoding |
//! | GF(p)      | integers mod p                                     |

mod matrix;

pub use matrix::{complete_basis, solve_in_rowspan, stack_rank, FieldMatrix};

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

pub type Elem = u16;

/// Largest supported field order.
pub const MAX_ORDER: u32 = 1 << 16;

/// Reduction polynomials for GF(2^e), indexed by e, with the bit for x^e included.
pub const BINARY_MODULI: [u32; 17] = [
    0, 0, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AddRule {
    Xor,
    Mod(u32),
    Digits,
}

/// A finite field descriptor with precomputed log/antilog tables.
pub struct GaloisField {
    order: u32,
    characteristic: u32,
    degree: u32,
    /// Monic reduction polynomial, low coefficient first. Empty for prime fields.
    modulus: Vec<u32>,
    generator: Elem,
    add_rule: AddRule,
    /// `exp[i] = g^i` for `i < 2(q-1)`, doubled to skip a modulo on multiply.
    exp: Vec<Elem>,
    log: Vec<u32>,
}

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaloisField")
            .field("order", &self.order)
            .field("characteristic", &self.characteristic)
            .field("degree", &self.degree)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for GaloisField {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.modulus == other.modulus
    }
}

impl Eq for GaloisField {}

fn smallest_prime_factor(n: u32) -> u32 {
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return d;
        }
        d += 1;
    }
    n
}

fn distinct_prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Splits `q` into `(p, e)` with `q = p^e`, or `None` when q is not a prime power.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = smallest_prime_factor(q);
    let (mut rest, mut e) = (q, 0);
    while rest % p == 0 {
        rest /= p;
        e += 1;
    }
    (rest == 1).then_some((p, e))
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u32) -> u32 {
    let mut c = n.max(2);
    while smallest_prime_factor(c) != c {
        c += 1;
    }
    c
}

// Polynomials over GF(p) as coefficient vectors, low degree first.

fn poly_trim(a: &mut Vec<u32>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = mod_pow(m[dm], p - 2, p);
    while r.len() > dm {
        let shift = r.len() - 1 - dm;
        let c = r[r.len() - 1] * lead_inv % p;
        for (i, &mi) in m.iter().enumerate() {
            r[shift + i] = (r[shift + i] + p - c * mi % p) % p;
        }
        poly_trim(&mut r);
    }
    r
}

fn mod_pow(b: u32, mut k: u32, p: u32) -> u32 {
    let mut acc = 1u64;
    let mut base = (b % p) as u64;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        k >>= 1;
    }
    acc as u32
}

fn digits_to_poly(mut v: u32, p: u32, e: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(e as usize + 1);
    for _ in 0..=e {
        out.push(v % p);
        v /= p;
    }
    poly_trim(&mut out);
    out
}

fn poly_to_digits(a: &[u32], p: u32) -> u32 {
    a.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// Trial division by every monic polynomial of degree 1..=e/2.
fn is_irreducible(m: &[u32], p: u32) -> bool {
    let e = (m.len() - 1) as u32;
    for d in 1..=e / 2 {
        // Monic polynomials of degree d are p^d digit strings plus the leading 1.
        for low in 0..p.pow(d) {
            let mut cand = digits_to_poly(low, p, d);
            cand.resize(d as usize, 0);
            cand.push(1);
            if poly_rem(m, &cand, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// Monic irreducible of degree `e` over GF(p) whose lower coefficients, read as
/// base-p digits, form the smallest integer.
fn smallest_irreducible(p: u32, e: u32) -> Vec<u32> {
    for low in 0..p.pow(e) {
        let mut cand = digits_to_poly(low, p, e);
        cand.resize(e as usize, 0);
        cand.push(1);
        if cand[0] != 0 && is_irreducible(&cand, p) {
            return cand;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

impl GaloisField {
    /// Builds GF(q). Fails unless q is a prime power in `[2, 2^16]`.
    pub fn new(q: u32) -> Result<Arc<Self>> {
        if !(2..=MAX_ORDER).contains(&q) {
            return Err(Error::UnsupportedFieldOrder(q));
        }
        let (p, e) = prime_power(q).ok_or(Error::UnsupportedFieldOrder(q))?;
        let modulus = match (p, e) {
            (_, 1) => Vec::new(),
            (2, _) => digits_to_poly(BINARY_MODULI[e as usize], 2, e),
            _ => smallest_irreducible(p, e),
        };
        let add_rule = match (p, e) {
            (2, _) => AddRule::Xor,
            (_, 1) => AddRule::Mod(p),
            _ => AddRule::Digits,
        };

        let slow_mul = |a: u32, b: u32| -> u32 {
            if e == 1 {
                return ((a as u64 * b as u64) % p as u64) as u32;
            }
            let pa = digits_to_poly(a, p, e);
            let pb = digits_to_poly(b, p, e);
            if pa.is_empty() || pb.is_empty() {
                return 0;
            }
            let mut prod = vec![0u32; pa.len() + pb.len() - 1];
            for (i, &x) in pa.iter().enumerate() {
                for (j, &y) in pb.iter().enumerate() {
                    prod[i + j] = (prod[i + j] + x * y) % p;
                }
            }
            poly_to_digits(&poly_rem(&prod, &modulus, p), p)
        };
        let slow_pow = |g: u32, mut k: u32| -> u32 {
            let (mut acc, mut base) = (1u32, g);
            while k > 0 {
                if k & 1 == 1 {
                    acc = slow_mul(acc, base);
                }
                base = slow_mul(base, base);
                k >>= 1;
            }
            acc
        };

        let group = q - 1;
        let factors = distinct_prime_factors(group);
        let generator = (1..q)
            .find(|&g| factors.iter().all(|&f| slow_pow(g, group / f) != 1))
            .expect("multiplicative group of a field is cyclic");

        let mut exp = vec![0 as Elem; 2 * group as usize];
        let mut log = vec![0u32; q as usize];
        let mut x = 1u32;
        for i in 0..group as usize {
            exp[i] = x as Elem;
            exp[i + group as usize] = x as Elem;
            log[x as usize] = i as u32;
            x = slow_mul(x, generator);
        }
        if x != 1 {
            // Only reachable if the pinned modulus were reducible.
            return Err(Error::UnsupportedFieldOrder(q));
        }

        Ok(Arc::new(Self {
            order: q,
            characteristic: p,
            degree: e,
            modulus,
            generator: generator as Elem,
            add_rule,
            exp,
            log,
        }))
    }

    /// Like [`GaloisField::new`] but memoized per process, so repeated protocol runs
    /// share one set of tables.
    pub fn shared(q: u32) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<GaloisField>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(f) = cache.lock().expect("field cache poisoned").get(&q) {
            return Ok(Arc::clone(f));
        }
        let f = Self::new(q)?;
        cache
            .lock()
            .expect("field cache poisoned")
            .insert(q, Arc::clone(&f));
        Ok(f)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn characteristic(&self) -> u32 {
        self.characteristic
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Reduction polynomial coefficients, low degree first (empty for prime fields).
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn generator(&self) -> Elem {
        self.generator
    }

    /// Bits of information carried by one uniformly random element.
    pub fn bits_per_symbol(&self) -> f64 {
        (self.order as f64).log2()
    }

    pub fn check(&self, v: u32) -> Result<Elem> {
        if v < self.order {
            Ok(v as Elem)
        } else {
            Err(Error::ValueOutOfRange {
                value: v,
                order: self.order,
            })
        }
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        match self.add_rule {
            AddRule::Xor => a ^ b,
            AddRule::Mod(p) => ((a as u32 + b as u32) % p) as Elem,
            AddRule::Digits => self.digit_add(a, b, false),
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        match self.add_rule {
            AddRule::Xor => a ^ b,
            AddRule::Mod(p) => ((a as u32 + p - b as u32) % p) as Elem,
            AddRule::Digits => self.digit_add(a, b, true),
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        self.sub(0, a)
    }

    fn digit_add(&self, a: Elem, b: Elem, subtract: bool) -> Elem {
        let p = self.characteristic;
        let (mut a, mut b) = (a as u32, b as u32);
        let (mut out, mut place) = (0u32, 1u32);
        while a > 0 || b > 0 {
            let (da, db) = (a % p, b % p);
            let d = if subtract { (da + p - db) % p } else { (da + db) % p };
            out += d * place;
            place *= p;
            a /= p;
            b /= p;
        }
        out as Elem
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        }
    }

    /// Multiplicative inverse; `None` for zero.
    #[inline]
    pub fn inv(&self, a: Elem) -> Option<Elem> {
        if a == 0 {
            None
        } else {
            let group = self.order - 1;
            Some(self.exp[((group - self.log[a as usize]) % group) as usize])
        }
    }

    pub fn div(&self, a: Elem, b: Elem) -> Option<Elem> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: Elem, k: u64) -> Elem {
        if k == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let group = (self.order - 1) as u64;
        let idx = (self.log[a as usize] as u64 * (k % group)) % group;
        self.exp[idx as usize]
    }

    /// The element whose base-p digits spell the integer `n` mod q.
    ///
    /// Distinct integers below q map to distinct elements, which is all the
    /// Vandermonde construction needs from "evaluation points 1..n".
    pub fn from_integer(&self, n: u64) -> Elem {
        (n % self.order as u64) as Elem
    }

    #[inline]
    pub(crate) fn log_of(&self, a: Elem) -> u32 {
        debug_assert!(a != 0);
        self.log[a as usize]
    }

    /// `dst[j] += coef * src` for a row stored as parallel (index, log value) lists.
    #[inline]
    pub(crate) fn axpy_sparse(&self, dst: &mut [Elem], coef: Elem, idx: &[u32], logs: &[u32]) {
        if coef == 0 {
            return;
        }
        let lc = self.log[coef as usize] as usize;
        let exp = &self.exp[lc..];
        match self.add_rule {
            AddRule::Xor => {
                for (&j, &l) in idx.iter().zip(logs) {
                    dst[j as usize] ^= exp[l as usize];
                }
            }
            AddRule::Mod(p) => {
                for (&j, &l) in idx.iter().zip(logs) {
                    let v = dst[j as usize] as u32 + exp[l as usize] as u32;
                    dst[j as usize] = if v >= p { (v - p) as Elem } else { v as Elem };
                }
            }
            AddRule::Digits => {
                for (&j, &l) in idx.iter().zip(logs) {
                    dst[j as usize] = self.digit_add(dst[j as usize], exp[l as usize], false);
                }
            }
        }
    }

    /// Wraps a raw value as a [`FieldElement`] tied to this field.
    pub fn element(self: &Arc<Self>, v: u32) -> Result<FieldElement> {
        Ok(FieldElement {
            value: self.check(v)?,
            field: Arc::clone(self),
        })
    }

    /// All elements of the field in value order.
    pub fn elements(self: &Arc<Self>) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.order).map(move |v| FieldElement {
            value: v as Elem,
            field: Arc::clone(self),
        })
    }
}

/// A field value bundled with its field. Convenient for scalar work and tests;
/// matrices store bare [`Elem`]s and carry the field once.
#[derive(Clone)]
pub struct FieldElement {
    value: Elem,
    field: Arc<GaloisField>,
}

impl FieldElement {
    pub fn value(&self) -> Elem {
        self.value
    }

    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn zero(field: &Arc<GaloisField>) -> Self {
        Self {
            value: 0,
            field: Arc::clone(field),
        }
    }

    pub fn one(field: &Arc<GaloisField>) -> Self {
        Self {
            value: 1,
            field: Arc::clone(field),
        }
    }

    pub fn inv(&self) -> Option<Self> {
        self.field.inv(self.value).map(|value| self.with(value))
    }

    pub fn pow(&self, k: u64) -> Self {
        self.with(self.field.pow(self.value, k))
    }

    fn with(&self, value: Elem) -> Self {
        Self {
            value,
            field: Arc::clone(&self.field),
        }
    }

    fn same_field(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.field, &other.field) || *self.field == *other.field,
            "mixed-field arithmetic: GF({}) vs GF({})",
            self.field.order,
            other.field.order
        );
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@GF({})", self.value, self.field.order)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && *self.field == *other.field
    }
}

impl Eq for FieldElement {}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: Self) -> Self {
                $tr::$method(&self, &rhs)
            }
        }

        impl<'a> $tr<&'a FieldElement> for &'a FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: &'a FieldElement) -> FieldElement {
                self.same_field(rhs);
                let f: fn(&GaloisField, Elem, Elem) -> Elem = $body;
                self.with(f(&self.field, self.value, rhs.value))
            }
        }
    };
}

binop!(Add, add, |f, a, b| f.add(a, b));
binop!(Sub, sub, |f, a, b| f.sub(a, b));
binop!(Mul, mul, |f, a, b| f.mul(a, b));
binop!(Div, div, |f, a, b| f.div(a, b).expect("division by zero"));

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        let v = self.field.neg(self.value);
        self.with(v)
    }
}
