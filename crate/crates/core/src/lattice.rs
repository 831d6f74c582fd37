//! Periodic one-dimensional lattice, two-component spinor fields and the
//! norms used to measure them.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Spinor = [C64; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Sites `x` in `[-L, L)` with periodic wrap. Site `x` is stored at index `x + L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeGrid {
    half_width: usize,
}

impl LatticeGrid {
    pub fn new(half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::InvalidArgument("half-width must be positive".into()));
        }
        Ok(Self { half_width })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        2 * self.half_width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, x: i64) -> usize {
        let n = self.len() as i64;
        (x + self.half_width as i64).rem_euclid(n) as usize
    }

    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let l = self.half_width as i64;
        -l..l
    }

    pub fn contains(&self, x: i64) -> bool {
        let l = self.half_width as i64;
        (-l..l).contains(&x)
    }

    pub fn check_same(&self, other: &LatticeGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch { left: self.half_width, right: other.half_width });
        }
        Ok(())
    }
}

/// Japanese bracket `<x> = sqrt(1 + x^2)`.
pub fn bracket(x: i64) -> f64 {
    (1.0 + (x as f64) * (x as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: LatticeGrid,
    values: Vec<Spinor>,
}

impl SpinorField {
    pub fn zeros(grid: LatticeGrid) -> Self {
        Self { grid, values: vec![[ZERO; 2]; grid.len()] }
    }

    pub fn from_fn(grid: LatticeGrid, mut f: impl FnMut(i64) -> Spinor) -> Self {
        let values = grid.sites().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: LatticeGrid, values: Vec<Spinor>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} sites, got {}", grid.len(), values.len())));
        }
        Ok(Self { grid, values })
    }

    /// Unit spinor `s` at site `x`, zero elsewhere.
    pub fn point(grid: LatticeGrid, x: i64, s: Spinor) -> Result<Self> {
        if !grid.contains(x) {
            return Err(Error::InvalidArgument(format!("site {x} is outside the grid")));
        }
        let mut u = Self::zeros(grid);
        u[x] = s;
        Ok(u)
    }

    /// Components flattened as `[up(-L), down(-L), up(-L+1), ...]`.
    pub fn from_flat(grid: LatticeGrid, flat: &[C64]) -> Result<Self> {
        if flat.len() != 2 * grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} components, got {}", 2 * grid.len(), flat.len())));
        }
        let values = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Ok(Self { grid, values })
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.values.iter().flat_map(|s| [s[0], s[1]]).collect()
    }

    pub fn grid(&self) -> LatticeGrid {
        self.grid
    }

    pub fn values(&self) -> &[Spinor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Spinor] {
        &mut self.values
    }

    pub fn at(&self, x: i64) -> Spinor {
        self.values[self.grid.index(x)]
    }

    /// Complex inner product `(u, v) = sum u . conj(v)`, linear in `u`.
    pub fn inner(&self, other: &SpinorField) -> Result<C64> {
        self.grid.check_same(&other.grid)?;
        Ok(dot(&self.values, &other.values))
    }

    /// Real pairing `<u, v> = Re (u, v)`.
    pub fn pairing(&self, other: &SpinorField) -> Result<f64> {
        Ok(self.inner(other)?.re)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|s| s[0].norm_sqr() + s[1].norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|s| (s[0].norm_sqr() + s[1].norm_sqr()).sqrt()).fold(0.0, f64::max)
    }

    /// `||u||_{l^{p,s}} = || <x>^s |u(x)| ||_{l^p}`, with `p = f64::INFINITY` allowed.
    pub fn weighted_norm(&self, p: f64, s: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidArgument(format!("norm exponent p = {p} must be >= 1")));
        }
        let local = self.values.iter().enumerate().map(|(i, v)| {
            let w = bracket(self.grid.site(i)).powf(s);
            w * (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
        });
        if p.is_infinite() {
            return Ok(local.fold(0.0, f64::max));
        }
        if p == 2.0 {
            return Ok(local.map(|a| a * a).sum::<f64>().sqrt());
        }
        Ok(local.map(|a| a.powf(p)).sum::<f64>().powf(1.0 / p))
    }

    /// Zigzag `(Zu)(x) = (-1)^x u(x)`.
    pub fn zigzag(&self) -> SpinorField {
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            if self.grid.site(i).rem_euclid(2) == 1 {
                v[0] = -v[0];
                v[1] = -v[1];
            }
        }
        out
    }

    /// `P_+ u` keeps even sites, `P_- u` keeps odd sites.
    pub fn project_parity(&self, parity: Parity) -> SpinorField {
        let keep = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            if self.grid.site(i).rem_euclid(2) != keep {
                *v = [ZERO; 2];
            }
        }
        out
    }

    pub fn p_plus(&self) -> SpinorField {
        self.project_parity(Parity::Even)
    }

    pub fn p_minus(&self) -> SpinorField {
        self.project_parity(Parity::Odd)
    }

    /// `u += a v`.
    pub fn axpy(&mut self, a: C64, v: &SpinorField) -> Result<()> {
        self.grid.check_same(&v.grid)?;
        for (x, y) in self.values.iter_mut().zip(&v.values) {
            x[0] += a * y[0];
            x[1] += a * y[1];
        }
        Ok(())
    }

    pub fn scaled(&self, a: C64) -> SpinorField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: C64) {
        for v in &mut self.values {
            v[0] *= a;
            v[1] *= a;
        }
    }

    /// Mass `sum |u(x)|^2` over sites within `width` of either end of the grid.
    pub fn boundary_mass(&self, width: usize) -> f64 {
        let n = self.values.len();
        let w = width.min(n / 2);
        self.values[..w].iter().chain(&self.values[n - w..]).map(|s| s[0].norm_sqr() + s[1].norm_sqr()).sum()
    }

    /// Mass fraction carried by sites with `|x| <= radius`.
    pub fn mass_fraction_within(&self, radius: i64) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let inner: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.site(*i).abs() <= radius)
            .map(|(_, s)| s[0].norm_sqr() + s[1].norm_sqr())
            .sum();
        inner / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

pub(crate) fn dot(a: &[Spinor], b: &[Spinor]) -> C64 {
    let mut acc = ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x[0] * y[0].conj() + x[1] * y[1].conj();
    }
    acc
}

impl Index<i64> for SpinorField {
    type Output = Spinor;
    fn index(&self, x: i64) -> &Spinor {
        &self.values[self.grid.index(x)]
    }
}

impl IndexMut<i64> for SpinorField {
    fn index_mut(&mut self, x: i64) -> &mut Spinor {
        let i = self.grid.index(x);
        &mut self.values[i]
    }
}

fn zip_with(a: &SpinorField, b: &SpinorField, f: impl Fn(C64, C64) -> C64) -> SpinorField {
    assert_eq!(a.grid, b.grid, "grid mismatch in field arithmetic");
    let values = a.values.iter().zip(&b.values).map(|(x, y)| [f(x[0], y[0]), f(x[1], y[1])]).collect();
    SpinorField { grid: a.grid, values }
}

impl Add for &SpinorField {
    type Output = SpinorField;
    fn add(self, rhs: &SpinorField) -> SpinorField {
        zip_with(self, rhs, |x, y| x + y)
    }
}

impl Sub for &SpinorField {
    type Output = SpinorField;
    fn sub(self, rhs: &SpinorField) -> SpinorField {
        zip_with(self, rhs, |x, y| x - y)
    }
}

impl AddAssign<&SpinorField> for SpinorField {
    fn add_assign(&mut self, rhs: &SpinorField) {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field arithmetic");
        for (x, y) in self.values.iter_mut().zip(&rhs.values) {
            x[0] += y[0];
            x[1] += y[1];
        }
    }
}

impl SubAssign<&SpinorField> for SpinorField {
    fn sub_assign(&mut self, rhs: &SpinorField) {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field arithmetic");
        for (x, y) in self.values.iter_mut().zip(&rhs.values) {
            x[0] -= y[0];
            x[1] -= y[1];
        }
    }
}

impl Mul<&SpinorField> for C64 {
    type Output = SpinorField;
    fn mul(self, rhs: &SpinorField) -> SpinorField {
        rhs.scaled(self)
    }
}

impl Mul<&SpinorField> for f64 {
    type Output = SpinorField;
    fn mul(self, rhs: &SpinorField) -> SpinorField {
        rhs.scaled(C64::new(self, 0.0))
    }
}

impl Neg for &SpinorField {
    type Output = SpinorField;
    fn neg(self) -> SpinorField {
        self.scaled(-ONE)
    }
}

/// Identifies a small grid with the sites `[-l, l)` of a larger one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embedding {
    pub small: LatticeGrid,
    pub large: LatticeGrid,
}

impl Embedding {
    pub fn new(small: LatticeGrid, large: LatticeGrid) -> Result<Self> {
        if small.half_width() > large.half_width() {
            return Err(Error::InvalidArgument(format!(
                "window half-width {} exceeds lattice half-width {}",
                small.half_width(),
                large.half_width()
            )));
        }
        Ok(Self { small, large })
    }

    fn offset(&self) -> usize {
        self.large.half_width() - self.small.half_width()
    }

    pub fn restrict(&self, u: &SpinorField) -> Result<SpinorField> {
        self.large.check_same(&u.grid)?;
        let off = self.offset();
        let values = u.values[off..off + self.small.len()].to_vec();
        Ok(SpinorField { grid: self.small, values })
    }

    pub fn extend(&self, u: &SpinorField) -> Result<SpinorField> {
        self.small.check_same(&u.grid)?;
        let mut out = SpinorField::zeros(self.large);
        let off = self.offset();
        out.values[off..off + self.small.len()].copy_from_slice(&u.values);
        Ok(out)
    }

    /// `(u, v)` with `u` on the large grid and `v` on the window.
    pub fn inner_large_small(&self, u: &SpinorField, v: &SpinorField) -> Result<C64> {
        self.large.check_same(&u.grid)?;
        self.small.check_same(&v.grid)?;
        let off = self.offset();
        Ok(dot(&u.values[off..off + self.small.len()], &v.values))
    }

    /// `u += a v` with `u` on the large grid and `v` on the window.
    pub fn axpy_into_large(&self, u: &mut SpinorField, a: C64, v: &SpinorField) -> Result<()> {
        self.large.check_same(&u.grid)?;
        self.small.check_same(&v.grid)?;
        let off = self.offset();
        for (x, y) in u.values[off..off + self.small.len()].iter_mut().zip(&v.values) {
            x[0] += a * y[0];
            x[1] += a * y[1];
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StzKind {
    /// `max(||u||_{l^6_t l^inf_x}, ||u||_{l^inf_t l^2_x})`.
    Stz,
    /// Dual norm: each time slice goes wholly to the `l^1_t l^2_x` term or to the
    /// `l^{6/5}_t l^1_x` term, whichever is smaller for that slice.
    StzDual,
    /// `(sum_t ||u(t)||^2_{l^{2,s}})^{1/2}`.
    L2Weighted(f64),
}

/// Space-time norms of a time series of fields.
pub fn stz_norm(series: &[SpinorField], kind: StzKind) -> Result<f64> {
    if let Some(first) = series.first() {
        for u in series {
            first.grid.check_same(&u.grid)?;
        }
    }
    match kind {
        StzKind::Stz => {
            let l6: f64 = series.iter().map(|u| u.sup_norm().powi(6)).sum::<f64>().powf(1.0 / 6.0);
            let linf = series.iter().map(SpinorField::norm).fold(0.0, f64::max);
            Ok(l6.max(linf))
        }
        StzKind::StzDual => {
            let mut l1l2 = 0.0;
            let mut l65l1 = 0.0;
            for u in series {
                let a = u.norm();
                let b = u.weighted_norm(1.0, 0.0)?;
                if a <= b {
                    l1l2 += a;
                } else {
                    l65l1 += b.powf(1.2);
                }
            }
            Ok(l1l2 + l65l1.powf(1.0 / 1.2))
        }
        StzKind::L2Weighted(s) => {
            let mut acc = 0.0;
            for u in series {
                acc += u.weighted_norm(2.0, s)?.powi(2);
            }
            Ok(acc.sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: usize) -> LatticeGrid {
        LatticeGrid::new(l).unwrap()
    }

    #[test]
    fn indexing_wraps() {
        let g = grid(4);
        assert_eq!(g.index(-4), 0);
        assert_eq!(g.index(3), 7);
        assert_eq!(g.index(4), 0);
        assert_eq!(g.index(-5), 7);
        assert_eq!(g.site(0), -4);
    }

    #[test]
    fn point_mass_norms() {
        let g = grid(8);
        let u = SpinorField::point(g, 3, [ONE, ZERO]).unwrap();
        assert_eq!(u.norm(), 1.0);
        assert!((u.weighted_norm(2.0, 1.0).unwrap() - 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(u.weighted_norm(f64::INFINITY, 0.0).unwrap(), 1.0);
        assert!(u.weighted_norm(0.5, 0.0).is_err());
    }

    #[test]
    fn inner_is_conjugate_linear_in_second_slot() {
        let g = grid(2);
        let u = SpinorField::point(g, 0, [I, ZERO]).unwrap();
        let v = SpinorField::point(g, 0, [ONE, ZERO]).unwrap();
        assert_eq!(u.inner(&v).unwrap(), I);
        assert_eq!(v.inner(&u).unwrap(), -I);
        assert_eq!(u.pairing(&v).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let u = SpinorField::zeros(grid(2));
        let v = SpinorField::zeros(grid(3));
        assert!(matches!(u.inner(&v), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn mixed_norms_by_hand() {
        let g = grid(2);
        let a = SpinorField::point(g, 0, [C64::new(3.0, 0.0), C64::new(0.0, 4.0)]).unwrap();
        let mut b = SpinorField::zeros(g);
        b[-1] = [ONE, ZERO];
        b[1] = [ZERO, ONE];
        let series = [a, b];
        // sup norms 5 and 1, l2 norms 5 and sqrt 2.
        let stz = stz_norm(&series, StzKind::Stz).unwrap();
        assert!((stz - (5f64.powi(6) + 1.0).powf(1.0 / 6.0)).abs() < 1e-13);
        // slice a: l2 = 5, l1 = 5 -> l1l2 term; slice b: l2 = sqrt2 < l1 = 2 -> l1l2 term.
        let dual = stz_norm(&series, StzKind::StzDual).unwrap();
        assert!((dual - (5.0 + 2f64.sqrt())).abs() < 1e-13);
        let w = stz_norm(&series, StzKind::L2Weighted(1.0)).unwrap();
        assert!((w - (25.0 + 2.0 + 2.0f64).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn embedding_round_trip() {
        let e = Embedding::new(grid(3), grid(8)).unwrap();
        let u = SpinorField::from_fn(grid(3), |x| [C64::new(x as f64, 0.0), I]);
        let big = e.extend(&u).unwrap();
        assert_eq!(big[-3], u[-3]);
        assert_eq!(big[5], [ZERO; 2]);
        assert_eq!(e.restrict(&big).unwrap(), u);
        assert!((e.inner_large_small(&big, &u).unwrap() - u.inner(&u).unwrap()).norm() < 1e-14);
    }
}
