//! Forward-mode dual numbers. Nesting `Dual<Dual<S>>` carries second
//! derivatives along one direction.

use std::ops::{Add, Mul, Neg, Sub};

use crate::Scalar;

/// Values a network can be evaluated on: plain scalars or (nested) duals.
pub trait NetValue<S>: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn constant(v: S) -> Self;
    fn scale(self, w: S) -> Self;
    fn tanh(self) -> Self;
}

impl<S: Scalar> NetValue<S> for S {
    fn constant(v: S) -> Self {
        v
    }
    fn scale(self, w: S) -> Self {
        self * w
    }
    fn tanh(self) -> Self {
        num_traits::Float::tanh(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }
}

impl<T: Add<Output = T>> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Sub<Output = T>> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Copy + Add<Output = T> + Mul<Output = T>> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Neg<Output = T>> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<S: Scalar, T: NetValue<S>> NetValue<S> for Dual<T> {
    fn constant(v: S) -> Self {
        Dual::new(T::constant(v), T::constant(S::zero()))
    }
    fn scale(self, w: S) -> Self {
        Dual::new(self.re.scale(w), self.eps.scale(w))
    }
    fn tanh(self) -> Self {
        let a = self.re.tanh();
        let slope = T::constant(S::one()) - a * a;
        Dual::new(a, self.eps * slope)
    }
}

/// Second-order dual seeded to differentiate along one input.
pub type Dual2<S> = Dual<Dual<S>>;

/// `x + d` with unit first-order parts in both layers of the nesting.
pub fn seed2<S: Scalar>(x: S) -> Dual2<S> {
    Dual::new(Dual::new(x, S::one()), Dual::new(S::one(), S::zero()))
}

pub fn constant2<S: Scalar>(x: S) -> Dual2<S> {
    <Dual2<S> as NetValue<S>>::constant(x)
}
