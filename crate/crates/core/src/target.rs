//! Functions that can be evaluated pointwise on `[0,1]^d`.

use std::sync::Arc;

/// A real-valued function of `d` variables.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

impl<T: Target + ?Sized> Target for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

impl<T: Target + ?Sized> Target for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

/// Wraps a closure as a [`Target`].
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F> FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Target for FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// The constant function.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl Target for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _x: &[f64]) -> f64 {
        self.value
    }
}

/// Pointwise difference `a − b`.
pub struct Difference<A, B>(pub A, pub B);

impl<A: Target, B: Target> Target for Difference<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.0.eval(x) - self.1.eval(x)
    }
}
