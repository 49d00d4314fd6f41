//! Differentiable potentials on the unit box.

/// A scalar function on `[0,1]^d` with an exact gradient.
pub trait Potential: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `grad` (length `dim()`) and returns `f(x)`.
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_and_grad(x, grad)
    }
}

/// Brenier potential `‖x‖²/2 − (φ(x) − offset)` built from a Kantorovich potential `φ`.
///
/// `offset` carries the empirical mean used to center `φ`.
#[derive(Debug, Clone, Copy)]
pub struct Brenier<P> {
    pub kantorovich: P,
    pub offset: f64,
}

impl<P: Potential> Brenier<P> {
    pub fn new(kantorovich: P) -> Self {
        Self {
            kantorovich,
            offset: 0.0,
        }
    }

    pub fn centered(kantorovich: P, offset: f64) -> Self {
        Self {
            kantorovich,
            offset,
        }
    }

    /// `∇φ(x) = x − ∇φ̃(x)`, the transport map before clipping.
    pub fn gradient_map(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.kantorovich.value_and_grad(x, &mut g);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = xi - *gi;
        }
        g
    }
}

impl<P: Potential> Potential for Brenier<P> {
    fn dim(&self) -> usize {
        self.kantorovich.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        half_sq_norm(x) - (self.kantorovich.value(x) - self.offset)
    }

    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.kantorovich.value_and_grad(x, grad);
        for (gi, xi) in grad.iter_mut().zip(x) {
            *gi = xi - *gi;
        }
        half_sq_norm(x) - (v - self.offset)
    }
}

/// Zero Kantorovich potential; its Brenier potential is `‖x‖²/2` and the map is the identity.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPotential(pub usize);

impl Potential for ZeroPotential {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn value_and_grad(&self, _x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        0.0
    }
}

/// Potential defined by a pair of closures.
pub struct FnPotential<F, G> {
    dim: usize,
    value: F,
    grad: G,
}

impl<F, G> FnPotential<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, value: F, grad: G) -> Self {
        Self { dim, value, grad }
    }
}

impl<F, G> Potential for FnPotential<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.grad)(x, grad);
        (self.value)(x)
    }
}

pub(crate) fn half_sq_norm(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Componentwise projection onto `[0, 1]`.
pub fn clip_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brenier_of_zero_is_half_square() {
        let b = Brenier::new(ZeroPotential(3));
        let x = [0.1, 0.2, 0.3];
        let mut g = [0.0; 3];
        let v = b.value_and_grad(&x, &mut g);
        assert!((v - 0.07).abs() < 1e-15);
        assert_eq!(g, x);
        assert_eq!(b.gradient_map(&x), x.to_vec());
    }

    #[test]
    fn centering_shifts_value_only() {
        let b = Brenier::centered(ZeroPotential(1), 0.25);
        assert!((b.value(&[0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn clip_is_idempotent() {
        let mut x = [1.5, -0.2, 0.7];
        clip_unit(&mut x);
        assert_eq!(x, [1.0, 0.0, 0.7]);
        let y = x;
        clip_unit(&mut x);
        assert_eq!(x, y);
    }
}
