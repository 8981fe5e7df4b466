use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::sim::{Signal, System};
use super::tf::TransferFunction;
use crate::error::{Error, Result};

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidSystem(format!(
                "A must be square with n >= 1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::InvalidSystem(format!(
                "inconsistent dimensions: A {n}x{n}, B {}x{}, C {}x{}, D {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Controllable canonical form of a proper SISO transfer function.
    pub fn from_tf(tf: &TransferFunction) -> Result<Self> {
        if !tf.is_proper() {
            return Err(Error::ImproperSystem {
                num_degree: tf.num_degree(),
                den_degree: tf.den_degree(),
            });
        }
        let den = tf.den();
        let n = den.len() - 1;
        if n == 0 {
            return Err(Error::InvalidSystem(
                "static gain has no state-space realization with n >= 1".into(),
            ));
        }
        let mut num = vec![0.0; n + 1 - tf.num().len()];
        num.extend_from_slice(tf.num());
        let b0 = num[0];

        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -den[j + 1];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        let mut c = DMatrix::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = num[j + 1] - den[j + 1] * b0;
        }
        let d = DMatrix::from_element(1, 1, b0);
        Self::new(a, b, c, d)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Exact discretization for inputs that vary linearly across each step.
    /// Stiff systems stay accurate at any step length.
    pub fn discretize_foh(&self, dt: f64) -> Result<Foh> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let n = self.order();
        let m = self.inputs();
        // exp of [[A, B, 0], [0, 0, I], [0, 0, 0]] * dt holds both input integrals
        let size = n + 2 * m;
        let mut big = DMatrix::zeros(size, size);
        big.view_mut((0, 0), (n, n)).copy_from(&(&self.a * dt));
        big.view_mut((0, n), (n, m)).copy_from(&(&self.b * dt));
        for i in 0..m {
            big[(n + i, n + m + i)] = dt;
        }
        let e = big.exp();
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure {
                residuals: Vec::new(),
                worst_residual: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        Ok(Foh {
            phi: e.view((0, 0), (n, n)).into_owned(),
            gamma0: e.view((0, n), (n, m)).into_owned(),
            gamma1: e.view((0, n + m), (n, m)).into_owned() / dt,
        })
    }
}

/// `x[k+1] = phi x[k] + gamma0 u[k] + gamma1 (u[k+1] - u[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Foh {
    pub phi: DMatrix<f64>,
    pub gamma0: DMatrix<f64>,
    pub gamma1: DMatrix<f64>,
}

impl Foh {
    pub fn step(&self, x: &DVector<f64>, u0: &DVector<f64>, u1: &DVector<f64>) -> DVector<f64> {
        &self.phi * x + &self.gamma0 * u0 + &self.gamma1 * (u1 - u0)
    }
}

/// A [`StateSpace`] driven by time-function inputs.
#[derive(Clone)]
pub struct LinearSystem {
    ss: StateSpace,
    inputs: Vec<Signal>,
    x0: DVector<f64>,
    rate: f64,
}

impl LinearSystem {
    pub fn new(ss: StateSpace, inputs: Vec<Signal>) -> Result<Self> {
        if inputs.len() != ss.inputs() {
            return Err(Error::Dimension {
                expected: ss.inputs(),
                got: inputs.len(),
            });
        }
        let x0 = DVector::zeros(ss.order());
        let rate = ss.spectral_radius();
        Ok(Self { ss, inputs, x0, rate })
    }

    pub fn with_initial_state(mut self, x0: &[f64]) -> Result<Self> {
        if x0.len() != self.ss.order() {
            return Err(Error::Dimension {
                expected: self.ss.order(),
                got: x0.len(),
            });
        }
        self.x0 = DVector::from_column_slice(x0);
        Ok(self)
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.ss
    }
}

impl System for LinearSystem {
    fn state_names(&self) -> Vec<String> {
        (0..self.ss.order()).map(|i| format!("x{i}")).collect()
    }

    fn output_names(&self) -> Vec<String> {
        (0..self.ss.outputs()).map(|i| format!("y{i}")).collect()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.iter().cloned().collect()
    }

    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let n = self.ss.order();
        for (i, d) in dx.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.ss.a[(i, j)] * x[j];
            }
            for (k, u) in self.inputs.iter().enumerate() {
                acc += self.ss.b[(i, k)] * u(t);
            }
            *d = acc;
        }
    }

    fn outputs(&self, t: f64, x: &[f64], y: &mut [f64]) {
        let n = self.ss.order();
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.ss.c[(i, j)] * x[j];
            }
            for (k, u) in self.inputs.iter().enumerate() {
                acc += self.ss.d[(i, k)] * u(t);
            }
            *out = acc;
        }
    }

    fn fastest_rate(&self) -> Option<f64> {
        Some(self.rate)
    }
}
