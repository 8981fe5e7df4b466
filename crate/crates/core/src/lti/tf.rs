use num_complex::Complex64;

use super::poly;
use super::ss::StateSpace;
use crate::error::{Error, Result};

/// Rational function of the Laplace variable, coefficients in descending powers.
///
/// Always stored with a monic denominator and leading zeros stripped. Values built
/// through [`TransferFunction::new`] are proper; motion-to-torque maps whose
/// numerator outranks the denominator are built through
/// [`TransferFunction::new_improper`] and refuse state-space realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    proper: bool,
}

impl TransferFunction {
    pub fn new(num: &[f64], den: &[f64]) -> Result<Self> {
        let tf = Self::normalized(num, den)?;
        if !tf.proper {
            return Err(Error::ImproperSystem {
                num_degree: tf.num_degree(),
                den_degree: tf.den_degree(),
            });
        }
        Ok(tf)
    }

    /// Like [`new`](Self::new) but accepts `deg(num) > deg(den)`.
    pub fn new_improper(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::normalized(num, den)
    }

    fn normalized(num: &[f64], den: &[f64]) -> Result<Self> {
        if den.is_empty() || poly::is_zero(den) {
            return Err(Error::InvalidSystem("denominator is identically zero".into()));
        }
        if num.iter().chain(den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidSystem("non-finite coefficient".into()));
        }
        let den = poly::trim(den);
        let num = if num.is_empty() { vec![0.0] } else { poly::trim(num) };
        let lead = den[0];
        let den: Vec<f64> = den.iter().map(|c| c / lead).collect();
        let num: Vec<f64> = num.iter().map(|c| c / lead).collect();
        let proper = num.len() <= den.len() || poly::is_zero(&num);
        Ok(Self { num, den, proper })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn is_proper(&self) -> bool {
        self.proper
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    /// Evaluate at an arbitrary complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly::eval(&self.num, s) / poly::eval(&self.den, s)
    }

    /// Frequency response `num(jw) / den(jw)`.
    pub fn freq_response_at(&self, omega: f64) -> Result<Complex64> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "omega must be finite and non-negative, got {omega}"
            )));
        }
        let s = Complex64::new(0.0, omega);
        let d = poly::eval(&self.den, s);
        let scale: f64 = self
            .den
            .iter()
            .rev()
            .enumerate()
            .map(|(k, c)| c.abs() * omega.powi(k as i32))
            .sum();
        if d.norm() <= f64::EPSILON * scale {
            return Err(Error::SingularEvaluation { omega });
        }
        Ok(poly::eval(&self.num, s) / d)
    }

    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.freq_response_at(0.0)?.re)
    }

    /// Denominator roots.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.den_degree() == 0 {
            return Err(Error::InvalidArgument(
                "transfer function has no poles (constant denominator)".into(),
            ));
        }
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if poly::is_zero(&self.num) {
            return Ok(Vec::new());
        }
        poly::roots(&self.num)
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| p.re < 0.0))
    }

    /// Controllable canonical realization.
    pub fn to_state_space(&self) -> Result<StateSpace> {
        if !self.proper {
            return Err(Error::ImproperSystem {
                num_degree: self.num_degree(),
                den_degree: self.den_degree(),
            });
        }
        StateSpace::from_tf(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_normalization() {
        let tf = TransferFunction::new(&[2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(tf.num(), &[1.0]);
        assert_eq!(tf.den(), &[1.0, 1.0]);
    }

    #[test]
    fn zero_denominator_is_invalid() {
        assert!(matches!(
            TransferFunction::new(&[1.0], &[0.0]),
            Err(Error::InvalidSystem(_))
        ));
    }

    #[test]
    fn improper_is_rejected() {
        assert!(matches!(
            TransferFunction::new(&[1.0, 1.0], &[1.0]),
            Err(Error::ImproperSystem { num_degree: 1, den_degree: 0 })
        ));
        let g = TransferFunction::new_improper(&[1.0, 1.0], &[1.0]).unwrap();
        assert!(!g.is_proper());
        assert!(matches!(g.to_state_space(), Err(Error::ImproperSystem { .. })));
    }

    #[test]
    fn leading_zeros_are_stripped() {
        let tf = TransferFunction::new(&[0.0, 0.0, 3.0], &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(tf.num(), &[3.0]);
        assert_eq!(tf.den(), &[1.0, 3.0]);
    }

    #[test]
    fn first_order_response() {
        let tf = TransferFunction::new(&[1.0], &[1.0, 1.0]).unwrap();
        let g = tf.freq_response_at(1.0).unwrap();
        assert!((g.re - 0.5).abs() < 1e-15 && (g.im + 0.5).abs() < 1e-15);
        assert!((g.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let g0 = tf.freq_response_at(0.0).unwrap();
        assert_eq!(g0, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn pole_on_axis_is_singular() {
        let tf = TransferFunction::new(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            tf.freq_response_at(1.0),
            Err(Error::SingularEvaluation { .. })
        ));
        assert!(tf.freq_response_at(2.0).is_ok());
        assert!(tf.freq_response_at(-1.0).is_err());
    }
}
