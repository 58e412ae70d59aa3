use crate::measures::{DiscreteAtoms, EmpiricalSample, MeasureModel};

/// A function `u` on `R^d` exposed through its heat smoothings: `eval(x, t)`
/// returns `u * Φ_t(x)`. Any regularization `ε` is already folded into `u`.
pub trait Field: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], t: f64) -> f64;

    /// Box holding the mass of `u` up to a relative tail `tail_tol`, before
    /// the extra spreading by `Φ_t`.
    fn support_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>);

    /// Standard deviation of the widest Gaussian spreading applied to the
    /// support box at time `t`.
    fn spread(&self, t: f64) -> f64;

    /// Smallest spatial feature scale of `u * Φ_t`.
    fn width(&self, t: f64) -> f64;

    /// A probability model whose smoothings roughly cover the mass of `u`;
    /// used to draw Monte Carlo nodes.
    fn reference_model(&self) -> Option<(&MeasureModel, f64)> {
        None
    }

    /// Radius `R(t)` outside which `|u * Φ_t| < tail_tol` relative to its peak.
    fn support_radius(&self, t: f64, tail_tol: f64) -> f64 {
        let (lo, hi) = self.support_box(tail_tol);
        let corner: f64 = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        corner + tail_factor(tail_tol) * self.spread(t)
    }
}

/// `k` with `exp(-k²/2) = tail_tol`.
pub(crate) fn tail_factor(tail_tol: f64) -> f64 {
    (2.0 * (1.0 / tail_tol).ln()).sqrt()
}

/// `μ * Φ_ε` for an analytic model.
#[derive(Clone, Debug)]
pub struct ModelField {
    model: MeasureModel,
    eps: f64,
}

impl ModelField {
    pub fn new(model: MeasureModel, eps: f64) -> Self {
        ModelField { model, eps }
    }

    /// `Φ_ε` itself: the smoothed point mass at the origin.
    pub fn heat(dim: usize, eps: f64) -> Self {
        ModelField { model: MeasureModel::dirac(dim), eps }
    }

    pub fn model(&self) -> &MeasureModel {
        &self.model
    }
}

impl Field for ModelField {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.model.density_unchecked(t + self.eps, x)
    }
    fn support_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        self.model.mass_box(tail_tol)
    }
    fn spread(&self, t: f64) -> f64 {
        (2.0 * (t + self.eps)).sqrt()
    }
    fn width(&self, t: f64) -> f64 {
        (self.model.min_feature_variance() + 2.0 * (t + self.eps)).sqrt()
    }
    fn reference_model(&self) -> Option<(&MeasureModel, f64)> {
        Some((&self.model, self.eps))
    }
}

/// The fluctuation field `S_N = (μ_N - μ) * Φ_ε`.
#[derive(Clone, Debug)]
pub struct EmpiricalField {
    atoms: DiscreteAtoms,
    model: MeasureModel,
    eps: f64,
    sample_box: (Vec<f64>, Vec<f64>),
}

impl EmpiricalField {
    pub fn new(sample: &EmpiricalSample, model: MeasureModel, eps: f64) -> Self {
        Self::from_atoms(sample.empirical_measure(), model, eps)
    }

    pub fn from_atoms(atoms: DiscreteAtoms, model: MeasureModel, eps: f64) -> Self {
        let sample_box = MeasureModel::from_atoms(atoms.clone()).mass_box(1.0);
        EmpiricalField { atoms, model, eps, sample_box }
    }

    pub fn atoms(&self) -> &DiscreteAtoms {
        &self.atoms
    }
}

/// `S_N` for a sample drawn from `model`, regularized at `eps`.
pub fn s_n_field(sample: &EmpiricalSample, model: &MeasureModel, eps: f64) -> EmpiricalField {
    EmpiricalField::new(sample, model.clone(), eps)
}

impl Field for EmpiricalField {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let s = t + self.eps;
        self.atoms.heat_sum(s, x) - self.model.density_unchecked(s, x)
    }
    fn support_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = self.model.mass_box(tail_tol);
        for j in 0..lo.len() {
            lo[j] = lo[j].min(self.sample_box.0[j]);
            hi[j] = hi[j].max(self.sample_box.1[j]);
        }
        (lo, hi)
    }
    fn spread(&self, t: f64) -> f64 {
        (2.0 * (t + self.eps)).sqrt()
    }
    fn width(&self, t: f64) -> f64 {
        (2.0 * (t + self.eps)).sqrt()
    }
    fn reference_model(&self) -> Option<(&MeasureModel, f64)> {
        Some((&self.model, self.eps))
    }
}

/// `c · u`.
#[derive(Clone, Debug)]
pub struct Scaled<F>(pub f64, pub F);

impl<F: Field> Field for Scaled<F> {
    fn dim(&self) -> usize {
        self.1.dim()
    }
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.0 * self.1.eval(x, t)
    }
    fn support_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        self.1.support_box(tail_tol)
    }
    fn spread(&self, t: f64) -> f64 {
        self.1.spread(t)
    }
    fn width(&self, t: f64) -> f64 {
        self.1.width(t)
    }
    fn reference_model(&self) -> Option<(&MeasureModel, f64)> {
        self.1.reference_model()
    }
}

/// `u + v`.
#[derive(Clone, Debug)]
pub struct Sum<A, B>(pub A, pub B);

impl<A: Field, B: Field> Field for Sum<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.0.eval(x, t) + self.1.eval(x, t)
    }
    fn support_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = self.0.support_box(tail_tol);
        let (lo1, hi1) = self.1.support_box(tail_tol);
        for j in 0..lo.len() {
            lo[j] = lo[j].min(lo1[j]);
            hi[j] = hi[j].max(hi1[j]);
        }
        (lo, hi)
    }
    fn spread(&self, t: f64) -> f64 {
        self.0.spread(t).max(self.1.spread(t))
    }
    fn width(&self, t: f64) -> f64 {
        self.0.width(t).min(self.1.width(t))
    }
    fn reference_model(&self) -> Option<(&MeasureModel, f64)> {
        self.0.reference_model().or_else(|| self.1.reference_model())
    }
}

/// The zero function.
#[derive(Clone, Copy, Debug)]
pub struct ZeroField(pub usize);

impl Field for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
    fn support_box(&self, _tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.0], vec![0.0; self.0])
    }
    fn spread(&self, _t: f64) -> f64 {
        1.0
    }
    fn width(&self, _t: f64) -> f64 {
        1.0
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        (**self).eval(x, t)
    }
    fn support_box(&self, tail_tol: f64) -> (Vec<f64>, Vec<f64>) {
        (**self).support_box(tail_tol)
    }
    fn spread(&self, t: f64) -> f64 {
        (**self).spread(t)
    }
    fn width(&self, t: f64) -> f64 {
        (**self).width(t)
    }
    fn reference_model(&self) -> Option<(&MeasureModel, f64)> {
        (**self).reference_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::heat_kernel;

    #[test]
    fn point_mass_field_vanishes() {
        let model = MeasureModel::dirac(1);
        let sample = model.sample(20, 1).unwrap();
        let s = s_n_field(&sample, &model, 0.0);
        for x in [-1.0, 0.0, 0.3, 2.0] {
            for t in [1e-6, 0.1, 1.0] {
                assert_eq!(s.eval(&[x], t), 0.0);
            }
        }
    }

    #[test]
    fn single_sample_two_term_oracle() {
        let model = MeasureModel::gaussian(vec![0.0], 1.0).unwrap();
        let sample = model.sample(1, 9).unwrap();
        let a = sample.point(0)[0];
        let eps = 0.05;
        let s = s_n_field(&sample, &model, eps);
        for x in [-1.0, 0.0, a, 1.5] {
            let t = 0.2;
            let direct = heat_kernel(&[x - a], t + eps).unwrap()
                - (2.0 * std::f64::consts::PI * (1.0 + 2.0 * (t + eps))).powf(-0.5)
                    * (-x * x / (2.0 * (1.0 + 2.0 * (t + eps)))).exp();
            assert!((s.eval(&[x], t) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn fluctuation_field_has_zero_mass() {
        let model = MeasureModel::gaussian(vec![0.5, -0.5], 0.7).unwrap();
        let sample = model.sample(40, 3).unwrap();
        let s = s_n_field(&sample, &model, 0.01);
        let t = 0.05;
        let (lo, hi) = s.support_box(1e-14);
        let r = tail_factor(1e-14) * s.spread(t);
        let h = s.width(t) / 4.0;
        let nx = ((hi[0] - lo[0] + 2.0 * r) / h) as usize + 1;
        let ny = ((hi[1] - lo[1] + 2.0 * r) / h) as usize + 1;
        let mut total = 0.0;
        let mut abs_total = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                let x = [lo[0] - r + i as f64 * h, lo[1] - r + j as f64 * h];
                let v = s.eval(&x, t);
                total += v;
                abs_total += v.abs();
            }
        }
        total *= h * h;
        abs_total *= h * h;
        assert!(abs_total > 0.1);
        assert!(total.abs() < 1e-6, "{total}");
    }
}
