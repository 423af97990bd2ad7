//! Harmonic and time-sample representations of real `T`-periodic fields.
//!
//! A [`HarmonicField`] stores the one-sided coefficients `û_0, …, û_M` of
//!
//! ```text
//! u(t, x) = û_0(x) + Σ_{m=1..M} 2·Re(û_m(x)·e^{imωt}),
//! ```
//!
//! so reconstruction is real by construction. A [`TimeField`] holds samples
//! at `t_k = kT/N_t`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicField {
    coeffs: Vec<Vec<C64>>,
}

impl HarmonicField {
    pub fn zeros(harmonics: usize, nx: usize) -> Self {
        Self { coeffs: vec![vec![C64::new(0.0, 0.0); nx]; harmonics + 1] }
    }

    /// Builds a field from `M + 1` coefficient vectors of equal length.
    ///
    /// The mean mode must be real; imaginary parts below `1e-12` of the
    /// field magnitude are dropped.
    pub fn from_coeffs(mut coeffs: Vec<Vec<C64>>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::ShapeMismatch("harmonic field needs at least the mean mode".into()));
        };
        let nx = first.len();
        if coeffs.iter().any(|c| c.len() != nx) {
            return Err(Error::ShapeMismatch("harmonic coefficient vectors differ in length".into()));
        }
        let scale = coeffs.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        let worst_imag = coeffs[0].iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if worst_imag > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "mean mode must be real, found imaginary part {worst_imag:e}"
            )));
        }
        coeffs[0].iter_mut().for_each(|z| z.im = 0.0);
        Ok(Self { coeffs })
    }

    /// Field with a single nonzero harmonic `m`, set to `profile`.
    pub fn single(harmonics: usize, m: usize, profile: &[C64]) -> Result<Self> {
        if m > harmonics {
            return Err(Error::InvalidArgument(format!("harmonic {m} exceeds order {harmonics}")));
        }
        let mut f = Self::zeros(harmonics, profile.len());
        f.coeffs[m].copy_from_slice(profile);
        if m == 0 {
            f.coeffs[0].iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(f)
    }

    pub fn harmonics(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn nx(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn coeff(&self, m: usize) -> &[C64] {
        &self.coeffs[m]
    }

    pub fn coeff_mut(&mut self, m: usize) -> &mut [C64] {
        &mut self.coeffs[m]
    }

    pub fn coeffs(&self) -> &[Vec<C64>] {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[C64])> {
        self.coeffs.iter().enumerate().map(|(m, c)| (m, c.as_slice()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.harmonics(), other.harmonics(), "harmonic order mismatch");
        assert_eq!(self.nx(), other.nx(), "node count mismatch");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().flatten().zip(other.coeffs.iter().flatten()) {
            *a += b * s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// `k`-th time derivative: harmonic `m` is multiplied by `(imω)^k`.
    pub fn time_derivative(&self, omega: f64, k: u32) -> Self {
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut().enumerate() {
            let factor = C64::new(0.0, m as f64 * omega).powu(k);
            c.iter_mut().for_each(|z| *z *= factor);
        }
        out
    }

    /// Applies a linear spatial map to every harmonic.
    pub fn map_spatial(&self, f: impl Fn(&[C64]) -> Vec<C64>) -> Self {
        let coeffs: Vec<Vec<C64>> = self.coeffs.iter().map(|c| f(c)).collect();
        let mut out = Self { coeffs };
        out.coeffs[0].iter_mut().for_each(|z| z.im = 0.0);
        out
    }

    /// Truncates or zero-pads to order `harmonics`.
    pub fn resized(&self, harmonics: usize) -> Self {
        let nx = self.nx();
        let mut coeffs: Vec<Vec<C64>> = self.coeffs.iter().take(harmonics + 1).cloned().collect();
        coeffs.resize(harmonics + 1, vec![C64::new(0.0, 0.0); nx]);
        Self { coeffs }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Evaluates the real reconstruction at time `t` for all nodes.
    pub fn evaluate(&self, omega: f64, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.coeffs[0].iter().map(|z| z.re).collect();
        for (m, c) in self.coeffs.iter().enumerate().skip(1) {
            let phase = C64::from_polar(1.0, m as f64 * omega * t);
            for (o, z) in out.iter_mut().zip(c) {
                *o += 2.0 * (z * phase).re;
            }
        }
        out
    }

    /// Coefficient vectors restricted to the node indices in `dofs`.
    pub fn restrict(&self, dofs: &[usize]) -> Vec<Vec<C64>> {
        self.coeffs.iter().map(|c| dofs.iter().map(|&j| c[j]).collect()).collect()
    }

    /// Scatters reduced coefficient vectors into a zero field of `nx` nodes.
    pub fn from_reduced(reduced: Vec<Vec<C64>>, dofs: &[usize], nx: usize) -> Self {
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); nx]; reduced.len()];
        for (full, red) in coeffs.iter_mut().zip(&reduced) {
            for (&j, z) in dofs.iter().zip(red) {
                full[j] = *z;
            }
        }
        coeffs[0].iter_mut().for_each(|z| z.im = 0.0);
        Self { coeffs }
    }
}

/// Uniform time samples over one period, `values[k][j] = u(t_k, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    values: Vec<Vec<f64>>,
}

impl TimeField {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ShapeMismatch("time field needs at least one sample".into()));
        }
        let nx = values[0].len();
        if values.iter().any(|v| v.len() != nx) {
            return Err(Error::ShapeMismatch("time samples differ in length".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(nt: usize, nx: usize) -> Self {
        Self { values: vec![vec![0.0; nx]; nt] }
    }

    pub fn nt(&self) -> usize {
        self.values.len()
    }

    pub fn nx(&self) -> usize {
        self.values[0].len()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn sample_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Nodewise map over two fields with the same shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.nt(), self.nx()), (other.nt(), other.nx()), "time field shape mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Self { values }
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, x)| f(j, *x)).collect())
            .collect();
        Self { values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Smallest sample count that represents order `M` without loss.
pub fn min_samples(harmonics: usize) -> usize {
    2 * harmonics + 2
}

/// Sample count used for quadratic products: the smallest power of two `≥ 4M + 2`.
pub fn dealiased_samples(harmonics: usize) -> usize {
    (4 * harmonics + 2).next_power_of_two()
}

fn check_samples(nt: usize, harmonics: usize) -> Result<()> {
    let required = min_samples(harmonics);
    if nt < required {
        return Err(Error::UndersampledTime { nt, harmonics, required });
    }
    Ok(())
}

/// Synthesizes `u` on `nt` uniform samples per period.
pub fn to_time_samples(u: &HarmonicField, nt: usize) -> Result<TimeField> {
    let harmonics = u.harmonics();
    check_samples(nt, harmonics)?;
    let nx = u.nx();
    let fft = FftPlanner::new().plan_fft_inverse(nt);
    let mut values = vec![vec![0.0; nx]; nt];
    let mut buf = vec![C64::new(0.0, 0.0); nt];
    for j in 0..nx {
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        buf[0] = C64::new(u.coeffs[0][j].re, 0.0);
        for m in 1..=harmonics {
            let z = u.coeffs[m][j];
            buf[m] += z;
            buf[nt - m] += z.conj();
        }
        fft.process(&mut buf);
        for (k, row) in values.iter_mut().enumerate() {
            row[j] = buf[k].re;
        }
    }
    Ok(TimeField { values })
}

/// Order-`M` truncation of the discrete Fourier series of each node trace.
pub fn to_harmonics(v: &TimeField, harmonics: usize) -> Result<HarmonicField> {
    let nt = v.nt();
    check_samples(nt, harmonics)?;
    let nx = v.nx();
    let fft = FftPlanner::new().plan_fft_forward(nt);
    let mut out = HarmonicField::zeros(harmonics, nx);
    let mut buf = vec![C64::new(0.0, 0.0); nt];
    let scale = 1.0 / nt as f64;
    for j in 0..nx {
        for (k, z) in buf.iter_mut().enumerate() {
            *z = C64::new(v.values[k][j], 0.0);
        }
        fft.process(&mut buf);
        for m in 0..=harmonics {
            out.coeffs[m][j] = buf[m] * scale;
        }
        out.coeffs[0][j].im = 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_first_harmonic_is_twice_cosine() {
        let omega = 1.0;
        let mut u = HarmonicField::zeros(1, 3);
        u.coeff_mut(1)[1] = c(1.0, 0.0);
        let v = to_time_samples(&u, 8).unwrap();
        for k in 0..8 {
            let t = k as f64 * 2.0 * PI / 8.0;
            assert!((v.sample(k)[1] - 2.0 * (omega * t).cos()).abs() < 1e-14);
            assert_eq!(v.sample(k)[0], 0.0);
        }
    }

    #[test]
    fn mean_mode_is_constant() {
        let u = HarmonicField::single(2, 0, &[c(3.0, 0.0); 4]).unwrap();
        let v = to_time_samples(&u, 6).unwrap();
        assert!(v.values().iter().flatten().all(|x| (x - 3.0).abs() < 1e-14));
    }

    #[test]
    fn cosine_of_second_harmonic() {
        let nt = 16;
        let values = (0..nt).map(|k| vec![(2.0 * 2.0 * PI * k as f64 / nt as f64).cos()]).collect();
        let u = to_harmonics(&TimeField::new(values).unwrap(), 3).unwrap();
        for m in 0..=3 {
            let expected = if m == 2 { 0.5 } else { 0.0 };
            assert!((u.coeff(m)[0] - c(expected, 0.0)).norm() < 1e-14, "m = {m}");
        }
    }

    #[test]
    fn zero_samples_give_zero_field() {
        let u = to_harmonics(&TimeField::zeros(8, 5), 2).unwrap();
        assert!(u.is_zero());
    }

    #[test]
    fn product_is_dealiased_by_truncation() {
        // p = (a0 + 2Re(a1 e^{iθ}))(b0 + 2Re(b1 e^{iθ})), expanded by hand:
        // harmonic 0: a0 b0 + 2 Re(a1 conj(b1))
        // harmonic 1: a0 b1 + b0 a1
        let (a0, a1, b0, b1) = (0.3, c(0.2, -0.7), -1.1, c(0.5, 0.25));
        let ua = HarmonicField::from_coeffs(vec![vec![c(a0, 0.0)], vec![a1]]).unwrap();
        let ub = HarmonicField::from_coeffs(vec![vec![c(b0, 0.0)], vec![b1]]).unwrap();
        let sa = to_time_samples(&ua, 8).unwrap();
        let sb = to_time_samples(&ub, 8).unwrap();
        let p = to_harmonics(&sa.zip_map(&sb, |x, y| x * y), 1).unwrap();
        let h0 = a0 * b0 + 2.0 * (a1 * b1.conj()).re;
        let h1 = b1 * a0 + a1 * b0;
        assert!((p.coeff(0)[0] - c(h0, 0.0)).norm() < 1e-14);
        assert!((p.coeff(1)[0] - h1).norm() < 1e-14);
    }

    #[test]
    fn undersampling_is_rejected() {
        let u = HarmonicField::zeros(3, 2);
        assert!(matches!(to_time_samples(&u, 7), Err(Error::UndersampledTime { required: 8, .. })));
        assert!(matches!(to_harmonics(&TimeField::zeros(7, 2), 3), Err(Error::UndersampledTime { .. })));
    }

    #[test]
    fn dealiased_sample_counts() {
        assert_eq!(dealiased_samples(1), 8);
        assert_eq!(dealiased_samples(2), 16);
        assert_eq!(dealiased_samples(4), 32);
    }

    #[test]
    fn complex_mean_mode_rejected() {
        assert!(HarmonicField::from_coeffs(vec![vec![c(1.0, 0.5)]]).is_err());
    }

    fn field_strategy(harmonics: usize, nx: usize) -> impl Strategy<Value = HarmonicField> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), (harmonics + 1) * nx).prop_map(move |v| {
            let coeffs = (0..=harmonics)
                .map(|m| {
                    (0..nx)
                        .map(|j| {
                            let (re, im) = v[m * nx + j];
                            c(re, if m == 0 { 0.0 } else { im })
                        })
                        .collect()
                })
                .collect();
            HarmonicField::from_coeffs(coeffs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip_identity(u in field_strategy(4, 3), extra in 0usize..9) {
            let nt = min_samples(4) + extra;
            let back = to_harmonics(&to_time_samples(&u, nt).unwrap(), 4).unwrap();
            let scale = u.max_abs().max(1e-300);
            prop_assert!(back.sub(&u).max_abs() <= 1e-12 * scale);
        }

        #[test]
        fn reconstruction_matches_direct_formula(u in field_strategy(3, 2)) {
            let nt = 10;
            let v = to_time_samples(&u, nt).unwrap();
            for k in 0..nt {
                let t = k as f64 * 2.0 * PI / nt as f64;
                // complex synthesis over m = -M..M must be real
                for j in 0..2 {
                    let mut s = u.coeff(0)[j];
                    for m in 1..=3 {
                        let e = C64::from_polar(1.0, m as f64 * t);
                        s += u.coeff(m)[j] * e + u.coeff(m)[j].conj() * e.conj();
                    }
                    prop_assert!(s.im.abs() <= 1e-12 * u.max_abs());
                    prop_assert!((s.re - v.sample(k)[j]).abs() <= 1e-12 * (1.0 + u.max_abs()));
                }
                let direct = u.evaluate(1.0, t);
                for j in 0..2 {
                    prop_assert!((direct[j] - v.sample(k)[j]).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn transforms_are_linear(u in field_strategy(2, 3), w in field_strategy(2, 3), a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let combo = u.scaled(a).axpy(b, &w);
            let lhs = to_time_samples(&combo, 12).unwrap();
            let su = to_time_samples(&u, 12).unwrap();
            let sw = to_time_samples(&w, 12).unwrap();
            let rhs = su.zip_map(&sw, |x, y| a * x + b * y);
            prop_assert!(lhs.zip_map(&rhs, |x, y| x - y).max_abs() <= 1e-13);
            let back = to_harmonics(&rhs, 2).unwrap();
            let direct = to_harmonics(&su, 2).unwrap().scaled(a).axpy(b, &to_harmonics(&sw, 2).unwrap());
            prop_assert!(back.sub(&direct).max_abs() <= 1e-13);
        }
    }
}
