//! Central finite-difference verification of analytic gradients.

use std::collections::BTreeMap;

use super::{Gradients, ParamSet, Real};

/// Central-difference formula used for the numeric derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(θ+h) − f(θ−h)) / 2h`, error O(h²).
    ThreePoint,
    /// `(−f(θ+2h) + 8f(θ+h) − 8f(θ−h) + f(θ−2h)) / 12h`, error O(h⁴).
    FivePoint,
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub stencil: Stencil,
    pub tolerance: f64,
    /// Check at most this many evenly spaced elements per parameter.
    pub max_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-4,
            stencil: Stencil::ThreePoint,
            tolerance: 1e-5,
            max_per_param: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.rel_error <= self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }

    /// Worst element-wise relative error per parameter name.
    pub fn per_param(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            let worst = out.entry(e.param.clone()).or_insert(0.0f64);
            *worst = worst.max(e.rel_error);
        }
        out
    }

    /// Relative error of each parameter tensor in the L2 norm,
    /// `‖a − n‖ / max(‖a‖, ‖n‖)`. Less sensitive than the element-wise
    /// measure to rounding in elements whose gradient is close to zero.
    pub fn per_param_norm(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<&str, [f64; 3]> = BTreeMap::new();
        for e in &self.entries {
            let s = sums.entry(&e.param).or_insert([0.0; 3]);
            s[0] += (e.analytic - e.numeric).powi(2);
            s[1] += e.analytic * e.analytic;
            s[2] += e.numeric * e.numeric;
        }
        sums.into_iter()
            .map(|(name, [diff, a, n])| (name.to_owned(), relative_error_norms(diff.sqrt(), a.sqrt(), n.sqrt())))
            .collect()
    }

    pub fn failing_params(&self) -> Vec<String> {
        self.per_param()
            .into_iter()
            .filter(|(_, err)| *err > self.tolerance)
            .map(|(name, _)| name)
            .collect()
    }
}

fn relative_error_norms(diff: f64, analytic: f64, numeric: f64) -> f64 {
    diff / analytic.max(numeric).max(1e-8)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_norms((analytic - numeric).abs(), analytic.abs(), numeric.abs())
}

/// Compare `analytic` against `(loss(θ + h) - loss(θ - h)) / 2h` element by
/// element. `loss` must be deterministic (fixed dropout masks, fixed seed).
pub fn finite_diff_check<T, E, F>(
    params: &mut ParamSet<T>,
    analytic: &Gradients<T>,
    mut loss: F,
    options: GradCheckOptions,
) -> Result<GradCheckReport, E>
where
    T: Real,
    F: FnMut(&ParamSet<T>) -> Result<T, E>,
{
    let mut entries = Vec::new();
    let h = options.step;
    let ids: Vec<_> = (0..params.len()).map(super::ParamId).collect();

    for id in ids {
        let len = params.get(id).value.len();
        let stride = match options.max_per_param {
            Some(max) if max > 0 && len > max => len.div_ceil(max),
            _ => 1,
        };
        for index in (0..len).step_by(stride) {
            let original = params.get(id).value.data()[index];
            let mut at = |offset: f64| -> Result<f64, E> {
                params.get_mut(id).value.data_mut()[index] = original + T::of(offset);
                loss(params).map(|v| v.as_f64())
            };
            let numeric = match options.stencil {
                Stencil::ThreePoint => (at(h)? - at(-h)?) / (2.0 * h),
                Stencil::FivePoint => (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h),
            };
            params.get_mut(id).value.data_mut()[index] = original;

            let analytic = analytic.get(id).data()[index].as_f64();
            entries.push(GradCheckEntry {
                param: params.get(id).name.clone(),
                index,
                analytic,
                numeric,
                rel_error: relative_error(analytic, numeric),
            });
        }
    }
    Ok(GradCheckReport {
        entries,
        tolerance: options.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Graph, Tensor, TensorError};

    fn two_layer() -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        ps.add("w1", Tensor::matrix(3, 2, vec![0.3, -0.1, 0.2, 0.5, -0.4, 0.25]).unwrap())
            .unwrap();
        ps.add("b1", Tensor::matrix(1, 3, vec![0.01, -0.02, 0.03]).unwrap()).unwrap();
        ps.add("w2", Tensor::matrix(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap())
            .unwrap();
        ps
    }

    fn forward(ps: &ParamSet<f64>) -> Result<(f64, Gradients<f64>), TensorError> {
        let mut g = Graph::new(ps);
        let x = g.constant_matrix(2, 2, vec![0.5, -1.0, 1.5, 0.25])?;
        let (w1, b1, w2) = (
            g.param(ps.id("w1").unwrap()),
            g.param(ps.id("b1").unwrap()),
            g.param(ps.id("w2").unwrap()),
        );
        let h = g.linear(x, w1, b1)?;
        let h = g.tanh(h)?;
        let gate = g.sigmoid(h)?;
        let h = g.mul(h, gate)?;
        let logits = g.matmul_nt(h, w2)?;
        let probs = g.softmax(logits)?;
        let loss = g.cross_entropy(probs, &[1, 3], &[0.5, 0.5])?;
        Ok((g.scalar(loss), g.backward(loss)?))
    }

    #[test]
    fn small_network_matches_finite_differences() {
        let mut ps = two_layer();
        let (_, grads) = forward(&ps).unwrap();
        let report = finite_diff_check(&mut ps, &grads, |p| forward(p).map(|r| r.0), GradCheckOptions::default())
            .unwrap();
        assert!(report.passed(), "max error {}", report.max_rel_error());
        assert_eq!(report.entries.len(), 6 + 3 + 12);
    }

    #[test]
    fn five_point_stencil_tolerates_larger_steps() {
        let mut ps = two_layer();
        let (_, grads) = forward(&ps).unwrap();
        let wide = |stencil| GradCheckOptions {
            step: 1e-2,
            stencil,
            ..GradCheckOptions::default()
        };
        let five = finite_diff_check(&mut ps, &grads, |p| forward(p).map(|r| r.0), wide(Stencil::FivePoint)).unwrap();
        let three = finite_diff_check(&mut ps, &grads, |p| forward(p).map(|r| r.0), wide(Stencil::ThreePoint)).unwrap();
        assert!(five.passed(), "max error {}", five.max_rel_error());
        assert!(five.max_rel_error() < three.max_rel_error());
    }

    #[test]
    fn zero_parameter_model_passes_vacuously() {
        let mut ps = ParamSet::<f64>::new();
        let grads = Gradients::zeros_like(&ps);
        let report =
            finite_diff_check(&mut ps, &grads, |_| Ok::<_, ()>(1.0), GradCheckOptions::default()).unwrap();
        assert!(report.entries.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut ps = two_layer();
        let (_, mut grads) = forward(&ps).unwrap();
        let b1 = ps.id("b1").unwrap();
        for v in grads.get_mut(b1).data_mut() {
            *v *= 1.1;
        }
        let report = finite_diff_check(&mut ps, &grads, |p| forward(p).map(|r| r.0), GradCheckOptions::default())
            .unwrap();
        assert_eq!(report.failing_params(), vec!["b1".to_string()]);
    }
}
