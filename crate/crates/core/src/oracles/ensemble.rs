//! Truncated ensemble formula `δρ̃(Φ) ≈ Σ_{m<H} ρ(dΦ_m · f_*^m X)`, whose
//! terms blow up like the unstable rate.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::orbit::OrbitData;
use crate::stats::{BatchAccumulator, Estimate};
use crate::systems::SystemDef;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    /// `ρ(dΦ(x_{n+m}) · f_*^m X(x_n))` per `m`.
    pub terms: Vec<Estimate>,
    pub partial_sums: Vec<f64>,
    /// Root-mean-square size of the sampled integrand per `m`.
    pub rms: Vec<f64>,
}

pub fn ensemble_response(
    sys: &SystemDef,
    orbit: &OrbitData,
    horizon: usize,
) -> Result<EnsembleReport> {
    if horizon == 0 || orbit.steps() < horizon + 2 {
        return Err(Error::Window(format!(
            "orbit of {} steps too short for horizon {horizon}",
            orbit.steps()
        )));
    }
    let m = sys.dim();
    let count = orbit.steps() + 1 - horizon;
    let mut accs: Vec<BatchAccumulator> =
        (0..horizon).map(|_| BatchAccumulator::new(count)).collect();
    let mut sq = vec![0.0; horizon];
    let mut v = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut grad = vec![0.0; m];
    for n in 0..count {
        sys.pert(orbit.point(n), &mut v);
        for (k, acc) in accs.iter_mut().enumerate() {
            let x = orbit.point(n + k);
            sys.dobs(x, &mut grad);
            let term = dot(&grad, &v);
            acc.push(term);
            sq[k] += term * term;
            if k + 1 < horizon {
                sys.jvp(x, &v, &mut tmp);
                v.copy_from_slice(&tmp);
            }
        }
    }
    let terms: Vec<Estimate> = accs.iter().map(|a| a.finish()).collect();
    let partial_sums = terms
        .iter()
        .scan(0.0, |s, t| {
            *s += t.value;
            Some(*s)
        })
        .collect();
    let rms = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
    Ok(EnsembleReport {
        terms,
        partial_sums,
        rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::orbit::{generate_orbit, OrbitStart};
    use crate::systems::make_builtin;
    use std::collections::BTreeMap;

    #[test]
    fn zero_field_gives_zero_terms() {
        let sys = make_builtin("catmap", &BTreeMap::new())
            .unwrap()
            .with_perturbation(VectorField::zero(2));
        let o = generate_orbit(&sys, OrbitStart::Seed(1), 100, 1000).unwrap();
        let r = ensemble_response(&sys, &o, 5).unwrap();
        assert!(r.terms.iter().all(|t| t.value == 0.0));
    }

    #[test]
    fn catmap_terms_grow_at_unstable_rate() {
        let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
        let o = generate_orbit(&sys, OrbitStart::Seed(1), 100, 20_000).unwrap();
        let r = ensemble_response(&sys, &o, 12).unwrap();
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        let ratio = r.rms[11] / r.rms[10];
        assert!((ratio - lu).abs() < 0.05 * lu, "{ratio}");
    }

    #[test]
    fn doubling_translation_sums_vanish() {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), 0.0);
        let sys = make_builtin("sawtooth", &p).unwrap();
        let o = generate_orbit(&sys, OrbitStart::Seed(1), 100, 100_000).unwrap();
        let r = ensemble_response(&sys, &o, 6).unwrap();
        assert!(r.terms[0].value.abs() < 3.0 * r.terms[0].stderr + 1e-12);
        for (s, t) in r.partial_sums.iter().zip(&r.terms) {
            assert!(s.abs() < 3.0 * t.stderr * 2.0, "{s} {t:?}");
        }
    }
}
