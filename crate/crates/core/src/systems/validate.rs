use super::SystemDef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Largest mismatches observed over random probes.
#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct ValidationReport {
    pub probes: usize,
    /// `|jvp(x,v) - (f(x+hv) - f(x))/h|`, forward difference with `h = 1e-5`.
    pub jvp_fd: f64,
    /// `|⟨w, jvp(x,v)⟩ - ⟨vjp(x,w), v⟩|`.
    pub duality: f64,
    /// `|hvp(x,y,z) - hvp(x,z,y)|`.
    pub hessian_symmetry: f64,
    /// `|hvp(x,y,z) - (jvp(x+hy,z) - jvp(x-hy,z))/2h|`.
    pub hessian_fd: f64,
    /// `|dpert(x,v) - (X(x+hv) - X(x))/h|`.
    pub dpert_fd: f64,
    /// `|X(f(x)) - (map(x,γ) - map(x,0))/γ|`, `γ = 1e-6`.
    pub pert_fd: f64,
}

impl ValidationReport {
    /// Exact identities only (duality and Hessian symmetry).
    pub fn exact_defect(&self) -> f64 {
        self.duality.max(self.hessian_symmetry)
    }
}

fn random_point(sys: &SystemDef, rng: &mut ChaCha8Rng, x: &mut [f64]) {
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = if sys.is_periodic(i) {
            rng.gen::<f64>()
        } else {
            rng.gen_range(-0.5..0.5)
        };
    }
}

fn random_unit(rng: &mut ChaCha8Rng, v: &mut [f64]) {
    for vi in v.iter_mut() {
        *vi = rng.gen_range(-1.0..1.0);
    }
    let n = crate::linalg::norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Probes the derivative products of `sys` against each other and against
/// finite differences of the map.
pub fn validate_system(sys: &SystemDef, n_probe: usize, seed: u64) -> ValidationReport {
    let m = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ValidationReport {
        probes: n_probe,
        ..Default::default()
    };
    let (mut x, mut v, mut w, mut y) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let (mut a, mut b, mut c, mut d) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let h = 1e-5;
    for _ in 0..n_probe {
        random_point(sys, &mut rng, &mut x);
        random_unit(&mut rng, &mut v);
        random_unit(&mut rng, &mut w);
        random_unit(&mut rng, &mut y);

        // jvp vs forward difference of the base map
        sys.jvp(&x, &v, &mut a);
        let xp: Vec<f64> = x.iter().zip(&v).map(|(p, q)| p + h * q).collect();
        sys.step(&x, 0.0, &mut b);
        sys.step(&xp, 0.0, &mut c);
        sys.displacement(&b, &c, &mut d);
        d.iter_mut().for_each(|t| *t /= h);
        rep.jvp_fd = rep.jvp_fd.max(max_abs_diff(&a, &d));

        // duality
        sys.vjp(&x, &w, &mut b);
        let lhs = crate::linalg::dot(&w, &a);
        let rhs = crate::linalg::dot(&b, &v);
        rep.duality = rep.duality.max((lhs - rhs).abs());

        // Hessian symmetry and central difference of jvp
        sys.hvp(&x, &y, &v, &mut a);
        sys.hvp(&x, &v, &y, &mut b);
        rep.hessian_symmetry = rep.hessian_symmetry.max(max_abs_diff(&a, &b));
        let xp: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + h * q).collect();
        let xm: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - h * q).collect();
        sys.jvp(&xp, &v, &mut c);
        sys.jvp(&xm, &v, &mut d);
        for i in 0..m {
            d[i] = (c[i] - d[i]) / (2.0 * h);
        }
        rep.hessian_fd = rep.hessian_fd.max(max_abs_diff(&a, &d));

        // dpert vs forward difference of pert
        sys.dpert(&x, &v, &mut a);
        let xp: Vec<f64> = x.iter().zip(&v).map(|(p, q)| p + h * q).collect();
        sys.pert(&x, &mut b);
        sys.pert(&xp, &mut c);
        for i in 0..m {
            d[i] = (c[i] - b[i]) / h;
        }
        rep.dpert_fd = rep.dpert_fd.max(max_abs_diff(&a, &d));

        // pert vs derivative of the family in γ
        let g = 1e-6;
        sys.step(&x, 0.0, &mut b);
        sys.step(&x, g, &mut c);
        sys.displacement(&b, &c, &mut d);
        d.iter_mut().for_each(|t| *t /= g);
        sys.pert(&b, &mut a);
        rep.pert_fd = rep.pert_fd.max(max_abs_diff(&a, &d));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_builtin, BUILTIN_NAMES};
    use std::collections::BTreeMap;

    #[test]
    fn catmap_duality_is_exact() {
        let sys = make_builtin("catmap", &BTreeMap::new()).unwrap();
        let rep = validate_system(&sys, 200, 3);
        assert!(rep.duality < 1e-14, "{rep:?}");
    }

    #[test]
    fn sawtooth_jvp_fd_is_first_order() {
        // Forward difference error ≈ h/2 |f''| ≤ 0.5e-5 · 4π²·0.05.
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), 0.05);
        let sys = make_builtin("sawtooth", &p).unwrap();
        let rep = validate_system(&sys, 100, 11);
        let bound = 0.5e-5 * 4.0 * std::f64::consts::PI.powi(2) * 0.05;
        assert!(rep.jvp_fd <= bound * 1.01 + 1e-9, "{rep:?}");
        assert!(
            rep.jvp_fd > 1e-9,
            "mismatch should be O(h), got {}",
            rep.jvp_fd
        );
    }

    #[test]
    fn all_builtins_pass() {
        for name in BUILTIN_NAMES {
            let sys = make_builtin(name, &BTreeMap::new()).unwrap();
            let rep = validate_system(&sys, 1000, 5);
            assert!(rep.exact_defect() < 1e-10, "{name}: {rep:?}");
            assert!(rep.hessian_symmetry < 1e-12, "{name}: {rep:?}");
            assert!(rep.jvp_fd < 1e-3, "{name}: {rep:?}");
            assert!(rep.hessian_fd < 1e-4, "{name}: {rep:?}");
            assert!(rep.dpert_fd < 1e-3, "{name}: {rep:?}");
            assert!(rep.pert_fd < 1e-4, "{name}: {rep:?}");
        }
    }
}
