use approx::assert_relative_eq;
use tclab_core::classifier::{classify_boundary, Verdict};
use tclab_core::fluctuation::{cramer_theta, scale_function_w};
use tclab_core::levy::{JumpLaw, LevyModel};
use tclab_core::parse_rate;

#[test]
fn phi_closed_forms() {
    let r = parse_rate("max(1,x)^2").unwrap();
    assert_relative_eq!(r.phi(-2.0f64).unwrap(), 4.0, max_relative = 1e-9);
    assert_relative_eq!(r.phi(4.0f64).unwrap(), 0.25, max_relative = 1e-9);
    let r = parse_rate("exp(x)").unwrap();
    assert_relative_eq!(r.phi(-3.0f64).unwrap(), 3f64.exp(), max_relative = 1e-9);
    assert_relative_eq!(r.phi(2.0f32).unwrap(), (-2f32).exp(), max_relative = 1e-5);
    assert!(parse_rate("1 + x^2").is_err());
    assert!(parse_rate("max(1,x)").unwrap().phi(1.0f64).unwrap().is_infinite());
}

#[test]
fn cramer_roots() {
    // ψ(θ) = -aθ + s2 θ²/2
    let root = cramer_theta(&LevyModel::brownian(1.0, 4.0).unwrap()).root.unwrap();
    assert_relative_eq!(root, 0.5, max_relative = 1e-9);
    // ψ(θ) = -3θ + 2(1/(1-θ) - 1) vanishes at θ = 1/3
    let m = LevyModel::compound_poisson(3.0, 2.0, JumpLaw::ExponentialDown { mean: 1.0 }).unwrap();
    assert_relative_eq!(m.laplace_exponent(0.5), 0.5, epsilon = 1e-12);
    assert_relative_eq!(cramer_theta(&m).root.unwrap(), 1.0 / 3.0, max_relative = 1e-8);
    assert!(cramer_theta(&LevyModel::brownian(-1.0, 1.0).unwrap()).root.is_none());
}

#[test]
fn brownian_scale_function() {
    // W(x) = (1 - e^{-2|a|x/s2}) / |a| for drift a < 0
    let m = LevyModel::brownian(-1.0, 2.0).unwrap();
    for x in [0.5, 1.0, 3.0] {
        assert_relative_eq!(scale_function_w(&m, x).unwrap(), 1.0 - (-x).exp(), max_relative = 1e-6);
    }
}

#[test]
fn classifier_examples() {
    let rep = classify_boundary(&LevyModel::brownian(1.0, 4.0).unwrap(), &parse_rate("exp(x)").unwrap());
    assert_eq!(rep.verdict, Verdict::RegularContinuous { theta: 0.5 });
    let rep = classify_boundary(&LevyModel::brownian(-1.0, 1.0).unwrap(), &parse_rate("max(1,x)^2").unwrap());
    assert_eq!(rep.verdict, Verdict::Entrance);
}
