//! Named initial data used by the experiments.

use crate::error::{Error, Result};
use crate::initial::InitialCondition;
use crate::scalar::{lit, Real};
use crate::vector::Vector;

/// A catalog entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixture<T> {
    pub name: &'static str,
    pub description: &'static str,
    pub ic: InitialCondition<T>,
}

/// Names accepted by [`fixture`].
pub const FIXTURE_NAMES: [&str; 9] = [
    "zero",
    "linear",
    "neg-abs",
    "neg-abs-tilted",
    "neg-power",
    "cosine",
    "cosine-2d",
    "neg-abs-planar",
    "min-affine-3",
];

pub fn fixture<T: Real>(name: &str) -> Result<Fixture<T>> {
    let v2 = |a: f64, b: f64| Vector::<T>::from_f64(&[a, b]);
    let (description, ic) = match name {
        "zero" => ("phi0 = 0 in 1D", InitialCondition::Zero { dim: 1 }),
        "linear" => {
            ("phi0 = 0.5 y in 1D", InitialCondition::Affine { slope: Vector::scalar(lit(0.5)), offset: T::zero() })
        }
        "neg-abs" => {
            ("phi0 = -|y|: standing shock at the origin", InitialCondition::NegAbs { dim: 1, tilt: T::zero() })
        }
        "neg-abs-tilted" => (
            "phi0 = -|y| + 0.2 y: shock moving with speed 0.2 under quadratic H",
            InitialCondition::NegAbs { dim: 1, tilt: lit(0.2) },
        ),
        "neg-power" => ("phi0 = -(4/3)|y|^(3/2): preshock at t = 0", InitialCondition::NegPower { dim: 1 }),
        "cosine" => ("phi0 = cos y: shocks form at t = 1", InitialCondition::Cosine { dim: 1, amplitude: T::one() }),
        "cosine-2d" => ("phi0 = cos y1 + cos y2", InitialCondition::Cosine { dim: 2, amplitude: T::one() }),
        "neg-abs-planar" => {
            ("phi0 = -|y1| in 2D: planar shock sheet", InitialCondition::NegAbs { dim: 2, tilt: T::zero() })
        }
        "min-affine-3" => (
            "phi0 = min(y1, -y1, 1.5 y2) in 2D: three branches meeting at a triple point",
            InitialCondition::min_affine(vec![v2(1.0, 0.0), v2(-1.0, 0.0), v2(0.0, 1.5)], vec![T::zero(); 3])?,
        ),
        other => {
            return Err(Error::config(
                "fixture",
                format!("unknown fixture {other:?}; known: {}", FIXTURE_NAMES.join(", ")),
            ))
        }
    };
    let name = FIXTURE_NAMES.iter().find(|n| **n == name).copied().expect("listed");
    Ok(Fixture { name, description, ic })
}

pub fn catalog<T: Real>() -> Vec<Fixture<T>> {
    FIXTURE_NAMES.iter().map(|n| fixture(n).expect("catalog entry")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        let all = catalog::<f64>();
        assert_eq!(all.len(), FIXTURE_NAMES.len());
        assert_eq!(all[7].ic.dim(), 2);
        assert!(fixture::<f64>("nope").unwrap_err().is_config());
    }
}
