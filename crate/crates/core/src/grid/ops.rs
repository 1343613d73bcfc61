use super::{FeatureMap, Grid2D};
use crate::error::Result;

/// Two-way softmax at every cell: `wa = e^a / (e^a + e^b)`, `wb = 1 - wa`.
///
/// The larger of the two logits is subtracted before exponentiating, so
/// arbitrarily large inputs do not overflow.
pub fn softmax_pair(a: &Grid2D, b: &Grid2D) -> Result<(Grid2D, Grid2D)> {
    let wa = a.zip_map(b, |a, b| {
        let m = a.max(b);
        let ea = (a - m).exp();
        let eb = (b - m).exp();
        ea / (ea + eb)
    })?;
    let wb = wa.map(|w| 1.0 - w);
    Ok((wa, wb))
}

/// Per-channel arithmetic mean.
pub fn global_avg_pool(map: &FeatureMap) -> Vec<f64> {
    map.channels().iter().map(Grid2D::mean).collect()
}

pub fn relu(map: &FeatureMap) -> FeatureMap {
    map.map(|v| v.max(0.0))
}

/// Gradient through `relu`, given the pre-activation input.
pub fn relu_backward(pre: &FeatureMap, grad: &FeatureMap) -> Result<FeatureMap> {
    pre.zip_map(grad, |p, g| if p > 0.0 { g } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        let a = Grid2D::filled(2, 2, 0.3);
        let (wa, wb) = softmax_pair(&a, &a).unwrap();
        assert!(wa.values().iter().chain(wb.values()).all(|&w| w == 0.5));

        let a = Grid2D::filled(1, 1, 3f64.ln());
        let b = Grid2D::zeros(1, 1);
        let (wa, wb) = softmax_pair(&a, &b).unwrap();
        // Closed form: 3 / (3 + 1).
        assert!((wa.get(0, 0) - 0.75).abs() < 1e-15);
        assert!((wb.get(0, 0) - 0.25).abs() < 1e-15);

        let a = Grid2D::filled(1, 1, 1000.0);
        let (wa, wb) = softmax_pair(&a, &b).unwrap();
        assert!((wa.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(wa.is_finite() && wb.is_finite());

        assert!(softmax_pair(&Grid2D::zeros(1, 2), &Grid2D::zeros(2, 1)).is_err());
    }

    #[test]
    fn pooling() {
        let m = FeatureMap::new(vec![
            Grid2D::filled(3, 3, 4.0),
            Grid2D::from_rows(&[[1.0, 2.0], [3.0, 4.0]])
                .unwrap()
                .upsample(3, 3)
                .unwrap(),
        ])
        .unwrap();
        let means = global_avg_pool(&m);
        assert_eq!(means[0], 4.0);
        assert!((means[1] - 2.5).abs() < 1e-15);

        let m = FeatureMap::from_grid(Grid2D::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        assert_eq!(global_avg_pool(&m), vec![2.5]);
    }

    proptest! {
        #[test]
        fn softmax_weights_partition_unity(
            a in proptest::collection::vec(-50.0f64..50.0, 6),
            b in proptest::collection::vec(-50.0f64..50.0, 6),
        ) {
            let (wa, wb) = softmax_pair(&Grid2D::new(2, 3, a).unwrap(), &Grid2D::new(2, 3, b).unwrap()).unwrap();
            for (x, y) in wa.values().iter().zip(wb.values()) {
                prop_assert!((x + y - 1.0).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(x) && (0.0..=1.0).contains(y));
            }
        }
    }
}
