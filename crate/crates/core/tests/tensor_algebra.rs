use mgcn::tensor::{facewise_product, fold3, m_inverse_transform, m_product, m_transform, unfold3, Tensor3};
use mgcn::transforms::{TransformKind, TransformMatrix};
use proptest::prelude::*;

const KINDS: [TransformKind; 4] =
    [TransformKind::Identity, TransformKind::Dft, TransformKind::Dct, TransformKind::Haar];

fn tensor(dims: [usize; 3]) -> impl Strategy<Value = Tensor3> {
    prop::collection::vec(-2.0f64..2.0, dims.iter().product::<usize>())
        .prop_map(move |v| Tensor3::from_real(dims, v).unwrap())
}

fn kind_and_size() -> impl Strategy<Value = (TransformKind, usize)> {
    (0usize..4, 0usize..4).prop_map(|(k, e)| (KINDS[k], 1 << e))
}

proptest! {
    #[test]
    fn transform_round_trip((kind, t) in kind_and_size(), seed in any::<u64>()) {
        let m = TransformMatrix::build(kind, t).unwrap();
        let x = Tensor3::from_fn_real([2, 3, t], |i, j, k| ((seed >> ((i + j + k) % 60)) & 0xff) as f64 / 100.0 - 1.0);
        let back = m_inverse_transform(&m_transform(&x, m.matrix()).unwrap(), &m).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-10);
    }

    #[test]
    fn unfold_fold_is_identity(x in tensor([3, 2, 4])) {
        let m = unfold3(&x);
        prop_assert_eq!(m.rows(), 4);
        prop_assert_eq!(m.cols(), 6);
        prop_assert_eq!(fold3(&m, x.dims()).unwrap(), x);
    }

    #[test]
    fn m_product_is_linear_in_first_argument(
        (kind, t) in kind_and_size(),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        raw in prop::collection::vec(-1.0f64..1.0, 3 * 2 * 8 * 2 + 2 * 2 * 8),
    ) {
        let m = TransformMatrix::build(kind, t).unwrap();
        let n = 3 * 2 * t;
        let x = Tensor3::from_real([3, 2, t], raw[..n].to_vec()).unwrap();
        let y = Tensor3::from_real([3, 2, t], raw[n..2 * n].to_vec()).unwrap();
        let z = Tensor3::from_real([2, 2, t], raw[2 * n..2 * n + 4 * t].to_vec()).unwrap();
        let mut combo = x.scale(a);
        combo.add_scaled(&y, b).unwrap();
        let lhs = m_product(&combo, &z, &m).unwrap();
        let mut rhs = m_product(&x, &z, &m).unwrap().scale(a);
        rhs.add_scaled(&m_product(&y, &z, &m).unwrap(), b).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
    }

    #[test]
    fn m_product_is_associative(
        (kind, t) in kind_and_size(),
        raw in prop::collection::vec(-1.0f64..1.0, 16 * 8),
    ) {
        let m = TransformMatrix::build(kind, t).unwrap();
        let x = Tensor3::from_real([2, 3, t], raw[..6 * t].to_vec()).unwrap();
        let y = Tensor3::from_real([3, 2, t], raw[6 * t..12 * t].to_vec()).unwrap();
        let z = Tensor3::from_real([2, 2, t], raw[12 * t..16 * t].to_vec()).unwrap();
        let left = m_product(&m_product(&x, &y, &m).unwrap(), &z, &m).unwrap();
        let right = m_product(&x, &m_product(&y, &z, &m).unwrap(), &m).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-10);
    }

    #[test]
    fn real_operands_give_real_products((kind, t) in kind_and_size(), x in tensor([2, 2, 8]), y in tensor([2, 1, 8])) {
        let m = TransformMatrix::build(kind, t).unwrap();
        let p = m_product(&x.resize_time(t), &y.resize_time(t), &m).unwrap();
        prop_assert!(p.is_real());
    }
}

#[test]
fn identity_transform_product_matches_facewise() {
    let x = Tensor3::from_fn_real([2, 3, 4], |i, j, t| (i * 7 + j * 3 + t) as f64 * 0.25 - 1.0);
    let y = Tensor3::from_fn_real([3, 2, 4], |i, j, t| (i + 2 * j) as f64 - t as f64 * 0.5);
    let m = TransformMatrix::build(TransformKind::Identity, 4).unwrap();
    assert_eq!(m_product(&x, &y, &m).unwrap(), facewise_product(&x, &y).unwrap());
}

#[test]
fn mismatched_inner_dimension_is_rejected() {
    let m = TransformMatrix::build(TransformKind::Dct, 2).unwrap();
    let x = Tensor3::zeros(2, 3, 2);
    let y = Tensor3::zeros(2, 2, 2);
    assert!(m_product(&x, &y, &m).is_err());
}
