use nalgebra::{dvector, DVector};
use proptest::prelude::*;
use sparsecs_core::bnb::{
    apply_cuts, relative_gap, select_branch_index, BnbConfig, FeasibilityCut, Node, NodePool,
};
use sparsecs_core::{Error, IndexSet};

fn node(n: usize, lower: f64) -> Node {
    Node {
        lower,
        ..Node::root(n)
    }
}

#[test]
fn single_node_is_selected() {
    let mut pool = NodePool::new();
    pool.push(node(2, 1.5));
    assert_eq!(pool.select_node().unwrap().lower, 1.5);
    assert!(matches!(pool.select_node(), Err(Error::EmptyPool)));
}

#[test]
fn ties_resolve_to_earliest_insertion() {
    let mut pool = NodePool::new();
    for (k, lb) in [3.0, 2.5, 2.5].into_iter().enumerate() {
        let mut nd = node(3, lb);
        nd.i1.insert(k);
        pool.push(nd);
    }
    let first = pool.select_node().unwrap();
    assert_eq!((first.lower, first.i1.to_vec()), (2.5, vec![1]));
    let second = pool.select_node().unwrap();
    assert_eq!(second.i1.to_vec(), vec![2]);
}

#[test]
fn branching_examples() {
    let root = Node::root(3);
    assert_eq!(select_branch_index(&root, &dvector![1.0, 0.5, 0.0]).unwrap(), 1);
    assert_eq!(select_branch_index(&Node::root(2), &dvector![0.4, 0.6]).unwrap(), 0);
    let mut nd = Node::root(3);
    nd.i1.insert(1);
    assert_eq!(select_branch_index(&nd, &dvector![0.9, 0.5, 0.45]).unwrap(), 2);
    nd.i0.insert(0);
    nd.i0.insert(2);
    assert!(matches!(select_branch_index(&nd, &DVector::zeros(3)), Err(Error::CompletePattern)));
}

#[test]
fn cut_examples() {
    let cut = FeasibilityCut {
        zero_set: IndexSet::from_indices(6, [1, 2]),
    };
    let mut nd = Node::root(6);
    for i in [1, 2, 5] {
        nd.i0.insert(i);
    }
    assert!(apply_cuts(&nd, std::slice::from_ref(&cut)));
    let mut nd = Node::root(6);
    nd.i0.insert(1);
    assert!(!apply_cuts(&nd, &[cut]));
    assert!(!apply_cuts(&nd, &[]));
}

#[test]
fn gap_conventions() {
    assert_eq!(relative_gap(0.0, 0.0), 0.0);
    assert_eq!(relative_gap(4.0, 3.0), 0.25);
    assert_eq!(relative_gap(4.0, 5.0), 0.0);
}

#[test]
fn config_validation() {
    assert!(BnbConfig::default().validate().is_ok());
    let bad = BnbConfig {
        delta: -0.1,
        ..BnbConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = BnbConfig {
        time_limit: Some(f64::NAN),
        ..BnbConfig::default()
    };
    assert!(bad.validate().is_err());
}

proptest! {
    #[test]
    fn pool_yields_nondecreasing_bounds_and_never_pruned_nodes(
        bounds in prop::collection::vec(0.0f64..10.0, 1..40),
        threshold in 0.0f64..10.0,
    ) {
        let mut pool = NodePool::new();
        for &b in &bounds {
            pool.push(node(1, b));
        }
        let dropped = pool.prune(threshold);
        let expected_drop = bounds.iter().copied().filter(|b| *b >= threshold).fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.min(b))));
        prop_assert_eq!(dropped, expected_drop);
        let mut last = f64::NEG_INFINITY;
        while let Ok(nd) = pool.select_node() {
            prop_assert!(nd.lower < threshold);
            prop_assert!(nd.lower >= last);
            last = nd.lower;
        }
    }

    #[test]
    fn cut_fires_iff_zero_set_contained(
        cut in prop::collection::btree_set(0usize..8, 0..4),
        zeros in prop::collection::btree_set(0usize..8, 0..8),
    ) {
        let c = FeasibilityCut { zero_set: IndexSet::from_indices(8, cut.iter().copied()) };
        let mut nd = Node::root(8);
        for &i in &zeros {
            nd.i0.insert(i);
        }
        prop_assert_eq!(apply_cuts(&nd, &[c]), cut.is_subset(&zeros));
    }
}
