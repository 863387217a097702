from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given

from model.trees import LabeledTree, PlanarTree
from services.errors import DomainError, InvalidLawError, RootLabelMismatchError
from services.sampler_service import catalan
from services.tree_service import Law, tree_service
from strategies import labeled_trees


# ==========================================
# validate
# ==========================================
@given(labeled_trees())
def test_generated_trees_are_valid(tree):
    assert tree_service.validate(tree).valid


@pytest.mark.parametrize(
    "parent, labels, violation, vertex",
    [
        ((0,), (0,), "root_missing", 0),
        ((-1, 0), (0, 2), "label_step", 1),
        ((-1, 2, 0), (0, 0, 0), "parent_order", 1),
        ((-1, 0, 0, 1), (0, 0, 0, 0), "prefix_closure", 3),
    ],
)
def test_validate_reports_first_violation(parent, labels, violation, vertex):
    report = tree_service.validate(LabeledTree(PlanarTree(parent), labels))
    assert not report.valid
    assert report.violation == violation
    assert report.vertex == vertex


@given(labeled_trees())
def test_address_form_round_trip(tree):
    assert tree_service.from_addresses(tree_service.to_addresses(tree)) == tree


def test_address_gap_is_rejected():
    with pytest.raises(DomainError):
        tree_service.from_addresses({(): 0, (2,): 1})


# ==========================================
# 코너 / contour
# ==========================================
@given(labeled_trees(max_edges=15))
def test_corner_count_matches_degree(tree):
    cs = tree_service.corner_sequence(tree)
    if tree.edge_count == 0:
        assert len(cs) == 1
        return
    assert len(cs) == 2 * tree.edge_count
    counts = Counter(cs.vertices)
    for v in range(tree.tree.vertex_count):
        degree = len(tree.children[v]) + (1 if v else 0)
        assert counts[v] == degree


@given(labeled_trees(max_edges=15))
def test_consecutive_corner_labels_differ_by_at_most_one(tree):
    cs = tree_service.corner_sequence(tree)
    labels = cs.labels + cs.labels[:1]
    assert all(abs(a - b) <= 1 for a, b in zip(labels, labels[1:]))


@given(labeled_trees())
def test_contour_has_odd_length_and_returns_to_root(tree):
    contour, label = tree_service.contour_label_processes(tree)
    assert len(contour) == len(label) == 2 * tree.edge_count + 1
    assert contour[0] == contour[-1] == 0
    assert label[0] == label[-1] == tree.root_label


def test_corner_interval_wraps_around():
    tree = LabeledTree.from_arrays([-1, 0, 0], [0, 1, -1])
    cs = tree_service.corner_sequence(tree)
    assert tree_service.corner_interval(cs, 3, 1) == [3, 0, 1]


# ==========================================
# re-root / 코드
# ==========================================
@given(labeled_trees())
def test_reroot_at_first_corner_is_identity(tree):
    rerooted, mapping = tree_service.reroot(tree, 0)
    assert rerooted == tree
    assert mapping == tuple(range(len(tree_service.corner_sequence(tree))))


@given(labeled_trees(max_edges=10))
def test_reroot_keeps_label_multiset_and_corner_bijection(tree):
    cs = tree_service.corner_sequence(tree)
    corner = len(cs) // 2
    rerooted, mapping = tree_service.reroot(tree, corner)
    assert rerooted.edge_count == tree.edge_count
    assert sorted(rerooted.labels) == sorted(tree.labels)
    assert sorted(mapping) == list(range(len(cs)))
    assert mapping[corner] == 0
    new_cs = tree_service.corner_sequence(rerooted)
    assert all(new_cs.label(mapping[i]) == cs.label(i) for i in cs.indices())


def test_tree_codes_are_distinct(trees_upto_3):
    codes = {tree_service.tree_code(t) for t in trees_upto_3}
    assert len(codes) == len(trees_upto_3) == 1 + 3 + 18 + 135


# ==========================================
# 법칙 질량
# ==========================================
def test_rho_mass_sums_to_truncated_catalan_series(trees_upto_3):
    total = sum(tree_service.law_mass(t, Law.rho(0)) for t in trees_upto_3)
    assert total == sum(Fraction(catalan(e), 2 * 4 ** e) for e in range(4))


def test_rho_plus_mass_rescales_by_w():
    single = LabeledTree.single(2)
    assert tree_service.law_mass(single, Law.rho_plus(2)) == Fraction(1, 2) / Fraction(5, 6)
    assert tree_service.law_mass(single, Law.rho_minus(2)) == 0


def test_rho_plus_at_zero_is_rejected():
    with pytest.raises(InvalidLawError):
        tree_service.law_mass(LabeledTree.single(0), Law.rho_plus(0))


def test_mass_outside_support_is_zero():
    assert tree_service.law_mass(LabeledTree.single(1), Law.rho(0)) == 0


# ==========================================
# spine 트리
# ==========================================
def _spine_parts():
    spine = (0, 1, 1)
    left = (
        LabeledTree.from_arrays([-1, 0], [0, -1]),
        LabeledTree.single(1),
        LabeledTree.from_arrays([-1, 0, 1], [1, 2, 2]),
    )
    right = (
        LabeledTree.single(0),
        LabeledTree.from_arrays([-1, 0, 0], [1, 1, 0]),
        LabeledTree.from_arrays([-1, 0], [1, 2]),
    )
    return spine, left, right


def test_spine_compose_rejects_wrong_root_label():
    spine, left, right = _spine_parts()
    bad = left[:1] + (LabeledTree.single(5),) + left[2:]
    with pytest.raises(RootLabelMismatchError):
        tree_service.spine_compose(spine, bad, right)


def test_spine_decompose_inverts_compose():
    spine, left, right = _spine_parts()
    st = tree_service.spine_compose(spine, left, right)
    assert tree_service.spine_decompose(st) == (spine, left, right)


def test_spine_layout_splits_top_corners():
    spine, left, right = _spine_parts()
    layout = tree_service.spine_layout(tree_service.spine_compose(spine, left, right))
    cs = layout.corners
    assert not cs.cyclic
    assert layout.top_right == cs.start
    assert layout.top_left == cs.stop - 1
    top = layout.spine_ids[-1]
    assert cs.vertex(layout.top_left) == cs.vertex(layout.top_right) == top
    assert layout.tree.tree.vertex_count == 3 + 1 + 0 + 2 + 0 + 2 + 1


@given(labeled_trees(max_edges=12))
def test_shift_moves_every_label(tree):
    moved = tree_service.shift(tree, -3)
    assert moved.tree == tree.tree
    assert [a - b for a, b in zip(moved.labels, tree.labels)] == [-3] * len(tree.labels)
    assert tree_service.validate(moved).valid
    assert tree_service.shift(tree, 0) is tree
