import pytest
from hypothesis import given

from model.maps import STAR, Sink
from model.trees import LabeledTree
from services.cvs_service import cvs_service
from services.errors import DomainError, IndeterminateError, IndexRangeError, InvariantViolationError
from services.metric_service import metric_service
from services.sampler_service import sampler_service, stream_rng
from services.tree_service import tree_service
from strategies import labeled_trees


# ==========================================
# successor
# ==========================================
@given(labeled_trees(max_edges=15))
def test_successor_map_agrees_with_single_lookups(tree):
    cs = tree_service.corner_sequence(tree)
    succ = cvs_service.successor_map(cs)
    for i in cs.indices():
        assert succ[i] == cvs_service.successor(cs, i)


@given(labeled_trees(max_edges=15))
def test_successor_label_drops_by_one(tree):
    cs = tree_service.corner_sequence(tree)
    succ = cvs_service.successor_map(cs)
    for i in cs.indices():
        target = succ[i]
        if cs.label(i) == tree.min_label:
            assert target is STAR
        else:
            assert cs.label(target) == cs.label(i) - 1


def test_successor_outside_sequence_raises():
    cs = tree_service.corner_sequence(LabeledTree.from_arrays([-1, 0], [0, 1]))
    with pytest.raises(DomainError):
        cvs_service.successor(cs, 5)


# ==========================================
# 유한 CVS
# ==========================================
def test_single_vertex_tree_gives_one_edge_map():
    image = cvs_service.cvs_finite(LabeledTree.single(0))
    quad = image.quad
    assert (quad.n_vertices, quad.edge_count) == (2, 1)
    assert [len(f) for f in quad.faces()] == [2]
    assert quad.labels == (0, -1)


def test_cvs_needs_root_label_zero():
    with pytest.raises(DomainError):
        cvs_service.cvs_finite(LabeledTree.single(2))


def test_three_edge_trees_give_distinct_quadrangulations(trees_3_edges):
    codes = set()
    for tree in trees_3_edges:
        image = cvs_service.cvs_finite(tree)
        audit = cvs_service.face_audit(image.quad)
        assert (audit.vertices, audit.edges, audit.faces) == (5, 6, 3)
        assert audit.all_quadrangles and audit.bipartite and audit.euler == 2
        codes.add(metric_service.canonical_code(image.quad))
    assert len(codes) == 135


@given(labeled_trees(max_edges=20))
def test_label_is_distance_to_the_extra_vertex(tree):
    if tree.edge_count == 0:
        return
    image = cvs_service.cvs_finite(tree)
    assert cvs_service.check_label_distances(image) == []


@given(labeled_trees(max_edges=20))
def test_tau_path_is_a_geodesic(tree):
    image = cvs_service.cvs_finite(tree)
    path = cvs_service.extract_geodesics(image, "tau")
    assert path[0] == 0 and path[-1] == image.star
    report = metric_service.verify_geodesic(image.quad, path, pairwise=True)
    assert report.is_geodesic
    assert report.length == 1 - tree.min_label


@given(labeled_trees(max_edges=12))
def test_tau_is_one_step_from_tau_hat(tree):
    image = cvs_service.cvs_finite(tree)
    tau = cvs_service.extract_geodesics(image, "tau")
    tau_hat = cvs_service.extract_geodesics(image, "tau_hat")
    assert len(tau_hat) == len(tau)
    assert tau_hat[-1] == image.star
    labels = image.quad.labels
    assert [labels[v] for v in tau_hat] == list(range(0, -len(tau_hat), -1))
    adjacency = image.quad.adjacency
    assert all(tau[i + 1] in adjacency[tau_hat[i]] for i in range(len(tau) - 1))


def test_extract_rejects_unknown_kind():
    image = cvs_service.cvs_finite(LabeledTree.single(0))
    with pytest.raises(DomainError):
        cvs_service.extract_geodesics(image, "sideways")


# ==========================================
# geodesic-boundary 사각분할
# ==========================================
@given(labeled_trees(max_edges=12))
def test_geodesic_boundary_sides(tree):
    gbq = cvs_service.build_geodesic_boundary_quad(tree)
    star = gbq.quad.marked
    assert gbq.delta == 1 - tree.min_label
    assert gbq.gamma[0] == gbq.gamma_tilde[0] == 0
    assert gbq.gamma[-1] == gbq.gamma_tilde[-1] == star
    for side in (gbq.gamma, gbq.gamma_tilde):
        report = metric_service.verify_geodesic(gbq.quad, side)
        assert report.is_geodesic and report.length == gbq.delta


def test_geodesic_boundary_of_single_vertex():
    gbq = cvs_service.build_geodesic_boundary_quad(LabeledTree.single(0))
    assert gbq.quad.n_vertices == 2
    assert sorted(len(f) for f in gbq.quad.faces()) == [2, 2]


# ==========================================
# 무한 변형
# ==========================================
def _patches(variant, builder, budget, seeds=range(6)):
    images = []
    for seed in seeds:
        st = builder(stream_rng(seed), budget)
        try:
            images.append(cvs_service.cvs_infinite(st, variant))
        except IndeterminateError:
            continue
    return images


@pytest.mark.parametrize(
    "variant, builder",
    [
        ("S_minus", lambda rng, b: sampler_service.sample_theta_infinity(12, rng, b)),
        ("S1", lambda rng, b: sampler_service.sample_theta_bar(1, 12, rng, b)),
        ("S2", lambda rng, b: sampler_service.sample_theta_bar(2, 12, rng, b)),
    ],
)
def test_complete_faces_of_patches_are_quadrangles(variant, builder, small_budget):
    images = _patches(variant, builder, small_budget)
    assert images
    for image in images:
        audit = cvs_service.face_audit(image.quad)
        assert audit.all_quadrangles
        assert audit.bipartite


def test_half_plane_successors_end_in_lambda_chain(small_budget):
    st = sampler_service.sample_theta_bar(2, 10, stream_rng(2), small_budget)
    succ = cvs_service.successor_map(tree_service.spine_layout(st).corners, "S2")
    sinks = [t for _, t in succ.items() if isinstance(t, Sink)]
    assert all(t.kind in ("lambda", "indeterminate") for t in sinks)
    assert all(t.level <= 1 for t in sinks if t.kind == "lambda")


def test_unknown_variant_is_rejected(small_budget):
    st = sampler_service.sample_theta_infinity(4, stream_rng(0), small_budget)
    with pytest.raises(DomainError):
        cvs_service.cvs_infinite(st, "S3")


def test_glued_half_planes_share_the_seam(small_budget):
    for seed in range(10):
        st1 = sampler_service.sample_theta_bar(1, 16, stream_rng(seed, 0), small_budget)
        st2 = sampler_service.sample_theta_bar(2, 16, stream_rng(seed, 1), small_budget)
        try:
            glued = cvs_service.glue_half_planes(cvs_service.cvs_infinite(st1, "S1"),
                                                 cvs_service.cvs_infinite(st2, "S2"))
        except (IndeterminateError, IndexRangeError):
            continue
        assert 0 in glued.seam
        quad = glued.quad
        assert quad.n_vertices >= glued.second_offset
        assert cvs_service.face_audit(quad).bipartite
        return
    pytest.fail("no seed produced a gluable pair")


def test_embedded_submap_has_a_geodesic_boundary(small_budget):
    found = 0
    for seed in range(12):
        st = sampler_service.sample_theta_bar(1, 60, stream_rng(seed, 7), small_budget)
        try:
            sub = cvs_service.restrict_to_embedded_submap(st, 1, epsilon_tail=0.05)
        except IndeterminateError:
            continue
        gbq = sub.boundary_quad
        labels = gbq.quad.labels
        assert st.spine_labels[sub.sigma] == 1
        assert 1 not in st.spine_labels[sub.sigma + 1:]
        assert [labels[v] for v in gbq.gamma_tilde] == list(range(0, -gbq.delta - 1, -1))
        assert gbq.quad.marked == gbq.gamma_tilde[-1]
        found += 1
    assert found


def test_embedded_submap_needs_positive_level(small_budget):
    st = sampler_service.sample_theta_bar(1, 8, stream_rng(0), small_budget)
    with pytest.raises(DomainError):
        cvs_service.restrict_to_embedded_submap(st, 0)


def test_boundary_leaks_on_a_single_face():
    quad = cvs_service.cvs_finite(LabeledTree.from_arrays([-1, 0], [0, 1])).quad
    everyone = set(range(quad.n_vertices))
    assert cvs_service.boundary_leaks(quad, sorted(everyone), set()) == []
    assert cvs_service.boundary_leaks(quad, [0], {0}) == []
    assert cvs_service.boundary_leaks(quad, [0], set()) == [0]


def test_embedded_submap_refuses_a_leaking_boundary(small_budget, monkeypatch):
    monkeypatch.setattr(type(cvs_service), "boundary_leaks", staticmethod(lambda quad, kept, boundary: [0]))
    raised = 0
    for seed in range(12):
        st = sampler_service.sample_theta_bar(1, 60, stream_rng(seed, 7), small_budget)
        try:
            cvs_service.restrict_to_embedded_submap(st, 1, epsilon_tail=0.05)
        except IndeterminateError:
            continue
        except InvariantViolationError as e:
            assert e.details["vertices"] == [0]
            raised += 1
    assert raised
