import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from services.cvs_service import cvs_service
from services.errors import DomainError
from services.metric_service import Verdict, metric_service
from strategies import labeled_trees


def _quad(tree):
    return cvs_service.cvs_finite(tree).quad


# ==========================================
# 거리
# ==========================================
@given(labeled_trees(max_edges=10))
def test_bfs_matches_floyd_warshall(tree):
    quad = _quad(tree)
    reference = nx.floyd_warshall(nx.Graph(metric_service.to_networkx(quad)))
    for source in range(quad.n_vertices):
        dist = metric_service.bfs_distances(quad, source)
        assert dist == {v: int(d) for v, d in reference[source].items()}


def test_bfs_cutoff_and_bad_source(trees_3_edges):
    quad = _quad(trees_3_edges[0])
    assert metric_service.bfs_distances(quad, 0, cutoff=0) == {0: 0}
    with pytest.raises(DomainError):
        metric_service.bfs_distances(quad, quad.n_vertices)


# ==========================================
# 공
# ==========================================
def test_ball_of_radius_zero_is_a_single_vertex(trees_3_edges):
    view = metric_service.ball(_quad(trees_3_edges[5]), 0, 0)
    assert view.status == "complete"
    assert view.quad.n_vertices == 1 and view.quad.edge_count == 0


def test_negative_radius_is_rejected(trees_3_edges):
    with pytest.raises(DomainError):
        metric_service.ball(_quad(trees_3_edges[0]), 0, -1)


@given(labeled_trees(max_edges=10))
def test_large_ball_is_the_whole_map(tree):
    quad = _quad(tree)
    view = metric_service.ball(quad, quad.tails[quad.root], quad.n_vertices)
    assert view.quad.n_vertices == quad.n_vertices
    assert view.quad.edge_count == quad.edge_count
    assert metric_service.canonical_code(view.quad, include_marked=False) == \
        metric_service.canonical_code(quad, include_marked=False)


# ==========================================
# 정준 코드
# ==========================================
@st.composite
def renumbered(draw):
    tree = draw(labeled_trees(max_edges=10))
    quad = _quad(tree)
    vperm = draw(st.permutations(range(quad.n_vertices)))
    eperm = draw(st.permutations(range(quad.edge_count)))
    return quad, metric_service.renumber(quad, vperm, eperm)


@given(renumbered())
def test_canonical_code_ignores_vertex_and_edge_ids(pair):
    quad, other = pair
    assert metric_service.maps_equal(quad, other)
    assert other.labels[other.marked] == quad.labels[quad.marked]


def test_renumber_rejects_non_permutations(trees_3_edges):
    quad = _quad(trees_3_edges[0])
    with pytest.raises(DomainError):
        metric_service.renumber(quad, [0] * quad.n_vertices)


def test_canonical_code_separates_roots(trees_3_edges):
    quad = _quad(trees_3_edges[0])
    codes = {metric_service.canonical_code(quad, root=d) for d in range(quad.dart_count)}
    # 12 개 dart 중 자기동형이 같은 코드로 보내는 것만 겹친다
    assert 1 < len(codes) <= quad.dart_count


# ==========================================
# 국소 거리
# ==========================================
@given(labeled_trees(max_edges=8))
def test_local_distance_to_itself_is_zero(tree):
    quad = _quad(tree)
    d = metric_service.local_distance(quad, quad)
    assert d.value == 0 and not d.upper_bound


def test_local_distance_between_different_maps(trees_3_edges):
    quads = [_quad(t) for t in trees_3_edges]
    a = quads[0]
    b = next(q for q in quads[1:]
             if metric_service.canonical_code(q, include_marked=False)
             != metric_service.canonical_code(a, include_marked=False))
    d = metric_service.local_distance(a, b)
    assert 0 < d.value <= 1
    assert not d.upper_bound
    assert metric_service.ball_equal(a, b, d.radius) is Verdict.DIFFERENT


# ==========================================
# geodesic 검증
# ==========================================
def _quadrangle_walk(trees):
    for tree in trees:
        quad = _quad(tree)
        for orbit in quad.faces():
            walk = [quad.tails[d] for d in orbit]
            if len(set(walk)) == 4:
                return quad, walk
    raise AssertionError("no simple quadrangle found")


def test_verify_geodesic_failures(trees_3_edges):
    quad, walk = _quadrangle_walk(trees_3_edges)
    assert metric_service.verify_geodesic(quad, walk[:2]).is_geodesic
    assert metric_service.verify_geodesic(quad, walk).failure == "endpoint_distance"
    assert metric_service.verify_geodesic(quad, [walk[0], walk[2]]).failure == "not_adjacent"
    assert metric_service.verify_geodesic(quad, [walk[0], walk[1], walk[0]]).failure == "repeated_vertex"
    assert metric_service.verify_geodesic(quad, [0, quad.n_vertices]).failure == "missing_vertex"
    assert metric_service.verify_geodesic(quad, [walk[0]]).is_geodesic
