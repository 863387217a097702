# test/strategies.py
"""hypothesis 전략 (라벨 트리)"""

from hypothesis import strategies as st

from model.trees import LabeledTree, PlanarTree


@st.composite
def labeled_trees(draw, max_edges: int = 12, root_label: int = 0):
    """현재 조상 줄에서 부모를 고르는 방식으로 preorder 트리를 만든다"""
    edges = draw(st.integers(0, max_edges))
    parent = [-1]
    labels = [root_label]
    line = [0]
    for v in range(1, edges + 1):
        keep = draw(st.integers(1, len(line)))
        del line[keep:]
        p = line[-1]
        parent.append(p)
        labels.append(labels[p] + draw(st.sampled_from((-1, 0, 1))))
        line.append(v)
    return LabeledTree(PlanarTree(tuple(parent)), tuple(labels))
