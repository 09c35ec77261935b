"""Vector math, domain types, and structural validation."""

import math
import random

import numpy as np
import pytest

from affmem import (
    AffordanceTriplet,
    EmbodiedMemory,
    Embedding,
    MemoryNode,
    NodeKind,
    Position3D,
    ViewRecord,
    cosine_similarity,
    euclidean_distance,
    validate_memory,
)
from affmem.errors import DegenerateVectorError, DimensionError


def test_embedding_basic():
    e = Embedding([3.0, 4.0])
    assert e.dim == 2
    assert e.norm() == 5.0
    assert e.normalized().tolist() == [0.6, 0.8]
    assert e == Embedding([3, 4])
    assert e != Embedding([4, 3])


def test_embedding_rejects_bad_values():
    with pytest.raises(ValueError):
        Embedding([])
    with pytest.raises(ValueError):
        Embedding([1.0, float("nan")])
    with pytest.raises(ValueError):
        Embedding([float("inf")])
    with pytest.raises(DegenerateVectorError):
        Embedding([0.0, 0.0]).normalized()


def test_embedding_values_are_read_only():
    e = Embedding([1.0, 2.0])
    with pytest.raises(ValueError):
        e.values[0] = 9.0


def test_cosine_known_values():
    assert cosine_similarity(Embedding([1, 0]), Embedding([1, 0])) == 1.0
    assert cosine_similarity(Embedding([1, 0]), Embedding([0, 1])) == 0.0
    assert cosine_similarity(Embedding([1, 2]), Embedding([2, 1])) == pytest.approx(0.8)


def test_cosine_errors():
    with pytest.raises(DimensionError):
        cosine_similarity(Embedding([1, 0]), Embedding([1, 0, 0]))
    with pytest.raises(DegenerateVectorError):
        cosine_similarity(Embedding([0, 0]), Embedding([1, 0]))


def test_cosine_properties_random():
    rng = random.Random(42)
    for _ in range(200):
        dim = rng.randint(2, 16)
        x = Embedding([rng.uniform(-5, 5) for _ in range(dim)])
        if x.norm() == 0.0:
            continue
        y = Embedding([rng.uniform(-5, 5) for _ in range(dim)])
        assert cosine_similarity(x, x) == pytest.approx(1.0, abs=1e-9)
        c = rng.uniform(0.1, 9.0)
        assert cosine_similarity(x, Embedding(x.values * c)) == pytest.approx(1.0)
        assert cosine_similarity(x, Embedding(x.values * -c)) == pytest.approx(-1.0)
        if y.norm() > 0.0:
            assert cosine_similarity(x, y) == pytest.approx(cosine_similarity(y, x))
            assert -1.0 <= cosine_similarity(x, y) <= 1.0


def test_euclidean_distance():
    assert euclidean_distance(Position3D(0, 0, 0), Position3D(0, 0, 0)) == 0.0
    assert euclidean_distance(Position3D(0, 0, 0), Position3D(3, 4, 0)) == 5.0
    assert euclidean_distance(Position3D(1, 1, 1), Position3D(1, 1, 2)) == 1.0


def test_position_rejects_nonfinite():
    with pytest.raises(ValueError):
        Position3D(float("nan"), 0, 0)


def test_affordance_triplet_lowercases_action():
    t = AffordanceTriplet("i1", "Pick", 0.5)
    assert t.action == "pick"
    with pytest.raises(ValueError):
        AffordanceTriplet("i1", "", 0.5)


def test_node_kind():
    assert NodeKind.for_level(1) is NodeKind.AFFORDANCE
    assert NodeKind.for_level(2) is NodeKind.INSTANCE
    assert NodeKind.for_level(3) is NodeKind.VIEW
    assert NodeKind.for_level(4) is NodeKind.REGION
    assert NodeKind.for_level(9) is NodeKind.REGION
    with pytest.raises(ValueError):
        NodeKind.for_level(0)


def test_view_record_validation():
    with pytest.raises(ValueError):
        ViewRecord(image_ref="", pose=Position3D(0, 0), width=1, height=1, env_id="e")
    with pytest.raises(ValueError):
        ViewRecord(image_ref="a", pose=Position3D(0, 0), width=0, height=1, env_id="e")
    with pytest.raises(ValueError):
        ViewRecord(image_ref="a", pose=Position3D(0, 0), width=1, height=1, env_id="")


def _tiny_memory():
    """Hand-built valid 4-level memory with one view and one instance."""
    pos = Position3D(0, 0, 0)
    aff = AffordanceTriplet("e/L2/i", "pick", 0.7)
    nodes = {
        "e/L1/a": MemoryNode(
            id="e/L1/a", level=1, description="pick", position=pos,
            parent="e/L2/i", affordance=aff,
        ),
        "e/L2/i": MemoryNode(
            id="e/L2/i", level=2, description="cup", position=pos,
            parent="e/L3/v", children=("e/L1/a",), affordances=(aff,),
        ),
        "e/L3/v": MemoryNode(
            id="e/L3/v", level=3, description="kitchen: cup", position=pos,
            text_embedding=Embedding([1.0, 0.0]),
            visual_embedding=Embedding([0.0, 1.0]),
            parent="e/L4/z", children=("e/L2/i",), image_ref="v.png",
        ),
        "e/L4/z": MemoryNode(
            id="e/L4/z", level=4, description="kitchen", position=pos,
            text_embedding=Embedding([1.0, 0.0]), children=("e/L3/v",),
        ),
    }
    return EmbodiedMemory(nodes, n_levels=4, env_id="e", d_t=2, d_m=2)


def test_validate_accepts_well_formed():
    assert validate_memory(_tiny_memory()) == []


def test_validate_flags_view_parenting_view():
    m = _tiny_memory()
    nodes = dict(m.nodes)
    bad = MemoryNode(
        id="e/L3/w", level=3, description="x", position=Position3D(0, 0),
        text_embedding=Embedding([1.0, 0.0]), visual_embedding=Embedding([1.0, 0.0]),
        parent="e/L3/v", image_ref="w.png",
    )
    nodes["e/L3/w"] = bad
    m2 = EmbodiedMemory(nodes, n_levels=4, env_id="e", d_t=2, d_m=2)
    rules = {v.rule for v in validate_memory(m2)}
    assert "level-adjacency" in rules


def test_validate_flags_score_out_of_range():
    m = _tiny_memory()
    nodes = dict(m.nodes)
    inst = nodes["e/L2/i"]
    bad_trip = AffordanceTriplet("e/L2/i", "pick", 1.3)
    nodes["e/L2/i"] = MemoryNode(
        id=inst.id, level=2, description=inst.description, position=inst.position,
        parent=inst.parent, children=(), affordances=(bad_trip,),
    )
    del nodes["e/L1/a"]
    m2 = EmbodiedMemory(nodes, n_levels=4, env_id="e", d_t=2, d_m=2)
    report = validate_memory(m2)
    assert sum(v.rule == "affordance-score-range" for v in report) == 1


def test_validate_flags_dangling_parent_and_mirror():
    m = _tiny_memory()
    nodes = dict(m.nodes)
    inst = nodes["e/L2/i"]
    other = AffordanceTriplet("e/L2/i", "place", 0.2)
    nodes["e/L2/i"] = MemoryNode(
        id=inst.id, level=2, description=inst.description, position=inst.position,
        parent="e/L3/ghost", children=inst.children, affordances=(other,),
    )
    m2 = EmbodiedMemory(nodes, n_levels=4, env_id="e", d_t=2, d_m=2)
    rules = {v.rule for v in validate_memory(m2)}
    assert "parent-dangling" in rules
    assert "affordance-mirror" in rules


def test_validate_flags_multiple_roots():
    m = _tiny_memory()
    nodes = dict(m.nodes)
    nodes["e/L4/z2"] = MemoryNode(
        id="e/L4/z2", level=4, description="spare", position=Position3D(1, 1),
        text_embedding=Embedding([0.0, 1.0]),
    )
    m2 = EmbodiedMemory(nodes, n_levels=4, env_id="e", d_t=2, d_m=2)
    rules = {v.rule for v in validate_memory(m2)}
    assert "single-root" in rules


def test_parent_walk_reaches_root(small_memory):
    # N - level steps from any node to the root
    m = small_memory
    root = m.root_ids()[0]
    for node_id in list(m.nodes)[::7]:
        node = m.node(node_id)
        steps = 0
        cur = node
        while cur.parent is not None:
            cur = m.node(cur.parent)
            steps += 1
        assert cur.id == root
        assert steps == m.n_levels - node.level


def test_level_index_sorted(small_memory):
    for level, ids in small_memory.levels.items():
        assert list(ids) == sorted(ids)
        assert all(small_memory.node(i).level == level for i in ids)


def test_text_scores_match_scalar_cosine(small_memory):
    m = small_memory
    rng = np.random.default_rng(5)
    q = Embedding(rng.normal(size=m.d_t))
    ids = list(m.view_ids())[:10]
    batch = m.text_scores(ids, q)
    for i, node_id in enumerate(ids):
        want = cosine_similarity(m.node(node_id).text_embedding, q)
        assert batch[i] == pytest.approx(want, abs=1e-12)


def test_visual_scores_match_scalar_cosine(small_memory):
    m = small_memory
    rng = np.random.default_rng(6)
    q = Embedding(rng.normal(size=m.d_m))
    ids = list(m.view_ids())[:10]
    batch = m.visual_scores(ids, q)
    for i, node_id in enumerate(ids):
        want = cosine_similarity(m.node(node_id).visual_embedding, q)
        assert batch[i] == pytest.approx(want, abs=1e-12)


def test_scores_dimension_checks(small_memory):
    m = small_memory
    ids = list(m.view_ids())[:2]
    with pytest.raises(DimensionError):
        m.text_scores(ids, Embedding(np.ones(m.d_t + 1)))
    with pytest.raises(DimensionError):
        m.visual_scores(ids, Embedding(np.ones(m.d_m + 1)))
    assert m.text_scores([], Embedding(np.ones(m.d_t))).size == 0
