"""Traversal, fusion, and reranking."""

import numpy as np
import pytest

from affmem.builder import BuildConfig, build_memory
from affmem.core import Planting, Position3D, ViewRecord
from affmem.errors import ConfigError, EmptyCandidateSetError, ProviderError
from affmem.providers import MockProvider, jaccard
from affmem.retrieval import (
    ROLE_RECEPTACLE,
    ROLE_TARGET,
    RetrievalConfig,
    build_query,
    fuse,
    prefilter_instances,
    ranked_list_to_json_dict,
    rerank,
    result_to_json_dicts,
    retrieve,
    retrieve_phrase,
    traverse,
)

D_T, D_M = 64, 32


def _build(views):
    cfg = BuildConfig(n_levels=6, d_t=D_T, d_m=D_M)
    return build_memory(views, cfg), MockProvider(d_t=D_T, d_m=D_M, views=views)


def _view(ref, x, caption, room="hall", plantings=()):
    return ViewRecord(
        image_ref=ref,
        pose=Position3D(x, 0.0, 1.0),
        width=64,
        height=64,
        env_id="envQ",
        caption=caption,
        room=room,
        plantings=tuple(plantings),
    )


def _query(provider, phrase, role=ROLE_TARGET):
    return build_query(phrase, phrase, role, provider)


# -- config -------------------------------------------------------------------


def test_retrieval_config_validation():
    RetrievalConfig()  # defaults are legal
    with pytest.raises(ConfigError):
        RetrievalConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        RetrievalConfig(alpha=-0.01)
    with pytest.raises(ConfigError):
        RetrievalConfig(k_b=0)
    with pytest.raises(ConfigError):
        RetrievalConfig(k_r=0)
    with pytest.raises(ConfigError):
        RetrievalConfig(k_f=0)
    echo = RetrievalConfig(alpha=0.25, k_b=3).to_dict()
    assert echo["alpha"] == 0.25
    assert echo["k_b"] == 3
    assert set(echo) == {
        "alpha", "k_b", "k_r", "k_f", "enable_rerank", "enable_asr", "caption_rerank",
    }


# -- traverse -----------------------------------------------------------------


def test_traverse_wide_beam_reaches_every_view(small_memory, provider):
    q = _query(provider, "anything at all")
    views, kept = traverse(small_memory, q, k_b=10_000)
    assert sorted(views) == list(small_memory.view_ids())
    assert set(kept) == set(range(4, small_memory.n_levels + 1))
    assert kept[small_memory.n_levels] == list(small_memory.root_ids())


def test_traverse_narrow_beam_prunes_levels(small_memory, provider):
    q = _query(provider, "kettle")
    views, kept = traverse(small_memory, q, k_b=1)
    for level in range(4, small_memory.n_levels + 1):
        assert len(kept[level]) == 1
    zone = kept[4][0]
    assert sorted(small_memory.node(zone).children) == views
    # level 3 is never pruned: every child of the surviving zone is kept
    assert views == sorted(views)


def test_traverse_tie_breaks_on_ascending_id():
    views = [
        _view("a.png", 0.0, "plain white wall"),
        _view("b.png", 80.0, "plain white wall"),
    ]
    memory, provider = _build(views)
    assert len(memory.level_ids(4)) == 2
    q = _query(provider, "plain white wall")
    _, kept = traverse(memory, q, k_b=1)
    assert kept[4] == [min(memory.level_ids(4))]


# -- fuse ---------------------------------------------------------------------


def test_fuse_matches_formula(small_memory, provider):
    q = _query(provider, "silver kettle on the counter")
    ids = small_memory.view_ids()
    for alpha in (0.0, 0.3, 0.5, 1.0):
        fused = fuse(small_memory, ids, q, alpha)
        text = small_memory.text_scores(ids, q.text_embedding)
        visual = small_memory.visual_scores(ids, q.visual_embedding)
        expected = {
            vid: alpha * t + (1 - alpha) * v for vid, t, v in zip(ids, text, visual)
        }
        for vid, score in fused:
            assert score == pytest.approx(expected[vid], abs=1e-12)
        scores = [s for _, s in fused]
        assert scores == sorted(scores, reverse=True)


def test_fuse_tie_breaks_on_view_id():
    views = [
        _view("twin-b.png", 1.0, "same caption here"),
        _view("twin-a.png", 0.0, "same caption here"),
    ]
    memory, provider = _build(views)
    q = _query(provider, "same caption here")
    fused = fuse(memory, memory.view_ids(), q, 0.5)
    assert fused[0][0] < fused[1][0]
    assert fused[0][1] == pytest.approx(fused[1][1])


def test_fuse_rejects_empty_candidate_set(small_memory, provider):
    q = _query(provider, "x")
    with pytest.raises(EmptyCandidateSetError):
        fuse(small_memory, [], q, 0.5)


# -- prefilter ----------------------------------------------------------------


def test_prefilter_instances_by_role_action():
    views = [
        _view(
            "v0.png", 0.0, "kitchen bench",
            plantings=[
                Planting("steel pan", "pick", 0.8),
                Planting("steel pan", "place", 0.3),  # same instance, both roles
                Planting("oven rack", "place", 0.6),
            ],
        ),
        _view("v1.png", 1.0, "empty corner"),
    ]
    memory, _ = _build(views)
    view_ids = list(memory.view_ids())
    picks = prefilter_instances(memory, view_ids, ROLE_TARGET)
    places = prefilter_instances(memory, view_ids, ROLE_RECEPTACLE)
    assert len(picks) == 1
    assert picks[0][1] == pytest.approx(0.8)
    assert len(places) == 2
    by_desc = {memory.node(i).description: s for i, s in places}
    assert by_desc == {"steel pan": pytest.approx(0.3), "oven rack": pytest.approx(0.6)}
    with pytest.raises(ConfigError):
        prefilter_instances(memory, view_ids, "mystery_role")


# -- rerank -------------------------------------------------------------------


def _fused_pairs(memory, provider, phrase, alpha=0.5):
    q = _query(provider, phrase)
    views, _ = traverse(memory, q, k_b=100)
    return q, fuse(memory, views, q, alpha)


def test_rerank_disabled_returns_fused_order(small_memory, provider):
    cfg = RetrievalConfig(enable_rerank=False)
    q, fused = _fused_pairs(small_memory, provider, "kettle")
    entries = rerank(small_memory, fused, q, ROLE_TARGET, cfg, provider)
    assert [(e.view_id, e.score) for e in entries] == [
        (v, pytest.approx(s)) for v, s in fused
    ]
    assert all(e.stage == "fusion" for e in entries)
    assert [e.rank for e in entries] == list(range(1, len(fused) + 1))


def test_rerank_empty_prefilter_equals_fusion():
    views = [
        _view(f"v{i}.png", float(i), f"scene number {i}",
              plantings=[Planting(f"thing {i}", "pick", 0.5)])
        for i in range(4)
    ]
    memory, provider = _build(views)
    cfg = RetrievalConfig()
    # nothing affords "place", so the receptacle role has no candidates
    q, fused = _fused_pairs(memory, provider, "scene number 2")
    q = _query(provider, "scene number 2", ROLE_RECEPTACLE)
    entries = rerank(memory, fused, q, ROLE_RECEPTACLE, cfg, provider)
    assert [e.view_id for e in entries] == [v for v, _ in fused]
    assert all(e.stage == "fusion" for e in entries)


def test_rerank_promotes_relevant_instance_view():
    decoys = [
        _view(f"decoy{i}.png", float(i), "red mug mentioned in caption red mug",
              plantings=[Planting("dusty cable", "pick", 0.9)])
        for i in range(3)
    ]
    true = _view("zz-true.png", 3.0, "a cluttered shelf",
                 plantings=[Planting("red mug", "pick", 0.7)])
    memory, provider = _build(decoys + [true])
    cfg = RetrievalConfig(k_f=1)
    q, fused = _fused_pairs(memory, provider, "red mug")
    true_view = memory.view_ids()[-1]
    assert memory.node(true_view).image_ref == "zz-true.png"
    # the caption decoys dominate fusion; the true view is last
    assert fused[-1][0] == true_view

    entries = rerank(memory, fused, q, ROLE_TARGET, cfg, provider)
    assert entries[0].view_id == true_view
    assert entries[0].stage == "rerank"
    assert entries[0].rank == 1
    # everything else keeps its fused relative order
    rest = [e.view_id for e in entries[1:]]
    assert rest == [v for v, _ in fused if v != true_view]
    assert all(e.stage == "fusion" for e in entries[1:])


def test_rerank_is_a_permutation_and_leaves_tail_untouched():
    views = [
        _view(f"v{i:02d}.png", float(i) * 0.2, f"room with item{i} on show",
              plantings=[Planting(f"item{i}", "pick", 0.5 + 0.05 * i)])
        for i in range(8)
    ]
    memory, provider = _build(views)
    cfg = RetrievalConfig(k_r=4, k_f=2)
    q, fused = _fused_pairs(memory, provider, "item3 please")
    entries = rerank(memory, fused, q, ROLE_TARGET, cfg, provider)
    assert sorted(e.view_id for e in entries) == sorted(v for v, _ in fused)
    # beyond the window nothing moves
    tail = [e.view_id for e in entries[-(len(fused) - cfg.k_r):]]
    assert tail == [v for v, _ in fused[cfg.k_r:]]
    assert [e.rank for e in entries] == list(range(1, len(fused) + 1))


def _asr_fixture():
    views = [
        _view("asr-a.png", 0.0, "matching spot",
              plantings=[Planting("blue bin", "place", 0.4)]),
        _view("asr-b.png", 0.5, "matching spot",
              plantings=[Planting("blue bin", "place", 0.9)]),
    ]
    return _build(views)


def test_asr_orders_equally_relevant_by_affordance():
    memory, provider = _asr_fixture()
    q = _query(provider, "blue bin", ROLE_RECEPTACLE)
    fused = fuse(memory, memory.view_ids(), q, 0.5)
    view_a, view_b = memory.view_ids()

    on = rerank(memory, fused, q, ROLE_RECEPTACLE,
                RetrievalConfig(enable_asr=True), provider)
    assert [e.view_id for e in on[:2]] == [view_b, view_a]
    assert on[0].score == pytest.approx(0.9)  # affordance score surfaces

    off = rerank(memory, fused, q, ROLE_RECEPTACLE,
                 RetrievalConfig(enable_asr=False), provider)
    assert [e.view_id for e in off[:2]] == [view_a, view_b]
    assert off[0].score == pytest.approx(1.0)  # relevance score surfaces


def test_rerank_missing_relevance_is_provider_error():
    memory, provider = _asr_fixture()

    class Drops:
        def __getattr__(self, name):
            return getattr(provider, name)

        def score_instances(self, phrase, candidates):
            return provider.score_instances(phrase, list(candidates)[:-1])

    q = _query(provider, "blue bin", ROLE_RECEPTACLE)
    fused = fuse(memory, memory.view_ids(), q, 0.5)
    with pytest.raises(ProviderError) as err:
        rerank(memory, fused, q, ROLE_RECEPTACLE, RetrievalConfig(), Drops())
    assert err.value.kind == ProviderError.PARSE_FAILURE


def test_caption_rerank_sorts_window_by_overlap():
    views = [
        _view("c0.png", 0.0, "laundry basket by the door"),
        _view("c1.png", 0.3, "tall laundry hamper"),
        _view("c2.png", 0.6, "garage shelf with tools"),
    ]
    memory, provider = _build(views)
    cfg = RetrievalConfig(caption_rerank=True)
    q, fused = _fused_pairs(memory, provider, "laundry basket")
    entries = rerank(memory, fused, q, ROLE_TARGET, cfg, provider)
    overlaps = [
        jaccard("laundry basket", memory.node(e.view_id).description)
        for e in entries
    ]
    assert overlaps == sorted(overlaps, reverse=True)
    assert [e.score for e in entries] == overlaps
    assert all(e.stage == "rerank" for e in entries)


def test_caption_rerank_ties_keep_fused_order():
    views = [
        _view("t0.png", 0.0, "unrelated caption one"),
        _view("t1.png", 0.4, "unrelated caption two"),
    ]
    memory, provider = _build(views)
    cfg = RetrievalConfig(caption_rerank=True)
    q, fused = _fused_pairs(memory, provider, "zero overlap phrase")
    entries = rerank(memory, fused, q, ROLE_TARGET, cfg, provider)
    assert [e.view_id for e in entries] == [v for v, _ in fused]


# -- retrieve -----------------------------------------------------------------


def test_retrieve_decomposes_and_answers_both_roles(small_memory, provider):
    result = retrieve(
        small_memory,
        "take the silver kettle to the wooden shelf",
        RetrievalConfig(),
        provider,
    )
    assert result.target.role == ROLE_TARGET
    assert result.target.phrase == "the silver kettle"
    assert result.receptacle.phrase == "the wooden shelf"
    assert result.fallbacks == ()
    assert len(result.target.entries) == len(small_memory.view_ids())
    assert result.for_role(ROLE_TARGET) is result.target
    assert result.for_role(ROLE_RECEPTACLE) is result.receptacle
    with pytest.raises(ConfigError):
        result.for_role("nope")


def test_retrieve_falls_back_on_undecomposable_instruction(small_memory, provider):
    result = retrieve(
        small_memory, "tidy up the kettle area", RetrievalConfig(), provider
    )
    assert result.fallbacks
    assert result.target.phrase == "tidy up the kettle area"
    assert result.receptacle.phrase == "tidy up the kettle area"


def test_retrieve_phrase_rejects_unknown_role(small_memory, provider):
    with pytest.raises(ConfigError):
        retrieve_phrase(
            small_memory, "x", "x", "carrier", RetrievalConfig(), provider
        )


def test_ranked_lists_rank_true_view_first(small_memory, small_corpus):
    provider = MockProvider(
        d_t=small_memory.d_t, d_m=small_memory.d_m, views=small_corpus.views
    )
    sample = small_corpus.samples[0]
    result = retrieve(small_memory, sample.instruction, RetrievalConfig(), provider)
    top_target = result.target.entries[0]
    assert top_target.image_ref in sample.positives_target
    top_rec = result.receptacle.entries[0]
    assert top_rec.image_ref in sample.positives_receptacle
    assert result.target.rank_of(top_target.view_id) == 1
    assert result.target.rank_of("no-such-view") is None


# -- JSON shape ---------------------------------------------------------------


def test_result_to_json_dicts_shape(small_memory, provider):
    cfg = RetrievalConfig(k_f=3)
    result = retrieve(
        small_memory, "take the silver kettle to the wooden shelf", cfg, provider
    )
    target_doc, receptacle_doc = result_to_json_dicts(result, cfg)
    assert target_doc["role"] == ROLE_TARGET
    assert receptacle_doc["role"] == ROLE_RECEPTACLE
    for doc in (target_doc, receptacle_doc):
        assert doc["instruction"] == "take the silver kettle to the wooden shelf"
        assert doc["config_echo"] == cfg.to_dict()
        assert doc["fallbacks"] == []
        for i, entry in enumerate(doc["entries"], start=1):
            assert entry["rank"] == i
            assert set(entry) == {"rank", "view_id", "image_ref", "score", "stage"}
            assert entry["stage"] in ("fusion", "rerank")


def test_ranked_list_json_defaults():
    from affmem.retrieval import RankedEntry, RankedList

    ranked = RankedList(
        role=ROLE_TARGET,
        phrase="p",
        entries=(RankedEntry(1, "v", "v.png", 0.5, "fusion"),),
    )
    doc = ranked_list_to_json_dict(ranked, RetrievalConfig())
    assert doc["instruction"] == ""
    assert doc["entries"][0]["view_id"] == "v"
