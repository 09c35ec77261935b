"""Shared fixtures: generated corpora built once per session."""

import pytest

import affmem as am


@pytest.fixture(scope="session")
def small_corpus():
    return am.generate(
        am.GenParams(seed=7, n_envs=1, n_unambiguous=3, n_lexical=1, n_visual=1)
    )


@pytest.fixture(scope="session")
def small_memory(small_corpus):
    return am.build_corpus_memories(small_corpus)["env00"]


@pytest.fixture(scope="session")
def mixed_corpus():
    return am.generate(am.mixed_benchmark_params(seed=0))


@pytest.fixture(scope="session")
def mixed_memories(mixed_corpus):
    return am.build_corpus_memories(mixed_corpus)


@pytest.fixture(scope="session")
def tie_corpus():
    return am.generate(am.tie_benchmark_params(seed=0))


@pytest.fixture(scope="session")
def tie_memories(tie_corpus):
    return am.build_corpus_memories(tie_corpus)


@pytest.fixture()
def provider(small_memory):
    return am.MockProvider(small_memory.d_t, small_memory.d_m)


def two_room_views():
    """Six views in two rooms 20 m apart; the canonical clustering fixture."""
    views = []
    for i, (room, cx) in enumerate([("kitchen", 0.0), ("office", 20.0)]):
        for j in range(3):
            views.append(
                am.ViewRecord(
                    image_ref=f"fx/v{i}{j}.png",
                    pose=am.Position3D(cx + 0.3 * j, 0.2 * j, 1.2),
                    width=640,
                    height=480,
                    env_id="fx",
                    caption=f"{room} item{i}{j}",
                    room=room,
                    plantings=(am.Planting(f"{room} item{i}{j}", "pick", 0.7),),
                )
            )
    return views


@pytest.fixture(scope="session")
def two_room_memory():
    return am.build_memory(two_room_views(), am.BuildConfig())


# One summary line per acceptance criterion, appended by test_acceptance
# and echoed after the run so the verdicts survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
