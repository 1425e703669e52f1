import numpy as np
import pytest

from seriesindex.datasets import generate_queries, random_walks
from seriesindex.engine import RunConfig, Session, build_index, run_queries, run_session
from seriesindex.faults import FaultPlan

from . import oracles


@pytest.fixture(scope="module")
def data():
    return random_walks(4000, 64, seed=31)


@pytest.fixture(scope="module")
def queries(data):
    return generate_queries(data, 8, 0.05, 32)


def check_exact(data, queries, answers):
    for (q, ref, dist), query in zip(answers, queries):
        assert dist == pytest.approx(oracles.nearest(data, query)[1], rel=1e-6)


def test_single_thread_report(data, queries):
    report, index = run_session(data, queries, RunConfig(leaf_size=100))
    assert report.total_time == pytest.approx(
        report.summarization_time + report.tree_time + report.query_time)
    assert min(report.summarization_time, report.tree_time, report.query_time) >= 0
    assert (report.help_summarization, report.help_tree, report.help_query) == (0, 0, 0)
    assert report.multiplicity == 1.0 and report.tree_multiplicity == 1.0
    assert index.count == len(data)
    check_exact(data, queries, report.answers)
    assert len(report.row()) == len(report.COLUMNS)


def test_no_queries_gives_zero_query_time(data):
    report, _ = run_session(data, None, RunConfig(leaf_size=100, threads=2))
    assert report.queries == 0 and report.answers == []
    assert report.query_time < 0.05


def test_multi_thread_exact(data, queries):
    report, _ = run_session(data, queries, RunConfig(leaf_size=100, threads=4))
    check_exact(data, queries, report.answers)
    assert report.crashed == 0


@pytest.mark.parametrize("faults", [
    ["t1:bc:0.3:crash"],
    ["t0:tp:0.5:crash"],
    ["t2:query:0.4:crash"],
    ["t0:bc:0.1:crash", "t1:tp:0.2:crash", "t2:query:0.6:crash"],
    ["t1:bc:0.5:delay=30", "t2:query:0.5:delay=30"],
])
def test_faults_keep_answers_exact(data, queries, faults):
    plan = FaultPlan.parse(faults)
    report, index = run_session(data, queries, RunConfig(leaf_size=100, threads=4), plan)
    crashes = sum(f.kind == "crash" for f in plan.faults)
    assert report.crashed == crashes and report.faults_fired == len(faults)
    assert index.buffers.distinct_ids() == set(range(len(data)))
    check_exact(data, queries, report.answers)


def test_all_but_one_crash_in_first_phase(data, queries):
    plan = FaultPlan.parse([f"t{t}:bc:0:crash" for t in range(1, 4)])
    report, _ = run_session(data, queries, RunConfig(leaf_size=100, threads=4), plan)
    assert report.crashed == 3
    check_exact(data, queries, report.answers)


def test_prebuilt_index_reused(data, queries):
    index = build_index(data, RunConfig(leaf_size=100, threads=2))
    report = run_queries(index, queries, RunConfig(leaf_size=100, threads=3))
    assert report.summarization_time == 0 and report.tree_time == 0
    check_exact(data, queries, report.answers)


def test_config_validation(data):
    with pytest.raises(ValueError):
        run_session(data, None, RunConfig(segments=7))
    with pytest.raises(ValueError):
        run_session(data, None, RunConfig(threads=0))
    with pytest.raises(ValueError):
        run_session(data, None, RunConfig(threads=2), FaultPlan.parse(["t2:bc:0:crash"]))
    with pytest.raises(ValueError):
        run_session(data[:0], data[:1], RunConfig())


def test_backoff_floor():
    assert RunConfig(threads=1).backoff_floor() == 0.0
    assert RunConfig(threads=4).backoff_floor() > 0
    assert RunConfig(threads=4, min_backoff=0.0).backoff_floor() == 0.0


def test_phase_times_ignore_crashed_threads(data):
    s = Session(data, None, RunConfig(threads=2))
    s.start = 0.0
    s.stamps = [{"summarization": 1.0, "tree": 2.0, "query": 3.0},
                {"summarization": 9.0}]
    s.crashed = [False, True]
    assert s.phase_times() == {"summarization": 1.0, "tree": 1.0, "query": 1.0}
