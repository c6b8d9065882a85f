"""One-inclusion graphs: orientations, shattering dimension, list-PAC runs.

The frozen numbers (edge counts, optimal out-degrees, dimensions) were
computed with a separate brute-force enumerator over the same six small
classes before this module existed.
"""

import numpy as np
import pytest

from listboost import (
    BudgetExceeded,
    EmptyClass,
    FiniteClass,
    InvalidParams,
    NonDeterministicLearner,
    NotRealizable,
    RandomStream,
    SearchExhausted,
    UnknownInstance,
    build_oig,
    find_orientation,
    initial_cover,
    k_degree,
    k_list_pac_learn,
    kds_dimension,
    load_finite_class,
    one_inclusion_list_predict,
    oig_list_function,
    replay_list_pac,
    restrict_class,
    save_finite_class,
    wrong_label_learner,
)
from listboost.core import make_dataset
from tests.conftest import planted_dataset

# name -> (optimal max out-degree for k=1..3, dimension for k=1..2)
FROZEN = {
    "point1": ((1, 0, 0), (1, 0)),
    "cube2": ((1, 0, 0), (2, 0)),
    "single": ((0, 0, 0), (0, 0)),
    "tri1": ((1, 1, 0), (1, 1)),
    "hexagon": ((1, 0, 0), (2, 1)),
    "grid9": ((2, 1, 0), (2, 2)),
}

EDGE_COUNTS = {"point1": 1, "cube2": 4, "single": 3, "tri1": 1,
               "hexagon": 6, "grid9": 6}


def test_from_rows_sorts_and_dedups():
    fc = FiniteClass.from_rows([(1, 0), (0, 1), (1, 0)], columns=("u", "v"))
    assert fc.size == 2
    assert fc.table.tolist() == [[0, 1], [1, 0]]
    assert fc.alphabet == (0, 1)
    with pytest.raises(ValueError):
        fc.table[0, 0] = 5  # the table is frozen


def test_class_validation():
    with pytest.raises(EmptyClass):
        FiniteClass(table=np.zeros((0, 2), dtype=np.int64), columns=("a", "b"),
                    alphabet=(0,))
    with pytest.raises(InvalidParams):
        FiniteClass(table=np.array([[0, 0], [0, 0]]), columns=("a", "b"),
                    alphabet=(0,))
    with pytest.raises(InvalidParams):
        FiniteClass(table=np.array([[0, 2]]), columns=("a", "b"), alphabet=(0, 1))
    fc = FiniteClass.from_rows([(0, 1)], columns=("a", "b"))
    with pytest.raises(UnknownInstance):
        fc.column_of("zzz")


def test_class_json_round_trip(tmp_path, catalog):
    fc = catalog["hexagon"]
    path = tmp_path / "class.json"
    save_finite_class(fc, path)
    back = load_finite_class(path)
    assert back.fingerprint == fc.fingerprint
    assert back.columns == fc.columns
    assert np.array_equal(back.table, fc.table)


def test_restrict_class_dedups(catalog):
    sub = restrict_class(catalog["grid9"], [0])
    assert sub.size == 3 and sub.n == 1
    with pytest.raises(InvalidParams):
        restrict_class(catalog["grid9"], [])


@pytest.mark.parametrize("name", sorted(EDGE_COUNTS))
def test_edge_counts_match_enumerator(catalog, name):
    graph = build_oig(catalog[name])
    assert len(graph.edges) == EDGE_COUNTS[name]


def test_edge_structure_hexagon(catalog):
    graph = build_oig(catalog["hexagon"])
    assert all(len(e.members) == 2 for e in graph.edges)
    # Every vertex sits on one edge per direction.
    assert all(len(ids) == 2 for ids in graph.incident)
    assert k_degree(graph, 0, 1) == 2
    assert k_degree(graph, 0, 2) == 0


@pytest.mark.parametrize("name", sorted(FROZEN))
@pytest.mark.parametrize("k", (1, 2, 3))
def test_optimal_orientations_match_enumerator(catalog, name, k):
    graph = build_oig(catalog[name])
    orientation = find_orientation(graph, k, strategy="exhaustive")
    assert orientation.optimal
    assert orientation.max_out_degree == FROZEN[name][0][k - 1]
    # Every edge picks exactly min(k, |e|) vertices from its own members.
    for eid, edge in enumerate(graph.edges):
        chosen = orientation.sigma[eid]
        assert len(chosen) == min(k, len(edge.members))
        assert set(chosen) <= set(edge.members)


def test_greedy_never_beats_exhaustive(catalog):
    for name in FROZEN:
        graph = build_oig(catalog[name])
        greedy = find_orientation(graph, 1, strategy="greedy")
        assert greedy.max_out_degree >= FROZEN[name][0][0]
        assert not greedy.optimal or greedy.max_out_degree == 0


def test_auto_prefers_exhaustive_within_budget(catalog):
    graph = build_oig(catalog["cube2"])
    auto = find_orientation(graph, 1, strategy="auto")
    assert auto.max_out_degree == 1 and auto.optimal


def test_budget_exceeded_and_greedy_fallback(catalog):
    graph = build_oig(catalog["grid9"])
    with pytest.raises(BudgetExceeded):
        find_orientation(graph, 1, strategy="exhaustive", budget=2)
    fallback = find_orientation(graph, 1, strategy="auto", budget=2)
    assert fallback.strategy == "greedy"
    assert fallback.max_out_degree >= 2


@pytest.mark.parametrize("name", sorted(FROZEN))
@pytest.mark.parametrize("k", (1, 2))
def test_dimension_matches_enumerator(catalog, name, k):
    assert kds_dimension(catalog[name], k) == FROZEN[name][1][k - 1]


def test_dimension_budget(catalog):
    with pytest.raises(BudgetExceeded):
        kds_dimension(catalog["grid9"], 1, budget=0)


@pytest.mark.parametrize("name", sorted(FROZEN))
@pytest.mark.parametrize("k", (1, 2, 3))
def test_leave_one_out_misses_equal_out_degree(catalog, name, k):
    """Rotating one query through a full row's sample shares one orientation,
    so the total misses for a row equal its out-degree there."""
    fc = catalog[name]
    graph = build_oig(fc)
    orientation = find_orientation(graph, k, strategy="exhaustive")
    worst = 0
    for row in range(fc.size):
        misses = 0
        for j, query in enumerate(fc.columns):
            sample = [(c, int(fc.table[row, i]))
                      for i, c in enumerate(fc.columns) if i != j]
            pred = one_inclusion_list_predict(fc, sample, query, k,
                                              strategy="exhaustive")
            if int(fc.table[row, j]) not in pred.labels:
                misses += 1
        assert misses <= orientation.max_out_degree
        worst = max(worst, misses)
    assert worst == FROZEN[name][0][k - 1]


def test_predict_on_revealed_column_is_exact(catalog):
    fc = catalog["hexagon"]
    sample = [(fc.columns[0], int(fc.table[0, 0])),
              (fc.columns[1], int(fc.table[0, 1]))]
    pred = one_inclusion_list_predict(fc, sample, fc.columns[0], 1)
    assert pred.labels == (int(fc.table[0, 0]),)


def test_predict_rejects_unrealizable_sample(catalog):
    fc = catalog["point1"]  # rows (0,) and (1,) on a single column
    with pytest.raises(NotRealizable):
        one_inclusion_list_predict(
            fc, [(fc.columns[0], 0), (fc.columns[0], 1)], fc.columns[0], 1)


def test_oig_list_function_declares_k(catalog):
    fc = catalog["grid9"]
    mu = oig_list_function(fc, [(fc.columns[0], 0)], k=2)
    assert mu.declared_size == 2
    for c in fc.columns:
        assert 1 <= len(mu(c)) <= 2


def test_initial_cover_frozen_budget_and_coverage(catalog):
    # q = ceil((d+1) ln 2m); hexagon with k=2 has d=1, so m=8 gives
    # ceil(2 ln 16) = 6.
    fc = catalog["hexagon"]
    ds = planted_dataset(fc, m=8, seed=3)
    res = initial_cover(fc, ds, k=2)
    assert res.d == 1 and res.q == 6
    assert res.mu.declared_size == 2 * 6
    for ex in ds.examples:
        assert ex.label in res.mu(ex.instance)
    assert res.rounds_run <= res.q
    for rnd in res.rounds:
        assert len(rnd.subset) <= res.d
        assert rnd.coverage * (res.d + 1) >= rnd.survivors_before
        assert not rnd.fallback


def test_initial_cover_fails_with_understated_dimension(catalog):
    # With d pinned to 0 the only candidate subset is empty, and a single
    # 1-list cannot cover two columns carrying different labels.
    fc = catalog["hexagon"]
    u, v = fc.columns
    ds = make_dataset([(u, 0), (v, 1)], alphabet=fc.alphabet)
    with pytest.raises(SearchExhausted):
        initial_cover(fc, ds, k=1, d=0)


def test_wrong_label_learner_excludes_only_false_labels(catalog):
    # ell = ceil(8 p^2 ln 2m) = ceil(72 ln 12) = 179 for p=3, m=6.
    fc = catalog["hexagon"]
    ds = planted_dataset(fc, m=6, seed=5)
    res = wrong_label_learner(fc, ds, d=1, rng=RandomStream(2, ("wl",)))
    assert res.p == 3 and res.ell == 179
    assert res.n_u == 4 * 3 * 1
    assert res.consistent
    assert res.max_true_vote < 1.0 / (2 * res.p)
    for ex in ds.examples:
        lst = res.mu(ex.instance)
        assert ex.label in lst
        assert len(lst) == res.p - 1
    assert res.record_group.draws is not None
    assert len(res.record_group.draws) == res.ell


def test_list_pac_learning_hexagon(catalog):
    fc = catalog["hexagon"]
    ds = planted_dataset(fc, m=10, seed=7)
    res = k_list_pac_learn(fc, ds, k=2, seed=1)
    assert res.consistent_on_train
    assert res.mu.declared_size == 2
    for ex in ds.examples:
        assert ex.label in res.mu(ex.instance)
    assert res.p == res.k * res.q
    assert res.record.meta["class_fingerprint"] == fc.fingerprint
    assert res.compression_size == sum(g.size() for g in res.record.groups)


def test_list_pac_single_row_class(catalog):
    fc = catalog["single"]
    ds = make_dataset([(c, int(fc.table[0, i])) for i, c in enumerate(fc.columns)],
                      alphabet=fc.alphabet)
    res = k_list_pac_learn(fc, ds, k=1, seed=0)
    assert res.consistent_on_train and res.d == 0
    assert res.rounds_run == 0
    for i, c in enumerate(fc.columns):
        assert res.mu(c) == (int(fc.table[0, i]),)


def _mixed_grid_dataset(fc):
    # Realizable by the row (u -> 1, v -> 2); the label split across the two
    # columns keeps the cover from collapsing to singletons, so at least one
    # elimination round has to run.
    u, v = fc.columns
    return make_dataset([(u, 1)] * 2 + [(v, 2)] * 4, alphabet=fc.alphabet)


def test_list_pac_runs_elimination_rounds(catalog):
    fc = catalog["grid9"]
    ds = _mixed_grid_dataset(fc)
    res = k_list_pac_learn(fc, ds, k=1, seed=4)
    assert res.consistent_on_train
    assert res.rounds_run >= 1
    for rnd in res.rounds:
        assert rnd.max_true_vote < 1.0 / (2 * rnd.p_j)
    assert res.early_stopped or res.rounds_run == res.p - res.k
    assert res.mu(fc.columns[0]) == (1,) and res.mu(fc.columns[1]) == (2,)


def test_list_pac_rejects_unrealizable(catalog):
    fc = catalog["point1"]
    ds = make_dataset([(fc.columns[0], 0), (fc.columns[0], 1)], alphabet=(0, 1))
    with pytest.raises(NotRealizable):
        k_list_pac_learn(fc, ds, k=1)


def test_replay_list_pac_round_trip(catalog):
    fc = catalog["grid9"]
    ds = _mixed_grid_dataset(fc)
    res = k_list_pac_learn(fc, ds, k=1, seed=4)
    assert res.rounds_run >= 1  # the replay must walk the elimination path
    rep = replay_list_pac(res.record, ds, fc)
    for c in fc.columns:
        assert rep(c) == res.mu(c)

    loaded = type(res.record).from_json_dict(res.record.to_json_dict())
    slots = loaded.group("cover").slots
    slots[0] = type(slots[0])(slot=slots[0].slot, indices=slots[0].indices,
                              pred_hash="f" * len(slots[0].pred_hash))
    with pytest.raises(NonDeterministicLearner):
        replay_list_pac(loaded, ds, fc)


def test_replay_list_pac_guards(catalog):
    fc = catalog["grid9"]
    ds = _mixed_grid_dataset(fc)
    res = k_list_pac_learn(fc, ds, k=1, seed=4)
    with pytest.raises(InvalidParams):
        replay_list_pac(res.record, ds, None)
    with pytest.raises(InvalidParams):
        replay_list_pac(res.record, ds, catalog["hexagon"])
