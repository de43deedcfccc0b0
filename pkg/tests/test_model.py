import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simplexpa import ModelParams, model
from simplexpa.tables import PmfTable

from oracles import SetComplex, one_step_outcomes

DELTAS = [-0.5, 0.0, 1.0, 2.5]


def grown(k, delta, n, seed=0):
    st_ = model.new_complex(ModelParams(k, delta))
    return model.run(st_, n, np.random.default_rng(seed))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("delta", DELTAS)
def test_matches_set_oracle(k, delta):
    n = 60 if k < 3 else 30
    u = np.random.default_rng(100 * k + int(4 * delta + 4)).random(n)
    oracle = SetComplex(k, delta)
    for x in u:
        oracle.step_with_uniform(x)
    st_ = model.run_with_uniforms(model.new_complex(ModelParams(k, delta)), u)
    assert st_.chosen_labels().tolist() == oracle.chosen
    assert np.array_equal(st_.all_degree_vectors(), oracle.all_degree_vectors())
    for j in (1, st_.n_labels):
        assert st_.vertices(j) == oracle.labels[j - 1]


@given(st.integers(0, 2), st.sampled_from(DELTAS), st.lists(st.floats(0, 1, exclude_max=True), max_size=25))
def test_oracle_agreement_property(k, delta, u):
    oracle = SetComplex(k, delta)
    for x in u:
        oracle.step_with_uniform(x)
    st_ = model.run_with_uniforms(model.new_complex(ModelParams(k, delta)), np.array(u, dtype=float))
    assert np.array_equal(st_.all_degree_vectors(), oracle.all_degree_vectors())
    assert np.allclose(st_.selection_probabilities() * oracle.total_weight(), oracle.weights())


def test_initial_snapshot():
    for k in range(4):
        p = ModelParams(k, 0.0)
        st_ = model.new_complex(p)
        counts = model.degree_counts(st_)
        assert counts.as_dict() == {p.minimal_vector(): k + 2}
        assert st_.n_labels == k + 2


def test_one_step_enumeration():
    # each initial label is equally likely; outcomes enumerated on the set oracle
    want = one_step_outcomes(1)
    assert want[1] == {(2, 1): 4, (3, 2): 1}
    assert want[2] == {(2, 1): 3, (3, 1): 1, (3, 2): 1}
    assert want[3] == {(2, 1): 2, (3, 1): 2, (3, 2): 1}
    for label in (1, 2, 3):
        u = (label - 0.5) / 3
        st_ = model.run_with_uniforms(model.new_complex(ModelParams(1, 0.0)), [u])
        assert st_.chosen_labels().tolist() == [label]
        assert model.degree_counts(st_).as_dict() == {k: float(v) for k, v in want[label].items()}


def test_new_labels_follow_removal_order():
    st_ = model.run_with_uniforms(model.new_complex(ModelParams(2, 0.0)), [0.0])
    # label 1 = {1,2,3}; new vertex 5 replaces 3, then 2, then 1
    assert [st_.vertices(j) for j in st_.labels_born_at(1)] == [(1, 2, 5), (1, 3, 5), (2, 3, 5)]
    assert [st_.vertices(j) for j in st_.labels_born_at(0)] == [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]
    assert all(model.degree_vector(st_, j) == (3, 2, 1) for j in st_.labels_born_at(1))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("delta", DELTAS)
def test_counting_identities(k, delta):
    st_ = grown(k, delta, 3000, seed=k)
    rep = model.invariant_report(st_)
    assert rep["ok"]
    p = st_.params
    assert st_.n_labels == p.n_simplices(3000)
    assert int(st_.k_degrees().sum()) == p.degree_sum(3000)
    assert st_.total_weight() == pytest.approx(p.total_weight(3000), rel=1e-12)
    assert st_.selection_probabilities().sum() == pytest.approx(1.0, abs=1e-12)
    assert model.degree_counts(st_).total() == p.n_simplices(3000)


def test_step_and_run_consume_the_same_stream():
    p = ModelParams(2, 1.0)
    a = model.new_complex(p)
    g = np.random.default_rng(3)
    for _ in range(50):
        model.step(a, g)
    b = model.run(model.new_complex(p), 50, np.random.default_rng(3))
    assert np.array_equal(a.chosen_labels(), b.chosen_labels())


def test_capacity_growth_is_transparent():
    p = ModelParams(1, 0.0)
    g1, g2 = np.random.default_rng(9), np.random.default_rng(9)
    a = model.new_complex(p)
    for _ in range(20):
        model.run(a, 37, g1)
    b = model.run(model.new_complex(p), 740, g2)
    assert np.array_equal(a.all_degree_vectors(), b.all_degree_vectors())


def test_simplex_degree_and_containment():
    st_ = grown(2, 0.0, 200, seed=4)
    oracle = SetComplex(2, 0.0)
    for c in st_.chosen_labels():
        oracle.attach(int(c))
    for label in (1, 5, 40, st_.n_labels):
        verts = st_.vertices(label)
        for r in (1, 2, 3):
            assert st_.simplex_degree(verts[:r]) == oracle.degree(verts[:r])
    v = st_.vertices(7)[:2]
    assert len(st_.containing_labels(v)) == sum(1 for lab in oracle.labels if set(v) <= set(lab))
    with pytest.raises(KeyError):
        st_.simplex_degree((1, 10**6))


def test_label_errors():
    st_ = grown(1, 0.0, 5)
    with pytest.raises(KeyError):
        model.degree_vector(st_, 0)
    with pytest.raises(KeyError):
        model.degree_vector(st_, st_.n_labels + 1)
    with pytest.raises(ValueError):
        model.run(st_, -1, np.random.default_rng(0))


def test_copy_is_independent():
    a = grown(1, 0.0, 100)
    b = a.copy()
    model.run(b, 100, np.random.default_rng(1))
    assert a.step == 100 and b.step == 200
    assert model.invariant_report(a)["ok"]


def test_label_vector_samples_match_full_runs():
    p = ModelParams(1, 1.0)
    u = np.random.default_rng(12).random((30, 40))
    batch = model.label_vector_samples(p, 40, 2, u)
    for r in range(30):
        st_ = model.run_with_uniforms(model.new_complex(p), u[r])
        assert tuple(batch[r]) == model.degree_vector(st_, 2)
    assert np.array_equal(model.label_vector_samples(p, 0, 1, u[:, :0]),
                          np.tile([2, 1], (30, 1)))


def test_snapshot_and_trajectory_files(tmp_path):
    st_ = grown(1, 0.0, 20, seed=2)
    path = tmp_path / "snap.json"
    model.write_snapshot(st_, path)
    data = json.loads(path.read_text())
    assert data["schema"] == model.SCHEMA and data["n"] == 20
    assert sum(c["count"] for c in data["counts"]) == 43
    tpath = tmp_path / "traj.csv"
    model.write_trajectory_csv(st_, tpath)
    rows = list(csv.reader(open(tpath)))
    assert rows[0] == ["step", "chosen_label", "new_labels"]
    assert rows[1][2] == "4 5"
    cpath = tmp_path / "counts.csv"
    model.degree_counts(st_).to_csv(cpath, "count", integer=True)
    back = PmfTable.from_csv(cpath, st_.params)
    assert back.as_dict() == model.degree_counts(st_).as_dict()
