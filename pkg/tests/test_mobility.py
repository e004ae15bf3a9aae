import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from trajpriv.grid import GridMap
from trajpriv.mobility import (Belief, DegenerateRowWarning, delta_location_set, load_matrix,
                               normalize_counts, propagate_prior, random_walk_matrix, restricted_prior,
                               surrogate)


def test_normalize_counts():
    m = normalize_counts([[1, 1, 2], [0, 3, 0], [2, 0, 2]])
    assert m[0].tolist() == [0.25, 0.25, 0.5]
    assert np.allclose(normalize_counts(np.eye(4)), np.eye(4))


def test_normalize_zero_row_becomes_self_loop():
    with pytest.warns(DegenerateRowWarning):
        m = normalize_counts([[1, 1, 0], [0, 0, 0], [1, 0, 1]])
    assert m[1].tolist() == [0.0, 1.0, 0.0]


def test_normalize_rejects_negative():
    with pytest.raises(ValueError):
        normalize_counts([[1, -1], [0, 1]])


def test_load_matrix(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 1 2\n0 1 0\n3 0 1\n")
    m = normalize_counts(load_matrix(path))
    assert np.allclose(m.sum(axis=1), 1)
    assert m[0, 2] == 0.5


def test_random_walk_matrix():
    g = GridMap(3, 3)
    m = random_walk_matrix(g, stay=4, step=1)
    assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)
    assert m[4, 4] == pytest.approx(0.5)  # center: 4 / (4 + 4)
    assert m[0, 0] == pytest.approx(4 / 6)  # corner has two neighbours


def test_propagate_examples():
    post = Belief([1.0, 0.0], "posterior")
    assert propagate_prior(post, np.eye(2)).probs.tolist() == [1.0, 0.0]
    # hand multiplication: [0.2*0.5 + 0.8*0.25, 0.2*0.5 + 0.8*0.75] = [0.3, 0.7]
    out = propagate_prior(Belief([0.2, 0.8], "posterior"), [[0.5, 0.5], [0.25, 0.75]])
    assert np.allclose(out.probs, [0.3, 0.7], atol=1e-15)
    assert out.role == "prior" and out.t == 2


def test_propagate_uniform_doubly_stochastic():
    m = np.array([[0.2, 0.5, 0.3], [0.5, 0.3, 0.2], [0.3, 0.2, 0.5]])
    out = propagate_prior(Belief.uniform(3, role="posterior"), m)
    assert np.allclose(out.probs, 1 / 3)


def test_propagate_errors():
    with pytest.raises(ValueError):
        propagate_prior(Belief.uniform(3, role="posterior"), np.eye(2))
    with pytest.raises(ValueError):
        propagate_prior(Belief.uniform(2), np.eye(2))  # prior, not posterior


@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
@settings(max_examples=80, deadline=None)
def test_propagate_conserves_mass(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.random((n, n)) * (rng.random((n, n)) < 0.6)
    m[np.arange(n), np.arange(n)] += 1e-3
    m /= m.sum(axis=1, keepdims=True)
    p = rng.dirichlet(np.ones(n))
    out = propagate_prior(Belief(p, "posterior"), m)
    assert abs(out.probs.sum() - 1) <= 1e-12
    assert (out.probs >= 0).all()


def test_delta_set_examples():
    s = delta_location_set(Belief([0.5, 0.3, 0.2]), 0.3)
    assert s.members == (0, 1) and s.mass == pytest.approx(0.8)
    assert delta_location_set(Belief.point(5, 3), 0.2).members == (3,)
    s = delta_location_set(Belief.uniform(4), 0.5)
    assert s.members == (0, 1)


def test_delta_set_enumeration_oracle():
    # Every 2-subset of a uniform 4-cell prior reaches mass 0.5; no singleton does.
    p = Belief.uniform(4)
    assert all(p.probs[[a, b]].sum() >= 0.5 for a in range(4) for b in range(a + 1, 4))
    assert max(p.probs) < 0.5
    assert len(delta_location_set(p, 0.5)) == 2


def test_delta_set_skips_impossible():
    s = delta_location_set(Belief([0.6, 0.4, 0.0, 0.0]), 0.01)
    assert s.members == (0, 1)


probs = st.integers(2, 30).flatmap(
    lambda n: arrays(float, n, elements=st.floats(0.0, 1.0)).filter(lambda a: a.sum() > 1e-3))


@given(probs, st.floats(0.01, 0.99))
@settings(max_examples=150, deadline=None)
def test_delta_set_minimal(raw, delta):
    p = Belief(raw / raw.sum())
    s = delta_location_set(p, delta)
    assert s.mass >= 1 - delta - 1e-12
    smallest = min(s.members, key=lambda c: p.probs[c])
    assert s.mass - p.probs[smallest] < 1 - delta - 1e-12 or p.probs[smallest] < 1e-12


@given(probs, st.floats(0.02, 0.98), st.floats(0.01, 0.98))
@settings(max_examples=100, deadline=None)
def test_delta_set_monotone(raw, d1, d2):
    p = Belief(raw / raw.sum())
    small, big = sorted([d1, d2])
    assert set(delta_location_set(p, big).members) <= set(delta_location_set(p, small).members)


def test_delta_bounds():
    with pytest.raises(ValueError):
        delta_location_set(Belief.uniform(3), 0.0)
    with pytest.raises(ValueError):
        delta_location_set(Belief.uniform(3), 1.0)


def test_surrogate():
    g = GridMap(4, 4, 5.0)
    s = delta_location_set(Belief.uniform(16, [5, 6]), 0.1)
    assert surrogate(5, s, g) == 5
    # cell 0 is at (2.5, 2.5): member 5 lies 5*sqrt(2) away, member 6 further
    s2 = delta_location_set(Belief.uniform(16, [1, 2]), 0.1)
    assert surrogate(0, s2, g) == 1
    # cell 5 (7.5, 7.5) is equidistant from 4 and 6 -> lower id
    s3 = delta_location_set(Belief.uniform(16, [4, 6]), 0.1)
    assert g.distances[5, 4] == g.distances[5, 6]
    assert surrogate(5, s3, g) == 4


def test_surrogate_empty():
    from trajpriv.mobility import DeltaSet
    with pytest.raises(ValueError):
        surrogate(0, DeltaSet((), 0.1, 0.0), GridMap(2, 2))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=50, deadline=None)
def test_surrogate_in_set(seed):
    rng = np.random.default_rng(seed)
    g = GridMap(5, 4, 1.0)
    p = rng.dirichlet(np.full(g.n, 0.3))
    s = delta_location_set(Belief(p), 0.2)
    x = int(rng.integers(g.n))
    y = surrogate(x, s, g)
    assert y in s
    assert (y == x) == (x in s)


def test_restricted_prior():
    p = Belief([0.5, 0.3, 0.2])
    s = delta_location_set(p, 0.3)
    assert np.allclose(restricted_prior(p, s), [0.625, 0.375, 0.0])


def test_belief_validation():
    with pytest.raises(ValueError):
        Belief([0.5, 0.6])
    with pytest.raises(ValueError):
        Belief([1.5, -0.5])
