import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.neighbors import NearestNeighbors

from seriesindex import ISAXTransformer, SeriesIndex
from seriesindex.datasets import generate_queries, random_walks

from . import oracles


@pytest.fixture(scope="module")
def data():
    return random_walks(3000, 64, seed=41)


def test_params_and_clone():
    est = SeriesIndex(segments=4, leaf_size=50, n_threads=2)
    assert est.get_params()["leaf_size"] == 50
    other = clone(est)
    assert other.get_params() == est.get_params() and other is not est
    est.set_params(beta=0.5)
    assert est.beta == 0.5


def test_kneighbors_matches_sklearn(data):
    Q = generate_queries(data, 12, 0.1, 42)
    est = SeriesIndex(leaf_size=100, n_threads=3).fit(data)
    dist, ind = est.kneighbors(Q)
    ref_dist, ref_ind = NearestNeighbors(n_neighbors=1, algorithm="brute").fit(
        data.astype(np.float64)).kneighbors(Q.astype(np.float64))
    assert dist.shape == ind.shape == (12, 1)
    np.testing.assert_allclose(dist, ref_dist, rtol=1e-5)
    np.testing.assert_array_equal(ind, ref_ind)
    assert est.build_report_.series == len(data)


def test_predict_with_and_without_labels(data):
    y = np.arange(len(data)) % 7
    Q = data[[5, 17, 900]]
    assert list(SeriesIndex(leaf_size=100).fit(data).predict(Q)) == [5, 17, 900]
    assert list(SeriesIndex(leaf_size=100).fit(data, y).predict(Q)) == list(y[[5, 17, 900]])


def test_validation_errors(data):
    with pytest.raises(NotFittedError):
        SeriesIndex().kneighbors(data[:1])
    est = SeriesIndex(leaf_size=100).fit(data)
    with pytest.raises(ValueError):
        est.kneighbors(data[:1], n_neighbors=2)
    with pytest.raises(ValueError):
        est.kneighbors(data[:1, :32])
    with pytest.raises(ValueError):
        SeriesIndex(segments=7).fit(data)
    with pytest.raises(ValueError):
        SeriesIndex().fit(data, np.zeros(3))


def test_unnormalised_input_warns():
    X = random_walks(50, 16, 0) * 10
    with pytest.warns(UserWarning, match="z-normalised"):
        SeriesIndex(segments=4).fit(X)


def test_transformer_symbols(data):
    t = ISAXTransformer(segments=8, max_bits=3).fit(data)
    S = t.transform(data[:20])
    assert S.shape == (20, 8)
    for row, s in zip(S, data[:20]):
        want = [oracles.symbol(v, 3) for v in oracles.paa(s, 8)]
        assert list(row) == want
    with pytest.raises(ValueError):
        t.transform(data[:2, :32])
