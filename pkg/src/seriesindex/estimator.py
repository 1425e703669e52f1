"""scikit-learn style front ends: an iSAX transformer and an exact 1-NN index."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .engine import RunConfig, run_session
from .summaries import BreakpointTable, check_normalized, compute_paa, isax_symbols

__all__ = ["ISAXTransformer", "SeriesIndex"]


class ISAXTransformer(TransformerMixin, BaseEstimator):
    """Map series (rows) to full-cardinality iSAX symbols, one per segment.

    Parameters
    ----------
    segments : int, default=8
        Number of PAA segments; must divide the series length.
    max_bits : int, default=8
        Bits per segment symbol.
    """

    def __init__(self, segments=8, max_bits=8):
        self.segments = segments
        self.max_bits = max_bits

    def fit(self, X, y=None):
        X = check_array(X, dtype=[np.float64, np.float32])
        n = X.shape[1]
        if n % self.segments:
            raise ValueError(f"series length {n} is not divisible by {self.segments}")
        check_normalized(X)
        self.table_ = BreakpointTable(self.max_bits)
        self.n_features_in_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "table_")
        X = check_array(X, dtype=[np.float64, np.float32])
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return isax_symbols(compute_paa(X, self.segments), self.table_)


class SeriesIndex(BaseEstimator):
    """Exact Euclidean 1-NN search over z-normalised series.

    The index is built by ``n_threads`` workers and queried by the same
    number. ``kneighbors`` returns distances and indices like
    ``sklearn.neighbors.NearestNeighbors`` with ``n_neighbors=1``.

    Parameters
    ----------
    segments : int, default=8
    leaf_size : int, default=2000
    max_bits : int, default=8
    n_threads : int, default=1
    beta : float, default=1.0
        Backoff multiplier applied to the running average part time.
    max_backoff : float, default=0.1
        Upper bound on one backoff wait, in seconds.
    """

    def __init__(self, segments=8, leaf_size=2000, max_bits=8, n_threads=1,
                 beta=1.0, max_backoff=0.1):
        self.segments = segments
        self.leaf_size = leaf_size
        self.max_bits = max_bits
        self.n_threads = n_threads
        self.beta = beta
        self.max_backoff = max_backoff

    def _config(self):
        return RunConfig(segments=self.segments, leaf_size=self.leaf_size,
                         max_bits=self.max_bits, threads=self.n_threads,
                         beta=self.beta, max_backoff=self.max_backoff)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float32)
        if y is not None:
            y = np.asarray(y)
            if len(y) != len(X):
                raise ValueError("X and y have different lengths")
        check_normalized(X)
        config = self._config()
        config.validate(X.shape[1])
        self.build_report_, self.index_ = run_session(X, None, config)
        self.n_features_in_ = X.shape[1]
        self.y_ = y
        return self

    def kneighbors(self, X, n_neighbors=1, return_distance=True):
        check_is_fitted(self, "index_")
        if n_neighbors != 1:
            raise ValueError("only n_neighbors=1 is supported")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        report, _ = run_session(self.index_.data, X, self._config(), index=self.index_)
        self.query_report_ = report
        ind = np.array([[a[1]] for a in report.answers], dtype=np.int64).reshape(-1, 1)
        if not return_distance:
            return ind
        dist = np.array([[a[2]] for a in report.answers]).reshape(-1, 1)
        return dist, ind

    def predict(self, X):
        """Label of the nearest series (its index when fitted without ``y``)."""
        ind = self.kneighbors(X, return_distance=False)[:, 0]
        if self.y_ is None:
            return ind
        return self.y_[ind]
