"""scikit-learn style wrapper: a receiver config fitted to a set of held inputs."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .blocks import ChemSicalConfig
from .channel import InputPmf
from .evaluation import proportion_halfwidth, simulate_outcomes, weighted_pe
from .exceptions import ConfigError
from .sic import reference_tree


def _counts(X) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ConfigError("X must hold one input count per row")
        X = X[:, 0]
    X = np.atleast_1d(X)
    if X.size and (np.any(X < 0) or np.any(X != np.round(X))):
        raise ConfigError("input counts must be non-negative integers")
    return X.astype(np.int64)


class ReceiverEstimator(BaseEstimator):
    """Monte-Carlo view of one receiver.

    ``fit`` simulates ``n_traj`` trajectories per distinct input count and
    stores P_d with its 95% half-width.  ``predict`` returns the modal
    decoded bit vector, and ``score`` is ``1 - P_e`` weighted by ``pmf``
    over the given inputs (uniform when no pmf is set).
    """

    def __init__(self, config: ChemSicalConfig | None = None, n_traj: int = 100, master_seed: int = 0,
                 pmf: InputPmf | None = None, tree=None, workers: int = 1):
        self.config = config
        self.n_traj = n_traj
        self.master_seed = master_seed
        self.pmf = pmf
        self.tree = tree
        self.workers = workers

    def _config(self) -> ChemSicalConfig:
        return ChemSicalConfig.default() if self.config is None else self.config

    def fit(self, X, y=None):
        cfg = self._config()
        inputs = np.unique(_counts(X))
        if inputs.size == 0:
            raise ConfigError("cannot fit on an empty input set")
        tree = reference_tree(cfg.num_tx) if self.tree is None else self.tree
        res = simulate_outcomes(cfg, inputs, int(self.n_traj), int(self.master_seed), tree, workers=self.workers)
        pd = res.correct.mean(axis=1)
        self.inputs_ = inputs
        self.pd_ = dict(zip(inputs.tolist(), pd.tolist()))
        self.halfwidth_ = dict(zip(inputs.tolist(), proportion_halfwidth(pd, self.n_traj).tolist()))
        self.modal_labels_ = {}
        for n, lab in zip(inputs.tolist(), res.labels):
            rows, counts = np.unique(lab, axis=0, return_counts=True)
            self.modal_labels_[n] = rows[int(np.argmax(counts))]
        self.tree_ = tree
        return self

    def _check_fitted(self, inputs):
        if not hasattr(self, "pd_"):
            raise ConfigError("estimator is not fitted")
        missing = sorted(set(inputs.tolist()) - set(self.pd_))
        if missing:
            raise ConfigError(f"inputs {missing[:5]} were not part of the fit")

    def predict(self, X) -> np.ndarray:
        inputs = _counts(X)
        self._check_fitted(inputs)
        return np.array([self.modal_labels_[int(n)] for n in inputs])

    def predict_pd(self, X) -> np.ndarray:
        inputs = _counts(X)
        self._check_fitted(inputs)
        return np.array([self.pd_[int(n)] for n in inputs])

    def score(self, X, y=None) -> float:
        inputs = np.unique(_counts(X))
        self._check_fitted(inputs)
        if self.pmf is None:
            return float(np.mean([self.pd_[int(n)] for n in inputs]))
        pe, _ = weighted_pe(self.pd_, self.pmf, inputs.tolist(), "reduced")
        return 1.0 - pe
