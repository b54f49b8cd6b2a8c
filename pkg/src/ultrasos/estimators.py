"""scikit-learn style wrappers.

``Derivation`` turns root terms into their induced system and
``BisimulationQuotient`` learns the largest bisimulation of a system, so the
two compose in a :class:`sklearn.pipeline.Pipeline`::

    pipe = Pipeline([("derive", Derivation(spec)), ("quotient", BisimulationQuotient())])
    small = pipe.fit_transform(roots)

Inputs are systems and terms rather than numeric arrays.  The wrappers follow
the fit/transform/predict protocol and support ``get_params``/``clone``.
They are not meant for sklearn's array validation or ``check_estimator``.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .bisim import coarsest_partition, quotient
from .oracles import MAX_STATES, union_of_bisimilar_partitions
from .ultras import Ultras, UltrasError
from .wfgsos import Specification, induce, validate_spec

__all__ = ["BisimulationQuotient", "Derivation"]


class BisimulationQuotient(TransformerMixin, BaseEstimator):
    """Learn the largest bisimulation on a fully explored system.

    Parameters
    ----------
    oracle : bool
        Cross-check the learned partition by brute force when the system has
        at most ``MAX_STATES`` states; a mismatch raises ``AssertionError``.

    Attributes
    ----------
    partition_ : Partition
    system_ : Ultras
        The fitted system.
    n_blocks_ : int
    """

    def __init__(self, oracle: bool = False):
        self.oracle = oracle

    def fit(self, X: Ultras, y=None):
        if not isinstance(X, Ultras):
            raise TypeError(f"expected an Ultras, got {type(X).__name__}")
        part = coarsest_partition(X)
        if self.oracle and len(X.states) <= MAX_STATES:
            if union_of_bisimilar_partitions(X) != part.relation():
                raise AssertionError("partition refinement disagrees with the brute-force oracle")
        self.partition_ = part
        self.system_ = X
        self.n_blocks_ = len(part.blocks)
        return self

    def _check_fitted(self):
        if not hasattr(self, "partition_"):
            raise NotFittedError("call fit before using this BisimulationQuotient")

    def transform(self, X: Ultras) -> Ultras:
        """Quotient of ``X`` by the fitted partition; ``X`` must have the fitted states."""
        self._check_fitted()
        if X.states != self.partition_.elements:
            raise UltrasError("transform expects a system over the fitted states")
        return quotient(X, self.partition_)[0]

    def predict(self, states) -> list[int]:
        """Block index per state.  Given a system, labels its sorted states."""
        self._check_fitted()
        if isinstance(states, Ultras):
            states = states.sorted_states()
        index = {x: k for k, b in enumerate(self.partition_.blocks) for x in b}
        try:
            return [index[x] for x in states]
        except KeyError as e:
            raise ValueError(f"{e.args[0]!r} is not a fitted state") from None

    def fit_predict(self, X: Ultras, y=None) -> list[int]:
        return self.fit(X).predict(X)


class Derivation(TransformerMixin, BaseEstimator):
    """Induce the system reachable from a list of ground root terms.

    ``fit`` only validates the specification; it learns nothing from the roots.
    """

    def __init__(self, spec: Specification | None = None, budget: int = 1000,
                 require_complete: bool = True):
        self.spec = spec
        self.budget = budget
        self.require_complete = require_complete

    def fit(self, X=None, y=None):
        if self.spec is None:
            raise ValueError("Derivation needs a specification")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        problems = validate_spec(self.spec)
        if problems:
            raise ValueError("specification is not well formed: " + "; ".join(problems))
        self.spec_ = self.spec
        return self

    def transform(self, X) -> Ultras:
        if not hasattr(self, "spec_"):
            raise NotFittedError("call fit before using this Derivation")
        u = induce(self.spec_, list(X), self.budget)
        if self.require_complete and u.boundary:
            raise UltrasError(f"budget {self.budget} exhausted with "
                              f"{len(u.boundary)} states unexplored")
        return u
