"""Pass/Fail judgement of operational predictions without ground truth.

Three invariant families can fire: ``domain`` (form constraints), ``data``
(mined pixel rules) and ``model`` (failure forest over softmax outputs).
Any firing family fails the prediction.  The ``baseline`` mode drops the
domain family and so only sees what the training data and the network
itself reveal.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..dataset import DEFAULT_FORMS, Example, LabeledSet, Observed
from ..exceptions import ConsistencyError, ParameterError
from ..model import NetworkParams, Prediction, Predictions, predict_batch
from .domain import DomainInvariant
from .forest import FailureForest
from .rules import DataRule, DataRuleMiner, binarize

FAMILIES = ("domain", "data", "model")
MODES = {"dnn_os": frozenset(FAMILIES), "baseline": frozenset({"data", "model"})}


class Outcome(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    fired: frozenset

    def __post_init__(self):
        if (self.outcome is Outcome.FAIL) != bool(self.fired):
            raise ConsistencyError("a verdict fails exactly when some invariant fired")


@dataclass(frozen=True, eq=False)
class Verdicts:
    """Column-wise verdicts for a batch."""

    domain: np.ndarray
    data: np.ndarray
    model: np.ndarray

    @property
    def fail(self):
        return self.domain | self.data | self.model

    def __len__(self):
        return len(self.domain)

    def __getitem__(self, i) -> Verdict:
        fired = frozenset(f for f in FAMILIES if getattr(self, f)[i])
        return Verdict(Outcome.FAIL if fired else Outcome.PASS, fired)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def counts(self):
        return {f: int(getattr(self, f).sum()) for f in FAMILIES} | {"fail": int(self.fail.sum())}


def _families(mode):
    if mode not in MODES:
        raise ParameterError(f"oracle mode must be one of {sorted(MODES)}, got {mode!r}")
    return MODES[mode]


def extract_data_rules(train: LabeledSet, params: NetworkParams, **miner_kw) -> list[DataRule]:
    fail = predict_batch(params, train.pixels).labels != train.labels
    return DataRuleMiner(**miner_kw).fit(train.pixels, fail, model_id=params.fingerprint).rules_


def train_failure_forest(verification: LabeledSet, params: NetworkParams, seed=0, **forest_kw) -> FailureForest:
    if len(verification) == 0:
        raise ParameterError("the failure forest needs a nonempty verification set")
    preds = predict_batch(params, verification.pixels)
    fail = preds.labels != verification.labels
    return FailureForest(random_state=seed, **forest_kw).fit(preds.last_layer, fail, model_id=params.fingerprint)


def _check_identity(model_id, rules, forest):
    if model_id is None:
        return
    stale = [r for r in rules if r.model_id not in (None, model_id)]
    if stale or getattr(forest, "model_id_", None) not in (None, model_id):
        raise ConsistencyError(f"invariants were built for a different network than {model_id}")


def judge_batch(
    domain: DomainInvariant,
    rules: Sequence[DataRule],
    forest: FailureForest,
    pixels,
    forms,
    preds: Predictions,
    families=MODES["dnn_os"],
    pool=2,
    threshold=0.5,
) -> Verdicts:
    _check_identity(preds.model_id, rules, forest)
    n = len(preds)
    off = np.zeros(n, dtype=bool)
    fired_domain = domain.violated(forms, preds.labels) if "domain" in families else off
    fired_data = off.copy()
    if "data" in families and rules:
        Xbin = binarize(np.atleast_2d(pixels), pool, threshold)
        for rule in rules:
            fired_data |= rule.matches(Xbin)
    fired_model = forest.predict(preds.last_layer) if "model" in families else off
    return Verdicts(np.asarray(fired_domain), fired_data, np.asarray(fired_model))


def judge(
    domain: DomainInvariant,
    rules: Sequence[DataRule],
    forest: FailureForest,
    x: Example,
    pred: Prediction,
    mode="dnn_os",
) -> Verdict:
    preds = Predictions(np.array([pred.label]), np.array([pred.confidence]), np.atleast_2d(pred.last_layer), pred.model_id)
    return judge_batch(domain, rules, forest, x.pixels[None, :], [x.form_id], preds, _families(mode))[0]


def predicted_accuracy(verdicts) -> float:
    """Fraction of Pass verdicts."""
    if len(verdicts) == 0:
        raise ParameterError("predicted accuracy of zero verdicts is undefined")
    if isinstance(verdicts, Verdicts):
        return float(1.0 - verdicts.fail.mean())
    return sum(v.outcome is Outcome.PASS for v in verdicts) / len(verdicts)


class PseudoOracle(BaseEstimator):
    """Build all invariants for one network snapshot and judge batches with them.

    Parameters
    ----------
    mode : {"dnn_os", "baseline"}
        ``baseline`` ignores the domain invariants.
    """

    def __init__(
        self,
        mode="dnn_os",
        form_spec=DEFAULT_FORMS,
        min_confidence=0.99,
        min_support=10,
        tree_max_depth=12,
        n_estimators=100,
        forest_max_depth=10,
        random_state=0,
    ):
        self.mode = mode
        self.form_spec = form_spec
        self.min_confidence = min_confidence
        self.min_support = min_support
        self.tree_max_depth = tree_max_depth
        self.n_estimators = n_estimators
        self.forest_max_depth = forest_max_depth
        self.random_state = random_state

    def fit(self, train: LabeledSet, verification: LabeledSet, network: NetworkParams):
        _families(self.mode)
        self.domain_ = DomainInvariant(self.form_spec)
        self.rules_ = extract_data_rules(
            train,
            network,
            min_confidence=self.min_confidence,
            min_support=self.min_support,
            max_depth=self.tree_max_depth,
        )
        self.forest_ = train_failure_forest(
            verification,
            network,
            seed=self.random_state,
            n_estimators=self.n_estimators,
            max_depth=self.forest_max_depth,
        )
        self.model_id_ = network.fingerprint
        return self

    def judge(self, batch: Observed | LabeledSet, preds: Predictions) -> Verdicts:
        """Judge predictions using only the observable part of the inputs (pixels, form)."""
        check_is_fitted(self, "model_id_")
        if preds.model_id is not None and preds.model_id != self.model_id_:
            raise ConsistencyError(f"oracle built for network {self.model_id_}, predictions from {preds.model_id}")
        if len(batch) != len(preds):
            raise ConsistencyError(f"{len(batch)} inputs but {len(preds)} predictions")
        return judge_batch(self.domain_, self.rules_, self.forest_, batch.pixels, batch.forms, preds, _families(self.mode))

    def predict(self, batch: Observed | LabeledSet, preds: Predictions):
        """True where the prediction is judged a failure."""
        return self.judge(batch, preds).fail

    def score(self, batch: Observed | LabeledSet, preds: Predictions):
        return predicted_accuracy(self.judge(batch, preds))

    def rules_text(self):
        check_is_fitted(self, "rules_")
        return "\n".join(r.to_text() for r in self.rules_)
