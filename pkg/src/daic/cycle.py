"""The assessment-and-improvement loop.

Each cycle runs: data preprocessing, (re)training, verification, deployment
of a fresh operational batch, pseudo-oracle judgement, trigger evaluation
and, when triggered, sampling-based assessment whose labels feed the next
cycle's preprocessing.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dataset import (
    DEFAULT_FORMS,
    LabeledSet,
    draw_operational_batch,
    load_idx,
    make_splits,
    required_pool_size,
    synth_generate,
)
from .estimator import assess
from .exceptions import CapacityError, ParameterError, PhaseError
from .model import MLPClassifier, NetworkParams, accuracy, predict_batch
from .oracle import PseudoOracle, predicted_accuracy

log = logging.getLogger(__name__)

RETRAIN_MODES = ("append", "replace_after_k")
POLICIES = ("initial", "none", "append", "replace")


@dataclass(frozen=True)
class TriggerPolicy:
    divergence_threshold: float = 0.05
    minimum_accuracy: float = 0.80

    def __post_init__(self):
        for name in ("divergence_threshold", "minimum_accuracy"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class RetrainPolicy:
    """How sampled labels enter the training data.

    ``append`` adds them to the existing sets.  ``replace_after_k`` does the
    same until ``k`` consecutive cycles have triggered, then trains only on
    the labels gathered in those ``k`` cycles.
    """

    mode: str = "replace_after_k"
    k: int = 3
    new_label_split: float = 0.8

    def __post_init__(self):
        if self.mode not in RETRAIN_MODES:
            raise ParameterError(f"mode must be one of {RETRAIN_MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not 0 < self.new_label_split <= 1:
            raise ParameterError(f"new_label_split must lie in (0, 1], got {self.new_label_split}")


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    repetition: int
    verification_acc: float
    actual_acc: float
    predicted_acc: float
    estimated_acc: float | None
    triggered: bool
    n_labeled: int
    policy_applied: str

    def __post_init__(self):
        if (self.estimated_acc is not None) != self.triggered:
            raise ParameterError("an estimate is present exactly when the cycle triggered")
        if self.policy_applied not in POLICIES:
            raise ParameterError(f"unknown policy {self.policy_applied!r}")
        for name in ("verification_acc", "actual_acc", "predicted_acc", "estimated_acc"):
            value = getattr(self, name)
            if value is not None:
                if not 0 <= value <= 1:
                    raise ParameterError(f"{name}={value} outside [0, 1]")
                # six decimals is the serialised precision; rounding here keeps CSV round trips exact
                object.__setattr__(self, name, round(float(value), 6))


def evaluate_trigger(policy: TriggerPolicy, verification_acc, predicted_acc) -> bool:
    return bool(
        predicted_acc < verification_acc - policy.divergence_threshold or predicted_acc < policy.minimum_accuracy
    )


def split_labels(labels: LabeledSet, fraction, seed):
    """Random ``fraction`` : rest split of newly labelled examples."""
    order = np.random.default_rng(seed).permutation(len(labels))
    cut = int(round(fraction * len(labels)))
    return labels.subset(order[:cut], role="train"), labels.subset(order[cut:], role="verification")


def preprocess_data(
    train: LabeledSet,
    verification: LabeledSet,
    new_labels: LabeledSet | None,
    policy: RetrainPolicy,
    consecutive_triggers: int,
    history: Sequence[LabeledSet] = (),
    seed=0,
):
    """Fold newly labelled operational examples into the training data.

    ``history`` holds the labels of the current run of consecutive triggered
    cycles, oldest first, with ``new_labels`` as its last entry.

    Returns ``(train, verification, policy_applied)``.
    """
    if new_labels is None or len(new_labels) == 0:
        return train, verification, "none"
    if policy.mode == "replace_after_k" and consecutive_triggers >= policy.k:
        recent = list(history[-policy.k :])
        pool = recent[0]
        for block in recent[1:]:
            pool = pool.concat(block)
        new_train, new_verif = split_labels(pool, policy.new_label_split, seed)
        return new_train, new_verif, "replace"
    add_train, add_verif = split_labels(new_labels, policy.new_label_split, seed)
    train = train.concat(add_train, role="train")
    if len(add_verif):
        verification = verification.concat(add_verif, role="verification")
    return train, verification, "append"


def derive_seed(master_seed, *keys):
    """Independent 32-bit seed for a (repetition, cycle, purpose) coordinate."""
    return int(np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(1)[0])


# purpose codes for derive_seed
_SPLIT, _STREAM, _TRAIN, _ORACLE, _SAMPLE, _PREPROCESS = range(6)


@dataclass
class RunState:
    """Everything one repetition carries from cycle to cycle."""

    train: LabeledSet
    verification: LabeledSet
    operational_pool: LabeledSet
    repetition: int = 0
    rep_seed: int = 0
    params: NetworkParams | None = None
    oracle: PseudoOracle | None = None
    verification_acc: float = 0.0
    pending: LabeledSet | None = None
    history: list = field(default_factory=list)
    consecutive_triggers: int = 0
    labels_spent: int = 0


@contextmanager
def _phase(name, cycle):
    try:
        yield
    except PhaseError:
        raise
    except Exception as exc:
        raise PhaseError(name, cycle, exc) from exc


def run_cycle(
    state: RunState,
    cycle: int,
    config,
    perturb_truth: Callable[[np.ndarray], np.ndarray] | None = None,
) -> CycleRecord:
    """Advance ``state`` by one cycle and report it.

    ``perturb_truth`` rewrites the ground truth used for the reported actual
    accuracy after predictions are made; it exists to demonstrate that
    ground truth drives no decision.
    """
    seed = state.rep_seed
    retrain = cycle == 1
    applied = "initial" if cycle == 1 else "none"
    init = None

    with _phase("preprocess", cycle):
        if cycle > 1 and state.pending is not None:
            state.train, state.verification, applied = preprocess_data(
                state.train,
                state.verification,
                state.pending,
                config.retrain,
                state.consecutive_triggers,
                state.history,
                seed=derive_seed(seed, cycle, _PREPROCESS),
            )
            state.pending = None
            retrain = applied != "none"
            init = state.params if applied == "append" else None

    if retrain:
        with _phase("train", cycle):
            cfg = config.train
            clf = MLPClassifier(
                epochs=cfg.epochs,
                batch_size=cfg.batch_size,
                learning_rate=cfg.learning_rate,
                momentum=cfg.momentum,
                random_state=derive_seed(seed, cycle, _TRAIN),
            )
            state.params = clf.fit(state.train.pixels, state.train.labels, init=init).params_
        with _phase("verify", cycle):
            state.verification_acc = accuracy(state.params, state.verification)
        with _phase("invariants", cycle):
            oc = config.oracle
            state.oracle = PseudoOracle(
                mode=config.oracle_mode,
                form_spec=DEFAULT_FORMS,
                min_confidence=oc.min_confidence,
                min_support=oc.min_support,
                tree_max_depth=oc.tree_max_depth,
                n_estimators=oc.n_estimators,
                forest_max_depth=oc.forest_max_depth,
                random_state=derive_seed(seed, cycle, _ORACLE),
            ).fit(state.train, state.verification, state.params)

    with _phase("deploy", cycle):
        batch = draw_operational_batch(state.operational_pool, cycle, config.shift, derive_seed(seed, 0, _STREAM))
        observed = batch.observed()
        # simulated human labeller; consulted only for sampled units
        labeller = batch.labels
    with _phase("monitor", cycle):
        preds = predict_batch(state.params, observed.pixels)
    truth = batch.labels if perturb_truth is None else np.asarray(perturb_truth(batch.labels.copy()))

    with _phase("judge", cycle):
        verdicts = state.oracle.judge(observed, preds)
        predicted = predicted_accuracy(verdicts)
    with _phase("evaluate", cycle):
        triggered = evaluate_trigger(config.trigger, state.verification_acc, predicted)

    estimated = None
    n_labeled = 0
    if triggered:
        with _phase("sampling", cycle):
            plan = replace(config.sampling, seed=derive_seed(seed, cycle, _SAMPLE))
            estimate, units = assess(observed, preds, labeller, plan)
            estimated = estimate.point
            n_labeled = estimate.n_labeled
            idx = np.array([u.index for u in units])
            new = batch.subset(idx, role="train").with_labels([u.true_label for u in units])
            state.pending = new
            state.history.append(new)
            state.consecutive_triggers += 1
            state.labels_spent += n_labeled
    else:
        state.history.clear()
        state.consecutive_triggers = 0

    actual = float(np.mean(preds.labels == truth))
    record = CycleRecord(
        cycle=cycle,
        repetition=state.repetition,
        verification_acc=state.verification_acc,
        actual_acc=actual,
        predicted_acc=predicted,
        estimated_acc=estimated,
        triggered=triggered,
        n_labeled=n_labeled,
        policy_applied=applied,
    )
    log.info(
        "rep %d cycle %d: verification=%.3f actual=%.3f predicted=%.3f estimated=%s policy=%s fired=%s",
        state.repetition,
        cycle,
        record.verification_acc,
        record.actual_acc,
        record.predicted_acc,
        "-" if estimated is None else f"{record.estimated_acc:.3f}",
        applied,
        verdicts.counts(),
    )
    return record


def load_pool(dataset_cfg) -> LabeledSet:
    if dataset_cfg.kind == "mnist":
        return load_idx(*dataset_cfg.resolved_paths())
    return synth_generate(
        dataset_cfg.synthetic_n,
        n_classes=10,
        noise=dataset_cfg.synthetic_noise,
        seed=dataset_cfg.synthetic_seed,
    )


def start_repetition(pool: LabeledSet, config, repetition) -> RunState:
    rep_seed = derive_seed(config.master_seed, repetition)
    train, verification, rest = make_splits(pool, derive_seed(rep_seed, 0, _SPLIT), cycles=config.cycles)
    return RunState(train, verification, rest, repetition=repetition, rep_seed=rep_seed)


def run_repetition(pool, config, repetition, perturb_truth=None) -> list[CycleRecord]:
    state = start_repetition(pool, config, repetition)
    return [run_cycle(state, c, config, perturb_truth) for c in range(1, config.cycles + 1)]


def run_experiment(config, pool: LabeledSet | None = None, perturb_truth=None) -> list[CycleRecord]:
    """All cycles of all repetitions, repetition-major."""
    if pool is None:
        pool = load_pool(config.dataset)
    need = required_pool_size(config.cycles)
    if len(pool) < need:
        raise CapacityError(f"dataset holds {len(pool)} examples; {config.cycles} cycles need {need}")
    records = []
    for rep in range(1, config.repetitions + 1):
        try:
            records.extend(run_repetition(pool, config, rep, perturb_truth))
        except PhaseError as exc:
            log.error("repetition %d aborted: %s", rep, exc)
            raise
    return records
