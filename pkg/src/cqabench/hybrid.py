"""Ground-truth dropout benchmarking and the numeric-versus-textual
predictor comparison.

The positive class is "non-dropout" throughout: classifier scores are the
probability that a user keeps participating. The external fine-tuned text
scorer plugs in through a score file of (user id, probability) lines; a
small token-frequency linear model stands in at desk scale. Its recorded
external configuration (8 epochs, 1e-5 learning rate, batch size 8, 512
max tokens, sigmoid output) is descriptive metadata, not computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LogisticRegression

from .errors import ConfigError, SchemaError
from .evaluation import ConfusionMatrix, MetricSet
from .textprep import BimodalSequence, cochran_n

POSITIVE_CLASS = "non-dropout"
NEGATIVE_CLASS = "dropout"


@dataclass(frozen=True)
class GroundTruthRecord:
    user_id: str
    label: str  # "dropout" | "non-dropout"
    features: tuple[float, ...] = ()
    posts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.label not in (POSITIVE_CLASS, NEGATIVE_CLASS):
            raise SchemaError(f"label must be dropout/non-dropout, "
                              f"got {self.label!r}")


@dataclass(frozen=True)
class GroundTruthSet:
    records: tuple[GroundTruthRecord, ...]

    def labels(self) -> np.ndarray:
        return np.array([r.label == POSITIVE_CLASS for r in self.records],
                        dtype=np.float64)

    def class_counts(self) -> dict[str, int]:
        positives = int(sum(r.label == POSITIVE_CLASS for r in self.records))
        return {POSITIVE_CLASS: positives,
                NEGATIVE_CLASS: len(self.records) - positives}


@dataclass(frozen=True)
class TextClassifierConfig:
    """Which textual scorer is in play, with the external run's settings
    kept purely as provenance."""

    kind: str = "builtin-linear"  # or "external-fine-tuned"
    external_epochs: int = 8
    external_learning_rate: float = 1e-5
    external_batch_size: int = 8
    external_max_tokens: int = 512
    external_output: str = "sigmoid probability"

    def __post_init__(self) -> None:
        if self.kind not in ("builtin-linear", "external-fine-tuned"):
            raise ConfigError(f"unknown text classifier kind {self.kind!r}")


@dataclass(frozen=True)
class DisagreementRecord:
    user_id: str
    numeric_prediction: float
    textual_prediction: float
    label: float
    correct_side: str  # "numeric" | "textual" | "neither"


@dataclass(frozen=True)
class PredictorComparison:
    agreement_rate: float
    tp_delta: int  # numeric tp minus textual tp
    tn_delta: int
    disagreements: tuple[DisagreementRecord, ...]
    numeric: tuple[ConfusionMatrix, MetricSet] | None = None
    textual: tuple[ConfusionMatrix, MetricSet] | None = None


def evaluate_predictor(predictions: np.ndarray, labels: np.ndarray,
                       positive_class=1.0) -> tuple[ConfusionMatrix, MetricSet]:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ConfigError("prediction/label length mismatch")
    cm = ConfusionMatrix.from_predictions(labels, predictions, positive_class)
    return cm, cm.metrics()


def compare_predictors(numeric_preds: np.ndarray, textual_preds: np.ndarray,
                       labels: np.ndarray,
                       user_ids: list[str] | None = None
                       ) -> PredictorComparison:
    """Agreement rate, true-positive/negative deltas, and one disagreement
    record (with correctness attribution) per differing instance."""
    numeric_preds = np.asarray(numeric_preds, dtype=np.float64)
    textual_preds = np.asarray(textual_preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if not numeric_preds.shape == textual_preds.shape == labels.shape:
        raise ConfigError("prediction/label length mismatch")
    n = labels.size
    ids = user_ids if user_ids is not None else [str(i) for i in range(n)]
    if len(ids) != n:
        raise ConfigError("user ids must align with the predictions")

    cm_num, m_num = evaluate_predictor(numeric_preds, labels)
    cm_txt, m_txt = evaluate_predictor(textual_preds, labels)
    same = numeric_preds == textual_preds
    records = []
    for i in np.flatnonzero(~same):
        if numeric_preds[i] == labels[i]:
            side = "numeric"
        elif textual_preds[i] == labels[i]:
            side = "textual"
        else:
            side = "neither"
        records.append(DisagreementRecord(
            ids[i], float(numeric_preds[i]), float(textual_preds[i]),
            float(labels[i]), side,
        ))
    return PredictorComparison(
        agreement_rate=float(np.mean(same)) if n else 1.0,
        tp_delta=cm_num.tp - cm_txt.tp,
        tn_delta=cm_num.tn - cm_txt.tn,
        disagreements=tuple(records),
        numeric=(cm_num, m_num),
        textual=(cm_txt, m_txt),
    )


class BuiltinTextClassifier:
    """Token-frequency linear scorer over packed sequences.

    Word-span and code-span occurrences are counted as separate features
    feeding an L2-regularised logistic model, so scores are sigmoid-bounded
    probabilities of the positive (non-dropout) class.
    """

    def __init__(self, model: LogisticRegression,
                 vocabulary: dict[tuple[str, str], int]) -> None:
        self._model = model
        self._vocabulary = vocabulary

    def _featurize(self, sequences: list[BimodalSequence]) -> np.ndarray:
        X = np.zeros((len(sequences), len(self._vocabulary)))
        for i, seq in enumerate(sequences):
            for span, tokens in (("w", seq.word_tokens()),
                                 ("c", seq.code_tokens())):
                for token in tokens:
                    j = self._vocabulary.get((span, token))
                    if j is not None:
                        X[i, j] += 1.0
        return X

    def predict_proba(self, sequences: list[BimodalSequence]) -> np.ndarray:
        return self._model.predict_proba(self._featurize(sequences))[:, 1]

    def predict(self, sequences: list[BimodalSequence],
                threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(sequences) >= threshold).astype(np.float64)

    @property
    def weights(self) -> np.ndarray:
        return self._model.coef_.ravel()


def builtin_text_classifier_fit(sequences: list[BimodalSequence],
                                labels: np.ndarray,
                                seed: int = 42) -> BuiltinTextClassifier:
    """Fit the desk-scale textual scorer; deterministic given the seed."""
    labels = np.asarray(labels, dtype=np.float64)
    if len(sequences) != labels.size:
        raise ConfigError("sequences/labels length mismatch")
    if np.unique(labels).size < 2:
        raise ConfigError("need both classes present to fit the scorer")

    vocabulary: dict[tuple[str, str], int] = {}
    for seq in sequences:
        for span, tokens in (("w", seq.word_tokens()), ("c", seq.code_tokens())):
            for token in tokens:
                vocabulary.setdefault((span, token), len(vocabulary))
    model = LogisticRegression(max_iter=2000, random_state=seed)
    scorer = BuiltinTextClassifier(model, vocabulary)
    model.fit(scorer._featurize(sequences), labels)
    return scorer


def sample_ground_truth(pool: list[GroundTruthRecord], margin: float = 0.05,
                        z: float = 1.96, seed: int = 42) -> GroundTruthSet:
    """Uniform sample without replacement, sized by the finite-population
    Cochran formula at the given margin and confidence quantile."""
    size = cochran_n(len(pool), 0.5, margin, z)
    if len(pool) <= size:
        raise ConfigError(
            f"pool of {len(pool)} is not larger than the computed sample "
            f"size {size}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x67)))
    chosen = rng.choice(len(pool), size=size, replace=False)
    return GroundTruthSet(tuple(pool[i] for i in sorted(chosen)))
