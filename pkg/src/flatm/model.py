"""The full topic-modeling pipeline.

Training runs: tokenize and count, weight the matrix globally, reduce the
document dimension with a cascade of fuzzy clusterings of the term rows,
cluster the reduced rows into K topics, and assemble the probability
tables. Every stage is seeded from one master seed, so a run is a pure
function of (documents, config).

Probability assembly from the weighted matrix ``a`` and the topic
memberships P(T|W):

    P(W_i)        = sum_j a_ij / sum_ij a_ij
    P(W_i, T_k)   = P(T_k | W_i) P(W_i)
    P(W_i | T_k)  = P(W_i, T_k) / sum_i P(W_i, T_k)
    P(W_i | D_j)  = a_ij / sum_i a_ij
    P(T_k | D_j)  = sum_i P(T_k | W_i) P(W_i | D_j)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import (
    InputFormatError,
    RawDocument,
    TokenizerConfig,
    Vocabulary,
    build_matrix,
    tokenize,
)
from .fcm import FcmConfig, FcmResult, fcm_run
from .weighting import (
    DEFAULT_EPSILON,
    GlobalWeightVector,
    GtwMethod,
    IDF_VARIANTS,
    WeightedMatrix,
    apply_gtw,
    compute_global_weights,
    local_weights,
)

__all__ = [
    "CascadeSchedule",
    "TrainConfig",
    "TopicModel",
    "OutOfVocabularyError",
    "MODEL_FORMAT_VERSION",
    "stage_seed",
    "cascade_reduce",
    "topic_memberships",
    "word_probabilities",
    "word_given_topic",
    "word_given_doc",
    "topic_given_doc",
    "train",
    "fold_in",
    "top_words",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1

_DEFAULT_COUNTS = (10, 9, 8, 7, 6, 5, 4, 3, 2)


class OutOfVocabularyError(ValueError):
    """A document shares no terms with the model vocabulary."""

    def __init__(self, doc_id: str):
        super().__init__(f"document {doc_id!r} has no in-vocabulary terms")
        self.doc_id = doc_id


@dataclass(frozen=True)
class CascadeSchedule:
    """Cluster counts for the successive reduction stages.

    Counts must be strictly descending and end at 2 or more; each stage
    clusters the rows of the previous stage's membership matrix, so the
    column count shrinks to ``counts[-1]``.
    """

    counts: tuple[int, ...] = _DEFAULT_COUNTS

    def __post_init__(self) -> None:
        if not self.counts:
            raise ValueError("schedule must have at least one stage")
        if any(int(c) != c for c in self.counts):
            raise ValueError("schedule entries must be integers")
        if self.counts[-1] < 2:
            raise ValueError("schedule must end at 2 or more clusters")
        if any(a <= b for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("schedule must be strictly descending")

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a trained model besides the corpus."""

    n_topics: int
    gtw: GtwMethod = GtwMethod.ENTROPY
    schedule: CascadeSchedule = CascadeSchedule()
    cascade: bool = True
    fuzzifier: float = 2.0
    threshold: float = 1e-5
    max_iterations: int = 100
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    idf_variant: str = "total-frequency"
    min_df: int = 1
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gtw", GtwMethod(self.gtw))
        if self.n_topics < 2:
            raise ValueError("n_topics must be >= 2")
        if not self.fuzzifier > 1.0:
            raise ValueError("fuzzifier must be > 1")
        if not self.threshold > 0.0:
            raise ValueError("threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.idf_variant not in IDF_VARIANTS:
            raise ValueError(f"unknown idf variant: {self.idf_variant!r}")
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")


@dataclass(frozen=True)
class TopicModel:
    """A trained model: vocabulary, probability tables, and provenance.

    Shapes, with m terms, K topics, n training documents:
    ``topic_given_word`` (m, K) rows sum to 1; ``word_prob`` (m,) sums to
    1; ``word_given_topic`` (K, m) rows sum to 1; ``topic_given_doc``
    (K, n) columns sum to 1.
    """

    vocabulary: Vocabulary
    config: TrainConfig
    global_weights: GlobalWeightVector
    topic_given_word: np.ndarray
    word_prob: np.ndarray
    word_given_topic: np.ndarray
    topic_given_doc: np.ndarray
    doc_ids: tuple[str, ...]

    @property
    def n_topics(self) -> int:
        return self.topic_given_word.shape[1]

    @property
    def n_terms(self) -> int:
        return len(self.vocabulary)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)


def stage_seed(master_seed: int, *indices: int) -> int:
    """Derive an independent child seed from the master seed and a path."""
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(indices))
    return int(seq.generate_state(1, np.uint64)[0])


def _dense(values: WeightedMatrix | sp.spmatrix | np.ndarray) -> np.ndarray:
    if isinstance(values, WeightedMatrix):
        values = values.values
    if sp.issparse(values):
        values = values.toarray()
    return np.ascontiguousarray(np.asarray(values, dtype=np.float64))


def cascade_reduce(
    values: WeightedMatrix | sp.spmatrix | np.ndarray,
    schedule: CascadeSchedule,
    *,
    fuzzifier: float = 2.0,
    threshold: float = 1e-5,
    max_iterations: int = 100,
    seed: int = 0,
    on_stage: Callable[[int, FcmResult], None] | None = None,
) -> np.ndarray:
    """Shrink the document dimension by clustering term rows repeatedly.

    Stage s clusters the current (m, d) matrix rows into
    ``schedule.counts[s]`` clusters and keeps the membership matrix as the
    next input, so the result has shape (m, schedule.counts[-1]). Stage
    seeds derive from ``seed`` by stage index. Requires more terms than
    the first stage's cluster count.
    """
    x = _dense(values)
    if x.shape[0] <= schedule.counts[0]:
        raise ValueError(
            f"cascade needs more terms than the first stage's clusters: "
            f"{x.shape[0]} terms, schedule starts at {schedule.counts[0]}"
        )
    for stage, n_clusters in enumerate(schedule.counts):
        config = FcmConfig(
            n_clusters=n_clusters,
            fuzzifier=fuzzifier,
            threshold=threshold,
            max_iterations=max_iterations,
            seed=stage_seed(seed, stage),
        )
        result = fcm_run(x, config)
        if on_stage is not None:
            on_stage(stage, result)
        x = result.membership
    return x


def topic_memberships(
    reduced: np.ndarray,
    n_topics: int,
    *,
    fuzzifier: float = 2.0,
    threshold: float = 1e-5,
    max_iterations: int = 100,
    seed: int = 0,
) -> np.ndarray:
    """Cluster the reduced term rows into K topics; rows are P(T|W_i).

    ``seed`` is used as-is for this single run; callers composing the full
    pipeline derive it from their master seed first.
    """
    config = FcmConfig(
        n_clusters=n_topics,
        fuzzifier=fuzzifier,
        threshold=threshold,
        max_iterations=max_iterations,
        seed=seed,
    )
    return fcm_run(np.asarray(reduced, dtype=np.float64), config).membership


def word_probabilities(
    values: WeightedMatrix | sp.spmatrix | np.ndarray,
) -> np.ndarray:
    """Marginal P(W_i): row mass over total mass of the weighted matrix."""
    a = _dense(values)
    total = a.sum()
    if not total > 0:
        raise ValueError("weighted matrix has zero total mass")
    return a.sum(axis=1) / total


def word_given_topic(
    topic_given_word: np.ndarray, word_prob: np.ndarray
) -> np.ndarray:
    """Bayes inversion of P(T|W) against P(W); rows are topics, sum to 1."""
    ptw = np.asarray(topic_given_word, dtype=np.float64)
    pw = np.asarray(word_prob, dtype=np.float64)
    joint = ptw * pw[:, None]
    topic_mass = joint.sum(axis=0)
    empty = np.flatnonzero(topic_mass == 0.0)
    if empty.size:
        raise ValueError(f"topic {int(empty[0])} has zero probability mass")
    return (joint / topic_mass).T


def word_given_doc(values: WeightedMatrix | sp.spmatrix | np.ndarray) -> np.ndarray:
    """Column-normalized weighted matrix: P(W_i|D_j). Dense (m, n)."""
    a = _dense(values)
    col_mass = a.sum(axis=0)
    empty = np.flatnonzero(col_mass == 0.0)
    if empty.size:
        j = int(empty[0])
        doc_ids = values.doc_ids if isinstance(values, WeightedMatrix) else None
        name = doc_ids[j] if doc_ids is not None else str(j)
        raise ValueError(f"document {name!r} has zero weighted mass")
    return a / col_mass


def topic_given_doc(
    topic_given_word: np.ndarray, word_given_doc: np.ndarray
) -> np.ndarray:
    """Mix P(T|W) over each document's word distribution; columns sum to 1."""
    ptw = np.asarray(topic_given_word, dtype=np.float64)
    pwd = np.asarray(word_given_doc, dtype=np.float64)
    return np.einsum("mk,mn->kn", ptw, pwd)


def train(
    docs: Sequence[RawDocument],
    config: TrainConfig,
    on_stage: Callable[[int, FcmResult], None] | None = None,
) -> TopicModel:
    """Run the whole pipeline on ``docs``.

    ``on_stage`` sees every clustering run: cascade stages first (indices
    0..len(schedule)-1), then the topic run with the next index. With
    ``cascade=False`` the topic clustering runs directly on the weighted
    matrix and is stage 0.
    """
    vocab, tdm = build_matrix(docs, config.tokenizer, min_df=config.min_df)
    m = len(vocab)
    if config.n_topics >= m:
        raise ValueError(
            f"n_topics={config.n_topics} needs a vocabulary larger than K; "
            f"corpus has {m} terms"
        )
    lw = local_weights(tdm)
    weights = compute_global_weights(
        lw, config.gtw, epsilon=config.epsilon, idf_variant=config.idf_variant
    )
    weighted = apply_gtw(tdm, weights)
    if config.cascade:
        reduced = cascade_reduce(
            weighted,
            config.schedule,
            fuzzifier=config.fuzzifier,
            threshold=config.threshold,
            max_iterations=config.max_iterations,
            seed=config.seed,
            on_stage=on_stage,
        )
        topic_stage = len(config.schedule)
    else:
        reduced = _dense(weighted)
        topic_stage = 0
    topic_config = FcmConfig(
        n_clusters=config.n_topics,
        fuzzifier=config.fuzzifier,
        threshold=config.threshold,
        max_iterations=config.max_iterations,
        seed=stage_seed(config.seed, topic_stage),
    )
    topic_result = fcm_run(reduced, topic_config)
    if on_stage is not None:
        on_stage(topic_stage, topic_result)
    ptw = topic_result.membership
    pw = word_probabilities(weighted)
    pwt = word_given_topic(ptw, pw)
    pwd = word_given_doc(weighted)
    ptd = topic_given_doc(ptw, pwd)
    return TopicModel(
        vocabulary=vocab,
        config=config,
        global_weights=weights,
        topic_given_word=ptw,
        word_prob=pw,
        word_given_topic=pwt,
        topic_given_doc=ptd,
        doc_ids=tdm.doc_ids,
    )


def _weighted_column(model: TopicModel, term_counts: dict[str, int]) -> np.ndarray:
    col = np.zeros(model.n_terms)
    for term, count in term_counts.items():
        i = model.vocabulary.index.get(term)
        if i is not None:
            col[i] = count * model.global_weights.clamped[i]
    return col


def fold_in(model: TopicModel, doc: RawDocument) -> np.ndarray:
    """Infer P(T|D) for an unseen document without retraining.

    The document is tokenized with the model's tokenizer, counted against
    the model vocabulary, weighted with the stored clamped weights, and
    mixed through the stored P(T|W). Unknown terms are ignored; a document
    with no known terms raises :class:`OutOfVocabularyError`.
    """
    counts: dict[str, int] = {}
    for token in tokenize(doc.text, model.config.tokenizer):
        counts[token] = counts.get(token, 0) + 1
    col = _weighted_column(model, counts)
    mass = col.sum()
    if not mass > 0:
        raise OutOfVocabularyError(doc.doc_id)
    pwd = col / mass
    return np.einsum("mk,m->k", model.topic_given_word, pwd)


def top_words(
    model: TopicModel, topic: int, count: int = 10
) -> list[tuple[str, float]]:
    """Highest-probability terms under P(W|T_k), ties broken alphabetically."""
    if not 0 <= topic < model.n_topics:
        raise ValueError(f"topic must be in [0, {model.n_topics}), got {topic}")
    if count < 1:
        raise ValueError("count must be >= 1")
    row = model.word_given_topic[topic]
    order = sorted(zip(model.vocabulary.terms, row), key=lambda p: (-p[1], p[0]))
    return [(term, float(prob)) for term, prob in order[:count]]


def _encode_raw(raw: np.ndarray) -> list:
    return [("-inf" if x == -np.inf else float(x)) for x in raw]


def _decode_raw(values: list) -> np.ndarray:
    return np.array(
        [(-np.inf if x == "-inf" else float(x)) for x in values], dtype=np.float64
    )


def _config_to_dict(config: TrainConfig) -> dict:
    return {
        "gtw": config.gtw.value,
        "n_topics": config.n_topics,
        "schedule": list(config.schedule.counts),
        "cascade": config.cascade,
        "fuzzifier": config.fuzzifier,
        "threshold": config.threshold,
        "max_iterations": config.max_iterations,
        "seed": config.seed,
        "epsilon": config.epsilon,
        "idf_variant": config.idf_variant,
        "min_df": config.min_df,
        "tokenizer": {
            "lowercase": config.tokenizer.lowercase,
            "min_token_length": config.tokenizer.min_token_length,
            "drop_numeric": config.tokenizer.drop_numeric,
            "stopwords": sorted(config.tokenizer.stopwords),
        },
    }


def _config_from_dict(data: dict) -> TrainConfig:
    tok = data["tokenizer"]
    return TrainConfig(
        n_topics=data["n_topics"],
        gtw=GtwMethod(data["gtw"]),
        schedule=CascadeSchedule(counts=tuple(data["schedule"])),
        cascade=data["cascade"],
        fuzzifier=data["fuzzifier"],
        threshold=data["threshold"],
        max_iterations=data["max_iterations"],
        seed=data["seed"],
        epsilon=data["epsilon"],
        idf_variant=data["idf_variant"],
        min_df=data["min_df"],
        tokenizer=TokenizerConfig(
            lowercase=tok["lowercase"],
            min_token_length=tok["min_token_length"],
            drop_numeric=tok["drop_numeric"],
            stopwords=frozenset(tok["stopwords"]),
        ),
    )


def model_to_json(model: TopicModel) -> str:
    """Serialize to a JSON document that round-trips floats exactly.

    Nested float lists rely on the shortest-round-trip repr json uses;
    -inf raw weights are encoded as the string "-inf" to stay inside
    standard JSON.
    """
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "config": _config_to_dict(model.config),
        "vocabulary": list(model.vocabulary.terms),
        "word_prob": model.word_prob.tolist(),
        "topic_given_word": model.topic_given_word.tolist(),
        "word_given_topic": model.word_given_topic.tolist(),
        "topic_given_doc": {
            "doc_ids": list(model.doc_ids),
            "values": model.topic_given_doc.tolist(),
        },
        "global_weights": {
            "method": model.global_weights.method.value,
            "epsilon": model.global_weights.epsilon,
            "raw": _encode_raw(model.global_weights.raw),
            "clamped": model.global_weights.clamped.tolist(),
        },
    }
    return json.dumps(doc, ensure_ascii=False, allow_nan=False) + "\n"


def model_from_json(text: str) -> TopicModel:
    """Inverse of :func:`model_to_json`; arrays come back bit-identical.

    Raises :class:`InputFormatError` when the text is not a model file.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputFormatError("model file must hold a JSON object")
    version = doc.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise InputFormatError(f"unsupported model format version: {version!r}")
    try:
        config = _config_from_dict(doc["config"])
        gw = doc["global_weights"]
        weights = GlobalWeightVector(
            method=GtwMethod(gw["method"]),
            raw=_decode_raw(gw["raw"]),
            clamped=np.asarray(gw["clamped"], dtype=np.float64),
            epsilon=gw["epsilon"],
        )
        ptd = doc["topic_given_doc"]
        return TopicModel(
            vocabulary=Vocabulary(terms=tuple(doc["vocabulary"])),
            config=config,
            global_weights=weights,
            topic_given_word=np.array(doc["topic_given_word"], dtype=np.float64),
            word_prob=np.array(doc["word_prob"], dtype=np.float64),
            word_given_topic=np.array(doc["word_given_topic"], dtype=np.float64),
            topic_given_doc=np.array(ptd["values"], dtype=np.float64),
            doc_ids=tuple(ptd["doc_ids"]),
        )
    except (KeyError, TypeError) as exc:
        raise InputFormatError(f"model file missing or malformed field: {exc}") from exc


def save_model(model: TopicModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> TopicModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
