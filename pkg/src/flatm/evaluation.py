"""Evaluation protocols: cross-validated classification and held-out
log-likelihood, plus a synthetic corpus generator for controlled runs.

Classification trains one model per class on that class's training
documents only (each class gets its own vocabulary) and labels a test
document by the class whose model gives it the highest smoothed
log-likelihood

    L_c(d) = sum_w f_w log(delta + sum_k P(w|T_k) P(T_k|d)),

where P(T|d) comes from folding the document into class c's model.
Tokens unknown to a model contribute log(delta) each, so a fully
out-of-vocabulary document is scored, not skipped. Ties go to the
lexicographically smallest class label.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import RawDocument, tokenize
from .model import (
    TopicModel,
    TrainConfig,
    _config_to_dict,
    stage_seed,
    train,
)

__all__ = [
    "SplitPlan",
    "EvalReport",
    "DEFAULT_DELTA",
    "make_folds",
    "doc_log_likelihood",
    "corpus_log_likelihood",
    "classify",
    "heldout_loglik",
    "generate_synthetic",
]

DEFAULT_DELTA = 1e-9


@dataclass(frozen=True)
class SplitPlan:
    """How to split a corpus for evaluation.

    ``folds`` is the number of cross-validation folds for classification,
    or the number of independent repeated splits for held-out likelihood.
    ``train_fraction`` only matters for the latter; fold splits divide the
    corpus evenly.
    """

    seed: int = 0
    train_fraction: float = 0.8
    folds: int = 5
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be >= 1")


@dataclass(frozen=True)
class EvalReport:
    """Per-fold metric values plus their mean and sample stdev.

    ``config`` echoes everything needed to reproduce the run. ``details``
    carries one dict of protocol-specific extras per fold.
    """

    protocol: str
    metric: str
    per_fold: tuple[float, ...]
    mean: float
    stdev: float
    config: dict
    details: tuple[dict, ...]

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "metric": self.metric,
            "per_fold": list(self.per_fold),
            "mean": self.mean,
            "stdev": self.stdev,
            "config": self.config,
            "details": list(self.details),
        }

    def to_text(self) -> str:
        rows = [("fold", self.metric)]
        for i, value in enumerate(self.per_fold):
            rows.append((str(i), repr(value)))
        rows.append(("mean", repr(self.mean)))
        rows.append(("stdev", repr(self.stdev)))
        width0 = max(len(r[0]) for r in rows)
        width1 = max(len(r[1]) for r in rows)
        lines = [f"protocol: {self.protocol}"]
        lines += [f"{a.ljust(width0)}  {b.rjust(width1)}" for a, b in rows]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["fold,metric,value"]
        for i, value in enumerate(self.per_fold):
            lines.append(f"{i},{self.metric},{value!r}")
        lines.append(f"mean,{self.metric},{self.mean!r}")
        lines.append(f"stdev,{self.metric},{self.stdev!r}")
        return "\n".join(lines) + "\n"


def _summary(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    stdev = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, stdev


def make_folds(docs: Sequence[RawDocument], plan: SplitPlan) -> list[tuple[int, ...]]:
    """Partition document indices into ``plan.folds`` disjoint folds.

    Stratified folding deals each label's shuffled documents round-robin,
    so every fold's share of a label is within one document of even.
    Falls back to unstratified when any document lacks a label.
    """
    if len(docs) < plan.folds:
        raise ValueError(f"{len(docs)} documents cannot fill {plan.folds} folds")
    rng = np.random.default_rng(plan.seed)
    folds: list[list[int]] = [[] for _ in range(plan.folds)]
    stratified = plan.stratified and all(d.label is not None for d in docs)
    if stratified:
        labels = sorted({d.label for d in docs})
        for li, label in enumerate(labels):
            idxs = [i for i, d in enumerate(docs) if d.label == label]
            perm = rng.permutation(len(idxs))
            for pos, p in enumerate(perm):
                folds[(pos + li) % plan.folds].append(idxs[int(p)])
    else:
        perm = rng.permutation(len(docs))
        for pos, p in enumerate(perm):
            folds[pos % plan.folds].append(int(p))
    return [tuple(sorted(fold)) for fold in folds]


def _count_in_vocab(
    model: TopicModel, doc: RawDocument
) -> tuple[dict[str, int], int, int]:
    tokens = tokenize(doc.text, model.config.tokenizer)
    counts: dict[str, int] = {}
    oov = 0
    for token in tokens:
        if token in model.vocabulary:
            counts[token] = counts.get(token, 0) + 1
        else:
            oov += 1
    return counts, oov, len(tokens)


def doc_log_likelihood(
    model: TopicModel,
    doc: RawDocument,
    delta: float = DEFAULT_DELTA,
    word_dist: np.ndarray | None = None,
) -> tuple[float, int, int]:
    """Smoothed log-likelihood of one document under the model.

    Returns (loglik, oov_tokens, total_tokens). By default each known
    token w contributes log(delta + sum_k P(w|T_k) P(T_k|d)) with P(T|d)
    from fold-in; pass ``word_dist`` (length m) to score against a fixed
    word distribution instead, e.g. the unigram P(w). Unknown tokens and
    fully out-of-vocabulary documents contribute log(delta) per token.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    counts, oov, total = _count_in_vocab(model, doc)
    terms = [oov * math.log(delta)] if oov else []
    if counts:
        if word_dist is None:
            col = np.zeros(model.n_terms)
            for term, count in counts.items():
                i = model.vocabulary.index[term]
                col[i] = count * model.global_weights.clamped[i]
            pwd = col / col.sum()
            ptd = np.einsum("mk,m->k", model.topic_given_word, pwd)
            mix = np.einsum("km,k->m", model.word_given_topic, ptd)
        else:
            mix = np.asarray(word_dist, dtype=np.float64)
        for term in sorted(counts):
            i = model.vocabulary.index[term]
            terms.append(counts[term] * math.log(delta + mix[i]))
    return math.fsum(terms), oov, total


def corpus_log_likelihood(
    model: TopicModel,
    docs: Sequence[RawDocument],
    delta: float = DEFAULT_DELTA,
    word_dist: np.ndarray | None = None,
) -> dict:
    """Totals over a document set; order-invariant thanks to exact sums."""
    per_doc = []
    oov_total = 0
    token_total = 0
    scored = 0
    for doc in docs:
        ll, oov, total = doc_log_likelihood(model, doc, delta, word_dist)
        per_doc.append(ll)
        oov_total += oov
        token_total += total
        if oov < total:
            scored += 1
    return {
        "loglik": math.fsum(per_doc),
        "oov_tokens": oov_total,
        "n_tokens": token_total,
        "docs_with_known_terms": scored,
    }


def _train_many(
    jobs: Sequence[tuple[Sequence[RawDocument], TrainConfig]], threads: int
) -> list[TopicModel]:
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda job: train(job[0], job[1]), jobs))
    return [train(docs, config) for docs, config in jobs]


def classify(
    docs: Sequence[RawDocument],
    config: TrainConfig,
    plan: SplitPlan,
    delta: float = DEFAULT_DELTA,
    threads: int = 1,
) -> EvalReport:
    """Cross-validated per-class-likelihood classification accuracy.

    Every document needs a label and every class at least ``plan.folds``
    documents. Per-model seeds derive from ``config.seed`` and the
    (fold, class) pair, so thread count never changes results.
    """
    if plan.folds < 2:
        raise ValueError("classification needs at least 2 folds")
    unlabeled = [d.doc_id for d in docs if d.label is None]
    if unlabeled:
        raise ValueError(f"document {unlabeled[0]!r} has no label")
    labels = sorted({d.label for d in docs})
    for label in labels:
        count = sum(1 for d in docs if d.label == label)
        if count < plan.folds:
            raise ValueError(
                f"class {label!r} has {count} documents; needs at least "
                f"{plan.folds} for {plan.folds}-fold evaluation"
            )
    folds = make_folds(docs, plan)
    jobs = []
    for f in range(plan.folds):
        test_set = set(folds[f])
        for li, label in enumerate(labels):
            class_docs = [
                d
                for i, d in enumerate(docs)
                if i not in test_set and d.label == label
            ]
            seed = stage_seed(config.seed, f, li)
            jobs.append((class_docs, replace(config, seed=seed)))
    models = _train_many(jobs, threads)
    per_fold = []
    details = []
    for f in range(plan.folds):
        fold_models = dict(
            zip(labels, models[f * len(labels) : (f + 1) * len(labels)])
        )
        correct = 0
        oov_tokens = 0
        for i in folds[f]:
            doc = docs[i]
            best_label = None
            best_ll = -math.inf
            for label in labels:
                ll, oov, _ = doc_log_likelihood(fold_models[label], doc, delta)
                if ll > best_ll:
                    best_ll, best_label = ll, label
                if label == doc.label:
                    oov_tokens += oov
            if best_label == doc.label:
                correct += 1
        accuracy = correct / len(folds[f])
        per_fold.append(accuracy)
        details.append(
            {
                "fold": f,
                "correct": correct,
                "total": len(folds[f]),
                "oov_tokens_own_class": oov_tokens,
            }
        )
    mean, stdev = _summary(per_fold)
    return EvalReport(
        protocol="classify",
        metric="accuracy",
        per_fold=tuple(per_fold),
        mean=mean,
        stdev=stdev,
        config=_echo_config(config, plan, delta),
        details=tuple(details),
    )


def _split_indices(
    docs: Sequence[RawDocument], plan: SplitPlan, split_seed: int
) -> tuple[list[int], list[int]]:
    rng = np.random.default_rng(split_seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    stratified = plan.stratified and all(d.label is not None for d in docs)
    if stratified:
        for label in sorted({d.label for d in docs}):
            idxs = [i for i, d in enumerate(docs) if d.label == label]
            perm = [idxs[int(p)] for p in rng.permutation(len(idxs))]
            k = int(round(plan.train_fraction * len(idxs)))
            k = min(max(k, 1), len(idxs))
            train_idx += perm[:k]
            test_idx += perm[k:]
    else:
        perm = [int(p) for p in rng.permutation(len(docs))]
        k = int(round(plan.train_fraction * len(docs)))
        k = min(max(k, 1), len(docs) - 1)
        train_idx, test_idx = perm[:k], perm[k:]
    if not test_idx or not train_idx:
        raise ValueError("split leaves an empty train or test set")
    return sorted(train_idx), sorted(test_idx)


def heldout_loglik(
    docs: Sequence[RawDocument],
    config: TrainConfig,
    plan: SplitPlan,
    delta: float = DEFAULT_DELTA,
    threads: int = 1,
) -> EvalReport:
    """Held-out log-likelihood over repeated train/test splits.

    Each of ``plan.folds`` rounds draws an independent split from the plan
    seed, trains on the train side, and sums the smoothed log-likelihood
    of the test side. Details include a unigram baseline that replaces the
    per-document topic mixture with the corpus-wide P(w). Fails if a round
    leaves no test document with any in-vocabulary term.
    """
    splits = [
        _split_indices(docs, plan, stage_seed(plan.seed, f))
        for f in range(plan.folds)
    ]
    jobs = [
        ([docs[i] for i in train_idx], replace(config, seed=stage_seed(config.seed, f)))
        for f, (train_idx, _) in enumerate(splits)
    ]
    models = _train_many(jobs, threads)
    per_fold = []
    details = []
    for f, (train_idx, test_idx) in enumerate(splits):
        model = models[f]
        test_docs = [docs[i] for i in test_idx]
        stats = corpus_log_likelihood(model, test_docs, delta)
        if stats["docs_with_known_terms"] == 0:
            raise ValueError(
                f"round {f}: every held-out document is fully out of vocabulary"
            )
        baseline = corpus_log_likelihood(
            model, test_docs, delta, word_dist=model.word_prob
        )
        per_fold.append(stats["loglik"])
        details.append(
            {
                "fold": f,
                "n_train": len(train_idx),
                "n_test": len(test_idx),
                "oov_tokens": stats["oov_tokens"],
                "n_tokens": stats["n_tokens"],
                "baseline_loglik": baseline["loglik"],
            }
        )
    mean, stdev = _summary(per_fold)
    return EvalReport(
        protocol="loglik",
        metric="loglik",
        per_fold=tuple(per_fold),
        mean=mean,
        stdev=stdev,
        config=_echo_config(config, plan, delta),
        details=tuple(details),
    )


def _echo_config(config: TrainConfig, plan: SplitPlan, delta: float) -> dict:
    return {
        "model": _config_to_dict(config),
        "plan": {
            "seed": plan.seed,
            "train_fraction": plan.train_fraction,
            "folds": plan.folds,
            "stratified": plan.stratified,
        },
        "delta": delta,
    }


def generate_synthetic(
    seed: int,
    n_classes: int = 3,
    vocab_per_class: int = 50,
    docs_per_class: int = 100,
    doc_length: int = 50,
    overlap_fraction: float = 0.0,
) -> list[RawDocument]:
    """Build a labeled corpus with known class structure.

    Class c draws tokens uniformly from its own pool of
    ``vocab_per_class`` terms (named ``c{c}w{t}``) plus a shared pool of
    ``round(overlap_fraction * vocab_per_class)`` terms (named ``sw{t}``)
    common to all classes. Token names survive the default tokenizer.
    Labels are ``class0``..; ids are ``class0-000``..
    """
    if n_classes < 1 or vocab_per_class < 1 or docs_per_class < 1 or doc_length < 1:
        raise ValueError("all synthetic corpus sizes must be >= 1")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must be in [0, 1)")
    shared = [f"sw{t}" for t in range(int(round(overlap_fraction * vocab_per_class)))]
    rng = np.random.default_rng(seed)
    docs = []
    for ci in range(n_classes):
        label = f"class{ci}"
        pool = [f"c{ci}w{t}" for t in range(vocab_per_class)] + shared
        for d in range(docs_per_class):
            picks = rng.integers(0, len(pool), size=doc_length)
            text = " ".join(pool[int(p)] for p in picks)
            docs.append(
                RawDocument(doc_id=f"{label}-{d:03d}", text=text, label=label)
            )
    return docs
