"""Leave-one-group-out influence by deterministic retraining.

Removing a group and retraining with the same seed isolates that group's
contribution: the only difference between the two runs is the removed rows,
because batch shuffles are re-derived from the seed over whichever index set
survives. Reported per group are the change in per-group test accuracy, the
change in per-class test accuracy, and the change in the model's probability
on each test sample's clean label. All three are bounded in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import GroupAssignment, LabeledCorpus
from .trainer import ModelSpec, TrainConfig, TrainReport, evaluate, train

__all__ = ["InfluenceReport", "remove_group", "influence_of_group",
           "influence_sweep", "box_summary"]


@dataclass(frozen=True)
class InfluenceReport:
    removed_group: int
    acc_p: np.ndarray            # per eval group: full minus ablated accuracy
    acc_c: np.ndarray            # per class: full minus ablated accuracy
    infl: np.ndarray             # per eval sample: full minus ablated label probability
    overall_delta: float
    seed: int


def remove_group(corpus: LabeledCorpus, group: int) -> LabeledCorpus:
    """Corpus restricted to rows outside the group; indices keep their meaning.

    The removed group becomes empty rather than renumbered, so reports stay
    aligned across ablations. The input corpus is untouched.
    """
    if corpus.groups is None:
        raise ValueError("corpus has no group assignment")
    if not 0 <= group < corpus.groups.group_count:
        raise ValueError(f"unknown group {group}")
    keep = corpus.groups.group_ids != group
    groups = GroupAssignment(corpus.groups.group_ids[keep], corpus.groups.group_count)
    return LabeledCorpus(corpus.features[keep], corpus.noisy_labels[keep],
                         corpus.class_count,
                         None if corpus.clean_labels is None else corpus.clean_labels[keep],
                         groups)


def _deltas(full, ablated, eval_corpus) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    acc_c = np.nan_to_num(full.per_class_accuracy) - np.nan_to_num(ablated.per_class_accuracy)
    if full.per_group_accuracy is not None:
        acc_p = np.nan_to_num(full.per_group_accuracy) - np.nan_to_num(ablated.per_group_accuracy)
    else:
        acc_p = np.array([])
    infl = full.label_probabilities - ablated.label_probabilities
    return acc_p, acc_c, infl, full.overall_accuracy - ablated.overall_accuracy


def influence_of_group(train_corpus: LabeledCorpus, eval_corpus: LabeledCorpus,
                       group: int, model: ModelSpec, config: TrainConfig,
                       full_report: TrainReport | None = None) -> InfluenceReport:
    """Train with and without the group under one seed; report the deltas.

    Pass ``full_report`` (a completed run on the whole corpus) to reuse it
    across a sweep.
    """
    if full_report is None:
        full_report = train(train_corpus, eval_corpus, model, config)
    ablated_corpus = remove_group(train_corpus, group)
    if ablated_corpus.n == 0:
        raise ValueError("group covers entire corpus: nothing left to train on")
    ablated = train(ablated_corpus, eval_corpus, model, config)
    full_eval = evaluate(full_report.model, eval_corpus)
    ablated_eval = evaluate(ablated.model, eval_corpus)
    acc_p, acc_c, infl, delta = _deltas(full_eval, ablated_eval, eval_corpus)
    return InfluenceReport(group, acc_p, acc_c, infl, delta, config.seed)


def influence_sweep(train_corpus: LabeledCorpus, eval_corpus: LabeledCorpus,
                    groups, model: ModelSpec, config: TrainConfig,
                    jobs: int = 1) -> list[InfluenceReport]:
    """One report per listed group; the full-model run happens once.

    With ``jobs > 1`` ablations run in a process pool; outputs are ordered by
    the input group list either way.
    """
    groups = list(groups)
    if not groups:
        return []
    full_report = train(train_corpus, eval_corpus, model, config)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(influence_of_group, train_corpus, eval_corpus,
                                   g, model, config, full_report) for g in groups]
            return [f.result() for f in futures]
    return [influence_of_group(train_corpus, eval_corpus, g, model, config, full_report)
            for g in groups]


def box_summary(values) -> dict:
    """Quartiles, median, whiskers and 1.5*IQR outliers of a value list."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, med, q3 = (float(np.quantile(v, q)) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo) & (v <= hi)]
    return {
        "q1": q1,
        "median": med,
        "q3": q3,
        "whisker_low": float(inside[0]) if inside.size else q1,
        "whisker_high": float(inside[-1]) if inside.size else q3,
        "outliers": [float(x) for x in v[(v < lo) | (v > hi)]],
    }
