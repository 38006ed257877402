"""Paired Student t-test and the shipped accuracy-pair fixture.

The fixture CSV (``data/table1_pairs.csv``) holds published accuracy pairs
for six baseline methods with and without the fairness penalty, across two
datasets, two noise models, two noise rates and three imbalance ratios: 12
paired settings per (method, fr_type, dataset) row. Running
:func:`run_table2` reproduces the source's significance table from it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib.resources import files
from math import sqrt
from pathlib import Path

import numpy as np
from scipy.special import betainc

__all__ = [
    "PairedSample",
    "TTestResult",
    "paired_t_test",
    "student_t_two_sided_p",
    "format_p",
    "load_pair_fixture",
    "run_table2",
    "write_table2_csv",
    "packaged_fixture_path",
]


@dataclass(frozen=True)
class PairedSample:
    baseline: tuple
    treated: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.baseline) != len(self.treated):
            raise ValueError("baseline and treated must have equal length")
        if len(self.baseline) < 2:
            raise ValueError("need at least two pairs")
        object.__setattr__(self, "baseline", tuple(float(v) for v in self.baseline))
        object.__setattr__(self, "treated", tuple(float(v) for v in self.treated))


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    degrees_of_freedom: int
    degenerate: bool = False


def student_t_two_sided_p(t: float, df: int) -> float:
    """Two-sided tail mass of Student's t via the regularized incomplete beta.

    P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
    """
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def paired_t_test(sample: PairedSample) -> TTestResult:
    """Statistic mean(d) / (sd(d)/sqrt(m)) on d = treated - baseline.

    Sample standard deviation (m-1 denominator); two-sided p. All-zero
    differences are degenerate (statistic 0, p 1); zero variance with a
    nonzero mean has no finite statistic and raises.
    """
    d = np.array(sample.treated) - np.array(sample.baseline)
    m = d.shape[0]
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, m - 1, degenerate=True)
        raise ValueError("zero variance: differences are constant but nonzero")
    stat = mean / (sd / sqrt(m))
    return TTestResult(stat, student_t_two_sided_p(stat, m - 1), m - 1)


def format_p(p: float) -> str:
    """Three-decimal display with a floor: values below 0.0005 print as <0.0005."""
    return "<0.0005" if p < 0.0005 else f"{p:.3f}"


def packaged_fixture_path() -> Path:
    return Path(str(files("fairtail").joinpath("data/table1_pairs.csv")))


def load_pair_fixture(path=None) -> list[dict]:
    """Rows of the accuracy-pair CSV with numeric fields parsed."""
    path = Path(path) if path is not None else packaged_fixture_path()
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"method", "fr_type", "dataset", "noise_type", "rho", "r",
                    "acc_base", "acc_fr"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValueError(f"fixture malformed: columns {reader.fieldnames}")
        for lineno, row in enumerate(reader):
            try:
                rows.append({
                    "method": row["method"], "fr_type": row["fr_type"],
                    "dataset": row["dataset"], "noise_type": row["noise_type"],
                    "rho": float(row["rho"]), "r": int(row["r"]),
                    "acc_base": float(row["acc_base"]), "acc_fr": float(row["acc_fr"]),
                })
            except (KeyError, ValueError) as exc:
                raise ValueError(f"fixture malformed at data row {lineno}: {exc}") from None
    if not rows:
        raise ValueError("fixture malformed: no data rows")
    return rows


def run_table2(fixture_path=None) -> list[dict]:
    """One paired t-test per (method, fr_type, dataset) group of the fixture.

    A row is flagged significant when p < 0.1 and the statistic is positive.
    Row order follows first appearance in the fixture; the pairs inside a
    group keep fixture order.
    """
    rows = load_pair_fixture(fixture_path)
    order: list[tuple] = []
    pairs: dict[tuple, list] = {}
    for row in rows:
        key = (row["method"], row["fr_type"], row["dataset"])
        if key not in pairs:
            pairs[key] = []
            order.append(key)
        pairs[key].append((row["acc_base"], row["acc_fr"]))
    out = []
    for key in order:
        base, treated = zip(*pairs[key])
        res = paired_t_test(PairedSample(base, treated, label="/".join(key)))
        out.append({
            "method": key[0], "fr_type": key[1], "dataset": key[2],
            "statistic": res.statistic, "p_value": res.p_value,
            "significant": bool(res.p_value < 0.1 and res.statistic > 0),
        })
    return out


def write_table2_csv(results: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "fr_type", "dataset", "statistic", "p_value", "significant"])
        for row in results:
            writer.writerow([row["method"], row["fr_type"], row["dataset"],
                             f"{row['statistic']:.3f}", format_p(row["p_value"]),
                             "yes" if row["significant"] else "no"])
