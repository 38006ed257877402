"""fairtail: studying and mitigating the coupled effects of label noise and
long-tailed sub-populations on small classifiers.

The package provides corpus synthesis (long-tail subsampling, label-noise
injection, a two-Gaussian generator with head/tail groups), group discovery
(k-means, score splits), baseline robust losses plus a group-fairness
penalty, a small deterministic SGD trainer, leave-one-group-out influence
analysis, closed-form error probabilities for the two-Gaussian model with
Monte Carlo cross-checks, and a paired t-test harness.
"""

__version__ = "0.1.0"

from .datamodel import LabeledCorpus, GroupAssignment, CorpusSummary

__all__ = ["LabeledCorpus", "GroupAssignment", "CorpusSummary", "__version__"]
