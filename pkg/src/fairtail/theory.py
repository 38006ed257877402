"""Closed forms and Monte Carlo checks for the two-Gaussian head/tail model.

Model: binary classes at means mu_minus < mu_plus with shared sigma and
P(class +) = prior_plus. Within each class, samples more than eta standard
deviations toward the other class form the tail; both classes have head
probability 1 - Phi(-eta). Labels flip with per-group rates (rho_h_plus is
the flip rate of head positives, and so on), all below 1/2. Classifiers are
thresholds: predict + exactly when x > theta.

Every closed form here has a Monte Carlo twin (:func:`mc_error_probs`,
:func:`sample_midpoint_trial`) that simulates the generative process and
tallies the same events, so the algebra is checkable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt

import numpy as np
from scipy.special import log_ndtr, ndtr

from .datamodel import LabeledCorpus
from .seeds import STREAM_MC, STREAM_MIDPOINT, derive_rng
from .synthesis import HEAD_MINUS, HEAD_PLUS, LABEL_PLUS

__all__ = [
    "GaussianWorld",
    "ErrorQuadruple",
    "PopulationCounts",
    "McErrorProbs",
    "std_normal_cdf",
    "log_std_normal_cdf",
    "bayes_threshold",
    "clean_error_probs",
    "gap_expression",
    "error_gap_direction",
    "noisy_error_probs",
    "mc_error_probs",
    "estimator_bias",
    "midpoint_estimator",
    "sample_midpoint_trial",
    "concentration_probability",
    "head_tail_ratio",
    "theorem_objectives",
    "fairness_gap",
    "penalized_grid_argmin",
    "theory_table",
]


@dataclass(frozen=True)
class GaussianWorld:
    """Parameters of the two-Gaussian world with per-group flip rates."""

    mu_plus: float
    mu_minus: float
    sigma: float
    eta: float
    prior_plus: float = 0.5
    rho_h_plus: float = 0.0
    rho_h_minus: float = 0.0
    rho_t_plus: float = 0.0
    rho_t_minus: float = 0.0

    def __post_init__(self):
        if not self.mu_plus > self.mu_minus:
            raise ValueError("mu_plus must exceed mu_minus")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if not 0 < self.prior_plus < 1:
            raise ValueError("prior_plus must lie in (0, 1)")
        for name in ("rho_h_plus", "rho_h_minus", "rho_t_plus", "rho_t_minus"):
            v = getattr(self, name)
            if not 0 <= v < 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5)")


@dataclass(frozen=True)
class ErrorQuadruple:
    """One value per population, ordered (head+, head-, tail+, tail-)."""

    head_plus: float
    head_minus: float
    tail_plus: float
    tail_minus: float

    def as_array(self) -> np.ndarray:
        return np.array([self.head_plus, self.head_minus, self.tail_plus, self.tail_minus])


@dataclass(frozen=True)
class PopulationCounts:
    """Sample counts of the four noisy-label populations."""

    head_plus: int
    tail_plus: int
    head_minus: int
    tail_minus: int

    def __post_init__(self):
        for name in ("head_plus", "tail_plus", "head_minus", "tail_minus"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def total_plus(self) -> int:
        return self.head_plus + self.tail_plus

    @property
    def total_minus(self) -> int:
        return self.head_minus + self.tail_minus


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return float(ndtr(z))


def log_std_normal_cdf(z: float) -> float:
    """log Phi(z), stable far into the lower tail."""
    return float(log_ndtr(z))


def bayes_threshold(world: GaussianWorld) -> float:
    """Midpoint of the class means: the optimal threshold for equal priors."""
    return 0.5 * (world.mu_minus + world.mu_plus)


def clean_error_probs(world: GaussianWorld, theta: float) -> ErrorQuadruple:
    """Per-population misclassification probabilities under clean labels.

    For the threshold classifier sign(x - theta), with tail mass
    m = Phi(-eta):

    * class +: theta <= mu_plus - eta*sigma gives head error 0 and tail error
      Phi((theta - mu_plus)/sigma) / m; otherwise the head error is
      (Phi((theta - mu_plus)/sigma) - m) / (1 - m) and the tail error is 1.
    * class -: mirrored around mu_minus + eta*sigma with
      Phi((mu_minus - theta)/sigma).
    """
    m = std_normal_cdf(-world.eta)
    if m < 1e-300:
        raise ValueError("eta too small: tail mass underflows")
    s = world.sigma
    z_plus = (theta - world.mu_plus) / s
    if theta <= world.mu_plus - world.eta * s:
        head_plus = 0.0
        tail_plus = exp(log_std_normal_cdf(z_plus) - log_std_normal_cdf(-world.eta))
    else:
        head_plus = (std_normal_cdf(z_plus) - m) / (1.0 - m)
        tail_plus = 1.0
    z_minus = (world.mu_minus - theta) / s
    if theta >= world.mu_minus + world.eta * s:
        head_minus = 0.0
        tail_minus = exp(log_std_normal_cdf(z_minus) - log_std_normal_cdf(-world.eta))
    else:
        head_minus = (std_normal_cdf(z_minus) - m) / (1.0 - m)
        tail_minus = 1.0
    return ErrorQuadruple(head_plus, head_minus, min(tail_plus, 1.0), min(tail_minus, 1.0))


def gap_expression(world: GaussianWorld, theta: float) -> tuple[float, float]:
    """Per-class direction expression Phi((theta-mu)*s) * sign((mu-theta)*s - eta*sigma).

    The tail-minus-head error gap moves monotonically with this expression as
    theta varies (same direction of change); see :func:`error_gap_direction`.
    """
    plus = (std_normal_cdf(theta - world.mu_plus)
            * np.sign((world.mu_plus - theta) - world.eta * world.sigma))
    minus = (std_normal_cdf(-(theta - world.mu_minus))
             * np.sign(-(world.mu_minus - theta) - world.eta * world.sigma))
    return float(plus), float(minus)


def error_gap_direction(world: GaussianWorld, theta: float) -> tuple[int, int]:
    """Sign of (tail error - head error) per class, from the closed forms.

    The gap is nonnegative for every finite theta (the tail never beats the
    head); its size rises and falls together with :func:`gap_expression`.
    """
    q = clean_error_probs(world, theta)
    return (int(np.sign(q.tail_plus - q.head_plus)),
            int(np.sign(q.tail_minus - q.head_minus)))


def noisy_error_probs(world: GaussianWorld, theta: float) -> ErrorQuadruple:
    """Noisy-label mismatch mass per (group tag, noisy class), in closed form.

    Entry (H, c) is P(f(X) != Ytilde, Ytilde = c | head tag), where the tag
    follows the clean label; likewise for tails. Writing p = prior_plus and
    (a, b, c, d) for the clean quadruple, the mixture identities are

        head+:  p*(1-rho_h_plus)*a     + (1-p)*rho_h_minus*(1-b)
        head-:  p*rho_h_plus*(1-a)     + (1-p)*(1-rho_h_minus)*b
        tail+:  p*(1-rho_t_plus)*c     + (1-p)*rho_t_minus*(1-d)
        tail-:  p*rho_t_plus*(1-c)     + (1-p)*(1-rho_t_minus)*d

    Each line is exact: a kept sample of class y is mismatched with Ytilde=y
    exactly when it is mismatched with y, while a flipped one is mismatched
    with the opposite label exactly when it agrees with y. With all rates
    zero the quadruple is the clean quadruple scaled by the class priors.
    """
    q = clean_error_probs(world, theta)
    p = world.prior_plus
    a, b, c, d = q.head_plus, q.head_minus, q.tail_plus, q.tail_minus
    return ErrorQuadruple(
        p * (1 - world.rho_h_plus) * a + (1 - p) * world.rho_h_minus * (1 - b),
        p * world.rho_h_plus * (1 - a) + (1 - p) * (1 - world.rho_h_minus) * b,
        p * (1 - world.rho_t_plus) * c + (1 - p) * world.rho_t_minus * (1 - d),
        p * world.rho_t_plus * (1 - c) + (1 - p) * (1 - world.rho_t_minus) * d,
    )


@dataclass(frozen=True)
class McErrorProbs:
    estimates: ErrorQuadruple
    std_errors: ErrorQuadruple
    mismatch_counts: tuple
    denominators: tuple


def mc_error_probs(world: GaussianWorld, theta: float, n_samples: int, seed: int,
                   noisy: bool = False) -> McErrorProbs:
    """Monte Carlo twin of the closed forms, tallied from raw draws.

    Draws the generative process (class by prior, Gaussian feature, head/tail
    tag from the clean rule, optional per-group label flip) and classifies by
    sign(x - theta). Clean mode tallies mismatches against the clean label
    per (tag, class); noisy mode tallies mismatches against the noisy label
    per (tag, noisy class) over the tag's total count, matching
    :func:`noisy_error_probs` entry for entry.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = derive_rng(seed, STREAM_MC)
    is_plus = rng.random(n_samples) < world.prior_plus
    x = np.where(is_plus,
                 rng.normal(world.mu_plus, world.sigma, n_samples),
                 rng.normal(world.mu_minus, world.sigma, n_samples))
    mu = np.where(is_plus, world.mu_plus, world.mu_minus)
    sign = np.where(is_plus, 1.0, -1.0)
    head = (x - mu) / world.sigma * sign >= -world.eta
    pred_plus = x > theta
    if noisy:
        flip_prob = np.where(head,
                             np.where(is_plus, world.rho_h_plus, world.rho_h_minus),
                             np.where(is_plus, world.rho_t_plus, world.rho_t_minus))
        label_plus = is_plus ^ (rng.random(n_samples) < flip_prob)
    else:
        label_plus = is_plus
    mismatch = pred_plus != label_plus

    nums, dens, est, ses = [], [], [], []
    for tag, cls_plus in ((True, True), (True, False), (False, True), (False, False)):
        in_tag = head == tag
        in_pop = in_tag & (label_plus == cls_plus)
        den = int(in_tag.sum()) if noisy else int(in_pop.sum())
        num = int((in_pop & mismatch).sum())
        if den == 0:
            raise ValueError("empty population: no samples landed in one of the four groups")
        p_hat = num / den
        nums.append(num)
        dens.append(den)
        est.append(p_hat)
        ses.append(sqrt(p_hat * (1.0 - p_hat) / den))
    return McErrorProbs(ErrorQuadruple(*est), ErrorQuadruple(*ses), tuple(nums), tuple(dens))


def estimator_bias(world: GaussianWorld, counts: PopulationCounts) -> float:
    """Systematic offset of the class-mean midpoint under asymmetric noise.

    (mu_minus - mu_plus)/2 times the difference between the count-weighted
    flip rates of the two noisy-label classes.
    """
    w_plus = (world.rho_h_plus * counts.head_plus + world.rho_t_plus * counts.tail_plus) / counts.total_plus
    w_minus = (world.rho_h_minus * counts.head_minus + world.rho_t_minus * counts.tail_minus) / counts.total_minus
    return 0.5 * (world.mu_minus - world.mu_plus) * (w_plus - w_minus)


def midpoint_estimator(corpus: LabeledCorpus) -> float:
    """Half the sum of the two noisy-class feature means (1-D features)."""
    x = corpus.features[:, 0]
    plus = corpus.noisy_labels == LABEL_PLUS
    if not plus.any() or plus.all():
        raise ValueError("empty noisy class")
    return 0.5 * (float(x[plus].mean()) + float(x[~plus].mean()))


def sample_midpoint_trial(world: GaussianWorld, counts: PopulationCounts, seed: int) -> float:
    """One draw of the midpoint estimator at fixed noisy-population counts.

    Each sample of a noisy-label class is annotated correctly with
    probability 1 - rho of its group; a correct one sits at its own class
    Gaussian and an incorrect one at the other class Gaussian. The estimator
    averages the two noisy classes' features and halves the sum, so its
    expectation is the optimal threshold plus :func:`estimator_bias`.
    """
    rng = derive_rng(seed, STREAM_MIDPOINT)
    own = {"plus": world.mu_plus, "minus": world.mu_minus}
    other = {"plus": world.mu_minus, "minus": world.mu_plus}
    means = []
    for cls, pops in (("plus", ((counts.head_plus, world.rho_h_plus),
                                (counts.tail_plus, world.rho_t_plus))),
                      ("minus", ((counts.head_minus, world.rho_h_minus),
                                 (counts.tail_minus, world.rho_t_minus)))):
        values = []
        for n, rho in pops:
            correct = rng.random(n) >= rho
            z = np.where(correct,
                         rng.normal(own[cls], world.sigma, n),
                         rng.normal(other[cls], world.sigma, n))
            values.append(z)
        means.append(np.concatenate(values).mean())
    return 0.5 * float(means[0] + means[1])


def concentration_probability(world: GaussianWorld, counts: PopulationCounts,
                              delta: float) -> float:
    """Lower bound on P(|midpoint - optimum - bias| <= delta); may be negative.

    Five-term union bound: one Hoeffding term per population's annotation
    accuracy plus one Gaussian term for the feature means. Returned as-is,
    so a vacuous (negative) bound is visible to the caller.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    dmu2 = (world.mu_plus - world.mu_minus) ** 2
    n_ip, n_im = counts.total_plus, counts.total_minus
    terms = [
        8 * delta ** 2 * n_ip ** 2 / (25 * dmu2 * counts.head_plus),
        8 * delta ** 2 * n_ip ** 2 / (25 * dmu2 * counts.tail_plus),
        8 * delta ** 2 * n_im ** 2 / (25 * dmu2 * counts.head_minus),
        8 * delta ** 2 * n_im ** 2 / (25 * dmu2 * counts.tail_minus),
        2 * delta ** 2 * (n_ip * n_im) / (25 * world.sigma ** 2 * dmu2 * (n_ip + n_im)),
    ]
    return 1.0 - sum(2.0 * exp(-t) for t in terms)


def head_tail_ratio(world: GaussianWorld) -> float:
    """Head mass over tail mass, (1 - Phi(-eta)) / Phi(-eta)."""
    m = std_normal_cdf(-world.eta)
    if m < 1e-300:
        raise ValueError("eta too small: tail mass underflows")
    return (1.0 - m) / m


def theorem_objectives(world: GaussianWorld, theta: float) -> tuple[float, float]:
    """Two routes to the tag-weighted noisy risk; their difference is 0 in theta.

    Requires a balanced prior. With r the head/tail mass ratio, gap rates
    rho_h = rho_h_plus - rho_h_minus and rho_t likewise, and sums
    s_h = rho_h_plus + rho_h_minus, s_t likewise:

    * G combines the noisy quadruple (e1, e2, e3, e4) directly:
          r*[(1-rho_h)*e1 + (1+rho_h)*e2] + (1-rho_t)*e3 + (1+rho_t)*e4.
    * H rewrites G through the clean quadruple: the noise-attenuated clean
      risk, minus twice the lambda-free fairness gaps, plus a noise-only
      constant:
          r*(1-s_h)*(a+b)/2 + (1-s_t)*(c+d)/2
          - 2*r*rho_h*(e1-e2) - 2*rho_t*(e3-e4)
          + r*(s_h - rho_h^2)/2 + (s_t - rho_t^2)/2.

    Expanding the mixture identities shows G == H identically, so the pair
    being constant (and zero) apart in theta is this module's central check:
    minimizing the noisy risk is the same problem as minimizing the
    attenuated clean risk once the two fairness gaps are controlled.
    """
    if world.prior_plus != 0.5:
        raise ValueError("theorem requires balanced prior")
    r = head_tail_ratio(world)
    cq = clean_error_probs(world, theta)
    nq = noisy_error_probs(world, theta)
    a, b, c, d = cq.head_plus, cq.head_minus, cq.tail_plus, cq.tail_minus
    e1, e2, e3, e4 = nq.head_plus, nq.head_minus, nq.tail_plus, nq.tail_minus
    rho_h = world.rho_h_plus - world.rho_h_minus
    rho_t = world.rho_t_plus - world.rho_t_minus
    s_h = world.rho_h_plus + world.rho_h_minus
    s_t = world.rho_t_plus + world.rho_t_minus
    G = r * ((1 - rho_h) * e1 + (1 + rho_h) * e2) + ((1 - rho_t) * e3 + (1 + rho_t) * e4)
    H = (0.5 * r * (1 - s_h) * (a + b) + 0.5 * (1 - s_t) * (c + d)
         - 2 * r * rho_h * (e1 - e2) - 2 * rho_t * (e3 - e4)
         + 0.5 * r * (s_h - rho_h ** 2) + 0.5 * (s_t - rho_t ** 2))
    return float(G), float(H)


def fairness_gap(world: GaussianWorld, theta: float) -> float:
    """|e1 - e2| + |e3 - e4|: the within-tag noisy mismatch gaps."""
    nq = noisy_error_probs(world, theta)
    return abs(nq.head_plus - nq.head_minus) + abs(nq.tail_plus - nq.tail_minus)


def penalized_grid_argmin(world: GaussianWorld, grid, lam: float) -> float:
    """Gridpoint minimizing G(theta) + lam * fairness_gap(theta).

    Ties resolve toward the gridpoint closest to the optimal threshold, then
    to the lower index.
    """
    pts = np.asarray(grid, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("grid must be nonempty")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    vals = np.array([theorem_objectives(world, t)[0] + lam * fairness_gap(world, t)
                     for t in pts])
    best = np.flatnonzero(vals == vals.min())
    star = bayes_threshold(world)
    return float(pts[best[np.argmin(np.abs(pts[best] - star))]])


def theory_table(world: GaussianWorld, grid) -> list[dict]:
    """Rows of (theta, clean quadruple, noisy quadruple, G, H, G - H)."""
    rows = []
    for theta in np.asarray(grid, dtype=np.float64):
        cq = clean_error_probs(world, theta)
        nq = noisy_error_probs(world, theta)
        G, H = theorem_objectives(world, theta)
        rows.append({
            "theta": float(theta),
            "clean_head_plus": cq.head_plus, "clean_head_minus": cq.head_minus,
            "clean_tail_plus": cq.tail_plus, "clean_tail_minus": cq.tail_minus,
            "noisy_head_plus": nq.head_plus, "noisy_head_minus": nq.head_minus,
            "noisy_tail_plus": nq.tail_plus, "noisy_tail_minus": nq.tail_minus,
            "objective_direct": G, "objective_rewritten": H, "difference": G - H,
        })
    return rows
