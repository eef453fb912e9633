"""Probability-of-inconsistency bound and its Monte-Carlo check.

For a fixed reconstruction map ``f`` and random images ``X``, the
inconsistency loss is ``Y = ||A X - A f(A X)||_2^2``.  If ``0 <= Y <= C``
almost surely, ``E[Y] = c + eps`` (generalization gap plus empirical loss)
and ``0 < delta < c + eps``, then::

    P(Y >= delta) >= 1 - exp(-2 (c + eps - delta)^2 / C^2)

The harness below fits (optionally) and scores a surrogate on a small
training set to get ``eps``, then samples held-out draws of ``Y`` to
estimate ``E[Y]``, ``C`` (sample maximum) and the tail probability, and
compares that with the closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameterError
from .operators import MeasurementOperator
from .phantom import gaussian_blur, random_ellipse_phantom

MODEL_KINDS = ("zero", "zero-filled", "blur", "perturb")


@dataclass(frozen=True)
class BoundInputs:
    c: float
    epsilon: float
    C_bound: float
    delta: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidParameterError(f"generalization gap c must be > 0, got {self.c}")
        if not self.epsilon > 0:
            raise InvalidParameterError(f"empirical loss epsilon must be > 0, got {self.epsilon}")
        if not self.C_bound > 0:
            raise InvalidParameterError(f"loss bound C must be > 0, got {self.C_bound}")
        if self.c + self.epsilon > self.C_bound:
            # Y <= C almost surely forces E[Y] = c + eps <= C
            raise InvalidParameterError(
                f"c + epsilon = {self.c + self.epsilon} exceeds the loss bound C = {self.C_bound}"
            )
        if not 0 < self.delta < self.c + self.epsilon:
            raise InvalidParameterError(
                f"delta must lie in (0, c + epsilon) = (0, {self.c + self.epsilon}), got {self.delta}"
            )


def prop1_bound(inputs: BoundInputs) -> float:
    """Lower bound on ``P(Y >= delta)``: ``1 - exp(-2 (c + eps - delta)^2 / C^2)``."""
    gap = inputs.c + inputs.epsilon - inputs.delta
    return -math.expm1(-2.0 * gap * gap / (inputs.C_bound * inputs.C_bound))


def hoeffding_margin(trials: int, confidence: float = 0.99) -> float:
    """One-sided Hoeffding deviation of an empirical frequency at the given confidence."""
    return math.sqrt(math.log(1.0 / (1.0 - confidence)) / (2.0 * trials))


@lru_cache(maxsize=8)
def _perturbation(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((n, n)) / math.sqrt(n)
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """A deterministic stand-in for a trained reconstruction network, ``b -> image``.

    ``zero``: the zero map.  ``zero-filled``: ``A^H b``, an exact right
    inverse when ``A A^H = I``.  ``blur``: ``A^H b`` followed by a Gaussian
    blur of width ``sigma``.  ``perturb``: ``(I + strength * R) A^H b`` with
    a fixed seeded Gaussian matrix ``R`` scaled by ``1/sqrt(n)``.

    If ``gain`` is set, measurements are first multiplied entrywise by it:
    ``f(b) = base(gain * b)``.  :meth:`fit` learns the gain by least squares
    on training images, which gives the model a genuine generalization gap.
    """

    kind: str
    sigma: float = 1.5
    strength: float = 0.1
    seed: int = 0
    gain: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidParameterError(f"unknown model {self.kind!r}; expected one of {MODEL_KINDS}")

    def _base(self, op: MeasurementOperator, b: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(op.image_shape, dtype=np.complex128)
        x0 = op.adjoint(b)
        if self.kind == "zero-filled":
            return x0
        if self.kind == "blur":
            return gaussian_blur(x0, self.sigma)
        r = _perturbation(x0.size, self.seed)
        return x0 + self.strength * (r @ x0.reshape(-1)).reshape(x0.shape)

    def __call__(self, op: MeasurementOperator, b: np.ndarray) -> np.ndarray:
        if self.gain is not None:
            b = self.gain * b
        return self._base(op, b)

    def fit(self, op: MeasurementOperator, train_images: Sequence[np.ndarray]) -> "SurrogateModel":
        """Return a copy whose gain minimizes the mean inconsistency loss on ``train_images``.

        With ``B = A base(.)`` (linear), the loss for image ``x`` with
        ``b = A x`` is ``||b - B diag(b) g||^2``; the gain ``g`` solves the
        stacked least-squares problem.
        """
        plain = replace(self, gain=None)
        eye = np.eye(op.length, dtype=np.complex128)
        B = np.stack([op.forward(plain._base(op, e)) for e in eye], axis=1)
        bs = [op.forward(x) for x in train_images]
        M = np.concatenate([B * b[None, :] for b in bs])
        g = np.linalg.lstsq(M, np.concatenate(bs), rcond=None)[0]
        g.setflags(write=False)
        return replace(self, gain=g)


def ellipse_sampler(rows: int, cols: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Distribution over random piecewise-constant images with values in [0, 1]."""

    def sample(rng: np.random.Generator) -> np.ndarray:
        return random_ellipse_phantom(rows, cols, rng).astype(np.complex128)

    return sample


_HELDOUT, _TRAIN = 0, 1


def _draw(sampler, seed: int, stream: int, t: int) -> np.ndarray:
    return sampler(np.random.default_rng([seed, stream, t]))


def inconsistency_loss(op: MeasurementOperator, model: SurrogateModel, x: np.ndarray) -> float:
    """``||A x - A f(A x)||^2``; residuals at roundoff level (1e-12 relative) count as zero."""
    b = op.forward(x)
    r = b - op.forward(model(op, b))
    loss = float(np.vdot(r, r).real)
    if loss <= 1e-24 * float(np.vdot(b, b).real):
        return 0.0
    return loss


def inconsistency_losses(
    op: MeasurementOperator,
    model: SurrogateModel,
    sampler: Callable[[np.random.Generator], np.ndarray],
    trials: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Draw ``trials`` held-out images and return the inconsistency loss of each.

    Trial ``t`` uses its own generator seeded by ``(seed, 0, t)``, so results
    do not depend on ``workers``.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")

    def one(t: int) -> float:
        return inconsistency_loss(op, model, _draw(sampler, seed, _HELDOUT, t))

    if workers <= 1:
        return np.array([one(t) for t in range(trials)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(one, range(trials))))


@dataclass
class MonteCarloSummary:
    model: SurrogateModel
    losses: np.ndarray  # held-out losses
    delta: float
    probability: float  # fraction of held-out draws with Y >= delta
    mean: float  # held-out mean: estimate of the expected loss (c + epsilon)
    max: float  # held-out max: estimate of C
    epsilon: float  # empirical loss on the training draws
    c: float  # mean - epsilon

    def with_delta(self, delta: float) -> "MonteCarloSummary":
        return replace(self, delta=delta, probability=float(np.mean(self.losses >= delta)))


def prop1_monte_carlo(
    op: MeasurementOperator,
    model: SurrogateModel,
    sampler: Callable[[np.random.Generator], np.ndarray],
    delta: float,
    trials: int,
    seed: int,
    train_size: int = 4,
    fit: bool = False,
    workers: int = 1,
) -> MonteCarloSummary:
    """Estimate ``P(Y >= delta)`` and the quantities entering the bound.

    ``train_size`` images from a separate random stream form the training
    set: the model is fitted on them when ``fit`` is true, and their mean
    loss is the empirical loss ``epsilon``.  ``trials`` further images give
    the tail frequency, the expected-loss estimate and ``C``.
    """
    if train_size < 1:
        raise InvalidParameterError(f"train_size must be >= 1, got {train_size}")
    train = [_draw(sampler, seed, _TRAIN, t) for t in range(train_size)]
    if fit:
        model = model.fit(op, train)
    epsilon = float(np.mean([inconsistency_loss(op, model, x) for x in train]))
    losses = inconsistency_losses(op, model, sampler, trials, seed, workers)
    mean = float(losses.mean())
    return MonteCarloSummary(
        model=model,
        losses=losses,
        delta=delta,
        probability=float(np.mean(losses >= delta)),
        mean=mean,
        max=float(losses.max()),
        epsilon=epsilon,
        c=mean - epsilon,
    )


@dataclass
class BoundCheckRow:
    delta: float
    empirical: float
    bound: Optional[float]
    margin: float
    status: str  # "pass", "fail", "skipped" or "not-applicable"
    note: str = ""


def check_bound(
    summary: MonteCarloSummary, deltas: Sequence[float], confidence: float = 0.99
) -> list[BoundCheckRow]:
    """Compare empirical ``P(Y >= delta)`` with the closed-form bound for each delta.

    A row passes when ``empirical >= bound - margin``, with ``margin`` the
    Hoeffding deviation at ``confidence``.  Deltas outside ``(0, c + eps)``
    are skipped; if the estimated ``c`` or ``eps`` is not positive the bound
    does not apply and every row says so.
    """
    margin = hoeffding_margin(summary.losses.size, confidence)
    applicable = summary.c > 0 and summary.epsilon > 0 and summary.max > 0
    rows = []
    for delta in deltas:
        empirical = float(np.mean(summary.losses >= delta))
        if not applicable:
            rows.append(BoundCheckRow(delta, empirical, None, margin, "not-applicable",
                                      f"bound not applicable: c={summary.c:.6g}, epsilon={summary.epsilon:.6g}"))
            continue
        if not 0 < delta < summary.c + summary.epsilon:
            rows.append(BoundCheckRow(delta, empirical, None, margin, "skipped",
                                      f"delta outside (0, c+epsilon={summary.c + summary.epsilon:.6g})"))
            continue
        bound = prop1_bound(BoundInputs(summary.c, summary.epsilon, summary.max, delta))
        status = "pass" if empirical >= bound - margin else "fail"
        rows.append(BoundCheckRow(delta, empirical, bound, margin, status))
    return rows
