"""Ablation-mask posteriors: masked accuracy, likelihoods, exact and MCMC.

A mask is a binary vector over the d task-representation units, packed into
an unsigned int with bit i = unit i (so the LSB is unit 0; string form puts
unit 0 leftmost). For each (task, mask) pair the model's masked predictions
are scored as the beta-smoothed geometric mean of sensitivity and
specificity; that score becomes a likelihood (odds-ratio or plain accuracy)
and, under a uniform prior over masks, a posterior over all 2^d masks.

All posterior arithmetic stays in natural-log space; normalization uses
log-sum-exp. Exact enumeration is the default up to EXACT_LIMIT bits; beyond
that a single-bit-flip Metropolis chain samples the posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Union

import numpy as np

from ._util import atomic_write_text, canonical_json, fmt, logsumexp, sha256_of_text
from .datasets import Dataset
from .isc import ISCModel

EXACT_LIMIT = 16
MODES = ("odds_ratio", "standard_bayes")

# grid evaluation buffers are capped at ~32M floats
_CHUNK_BUDGET = 32_000_000


class FingerprintMismatch(ValueError):
    """Model was trained on a different dataset than the one supplied."""


class ExactEnumerationLimit(ValueError):
    """Mask width exceeds the exact-enumeration cap."""


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True)
class Mask:
    """A d-bit ablation vector, canonically packed (bit i = unit i)."""

    d: int
    packed: int

    def __post_init__(self):
        if not (1 <= self.d <= 63):
            raise ValueError(f"mask width must be in [1, 63], got {self.d}")
        if not (0 <= self.packed < (1 << self.d)):
            raise ValueError(f"packed value {self.packed} out of range for d={self.d}")

    def bits(self) -> np.ndarray:
        return np.array([(self.packed >> i) & 1 for i in range(self.d)], dtype=np.uint8)

    def to_string(self) -> str:
        """d characters, unit 0 leftmost."""
        return "".join(str((self.packed >> i) & 1) for i in range(self.d))

    @classmethod
    def from_string(cls, s: str) -> "Mask":
        if set(s) - {"0", "1"}:
            raise ValueError(f"mask string must be 0/1 only, got {s!r}")
        return cls(len(s), sum(1 << i for i, ch in enumerate(s) if ch == "1"))

    @classmethod
    def from_bits(cls, bits) -> "Mask":
        bits = np.asarray(bits)
        return cls(len(bits), int(sum(1 << i for i, b in enumerate(bits) if b)))

    @classmethod
    def all_ones(cls, d: int) -> "Mask":
        return cls(d, (1 << d) - 1)

    @classmethod
    def all_zeros(cls, d: int) -> "Mask":
        return cls(d, 0)


MaskLike = Union[Mask, int, np.ndarray, list]


def as_mask_vector(mask: MaskLike, d: int) -> np.ndarray:
    """Normalize any mask form to a float 0/1 vector of length d."""
    if isinstance(mask, Mask):
        if mask.d != d:
            raise ValueError(f"mask width {mask.d} != expected {d}")
        return mask.bits().astype(np.float64)
    if isinstance(mask, (int, np.integer)):
        return Mask(d, int(mask)).bits().astype(np.float64)
    vec = np.asarray(mask, dtype=np.float64)
    if vec.shape != (d,):
        raise ValueError(f"mask vector shape {vec.shape} != ({d},)")
    if not np.isin(vec, (0.0, 1.0)).all():
        raise ValueError("mask vector entries must be 0 or 1")
    return vec


def support_bits(masks: np.ndarray, d: int) -> np.ndarray:
    """Unpack an array of packed masks to an (n, d) 0/1 float matrix."""
    masks = np.asarray(masks, dtype=np.uint64)
    shifts = np.arange(d, dtype=np.uint64)
    return ((masks[:, None] >> shifts[None, :]) & 1).astype(np.float64)


@dataclass(frozen=True)
class CorrectnessEstimate:
    """Beta-smoothed correctness of masked predictions for one (task, mask).

    Smoothing is add-one on both outcomes: rate = (correct + 1) / (total + 2),
    the mean of the Beta posterior after the observed counts. This keeps both
    rates strictly inside (0, 1) so the odds ratio is always finite.
    """

    pos_correct: int
    pos_total: int
    neg_correct: int
    neg_total: int
    sensitivity: float
    specificity: float
    geo_mean: float

    def __post_init__(self):
        for name in ("pos", "neg"):
            correct = getattr(self, f"{name}_correct")
            total = getattr(self, f"{name}_total")
            if not (0 <= correct <= total):
                raise ValueError(
                    f"{name}_correct {correct} outside [0, {name}_total {total}]"
                )

    @classmethod
    def from_counts(cls, pos_correct: int, pos_total: int,
                    neg_correct: int, neg_total: int) -> "CorrectnessEstimate":
        sens = (pos_correct + 1) / (pos_total + 2)
        spec = (neg_correct + 1) / (neg_total + 2)
        return cls(pos_correct, pos_total, neg_correct, neg_total,
                   sens, spec, math.sqrt(sens * spec))

    def raw_geo_mean(self) -> float:
        """Unsmoothed geometric mean; 0 when no positive target was hit.

        This is the quantity whose first rise above a threshold defines task
        acquisition; the smoothed geo_mean never touches 0.
        """
        sens = self.pos_correct / self.pos_total if self.pos_total else 0.0
        spec = self.neg_correct / self.neg_total if self.neg_total else 0.0
        return math.sqrt(sens * spec)

    def log_likelihood(self, mode: str) -> float:
        return log_likelihood(self, mode)


def likelihood_value(p, mode: str):
    """Linear-space likelihood of an accuracy p; arithmetic follows p's type.

    Passing a ``fractions.Fraction`` keeps the result exact, which is how the
    documented 19x (odds) vs 1.9x (accuracy) sampling contrast between
    p=0.95 and p=0.5 can be stated without float error.
    """
    _check_mode(mode)
    if mode == "odds_ratio":
        return p / (1 - p)
    return p


def log_likelihood(est: "CorrectnessEstimate | float", mode: str) -> float:
    """Natural-log likelihood of a CorrectnessEstimate (or bare accuracy)."""
    _check_mode(mode)
    p = est.geo_mean if isinstance(est, CorrectnessEstimate) else float(est)
    if not (0.0 < p < 1.0):
        raise ValueError(f"accuracy must lie strictly in (0, 1), got {p}")
    if mode == "odds_ratio":
        return math.log(p) - math.log1p(-p)
    return math.log(p)


@dataclass(frozen=True)
class Provenance:
    kind: str  # "exact" | "mcmc"
    n_samples: int | None = None
    burn_in: int | None = None
    seed: int | None = None
    acceptance_rate: float | None = None


@dataclass
class MaskDistribution:
    """Normalized distribution over masks, stored in natural-log space.

    ``support`` holds packed masks (ascending, no duplicates); exact
    provenance means the support is all 2^d masks. ``log_weights`` are
    unnormalized; ``log_z`` is their log-sum-exp.
    """

    d: int
    support: np.ndarray
    log_weights: np.ndarray
    log_z: float
    provenance: Provenance
    task: int
    mode: str

    def __post_init__(self):
        self.support = np.ascontiguousarray(self.support, dtype=np.int64)
        self.log_weights = np.ascontiguousarray(self.log_weights, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        _check_mode(self.mode)
        if self.support.shape != self.log_weights.shape:
            raise ValueError("support and log_weights length mismatch")
        if self.provenance.kind == "exact":
            if len(self.support) != (1 << self.d):
                raise ValueError(
                    f"exact support has {len(self.support)} masks, "
                    f"expected {1 << self.d}"
                )
            if len(np.unique(self.support)) != len(self.support):
                raise ValueError("duplicate masks in exact support")
        total = float(np.exp(self.log_weights - self.log_z).sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"distribution not normalized: mass {total}")

    def probabilities(self) -> np.ndarray:
        """Normalized probabilities aligned with ``support``.

        Normalizes by the plain sum of shifted weights rather than
        exp(log_weights - log_z): for a flat posterior this yields exact
        2^-d entries instead of values off by log/exp rounding.
        """
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def masks(self) -> Iterator[Mask]:
        for packed in self.support:
            yield Mask(self.d, int(packed))

    def bits_matrix(self) -> np.ndarray:
        return support_bits(self.support, self.d)

    def save_csv(self, path) -> None:
        probs = self.probabilities()
        lines = ["mask_bits,log_weight,probability"]
        for packed, lw, p in zip(self.support, self.log_weights, probs):
            lines.append(f"{Mask(self.d, int(packed)).to_string()},{fmt(lw)},{fmt(p)}")
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def from_probabilities(cls, probs, d: int, task: int = 0,
                           mode: str = "odds_ratio") -> "MaskDistribution":
        """Build a dense distribution from an explicit 2^d probability vector.

        Meant for hand-constructed distributions; zero cells are allowed
        (their log-weight is -inf).
        """
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (1 << d,):
            raise ValueError(f"need {1 << d} probabilities, got {probs.shape}")
        if (probs < 0).any():
            raise ValueError("negative probability")
        with np.errstate(divide="ignore"):
            log_w = np.log(probs)
        return cls(d=d, support=np.arange(1 << d, dtype=np.int64),
                   log_weights=log_w, log_z=logsumexp(log_w),
                   provenance=Provenance("exact"), task=task, mode=mode)


def model_hash(model: ISCModel) -> str:
    return sha256_of_text(canonical_json(model.to_dict()))


@dataclass
class AccuracyGrid:
    """Raw confusion counts for one task across a set of masks.

    The positive/negative target totals depend only on the task, so they are
    scalars; the correct-counts vary per mask. Downstream consumers read the
    smoothed accuracy vector (posteriors, MPC) or single estimates.
    """

    task: int
    d: int
    masks: np.ndarray
    pos_correct: np.ndarray
    neg_correct: np.ndarray
    pos_total: int
    neg_total: int
    model_hash: str | None = None

    def sensitivity(self) -> np.ndarray:
        return (self.pos_correct + 1.0) / (self.pos_total + 2.0)

    def specificity(self) -> np.ndarray:
        return (self.neg_correct + 1.0) / (self.neg_total + 2.0)

    def geo_mean(self) -> np.ndarray:
        return np.sqrt(self.sensitivity() * self.specificity())

    def estimate(self, i: int) -> CorrectnessEstimate:
        return CorrectnessEstimate.from_counts(
            int(self.pos_correct[i]), self.pos_total,
            int(self.neg_correct[i]), self.neg_total)

    def log_likelihoods(self, mode: str) -> np.ndarray:
        _check_mode(mode)
        g = self.geo_mean()
        if mode == "odds_ratio":
            return np.log(g) - np.log1p(-g)
        return np.log(g)

    def save_csv(self, path) -> None:
        lines = [f"model,{self.model_hash or ''}",
                 f"task,{self.task}",
                 f"pos_total,{self.pos_total}",
                 f"neg_total,{self.neg_total}",
                 "mask_bits,pos_correct,neg_correct"]
        for m, pc, nc in zip(self.masks, self.pos_correct, self.neg_correct):
            lines.append(f"{Mask(self.d, int(m)).to_string()},{int(pc)},{int(nc)}")
        atomic_write_text(path, "\n".join(lines) + "\n")


def load_grid_csv(path) -> AccuracyGrid:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    header = dict(ln.split(",", 1) for ln in lines[:4])
    rows = [ln.split(",") for ln in lines[5:] if ln]
    if not rows:
        raise ValueError(f"{path}: no mask rows")
    masks = np.array([Mask.from_string(r[0]).packed for r in rows], dtype=np.int64)
    return AccuracyGrid(
        task=int(header["task"]),
        d=len(rows[0][0]),
        masks=masks,
        pos_correct=np.array([int(r[1]) for r in rows], dtype=np.int64),
        neg_correct=np.array([int(r[2]) for r in rows], dtype=np.int64),
        pos_total=int(header["pos_total"]),
        neg_total=int(header["neg_total"]),
        model_hash=header["model"] or None,
    )


def _check_fingerprint(model: ISCModel, ds: Dataset) -> None:
    if model.dataset_fingerprint is None:
        return  # hand-built model, nothing to check against
    if model.dataset_fingerprint != ds.fingerprint():
        raise FingerprintMismatch(
            "model was trained on a different dataset "
            f"(model fingerprint {model.dataset_fingerprint[:12]}..., "
            f"dataset {ds.fingerprint()[:12]}...)"
        )


def compute_grid(model: ISCModel, ds: Dataset, task: int,
                 masks: np.ndarray | None = None) -> AccuracyGrid:
    """Evaluate masked predictions for one task over a set of packed masks.

    Predictions threshold the output at probability 0.5 inclusive (logit
    >= 0). masks=None enumerates all 2^d in ascending packed order.
    """
    _check_fingerprint(model, ds)
    if not (0 <= task < ds.n_tasks):
        raise IndexError(f"task index {task} out of range [0, {ds.n_tasks})")
    d = model.dims.d_task
    if masks is None:
        if d > 30:
            raise ExactEnumerationLimit(f"cannot enumerate 2^{d} masks")
        masks = np.arange(1 << d, dtype=np.int64)
    masks = np.asarray(masks, dtype=np.int64)

    truth = ds.targets.astype(bool) & (ds.class_of_feature == task)
    pos_total = int(truth.sum())
    neg_total = int(truth.size - pos_total)

    h_task = model.task_representation(task)
    h_item = model.item_representation(np.arange(ds.n_items))
    wh, bh = model.hidden.W, model.hidden.b
    di = model.dims.d_item
    z_base = h_item @ wh[:, :di].T + bh
    wcd, bcd = model.out_cd.W, model.out_cd.b

    pos_correct = np.zeros(len(masks), dtype=np.int64)
    neg_correct = np.zeros(len(masks), dtype=np.int64)
    chunk = max(1, _CHUNK_BUDGET // (ds.n_items * ds.n_features))
    from .nn import sigmoid

    for lo in range(0, len(masks), chunk):
        mb = support_bits(masks[lo:lo + chunk], d) * h_task
        z = z_base[None, :, :] + (mb @ wh[:, di:].T)[:, None, :]
        preds = (sigmoid(z) @ wcd.T + bcd) >= 0.0
        hits = preds & truth[None, :, :]
        pos_correct[lo:lo + chunk] = hits.sum(axis=(1, 2))
        neg_correct[lo:lo + chunk] = (
            (~preds & ~truth[None, :, :]).sum(axis=(1, 2)))
    return AccuracyGrid(task=task, d=d, masks=masks, pos_correct=pos_correct,
                        neg_correct=neg_correct, pos_total=pos_total,
                        neg_total=neg_total, model_hash=model_hash(model))


def task_mask_accuracy(model: ISCModel, ds: Dataset, task: int,
                       mask: MaskLike) -> CorrectnessEstimate:
    """Beta-smoothed correctness of one task under one mask, over all items."""
    d = model.dims.d_task
    vec = as_mask_vector(mask, d)
    packed = int(sum(1 << i for i in range(d) if vec[i]))
    grid = compute_grid(model, ds, task, np.array([packed]))
    return grid.estimate(0)


def posterior_exact(model: ISCModel, ds: Dataset, task: int, mode: str,
                    exact_limit: int = EXACT_LIMIT,
                    grid: AccuracyGrid | None = None) -> MaskDistribution:
    """Posterior over all 2^d masks by direct enumeration.

    Uniform prior over masks, so the posterior is the normalized likelihood.
    Pass a precomputed full grid to skip re-evaluating the model.
    """
    _check_mode(mode)
    d = model.dims.d_task
    if d > exact_limit:
        raise ExactEnumerationLimit(
            f"d={d} exceeds exact_limit={exact_limit}; use posterior_mcmc")
    if grid is None:
        grid = compute_grid(model, ds, task)
    elif grid.task != task or len(grid.masks) != (1 << d):
        raise ValueError("grid does not cover all masks for this task")
    log_w = grid.log_likelihoods(mode)
    return MaskDistribution(d=d, support=grid.masks, log_weights=log_w,
                            log_z=logsumexp(log_w), provenance=Provenance("exact"),
                            task=task, mode=mode)


def metropolis_bitflip(log_lik: np.ndarray | Callable[[int], float], d: int,
                       n_samples: int, burn_in: int, seed: int,
                       ) -> tuple[dict[int, int], float]:
    """Single-bit-flip Metropolis chain over {0,1}^d.

    ``log_lik`` is either a dense table of length 2^d or a callable on packed
    masks (values are memoized). Proposal: flip one uniformly chosen bit;
    acceptance min(1, L'/L). Returns visit counts over the post-burn-in
    states and the overall acceptance rate.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    rng = np.random.default_rng(seed)
    total = burn_in + n_samples
    state = int(rng.integers(0, 1 << d))
    flips = rng.integers(0, d, size=total).tolist()
    logu = np.log(rng.random(total)).tolist()

    counts: dict[int, int] = {}
    accepted = 0
    if isinstance(log_lik, np.ndarray):
        table = log_lik.tolist()
        cur = table[state]
        for i in range(total):
            prop = state ^ (1 << flips[i])
            pll = table[prop]
            if pll - cur > logu[i]:
                state, cur = prop, pll
                accepted += 1
            if i >= burn_in:
                counts[state] = counts.get(state, 0) + 1
    else:
        memo: dict[int, float] = {state: log_lik(state)}
        cur = memo[state]
        for i in range(total):
            prop = state ^ (1 << flips[i])
            pll = memo.get(prop)
            if pll is None:
                pll = log_lik(prop)
                memo[prop] = pll
            if pll - cur > logu[i]:
                state, cur = prop, pll
                accepted += 1
            if i >= burn_in:
                counts[state] = counts.get(state, 0) + 1
    return counts, accepted / total


def posterior_mcmc(model: ISCModel, ds: Dataset, task: int, mode: str,
                   n_samples: int, burn_in: int = 10_000,
                   seed: int = 0) -> MaskDistribution:
    """Empirical posterior from a Metropolis chain; provenance records the run.

    Below EXACT_LIMIT the full likelihood table is precomputed (vectorized)
    and the chain is a pure lookup walk; above it likelihoods are evaluated
    lazily and memoized per visited mask.
    """
    _check_mode(mode)
    d = model.dims.d_task
    if d <= EXACT_LIMIT:
        grid = compute_grid(model, ds, task)
        log_lik: np.ndarray | Callable[[int], float] = grid.log_likelihoods(mode)
    else:
        def log_lik(packed: int) -> float:
            return task_mask_accuracy(model, ds, task, packed).log_likelihood(mode)

    counts, rate = metropolis_bitflip(log_lik, d, n_samples, burn_in, seed)
    support = np.array(sorted(counts), dtype=np.int64)
    log_w = np.log(np.array([counts[int(m)] for m in support], dtype=np.float64))
    return MaskDistribution(
        d=d, support=support, log_weights=log_w, log_z=math.log(n_samples),
        provenance=Provenance("mcmc", n_samples=n_samples, burn_in=burn_in,
                              seed=seed, acceptance_rate=rate),
        task=task, mode=mode)
