"""Entropy metrics over mask distributions, reverse inference, normalized MI.

Everything is in bits (log base 2): the per-unit marginal entropy then lies
in [0, 1], which is what makes "importance = 1 - entropy" a unit-free score.
Conventions for degenerate cases are explicit: 0 log 0 = 0, and the
entropy-drop ratio is defined as 0 when the marginal-entropy sum is 0 (a
point mass has no higher-order structure to attribute).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amd import MaskDistribution


def entropy_bits(p: np.ndarray) -> float:
    """Shannon entropy of a probability vector, 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p > 0.0
    return float(-(p[nz] * np.log2(p[nz])).sum())


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    """Entropy along the last axis; zeros contribute nothing."""
    safe = np.where(p > 0.0, p, 1.0)
    return -(p * np.log2(safe)).sum(axis=-1)


def binary_entropy(p) -> np.ndarray | float:
    """Elementwise h2(p) in bits; exact 0 at p = 0 or 1."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inside = (p > 0.0) & (p < 1.0)
    q = p[inside]
    out[inside] = -(q * np.log2(q) + (1.0 - q) * np.log2(1.0 - q))
    return out if out.ndim else float(out)


def joint_entropy(dist: MaskDistribution) -> float:
    """Entropy of the mask distribution itself, in bits."""
    dist.validate()
    return entropy_bits(dist.probabilities())


def marginals(dist: MaskDistribution) -> np.ndarray:
    """Per-unit inclusion probabilities P(m_i = 1), length d."""
    return dist.probabilities() @ dist.bits_matrix()


@dataclass(frozen=True)
class TaskRepresentationMetrics:
    """Entropy bundle for one task's mask distribution.

    importance[i] = 1 - h2(marginal_prob[i]): how strongly the posterior
    fixes unit i's state. distributedness = d - sum of marginal entropies:
    the effective number of committed units. entropy_drop = 1 - joint/sum of
    marginals: the fraction of structure living in dependencies between
    units rather than in the units separately.
    """

    joint_entropy_bits: float
    marginal_prob: np.ndarray
    marginal_entropy_bits: np.ndarray
    importance: np.ndarray
    distributedness: float
    entropy_drop: float

    @property
    def d(self) -> int:
        return len(self.marginal_prob)


def metrics_bundle(dist: MaskDistribution) -> TaskRepresentationMetrics:
    joint = joint_entropy(dist)
    marg = marginals(dist)
    me = binary_entropy(marg)
    me_sum = float(me.sum())
    drop = 1.0 - joint / me_sum if me_sum > 0.0 else 0.0
    return TaskRepresentationMetrics(
        joint_entropy_bits=joint,
        marginal_prob=marg,
        marginal_entropy_bits=me,
        importance=1.0 - me,
        distributedness=dist.d - me_sum,
        entropy_drop=drop,
    )


def densify(dist: MaskDistribution, smoothing: float = 1.0) -> MaskDistribution:
    """Spread a sampled distribution over the full mask space.

    Add-one (Laplace) smoothing over all 2^d cells: p(m) proportional to
    count(m) + smoothing. Exact-provenance inputs are returned unchanged;
    they are already dense and strictly positive.
    """
    if dist.provenance.kind == "exact":
        return dist
    if dist.d > 26:
        raise ValueError(f"cannot densify d={dist.d} (2^{dist.d} cells)")
    n = 1 << dist.d
    counts = np.zeros(n)
    counts[dist.support] = np.exp(dist.log_weights)
    total = counts.sum() + smoothing * n
    return MaskDistribution(
        d=dist.d, support=np.arange(n, dtype=np.int64),
        log_weights=np.log(counts + smoothing), log_z=float(np.log(total)),
        provenance=dist.provenance, task=dist.task, mode=dist.mode)


@dataclass
class TaskPosterior:
    """Reverse inference: which task produced a given mask (or unit state).

    ``table[m, t]`` is P(t | mask m, correct); ``unit_table[i, v, t]`` is
    P(t | m_i = v, correct). The mask marginals P(m | c) are the
    prior-weighted mixtures of the per-task distributions and double as the
    weights for conditional entropy in the MI computation.
    """

    d: int
    prior: np.ndarray
    support: np.ndarray
    table: np.ndarray
    mask_marginal: np.ndarray
    unit_table: np.ndarray
    unit_marginal: np.ndarray

    def __post_init__(self):
        self.validate()

    @property
    def n_tasks(self) -> int:
        return len(self.prior)

    def validate(self) -> None:
        if abs(self.prior.sum() - 1.0) > 1e-10:
            raise ValueError(f"prior sums to {self.prior.sum()}, expected 1")
        if (self.prior < 0).any():
            raise ValueError("prior has negative entries")
        for name, rows in (("table", self.table),
                           ("unit_table", self.unit_table.reshape(-1, self.n_tasks))):
            sums = rows.sum(axis=1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-10)
            if bad.size:
                raise ValueError(
                    f"{name} row {int(bad[0])} sums to {sums[bad[0]]}, expected 1")


def reverse_task_posterior(dists: list[MaskDistribution],
                           prior: np.ndarray | None = None) -> TaskPosterior:
    """Bayes-invert per-task mask distributions into P(task | mask).

    All inputs must be dense (full 2^d support): exact posteriors already
    are; sampled ones must go through densify() first. Masks with zero
    marginal mass get the prior as their row (no evidence either way).
    """
    if not dists:
        raise ValueError("need at least one distribution")
    d, mode = dists[0].d, dists[0].mode
    n = 1 << d
    for dist in dists:
        if dist.d != d:
            raise ValueError(f"mask width mismatch: {dist.d} != {d}")
        if dist.mode != mode:
            raise ValueError(f"mode mismatch: {dist.mode} != {mode}")
        if len(dist.support) != n:
            raise ValueError(
                "sampled support is not dense; densify() it before inverting")
    T = len(dists)
    if prior is None:
        prior = np.full(T, 1.0 / T)
    else:
        prior = np.asarray(prior, dtype=np.float64)
        if prior.shape != (T,):
            raise ValueError(f"prior shape {prior.shape}, expected ({T},)")

    probs = np.stack([dist.probabilities() for dist in dists])  # (T, M)
    joint = prior[:, None] * probs
    mask_marginal = joint.sum(axis=0)
    with np.errstate(invalid="ignore"):
        table = (joint / mask_marginal).T
    table[mask_marginal == 0.0] = prior

    bits = dists[0].bits_matrix()
    p_on = probs @ bits  # (T, d): P(m_i = 1 | t, c)
    joint_unit = np.stack([prior[:, None] * (1.0 - p_on),
                           prior[:, None] * p_on])  # (2, T, d)
    unit_marginal = joint_unit.sum(axis=1).T  # (d, 2)
    with np.errstate(invalid="ignore"):
        unit_table = joint_unit.transpose(2, 0, 1) / unit_marginal[:, :, None]
    unit_table[unit_marginal == 0.0] = prior

    return TaskPosterior(d=d, prior=prior,
                         support=dists[0].support.copy(), table=table,
                         mask_marginal=mask_marginal, unit_table=unit_table,
                         unit_marginal=unit_marginal)


@dataclass(frozen=True)
class MIReport:
    """Normalized mutual information between task identity and masks.

    In = 1 - H(t | evidence, c) / H(t | c), in [0, 1]; In_full conditions on
    the whole mask, In_unit[i] on the single bit m_i.
    """

    In_full: float
    In_unit: np.ndarray


def _clip_unit_interval(x: np.ndarray, what: str) -> np.ndarray:
    if (x < -1e-9).any() or (x > 1.0 + 1e-9).any():
        raise AssertionError(f"{what} escaped [0, 1]: {x}")
    return np.clip(x, 0.0, 1.0)


def normalized_mi(tp: TaskPosterior) -> MIReport:
    """Fraction of task entropy removed by observing a mask (or one unit).

    Conditional entropies weight each observation by its marginal
    probability: H(t|m,c) = sum_m P(m|c) H(t|m,c).
    """
    h_prior = entropy_bits(tp.prior)
    if h_prior <= 0.0:
        raise ValueError("task prior is deterministic; normalization undefined")

    h_rows = _entropy_rows(tp.table)
    in_full = 1.0 - float(tp.mask_marginal @ h_rows) / h_prior

    h_unit_rows = _entropy_rows(tp.unit_table)  # (d, 2)
    in_unit = 1.0 - (tp.unit_marginal * h_unit_rows).sum(axis=1) / h_prior

    in_full = float(_clip_unit_interval(np.array([in_full]), "In_full")[0])
    return MIReport(In_full=in_full,
                    In_unit=_clip_unit_interval(in_unit, "In_unit"))
