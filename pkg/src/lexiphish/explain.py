"""Shapley-value attributions for any scorer over the feature vector.

"Absent" features are filled in from background rows (interventional
expectation): for a coalition S,

    v(S) = mean over background rows b of f(x_S, b_rest)

Two estimators share that value function. :func:`shapley_exact` enumerates
every coalition and is the reference; :func:`shapley_sampled` walks random
feature orderings against random background rows, which is what scales to all
21 features.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptySample, InputError, SubsetTooLarge
from .features import FEATURE_NAMES

Scorer = Callable[[np.ndarray], np.ndarray]

MAX_EXACT_FEATURES = 12
DEFAULT_BACKGROUND = 5000


@dataclass(frozen=True)
class BackgroundSet:
    rows: np.ndarray
    seed: int
    sample_count: int

    @classmethod
    def sample(cls, rows: np.ndarray, sample_count: int = DEFAULT_BACKGROUND, seed: int = 0) -> "BackgroundSet":
        """Draw ``min(sample_count, len(rows))`` rows without replacement."""
        rows = np.asarray(rows, dtype=np.float64)
        if len(rows) == 0:
            raise EmptySample("background source is empty")
        m = min(int(sample_count), len(rows))
        idx = np.sort(np.random.default_rng(seed).choice(len(rows), size=m, replace=False))
        return cls(rows[idx], seed, m)

    def __len__(self) -> int:
        return len(self.rows)


def _bg_rows(background) -> np.ndarray:
    rows = background.rows if isinstance(background, BackgroundSet) else np.asarray(background, dtype=np.float64)
    if rows.ndim != 2 or len(rows) == 0:
        raise EmptySample("background must be a non-empty 2-D array")
    return rows


@dataclass
class Attribution:
    phi: np.ndarray
    base_value: float
    fx: float
    reconstruction_gap: float
    method: str
    x: np.ndarray
    se: Optional[np.ndarray] = None
    gap_se: float = 0.0
    n_permutations: int = 0
    feature_subset: Optional[tuple[int, ...]] = None
    x_raw: Optional[np.ndarray] = None

    @property
    def gap_bound(self) -> float:
        """The efficiency tolerance this attribution promises."""
        if self.method == "exact":
            return 1e-9
        return max(3.0 * self.gap_se, 1e-9)

    @property
    def efficient(self) -> bool:
        return self.reconstruction_gap < self.gap_bound


def _subset(feature_subset, d_total: int) -> np.ndarray:
    if feature_subset is None:
        return np.arange(d_total)
    sub = np.asarray(sorted(set(int(i) for i in feature_subset)), dtype=np.int64)
    if len(sub) == 0 or sub.min() < 0 or sub.max() >= d_total:
        raise InputError(f"feature subset must index into {d_total} features")
    return sub


def _score(scorer: Scorer, rows: np.ndarray, chunk: int = 65536) -> np.ndarray:
    out = np.empty(len(rows))
    for s in range(0, len(rows), chunk):
        out[s : s + chunk] = np.asarray(scorer(rows[s : s + chunk]), dtype=np.float64).reshape(-1)
    return out


def shapley_exact(scorer: Scorer, x: np.ndarray, background, feature_subset: Optional[Sequence[int]] = None,
                  chunk_rows: int = 200_000) -> Attribution:
    """Exact Shapley values of the game restricted to ``feature_subset``.

    Features outside the subset are held at ``x``. Costs ``2**d * len(background)``
    scorer calls, so ``d`` is capped at 12.
    """
    x = np.asarray(x, dtype=np.float64)
    bg = _bg_rows(background)
    sub = _subset(feature_subset, len(x))
    d = len(sub)
    if d > MAX_EXACT_FEATURES:
        raise SubsetTooLarge(f"exact enumeration over {d} features exceeds the cap of {MAX_EXACT_FEATURES}")

    m = len(bg)
    template = np.broadcast_to(x, bg.shape).copy()
    template[:, sub] = bg[:, sub]
    masks = (np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1
    values = np.empty(2**d)
    per_chunk = max(1, chunk_rows // m)
    for s in range(0, 2**d, per_chunk):
        mk = masks[s : s + per_chunk].astype(bool)
        rows = np.repeat(template[None], len(mk), axis=0)
        for j, feat in enumerate(sub):
            rows[mk[:, j], :, feat] = x[feat]
        values[s : s + len(mk)] = _score(scorer, rows.reshape(-1, len(x))).reshape(len(mk), m).mean(axis=1)

    weights = np.array([math.factorial(k) * math.factorial(d - k - 1) / math.factorial(d) for k in range(d)])
    sizes = masks.sum(axis=1)
    phi_sub = np.zeros(d)
    for j in range(d):
        without = np.flatnonzero(masks[:, j] == 0)
        with_j = without | (1 << j)
        phi_sub[j] = np.sum(weights[sizes[without]] * (values[with_j] - values[without]))

    phi = np.zeros(len(x))
    phi[sub] = phi_sub
    base, fx = float(values[0]), float(values[-1])
    return Attribution(
        phi=phi, base_value=base, fx=fx, reconstruction_gap=abs(fx - base - phi.sum()),
        method="exact", x=x, se=np.zeros(len(x)), feature_subset=tuple(int(i) for i in sub),
    )


def shapley_sampled(scorer: Scorer, x: np.ndarray, background, n_permutations: int = 200, seed: int = 0,
                    feature_subset: Optional[Sequence[int]] = None, control_variate: bool = True,
                    base_scores: Optional[np.ndarray] = None) -> Attribution:
    """Monte-Carlo permutation estimate with per-feature standard errors.

    Each draw pairs a random ordering of the features with a random background
    row ``b`` and walks from ``b`` to ``x`` one feature at a time, crediting
    each feature with the score change it causes.

    With ``control_variate`` the draw's starting score ``f(b)`` (whose exact
    mean over the background is known) is regressed out of every feature's
    marginal. The regression coefficients sum to -1, so the corrected
    estimates add up to ``f(x) - base`` exactly; ``gap_se`` still reports the
    standard error the uncorrected total would have had.

    ``base_scores`` may pass precomputed scores of the background rows (with
    out-of-subset features already set to ``x``) to skip recomputing them.
    """
    if n_permutations < 10:
        raise InputError("n_permutations must be at least 10")
    x = np.asarray(x, dtype=np.float64)
    bg = _bg_rows(background)
    sub = _subset(feature_subset, len(x))
    d, n = len(sub), int(n_permutations)
    rng = np.random.default_rng(seed)

    start = np.broadcast_to(x, bg.shape).copy()
    start[:, sub] = bg[:, sub]
    f0_all = _score(scorer, start) if base_scores is None else np.asarray(base_scores, dtype=np.float64)
    base = float(f0_all.mean())
    fx = float(_score(scorer, x[None])[0])

    order = np.argsort(rng.random((n, d)), axis=1)
    b_idx = rng.integers(0, len(bg), size=n)
    # rank[j, feat] = position at which feat switches to x in draw j
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(d)[None, :].repeat(n, axis=0), axis=1)
    steps = np.arange(1, d)  # intermediate points only; step 0 is b and step d is x
    switched = rank[:, None, :] < steps[None, :, None]  # (n, d-1, d)
    pts = np.repeat(start[b_idx][:, None, :], d - 1, axis=1)
    sub_vals = np.broadcast_to(x[sub], switched.shape)
    inner = pts[:, :, sub]
    inner[switched] = sub_vals[switched]
    pts[:, :, sub] = inner
    f_inner = _score(scorer, pts.reshape(-1, len(x))).reshape(n, d - 1) if d > 1 else np.empty((n, 0))
    f0 = f0_all[b_idx]
    path = np.concatenate([f0[:, None], f_inner, np.full((n, 1), fx)], axis=1)  # (n, d+1)
    deltas = np.diff(path, axis=1)  # deltas[j, k] is credited to order[j, k]
    marg = np.empty((n, d))
    np.put_along_axis(marg, order, deltas, axis=1)

    if control_variate and n > 2 and np.var(f0) > 0:
        c = f0 - f0.mean()
        beta = (marg - marg.mean(axis=0)).T @ c / (c @ c)
        adjusted = marg - np.outer(f0 - base, beta)
        phi_sub = adjusted.mean(axis=0)
        se_sub = adjusted.std(axis=0, ddof=2) / np.sqrt(n)
    else:
        phi_sub = marg.mean(axis=0)
        se_sub = marg.std(axis=0, ddof=1) / np.sqrt(n)

    phi = np.zeros(len(x))
    phi[sub] = phi_sub
    se = np.zeros(len(x))
    se[sub] = se_sub
    return Attribution(
        phi=phi, base_value=base, fx=fx, reconstruction_gap=abs(fx - base - phi.sum()),
        method="sampled", x=x, se=se, gap_se=float(f0.std(ddof=1) / np.sqrt(n)),
        n_permutations=n, feature_subset=tuple(int(i) for i in sub),
    )


@dataclass
class GlobalSummary:
    names: tuple[str, ...]
    mean_abs: np.ndarray
    attributions: list[Attribution] = field(default_factory=list)

    @property
    def ranking(self) -> list[str]:
        """Feature names by descending mean |phi|; ties keep schema order."""
        order = np.argsort(-self.mean_abs, kind="stable")
        return [self.names[i] for i in order]

    def rank_of(self, name: str) -> int:
        return self.ranking.index(name) + 1

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "mean_abs_shap", "rank"])
            for r, name in enumerate(self.ranking, start=1):
                w.writerow([name, repr(float(self.mean_abs[self.names.index(name)])), r])


def summarize(attributions: Sequence[Attribution], names: Sequence[str] = FEATURE_NAMES) -> GlobalSummary:
    if not attributions:
        raise EmptySample("no attributions to summarize")
    phis = np.vstack([a.phi for a in attributions])
    return GlobalSummary(tuple(names), np.abs(phis).mean(axis=0), list(attributions))


def global_summary(scorer: Scorer, sample: np.ndarray, background, n_permutations: int = 100, seed: int = 0,
                   names: Sequence[str] = FEATURE_NAMES, raw_sample: Optional[np.ndarray] = None) -> GlobalSummary:
    """Mean |phi| per feature over every row of ``sample``.

    Row ``i`` is explained with its own RNG stream ``(seed, i)``, so results
    do not depend on evaluation order.
    """
    sample = np.atleast_2d(np.asarray(sample, dtype=np.float64))
    if len(sample) == 0 or sample.size == 0:
        raise EmptySample("sample has no rows")
    bg = _bg_rows(background)
    base_scores = _score(scorer, bg)
    atts = []
    for i, row in enumerate(sample):
        a = shapley_sampled(scorer, row, bg, n_permutations, seed=[seed, i], base_scores=base_scores)
        if raw_sample is not None:
            a.x_raw = np.asarray(raw_sample[i], dtype=np.float64)
        atts.append(a)
    return summarize(atts, names)


def decision_plot_data(attributions: Sequence[Attribution], ranking: Sequence[str], path=None,
                       names: Sequence[str] = FEATURE_NAMES) -> list[tuple]:
    """Cumulative score paths, one per sample, from the base value up to f(x).

    Features are added from the least to the most important in ``ranking``,
    so the last step of each path is the top-ranked feature and its value is
    ``fx`` (within the reconstruction gap). Each path starts with a
    ``base_value`` row. CSV columns: sample_id, feature, cumulative_value,
    raw_value.
    """
    if not attributions:
        raise EmptySample("no attributions for the decision plot")
    order = [names.index(n) for n in reversed(list(ranking))]
    rows = []
    for sid, a in enumerate(attributions):
        acc = a.base_value
        rows.append((sid, "base_value", acc, ""))
        for i in order:
            acc += a.phi[i]
            raw = a.x_raw[i] if a.x_raw is not None else a.x[i]
            rows.append((sid, names[i], acc, raw))
    if path is not None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "feature", "cumulative_value", "raw_value"])
            for sid, feat, cum, raw in rows:
                w.writerow([sid, feat, repr(float(cum)), "" if raw == "" else _num(raw)])
    return rows


def _num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def waterfall_data(attribution: Attribution, path=None, names: Sequence[str] = FEATURE_NAMES) -> list[dict]:
    """Signed contributions sorted by |phi|, bracketed by base_value and fx rows.

    Positive phi pushes the score towards phishing. ``running_total`` after
    the last feature row equals ``fx`` within the reconstruction gap.
    """
    a = attribution
    order = np.argsort(-np.abs(a.phi), kind="stable")
    rows = [{"feature": "base_value", "raw_value": "", "standardized_value": "", "phi": "",
             "running_total": a.base_value}]
    acc = a.base_value
    for i in order:
        acc += a.phi[i]
        rows.append({
            "feature": names[i],
            "raw_value": a.x_raw[i] if a.x_raw is not None else "",
            "standardized_value": a.x[i],
            "phi": a.phi[i],
            "running_total": acc,
        })
    rows.append({"feature": "fx", "raw_value": "", "standardized_value": "", "phi": "", "running_total": a.fx})
    if path is not None:
        cols = ["feature", "raw_value", "standardized_value", "phi", "running_total"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([r["feature"]] + [("" if r[c] == "" else repr(float(r[c]))) for c in cols[1:]])
    return rows
