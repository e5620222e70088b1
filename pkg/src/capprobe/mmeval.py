"""Paired image/caption matching evaluation.

Each record carries the four match scores of a caption pair against an
image pair; both accuracy scores demand that the model get a pair of
strict comparisons right (correct caption preferred for both images, and
vice versa).  Aggregates come with Wilson confidence intervals; model
comparisons use the Wilcoxon signed-rank test with an exact small-sample
null distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PairRecord",
    "MMReport",
    "CategoryStats",
    "CATEGORIES",
    "text_score",
    "image_score",
    "wilcoxon_signed_rank",
    "binom_ci",
    "mm_report",
    "compare_models",
    "read_pair_records",
    "write_pair_records",
    "DegenerateSampleError",
]

CATEGORIES = (
    "spatial-1obj-LR",
    "spatial-2obj-LR",
    "temporal",
    "verb-1obj",
    "verb-2obj",
    "adjective",
)


class DegenerateSampleError(ValueError):
    pass


def _one_word_apart(c0: str, c1: str) -> bool:
    a, b = c0.split(), c1.split()
    if len(a) != len(b):
        return False
    return sum(x != y for x, y in zip(a, b)) == 1


@dataclass(frozen=True)
class PairRecord:
    """One evaluation item: two captions, two images, four match scores.

    ``s_c{i}_i{j}`` is the model's match score for caption i against
    image j; caption i is the correct caption for image i.
    """

    pair_id: str
    category: str
    c0: str
    c1: str
    i0: str
    i1: str
    s_c0_i0: float
    s_c0_i1: float
    s_c1_i0: float
    s_c1_i1: float

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        scores = (self.s_c0_i0, self.s_c0_i1, self.s_c1_i0, self.s_c1_i1)
        if not all(math.isfinite(s) for s in scores):
            raise ValueError(f"non-finite score in pair {self.pair_id!r}")
        if not _one_word_apart(self.c0, self.c1):
            raise ValueError(
                f"pair {self.pair_id!r}: captions must differ by exactly one word"
            )


def text_score(r: PairRecord) -> int:
    """1 iff each image prefers its own caption (strict; ties score 0)."""
    return int(r.s_c0_i0 > r.s_c1_i0 and r.s_c1_i1 > r.s_c0_i1)


def image_score(r: PairRecord) -> int:
    """1 iff each caption prefers its own image (strict; ties score 0)."""
    return int(r.s_c0_i0 > r.s_c0_i1 and r.s_c1_i1 > r.s_c1_i0)


def text_score_relaxed(r: PairRecord) -> float:
    """Per-image average variant (sensitivity analysis, not the default)."""
    return 0.5 * (int(r.s_c0_i0 > r.s_c1_i0) + int(r.s_c1_i1 > r.s_c0_i1))


def image_score_relaxed(r: PairRecord) -> float:
    return 0.5 * (int(r.s_c0_i0 > r.s_c0_i1) + int(r.s_c1_i1 > r.s_c1_i0))


def binom_ci(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    # two-sided normal quantile via inverse error function
    z = math.sqrt(2.0) * _erfinv(confidence)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    # the interval endpoints are exactly 0 / 1 at the boundaries
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return (low, high)


def _erfinv(x: float) -> float:
    """Inverse error function (Newton refinement of a rational seed)."""
    if not -1.0 < x < 1.0:
        raise ValueError("erfinv domain is (-1, 1)")
    # Winitzki's approximation as the seed
    a = 0.147
    ln1mx2 = math.log1p(-x * x)
    term = 2.0 / (math.pi * a) + ln1mx2 / 2.0
    seed = math.copysign(math.sqrt(math.sqrt(term * term - ln1mx2 / a) - term), x)
    y = seed
    for _ in range(4):
        err = math.erf(y) - x
        y -= err / (2.0 / math.sqrt(math.pi) * math.exp(-y * y))
    return y


def _signed_ranks(diff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of |diff| and the signs, zero differences removed."""
    diff = np.asarray(diff, dtype=np.float64)
    diff = diff[diff != 0]
    if diff.size == 0:
        raise DegenerateSampleError("all paired differences are zero")
    magnitudes = np.abs(diff)
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(diff.size, dtype=np.float64)
    sorted_m = magnitudes[order]
    i = 0
    while i < diff.size:
        j = i
        while j + 1 < diff.size and sorted_m[j + 1] == sorted_m[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks, np.sign(diff)


def _exact_p_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    """Exact two-sided p over all sign assignments of the observed ranks.

    Uses a dynamic program over the distribution of W+ on doubled ranks
    (average ranks can be half-integers).
    """
    doubled = np.rint(ranks * 2).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    n = len(doubled)
    probs = counts / (2.0**n)
    w2 = int(round(w_plus * 2))
    mean2 = total / 2.0
    dev = abs(w2 - mean2)
    lo = mean2 - dev
    hi = mean2 + dev
    support = np.arange(total + 1)
    p = probs[(support <= lo + 1e-9) | (support >= hi - 1e-9)].sum()
    return float(min(1.0, p))


def wilcoxon_signed_rank(
    a, b, exact_threshold: int = 12
) -> tuple[float, float, bool]:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Returns (W+ statistic, p-value, significant at 0.05).  The null
    distribution is exact (all sign assignments of the observed ranks) for
    n <= exact_threshold after dropping zero differences, and a normal
    approximation with continuity and tie corrections above.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length 1-d arrays")
    ranks, signs = _signed_ranks(a - b)
    n = ranks.size
    if n < 5:
        raise ValueError(f"need >= 5 nonzero differences, got {n}")
    w_plus = float(ranks[signs > 0].sum())
    if n <= exact_threshold:
        p = _exact_p_two_sided(ranks, w_plus)
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        # tie correction over groups of equal |diff|
        _, tie_counts = np.unique(ranks, return_counts=True)
        var -= (tie_counts**3 - tie_counts).sum() / 48.0
        if var <= 0:
            raise DegenerateSampleError("zero variance under ties")
        z = (w_plus - mean - 0.5 * np.sign(w_plus - mean)) / math.sqrt(var)
        p = float(2.0 * (1.0 - _phi(abs(z))))
        p = min(1.0, p)
    return w_plus, p, p < 0.05


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass
class CategoryStats:
    count: int
    text: float          # percent
    image: float         # percent
    text_ci: tuple[float, float]
    image_ci: tuple[float, float]


@dataclass
class MMReport:
    categories: dict[str, CategoryStats]
    total: int
    overall_text: float
    overall_image: float
    overall_text_ci: tuple[float, float]
    overall_image_ci: tuple[float, float]

    def to_dict(self) -> dict:
        def cat(s: CategoryStats) -> dict:
            return {
                "count": s.count,
                "text_score": s.text,
                "image_score": s.image,
                "text_ci": list(s.text_ci),
                "image_ci": list(s.image_ci),
            }

        return {
            "categories": {k: cat(v) for k, v in sorted(self.categories.items())},
            "total": self.total,
            "overall_text": self.overall_text,
            "overall_image": self.overall_image,
            "overall_text_ci": list(self.overall_text_ci),
            "overall_image_ci": list(self.overall_image_ci),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_markdown(self) -> str:
        lines = ["# Image/caption matching report", ""]
        lines.append("| category | n | image score | text score |")
        lines.append("|---|---:|---:|---:|")
        for key in sorted(self.categories):
            s = self.categories[key]
            img_hw = 100 * (s.image_ci[1] - s.image_ci[0]) / 2
            txt_hw = 100 * (s.text_ci[1] - s.text_ci[0]) / 2
            lines.append(
                f"| {key} | {s.count} | {s.image:.1f} (+/-{img_hw:.1f}) "
                f"| {s.text:.1f} (+/-{txt_hw:.1f}) |"
            )
        lines.append(
            f"| **overall** | {self.total} | {self.overall_image:.1f} "
            f"| {self.overall_text:.1f} |"
        )
        return "\n".join(lines) + "\n"


def mm_report(records: list[PairRecord], relaxed: bool = False) -> MMReport:
    """Per-category and overall matching scores with 95% Wilson intervals.

    ``relaxed`` switches both scores to the per-image-average variant.
    """
    if not records:
        raise ValueError("no pair records")
    t_fn = text_score_relaxed if relaxed else text_score
    i_fn = image_score_relaxed if relaxed else image_score

    by_cat: dict[str, list[PairRecord]] = {}
    for r in records:
        by_cat.setdefault(r.category, []).append(r)

    categories = {}
    for cat, recs in by_cat.items():
        t = [t_fn(r) for r in recs]
        im = [i_fn(r) for r in recs]
        n = len(recs)
        categories[cat] = CategoryStats(
            count=n,
            text=100.0 * sum(t) / n,
            image=100.0 * sum(im) / n,
            text_ci=binom_ci(int(round(sum(t))), n),
            image_ci=binom_ci(int(round(sum(im))), n),
        )

    t_all = [t_fn(r) for r in records]
    i_all = [i_fn(r) for r in records]
    n = len(records)
    return MMReport(
        categories=categories,
        total=n,
        overall_text=100.0 * sum(t_all) / n,
        overall_image=100.0 * sum(i_all) / n,
        overall_text_ci=binom_ci(int(round(sum(t_all))), n),
        overall_image_ci=binom_ci(int(round(sum(i_all))), n),
    )


def compare_models(
    records_a: list[PairRecord], records_b: list[PairRecord]
) -> dict[str, dict]:
    """Paired Wilcoxon comparison of two models' per-pair scores, overall and
    per category (matched by pair id)."""
    b_by_id = {r.pair_id: r for r in records_b}
    matched = [(ra, b_by_id[ra.pair_id]) for ra in records_a if ra.pair_id in b_by_id]
    if not matched:
        raise ValueError("no pair ids in common")

    def run(pairs) -> dict:
        out = {}
        for label, fn in (("text", text_score), ("image", image_score)):
            x = [fn(a) for a, _ in pairs]
            y = [fn(b) for _, b in pairs]
            try:
                stat, p, sig = wilcoxon_signed_rank(x, y)
                out[label] = {"w_plus": stat, "p_value": p, "significant": sig,
                              "n": len(pairs)}
            except (DegenerateSampleError, ValueError) as err:
                out[label] = {"error": str(err), "n": len(pairs)}
        return out

    result = {"overall": run(matched)}
    for cat in sorted({a.category for a, _ in matched}):
        result[cat] = run([(a, b) for a, b in matched if a.category == cat])
    return result


_FIELDS = (
    "pair_id",
    "category",
    "c0",
    "c1",
    "i0",
    "i1",
    "s_c0_i0",
    "s_c0_i1",
    "s_c1_i0",
    "s_c1_i1",
)


def read_pair_records(path: str | Path) -> list[PairRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(PairRecord(**{k: obj[k] for k in _FIELDS}))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise ValueError(f"{path}:{lineno}: bad pair record: {err}") from err
    return records


def write_pair_records(records: list[PairRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({k: getattr(r, k) for k in _FIELDS}, sort_keys=True) + "\n")
