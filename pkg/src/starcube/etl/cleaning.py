"""Statistical cleaning of staging columns: imputation (column mean or
single-predictor least squares), equal-frequency binning smoothing, z-score
standardization, and value-map correction.

Missing cells are ``None``. All routines return new lists and leave non-missing
input positions untouched unless the transform itself replaces values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..errors import CleaningError

ACTIONS = ("impute_mean", "impute_regression", "smooth_bins", "standardize", "correct")


@dataclass(frozen=True)
class CleaningRule:
    source: str
    column: str
    action: str
    predictor: Optional[str] = None  # impute_regression
    bins: int = 0  # smooth_bins
    mode: str = "means"  # smooth_bins: means | boundaries
    mapping: Optional[dict] = None  # correct

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise CleaningError(f"unknown cleaning action {self.action!r}")
        if self.action == "impute_regression":
            if not self.predictor:
                raise CleaningError("impute_regression needs a predictor column")
            if self.predictor == self.column:
                raise CleaningError("predictor must differ from the imputed column")
        if self.action == "smooth_bins":
            if self.bins < 1:
                raise CleaningError("smooth_bins needs bins >= 1")
            if self.mode not in ("means", "boundaries"):
                raise CleaningError(f"unknown binning mode {self.mode!r}")
        if self.action == "correct" and not self.mapping:
            raise CleaningError("correct needs a value map")


def impute_mean(values: Sequence) -> list[float]:
    """Replace missing entries by the arithmetic mean of the present ones."""
    present = [v for v in values if v is not None]
    if not present:
        raise CleaningError("cannot impute an all-missing column")
    mean = sum(present) / len(present)
    return [mean if v is None else v for v in values]


def impute_regression(target: Sequence, predictor: Sequence) -> tuple[list[float], bool]:
    """Fit y = a + b*x on complete pairs and fill missing targets with a + b*x_i.

    Returns (values, fell_back): with zero predictor variance over the complete
    pairs the fit is degenerate and the column falls back to mean imputation.
    """
    if len(target) != len(predictor):
        raise CleaningError("target and predictor lengths differ")
    if any(x is None for x in predictor):
        raise CleaningError("predictor column has missing values")
    pairs = [(x, y) for x, y in zip(predictor, target) if y is not None]
    if len(pairs) < 2:
        raise CleaningError("need at least 2 complete pairs to fit a regression")
    n = len(pairs)
    mean_x = sum(x for x, _ in pairs) / n
    mean_y = sum(y for _, y in pairs) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in pairs)
    if sxx == 0:
        return impute_mean(target), True
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in pairs)
    b = sxy / sxx
    a = mean_y - b * mean_x
    return [a + b * x if y is None else y for x, y in zip(predictor, target)], False


def smooth_bins(values: Sequence, k: int, mode: str = "means") -> list[float]:
    """Equal-frequency binning smoothing, reported in the original input order.

    Values are sorted and split into k bins; when the count does not divide
    evenly the earlier bins take one extra element each. ``means`` replaces each
    element by its bin mean; ``boundaries`` by the nearer bin endpoint (ties go
    to the lower endpoint).
    """
    if not values:
        raise CleaningError("cannot bin an empty column")
    if any(v is None for v in values):
        raise CleaningError("smooth_bins requires a complete column (impute first)")
    if not 1 <= k <= len(values):
        raise CleaningError(f"bin count {k} out of range 1..{len(values)}")
    if mode not in ("means", "boundaries"):
        raise CleaningError(f"unknown binning mode {mode!r}")

    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    out: list[float] = [0.0] * len(values)
    base, extra = divmod(len(values), k)
    start = 0
    for b in range(k):
        size = base + (1 if b < extra else 0)
        if size == 0:
            continue
        chunk = order[start:start + size]
        lo, hi = values[chunk[0]], values[chunk[-1]]
        if mode == "means":
            mean = sum(values[i] for i in chunk) / size
            for i in chunk:
                out[i] = mean
        else:
            for i in chunk:
                v = values[i]
                out[i] = lo if (v - lo) <= (hi - v) else hi
        start += size
    return out


def standardize(values: Sequence) -> list[float]:
    """z-score transform using the population standard deviation."""
    if any(v is None for v in values):
        raise CleaningError("standardize requires a complete column (impute first)")
    if len(values) < 2:
        raise CleaningError("standardize needs at least 2 values")
    n = len(values)
    mean = sum(values) / n
    centered = [v - mean for v in values]
    # second centering pass kills the rounding residue of the first, keeping
    # the output mean at ~1 ulp even for large clustered magnitudes
    residue = sum(centered) / n
    centered = [c - residue for c in centered]
    var = sum(c * c for c in centered) / n
    if var == 0:
        raise CleaningError("cannot standardize a zero-variance column")
    sd = var ** 0.5
    return [c / sd for c in centered]


def correct(values: Sequence, mapping: dict) -> tuple[list, int]:
    """Replace exact matches per the value map; returns (values, replaced count)."""
    out = []
    changed = 0
    for v in values:
        if v in mapping:
            out.append(mapping[v])
            changed += 1
        else:
            out.append(v)
    return out, changed


def coerce_numeric(values: Sequence) -> tuple[list[Optional[float]], int]:
    """Parse a column to numbers; unparseable cells become missing.

    Returns (values, degraded count). Ints stay ints so exact sums survive.
    """
    out: list[Optional[float]] = []
    degraded = 0
    for v in values:
        if v is None:
            out.append(None)
        elif isinstance(v, (int, float)):
            out.append(v)
        else:
            text = str(v).strip()
            try:
                out.append(int(text))
            except ValueError:
                try:
                    out.append(float(text))
                except ValueError:
                    out.append(None)
                    degraded += 1
    return out, degraded
