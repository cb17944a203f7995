"""Combined primary-study / external-control dataset: ingestion and validation.

The data layout is one row per subject with a source indicator ``r`` (1 =
primary study, 0 = external control), a treatment indicator ``t`` (always 0
for external controls), a continuous outcome ``y``, and a design matrix ``x``
whose first column is a constant 1 (intercept).  Users supply covariates
without the intercept; it is prepended internally because the penalized
fitting downstream never penalizes it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DataError(Exception):
    """Base class for ingestion/validation failures."""


class MissingColumn(DataError):
    pass


class NonBinaryIndicator(DataError):
    pass


class ExternalTreated(DataError):
    """A source=0 row with treatment=1; external subjects are never treated."""


class NonFiniteValue(DataError):
    pass


class EmptyDataset(DataError):
    pass


@dataclass(frozen=True)
class ObservationRow:
    """Single subject record: (r, t, y, x) with x[0] == 1."""

    r: int
    t: int
    y: float
    x: np.ndarray


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV column names onto the (r, t, y, x) layout.

    missing_policy: 'fail' raises on any blank field, 'drop-row' silently
    drops rows containing one.
    """

    outcome_column: str
    treatment_column: str
    source_column: str
    covariate_columns: list[str] = field(default_factory=list)
    missing_policy: str = "fail"

    def __post_init__(self):
        names = [self.outcome_column, self.treatment_column, self.source_column]
        names += list(self.covariate_columns)
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be distinct")
        if not self.covariate_columns:
            raise ValueError("covariate list must be non-empty")
        if self.missing_policy not in ("fail", "drop-row"):
            raise ValueError(f"unknown missing_policy {self.missing_policy!r}")


class CombinedDataset:
    """Immutable container for the pooled sample.

    Attributes
    ----------
    r, t : ndarray of shape (N,)
        Binary source and treatment indicators (float 0/1).
    y : ndarray of shape (N,)
        Outcomes.
    x : ndarray of shape (N, d+1)
        Design matrix with x[:, 0] == 1.
    d : int
        Number of covariates excluding the intercept.
    n, N : int
        Primary-study and total row counts.
    pi_hat : float
        n / N, the sampled primary-study share.
    p_hat : float
        Treated fraction within the primary study.
    """

    __slots__ = ("r", "t", "y", "x", "d", "n", "N", "pi_hat", "p_hat")

    def __init__(self, r, t, y, x, validate=True):
        r = np.ascontiguousarray(r, dtype=float)
        t = np.ascontiguousarray(t, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        x = np.ascontiguousarray(x, dtype=float)
        if validate:
            self._validate(r, t, y, x)
        self.r = r
        self.t = t
        self.y = y
        self.x = x
        self.N = x.shape[0]
        self.d = x.shape[1] - 1
        self.n = int(round(r.sum()))
        self.pi_hat = self.n / self.N
        self.p_hat = float((r * t).sum()) / self.n
        for name in self.__slots__:
            arr = getattr(self, name)
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    @staticmethod
    def _validate(r, t, y, x):
        if x.ndim != 2 or x.shape[0] == 0:
            raise EmptyDataset("no data rows")
        N = x.shape[0]
        if not (r.shape == t.shape == y.shape == (N,)):
            raise DataError("r, t, y must be 1-d arrays matching the design row count")
        for name, ind in (("source", r), ("treatment", t)):
            if not np.isin(ind, (0.0, 1.0)).all():
                raise NonBinaryIndicator(f"{name} indicator contains values outside {{0, 1}}")
        bad = np.nonzero((r == 0) & (t == 1))[0]
        if bad.size:
            raise ExternalTreated(f"row {bad[0]}: external-control row marked treated")
        if not np.isfinite(y).all() or not np.isfinite(x).all():
            raise NonFiniteValue("outcome or covariates contain non-finite values")
        if not np.all(x[:, 0] == 1.0):
            raise DataError("design matrix must carry a constant-1 intercept column")
        n_rt = (r * t).sum()
        n_rc = (r * (1 - t)).sum()
        if r.sum() < 1:
            raise DataError("no primary-study rows")
        if n_rt < 1:
            raise DataError("no treated primary-study rows")
        if n_rc < 1:
            raise DataError("no control primary-study rows")

    @classmethod
    def from_columns(cls, r, t, y, covariates):
        """Build a dataset from raw covariates (intercept prepended here)."""
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        x = np.column_stack([np.ones(covariates.shape[0]), covariates])
        return cls(r, t, y, x)

    def row(self, i) -> ObservationRow:
        return ObservationRow(int(self.r[i]), int(self.t[i]), float(self.y[i]), self.x[i])

    @property
    def n_external(self) -> int:
        return self.N - self.n

    def __len__(self):
        return self.N

    def summary(self) -> dict:
        return {
            "N": self.N,
            "n_primary": self.n,
            "n_external": self.n_external,
            "n_treated": int(round((self.r * self.t).sum())),
            "d": self.d,
            "pi_hat": self.pi_hat,
            "p_hat": self.p_hat,
        }


@dataclass(frozen=True)
class ScalingInfo:
    """Per-column centering/scaling used before solving.

    Scales use the population (1/N) variance convention.  Index 0 is the
    intercept and is never touched; constant columns keep mean 0 / scale 1
    and are listed in ``constant_columns``.
    """

    means: np.ndarray
    scales: np.ndarray
    constant_columns: list[int]

    def map_coefficients_back(self, values: np.ndarray) -> np.ndarray:
        """Map coefficients fitted on the scaled design to the original scale.

        Chosen so the linear predictor is identical row by row:
        c0 + sum_j c_j (x_j - m_j)/s_j == c0' + sum_j c_j' x_j.
        """
        out = values / self.scales
        out[0] = values[0] - np.sum(values[1:] * self.means[1:] / self.scales[1:])
        return out


def standardize(data: CombinedDataset):
    """Center and scale the non-intercept columns to mean 0, variance 1.

    Returns the rescaled dataset and the ScalingInfo needed to invert the
    transform.  Columns with zero sample variance are left unscaled and
    reported rather than raising.
    """
    x = np.array(data.x)
    means = x.mean(axis=0)
    scales = x.std(axis=0)  # population convention (ddof=0)
    means[0], scales[0] = 0.0, 1.0
    constant = [j for j in range(1, x.shape[1]) if scales[j] == 0.0]
    for j in constant:
        means[j], scales[j] = 0.0, 1.0
    x = (x - means) / scales
    x[:, 0] = 1.0
    info = ScalingInfo(means=means, scales=scales, constant_columns=constant)
    return CombinedDataset(data.r, data.t, data.y, x, validate=False), info


def unstandardize(data: CombinedDataset, info: ScalingInfo) -> CombinedDataset:
    """Invert :func:`standardize`."""
    x = data.x * info.scales + info.means
    return CombinedDataset(data.r, data.t, data.y, x, validate=False)


def _parse_indicator(raw: str, column: str, line: int) -> float:
    v = raw.strip()
    if v == "0":
        return 0.0
    if v == "1":
        return 1.0
    raise NonBinaryIndicator(f"line {line}, column {column!r}: expected literal 0/1, got {raw!r}")


def _parse_float(raw: str, column: str, line: int) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise NonFiniteValue(f"line {line}, column {column!r}: cannot parse {raw!r} as a number") from None
    if not np.isfinite(v):
        raise NonFiniteValue(f"line {line}, column {column!r}: non-finite value {raw!r}")
    return v


def load_csv(path, schema: ColumnSchema) -> CombinedDataset:
    """Load an RFC-4180 CSV into a validated CombinedDataset.

    The header row must contain every schema column; indicator fields must be
    the literal strings 0/1; numeric fields are parsed as decimal floats.
    Row order is preserved.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col_index = {}
        for name in [schema.source_column, schema.treatment_column, schema.outcome_column] + list(
            schema.covariate_columns
        ):
            if name not in header:
                raise MissingColumn(f"{path}: column {name!r} not found in header")
            col_index[name] = header.index(name)

        wanted = [schema.source_column, schema.treatment_column, schema.outcome_column]
        wanted += list(schema.covariate_columns)
        r_list, t_list, y_list, cov_list = [], [], [], []
        for line_no, fields in enumerate(reader, start=2):
            if not fields or all(f.strip() == "" for f in fields):
                continue
            raw = {}
            blank = False
            for name in wanted:
                idx = col_index[name]
                if idx >= len(fields) or fields[idx].strip() == "":
                    if schema.missing_policy == "drop-row":
                        blank = True
                        break
                    raise NonFiniteValue(f"line {line_no}, column {name!r}: missing value")
                raw[name] = fields[idx]
            if blank:
                continue
            r_val = _parse_indicator(raw[schema.source_column], schema.source_column, line_no)
            t_val = _parse_indicator(raw[schema.treatment_column], schema.treatment_column, line_no)
            if r_val == 0.0 and t_val == 1.0:
                raise ExternalTreated(f"line {line_no}: source=0 row marked treated")
            r_list.append(r_val)
            t_list.append(t_val)
            y_list.append(_parse_float(raw[schema.outcome_column], schema.outcome_column, line_no))
            cov_list.append(
                [_parse_float(raw[c], c, line_no) for c in schema.covariate_columns]
            )

    if not r_list:
        raise EmptyDataset(f"{path}: no data rows")
    return CombinedDataset.from_columns(
        np.array(r_list), np.array(t_list), np.array(y_list), np.array(cov_list)
    )
