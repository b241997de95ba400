"""Static economy data: input-output table, initial states, criticality survey.

The economy is immutable after loading and safe to share between concurrent
simulation runs. Conventions throughout the package:

* ``Z[i, j]`` is the monetary flow from supplier ``i`` to buyer ``j``
  (rows supply, columns demand).
* ``A[i, j] = Z[i, j] / x0[j]`` is the amount of input ``i`` needed per unit
  of output ``j``; columns of sectors with zero baseline output are zero.
* ``criticality[i, j]`` rates input ``i`` for buyer ``j``: 1 critical,
  0.5 important, 0 non-critical.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError, ValidationError

# Relative tolerance for the per-sector accounting identity
# x0[i] == sum_j Z[i, j] + c0[i] + f0[i].
IDENTITY_RTOL = 1e-6

# Column sums of A above 1 + this slack trigger a warning (not an error):
# published tables carry rounding noise.
COLUMN_SUM_SLACK = 1e-9

CRITICALITY_LEVELS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class SectorIndex:
    """Bijection between sector codes and matrix positions."""

    codes: tuple[str, ...]
    positions: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if len(set(self.codes)) != len(self.codes):
            dupes = sorted({c for c in self.codes if self.codes.count(c) > 1})
            raise ValidationError(f"duplicate sector codes: {dupes}")
        object.__setattr__(
            self, "positions", {c: i for i, c in enumerate(self.codes)}
        )

    def position(self, code: str) -> int:
        try:
            return self.positions[code]
        except KeyError:
            raise KeyError(f"unknown sector code {code!r}") from None

    def __len__(self) -> int:
        return len(self.codes)


@dataclass(frozen=True)
class Economy:
    """Validated static production network.

    All arrays are read-only; ``A`` is derived from ``Z`` and ``x0`` at
    construction time and never stored independently on disk.
    """

    sectors: SectorIndex
    Z: np.ndarray
    x0: np.ndarray
    c0: np.ndarray
    f0: np.ndarray
    l0: np.ndarray
    A: np.ndarray
    n_days_inventory: np.ndarray
    criticality: np.ndarray
    on_site: np.ndarray

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    @property
    def codes(self) -> tuple[str, ...]:
        return self.sectors.codes

    @property
    def theta0(self) -> np.ndarray:
        """Baseline household preference shares c0 / sum(c0)."""
        total = self.c0.sum()
        if total <= 0:
            raise ValidationError("total household consumption is zero")
        return self.c0 / total


@dataclass(frozen=True)
class CriticalitySets:
    """Per-buyer sets of critical / important suppliers, as boolean masks.

    ``critical_mask[i, j]`` is True when input ``i`` is rated critical for
    buyer ``j``; ``important_mask`` likewise for the 0.5 rating. Derived,
    never stored: the raw rating matrix on ``Economy`` is the single source
    of truth.
    """

    critical_mask: np.ndarray
    important_mask: np.ndarray

    def critical(self, buyer: int) -> np.ndarray:
        """Indices of suppliers rated critical for ``buyer``."""
        return np.flatnonzero(self.critical_mask[:, buyer])

    def important(self, buyer: int) -> np.ndarray:
        """Indices of suppliers rated important for ``buyer``."""
        return np.flatnonzero(self.important_mask[:, buyer])


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def make_economy(
    codes,
    Z,
    c0,
    f0,
    l0,
    n_days_inventory,
    criticality,
    on_site,
    x0=None,
    identity_rtol: float = IDENTITY_RTOL,
) -> Economy:
    """Assemble and validate an :class:`Economy` from raw arrays.

    When ``x0`` is omitted it is computed from the accounting identity,
    which then holds exactly. When given, the identity is checked to
    ``identity_rtol`` relative tolerance and violations are reported per
    sector.
    """
    sectors = SectorIndex(tuple(codes))
    n = len(sectors)
    Z = np.asarray(Z, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    f0 = np.asarray(f0, dtype=float)
    l0 = np.asarray(l0, dtype=float)
    n_days = np.asarray(n_days_inventory, dtype=float)
    crit = np.asarray(criticality, dtype=float)
    on_site_arr = np.asarray(on_site).astype(bool)

    problems: list[str] = []
    if Z.shape != (n, n):
        raise ValidationError(f"IO matrix shape {Z.shape} does not match {n} sectors")
    for name, vec in (("x0", x0), ("c0", c0), ("f0", f0), ("l0", l0),
                      ("n_days", n_days), ("on_site", on_site_arr)):
        if vec is None:
            continue
        if np.shape(vec) != (n,):
            raise ValidationError(f"{name} has shape {np.shape(vec)}, expected ({n},)")
    if crit.shape != (n, n):
        raise ValidationError(
            f"criticality shape {crit.shape} does not match {n} sectors"
        )

    row_totals = np.sum(Z, axis=1)
    if x0 is None:
        x0 = row_totals + c0 + f0
    else:
        x0 = np.asarray(x0, dtype=float)
        residual = np.abs(x0 - row_totals - c0 - f0)
        scale = np.maximum(np.abs(x0), 1.0)
        bad = np.flatnonzero(residual > identity_rtol * scale)
        for i in bad:
            problems.append(
                f"sector {sectors.codes[i]}: output {x0[i]:g} != "
                f"intermediate sales {row_totals[i]:g} + household {c0[i]:g} "
                f"+ exogenous {f0[i]:g} (residual {residual[i]:g})"
            )

    for name, arr in (("Z", Z), ("x0", x0), ("c0", c0), ("f0", f0),
                      ("l0", l0), ("n_days", n_days)):
        if np.any(arr < 0):
            problems.append(f"{name} contains negative entries")

    bad_crit = ~np.isin(crit, CRITICALITY_LEVELS)
    if np.any(bad_crit):
        i, j = np.argwhere(bad_crit)[0]
        problems.append(
            f"criticality[{sectors.codes[i]},{sectors.codes[j]}] = {crit[i, j]:g} "
            "not in {0, 0.5, 1}"
        )

    if problems:
        raise ValidationError(
            f"economy validation failed ({len(problems)} problem(s))", problems
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        A = np.where(x0[np.newaxis, :] > 0, Z / np.where(x0 > 0, x0, 1.0), 0.0)

    col_sums = A.sum(axis=0)
    heavy = np.flatnonzero(col_sums > 1.0 + COLUMN_SUM_SLACK)
    if heavy.size:
        worst = heavy[np.argmax(col_sums[heavy])]
        warnings.warn(
            f"intermediate cost shares exceed output value for "
            f"{heavy.size} sector(s), worst {sectors.codes[worst]} "
            f"({col_sums[worst]:.6f})",
            stacklevel=2,
        )

    return Economy(
        sectors=sectors,
        Z=_freeze(Z),
        x0=_freeze(x0),
        c0=_freeze(c0),
        f0=_freeze(f0),
        l0=_freeze(l0),
        A=_freeze(A),
        n_days_inventory=_freeze(n_days),
        criticality=_freeze(crit),
        on_site=np.ascontiguousarray(on_site_arr),
    )


def derive_criticality_sets(economy: Economy) -> CriticalitySets:
    """Split the raw rating matrix into critical / important supplier sets."""
    crit = economy.criticality
    if np.any(~np.isin(crit, CRITICALITY_LEVELS)):
        raise ValidationError("criticality entries outside {0, 0.5, 1}")
    return CriticalitySets(
        critical_mask=crit == 1.0,
        important_mask=crit == 0.5,
    )


def initial_inventories(economy: Economy) -> np.ndarray:
    """Equilibrium stocks: n_j days of each baseline input flow, S0 = n_j * Z."""
    return economy.Z * economy.n_days_inventory[np.newaxis, :]


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise SchemaError(f"{path}: file is empty")
    return rows


def _parse_cell(text: str, path, row_label: str, col_label: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(
            f"{path}: non-numeric cell {text!r} at row {row_label!r}, "
            f"column {col_label!r}"
        ) from None


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a square matrix CSV whose first row and column carry sector codes."""
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0][1:]]
    n = len(header)
    if len(rows) - 1 != n:
        raise SchemaError(
            f"{path}: {len(rows) - 1} data rows for {n} header columns"
        )
    out = np.empty((n, n), dtype=float)
    row_codes = []
    for i, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise SchemaError(
                f"{path}: row {i + 2} has {len(row)} cells, expected {n + 1}"
            )
        code = row[0].strip()
        row_codes.append(code)
        for j, cell in enumerate(row[1:]):
            out[i, j] = _parse_cell(cell, path, code, header[j])
    if row_codes != header:
        raise SchemaError(f"{path}: row codes do not match column codes")
    return header, out


STATE_COLUMNS = ("code", "x0", "c0", "f0", "l0", "n_days", "on_site")


def read_initial_states_csv(path):
    """Read the per-sector initial-state table.

    Returns ``(codes, x0, c0, f0, l0, n_days, on_site)``.
    """
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if header != list(STATE_COLUMNS):
        raise SchemaError(
            f"{path}: header {header} does not match {list(STATE_COLUMNS)}"
        )
    codes, cols = [], {k: [] for k in STATE_COLUMNS[1:]}
    for i, row in enumerate(rows[1:]):
        if len(row) != len(STATE_COLUMNS):
            raise SchemaError(
                f"{path}: row {i + 2} has {len(row)} cells, "
                f"expected {len(STATE_COLUMNS)}"
            )
        code = row[0].strip()
        codes.append(code)
        for key, cell in zip(STATE_COLUMNS[1:], row[1:]):
            cols[key].append(_parse_cell(cell, path, code, key))
    on_site = np.asarray(cols["on_site"])
    if np.any(~np.isin(on_site, (0.0, 1.0))):
        raise SchemaError(f"{path}: on_site entries must be 0 or 1")
    return (
        codes,
        np.asarray(cols["x0"]),
        np.asarray(cols["c0"]),
        np.asarray(cols["f0"]),
        np.asarray(cols["l0"]),
        np.asarray(cols["n_days"]),
        on_site.astype(bool),
    )


def read_vector_csv(path, value_column: str):
    """Read a two-column ``code,<value>`` CSV, returning (codes, values)."""
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if header != ["code", value_column]:
        raise SchemaError(
            f"{path}: header {header} does not match ['code', {value_column!r}]"
        )
    codes, values = [], []
    for row in rows[1:]:
        if len(row) != 2:
            raise SchemaError(f"{path}: expected 2 cells per row")
        codes.append(row[0].strip())
        values.append(_parse_cell(row[1], path, row[0], value_column))
    return codes, np.asarray(values)


def _align(codes_ref: list[str], codes_other: list[str], what: str, path):
    """Permutation mapping other-file row order onto the reference order."""
    if set(codes_ref) != set(codes_other):
        missing = sorted(set(codes_ref) - set(codes_other))
        extra = sorted(set(codes_other) - set(codes_ref))
        raise SchemaError(
            f"{path}: sector codes of {what} do not match the IO table "
            f"(missing {missing[:5]}, unexpected {extra[:5]})"
        )
    pos = {c: i for i, c in enumerate(codes_other)}
    return np.asarray([pos[c] for c in codes_ref])


def load_economy(
    io_table_path,
    initial_states_path,
    criticality_path,
    inventory_targets_path=None,
    on_site_path=None,
    identity_rtol: float = IDENTITY_RTOL,
) -> Economy:
    """Load and validate an economy from its CSV files.

    The initial-states file carries inventory targets and on-site flags as
    columns; the two optional paths override those columns from standalone
    ``code,n_days`` / ``code,on_site`` files when data ships split across
    sources.
    """
    codes, Z = read_matrix_csv(io_table_path)
    s_codes, x0, c0, f0, l0, n_days, on_site = read_initial_states_csv(
        initial_states_path
    )
    order = _align(codes, s_codes, "initial states", initial_states_path)
    x0, c0, f0, l0 = x0[order], c0[order], f0[order], l0[order]
    n_days, on_site = n_days[order], on_site[order]

    c_codes, crit = read_matrix_csv(criticality_path)
    corder = _align(codes, c_codes, "criticality", criticality_path)
    crit = crit[np.ix_(corder, corder)]

    if inventory_targets_path is not None:
        v_codes, values = read_vector_csv(inventory_targets_path, "n_days")
        n_days = values[_align(codes, v_codes, "inventory targets",
                               inventory_targets_path)]
    if on_site_path is not None:
        v_codes, values = read_vector_csv(on_site_path, "on_site")
        if np.any(~np.isin(values, (0.0, 1.0))):
            raise SchemaError(f"{on_site_path}: on_site entries must be 0 or 1")
        on_site = values[_align(codes, v_codes, "on-site flags",
                                on_site_path)].astype(bool)

    return make_economy(
        codes, Z, c0, f0, l0, n_days, crit, on_site,
        x0=x0, identity_rtol=identity_rtol,
    )


def _fmt(v: float) -> str:
    # repr() gives the shortest string that round-trips the float exactly
    return repr(float(v))


def write_economy(economy: Economy, directory) -> dict[str, Path]:
    """Write the three economy CSVs; inverse of :func:`load_economy`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    codes = list(economy.codes)

    def write_matrix(name: str, M: np.ndarray) -> Path:
        path = directory / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([""] + codes)
            for i, code in enumerate(codes):
                w.writerow([code] + [_fmt(v) for v in M[i]])
        return path

    paths = {
        "io_table": write_matrix("io_table.csv", economy.Z),
        "criticality": write_matrix("criticality.csv", economy.criticality),
    }
    states = directory / "initial_states.csv"
    with states.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_COLUMNS)
        for i, code in enumerate(codes):
            w.writerow([
                code,
                _fmt(economy.x0[i]), _fmt(economy.c0[i]), _fmt(economy.f0[i]),
                _fmt(economy.l0[i]), _fmt(economy.n_days_inventory[i]),
                str(int(economy.on_site[i])),
            ])
    paths["initial_states"] = states
    return paths
