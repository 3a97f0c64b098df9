"""Error-rate aggregation, connective deltas, Welch t-tests, and report tables."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyFamily,
    EmptySubset,
    IncompleteGrid,
    InsufficientData,
    InsufficientRuns,
    MissingBaseline,
    SubsetMismatch,
    ZeroVariance,
)

BASELINE = "baseline"


def ids_digest(ids: Iterable[str]) -> str:
    """Order-independent fingerprint of an example-id set."""
    joined = "\n".join(sorted(ids))
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EvalRecord:
    """One probe evaluation: a (model, dataset, condition, subset, run) cell."""

    model: str
    family: str  # wo_invariant | wo_aware
    dataset: str
    condition: str
    subset: str
    run: int
    error: float
    n: int
    ids_hash: str = ""

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise ValueError(f"error rate {self.error} outside [0, 1]")
        if self.n < 1:
            raise ValueError(f"record needs n >= 1, got {self.n}")

    @property
    def key(self) -> tuple[str, str, str, str, int]:
        return (self.model, self.dataset, self.condition, self.subset, self.run)

    @property
    def cell(self) -> tuple[str, str, str, str]:
        return (self.model, self.dataset, self.condition, self.subset)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "family": self.family,
            "dataset": self.dataset,
            "condition": self.condition,
            "subset": self.subset,
            "run": self.run,
            "error": self.error,
            "n": self.n,
            "ids_hash": self.ids_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        return cls(
            model=d["model"],
            family=d["family"],
            dataset=d["dataset"],
            condition=d["condition"],
            subset=d["subset"],
            run=int(d["run"]),
            error=float(d["error"]),
            n=int(d["n"]),
            ids_hash=d.get("ids_hash", ""),
        )


@dataclass(frozen=True)
class DeltaRecord:
    model: str
    family: str
    dataset: str
    subset: str
    delta: float
    n: int = 0

    def __post_init__(self):
        if not -1.0 <= self.delta <= 1.0:
            raise ValueError(f"delta {self.delta} outside [-1, 1]")


@dataclass(frozen=True)
class StatResult:
    label: str
    t: float
    df: float
    p_value: float
    direction: str

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


# ---------------------------------------------------------------------------
# results store (JSON lines, append-only)


def read_store(path) -> list[EvalRecord]:
    records = []
    p = Path(path)
    if not p.exists():
        return records
    with p.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EvalRecord.from_dict(json.loads(line)))
    return records


def append_records(path, records: Sequence[EvalRecord]) -> None:
    with Path(path).open("a") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# selection and aggregation


def _select(records: Iterable[EvalRecord], model=None, dataset=None, condition=None, subset=None):
    out = [
        r
        for r in records
        if (model is None or r.model == model)
        and (dataset is None or r.dataset == dataset)
        and (condition is None or r.condition == condition)
        and (subset is None or r.subset == subset)
    ]
    return sorted(out, key=lambda r: r.key)


def run_values(records: Iterable[EvalRecord], model, dataset, condition, subset) -> list[float]:
    return [r.error for r in _select(records, model, dataset, condition, subset)]


def connective_error(records: Iterable[EvalRecord], model: str, dataset: str, connective: str) -> float:
    """Mean baseline error over runs on the connective's subset."""
    subset = connective if connective.startswith(("connective:", "type:")) else f"connective:{connective}"
    hits = _select(records, model, dataset, BASELINE, subset)
    if not hits:
        raise EmptySubset(f"no baseline records for {model}/{dataset}/{subset}")
    return sum(r.error for r in hits) / len(hits)


def overall_error(records: Iterable[EvalRecord], model: str, dataset: str) -> float:
    """Mean baseline error over runs on the full test set."""
    hits = _select(records, model, dataset, BASELINE, "all")
    if not hits:
        raise MissingBaseline(f"no baseline `all` records for {model}/{dataset}")
    return sum(r.error for r in hits) / len(hits)


def delta(e_subset: float, e_overall: float) -> float:
    """Error-rate difference between a subset and the full test set."""
    if not (0.0 <= e_subset <= 1.0 and 0.0 <= e_overall <= 1.0):
        raise ValueError("error rates must lie in [0, 1]")
    return e_subset - e_overall


def perturbation_delta(records: Iterable[EvalRecord], model: str, dataset: str, condition: str, subset: str) -> float:
    """Perturbed-minus-baseline error on an identical example set."""
    base = _select(records, model, dataset, BASELINE, subset)
    cond = _select(records, model, dataset, condition, subset)
    if not base:
        raise MissingBaseline(f"no baseline records for {model}/{dataset}/{subset}")
    if not cond:
        raise EmptySubset(f"no {condition!r} records for {model}/{dataset}/{subset}")
    hashes = {r.ids_hash for r in base + cond if r.ids_hash}
    if len(hashes) > 1:
        raise SubsetMismatch(f"{model}/{dataset}/{subset}: baseline and {condition!r} scored different id sets")
    return sum(r.error for r in cond) / len(cond) - sum(r.error for r in base) / len(base)


def family_average(deltas: Sequence[DeltaRecord], family: str, grouping: str = "variants") -> float:
    """Unweighted mean delta over a family's models.

    `variants` weighs every model variant equally; `base_models` first
    averages variants sharing a base name (the part before the last dash),
    then averages the base-model means.
    """
    if grouping not in ("variants", "base_models"):
        raise ValueError(f"grouping must be variants|base_models, got {grouping!r}")
    members = [d for d in deltas if d.family == family]
    if not members:
        raise EmptyFamily(f"no deltas for family {family!r}")
    if grouping == "variants":
        return sum(d.delta for d in members) / len(members)
    by_base: dict[str, list[float]] = {}
    for d in members:
        base = d.model.rsplit("-", 1)[0] if "-" in d.model else d.model
        by_base.setdefault(base, []).append(d.delta)
    base_means = [sum(v) / len(v) for _, v in sorted(by_base.items())]
    return sum(base_means) / len(base_means)


def aggregate_runs(cell_records: Sequence, expected_runs: int = 5) -> tuple[float, float, list[float]]:
    """Mean and unbiased sd over a cell's per-run error rates."""
    if cell_records and isinstance(cell_records[0], EvalRecord):
        if len({r.cell for r in cell_records}) > 1:
            raise ValueError("records span more than one cell")
        values = [r.error for r in sorted(cell_records, key=lambda r: r.run)]
    else:
        values = [float(v) for v in cell_records]
    if len(values) < 2:
        raise InsufficientRuns(f"need >= 2 runs, got {len(values)} (expected {expected_runs})")
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var), values


# ---------------------------------------------------------------------------
# Welch one-tailed t-test via the regularized incomplete beta function


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta_m = d * c
        h *= delta_m
        if abs(delta_m - 1.0) < 1e-15:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T >= t) for Student's t with df degrees of freedom."""
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, x)
    return tail if t > 0.0 else 1.0 - tail


def t_test_one_tailed(
    sample_a: Sequence[float], sample_b: Sequence[float], direction: str = "a_greater", label: str = ""
) -> StatResult:
    """Welch unequal-variance t-test with a one-tailed alternative.

    direction `a_greater` tests H1: mean(a) > mean(b); `b_greater` the mirror.
    """
    direction = {"greater": "a_greater", "less": "b_greater"}.get(direction, direction)
    if direction not in ("a_greater", "b_greater"):
        raise ValueError(f"direction must be a_greater|b_greater, got {direction!r}")
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise InsufficientData(f"need >= 2 per sample, got {n1} and {n2}")
    m1, m2 = sum(a) / n1, sum(b) / n2
    v1 = sum((v - m1) ** 2 for v in a) / (n1 - 1)
    v2 = sum((v - m2) ** 2 for v in b) / (n2 - 1)
    se2 = v1 / n1 + v2 / n2
    if se2 == 0.0:
        if m1 == m2:
            raise ZeroVariance("both samples constant with equal means")
        t = math.inf if m1 > m2 else -math.inf
        df = float(n1 + n2 - 2)
    else:
        t = (m1 - m2) / math.sqrt(se2)
        df = se2 * se2 / (v1 * v1 / (n1 * n1 * (n1 - 1)) + v2 * v2 / (n2 * n2 * (n2 - 1)))
    signed = t if direction == "a_greater" else -t
    if math.isinf(signed):
        p = 0.0 if signed > 0 else 1.0
    else:
        p = student_t_sf(signed, df)
    p = min(1.0, max(0.0, p))
    return StatResult(label=label, t=t, df=df, p_value=p, direction=direction)


# ---------------------------------------------------------------------------
# report rendering


GENERAL_COLUMNS = ["model", "family", "dataset", "condition", "subset", "mean_error", "sd", "n", "runs"]
DELTA_COLUMNS = ["scope", "grouping", "dataset", "condition", "subset", "delta", "p_value", "n", "runs"]


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _fmt_p(p: float | None) -> str:
    return "" if p is None else f"{p:.4g}"


def _group_cells(records: Sequence[EvalRecord]) -> dict[tuple, list[EvalRecord]]:
    cells: dict[tuple, list[EvalRecord]] = {}
    for r in sorted(records, key=lambda r: r.key):
        cells.setdefault(r.cell, []).append(r)
    return cells


def _mean_sd(values: Sequence[float]) -> tuple[float, float | None]:
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, None
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def _safe_p(cond_vals: Sequence[float], base_vals: Sequence[float], d: float) -> float | None:
    direction = "a_greater" if d >= 0 else "b_greater"
    try:
        return t_test_one_tailed(cond_vals, base_vals, direction).p_value
    except (InsufficientData, ZeroVariance):
        return None


def _general_rows(cells: dict[tuple, list[EvalRecord]]) -> list[list[str]]:
    rows = []
    for cell, recs in sorted(cells.items()):
        model, dataset, condition, subset = cell
        values = [r.error for r in recs]
        mean, sd = _mean_sd(values)
        rows.append(
            [model, recs[0].family, dataset, condition, subset, _fmt(mean), "" if sd is None else _fmt(sd), str(recs[0].n), str(len(values))]
        )
    return rows


def _delta_tables(cells: dict[tuple, list[EvalRecord]]) -> tuple[list, list, list]:
    """Build per-connective (baseline), omission, and switch delta rows."""
    missing: list[str] = []
    # table name -> list of (model, family, dataset, condition, subset, delta, p, n, runs)
    tables: dict[str, list[tuple]] = {"connective": [], "omit": [], "switch": []}

    for cell, recs in sorted(cells.items()):
        model, dataset, condition, subset = cell
        family = recs[0].family
        values = [r.error for r in recs]
        if condition == BASELINE and subset.startswith(("connective:", "type:")):
            base_key = (model, dataset, BASELINE, "all")
            table = "connective"
        elif condition.startswith("omit"):
            base_key = (model, dataset, BASELINE, subset)
            table = "omit"
        elif condition.startswith("switch"):
            base_key = (model, dataset, BASELINE, subset)
            table = "switch"
        else:
            continue
        if base_key not in cells:
            missing.append("/".join(base_key[:3]) + "/" + base_key[3])
            continue
        hashes = {r.ids_hash for r in recs + cells[base_key] if r.ids_hash}
        if table != "connective" and len(hashes) > 1:
            raise SubsetMismatch(f"{model}/{dataset}/{subset}: {condition!r} vs baseline id sets differ")
        base_vals = [r.error for r in cells[base_key]]
        d = sum(values) / len(values) - sum(base_vals) / len(base_vals)
        p = _safe_p(values, base_vals, d)
        tables[table].append((model, family, dataset, condition, subset, d, p, recs[0].n, len(values)))

    if missing:
        raise IncompleteGrid(sorted(set(missing)))

    def finish(rows: list[tuple]) -> list[list[str]]:
        out = [
            ["model:" + model, "", dataset, condition, subset, _fmt(d), _fmt_p(p), str(n), str(runs)]
            for model, _family, dataset, condition, subset, d, p, n, runs in rows
        ]
        groups: dict[tuple, list[DeltaRecord]] = {}
        for model, family, dataset, condition, subset, d, _p, n, _runs in rows:
            groups.setdefault((family, dataset, condition, subset), []).append(
                DeltaRecord(model, family, dataset, subset, d, n)
            )
        for (family, dataset, condition, subset), members in sorted(groups.items()):
            ns = {m.n for m in members}
            n_cell = str(ns.pop()) if len(ns) == 1 else ""
            for grouping in ("variants", "base_models"):
                avg = family_average(members, family, grouping)
                out.append(["family:" + family, grouping, dataset, condition, subset, _fmt(avg), "", n_cell, ""])
        return out

    return finish(tables["connective"]), finish(tables["omit"]), finish(tables["switch"])


def _write_table(path: Path, columns: list[str], rows: list[list[str]], fmt: str) -> Path:
    if fmt == "csv":
        lines = [",".join(columns)] + [",".join(row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "markdown":
        lines = ["| " + " | ".join(columns) + " |", "| " + " | ".join("---" for _ in columns) + " |"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        payload = {"columns": columns, "rows": [dict(zip(columns, row)) for row in rows]}
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    else:
        raise ValueError(f"format must be csv|markdown|json, got {fmt!r}")
    return path


def render_report(records: Sequence[EvalRecord], out_dir, fmt: str = "csv") -> dict[str, Path]:
    """Write the four report tables; byte-identical for identical inputs."""
    if not records:
        raise IncompleteGrid(["no records in store"])
    ext = {"csv": "csv", "markdown": "md", "json": "json"}.get(fmt)
    if ext is None:
        raise ValueError(f"format must be csv|markdown|json, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = _group_cells(records)
    conn_rows, omit_rows, switch_rows = _delta_tables(cells)
    paths = {
        "general": _write_table(out / f"general.{ext}", GENERAL_COLUMNS, _general_rows(cells), fmt),
        "connective_deltas": _write_table(out / f"connective_deltas.{ext}", DELTA_COLUMNS, conn_rows, fmt),
        "omission_deltas": _write_table(out / f"omission_deltas.{ext}", DELTA_COLUMNS, omit_rows, fmt),
        "switch_deltas": _write_table(out / f"switch_deltas.{ext}", DELTA_COLUMNS, switch_rows, fmt),
    }
    return paths
