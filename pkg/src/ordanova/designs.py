"""Experimental designs, simulation, and the CSV data format.

Two dataset schemas are supported:

* ``latin``: one observation per cell of a square, with factors ``row``,
  ``col`` and ``treatment``.
* ``nested``: repeated measures on machines that are nested in treatment
  groups, with factors ``machine``, ``treatment`` and ``measure``.

Factor labels are 1-based in CSV files and 0-based in memory.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CsvError, SchemaError, ValidationError
from .rngtools import substream

__all__ = [
    "Dataset",
    "LatinSquareDesign",
    "NestedDesign",
    "SimulationTruth",
    "SimulationRecord",
    "make_latin_square",
    "simulate_latin",
    "make_nested_design",
    "simulate_nested",
    "load_csv",
    "write_csv",
    "validate_latin_dataset",
    "design_from_dataset",
]

SCHEMA_FACTORS = {
    "latin": ("row", "col", "treatment"),
    "nested": ("machine", "treatment", "measure"),
}


@dataclass(frozen=True)
class SimulationTruth:
    """Generating parameters for a simulated dataset.

    ``effect_sds`` maps batch names to the standard deviations their
    effects are drawn with. ``fixed_effects``, when given, is a fixed
    treatment-effect vector used instead of a random draw (``effect_sds``
    must then omit ``"treatment"``).
    """

    grand_mean: float
    effect_sds: dict[str, float]
    residual_sd: float
    fixed_effects: np.ndarray | None = None

    def __post_init__(self):
        for name, sd in self.effect_sds.items():
            if not np.isfinite(sd) or sd < 0:
                raise ValidationError(f"effect sd for {name!r} must be >= 0")
        if not np.isfinite(self.residual_sd) or self.residual_sd < 0:
            raise ValidationError("residual sd must be >= 0")
        if self.fixed_effects is not None:
            arr = np.asarray(self.fixed_effects, dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValidationError("fixed effects must be a finite vector")
            object.__setattr__(self, "fixed_effects", arr)
            if "treatment" in self.effect_sds:
                raise ValidationError(
                    "give either a treatment sd or fixed effects, not both"
                )


@dataclass
class SimulationRecord:
    """What a simulation actually produced: the truth plus the realized
    effect vectors for every batch."""

    truth: SimulationTruth
    effects: dict[str, np.ndarray]

    def to_json_dict(self) -> dict:
        return {
            "grand_mean": self.truth.grand_mean,
            "effect_sds": dict(sorted(self.truth.effect_sds.items())),
            "residual_sd": self.truth.residual_sd,
            "fixed_effects": (
                None
                if self.truth.fixed_effects is None
                else [float(v) for v in self.truth.fixed_effects]
            ),
            "realized_effects": {
                name: [float(v) for v in vec]
                for name, vec in sorted(self.effects.items())
            },
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SimulationRecord":
        truth = SimulationTruth(
            grand_mean=float(payload["grand_mean"]),
            effect_sds={k: float(v) for k, v in payload["effect_sds"].items()},
            residual_sd=float(payload["residual_sd"]),
            fixed_effects=(
                None
                if payload.get("fixed_effects") is None
                else np.asarray(payload["fixed_effects"], dtype=float)
            ),
        )
        effects = {
            name: np.asarray(vec, dtype=float)
            for name, vec in payload["realized_effects"].items()
        }
        return cls(truth=truth, effects=effects)


class Dataset:
    """Observations with integer factor labels under a named schema.

    Parameters
    ----------
    schema : str
        ``"latin"`` or ``"nested"``.
    y : array of float, shape (n,)
        Responses; must be finite.
    factors : dict of str to int arrays, shape (n,)
        0-based labels for every factor the schema declares.
    levels : dict of str to int
        Number of levels per factor; labels must lie in ``[0, levels)``.
    realized : SimulationRecord, optional
        Attached when the dataset came from a simulation.
    """

    def __init__(
        self,
        schema: str,
        y: np.ndarray,
        factors: dict[str, np.ndarray],
        levels: dict[str, int],
        realized: SimulationRecord | None = None,
    ):
        if schema not in SCHEMA_FACTORS:
            raise SchemaError(f"unknown schema {schema!r}")
        names = SCHEMA_FACTORS[schema]
        if tuple(factors) != names or tuple(levels) != names:
            raise SchemaError(
                f"schema {schema!r} needs factors {names}, got {tuple(factors)}"
            )
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValidationError("y must be a nonempty vector")
        if not np.all(np.isfinite(y)):
            raise ValidationError("y must be finite")
        self.schema = schema
        self.y = y
        self.factors = {}
        self.levels = {}
        for name in names:
            lab = np.asarray(factors[name])
            if lab.shape != y.shape or not np.issubdtype(lab.dtype, np.integer):
                raise ValidationError(
                    f"factor {name!r} must be an integer vector matching y"
                )
            nlev = int(levels[name])
            if nlev < 1:
                raise ValidationError(f"factor {name!r} must have >= 1 level")
            if lab.size and (lab.min() < 0 or lab.max() >= nlev):
                raise ValidationError(
                    f"factor {name!r} labels must lie in [0, {nlev})"
                )
            self.factors[name] = lab.astype(np.intp)
            self.levels[name] = nlev
        self.realized = realized

    @property
    def n(self) -> int:
        return self.y.size

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.levels == other.levels
            and np.array_equal(self.y, other.y)
            and all(
                np.array_equal(self.factors[f], other.factors[f])
                for f in self.factors
            )
        )

    def treatment_groups(self) -> list[np.ndarray]:
        """Responses split by treatment level, in level order."""
        lab = self.factors["treatment"]
        return [self.y[lab == i] for i in range(self.levels["treatment"])]

    @classmethod
    def latin(cls, y, row, col, treatment, levels=None, realized=None):
        """Build a latin-schema dataset; levels default to max label + 1."""
        factors = {
            "row": np.asarray(row),
            "col": np.asarray(col),
            "treatment": np.asarray(treatment),
        }
        if levels is None:
            levels = {k: int(v.max()) + 1 if v.size else 1 for k, v in factors.items()}
        return cls("latin", y, factors, levels, realized)

    @classmethod
    def nested(cls, y, machine, treatment, measure, levels=None, realized=None):
        """Build a nested-schema dataset; levels default to max label + 1."""
        factors = {
            "machine": np.asarray(machine),
            "treatment": np.asarray(treatment),
            "measure": np.asarray(measure),
        }
        if levels is None:
            levels = {k: int(v.max()) + 1 if v.size else 1 for k, v in factors.items()}
        return cls("nested", y, factors, levels, realized)


@dataclass(frozen=True)
class LatinSquareDesign:
    """A Latin square: ``assignment[i, j]`` is the 0-based treatment in
    row ``i``, column ``j``; every treatment occurs once per row and once
    per column."""

    order: int
    assignment: np.ndarray = field(compare=False)

    def __post_init__(self):
        arr = np.asarray(self.assignment)
        if arr.shape != (self.order, self.order):
            raise ValidationError("assignment must be a square matrix")
        want = np.arange(self.order)
        for i in range(self.order):
            if not np.array_equal(np.sort(arr[i, :]), want):
                raise ValidationError(f"row {i} is not a permutation")
            if not np.array_equal(np.sort(arr[:, i]), want):
                raise ValidationError(f"column {i} is not a permutation")
        object.__setattr__(self, "assignment", arr.astype(np.intp))


@dataclass(frozen=True)
class NestedDesign:
    """Machines partitioned into treatment groups, each measured the same
    number of times. ``group_of[m]`` is the 0-based group of machine ``m``."""

    n_machines: int
    n_groups: int
    n_measures: int
    group_of: np.ndarray = field(compare=False)

    def __post_init__(self):
        if self.n_machines < self.n_groups or self.n_groups < 1:
            raise ValidationError("need at least one machine per group")
        if self.n_measures < 1:
            raise ValidationError("need at least one measure per machine")
        grp = np.asarray(self.group_of)
        if grp.shape != (self.n_machines,):
            raise ValidationError("group_of must have one entry per machine")
        if set(np.unique(grp)) != set(range(self.n_groups)):
            raise ValidationError("every group must receive a machine")
        object.__setattr__(self, "group_of", grp.astype(np.intp))


def make_latin_square(order: int, seed: int) -> LatinSquareDesign:
    """A random Latin square: the cyclic square with rows, columns and
    symbols independently permuted (stream ``(seed, "latin-square")``)."""
    if order < 1:
        raise ValidationError("order must be at least 1")
    rng = substream(seed, "latin-square")
    base = (np.arange(order)[:, None] + np.arange(order)[None, :]) % order
    rows = rng.permutation(order)
    cols = rng.permutation(order)
    syms = rng.permutation(order)
    return LatinSquareDesign(order=order, assignment=syms[base[rows][:, cols]])


def make_nested_design(
    n_machines: int, n_groups: int, n_measures: int
) -> NestedDesign:
    """Deterministic nested design: machines are assigned to groups in
    contiguous blocks, as balanced as the counts allow."""
    sizes = np.full(n_groups, n_machines // n_groups, dtype=np.intp)
    sizes[: n_machines % n_groups] += 1
    return NestedDesign(
        n_machines=n_machines,
        n_groups=n_groups,
        n_measures=n_measures,
        group_of=np.repeat(np.arange(n_groups), sizes),
    )


def _draw_effects(
    name: str, size: int, truth: SimulationTruth, rng
) -> np.ndarray:
    if name == "treatment" and truth.fixed_effects is not None:
        if truth.fixed_effects.size != size:
            raise ValidationError(
                f"fixed effects need length {size}, got {truth.fixed_effects.size}"
            )
        return truth.fixed_effects.copy()
    if name not in truth.effect_sds:
        raise ValidationError(f"truth is missing an sd for batch {name!r}")
    return rng.normal(0.0, truth.effect_sds[name], size=size)


def simulate_latin(
    design: LatinSquareDesign, truth: SimulationTruth, seed: int
) -> Dataset:
    """Simulate one observation per cell of the square.

    Effects are drawn on the stream ``(seed, "simulate-latin")`` in the
    order row, column, treatment, then residual noise.
    """
    rng = substream(seed, "simulate-latin")
    order = design.order
    effects = {
        "row": _draw_effects("row", order, truth, rng),
        "col": _draw_effects("col", order, truth, rng),
        "treatment": _draw_effects("treatment", order, truth, rng),
    }
    row = np.repeat(np.arange(order), order)
    col = np.tile(np.arange(order), order)
    treatment = design.assignment[row, col]
    y = (
        truth.grand_mean
        + effects["row"][row]
        + effects["col"][col]
        + effects["treatment"][treatment]
        + rng.normal(0.0, truth.residual_sd, size=order * order)
    )
    levels = {"row": order, "col": order, "treatment": order}
    record = SimulationRecord(truth=truth, effects=effects)
    return Dataset(
        "latin",
        y,
        {"row": row, "col": col, "treatment": treatment},
        levels,
        realized=record,
    )


def simulate_nested(
    design: NestedDesign, truth: SimulationTruth, seed: int
) -> Dataset:
    """Simulate repeated measures on machines nested in treatment groups.

    Effects are drawn on the stream ``(seed, "simulate-nested")`` in the
    order machine, treatment, then residual noise.
    """
    rng = substream(seed, "simulate-nested")
    effects = {
        "machine": _draw_effects("machine", design.n_machines, truth, rng),
        "treatment": _draw_effects("treatment", design.n_groups, truth, rng),
    }
    machine = np.repeat(np.arange(design.n_machines), design.n_measures)
    measure = np.tile(np.arange(design.n_measures), design.n_machines)
    treatment = design.group_of[machine]
    y = (
        truth.grand_mean
        + effects["treatment"][treatment]
        + effects["machine"][machine]
        + rng.normal(0.0, truth.residual_sd, size=machine.size)
    )
    levels = {
        "machine": design.n_machines,
        "treatment": design.n_groups,
        "measure": design.n_measures,
    }
    record = SimulationRecord(truth=truth, effects=effects)
    return Dataset(
        "nested",
        y,
        {"machine": machine, "treatment": treatment, "measure": measure},
        levels,
        realized=record,
    )


def validate_latin_dataset(data: Dataset) -> None:
    """Check that a latin-schema dataset covers a full Latin square: every
    cell exactly once, every treatment once per row and once per column."""
    if data.schema != "latin":
        raise SchemaError("expected a latin-schema dataset")
    order = data.levels["row"]
    if data.levels["col"] != order or data.levels["treatment"] != order:
        raise ValidationError("row, column and treatment counts must match")
    if data.n != order * order:
        raise ValidationError(
            f"a {order}x{order} square needs {order * order} observations"
        )
    row, col = data.factors["row"], data.factors["col"]
    if np.unique(row * order + col).size != data.n:
        raise ValidationError("each row-column cell must appear exactly once")
    grid = np.empty((order, order), dtype=np.intp)
    grid[row, col] = data.factors["treatment"]
    LatinSquareDesign(order=order, assignment=grid)


def design_from_dataset(data: Dataset):
    """Reconstruct the design a dataset was collected under.

    A latin-schema dataset must cover a complete square; a nested-schema
    dataset must give every machine one treatment and the same number of
    measures.
    """
    if data.schema == "latin":
        validate_latin_dataset(data)
        order = data.levels["row"]
        grid = np.empty((order, order), dtype=np.intp)
        grid[data.factors["row"], data.factors["col"]] = data.factors["treatment"]
        return LatinSquareDesign(order=order, assignment=grid)
    machine = data.factors["machine"]
    treatment = data.factors["treatment"]
    n_machines = data.levels["machine"]
    n_measures = data.levels["measure"]
    group_of = np.empty(n_machines, dtype=np.intp)
    for m in range(n_machines):
        rows = machine == m
        groups = np.unique(treatment[rows])
        if groups.size != 1:
            raise ValidationError(
                f"machine {m + 1} must appear under exactly one treatment"
            )
        if int(rows.sum()) != n_measures:
            raise ValidationError(
                f"machine {m + 1} has {int(rows.sum())} measures, "
                f"expected {n_measures}"
            )
        group_of[m] = groups[0]
    return NestedDesign(
        n_machines=n_machines,
        n_groups=data.levels["treatment"],
        n_measures=n_measures,
        group_of=group_of,
    )


def _truth_path(path: Path) -> Path:
    return path.with_name(path.stem + ".truth.json")


def write_csv(data: Dataset, path) -> None:
    """Write a dataset as CSV with 1-based labels. ``y`` is written with
    ``repr`` so a round trip is bit exact. A simulated dataset also gets a
    ``<name>.truth.json`` sidecar recording the generating parameters."""
    path = Path(path)
    names = SCHEMA_FACTORS[data.schema]
    lines = ["y," + ",".join(names)]
    for i in range(data.n):
        labs = ",".join(str(int(data.factors[f][i]) + 1) for f in names)
        lines.append(f"{float(data.y[i])!r},{labs}")
    path.write_text("\n".join(lines) + "\n")
    if data.realized is not None:
        _truth_path(path).write_text(
            json.dumps(data.realized.to_json_dict(), indent=2, sort_keys=True)
            + "\n"
        )


def load_csv(path) -> Dataset:
    """Load a dataset written by :func:`write_csv`, inferring the schema
    from the header. A ``<name>.truth.json`` sidecar is attached when
    present."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CsvError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CsvError(f"{path} is empty")
    header = tuple(col.strip() for col in lines[0].split(","))
    schema = None
    for name, factors in SCHEMA_FACTORS.items():
        if header == ("y",) + factors:
            schema = name
            break
    if schema is None:
        raise SchemaError(f"unrecognized header {','.join(header)!r} in {path}")
    names = SCHEMA_FACTORS[schema]
    y = np.empty(len(lines) - 1)
    labels = {f: np.empty(len(lines) - 1, dtype=np.intp) for f in names}
    for i, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvError(f"row {i}: expected {len(header)} columns", row=i)
        try:
            y[i - 1] = float(cells[0])
        except ValueError:
            raise CsvError(
                f"row {i}: could not parse y value {cells[0]!r}", row=i
            ) from None
        for j, f in enumerate(names):
            try:
                lab = int(cells[j + 1])
            except ValueError:
                raise CsvError(
                    f"row {i}: could not parse {f} label {cells[j + 1]!r}",
                    row=i,
                ) from None
            if lab < 1:
                raise CsvError(f"row {i}: {f} label must be >= 1", row=i)
            labels[f][i - 1] = lab - 1
    levels = {f: int(labels[f].max()) + 1 for f in names}
    realized = None
    sidecar = _truth_path(path)
    if sidecar.exists():
        realized = SimulationRecord.from_json_dict(
            json.loads(sidecar.read_text())
        )
    return Dataset(schema, y, labels, levels, realized=realized)
