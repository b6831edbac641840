"""Datasets: YAML-persisted tables of inputs and reference outputs.

One file per dataset at ``<data_dir>/datasets/<name>.yaml``.  The file is
written in a canonical shape (fixed key order, block style, optionals
omitted) so re-saving unchanged data is byte-identical and diffs stay
minimal under version control.  Extraction paths live on the dataset, not
on rows: one input path and one output path describe the whole table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .jsonpath import ExtractionError, JsonPath, PathError, extract, parse_path
from .trace import RunTrace
from .yamlio import atomic_write, dump_yaml, load_yaml

_NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")

_ID_RE = re.compile(r"dp-([0-9]+)")


class DatasetError(Exception):
    pass


class DatasetNotFoundError(DatasetError):
    def __init__(self, name: str) -> None:
        super().__init__(f"no dataset named {name!r}")
        self.name = name


class DuplicateDatasetError(DatasetError):
    def __init__(self, name: str) -> None:
        super().__init__(f"dataset {name!r} already exists")
        self.name = name


class DatasetSchemaError(DatasetError):
    """The YAML file does not match the dataset schema; names the key."""

    def __init__(self, key_path: str, reason: str) -> None:
        super().__init__(f"{key_path}: {reason}")
        self.key_path = key_path
        self.reason = reason


class PromotionError(DatasetError):
    pass


# distinct from None, which is a legitimate JSON-null reference override
_MISSING = object()


@dataclass
class Datapoint:
    id: str
    input: Any
    reference_output: Any
    source_trace: Optional[str] = None
    note: Optional[str] = None

    def to_yaml_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "input": self.input,
            "reference_output": self.reference_output,
        }
        if self.source_trace is not None:
            out["source_trace"] = self.source_trace
        if self.note is not None:
            out["note"] = self.note
        return out


@dataclass
class Dataset:
    name: str
    input_path: JsonPath
    output_path: JsonPath
    rows: list[Datapoint] = field(default_factory=list)

    def next_id(self) -> str:
        highest = 0
        for row in self.rows:
            m = _ID_RE.fullmatch(row.id)
            if m:
                highest = max(highest, int(m.group(1)))
        return f"dp-{highest + 1}"

    def to_yaml_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "input_path": self.input_path.render(),
            "output_path": self.output_path.render(),
            "rows": [row.to_yaml_dict() for row in self.rows],
        }


def _require(condition: bool, key_path: str, reason: str) -> None:
    if not condition:
        raise DatasetSchemaError(key_path, reason)


def dataset_from_yaml_dict(raw: Any, name_hint: str = "dataset") -> Dataset:
    _require(isinstance(raw, dict), name_hint, "top level must be a mapping")
    for key in ("name", "input_path", "output_path", "rows"):
        _require(key in raw, key, "required key missing")
    _require(isinstance(raw["name"], str) and bool(raw["name"]), "name", "must be a non-empty string")
    paths = {}
    for key in ("input_path", "output_path"):
        _require(isinstance(raw[key], str), key, "must be a path string")
        try:
            paths[key] = parse_path(raw[key])
        except PathError as exc:
            raise DatasetSchemaError(key, str(exc)) from exc
    _require(isinstance(raw["rows"], list), "rows", "must be a list")
    rows: list[Datapoint] = []
    seen_ids: set[str] = set()
    for i, row in enumerate(raw["rows"]):
        where = f"rows[{i}]"
        _require(isinstance(row, dict), where, "row must be a mapping")
        _require("id" in row, f"{where}.id", "required key missing")
        _require(isinstance(row["id"], str) and bool(row["id"]), f"{where}.id", "must be a non-empty string")
        _require(row["id"] not in seen_ids, f"{where}.id", f"duplicate row id {row['id']!r}")
        seen_ids.add(row["id"])
        for key in ("input", "reference_output"):
            _require(key in row, f"{where}.{key}", "required key missing")
        source_trace = row.get("source_trace")
        _require(
            source_trace is None or isinstance(source_trace, str),
            f"{where}.source_trace",
            "must be a string when present",
        )
        note = row.get("note")
        _require(note is None or isinstance(note, str), f"{where}.note", "must be a string when present")
        rows.append(
            Datapoint(
                id=row["id"],
                input=row["input"],
                reference_output=row["reference_output"],
                source_trace=source_trace,
                note=note,
            )
        )
    return Dataset(
        name=raw["name"],
        input_path=paths["input_path"],
        output_path=paths["output_path"],
        rows=rows,
    )


class DatasetStore:
    """Single-writer store for the datasets directory of one project."""

    def __init__(self, datasets_dir: Path | str) -> None:
        self.datasets_dir = Path(datasets_dir)

    def path_for(self, name: str) -> Path:
        return self.datasets_dir / f"{name}.yaml"

    def list_names(self) -> list[str]:
        if not self.datasets_dir.is_dir():
            return []
        return sorted(p.stem for p in self.datasets_dir.glob("*.yaml"))

    def create(self, name: str, input_path: str | JsonPath, output_path: str | JsonPath) -> Dataset:
        if not _NAME_RE.fullmatch(name):
            raise DatasetError(
                f"dataset name {name!r} is not filename-safe"
                " (letters, digits, '.', '_', '-'; must not start with a separator)"
            )
        if self.path_for(name).exists():
            raise DuplicateDatasetError(name)
        dataset = Dataset(
            name=name,
            input_path=_as_path(input_path),
            output_path=_as_path(output_path),
        )
        self.save(dataset)
        return dataset

    def load(self, name: str) -> Dataset:
        path = self.path_for(name)
        if not path.is_file():
            raise DatasetNotFoundError(name)
        return dataset_from_yaml_dict(load_yaml(path), name_hint=str(path))

    def save(self, dataset: Dataset) -> None:
        atomic_write(self.path_for(dataset.name), dump_yaml(dataset.to_yaml_dict()))

    def add_from_trace(
        self,
        dataset: Dataset,
        trace: RunTrace,
        reference_override: Any = _MISSING,
        note: Optional[str] = None,
    ) -> Datapoint:
        if trace.state != "completed":
            raise PromotionError(
                f"trace {trace.run_id!r} is not completed (state: {trace.state})"
            )
        root = trace.root
        if root is None:
            raise PromotionError(f"trace {trace.run_id!r} has no root span")
        try:
            input_value = extract(dataset.input_path, root.input)
        except ExtractionError as exc:
            raise PromotionError(f"input_path {dataset.input_path}: {exc}") from exc
        if reference_override is not _MISSING:
            reference = reference_override
        else:
            try:
                reference = extract(dataset.output_path, root.output)
            except ExtractionError as exc:
                raise PromotionError(f"output_path {dataset.output_path}: {exc}") from exc
        row = Datapoint(
            id=dataset.next_id(),
            input=input_value,
            reference_output=reference,
            source_trace=trace.run_id,
            note=note,
        )
        dataset.rows.append(row)
        self.save(dataset)
        return row

    def add_manual(
        self,
        dataset: Dataset,
        input: Any,
        reference_output: Any,
        note: Optional[str] = None,
    ) -> Datapoint:
        row = Datapoint(
            id=dataset.next_id(),
            input=input,
            reference_output=reference_output,
            note=note,
        )
        dataset.rows.append(row)
        self.save(dataset)
        return row


def _as_path(value: str | JsonPath) -> JsonPath:
    return value if isinstance(value, JsonPath) else parse_path(value)
