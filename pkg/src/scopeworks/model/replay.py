"""Probability interchange files and the replay backend.

Any external model can feed the scoring pipeline by writing one JSON
line per instance: ``{"instance_id": ..., "class_order": [...],
"probs": [[...], ...]}`` with one probability row per token position
(padding included) and rows summing to 1.  The replay backend serves
those stored rows in place of a live model.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import InputError, ReplayLookupError, SchemaError
from ..tokenization import ProbTable


def write_probability_file(entries, sink=None) -> bytes:
    """Serialize (instance_id, ProbTable) pairs to interchange JSONL.

    Floats are written with full repr precision (well above the 8
    significant digits the schema requires).
    """
    lines = []
    for instance_id, table in entries:
        table.validate()
        lines.append(json.dumps({
            "instance_id": instance_id,
            "class_order": list(table.class_order),
            "probs": [[float(p) for p in row] for row in table.probs],
        }))
    data = ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    if sink is not None:
        sink.write(data)
    return data


def read_probability_data(data: bytes, expected_class_order=None, expected_rows=None):
    """Parse and validate interchange JSONL; returns (tables, class_order)."""
    tables: dict[str, ProbTable] = {}
    class_order = None
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: bad JSON ({exc})") from exc
        try:
            instance_id = obj["instance_id"]
            order = tuple(int(c) for c in obj["class_order"])
            probs = np.asarray(obj["probs"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: malformed probability record ({exc})") from exc
        if class_order is None:
            class_order = order
        elif order != class_order:
            raise SchemaError(
                f"line {lineno}: class order {list(order)} differs from earlier "
                f"{list(class_order)}"
            )
        if instance_id in tables:
            raise SchemaError(f"line {lineno}: duplicate instance id {instance_id!r}")
        table = ProbTable(probs, order)
        table.validate(expected_rows)
        tables[instance_id] = table
    if expected_class_order is not None and class_order is not None:
        expected = tuple(int(c) for c in expected_class_order)
        if class_order != expected:
            raise SchemaError(
                f"probability file uses class order {list(class_order)} but the task "
                f"expects {list(expected)}"
            )
    return tables, class_order


class ReplayBackend:
    """Serves stored probability tables keyed by instance id."""

    def __init__(self, tables: dict[str, ProbTable], class_order):
        self.tables = dict(tables)
        self.class_order = tuple(int(c) for c in class_order)

    @classmethod
    def from_file(cls, path, expected_class_order=None, expected_rows=None) -> "ReplayBackend":
        with open(path, "rb") as fh:
            data = fh.read()
        tables, class_order = read_probability_data(
            data, expected_class_order=expected_class_order, expected_rows=expected_rows
        )
        if class_order is None:
            if expected_class_order is None:
                raise SchemaError(f"{path}: empty probability file and no expected class order")
            class_order = tuple(expected_class_order)
        return cls(tables, class_order)

    def forward_for(self, instance_id: str) -> ProbTable:
        try:
            return self.tables[instance_id]
        except KeyError:
            raise ReplayLookupError(
                f"no stored probabilities for instance {instance_id!r}"
            ) from None

    def predict_probs(self, instances, batch_size: int = 0) -> list[ProbTable]:
        """Mirror of the live model's API; ``batch_size`` is ignored."""
        out = []
        for ti in instances:
            table = self.forward_for(ti.instance_id)
            if tuple(ti.class_order) != self.class_order:
                raise InputError(
                    f"instance {ti.instance_id!r} expects class order "
                    f"{list(ti.class_order)} but the file holds {list(self.class_order)}"
                )
            out.append(table)
        return out
