"""Parsing and schema validation of the simulator's results.csv artifacts."""

import os
from dataclasses import dataclass

SCHEMA_VERSION = 1


class SchemaError(Exception):
    """results.csv does not match the versioned column schema."""


def _parse(value):
    if value in ("true", "false"):
        return value == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


@dataclass
class ResultTable:
    columns: list
    rows: list
    path: str = ""

    @classmethod
    def load(cls, path):
        if not os.path.exists(path):
            raise SchemaError(f"{path}: file not found")
        with open(path) as fh:
            header = fh.readline().rstrip("\n")
            if not header:
                raise SchemaError(f"{path}: empty results file")
            columns = header.split(",")
            rows = []
            for i, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split(",")
                if len(parts) != len(columns):
                    raise SchemaError(f"{path}:{i}: expected {len(columns)} "
                                      f"fields, got {len(parts)}")
                rows.append({k: _parse(v) for k, v in zip(columns, parts)})
        table = cls(columns=columns, rows=rows, path=path)
        table.require("schema_version")
        bad = [r for r in rows if r["schema_version"] != SCHEMA_VERSION]
        if bad:
            raise SchemaError(f"{path}: schema_version "
                              f"{bad[0]['schema_version']} != {SCHEMA_VERSION}")
        return table

    def require(self, *names):
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaError(f"{self.path}: missing column(s): "
                              + ", ".join(missing))
        return self

    def select(self, **eq):
        out = self.rows
        for k, v in eq.items():
            self.require(k)
            out = [r for r in out if r[k] == v]
        return out
