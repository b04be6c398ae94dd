"""Experiment result records and their serialized forms.

A report is a frozen bundle of parameters, computed statistics, and named
threshold checks.  Serialization keeps the payload free of wall-clock data:
the JSONL writer isolates the timestamp in a header line so that reruns of
the same configuration produce byte-identical payload lines.
"""

from __future__ import annotations

from dataclasses import dataclass
import csv
import datetime
import json

ENGINE_VERSION = "0.1.0"


def _plain(value):
    """Coerce numpy scalars and containers to builtin types for json."""
    if hasattr(value, "item") and not hasattr(value, "__len__"):
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass(frozen=True)
class Check:
    """One named pass/fail comparison of a statistic against a threshold."""

    name: str
    value: float
    threshold: float
    op: str
    passed: bool


def check_le(name: str, value, threshold) -> Check:
    value = float(value)
    threshold = float(threshold)
    return Check(name, value, threshold, "<=", value <= threshold)


def check_ge(name: str, value, threshold) -> Check:
    value = float(value)
    threshold = float(threshold)
    return Check(name, value, threshold, ">=", value >= threshold)


@dataclass(frozen=True)
class ExperimentReport:
    """Outcome of one named experiment, reproducible from params + seed."""

    experiment: str
    params: dict
    statistics: dict
    checks: tuple = ()
    labels: tuple = ()
    engine_version: str = ENGINE_VERSION

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def payload(self) -> dict:
        return {
            "experiment": self.experiment,
            "engine_version": self.engine_version,
            "labels": list(self.labels),
            "params": _plain(self.params),
            "statistics": _plain(self.statistics),
            "checks": [
                {"name": c.name, "value": c.value, "threshold": c.threshold,
                 "op": c.op, "passed": c.passed}
                for c in self.checks
            ],
            "passed": self.passed,
        }

    def to_json(self) -> str:
        # repr round-trips floats exactly, so identical runs serialize
        # identically
        return json.dumps(self.payload(), sort_keys=True)

    def summary_lines(self) -> list:
        mark = "PASS" if self.passed else "FAIL"
        out = [f"[{mark}] {self.experiment}"]
        for c in self.checks:
            m = "pass" if c.passed else "FAIL"
            out.append(f"  {c.name}: {c.value!r} {c.op} {c.threshold!r} [{m}]")
        return out


def write_jsonl(reports, path) -> None:
    """One header line with the timestamp, then one payload line per report."""
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path, "w") as fh:
        fh.write(json.dumps({"written_at": stamp}) + "\n")
        for rep in reports:
            fh.write(rep.to_json() + "\n")


def read_jsonl(path):
    """Header dict and payload dicts of a report file."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "written_at" not in lines[0]:
        raise ValueError(f"{path}: missing timestamp header line")
    return lines[0], lines[1:]


def write_csv(reports, path) -> None:
    """Flat per-check summary table."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["experiment", "check", "value", "threshold", "op",
                     "passed", "labels"])
        for rep in reports:
            labels = ";".join(rep.labels)
            if not rep.checks:
                wr.writerow([rep.experiment, "", "", "", "", rep.passed,
                             labels])
            for c in rep.checks:
                wr.writerow([rep.experiment, c.name, repr(c.value),
                             repr(c.threshold), c.op, c.passed, labels])
