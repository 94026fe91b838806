"""Golden-file fixtures: a named CLI invocation and the table it must reproduce."""
from __future__ import annotations

import contextlib
import csv
import io
import json
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import FixtureMissing


def fixture_dir() -> Path:
    return Path(str(resources.files("wshift").joinpath("data/fixtures")))


def manifest() -> dict:
    return json.loads((fixture_dir() / "manifest.json").read_text())


@dataclass(frozen=True)
class FixtureResult:
    name: str
    passed: bool
    exit_code: int
    message: str = ""


def _compare(expected: str, actual: str, tol: dict) -> str:
    """Empty string when the tables agree under ``tol``, else a description of the first difference."""
    if tol.get("mode", "absolute") == "bitwise":
        return "" if expected == actual else "output differs bytewise from the golden file"
    eps = float(tol.get("eps", 1e-9))
    exp_rows = list(csv.reader(io.StringIO(expected)))
    act_rows = list(csv.reader(io.StringIO(actual)))
    if len(exp_rows) != len(act_rows):
        return f"expected {len(exp_rows)} lines, got {len(act_rows)}"
    for lineno, (er, ar) in enumerate(zip(exp_rows, act_rows), start=1):
        if len(er) != len(ar):
            return f"line {lineno}: expected {len(er)} cells, got {len(ar)}"
        for col, (e, a) in enumerate(zip(er, ar)):
            if e == a:
                continue
            try:
                if abs(float(e) - float(a)) <= eps:
                    continue
            except ValueError:
                pass
            return f"line {lineno}, column {col + 1}: expected {e!r}, got {a!r}"
    return ""


def run_fixture(name: str) -> FixtureResult:
    """Run fixture ``name`` through the CLI and compare with its golden output."""
    from .cli import main

    spec = manifest().get(name)
    if spec is None:
        raise FixtureMissing(f"no fixture named {name!r}")
    root = fixture_dir()
    expected_path = root / spec["expected"]
    if not expected_path.exists():
        raise FixtureMissing(f"golden file {spec['expected']} for fixture {name!r} is missing")
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out.csv"
        args = [a.replace("{fixtures}", str(root)).replace("{out}", str(out)) for a in spec["args"]]
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            code = main(args)
        actual = out.read_text() if out.exists() else ""
    if code != spec.get("exit_code", 0):
        return FixtureResult(name, False, code, f"exit code {code}")
    problem = _compare(expected_path.read_text(), actual, spec.get("tolerance", {}))
    return FixtureResult(name, not problem, code, problem)


def run_all() -> list[FixtureResult]:
    return [run_fixture(name) for name in manifest()]
