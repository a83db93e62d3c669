# Copyright (c) mnverify contributors.
# SPDX-License-Identifier: Apache-2.0
"""Verification of LTL properties for neural multi-agent systems.

Systems are given as a builtin name (``"pendulum:n=8"``), a model JSON path,
or a model document (``dict``). Results are the same JSON documents the
``mnverify`` command prints, as Python objects.
"""

from __future__ import annotations

import json
from typing import Any, Mapping, Union

try:
    from . import _mnverify as _core
except ImportError:  # build tree: the extension sits next to, not inside, the package
    import _mnverify as _core

FormulaError = _core.FormulaError
ModelError = _core.ModelError
ParseError = _core.ParseError
TotalityGap = _core.TotalityGap

schema_version: int = _core.schema_version
__version__: str = _core.__version__

System = Union[str, Mapping[str, Any]]

_SOLVER_KEYS = ("feas_tol", "int_tol", "gap_tol", "node_limit", "iteration_limit")

__all__ = [
    "FormulaError",
    "ModelError",
    "ParseError",
    "TotalityGap",
    "builtin_names",
    "bounds",
    "export_lp",
    "load_system",
    "normalize_formula",
    "schema_version",
    "simulate",
    "verify",
]


def _system(system: System) -> str:
    if isinstance(system, Mapping):
        return json.dumps(system)
    return str(system)


def builtin_names() -> list[str]:
    return list(_core.builtin_names())


def load_system(system: System) -> dict:
    """Validated model document of a builtin, file or document."""
    return json.loads(_core.system_json(_system(system)))


def verify(system: System, formula: str, **config: Any) -> dict:
    """Runs a verification query and returns the report.

    Keyword arguments follow the ``config`` section of the report (``k``,
    ``engine``, ``methods``, ...). Solver settings may be given flat
    (``node_limit=1000``) or as ``solver={...}``.
    """
    cfg = dict(config)
    solver = dict(cfg.pop("solver", {}))
    for key in _SOLVER_KEYS:
        if key in cfg:
            solver[key] = cfg.pop(key)
    if solver:
        cfg["solver"] = solver
    return json.loads(_core.verify(_system(system), formula, json.dumps(cfg)))


def bounds(system: System, depth: int) -> dict:
    """Per-step interval bounds of the reachable states."""
    return json.loads(_core.bounds(_system(system), depth))


def simulate(system: System, horizon: int, seed: int = 0) -> dict:
    return json.loads(_core.simulate(_system(system), horizon, seed))


def export_lp(system: System, depth: int, split: bool = True, maximize: str | None = None) -> str:
    """The depth-``depth`` encoding in LP format."""
    return _core.export_lp(_system(system), depth, split, maximize or "")


def normalize_formula(formula: str) -> str:
    return _core.normalize_formula(formula)
