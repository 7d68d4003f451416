"""Versioned JSON run configuration: validation, construction, and echo.

The schema is strict: unknown keys are rejected, every violation names the
offending key and the expected type, and the parsed configuration can be
echoed back as a fully defaulted dictionary for the metadata file.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .drift import DriftCoupling, elliptic_solve, kernel_convolution, prescribed
from .fluxes import SchemeKind
from .mesh import Mesh, ProblemCoefficients, make_mesh
from .sensitivity import (
    ExponentialSensitivity,
    LinearSensitivity,
    LogisticSensitivity,
    SensitivityModel,
)
from .simulation import InitialCondition, RunConfig
from .solver import SolverConfig

__all__ = ["ConfigError", "parse_config", "parse_config_dict", "config_echo", "FIELD_PRESETS"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A configuration document violated the schema."""


def fp_weighted_well(x: np.ndarray) -> np.ndarray:
    """The asymmetric double-weighted well v(x) = x(1-x)|x-0.3|."""
    return x * (1.0 - x) * np.abs(x - 0.3)


#: named prescribed drift fields accepted in config files
FIELD_PRESETS = {"fp-weighted-well": fp_weighted_well}


def _require(obj: dict, key: str, kinds, where: str):
    if key not in obj:
        raise ConfigError(f"missing required key '{where}{key}'")
    value = obj[key]
    if not isinstance(value, kinds) or isinstance(value, bool) and kinds is not bool:
        expected = kinds.__name__ if isinstance(kinds, type) else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"key '{where}{key}': expected {expected}, got {type(value).__name__}")
    return value


def _optional(obj: dict, key: str, kinds, default, where: str):
    if key not in obj:
        return default
    return _require(obj, key, kinds, where)


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in '{where or 'top level'}'")


_NUM = (int, float)


def _parse_model(obj: dict) -> SensitivityModel:
    _reject_unknown(obj, {"kind", "saturation"}, "model.")
    kind = _require(obj, "kind", str, "model.")
    if kind == "linear":
        _reject_unknown(obj, {"kind"}, "model.")
        return LinearSensitivity()
    if kind == "logistic":
        saturation = _optional(obj, "saturation", _NUM, 1.0, "model.")
        return LogisticSensitivity(float(saturation))
    if kind == "exponential":
        _reject_unknown(obj, {"kind"}, "model.")
        return ExponentialSensitivity()
    raise ConfigError(f"key 'model.kind': expected one of linear/logistic/exponential, got {kind!r}")


def _parse_coupling(obj: dict, mesh: Mesh) -> DriftCoupling:
    _reject_unknown(obj, {"mode", "field", "table", "quadrature_weighted"}, "coupling.")
    mode = _require(obj, "mode", str, "coupling.")
    if mode == "prescribed":
        if "field" in obj and "table" in obj:
            raise ConfigError("coupling: give either 'field' or 'table', not both")
        if "field" in obj:
            name = _require(obj, "field", str, "coupling.")
            if name not in FIELD_PRESETS:
                raise ConfigError(
                    f"key 'coupling.field': unknown preset {name!r} "
                    f"(available: {sorted(FIELD_PRESETS)})"
                )
            return prescribed(FIELD_PRESETS[name])
        if "table" in obj:
            table = _require(obj, "table", list, "coupling.")
            values = np.asarray(table, dtype=float)
            if values.shape != (mesh.cell_count,):
                raise ConfigError(
                    f"key 'coupling.table': expected {mesh.cell_count} values, got {values.size}"
                )
            if np.any(values < 0):
                raise ConfigError("key 'coupling.table': drift values must be nonnegative")
            return prescribed(lambda x, _v=values: _v)
        raise ConfigError("prescribed coupling requires 'field' or 'table'")
    if mode == "kernel":
        weighted = _optional(obj, "quadrature_weighted", bool, True, "coupling.")
        return kernel_convolution(mesh, quadrature_weighted=weighted)
    if mode == "elliptic":
        _reject_unknown(obj, {"mode"}, "coupling.")
        return elliptic_solve(mesh)
    raise ConfigError(f"key 'coupling.mode': expected one of prescribed/kernel/elliptic, got {mode!r}")


def _parse_initial(obj: dict) -> InitialCondition:
    allowed = {"kind", "value", "amplitude", "seed", "values", "mu", "target_mass"}
    _reject_unknown(obj, allowed, "initial.")
    kind = _require(obj, "kind", str, "initial.")
    if kind == "constant":
        return InitialCondition(kind=kind, value=float(_require(obj, "value", _NUM, "initial.")))
    if kind == "constant-plus-noise":
        return InitialCondition(
            kind=kind,
            value=float(_require(obj, "value", _NUM, "initial.")),
            amplitude=float(_optional(obj, "amplitude", _NUM, 0.01, "initial.")),
            seed=int(_require(obj, "seed", int, "initial.")),
        )
    if kind == "table":
        values = _require(obj, "values", list, "initial.")
        return InitialCondition(kind=kind, values=tuple(float(v) for v in values))
    if kind == "discrete-steady-state":
        mu = obj.get("mu")
        if mu is not None and not isinstance(mu, _NUM):
            raise ConfigError(f"key 'initial.mu': expected number, got {type(mu).__name__}")
        target = obj.get("target_mass")
        if target is not None and not isinstance(target, _NUM):
            raise ConfigError(f"key 'initial.target_mass': expected number, got {type(target).__name__}")
        if mu is None and target is None:
            raise ConfigError("initial: discrete-steady-state requires 'mu' or 'target_mass'")
        return InitialCondition(
            kind=kind,
            mu=None if mu is None else float(mu),
            target_mass=None if target is None else float(target),
        )
    raise ConfigError(
        "key 'initial.kind': expected one of constant/constant-plus-noise/table/"
        f"discrete-steady-state, got {kind!r}"
    )


def _parse_solver(obj: dict) -> SolverConfig:
    allowed = {"residual_tol", "max_newton_iters", "pseudo_time_step",
               "max_pseudo_steps", "bracket_constant"}
    _reject_unknown(obj, allowed, "solver.")
    pseudo = obj.get("pseudo_time_step")
    if pseudo is not None and not isinstance(pseudo, _NUM):
        raise ConfigError("key 'solver.pseudo_time_step': expected number or null")
    bracket = obj.get("bracket_constant")
    if bracket is not None and not isinstance(bracket, _NUM):
        raise ConfigError("key 'solver.bracket_constant': expected number or null")
    return SolverConfig(
        residual_tol=float(_optional(obj, "residual_tol", _NUM, 1e-10, "solver.")),
        max_newton_iters=int(_optional(obj, "max_newton_iters", int, 200, "solver.")),
        pseudo_time_step=None if pseudo is None else float(pseudo),
        max_pseudo_steps=int(_optional(obj, "max_pseudo_steps", int, 10**6, "solver.")),
        bracket_constant=None if bracket is None else float(bracket),
    )


_TOP_KEYS = {
    "schema", "cells", "scheme", "model", "coupling", "diffusion", "chi",
    "dt", "t_final", "initial", "snapshot_every", "diagnostics_every", "solver",
}
_REQUIRED = ["schema", "cells", "scheme", "model", "coupling", "dt", "t_final", "initial"]


def parse_config_dict(doc: dict) -> RunConfig:
    """Validate a configuration dictionary and build the run configuration."""
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration must be a JSON object, got {type(doc).__name__}")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise ConfigError(f"missing required key(s): {missing}")
    _reject_unknown(doc, _TOP_KEYS, "")

    schema = _require(doc, "schema", int, "")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"key 'schema': this build reads version {SCHEMA_VERSION}, got {schema}")

    cells = _require(doc, "cells", int, "")
    if cells < 2:
        raise ConfigError(f"key 'cells': expected integer >= 2, got {cells}")
    mesh = make_mesh(cells)

    scheme_name = _require(doc, "scheme", str, "")
    try:
        scheme = SchemeKind(scheme_name)
    except ValueError:
        raise ConfigError(
            f"key 'scheme': expected one of {[s.value for s in SchemeKind]}, got {scheme_name!r}"
        ) from None

    model = _parse_model(_require(doc, "model", dict, ""))
    coupling = _parse_coupling(_require(doc, "coupling", dict, ""), mesh)
    diffusion = float(_optional(doc, "diffusion", _NUM, 1.0, ""))
    chi = float(_optional(doc, "chi", _NUM, 1.0, ""))
    try:
        coefficients = ProblemCoefficients(diffusion=diffusion, chi=chi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    dt = float(_require(doc, "dt", _NUM, ""))
    t_final = float(_require(doc, "t_final", _NUM, ""))
    initial = _parse_initial(_require(doc, "initial", dict, ""))
    snapshot_every = int(_optional(doc, "snapshot_every", int, 100, ""))
    diagnostics_every = int(_optional(doc, "diagnostics_every", int, 1, ""))
    solver = _parse_solver(_optional(doc, "solver", dict, {}, ""))

    try:
        return RunConfig(
            mesh=mesh, scheme=scheme, model=model, coupling=coupling,
            coefficients=coefficients, dt=dt, t_final=t_final, initial=initial,
            snapshot_every=snapshot_every, diagnostics_every=diagnostics_every,
            solver=solver,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_config_dict(doc)


def _coupling_echo(coupling: DriftCoupling) -> dict[str, Any]:
    if coupling.mode == "prescribed":
        for name, fn in FIELD_PRESETS.items():
            if coupling.field is fn:
                return {"mode": "prescribed", "field": name}
        x = np.linspace(0, 1, 2)  # tables close over their values
        try:
            values = coupling.field(x)
            if np.ndim(values) == 1 and len(values) != 2:
                return {"mode": "prescribed", "table": list(map(float, values))}
        except Exception:
            pass
        return {"mode": "prescribed", "field": "<callable>"}
    if coupling.mode == "kernel":
        return {"mode": "kernel", "quadrature_weighted": coupling.quadrature_weighted}
    return {"mode": "elliptic"}


def config_echo(config: RunConfig) -> dict[str, Any]:
    """Normalized dictionary form of a run configuration (defaults filled in)."""
    model: dict[str, Any] = {"kind": config.model.kind}
    if config.model.kind == "logistic":
        model["saturation"] = config.model.upper_bound
    init = {"kind": config.initial.kind}
    if config.initial.kind in ("constant", "constant-plus-noise"):
        init["value"] = config.initial.value
    if config.initial.kind == "constant-plus-noise":
        init["amplitude"] = config.initial.amplitude
        init["seed"] = config.initial.seed
    if config.initial.kind == "table":
        init["values"] = list(config.initial.values)
    if config.initial.kind == "discrete-steady-state":
        init["mu"] = config.initial.mu
        init["target_mass"] = config.initial.target_mass
    return {
        "schema": SCHEMA_VERSION,
        "cells": config.mesh.cell_count,
        "scheme": config.scheme.value,
        "model": model,
        "coupling": _coupling_echo(config.coupling),
        "diffusion": config.coefficients.diffusion,
        "chi": config.coefficients.chi,
        "dt": config.dt,
        "t_final": config.t_final,
        "initial": init,
        "snapshot_every": config.snapshot_every,
        "diagnostics_every": config.diagnostics_every,
        "solver": {
            "residual_tol": config.solver.residual_tol,
            "max_newton_iters": config.solver.max_newton_iters,
            "pseudo_time_step": config.solver.pseudo_time_step,
            "max_pseudo_steps": config.solver.max_pseudo_steps,
            "bracket_constant": config.solver.bracket_constant,
        },
    }
