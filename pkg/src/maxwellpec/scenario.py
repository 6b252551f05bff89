"""Scenario ingestion: grid, horizon, material law, data, and options.

Scenarios are TOML documents (schema = 1) with closed-form entries for
the material law and data; see scenarios/ for worked examples.  All
expressions use the variables t, x1, x2, x3 and the function set
sin/cos/tan/exp/sqrt/log/tanh plus pi.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import charts
from .fields import FieldDescriptor, as_field
from .grid import Grid
from .materials import CoefficientSet, MaterialLaw, assemble_coefficients

__all__ = ["Scenario", "load_scenario", "ScenarioError"]

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Malformed or unsupported scenario document."""


@dataclass
class Scenario:
    """One fully specified half-space problem plus verification options."""

    name: str
    grid: Grid
    t0: float
    horizon: float            # T
    horizon_max: float        # T' >= T
    law: MaterialLaw
    f: FieldDescriptor
    g: FieldDescriptor
    u0: FieldDescriptor
    order: int = 1
    gammas: tuple = (1.0, 2.0, 4.0, 8.0)
    cfl: float = 0.4
    stride: int = 1
    tol: float | None = None
    chart: charts.ChartDescriptor | None = None
    perturbation: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.horizon > self.horizon_max:
            raise ScenarioError("time horizon exceeds horizon_max")
        if not 0 <= self.order <= 3:
            raise ScenarioError("regularity order must lie in 0..3")

    def coefficients(self, times=None) -> CoefficientSet:
        if times is None:
            times = [self.t0, self.t0 + self.horizon]
        return assemble_coefficients(self.law, self.grid, times)

    def perturbed_law(self) -> MaterialLaw:
        """Material law scaled by the [perturbation] factors."""
        if not self.perturbation:
            raise ScenarioError("scenario has no [perturbation] section")
        import sympy as sp

        from .fields import SymbolicField

        def scaled(mat_field, key):
            factor = self.perturbation.get(key)
            if factor is None:
                return mat_field
            fac = as_field(factor, (1, 1)).sym[0, 0]
            return SymbolicField(sp.ImmutableDenseMatrix(
                sp.Matrix(mat_field.sym) * fac))

        return MaterialLaw(
            scaled(self.law.eps, "epsilon_factor"),
            scaled(self.law.mu, "mu_factor"),
            self.law.sigma, eta=self.law.eta)

    def refine(self) -> "Scenario":
        return replace(self, grid=self.grid.refine(),
                       stride=2 * self.stride)


def _chart_from_config(cfg: dict) -> charts.ChartDescriptor:
    kind = cfg.get("kind", "identity")
    params = cfg.get("params", [])
    if kind == "identity":
        return charts.identity_chart()
    if kind == "rotation":
        angle = float(params[0])
        axis = int(params[1]) if len(params) > 1 else 2
        return charts.rotation_chart(angle, axis)
    if kind == "tilt":
        return charts.tilt_chart(float(params[0]), float(params[1]))
    if kind == "vertical_stretch":
        return charts.vertical_stretch_chart(float(params[0]))
    raise ScenarioError(f"unknown chart kind {kind!r}")


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    if doc.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema {doc.get('schema')!r}; expected "
            f"{SCHEMA_VERSION}")
    try:
        gcfg = doc["grid"]
        grid = Grid(float(gcfg.get("lx", 1.0)), float(gcfg.get("ly", 1.0)),
                    float(gcfg.get("lz", 1.0)), int(gcfg["nx"]),
                    int(gcfg["ny"]), int(gcfg["nz"]))
        tcfg = doc.get("time", {})
        t0 = float(tcfg.get("t0", 0.0))
        horizon = float(tcfg.get("horizon", 1.0))
        horizon_max = float(tcfg.get("horizon_max", horizon))
        mcfg = doc.get("material", {})
        law = MaterialLaw(
            mcfg.get("epsilon", 1.0), mcfg.get("mu", 1.0),
            mcfg.get("sigma", 0.0), eta=float(mcfg.get("eta", 1e-3)))
        dcfg = doc.get("data", {})
        f = as_field(dcfg.get("f", ["0"] * 6), (6,))
        g = as_field(dcfg.get("g", ["0"] * 2), (2,))
        u0 = as_field(dcfg.get("u0", ["0"] * 6), (6,))
        vcfg = doc.get("verify", {})
        scn = Scenario(
            name=doc.get("name", name),
            grid=grid, t0=t0, horizon=horizon, horizon_max=horizon_max,
            law=law, f=f, g=g, u0=u0,
            order=int(vcfg.get("order", doc.get("order", 1))),
            gammas=tuple(float(x) for x in vcfg.get(
                "gammas", (1.0, 2.0, 4.0, 8.0))),
            cfl=float(tcfg.get("cfl", 0.4)),
            stride=int(tcfg.get("stride", 1)),
            tol=vcfg.get("tol"),
            chart=(_chart_from_config(doc["chart"])
                   if "chart" in doc else None),
            perturbation=doc.get("perturbation", {}),
            seed=int(doc.get("seed", 0)),
        )
    except ScenarioError:
        raise
    except KeyError as exc:
        raise ScenarioError(f"missing required scenario key: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario value: {exc}") from exc
    return scn


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    import os
    return scenario_from_dict(
        doc, name=os.path.splitext(os.path.basename(str(path)))[0])
