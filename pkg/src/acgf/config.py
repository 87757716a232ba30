"""Run configuration: a single JSON document validated before any compute.

All physical quantities are plain nondimensional reals. The resolved
configuration (defaults filled in, tolerances pinned to numbers) is what
gets echoed next to a run's outputs, and reparsing that echo yields an
identical resolved configuration.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyParams, ForcingField, SmoothPerturbation
from .errors import ConfigError
from .flow import FlowParams
from .meshes import build_mesh
from .potentials import potential_from_spec

_MESH_DEFAULTS = {"interval": {"L": 1.0, "n": 64}, "disc": {"R": 1.0, "nr": 16, "ntheta": 32}}
_ENERGY_DEFAULTS = {
    "kappa": 1.0,
    "eps": 0.0,
    "delta": 0.1,
    "lambda": 0.1,
    "bulk_potential": {"kind": "indicator", "lo": -1.0, "hi": 1.0},
    "bdry_potential": {"kind": "indicator", "lo": -1.0, "hi": 1.0},
    "perturbation": {"kind": "none"},
}
_FLOW_DEFAULTS = {"tau": 0.01, "T": 0.5, "inner_tol": None, "inner_max_iters": 200,
                  "semi_implicit_G": True}


def _mesh_num_nodes(spec):
    if spec["kind"] == "interval":
        return int(spec["n"]) + 1
    return int(spec["nr"]) * int(spec["ntheta"])


@dataclass
class RunConfig:
    mesh: dict
    energy: dict
    flow: dict
    initial: dict
    forcing: dict
    output_dir: str = "out"
    snapshot_every: int = 0
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def resolved(self):
        return {
            "mesh": self.mesh,
            "energy": self.energy,
            "flow": self.flow,
            "initial": self.initial,
            "forcing": self.forcing,
            "output_dir": self.output_dir,
            "snapshot_every": self.snapshot_every,
            "seed": self.seed,
        }

    # builders -------------------------------------------------------------

    def build_mesh(self):
        return build_mesh(self.mesh)

    def build_energy_params(self):
        e = self.energy
        bulk = potential_from_spec(e["bulk_potential"])
        bdry = potential_from_spec(e["bdry_potential"])
        pert = SmoothPerturbation.from_spec(e.get("perturbation"), (bulk.lo, bulk.hi))
        return EnergyParams(
            kappa=float(e["kappa"]), eps=float(e["eps"]), delta=float(e["delta"]),
            lam=float(e["lambda"]), bulk_potential=bulk, bdry_potential=bdry,
            perturbation=pert,
        )

    def build_flow_params(self):
        f = self.flow
        return FlowParams(
            tau=float(f["tau"]), T=float(f["T"]),
            inner_tol=None if f["inner_tol"] is None else float(f["inner_tol"]),
            inner_max_iters=int(f["inner_max_iters"]),
            semi_implicit_g=bool(f["semi_implicit_G"]),
        )

    def build_initial(self, mesh, params):
        spec = self.initial
        kind = spec.get("kind", "constant")
        lo, hi = params.bulk_potential.lo, params.bulk_potential.hi
        if kind == "constant":
            u = np.full(mesh.num_nodes, float(spec.get("value", 0.0)))
        elif kind == "two_phase":
            a = float(spec.get("amplitude", 0.9))
            mid = 0.5 * mesh.L if mesh.kind == "interval" else 0.0
            u = np.where(mesh.coords[:, 0] < mid, a, -a)
        elif kind == "file":
            from .runio import read_snapshot_values

            u = read_snapshot_values(spec["path"], mesh.num_nodes)
        elif kind == "random":
            amp = float(spec.get("amplitude", 1.0))
            rng = np.random.default_rng(self.seed)
            u = rng.uniform(max(lo, -amp), min(hi, amp), size=mesh.num_nodes)
        else:
            raise ConfigError(f"initial.kind: unknown kind {kind!r}")
        if np.any(u < lo) or np.any(u > hi):
            raise ConfigError(
                "initial: values leave the well domain "
                f"[{lo}, {hi}]; the initial pair must be admissible"
            )
        return u

    def build_forcing(self, mesh):
        spec = self.forcing
        kind = spec.get("kind", "zero")
        if kind == "zero":
            return ForcingField.zero()
        if kind == "constant":
            return ForcingField.constant(mesh, spec.get("bulk", 0.0), spec.get("boundary", 0.0))
        if kind == "tabulated":
            for key in ("times", "bulk", "boundary"):
                if key not in spec:
                    raise ConfigError(f"forcing.{key}: required for tabulated forcing")
            return ForcingField.tabulated(mesh, spec["times"], spec["bulk"], spec["boundary"])
        raise ConfigError(f"forcing.kind: unknown kind {kind!r}")

    def build_all(self):
        """(mesh, energy params, flow params, initial state, forcing), cached mesh."""
        if "mesh" not in self._cache:
            self._cache["mesh"] = self.build_mesh()
        mesh = self._cache["mesh"]
        p = self.build_energy_params()
        fp = self.build_flow_params()
        u0 = self.build_initial(mesh, p)
        forcing = self.build_forcing(mesh)
        return mesh, p, fp, u0, forcing


def _merge(defaults, given, path, errors):
    out = dict(defaults)
    if given is None:
        return out
    if not isinstance(given, dict):
        errors.append(f"{path}: expected an object")
        return out
    out.update(given)
    return out


def config_from_dict(raw):
    """Resolve defaults and validate; raises ConfigError with field paths."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    errors = []

    mesh = dict(raw.get("mesh") or {})
    kind = mesh.get("kind", "interval")
    if kind not in _MESH_DEFAULTS:
        errors.append(f"mesh.kind: unknown kind {kind!r}")
        kind = "interval"
    mesh = {**_MESH_DEFAULTS[kind], **mesh, "kind": kind}

    energy = _merge(_ENERGY_DEFAULTS, raw.get("energy"), "energy", errors)
    flow = _merge(_FLOW_DEFAULTS, raw.get("flow"), "flow", errors)
    initial = dict(raw.get("initial") or {"kind": "constant", "value": 0.0})
    forcing = dict(raw.get("forcing") or {"kind": "zero"})

    cfg = RunConfig(
        mesh=mesh, energy=energy, flow=flow, initial=initial, forcing=forcing,
        output_dir=str(raw.get("output_dir", "out")),
        snapshot_every=int(raw.get("snapshot_every", 0)),
        seed=int(raw.get("seed", 0)),
    )
    if cfg.snapshot_every < 0:
        errors.append("snapshot_every: must be >= 0")

    # structural checks that do not need the mesh built
    try:
        params = cfg.build_energy_params()
    except ConfigError as e:
        errors.append(f"energy: {e}")
        params = None
    try:
        fp = cfg.build_flow_params()
    except ConfigError as e:
        errors.append(f"flow: {e}")
        fp = None
    if params is not None and fp is not None:
        if flow["inner_tol"] is None:
            flow["inner_tol"] = 1e-9 * math.sqrt(_mesh_num_nodes(mesh))
            fp.inner_tol = flow["inner_tol"]
        try:
            fp.check_stability(params.perturbation.lipschitz)
        except ConfigError as e:
            errors.append(f"flow.tau: {e}")
    try:
        mesh_obj = cfg.build_mesh()
        cfg._cache["mesh"] = mesh_obj
        if params is not None:
            cfg.build_initial(mesh_obj, params)
        cfg.build_forcing(mesh_obj)
    except ConfigError as e:
        errors.append(str(e))

    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"configuration {path} is not valid JSON: {e}") from e
    return config_from_dict(raw)
