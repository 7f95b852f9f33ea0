"""Experiment configuration: one JSON file per experiment, merged over
defaults, validated with dotted-path error messages before any computation,
and compiled into the runtime objects (problem spec, grid, per-module
configs).

Overrides come as "key.path=value" strings (values parsed as JSON when
possible, kept as strings otherwise) and take precedence over the file. The
configuration hash is the sha256 of the canonicalized merged dictionary, so
it identifies the effective experiment, not the file's formatting.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, replace

from .attractor import AttractorConfig
from .baseflow import FREQUENCY_PRESETS, BasePoint, make_point, preset_frequencies
from .bifurcation import DEFAULT_GAMMAS
from .chaos import ChaosConfig
from .cocycle import CocycleConfig
from .coeffs import (EMPTY_TRIG, LinearCoefficientSpec, NonlinearitySpec,
                     SpaceTerm, TrigPoly, build_coboundary_h,
                     build_unbounded_surrogate_h, check_coboundary_consistency)
from .errors import ConfigurationError, ValidationError
from .solver import (BoundaryCondition, Grid, ProblemSpec, dt_max,
                     invariant_box)

VERSION = "0.1.0"

DEFAULTS: dict = {
    "flow": {"preset": "golden", "omega": None},
    "grid": {"n_cells": 64},
    "bc": {"kind": None, "alpha": 0.0, "alpha_right": None},
    "dt": 1e-3,
    "gamma": 0.0,
    "h": {
        "kind": "terms",
        "constant_shift": 0.0,
        "base": [],
        "space": [],
        "potential": None,
        "K": None,
        "level": 6,
        "scale": None,
    },
    "g": None,
    "point": {"theta": [0.0, 0.0]},
    "samples": {"n": 20, "seed": 2026},
    "cocycle": {
        "dt": 1e-3,
        "dt_rec": 0.1,
        "T_spin": 10.0,
        "zero_tol": 5e-3,
        "T_max": 1e4,
        "M_bound": 3.0,
        "T_exponent": 1e3,
        "calibration_gap_tol": 1e-3,
    },
    "attractor": {
        "dt": None,
        "r_start": None,
        "T_list": None,
        "T_cap": 800.0,
        "gap_tol": 1e-4,
        "zero_tol": 1e-3,
        "positive_tol": 1e-2,
        "bs_growth_tol": 0.5,
    },
    "chaos": {
        "dt": None,
        "T": 2000.0,
        "window": 50.0,
        "dt_rec": 0.25,
        "threshold_lo": 0.05,
        "threshold_hi": None,
        "degenerate_tol": 1e-9,
    },
    "sweep": {"gammas": list(DEFAULT_GAMMAS)},
    "output": {"dir": "out"},
}

_G_DEFAULTS = {"r0": 1.0, "stiff_const": 100.0,
               "stiff_torus": None, "stiff_space": None}


@dataclass
class ExperimentConfig:
    """Everything a subcommand needs, built once and validated."""

    raw: dict
    hash: str
    preset: str
    omega: tuple[float, float]
    grid: Grid
    bc: BoundaryCondition
    h: LinearCoefficientSpec
    g: NonlinearitySpec | None
    gamma: float
    prob: ProblemSpec
    h_eff: LinearCoefficientSpec   # gamma folded into the constant shift
    point: BasePoint
    dt: float
    n_samples: int
    seed: int
    cocycle: CocycleConfig
    attractor: AttractorConfig
    chaos: ChaosConfig
    gammas: tuple[float, ...]
    outdir: str


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply "a.b.c=value" strings onto a nested dict; values are JSON when
    they parse, bare strings otherwise."""
    out = copy.deepcopy(raw)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"override {item!r} is not of form key.path=value")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


def _merge(defaults, user, path, errors):
    if not isinstance(user, dict):
        errors.append(f"{path or 'config'}: expected an object, got {type(user).__name__}")
        return copy.deepcopy(defaults)
    out = {}
    for key, dval in defaults.items():
        kpath = f"{path}.{key}" if path else key
        if key not in user:
            out[key] = copy.deepcopy(dval)
        elif isinstance(dval, dict) and isinstance(user[key], dict):
            out[key] = _merge(dval, user[key], kpath, errors)
        else:
            out[key] = copy.deepcopy(user[key])
    for key in user:
        if key not in defaults:
            errors.append(f"unknown key: {path + '.' if path else ''}{key}")
    return out


def _float(raw, path, errors, *, positive=False, nonneg=False):
    v = raw
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{path}: expected a number, got {v!r}")
        return None
    v = float(v)
    if positive and not v > 0:
        errors.append(f"{path}: must be positive, got {v:g}")
        return None
    if nonneg and v < 0:
        errors.append(f"{path}: must be nonnegative, got {v:g}")
        return None
    return v


def _int(raw, path, errors, *, minimum=None):
    if isinstance(raw, bool) or not isinstance(raw, int):
        errors.append(f"{path}: expected an integer, got {raw!r}")
        return None
    if minimum is not None and raw < minimum:
        errors.append(f"{path}: must be >= {minimum}, got {raw}")
        return None
    return raw


def _parse_trig(items, path, errors) -> TrigPoly | None:
    if items is None:
        return None
    if not isinstance(items, list):
        errors.append(f"{path}: expected a list of terms")
        return None
    modes, amps, phases = [], [], []
    for i, term in enumerate(items):
        tpath = f"{path}[{i}]"
        if not isinstance(term, dict):
            errors.append(f"{tpath}: expected an object")
            continue
        for k in term:
            if k not in ("mode", "amp", "phase"):
                errors.append(f"{tpath}: unknown field {k!r}")
        mode = term.get("mode")
        if (not isinstance(mode, list) or len(mode) != 2
                or not all(isinstance(m, int) for m in mode)):
            errors.append(f"{tpath}.mode: expected a pair of integers")
            continue
        amp = _float(term.get("amp", None), f"{tpath}.amp", errors)
        ph = _float(term.get("phase", 0.0), f"{tpath}.phase", errors)
        if amp is None or ph is None:
            continue
        modes.append((mode[0], mode[1]))
        amps.append(amp)
        phases.append(ph)
    try:
        return TrigPoly(tuple(modes), tuple(amps), tuple(phases))
    except ValidationError as exc:
        errors.append(f"{path}: {exc}")
        return None


def _parse_space_term(term, path, errors) -> SpaceTerm | None:
    if not isinstance(term, dict):
        errors.append(f"{path}: expected an object")
        return None
    for k in term:
        if k not in ("mode", "amp", "profile", "phase"):
            errors.append(f"{path}: unknown field {k!r}")
    mode = term.get("mode")
    if (not isinstance(mode, list) or len(mode) != 2
            or not all(isinstance(m, int) for m in mode)):
        errors.append(f"{path}.mode: expected a pair of integers")
        return None
    amp = _float(term.get("amp", None), f"{path}.amp", errors)
    ph = _float(term.get("phase", 0.0), f"{path}.phase", errors)
    profile = term.get("profile")
    if not isinstance(profile, str):
        errors.append(f"{path}.profile: required string")
        return None
    if amp is None or ph is None:
        return None
    try:
        return SpaceTerm((mode[0], mode[1]), amp, profile, ph)
    except ValidationError as exc:
        errors.append(f"{path}: {exc}")
        return None


def _build_h(raw, bc, grid, omega, preset, errors) -> LinearCoefficientSpec | None:
    kind = raw.get("kind")
    shift = _float(raw.get("constant_shift", 0.0), "h.constant_shift", errors)
    if kind == "terms":
        base = _parse_trig(raw.get("base") or [], "h.base", errors)
        space = []
        for i, term in enumerate(raw.get("space") or []):
            st = _parse_space_term(term, f"h.space[{i}]", errors)
            if st is not None:
                space.append(st)
        pot_raw = raw.get("potential")
        potential = _parse_trig(pot_raw, "h.potential", errors)
        if base is None or shift is None:
            return None
        spec = LinearCoefficientSpec(base_part=base, space_part=tuple(space),
                                     constant_shift=shift, potential=potential)
        if potential is not None:
            try:
                check_coboundary_consistency(spec, omega)
            except ValidationError as exc:
                errors.append(f"h.potential: {exc}")
                return None
        return spec
    if kind == "coboundary":
        K = _parse_trig(raw.get("K"), "h.K", errors)
        if K is None:
            if raw.get("K") is None:
                errors.append("h.K required for kind 'coboundary'")
            return None
        if bc is None or grid is None or shift is None:
            return None
        try:
            spec = build_coboundary_h(K, bc, grid, omega)
        except (ValidationError, ConfigurationError) as exc:
            errors.append(f"h: {exc}")
            return None
        return replace(spec, constant_shift=spec.constant_shift + shift)
    if kind == "surrogate":
        level = _int(raw.get("level", 6), "h.level", errors, minimum=1)
        scale = raw.get("scale")
        if scale is not None:
            scale = _float(scale, "h.scale", errors, positive=True)
        if bc is None or grid is None or level is None:
            return None
        try:
            kwargs = {"preset": preset}
            if scale is not None:
                kwargs["scale"] = scale
            spec = build_unbounded_surrogate_h(bc, level, grid, **kwargs)
        except (ValidationError, ConfigurationError) as exc:
            errors.append(f"h: {exc}")
            return None
        if shift:
            spec = replace(spec, constant_shift=spec.constant_shift + shift)
        return spec
    errors.append(f"h.kind: expected 'terms', 'coboundary' or 'surrogate', got {kind!r}")
    return None


def _build_g(raw, errors) -> NonlinearitySpec | None:
    merged = _merge(_G_DEFAULTS, raw, "g", errors)
    r0 = _float(merged["r0"], "g.r0", errors, positive=True)
    k0 = _float(merged["stiff_const"], "g.stiff_const", errors, nonneg=True)
    torus = _parse_trig(merged["stiff_torus"], "g.stiff_torus", errors)
    space = None
    if merged["stiff_space"] is not None:
        space = _parse_space_term(merged["stiff_space"], "g.stiff_space", errors)
    if r0 is None or k0 is None:
        return None
    try:
        return NonlinearitySpec(r0=r0, stiff_const=k0, stiff_torus=torus,
                                stiff_space=space)
    except ValidationError as exc:
        errors.append(f"g: {exc}")
        return None


def validate_raw(raw: dict) -> tuple[ExperimentConfig | None, list[str], list[str]]:
    """Merge over defaults and compile; returns (config-or-None, errors,
    warnings). Errors carry dotted field paths; warnings are advisory."""
    errors: list[str] = []
    warnings: list[str] = []
    merged = _merge(DEFAULTS, raw, "", errors)

    preset = merged["flow"]["preset"]
    omega = None
    if preset not in FREQUENCY_PRESETS:
        errors.append(f"flow.preset: unknown preset {preset!r}; "
                      f"known: {sorted(FREQUENCY_PRESETS)}")
    elif merged["flow"]["omega"] is not None:
        pair = merged["flow"]["omega"]
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(v, (int, float)) for v in pair)):
            errors.append("flow.omega: expected a pair of numbers")
        else:
            omega = (float(pair[0]), float(pair[1]))
    else:
        omega = preset_frequencies(preset)

    grid = None
    n_cells = _int(merged["grid"]["n_cells"], "grid.n_cells", errors, minimum=1)
    if n_cells is not None:
        try:
            grid = Grid(n_cells)
        except ValidationError as exc:
            errors.append(f"grid.n_cells: {exc}")

    bc = None
    kind = merged["bc"]["kind"]
    if kind is None:
        errors.append("bc.kind required")
    elif kind not in ("neumann", "robin"):
        errors.append(f"bc.kind: expected 'neumann' or 'robin', got {kind!r}")
    else:
        alpha = _float(merged["bc"]["alpha"], "bc.alpha", errors)
        alpha_r = merged["bc"]["alpha_right"]
        if alpha_r is not None:
            alpha_r = _float(alpha_r, "bc.alpha_right", errors)
        if alpha is not None:
            try:
                bc = BoundaryCondition(kind, alpha, alpha_r)
            except ValidationError as exc:
                errors.append(f"bc: {exc}")

    dt = _float(merged["dt"], "dt", errors, positive=True)
    gamma = _float(merged["gamma"], "gamma", errors)

    h = None
    if omega is not None:
        h = _build_h(merged["h"], bc, grid, omega, preset, errors)
    g = None
    if merged["g"] is not None:
        g = _build_g(merged["g"], errors)

    theta = merged["point"]["theta"]
    point = None
    if (not isinstance(theta, list) or len(theta) != 2
            or not all(isinstance(v, (int, float)) for v in theta)):
        errors.append("point.theta: expected a pair of numbers")
    elif omega is not None:
        point = make_point((float(theta[0]), float(theta[1])), omega)

    n_samples = _int(merged["samples"]["n"], "samples.n", errors, minimum=0)
    seed = _int(merged["samples"]["seed"], "samples.seed", errors)

    cocycle = None
    if grid is not None and bc is not None and omega is not None:
        cc = merged["cocycle"]
        try:
            cocycle = CocycleConfig(
                grid=grid, bc=bc, omega=omega,
                dt=cc["dt"], dt_rec=cc["dt_rec"], T_spin=cc["T_spin"],
                zero_tol=cc["zero_tol"], T_max=cc["T_max"],
                M_bound=cc["M_bound"], T_exponent=cc["T_exponent"],
                calibration_gap_tol=cc["calibration_gap_tol"])
            cocycle.steps_per_record()
        except (ValidationError, TypeError) as exc:
            cocycle = None
            errors.append(f"cocycle: {exc}")

    attractor = None
    if grid is not None and cocycle is not None and dt is not None:
        ac = merged["attractor"]
        t_list = ac["T_list"]
        try:
            attractor = AttractorConfig(
                grid=grid, dt=ac["dt"] if ac["dt"] is not None else dt,
                r_start=ac["r_start"],
                T_list=tuple(t_list) if t_list is not None else None,
                T_cap=ac["T_cap"], gap_tol=ac["gap_tol"],
                zero_tol=ac["zero_tol"], positive_tol=ac["positive_tol"],
                bs_growth_tol=ac["bs_growth_tol"], cocycle=cocycle)
            attractor.horizons()
        except (ValidationError, TypeError) as exc:
            attractor = None
            errors.append(f"attractor: {exc}")

    chaos = None
    if grid is not None and dt is not None:
        hc = merged["chaos"]
        try:
            chaos = ChaosConfig(
                grid=grid, dt=hc["dt"] if hc["dt"] is not None else dt,
                T=hc["T"], window=hc["window"], dt_rec=hc["dt_rec"],
                threshold_lo=hc["threshold_lo"], threshold_hi=hc["threshold_hi"],
                degenerate_tol=hc["degenerate_tol"])
            chaos.records_per_window()
            chaos.steps_per_record()
        except (ValidationError, TypeError) as exc:
            chaos = None
            errors.append(f"chaos: {exc}")

    gammas = merged["sweep"]["gammas"]
    if (not isinstance(gammas, list) or len(gammas) == 0
            or not all(isinstance(v, (int, float)) for v in gammas)):
        errors.append("sweep.gammas: expected a nonempty list of numbers")
        gammas = ()
    else:
        gammas = tuple(float(v) for v in gammas)
        if not (any(v < 0 for v in gammas) and 0.0 in gammas
                and any(v > 0 for v in gammas)):
            warnings.append("sweep.gammas does not cover negative, zero and "
                            "positive values; the bifurcate subcommand will refuse it")

    outdir = merged["output"]["dir"]
    if not isinstance(outdir, str) or not outdir:
        errors.append("output.dir: expected a nonempty string")

    prob = None
    if h is not None and bc is not None and gamma is not None:
        prob = ProblemSpec(h=h, g=g, gamma=gamma, bc=bc)
        try:
            bound = dt_max(prob)
        except ValidationError as exc:
            errors.append(f"g: {exc}")
            bound = None
        if bound is not None:
            for name, val in (("dt", dt),
                              ("attractor.dt", attractor.dt if attractor else None),
                              ("chaos.dt", chaos.dt if chaos else None)):
                if val is not None and val > bound * (1.0 + 1e-12):
                    errors.append(f"{name} = {val:g} exceeds dt_max ≈ {bound:.3g} "
                                  f"for this problem")
            lin_bound = dt_max(ProblemSpec(
                h=replace(h, constant_shift=h.constant_shift + gamma),
                g=None, gamma=0.0, bc=bc))
            if cocycle is not None and cocycle.dt > lin_bound * (1.0 + 1e-12):
                errors.append(f"cocycle.dt = {cocycle.dt:g} exceeds the linear "
                              f"dt_max ≈ {lin_bound:.3g}")
        if g is not None and attractor is not None and attractor.r_start is not None:
            try:
                box = invariant_box(prob)
                if attractor.r_start < box:
                    warnings.append(
                        f"attractor.r_start = {attractor.r_start:g} is below the "
                        f"dissipativity bound {box:.3g}; the pullback may start "
                        f"inside the attractor")
            except ValidationError:
                pass

    if errors:
        return None, errors, warnings

    cfg = ExperimentConfig(
        raw=merged,
        hash=config_hash(merged),
        preset=preset,
        omega=omega,
        grid=grid,
        bc=bc,
        h=h,
        g=g,
        gamma=gamma,
        prob=prob,
        h_eff=replace(h, constant_shift=h.constant_shift + gamma),
        point=point,
        dt=dt,
        n_samples=n_samples,
        seed=seed,
        cocycle=cocycle,
        attractor=attractor,
        chaos=chaos,
        gammas=gammas,
        outdir=outdir,
    )
    return cfg, [], warnings


def validate_config(path, overrides=()) -> tuple[ExperimentConfig | None,
                                                 list[str], list[str]]:
    """Read + merge + validate a config file; never raises on content errors."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        return None, [f"cannot read config: {exc}"], []
    except json.JSONDecodeError as exc:
        return None, [f"config is not valid JSON: {exc}"], []
    if not isinstance(raw, dict):
        return None, ["config root must be a JSON object"], []
    try:
        raw = apply_overrides(raw, overrides)
    except ConfigurationError as exc:
        return None, [str(exc)], []
    return validate_raw(raw)


def load_config(path, overrides=()) -> ExperimentConfig:
    """validate_config that raises ConfigurationError on any problem."""
    cfg, errors, _ = validate_config(path, overrides)
    if cfg is None:
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(errors))
    return cfg
