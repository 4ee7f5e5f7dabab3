"""Command-line driver.

    isl <command> --config <path> [--seed N] [--out DIR]
                  [--x-max F] [--x-step F] [--k-max F] [--k-step F]

The config file is flat ``key = value`` text with ``#`` comments; flags
override file values. Every command writes ``<out>/<command>.json`` with the
resolved config embedded, plus command-specific CSV files. Exit status is 0
on success, 2 on invalid input or data, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import ambiguity, born, gelfand_levitan, krein, marchenko, resonance
from .errors import IslError, NumericalError, ValidationError
from .forward import (
    HalfLineScatteringData,
    norming_constant_pair,
    phase_shifts,
    scattering_data,
)
from .numerics import ComplexBox, UniformGrid, winding_number
from .potential import (
    RadialPotential,
    load_potential,
    save_potential,
    square_well,
    zero_potential,
)
from .report import write_csv, write_json

log = logging.getLogger(__name__)

COMMANDS = ("forward", "invert-marchenko", "invert-gl", "invert-krein", "resonances",
            "phaseshifts", "born-demo", "ambiguity", "roundtrip")
METHODS = ("marchenko", "gl", "krein")
ERROR_FRACTION = 0.9


@dataclass
class ExperimentConfig:
    command: str = "roundtrip"
    potential: str = ""
    data: str = ""
    measure: str = ""
    output_dir: str = "out"
    seed: int = 0
    x_max: float = 2.0
    x_step: float = 0.01
    k_max: float = 60.0
    k_step: float = 0.02
    lambda_max: float = 0.0
    lambda_step: float = 0.1
    methods: str = "marchenko,gl,krein"
    k: float = 1.0
    L: int = 20
    box: str = "0.5,6,-3,-0.01"
    depth: float = 10.0
    q_scale: float = 1.0
    noise: float = 1e-3
    cutoffs: str = "5,10,15,20,25,30,40,50,60"
    xi_step: float = 0.1
    exact: bool = False
    target_phase_gap: float = 1e-3
    min_potential_gap: float = 0.5
    budget: int = 5000
    pieces: int = 4
    tol: float = 1e-10
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        for name in ("x_max", "x_step", "k_max", "k_step", "lambda_step", "k", "depth",
                     "xi_step", "target_phase_gap", "tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive, got {v}")
        for name in ("L", "budget", "pieces"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.lambda_max < 0 or self.noise < 0 or self.min_potential_gap < 0 or self.q_scale == 0:
            raise ValidationError("lambda_max, noise and min_potential_gap must be >= 0, q_scale nonzero")
        if self.k_step >= self.k_max:
            raise ValidationError("k_step must be below k_max")
        unknown = set(self.method_list()) - set(METHODS)
        if unknown:
            raise ValidationError(f"unknown methods {sorted(unknown)}")
        needs_q = {"forward", "resonances", "phaseshifts", "born-demo", "roundtrip"}
        if self.command in needs_q and not self.potential:
            raise ValidationError(f"{self.command} needs 'potential'")
        if self.command in ("invert-marchenko", "invert-krein") and not (self.data or self.potential):
            raise ValidationError(f"{self.command} needs 'data' or 'potential'")
        if self.command == "invert-gl" and not (self.measure or self.potential):
            raise ValidationError("invert-gl needs 'measure' or 'potential'")

    def method_list(self) -> list:
        return [m.strip() for m in self.methods.split(",") if m.strip()]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _convert(name: str, text: str, kind):
    try:
        if kind is bool:
            t = text.strip().lower()
            if t not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return t in ("true", "1", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ValidationError(f"config key {name!r}: cannot read {text!r} as {kind.__name__}") from None
    return text.strip()


_KINDS = {f.name: {"int": int, "float": float, "bool": bool, "str": str}.get(f.type, str)
          for f in fields(ExperimentConfig) if f.name != "extra"}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "out":
            key = "output_dir"
        if key not in _KINDS:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, _KINDS[key])
    return out


def load_config(command: str, path=None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    base = None
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file {path} not found")
        values = parse_config_text(path.read_text())
        base = path.parent
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["command"] = command
    cfg = ExperimentConfig(**values)
    # input paths are relative to the config file
    if base is not None:
        for key in ("potential", "data", "measure"):
            v = getattr(cfg, key)
            if v and ":" not in v and v != "zero" and not Path(v).is_absolute():
                setattr(cfg, key, str(base / v))
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

def resolve_potential(spec: str, step: float = 0.01) -> RadialPotential:
    """A potential CSV path, ``zero``, or ``square:<q0>:<a>``."""
    if spec == "zero":
        return zero_potential(step=step)
    if spec.startswith("square:"):
        try:
            parts = [float(p) for p in spec.split(":")[1:]]
        except ValueError:
            raise ValidationError(f"bad square-well spec {spec!r}") from None
        q0, a = parts[0], (parts[1] if len(parts) > 1 else 1.0)
        return square_well(q0, a, step=step)
    path = Path(spec)
    if not path.is_file():
        raise ValidationError(f"potential file {path} not found")
    return load_potential(path)


def k_grid(cfg: ExperimentConfig) -> UniformGrid:
    return UniformGrid.from_range(cfg.k_step, cfg.k_max, cfg.k_step)


def _data(cfg: ExperimentConfig):
    if cfg.data:
        if not Path(cfg.data).is_file():
            raise ValidationError(f"data file {cfg.data} not found")
        return HalfLineScatteringData.load(cfg.data), None
    q = resolve_potential(cfg.potential, cfg.x_step)
    return scattering_data(q, k_grid(cfg)), q


def _lambda_max(cfg: ExperimentConfig) -> float:
    return cfg.lambda_max if cfg.lambda_max > 0 else cfg.k_max**2


def _compare(q_hat: RadialPotential, q: RadialPotential, x_max: float) -> dict:
    top = ERROR_FRACTION * (q.support_radius if q.support_radius > 0 else x_max)
    x = q_hat.x[q_hat.x <= top * (1 + 1e-12)]
    d = q_hat(x) - q(x)
    w = UniformGrid(0.0, q_hat.grid.step, x.size).trapezoid_weights() if x.size > 1 else np.zeros(1)
    return {"interval": [0.0, float(top)], "sup_error": float(np.max(np.abs(d))),
            "l2_error": float(math.sqrt(max(w @ (d * d), 0.0)))}


def _potential_rows(q: RadialPotential):
    return zip(q.x.tolist(), q.samples.tolist())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_forward(cfg: ExperimentConfig, out: Path) -> dict:
    q = resolve_potential(cfg.potential, cfg.x_step)
    data = scattering_data(q, k_grid(cfg))
    data.save(out / "scattering_data.json")
    write_csv(out / "S.csv", ("k", "S_re", "S_im"),
              zip(data.k.tolist(), data.S.real.tolist(), data.S.imag.tolist()))
    states = []
    for kj, s in data.bound_states:
        s1, s2 = norming_constant_pair(q, kj)
        states.append({"k": kj, "s": s, "s_formula": s1, "s_norm": s2,
                       "relative_difference": abs(s1 - s2) / abs(s1)})
    return {
        "J": data.J,
        "bound_states": states,
        "unitarity_defect": data.unitarity_defect(),
        "index": winding_number(data.symmetric_contour()),
        "index_expected": -2 * data.J,
    }


def cmd_invert_marchenko(cfg: ExperimentConfig, out: Path) -> dict:
    data, q = _data(cfg)
    rep = marchenko.characterize(data)
    q_hat, kernel, _ = marchenko.invert(data, cfg.x_max, cfg.x_step)
    save_potential(q_hat, out / "q_marchenko.csv")
    kernel.save_csv(out / "kernel_marchenko.csv")
    result = {"characterization": asdict(rep), "kernel_info": kernel.info,
              "support_radius": q_hat.support_radius}
    if q is not None:
        result["error"] = _compare(q_hat, q, cfg.x_max)
    return result


def cmd_invert_gl(cfg: ExperimentConfig, out: Path) -> dict:
    q = None
    if cfg.measure:
        if not Path(cfg.measure).is_file():
            raise ValidationError(f"measure file {cfg.measure} not found")
        measure = gelfand_levitan.SpectralMeasure.load(cfg.measure)
    else:
        q = resolve_potential(cfg.potential, cfg.x_step)
        measure = gelfand_levitan.spectral_from_potential(q, _lambda_max(cfg), cfg.lambda_step)
        measure.save(out / "spectral_measure.json")
    q_hat, kernel = gelfand_levitan.invert(measure, cfg.x_max, cfg.x_step)
    save_potential(q_hat, out / "q_gl.csv")
    kernel.save_csv(out / "kernel_gl.csv")
    result = {"atoms": [{"lambda": lam, "c": c} for lam, c in measure.atoms],
              "kernel_info": kernel.info, "support_radius": q_hat.support_radius}
    if q is not None:
        result["error"] = _compare(q_hat, q, cfg.x_max)
    return result


def cmd_invert_krein(cfg: ExperimentConfig, out: Path) -> dict:
    data, q = _data(cfg)
    q_hat, ws, _ = krein.invert(data, cfg.x_max, cfg.x_step)
    save_potential(q_hat, out / "q_krein.csv")
    ws.save_H(out / "H_krein.csv")
    result = {"conditions": ws.conditions, "support_radius": q_hat.support_radius}
    if q is not None:
        result["error"] = _compare(q_hat, q, cfg.x_max)
    return result


def _box(text: str) -> ComplexBox:
    try:
        vals = [float(v) for v in text.split(",")]
        return ComplexBox(*vals)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"box must be 're_min,re_max,im_min,im_max': {exc}") from None


def cmd_resonances(cfg: ExperimentConfig, out: Path) -> dict:
    q = resolve_potential(cfg.potential, cfg.x_step)
    rs = resonance.find_resonances(q, _box(cfg.box), cfg.tol)
    rs.save_csv(out / "resonances.csv")
    census = resonance.imaginary_axis_census(q, min(cfg.depth, resonance.depth_cap(q)))
    result = rs.to_dict()
    result["imaginary_axis"] = [z.imag for z in census]
    try:
        b, c = resonance.fit_region_constants(rs)
        ok, margin = resonance.resonance_free_region(rs, b, c)
        result["region"] = {"b": b, "c": c, "ok": ok, "margin": margin}
    except ValueError as exc:
        result["region"] = {"note": str(exc)}
    return result


def cmd_phaseshifts(cfg: ExperimentConfig, out: Path) -> dict:
    q = resolve_potential(cfg.potential, cfg.x_step)
    ps = phase_shifts(q, cfg.k, cfg.L)
    write_csv(out / "phase_shifts.csv", ("l", "delta", "a_l"),
              zip(range(ps.L + 1), ps.delta.tolist(), ps.support_radius_estimates.tolist()))
    return {"k": ps.k, "L": ps.L, "delta": ps.delta, "support_radius_estimates": ps.support_radius_estimates,
            "extrapolated_radius": ps.extrapolated_radius(),
            "optical_theorem_residual": born.optical_theorem_residual(ps)}


def _cutoffs(text: str) -> list:
    try:
        vals = sorted(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"cutoffs must be a comma list of numbers: {text!r}") from None
    if not vals or vals[0] <= 0:
        raise ValidationError("cutoffs must be positive")
    return vals


def cmd_born_demo(cfg: ExperimentConfig, out: Path) -> dict:
    q = resolve_potential(cfg.potential, cfg.x_step)
    rep = born.born_experiment(q, cfg.q_scale, cfg.noise, _cutoffs(cfg.cutoffs), seed=cfg.seed,
                               xi_step=cfg.xi_step, exact=cfg.exact)
    rep.save_table(out / "born_sweep.csv")
    return asdict(rep)


def cmd_ambiguity(cfg: ExperimentConfig, out: Path) -> dict:
    q1 = resolve_potential(cfg.potential) if cfg.potential else None
    pair = ambiguity.search_ambiguous_pair(q1, cfg.k, cfg.L, cfg.target_phase_gap,
                                           cfg.min_potential_gap, cfg.budget, cfg.seed, cfg.pieces)
    pair.save(out / "ambiguity_pair.json")
    d = pair.to_dict()
    d["target_met"] = pair.target_met
    return d


def roundtrip(q: RadialPotential, methods, x_max: float = 2.0, x_step: float = 0.01,
              k_max: float = 60.0, k_step: float = 0.02, lambda_step: float = 0.1,
              lambda_max: float = 0.0) -> dict:
    """Forward once, invert with every applicable method, compare.

    Krein is skipped (with a note) when the data carry bound states. Errors
    are measured on [0, 0.9a]; cross-method disagreement is the sup of
    |q̂_i - q̂_j| on the same interval.
    """
    data = scattering_data(q, UniformGrid.from_range(k_step, k_max, k_step))
    recovered, per_method, notes = {}, {}, []
    for m in methods:
        if m == "krein" and data.J > 0:
            notes.append(f"krein skipped: J = {data.J} bound state(s), index condition fails")
            continue
        if m == "marchenko":
            q_hat, _, _ = marchenko.invert(data, x_max, x_step)
        elif m == "gl":
            lam_max = lambda_max if lambda_max > 0 else k_max**2
            measure = gelfand_levitan.spectral_from_potential(q, lam_max, lambda_step)
            q_hat, _ = gelfand_levitan.invert(measure, x_max, x_step)
        elif m == "krein":
            q_hat, _, _ = krein.invert(data, x_max, x_step)
        else:
            raise ValidationError(f"unknown method {m!r}")
        recovered[m] = q_hat
        per_method[m] = _compare(q_hat, q, x_max)
    top = ERROR_FRACTION * (q.support_radius if q.support_radius > 0 else x_max)
    x = UniformGrid.from_range(0.0, top, x_step).points
    pairs = {}
    names = list(recovered)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            pairs[f"{a}-{b}"] = float(np.max(np.abs(recovered[a](x) - recovered[b](x))))
    return {"J": data.J, "methods": per_method, "cross_method_sup": pairs, "notes": notes,
            "recovered": recovered}


def cmd_roundtrip(cfg: ExperimentConfig, out: Path) -> dict:
    q = resolve_potential(cfg.potential, cfg.x_step)
    res = roundtrip(q, cfg.method_list(), cfg.x_max, cfg.x_step, cfg.k_max, cfg.k_step,
                    cfg.lambda_step, cfg.lambda_max)
    for m, q_hat in res.pop("recovered").items():
        save_potential(q_hat, out / f"q_{m}.csv")
    return res


HANDLERS = {
    "forward": cmd_forward,
    "invert-marchenko": cmd_invert_marchenko,
    "invert-gl": cmd_invert_gl,
    "invert-krein": cmd_invert_krein,
    "resonances": cmd_resonances,
    "phaseshifts": cmd_phaseshifts,
    "born-demo": cmd_born_demo,
    "ambiguity": cmd_ambiguity,
    "roundtrip": cmd_roundtrip,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one command; returns the exit code (0, 2 or 3)."""
    try:
        cfg.validate()
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        result = HANDLERS[cfg.command](cfg, out)
        write_json(out / f"{cfg.command}.json",
                   {"command": cfg.command, "config": cfg.to_dict(), "result": result})
        return 0
    except ValidationError as exc:
        print(f"isl {cfg.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"isl {cfg.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"isl {cfg.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except IslError as exc:
        print(f"isl {cfg.command}: {exc}", file=sys.stderr)
        return 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isl", description="Inverse scattering on the half line.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--x-step", dest="x_step", type=float)
    p.add_argument("--k-max", dest="k_max", type=float)
    p.add_argument("--k-step", dest="k_step", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("seed", "output_dir", "x_max", "x_step", "k_max", "k_step")}
    try:
        cfg = load_config(args.command, args.config, overrides)
    except ValidationError as exc:
        print(f"isl {args.command}: invalid config: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
