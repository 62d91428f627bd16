"""Batch front-end: configuration ingestion, distance scans and validation runs.

Usage::

    passive-qkd --config run.json --mode optimize --out results/scan
    passive-qkd --grid 0:100:10 --no-baselines
    passive-qkd --validate --seed 7
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
import traceback
from dataclasses import asdict, dataclass, fields
from typing import Callable

import numpy as np

from . import __version__
from .channel import ChannelParams, exact_n_photon, observables
from .decoy import build_problem, build_program, solve_bounds
from .distance import BiasBounds, bias_bounds
from .fock import build_fock_matrix, delta_s
from .keyrate import SearchConfig, active_baseline_rate, key_rate, optimize_parameters, perfect_estimation_rate
from .regions import BASIS_CENTRES, X_LABELS, Quadrature
from .transmitter import SIGNAL, WINDOW_LABELS, IntensityWindows, PhaseDraw, TransmitterParams, output_from_phases

CSV_COLUMNS = [
    "L_km", "K_passive", "K_perfect", "K_active", "y1_low_Z", "e1_up_Z", "phase_err_Z", "Q_s_Z", "QBER_s_Z",
    "nu_t", "dtheta", "dphi", "config_hash", "version",
]


class ConfigError(ValueError):
    """Invalid configuration; the message is anchored to a file and line when one is known."""


class ScanError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    nu_t: float = 0.25
    delta_theta: float = 0.4
    delta_phi: float = 0.4
    v_hi: float = 0.005
    d_hi: float = 0.010
    attenuation_db_km: float = 0.2
    detector_efficiency: float = 0.65
    dark_count: float = 1e-6
    misalignment: float = 0.0
    grid: tuple = (0.0, 100.0, 10.0)
    mode: str = "fixed"
    baselines: bool = True
    f_ec: float = 1.16
    n_cut: int = 3
    quad_outer: int = 24
    quad_inner: int = 24
    quad_phi: int = 64
    search_grid: int = 8
    search_evals: int = 200
    validate_mc: bool = True
    mc_samples: int = 1_000_000
    seed: int = 0
    out: str = "passive_qkd_scan"

    def transmitter(self) -> TransmitterParams:
        return TransmitterParams(self.nu_t, self.delta_phi, self.delta_theta, IntensityWindows(self.v_hi, self.d_hi))

    def channel(self, distance_km: float = 0.0) -> ChannelParams:
        return ChannelParams(
            self.attenuation_db_km, distance_km, self.detector_efficiency, self.dark_count, self.misalignment
        )

    def quadrature(self) -> Quadrature:
        return Quadrature(self.quad_outer, self.quad_inner, self.quad_phi)

    def search(self) -> SearchConfig:
        return SearchConfig(grid=self.search_grid, max_evals=self.search_evals)

    def distances(self) -> list:
        start, stop, step = self.grid
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(count)]

    def canonical(self) -> str:
        d = asdict(self)
        d.pop("out")
        d["grid"] = list(d["grid"])
        return json.dumps(d, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def parse_grid(value) -> tuple:
    """``"START:STOP:STEP"`` or a three-element list to a validated ``(start, stop, step)``."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be START:STOP:STEP")
        try:
            value = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError("grid entries must be numbers") from exc
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ValueError("grid must have three entries")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ValueError("grid entries must be numbers")
    start, stop, step = (float(v) for v in value)
    if start < 0.0:
        raise ValueError("grid start must be nonnegative")
    if not step > 0.0:
        raise ValueError("grid step must be positive")
    if stop < start:
        raise ValueError("empty distance grid (stop < start)")
    return start, stop, step


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    if key == "grid":
        return parse_grid(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError("expected true or false")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError("expected an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("expected a number")
        return float(value)
    if not isinstance(value, str):
        raise ValueError("expected a string")
    return value


def validate_config(cfg: RunConfig) -> list:
    """``(key, message)`` pairs for every semantic problem of ``cfg``."""
    problems = []
    checks: list[tuple[str, Callable]] = [
        ("mode", lambda: cfg.mode in ("fixed", "optimize") or _fail("must be 'fixed' or 'optimize'")),
        ("n_cut", lambda: 1 <= cfg.n_cut <= 8 or _fail("must lie in 1..8")),
        ("f_ec", lambda: cfg.f_ec >= 1.0 or _fail("must be at least 1")),
        ("mc_samples", lambda: cfg.mc_samples >= 1_000_000 or _fail("must be at least 1000000")),
        ("seed", lambda: 0 <= cfg.seed < 2**64 or _fail("must be an unsigned 64-bit integer")),
        ("quad_outer", lambda: cfg.quad_outer >= 4 or _fail("must be at least 4")),
        ("quad_inner", lambda: cfg.quad_inner >= 4 or _fail("must be at least 4")),
        ("quad_phi", lambda: cfg.quad_phi >= 4 or _fail("must be at least 4")),
        ("search_grid", lambda: cfg.search_grid >= 1 or _fail("must be positive")),
        ("search_evals", lambda: cfg.search_evals >= 0 or _fail("must be nonnegative")),
        ("grid", lambda: parse_grid(cfg.grid)),
        ("nu_t", lambda: TransmitterParams(nu_t=cfg.nu_t)),
        ("delta_theta", lambda: TransmitterParams(delta_theta=cfg.delta_theta)),
        ("delta_phi", lambda: TransmitterParams(delta_phi=cfg.delta_phi)),
        ("d_hi", lambda: IntensityWindows(cfg.v_hi, cfg.d_hi)),
        ("attenuation_db_km", lambda: ChannelParams(attenuation_db_km=cfg.attenuation_db_km)),
        ("detector_efficiency", lambda: ChannelParams(detector_efficiency=cfg.detector_efficiency)),
        ("dark_count", lambda: ChannelParams(dark_count=cfg.dark_count)),
    ]
    for key, check in checks:
        try:
            check()
        except ValueError as exc:
            problems.append((key, str(exc)))
    return problems


def _fail(msg: str):
    raise ValueError(msg)


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON configuration, apply command-line overrides and validate everything.

    Raises:
        ConfigError: with messages of the form ``path:line: key: problem``.
    """
    text, raw, source = "", {}, path or "<command line>"
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}:1: cannot read configuration: {exc.strerror}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}:1: configuration must be a JSON object")
    errors, values = [], {}
    for key, value in raw.items():
        line = _line_of(text, key)
        if key not in _FIELD_TYPES:
            errors.append(f"{source}:{line}: {key}: unknown key")
            continue
        try:
            values[key] = _coerce(key, value)
        except ValueError as exc:
            errors.append(f"{source}:{line}: {key}: {exc}")
    for key, value in (overrides or {}).items():
        try:
            values[key] = _coerce(key, value)
        except ValueError as exc:
            errors.append(f"<command line>:0: {key}: {exc}")
    cfg = RunConfig(**values)
    bad_keys = {e.split(": ")[1] for e in errors}
    for key, msg in validate_config(cfg):
        if key in bad_keys:
            continue
        where = f"{source}:{_line_of(text, key)}" if key in raw else "<command line>:0"
        errors.append(f"{where}: {key}: {msg}")
    if errors:
        raise ConfigError("\n".join(errors))
    return cfg


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _where(exc: BaseException) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(frames):
        if os.sep + "passive_qkd" + os.sep in frame.filename:
            return os.path.splitext(os.path.basename(frame.filename))[0]
    return "unknown"


def evaluate_distance(cfg: RunConfig, distance_km: float) -> dict:
    """One scan record; raises :class:`ScanError` naming the module and distance on failure."""
    quad = cfg.quadrature()
    channel = cfg.channel(distance_km)
    try:
        extra = {}
        if cfg.mode == "optimize":
            opt = optimize_parameters(channel, cfg.search(), cfg.transmitter(), n_cut=cfg.n_cut, f_ec=cfg.f_ec,
                                      quad=quad)
            point = opt.point
            extra = {"grid_best": opt.grid_best, "evaluations": opt.evaluations}
        else:
            point = key_rate(cfg.transmitter(), channel, n_cut=cfg.n_cut, f_ec=cfg.f_ec, quad=quad)
        perfect = active = None
        if cfg.baselines:
            perfect = perfect_estimation_rate(point.params, channel, n_cut=cfg.n_cut, f_ec=cfg.f_ec, quad=quad)
            active = active_baseline_rate(channel, f_ec=cfg.f_ec)
    except Exception as exc:  # noqa: BLE001 - reported with location, then re-raised
        raise ScanError(f"{_where(exc)}: L={distance_km:g} km: {type(exc).__name__}: {exc}") from exc
    z = point.terms["Z"]
    row = {
        "L_km": distance_km,
        "K_passive": point.key_rate,
        "K_perfect": perfect.key_rate if perfect else None,
        "K_active": active.key_rate if active else None,
        "y1_low_Z": z.y1,
        "e1_up_Z": z.e1,
        "phase_err_Z": z.phase_error,
        "Q_s_Z": z.gain,
        "QBER_s_Z": z.qber,
        "nu_t": point.params.nu_t,
        "dtheta": point.params.delta_theta,
        "dphi": point.params.delta_phi,
    }
    detail = {"point": point.as_dict(), **extra}
    if perfect:
        detail["perfect"] = perfect.as_dict()
        detail["active_mu"] = active.mu
    return {"row": row, "detail": detail}


def run_scan(cfg: RunConfig, log=None) -> list:
    """Evaluate every distance of the grid and write ``<out>.csv`` and ``<out>.json``."""
    log = log or (lambda msg: None)
    records = []
    for distance in cfg.distances():
        rec = evaluate_distance(cfg, distance)
        log(f"L={distance:g} km  K={rec['row']['K_passive']:.6e}")
        records.append(rec)
    chash, version = cfg.config_hash(), __version__
    directory = os.path.dirname(cfg.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(cfg.out + ".csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            row = dict(rec["row"], config_hash=chash, version=version)
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    sidecar = {
        "version": version,
        "config_hash": chash,
        "config": json.loads(cfg.canonical()),
        "columns": CSV_COLUMNS,
        "records": [dict(rec["row"], detail=rec["detail"]) for rec in records],
    }
    with open(cfg.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return records


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


@dataclass(frozen=True)
class GateResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    seed: int
    gates: tuple

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    @property
    def failed(self) -> list:
        return [g.name for g in self.gates if not g.passed]

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "passed": self.passed, "gates": [asdict(g) for g in self.gates]},
            indent=2, sort_keys=True,
        )


def _bias_invariants(bias: BiasBounds) -> list:
    out = []
    for kind, tables in (("delta", bias.delta), ("delta_tilde", bias.delta_tilde)):
        z, x = tables["Z"], tables["X"]
        checks = {
            f"{kind}_range": bool(np.all((z >= -1e-15) & (z <= 1.0 + 1e-12))),
            f"{kind}_symmetric": bool(np.allclose(z, np.swapaxes(z, 0, 1), atol=1e-15, rtol=0.0)),
            f"{kind}_diagonal_zero": bool(np.all(np.abs(np.einsum("jjn->jn", z)) <= 1e-15)),
            f"{kind}_vacuum_zero": bool(np.all(np.abs(z[:, :, 0]) <= 1e-12)),
            f"{kind}_basis_equal": bool(np.max(np.abs(x - z)) <= 1e-12),
        }
        out.extend(GateResult(name, ok, "") for name, ok in checks.items())
    return out


def run_validate(
    cfg: RunConfig,
    *,
    corrupt_bias: Callable[[BiasBounds], BiasBounds] | None = None,
    distances=(0.0, 50.0, 100.0),
) -> ValidationReport:
    """Run the oracle gates and the invariant suite.

    Args:
        corrupt_bias: test hook that replaces the bias tables before the invariant
            and soundness gates see them.
    """
    from .oracles import closed_form_amplitudes, end_to_end_mc, explicit_mode_simulation, pdf_histogram_check

    params, quad = cfg.transmitter(), cfg.quadrature()
    gates = []
    rng = np.random.default_rng(cfg.seed)

    worst = 0.0
    for _ in range(1000):
        draw = PhaseDraw(*rng.uniform(0.0, 2.0 * math.pi, 4))
        modes = explicit_mode_simulation(draw, 10.0, params.nu_t / 10.0)
        out = output_from_phases(draw, params)
        worst = max(worst, float(np.max(np.abs(modes["w"] - closed_form_amplitudes(
            out.intensity, out.psi, out.theta, out.phi)))))
    gates.append(GateResult("linear_optics", worst < 1e-12, f"max amplitude error {worst:.2e}"))

    ds = float(delta_s(params, quad))
    ok, detail = True, ""
    for x in X_LABELS:
        for j in WINDOW_LABELS:
            for n in range(cfg.n_cut + 1):
                m = build_fock_matrix(params, x, j, n, quad)
                try:
                    m.check()
                except ValueError as exc:
                    ok, detail = False, str(exc)
            if j == SIGNAL:
                lam = np.sort(build_fock_matrix(params, x, j, 1, quad).eigenvalues())
                if np.max(np.abs(lam - [0.5 - ds, 0.5 + ds])) > 1e-10:
                    ok, detail = False, f"single-photon spectrum {lam} vs 1/2 +- {ds}"
    gates.append(GateResult("fock_validity", ok, detail or f"Delta_s = {ds:.6f}"))

    bias = bias_bounds(params, cfg.n_cut, quad)
    if corrupt_bias is not None:
        bias = corrupt_bias(bias)
    gates.extend(_bias_invariants(bias))

    sound, detail = True, []
    for distance in distances:
        channel = cfg.channel(distance)
        try:
            problem = build_problem(params, channel, cfg.n_cut, quad, bias=bias)
        except ValueError as exc:
            sound = False
            detail.append(f"L={distance:g}: {exc}")
            continue
        for m in BASIS_CENTRES:
            exact = [exact_n_photon(params, j, n, m, channel, quad) for j in WINDOW_LABELS for n in range(cfg.n_cut + 1)]
            ys = np.array([e[0] for e in exact])
            es = np.array([e[1] for e in exact])
            for kind, vec in (("yield", ys), ("error", es)):
                bad = build_program(problem, m, kind).violations(vec)
                if bad:
                    sound = False
                    detail.append(f"L={distance:g} {m} {kind}: exact values violate {', '.join(bad)}")
        try:
            bounds = solve_bounds(problem)
        except ValueError as exc:
            sound = False
            detail.append(f"L={distance:g}: {exc}")
            continue
        for m in BASIS_CENTRES:
            y1, e1 = exact_n_photon(params, SIGNAL, 1, m, channel, quad)
            if bounds.y1_low[m] > y1 + 1e-9 or bounds.e1_up[m] < e1 - 1e-9:
                sound = False
                detail.append(f"L={distance:g} {m}: bounds do not bracket the truth")
    gates.append(GateResult("lp_soundness", sound, "; ".join(detail)))

    if cfg.validate_mc:
        hist = pdf_histogram_check(cfg.mc_samples, seed=cfg.seed, nu_t=params.nu_t)
        gates.append(GateResult(
            "pdf_histogram", hist.passed,
            f"max |z| {hist.max_abs_z:.2f} over {hist.cells_tested} cells, KS p {hist.ks_pvalue:.3f}",
        ))
        channel = cfg.channel(0.0)
        mc = end_to_end_mc(params, channel, cfg.mc_samples, seed=cfg.seed)
        an = observables(params, channel, quad)
        worst_z = 0.0
        for m in BASIS_CENTRES:
            for j in WINDOW_LABELS:
                n = mc.counts[m][j]
                for emp, ref in ((mc.gains[m][j], an.q(m, j)), (mc.error_gains[m][j], an.e(m, j))):
                    if n:
                        worst_z = max(worst_z, abs(emp - ref) / math.sqrt(ref * (1.0 - ref) / n))
        gates.append(GateResult("end_to_end_mc", worst_z < 5.0, f"max |z| {worst_z:.2f}"))
    return ValidationReport(cfg.seed, tuple(gates))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="passive-qkd",
        description="Key-rate scans and validation for a fully passive decoy-state BB84 transmitter.",
    )
    ap.add_argument("--config", metavar="PATH", help="JSON configuration file")
    ap.add_argument("--mode", choices=("fixed", "optimize"), help="fixed parameters or per-distance optimisation")
    ap.add_argument("--out", metavar="PREFIX", help="output prefix for <PREFIX>.csv and <PREFIX>.json")
    ap.add_argument("--seed", type=int, help="seed of the Monte-Carlo gates (unsigned 64-bit)")
    ap.add_argument("--ncut", type=int, help="photon-number truncation of the decoy-state programs")
    ap.add_argument("--grid", metavar="START:STOP:STEP", help="distance grid in km")
    ap.add_argument("--no-baselines", action="store_true", help="skip the perfect-estimation and active baselines")
    ap.add_argument("--validate", action="store_true", help="run the oracle and invariant gates instead of a scan")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.ncut is not None:
        overrides["n_cut"] = args.ncut
    if args.grid is not None:
        overrides["grid"] = args.grid
    if args.no_baselines:
        overrides["baselines"] = False
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 2
    if args.validate:
        report = run_validate(cfg)
        print(report.to_json())
        if not report.passed:
            print(f"validation failed: {', '.join(report.failed)}", file=sys.stderr)
            return 1
        return 0
    try:
        run_scan(cfg, log=lambda msg: print(msg, file=sys.stderr))
    except ScanError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {cfg.out}.csv and {cfg.out}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
