"""Command-line front end.

Subcommands: compose | spectrum | fit | check | oracle.  Exit codes:
0 success, 1 numerical failure, 2 input error.  Every output file starts
with the run manifest so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .ccd import (DEFAULT_NONLINEAR_CRITERION, _parse_number, enhancement_factor,
                  nonlinear_phase, q_factor_threshold, waveguide_length_threshold)
from .fit import FitConfig, anneal, netlist_model
from .lowering import (SingularDriftError, Spectrum, lambda_nm_to_omega,
                       read_spectrum_csv, spectrum, write_spectrum_csv)
from .netlist import NetlistError, compile_netlist, parse
from .oracle import (DegenerateSteadyStateError, converged_steady_state,
                     expectation)
from .ops import OperatorExpr
from .slh import detune, triple_to_text, validate

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INPUT = 2

ORACLE_REL_TOL = 1e-4


@dataclass
class RunManifest:
    """Echoed verbatim into every output header for reproducibility."""

    subcommand: str
    inputs: list[str] = field(default_factory=list)
    overrides: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    seed: int | None = None
    extra: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"slhnet {__version__}", f"command: {self.subcommand}"]
        for p in self.inputs:
            out.append(f"input: {p}")
        for o in self.overrides:
            out.append(f"set: {o}")
        if self.seed is not None:
            out.append(f"seed: {self.seed}")
        out.extend(self.extra)
        for p in self.outputs:
            out.append(f"output: {p}")
        return out


def _parse_grid(spec: str) -> np.ndarray:
    """Grid spec 'start_nm:stop_nm:count'."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("grid must be start_nm:stop_nm:count")
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2])
    if count < 1 or stop <= start or start <= 0:
        raise ValueError("grid must satisfy 0 < start < stop and count >= 1")
    return np.linspace(start, stop, count)


def _parse_overrides(pairs) -> dict[str, complex]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"--set expects NAME=VALUE, got {pair!r}")
        name, _, val = pair.partition("=")
        out[name.strip()] = _parse_number(val.strip())
    return out


def _load_netlist(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValueError(f"cannot read netlist {path!r}: {exc}") from exc
    return parse(text)


def _emit(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---- subcommands ----

def cmd_compose(args) -> int:
    manifest = RunManifest("compose", inputs=[args.netlist],
                           overrides=sorted(args.set or []))
    if args.out:
        manifest.outputs.append(args.out)
    ast = _load_netlist(args.netlist)
    triple = compile_netlist(ast, overrides=_parse_overrides(args.set))
    violations = validate(triple)
    if violations:
        for v in violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_INPUT
    header = "".join(f"# {line}\n" for line in manifest.lines())
    _emit(args.out, header + triple_to_text(triple))
    return EXIT_OK


def _spectrum_for(args, ast, overrides):
    triple = compile_netlist(ast, overrides=overrides)
    grid = _parse_grid(args.grid)
    return triple, grid, spectrum(triple, [], grid, args.port,
                                  n_eff=args.n_eff, unit=args.unit)


def cmd_spectrum(args) -> int:
    manifest = RunManifest("spectrum", inputs=[args.netlist],
                           overrides=sorted(args.set or []),
                           extra=[f"grid: {args.grid}", f"port: {args.port}",
                                  f"n_eff: {args.n_eff:.12g}"])
    overrides = _parse_overrides(args.set)
    if args.params:
        manifest.inputs.append(args.params)
        overrides = {**_read_kv_overrides(args.params), **overrides}
    ast = _load_netlist(args.netlist)
    triple, grid, spec = _spectrum_for(args, ast, overrides)

    oracle_spec = None
    worst_rel = 0.0
    if args.oracle:
        oracle_grid, oracle_power, worst_rel = _oracle_powers(
            triple, grid, args.port, args.n_eff, args.oracle_points)
        oracle_spec = Spectrum(oracle_grid, oracle_power, "watt",
                               spec.reference_power)

    out_path = args.out
    if out_path:
        manifest.outputs.append(out_path)
    lines = manifest.lines()
    if args.oracle:
        lines.append(f"oracle_worst_rel_err: {worst_rel:.6e}")
    _write_spectrum_output(out_path, spec, oracle_spec, lines)

    if out_path and not args.no_plot:
        png = _png_path(out_path)
        from .plots import save_spectrum_figure
        save_spectrum_figure(png, spec, lines, oracle=oracle_spec)
    if args.oracle and worst_rel > ORACLE_REL_TOL:
        print(f"error: oracle disagreement {worst_rel:.3e} exceeds "
              f"{ORACLE_REL_TOL:.0e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _write_spectrum_output(path, spec, oracle_spec, header_lines):
    if oracle_spec is None:
        if path is None:
            import io
            buf = io.StringIO()
            for line in header_lines:
                buf.write(f"# {line}\n")
            col = "power_db" if spec.power_unit == "db" else "power_w"
            buf.write(f"wavelength_nm,{col}\n")
            for lam, p in zip(spec.wavelengths_nm, spec.power):
                buf.write(f"{lam:.12g},{p:.12g}\n")
            sys.stdout.write(buf.getvalue())
        else:
            write_spectrum_csv(path, spec, header_lines)
        return
    # oracle columns appended on the oracle subgrid
    col = "power_db" if spec.power_unit == "db" else "power_w"
    omap = {lam: p for lam, p in zip(oracle_spec.wavelengths_nm,
                                     oracle_spec.power)}
    rows = [f"wavelength_nm,{col},oracle_power_w,oracle_rel_err"]
    ref = spec.reference_power if spec.reference_power > 0 else 1.0
    for lam, p in zip(spec.wavelengths_nm, spec.power):
        if lam in omap:
            model_w = p if spec.power_unit == "watt" else ref * 10 ** (p / 10.0)
            o = omap[lam]
            rel = abs(model_w - o) / max(abs(o), 1e-300)
            rows.append(f"{lam:.12g},{p:.12g},{o:.12g},{rel:.6e}")
        else:
            rows.append(f"{lam:.12g},{p:.12g},,")
    text = "".join(f"# {line}\n" for line in header_lines) + "\n".join(rows) + "\n"
    _emit(path, text)


def _oracle_powers(triple, grid, port, n_eff, n_points):
    """Fock-oracle |<out>|^2 on a small subgrid of the wavelength grid."""
    n_points = max(1, min(n_points, len(grid)))
    idx = np.unique(np.linspace(0, len(grid) - 1, n_points).astype(int))
    sub = grid[idx]
    model = spectrum(triple, [], grid, port, n_eff=n_eff, unit="watt")
    powers = []
    worst = 0.0
    for lam in sub:
        rot = detune(triple, lambda_nm_to_omega(lam, n_eff))
        rho, dims, delta, converged = converged_steady_state(rot)
        if not converged:
            raise DegenerateSteadyStateError(
                f"oracle truncation did not converge at {lam:.6f} nm "
                f"(last delta {delta:.3e})")
        out = expectation(rot.L[port], rho)
        p = abs(out) ** 2
        powers.append(p)
        model_p = float(model.power[np.searchsorted(grid, lam)])
        worst = max(worst, abs(model_p - p) / max(abs(p), 1e-300))
    return sub, np.asarray(powers), worst


def _read_kv_overrides(path) -> dict[str, complex]:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, _, v = line.partition("=")
            out[k.strip()] = _parse_number(v.strip())
    return out


def cmd_fit(args) -> int:
    manifest = RunManifest("fit", inputs=[args.data, args.netlist, args.config],
                           seed=args.seed,
                           extra=[f"port: {args.port}", f"n_eff: {args.n_eff:.12g}"])
    data = read_spectrum_csv(args.data)
    ast = _load_netlist(args.netlist)
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    cfg = _fit_config_from_json(raw, seed=args.seed)
    fixed = {k: float(v) for k, v in raw.get("fixed", {}).items()}
    model = netlist_model(ast, args.port, data.wavelengths_nm,
                          n_eff=args.n_eff, fixed=fixed)
    result = anneal(cfg, data, model)

    report_path = args.out or "fit_report.txt"
    trace_path = report_path.rsplit(".", 1)[0] + "_trace.csv"
    manifest.outputs.extend([report_path, trace_path])
    lines = manifest.lines()
    with open(report_path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        for k in sorted(result.params):
            fh.write(f"{k}={result.params[k]:.12g}\n")
        fh.write(f"objective={result.objective:.12g}\n")
        fh.write(f"evaluations={result.evaluations}\n")
        fh.write(f"converged={str(result.converged).lower()}\n")
    with open(trace_path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(f"# {line}\n")
        fh.write("evaluation,objective\n")
        for i, v in enumerate(result.trace):
            fh.write(f"{i},{v:.12g}\n")
    if not args.no_plot:
        from .plots import save_fit_figure
        model_db = model(result.params)
        save_fit_figure(_png_path(report_path), data, model_db,
                        result.trace, lines)
    print(f"best objective {result.objective:.6g} after "
          f"{result.evaluations} evaluations "
          f"({'converged' if result.converged else 'not converged'})")
    return EXIT_OK


def _fit_config_from_json(raw: dict, seed: int) -> FitConfig:
    free = raw.get("free")
    if not free:
        raise ValueError("fit config needs a non-empty 'free' section")
    guess, bounds, scales = {}, {}, {}
    circular = []
    for name, entry in free.items():
        try:
            guess[name] = float(entry["guess"])
            bounds[name] = (float(entry["min"]), float(entry["max"]))
        except (KeyError, TypeError, ValueError):
            raise ValueError(f"free parameter {name!r} needs guess/min/max")
        if "scale" in entry:
            scales[name] = float(entry["scale"])
        if entry.get("circular"):
            circular.append(name)
    sched = raw.get("schedule", {})
    kwargs = dict(guess=guess, bounds=bounds, scales=scales,
                  circular=tuple(circular), seed=seed)
    for key in ("t0", "cooling", "steps_per_temp", "t_stop_frac",
                "restarts", "restart_threshold", "polish", "polish_maxfev"):
        if key in sched:
            kwargs[key] = sched[key]
    return FitConfig(**kwargs)


def cmd_check(args) -> int:
    manifest = RunManifest("check", extra=[
        f"gamma_nl: {args.gamma_nl:.12g}", f"power: {args.power:.12g}",
        f"length: {args.length:.12g}", f"wavelength: {args.wavelength:.12g}",
        f"q: {args.q:.12g}", f"ring_circumference: {args.ring_circumference:.12g}",
        f"n_eff: {args.n_eff:.12g}", f"criterion: {args.criterion:.12g}"])
    out = []
    for line in manifest.lines():
        out.append(f"# {line}")
    dphi = nonlinear_phase(args.gamma_nl, args.length, args.power) \
        if args.power > 0 else 0.0
    out.append(f"nonlinear_phase_rad={dphi:.12g}")
    verdict = "significant" if dphi >= args.criterion else "negligible"
    out.append(f"waveguide_nonlinearity={verdict}")
    if args.power > 0:
        lstar = waveguide_length_threshold(args.gamma_nl, args.power,
                                           args.criterion)
        out.append(f"length_threshold_m={lstar:.12g}")
    b = enhancement_factor(args.wavelength, args.q, args.n_eff,
                           args.ring_circumference)
    out.append(f"enhancement_factor={b:.12g}")
    if args.power > 0:
        dphi_ring = nonlinear_phase(args.gamma_nl, args.ring_circumference,
                                    b * args.power)
        out.append(f"ring_nonlinear_phase_rad={dphi_ring:.12g}")
        ring_verdict = "significant" if dphi_ring >= args.criterion else "negligible"
        out.append(f"ring_nonlinearity={ring_verdict}")
        qstar = q_factor_threshold(args.wavelength, args.n_eff, args.gamma_nl,
                                   args.power, args.criterion)
        out.append(f"q_threshold={qstar:.12g}")
    else:
        out.append("ring_nonlinearity=negligible")
    _emit(args.out, "\n".join(out) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    manifest = RunManifest("oracle", inputs=[args.netlist],
                           overrides=sorted(args.set or []),
                           extra=[f"at: {args.at:.12g}", f"port: {args.port}",
                                  f"n_eff: {args.n_eff:.12g}"])
    ast = _load_netlist(args.netlist)
    triple = compile_netlist(ast, overrides=_parse_overrides(args.set))
    lam = args.at
    rot = detune(triple, lambda_nm_to_omega(lam, args.n_eff))
    rho, dims, delta, converged = converged_steady_state(rot)
    lin = spectrum(triple, [], np.asarray([lam]), args.port,
                   n_eff=args.n_eff, unit="watt")
    model_p = float(lin.power[0])
    reg = triple.registry
    out = [f"# {line}" for line in manifest.lines()]
    out.append(f"dims={'x'.join(str(d) for d in dims)}")
    out.append(f"truncation_delta={delta:.6e}")
    out.append(f"converged={str(converged).lower()}")
    for m in reg:
        v = expectation(OperatorExpr.annihilation(reg, m), rho)
        out.append(f"mode_{m.name}={v.real:.12g}{'+' if v.imag >= 0 else '-'}"
                   f"{abs(v.imag):.12g}i")
    o = expectation(rot.L[args.port], rho)
    oracle_p = abs(o) ** 2
    rel = abs(model_p - oracle_p) / max(oracle_p, 1e-300)
    out.append(f"oracle_power_w={oracle_p:.12g}")
    out.append(f"model_power_w={model_p:.12g}")
    out.append(f"rel_err={rel:.6e}")
    _emit(args.out, "\n".join(out) + "\n")
    if not converged:
        print("error: oracle truncation did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    if rel > ORACLE_REL_TOL:
        print(f"error: oracle disagreement {rel:.3e} exceeds "
              f"{ORACLE_REL_TOL:.0e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _png_path(path: str) -> str:
    stem = path.rsplit(".", 1)[0] if "." in path.split("/")[-1] else path
    return stem + ".png"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slhnet",
        description="Compose photonic networks, compute transmission "
                    "spectra, cross-check against a Fock-space oracle and "
                    "fit device parameters to measured spectra.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("compose", help="compile a netlist to a canonical triple")
    p.add_argument("netlist")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("spectrum", help="swept steady-state output power")
    p.add_argument("netlist")
    p.add_argument("--params", metavar="FILE", help="key=value overrides file")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.add_argument("--grid", default="1546:1554:401",
                   metavar="START:STOP:COUNT")
    p.add_argument("--port", type=int, default=0, metavar="K")
    p.add_argument("--n-eff", type=float, default=2.85, dest="n_eff")
    p.add_argument("--unit", choices=("db", "watt"), default="db")
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against the Fock oracle")
    p.add_argument("--oracle-points", type=int, default=5)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("fit", help="fit netlist parameters to a spectrum CSV")
    p.add_argument("data", help="spectrum CSV")
    p.add_argument("netlist")
    p.add_argument("--config", required=True, help="fit config JSON")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--n-eff", type=float, default=2.85, dest="n_eff")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH", help="report path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check", help="integrated-photonics design rules")
    p.add_argument("--gamma-nl", type=float, default=150.0, dest="gamma_nl",
                   help="nonlinearity parameter, 1/(W m)")
    p.add_argument("--power", type=float, default=1e-6, help="input power, W")
    p.add_argument("--length", type=float, default=670.0,
                   help="waveguide length, m")
    p.add_argument("--wavelength", type=float, default=1.55e-6,
                   help="mode wavelength, m")
    p.add_argument("--q", type=float, default=3.5e9, help="resonator Q factor")
    p.add_argument("--ring-circumference", type=float, default=np.pi * 6e-6,
                   dest="ring_circumference", help="ring circumference, m")
    p.add_argument("--n-eff", type=float, default=2.85, dest="n_eff")
    p.add_argument("--criterion", type=float,
                   default=DEFAULT_NONLINEAR_CRITERION)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle", help="Fock-oracle cross-check at one wavelength")
    p.add_argument("netlist")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.add_argument("--at", type=float, required=True,
                   metavar="WAVELENGTH_NM")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--n-eff", type=float, default=2.85, dest="n_eff")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_oracle)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (NetlistError, ValueError, OSError, json.JSONDecodeError) as exc:
        # NonlinearExprError and DimensionCapError are ValueErrors: bad input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularDriftError, DegenerateSteadyStateError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
