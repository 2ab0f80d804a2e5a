"""The coupled-cavity device: two ring cavities linked by two waveguides
with a phase shifter and loss on the feedback path.

``build_ccd`` composes the device from its ten primitive components;
``ccd_closed_form`` writes the resulting five-port triple down directly.
Both must agree exactly, which is the central regression of this package.

Port layout (0-based): 0 monitored output z, 1 fictitious waveguide-loss
port, 2 drive/through port (z'), 3 plant intrinsic loss, 4 controller
intrinsic loss.  Modes: ``a`` plant cavity, ``b`` controller cavity.

The closed form matches the composed product; note two places where a
naive transcription goes wrong: the drive also displaces the controller
mode (a ``(sqrt(kappa)/2i)(b† alpha - b alpha*)`` term), and the cavity
coupling carries ``(kappa/2i)(1 - e^{-i phi} sqrt(1-eta))`` on ``b† a``.
Both follow mechanically from the series rule and are verified against a
matrix-representation oracle in the tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .lowering import C_LIGHT, lambda_nm_to_omega, omega_to_lambda_nm
from .ops import ModeRegistry, OperatorExpr
from .slh import (SLHTriple, beamsplitter, concat, drive, loss_mirror, mirror,
                  passthrough, phase_shifter, series)

__all__ = [
    "CcdParams",
    "build_ccd",
    "ccd_closed_form",
    "nonlinear_phase",
    "enhancement_factor",
    "kappa_from_transmittance",
    "waveguide_length_threshold",
    "q_factor_threshold",
    "lambda_nm_to_omega",
    "omega_to_lambda_nm",
    "read_params_file",
    "write_params_file",
    "DEFAULT_NONLINEAR_CRITERION",
]

# nonlinear phase shift above which material nonlinearity matters;
# configurable because the cutoff is a rule of thumb
DEFAULT_NONLINEAR_CRITERION = 0.1


@dataclass
class CcdParams:
    """Physical parameters of the coupled-cavity device.

    Wavelengths in nm, rates in rad/s, phase in rad, eta dimensionless.
    ``drive_amplitude`` is the coherent input in (rad/s)^(1/2); the linear
    model is power-scale-free so its magnitude only sets the reference.
    """

    lambda_p_nm: float = 1550.0
    lambda_c_nm: float = 1550.0
    kappa: float = 2.0e11
    gamma_p: float = 2.0e9
    gamma_c: float = 2.0e10
    phi: float = 0.5
    eta: float = 0.02
    drive_amplitude: complex = 1.0 + 0.0j
    n_eff: float = 2.85

    def __post_init__(self):
        if self.lambda_p_nm <= 0 or self.lambda_c_nm <= 0:
            raise ValueError("cavity wavelengths must be positive")
        if self.kappa < 0 or self.gamma_p < 0 or self.gamma_c < 0:
            raise ValueError("rates must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.n_eff <= 0:
            raise ValueError("n_eff must be positive")

    @property
    def omega_p(self) -> float:
        return lambda_nm_to_omega(self.lambda_p_nm, self.n_eff)

    @property
    def omega_c(self) -> float:
        return lambda_nm_to_omega(self.lambda_c_nm, self.n_eff)

    def replace(self, **kwargs) -> "CcdParams":
        data = {f: getattr(self, f) for f in _PARAM_FIELDS}
        data.update(kwargs)
        return CcdParams(**data)


_PARAM_FIELDS = ("lambda_p_nm", "lambda_c_nm", "kappa", "gamma_p", "gamma_c",
                 "phi", "eta", "drive_amplitude", "n_eff")


def build_ccd(p: CcdParams) -> SLHTriple:
    """Compose the CCD from its ten primitives.

    The network is the concatenation of four blocks: the feedback path
    (controller top mirror, phase shifter, lossy waveguide, plant top
    mirror), the driven bottom path (drive, plant mirror, controller
    mirror), and the two fictitious intrinsic-loss mirrors.
    """
    reg = ModeRegistry(["a", "b"])
    g_p1 = mirror(reg, "a", p.kappa, p.omega_p)
    g_p2 = mirror(reg, "a", p.kappa, 0.0)
    g_p3 = loss_mirror(reg, "a", p.gamma_p)
    g_c1 = mirror(reg, "b", p.kappa, p.omega_c)
    g_c2 = mirror(reg, "b", p.kappa, 0.0)
    g_c3 = loss_mirror(reg, "b", p.gamma_c)
    g_w = drive(reg, p.drive_amplitude)
    g_phi = phase_shifter(reg, p.phi)
    g_1 = passthrough(reg, 1)
    g_eta = beamsplitter(reg, p.eta)

    feedback = series(concat(g_p2, g_1),
                      series(g_eta, series(concat(g_phi, g_1),
                                           concat(g_c2, g_1))))
    driven = series(g_c1, series(g_p1, g_w))
    return concat(concat(concat(feedback, driven), g_p3), g_c3)


def ccd_closed_form(p: CcdParams) -> SLHTriple:
    """The five-port CCD triple written out directly."""
    reg = ModeRegistry(["a", "b"])
    a = OperatorExpr.annihilation(reg, "a")
    b = OperatorExpr.annihilation(reg, "b")
    ad = a.adjoint()
    bd = b.adjoint()
    one = OperatorExpr.scalar(reg, 1.0)
    zero = OperatorExpr.zero(reg)

    sqk = math.sqrt(p.kappa)
    t = math.sqrt(1.0 - p.eta)
    r = math.sqrt(p.eta)
    eip = cmath.exp(1j * p.phi)
    eim = cmath.exp(-1j * p.phi)
    alpha = complex(p.drive_amplitude)

    def sc(v):
        return OperatorExpr.scalar(reg, v)

    S = [
        [sc(t * eip), sc(r), zero, zero, zero],
        [sc(r * eip), sc(-t), zero, zero, zero],
        [zero, zero, one, zero, zero],
        [zero, zero, zero, one, zero],
        [zero, zero, zero, zero, one],
    ]
    L = [
        (a + b.scale(t * eip)).scale(sqk),
        b.scale(math.sqrt(p.kappa * p.eta) * eip),
        (a + b).scale(sqk) + sc(alpha),
        a.scale(math.sqrt(p.gamma_p)),
        b.scale(math.sqrt(p.gamma_c)),
    ]
    coupling = (bd * a).scale((p.kappa / 2j) * (1.0 - eim * t)) \
        + (ad * b).scale(-(p.kappa / 2j) * (1.0 - eip * t))
    drive_terms = (ad.scale(alpha) - a.scale(alpha.conjugate())).scale(sqk / 2j) \
        + (bd.scale(alpha) - b.scale(alpha.conjugate())).scale(sqk / 2j)
    H = (ad * a).scale(p.omega_p) + (bd * b).scale(p.omega_c) \
        + drive_terms + coupling
    return SLHTriple(reg, S, L, H)


# ---- integrated-photonics design rules ----

def nonlinear_phase(gamma_nl: float, length: float, power: float) -> float:
    """Nonlinear phase accumulated over a waveguide: gamma * length * power.

    gamma_nl in 1/(W m), length in m, power in W; result in rad.
    """
    _require_positive(gamma_nl=gamma_nl, length=length)
    if power < 0:
        raise ValueError("power must be >= 0")
    return gamma_nl * length * power


def enhancement_factor(lambda_m: float, q: float, n_eff: float,
                       ell_r: float) -> float:
    """Circulating-power enhancement of a ring resonator: lambda Q / (pi n_eff l_r)."""
    _require_positive(lambda_m=lambda_m, q=q, n_eff=n_eff, ell_r=ell_r)
    return lambda_m * q / (math.pi * n_eff * ell_r)


def kappa_from_transmittance(transmittance: float, n_eff: float,
                             length: float) -> float:
    """Mirror power transmittance to cavity leakage rate: c T / (2 n_eff l)."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    _require_positive(n_eff=n_eff, length=length)
    return C_LIGHT * transmittance / (2.0 * n_eff * length)


def waveguide_length_threshold(gamma_nl: float, power: float,
                               criterion: float = DEFAULT_NONLINEAR_CRITERION,
                               ) -> float:
    """Waveguide length above which the nonlinear phase exceeds the criterion."""
    _require_positive(gamma_nl=gamma_nl, power=power, criterion=criterion)
    return criterion / (gamma_nl * power)


def q_factor_threshold(lambda_m: float, n_eff: float, gamma_nl: float,
                       power: float,
                       criterion: float = DEFAULT_NONLINEAR_CRITERION) -> float:
    """Resonator Q above which circulating-power nonlinearity matters.

    Combines the nonlinear phase over one circumference with the
    enhancement factor; the ring circumference cancels:
    Q* = criterion * pi * n_eff / (gamma_nl * power * lambda).
    """
    _require_positive(lambda_m=lambda_m, n_eff=n_eff, gamma_nl=gamma_nl,
                      power=power, criterion=criterion)
    return criterion * math.pi * n_eff / (gamma_nl * power * lambda_m)


def _require_positive(**values: float) -> None:
    for name, v in values.items():
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")


# ---- flat key=value parameter files ----

def read_params_file(path) -> CcdParams:
    """Read a flat key=value parameter file ('#' comments allowed)."""
    values: dict[str, complex] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _PARAM_FIELDS:
                raise ValueError(f"line {lineno}: unknown parameter {key!r}")
            try:
                values[key] = _parse_number(val.strip())
            except ValueError:
                raise ValueError(f"line {lineno}: malformed value {val.strip()!r}")
    kwargs = {}
    for key, v in values.items():
        kwargs[key] = v if key == "drive_amplitude" else float(v.real)
    return CcdParams(**kwargs)


def write_params_file(path, p: CcdParams, header_lines=()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for key in _PARAM_FIELDS:
            v = getattr(p, key)
            if key == "drive_amplitude":
                v = complex(v)
                sign = "+" if v.imag >= 0 else "-"
                fh.write(f"{key}={v.real:.12g}{sign}{abs(v.imag):.12g}i\n")
            else:
                fh.write(f"{key}={v:.12g}\n")


def _parse_number(text: str) -> complex:
    """Parse '1.5', '2i' or '1.5+0.5i' style literals."""
    t = text.replace(" ", "")
    if t.endswith("i"):
        body = t[:-1]
        for k in range(1, len(body)):
            if body[k] in "+-" and body[k - 1] not in "eE":
                return complex(float(body[:k]), float(body[k:]))
        return complex(0.0, float(body or "1"))
    return complex(float(t), 0.0)
