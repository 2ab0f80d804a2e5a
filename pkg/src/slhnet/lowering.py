"""Lowering of linear SLH triples to a rotating-frame state-space model.

A network is linear when H is at most quadratic (number-conserving plus a
linear drive part), every L entry is affine in annihilation operators and
S is scalar.  Such a triple lowers to matrices

    Omega  (n_modes x n_modes)  mode frequencies / couplings,
    C      (n_ports x n_modes)  field couplings,
    S0     (n_ports x n_ports)  scalar scattering,
    h_lin  (n_modes,)           linear part of H (creation coefficients),
    L0     (n_ports,)           constant offsets of L (embedded drives),

and the coherent steady state in the frame rotating at the probe solves

    A x + d = 0,  A = -i Omega - C†C / 2,  d = -i h_lin - C† L0 / 2.

Outputs are then ``C x + L0`` (vacuum external inputs; coherent inputs are
embedded into the triple first, see ``slh.embed_inputs``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ops import NonlinearExprError, OperatorExpr, monomial_str
from .slh import SLHTriple

__all__ = [
    "LinearModel",
    "Spectrum",
    "SingularDriftError",
    "lower",
    "steady_state",
    "spectrum",
    "lambda_nm_to_omega",
    "omega_to_lambda_nm",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "DB_FLOOR",
    "DB_CLAMP_RATIO",
]

C_LIGHT = 299792458.0  # m/s

# powers below this fraction of the reference clamp to the dB floor
DB_CLAMP_RATIO = 1e-18
DB_FLOOR = -180.0


class SingularDriftError(ArithmeticError):
    """Steady state does not exist: the drift matrix is singular."""


def lambda_nm_to_omega(lambda_nm: float, n_eff: float) -> float:
    """Probe wavelength to angular frequency, lambda = 2 pi c / (n_eff omega)."""
    if lambda_nm <= 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * math.pi * C_LIGHT / (n_eff * lambda_nm * 1e-9)


def omega_to_lambda_nm(omega: float, n_eff: float) -> float:
    if omega <= 0:
        raise ValueError("angular frequency must be positive")
    return 2.0 * math.pi * C_LIGHT / (n_eff * omega) * 1e9


@dataclass
class LinearModel:
    """State-space data of a lowered linear network (rotating frame)."""

    n_modes: int
    omega: np.ndarray      # (n_modes, n_modes), Hermitian, detuned diagonal
    coupling: np.ndarray   # (n_ports, n_modes)
    s0: np.ndarray         # (n_ports, n_ports), unitary
    h_lin: np.ndarray      # (n_modes,)
    l0: np.ndarray         # (n_ports,)
    probe_omega: float
    mode_names: tuple[str, ...]

    def drift(self) -> np.ndarray:
        return -1j * self.omega - 0.5 * (self.coupling.conj().T @ self.coupling)

    def drive(self) -> np.ndarray:
        return -1j * self.h_lin - 0.5 * (self.coupling.conj().T @ self.l0)

    def drift_condition(self) -> float:
        """Condition number of the drift matrix (reported, never mitigated)."""
        return float(np.linalg.cond(self.drift()))

    def embedded_input_amplitudes(self) -> np.ndarray:
        """Per-port coherent input amplitudes equivalent to the embedded drive."""
        return self.s0.conj().T @ self.l0

    def output_amplitudes(self, x: np.ndarray) -> np.ndarray:
        return self.coupling @ x + self.l0


def _quadratic_parts(H: OperatorExpr, n: int):
    omega = np.zeros((n, n), dtype=complex)
    h = np.zeros(n, dtype=complex)
    for mono, coef in H.terms.items():
        if mono == ():
            continue  # constant energy offset, irrelevant global phase
        degs = [(idx, cre, ann) for idx, cre, ann in mono]
        total_cre = sum(c for _, c, _ in degs)
        total_ann = sum(a for _, _, a in degs)
        if total_cre == 1 and total_ann == 1:
            i = next(idx for idx, c, _ in degs if c == 1)
            j = next(idx for idx, _, a in degs if a == 1)
            omega[i, j] += coef
        elif total_cre == 1 and total_ann == 0:
            h[degs[0][0]] += coef
        elif total_cre == 0 and total_ann == 1:
            pass  # Hermitian partner of the linear term, carried by h
        else:
            raise NonlinearExprError(
                "H is not linear-plus-quadratic; offending monomial: "
                + monomial_str(H.registry, mono),
                monomial_str(H.registry, mono))
    return omega, h


def lower(G: SLHTriple, probe_omega: float = 0.0) -> LinearModel:
    """Lower a linear triple; rejects nonlinear content naming the monomial.

    Mode frequencies on Omega's diagonal are shifted into the frame
    rotating at ``probe_omega`` (detunings).
    """
    n_modes = len(G.registry)
    n_ports = G.n_ports
    s0 = G.scalar_S()  # raises NonlinearExprError on operator entries
    coupling = np.zeros((n_ports, n_modes), dtype=complex)
    l0 = np.zeros(n_ports, dtype=complex)
    for k, entry in enumerate(G.L):
        const, lin = entry.affine_parts()
        l0[k] = const
        coupling[k] = lin
    omega, h = _quadratic_parts(G.H, n_modes)
    herm_err = np.max(np.abs(omega - omega.conj().T)) if n_modes else 0.0
    if herm_err > 1e-9 * max(1.0, float(np.max(np.abs(omega)))):
        raise ValueError(f"quadratic part of H is not Hermitian ({herm_err:.3e})")
    omega = omega - probe_omega * np.eye(n_modes)
    return LinearModel(n_modes=n_modes, omega=omega, coupling=coupling, s0=s0,
                       h_lin=h, l0=l0, probe_omega=probe_omega,
                       mode_names=G.registry.names)


def steady_state(model: LinearModel) -> np.ndarray:
    """Per-mode coherent amplitudes solving A x + d = 0.

    Raises SingularDriftError when the drift matrix is singular (a lossless
    mode exactly on resonance); callers perturb the probe grid instead.
    """
    A = model.drift()
    d = model.drive()
    try:
        x = np.linalg.solve(A, -d)
    except np.linalg.LinAlgError as exc:
        raise SingularDriftError(
            f"drift matrix is singular at probe_omega={model.probe_omega!r}"
        ) from exc
    if not np.all(np.isfinite(x)):
        raise SingularDriftError(
            f"drift solve produced non-finite amplitudes at "
            f"probe_omega={model.probe_omega!r}")
    return x


@dataclass
class Spectrum:
    """Sampled transmission spectrum at one monitored port."""

    wavelengths_nm: np.ndarray
    power: np.ndarray
    power_unit: str            # "db" or "watt"
    reference_power: float     # input power used for dB normalization

    def __post_init__(self):
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.wavelengths_nm.ndim != 1 or self.power.shape != self.wavelengths_nm.shape:
            raise ValueError("wavelengths and powers must be 1-d and matching")
        if len(self.wavelengths_nm) and np.any(np.diff(self.wavelengths_nm) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(self.power)):
            raise ValueError("powers must be finite")
        if self.power_unit not in ("db", "watt"):
            raise ValueError("power_unit must be 'db' or 'watt'")
        if self.power_unit == "watt" and np.any(self.power < 0):
            raise ValueError("linear powers must be >= 0")

    def to_db(self) -> "Spectrum":
        if self.power_unit == "db":
            return self
        ref = self.reference_power if self.reference_power > 0 else 1.0
        db = 10.0 * np.log10(np.maximum(self.power / ref, DB_CLAMP_RATIO))
        return Spectrum(self.wavelengths_nm, db, "db", self.reference_power)


def spectrum(G: SLHTriple, in_fields, wavelengths_nm, monitored_port: int,
             n_eff: float = 2.85, unit: str = "db") -> Spectrum:
    """Swept steady-state output power at one port.

    ``in_fields`` is an iterable of PortField for external coherent inputs
    (may be empty when the drive is embedded in the triple, as the CCD's
    is).  dB output is normalized to the total input power.
    """
    from .slh import embed_inputs

    grid = np.asarray(wavelengths_nm, dtype=float)
    if grid.size == 0:
        raise ValueError("wavelength grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("wavelength grid must be strictly increasing")
    if np.any(grid <= 0):
        raise ValueError("wavelengths must be positive")

    Gd = embed_inputs(G, in_fields or [])
    base = lower(Gd, probe_omega=0.0)
    beta = base.embedded_input_amplitudes()
    reference = float(np.sum(np.abs(beta) ** 2))
    if not 0 <= monitored_port < Gd.n_ports:
        raise ValueError(f"monitored port {monitored_port} out of range")

    n = base.n_modes
    omegas = np.array([lambda_nm_to_omega(lam, n_eff) for lam in grid])
    eye = np.eye(n)
    ctc = 0.5 * (base.coupling.conj().T @ base.coupling)
    d = base.drive()
    A = (-1j * (base.omega[None, :, :] - omegas[:, None, None] * eye[None, :, :])
         - ctc[None, :, :])
    rhs = np.broadcast_to(-d, (len(grid), n))[..., None]
    try:
        x = np.linalg.solve(A, rhs)[..., 0]
    except np.linalg.LinAlgError:
        # find and report the offending grid point
        for i in range(len(grid)):
            try:
                np.linalg.solve(A[i], rhs[i])
            except np.linalg.LinAlgError:
                raise SingularDriftError(
                    f"singular drift at grid index {i} "
                    f"(wavelength {grid[i]!r} nm)") from None
        raise SingularDriftError("drift matrix is singular on the grid") from None
    bad = ~np.all(np.isfinite(x), axis=1)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise SingularDriftError(
            f"singular drift at grid index {idx} "
            f"(wavelength {grid[idx]!r} nm)")
    out = x @ base.coupling[monitored_port] + base.l0[monitored_port]
    power = np.abs(out) ** 2
    if unit == "watt":
        return Spectrum(grid, power, "watt", reference)
    ref = reference if reference > 0 else 1.0
    db = 10.0 * np.log10(np.maximum(power / ref, DB_CLAMP_RATIO))
    return Spectrum(grid, db, "db", reference)


# ---- CSV I/O ----

def write_spectrum_csv(path, spec: Spectrum, header_lines=()) -> None:
    """CSV with 12 significant digits; optional leading '#' header lines."""
    col = "power_db" if spec.power_unit == "db" else "power_w"
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# reference_power = {spec.reference_power:.12g}\n")
        fh.write(f"wavelength_nm,{col}\n")
        for lam, p in zip(spec.wavelengths_nm, spec.power):
            fh.write(f"{lam:.12g},{p:.12g}\n")


def read_spectrum_csv(path) -> Spectrum:
    """Read a spectrum CSV produced by write_spectrum_csv.

    Raises ValueError naming the offending row/column on malformed input.
    """
    wavelengths = []
    powers = []
    unit = None
    reference = 0.0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("reference_power"):
                    try:
                        reference = float(body.split("=", 1)[1])
                    except (IndexError, ValueError):
                        raise ValueError(
                            f"line {lineno}: malformed reference_power header")
                continue
            cells = line.split(",")
            if unit is None:
                if len(cells) < 2 or cells[0] != "wavelength_nm" or \
                        cells[1] not in ("power_db", "power_w"):
                    raise ValueError(
                        f"line {lineno}: expected header "
                        f"'wavelength_nm,power_db' or 'wavelength_nm,power_w'")
                unit = "db" if cells[1] == "power_db" else "watt"
                continue
            if len(cells) < 2:
                raise ValueError(f"line {lineno}: expected 2 columns, got {len(cells)}")
            try:
                wavelengths.append(float(cells[0]))
            except ValueError:
                raise ValueError(f"line {lineno}, column 1: not a number: {cells[0]!r}")
            try:
                powers.append(float(cells[1]))
            except ValueError:
                raise ValueError(f"line {lineno}, column 2: not a number: {cells[1]!r}")
    if unit is None:
        raise ValueError("no CSV header found")
    return Spectrum(np.asarray(wavelengths), np.asarray(powers), unit, reference)
