"""SLH triples and the network composition algebra.

A triple ``(S, L, H)`` fixes the input-output behaviour of an open
network component: ``S`` the port scattering matrix, ``L`` the column of
coupling operators, ``H`` the internal Hamiltonian.  Networks are built
from component triples with two products:

* ``concat(G1, G2)``  side-by-side placement, block-diagonal scattering,
  ports of G1 first;
* ``series(G2, G1)``  output of G1 feeds the input of G2, with
  ``S = S2 S1``, ``L = S2 L1 + L2`` and
  ``H = H1 + H2 + Im{L2† S2 L1}`` where ``Im{X} = (X - X†)/2i``.

Both products preserve Hermiticity of H and unitarity of scalar S; this
is asserted after every composition.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .ops import ModeRegistry, OperatorExpr, RegistryMismatchError, pretty

__all__ = [
    "SLHTriple",
    "PortField",
    "concat",
    "series",
    "validate",
    "output_amplitudes",
    "mirror",
    "loss_mirror",
    "drive",
    "phase_shifter",
    "passthrough",
    "beamsplitter",
    "embed_inputs",
    "detune",
    "triple_to_text",
    "PortCountError",
    "ValidationError",
]

HERMITICITY_EPS = 1e-12
UNITARITY_EPS = 1e-12


class PortCountError(ValueError):
    """Series product of triples with different port counts."""


class ValidationError(ValueError):
    """A composed triple failed its structural invariants."""


@dataclass(frozen=True)
class PortField:
    """Coherent amplitude of an input or output field at a port."""
    port: int
    amplitude: complex

    def __post_init__(self):
        a = complex(self.amplitude)
        if not (math.isfinite(a.real) and math.isfinite(a.imag)):
            raise ValueError("port field amplitude must be finite")


class SLHTriple:
    """Immutable (S, L, H) value over a shared mode registry."""

    __slots__ = ("registry", "S", "L", "H")

    def __init__(self, registry: ModeRegistry, S, L, H: OperatorExpr):
        self.registry = registry
        S = tuple(tuple(entry for entry in row) for row in S)
        L = tuple(L)
        n = len(L)
        if len(S) != n or any(len(row) != n for row in S):
            raise ValidationError(
                f"S must be {n}x{n} to match L of length {n}")
        for row in S:
            for entry in row:
                if not entry.registry.compatible(registry):
                    raise RegistryMismatchError("S entry registry mismatch")
        for entry in L:
            if not entry.registry.compatible(registry):
                raise RegistryMismatchError("L entry registry mismatch")
        if not H.registry.compatible(registry):
            raise RegistryMismatchError("H registry mismatch")
        self.S = S
        self.L = L
        self.H = H

    @property
    def n_ports(self) -> int:
        return len(self.L)

    def scalar_S(self) -> np.ndarray:
        """S as a complex matrix; raises if any entry is operator-valued."""
        n = self.n_ports
        out = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.S[i][j].scalar_value()
        return out

    def has_scalar_S(self) -> bool:
        return all(entry.is_scalar() for row in self.S for entry in row)

    def __repr__(self):
        return f"SLHTriple(n_ports={self.n_ports})"


def _zero(reg: ModeRegistry) -> OperatorExpr:
    return OperatorExpr.zero(reg)


def _sc(reg: ModeRegistry, v: complex) -> OperatorExpr:
    return OperatorExpr.scalar(reg, v)


def concat(G1: SLHTriple, G2: SLHTriple) -> SLHTriple:
    """Concatenation product: block-diagonal S, stacked L, H1 + H2.

    Port order is G1's ports followed by G2's.
    """
    if not G1.registry.compatible(G2.registry):
        raise RegistryMismatchError("concat of triples over different registries")
    reg = G1.registry
    n1, n2 = G1.n_ports, G2.n_ports
    n = n1 + n2
    S = [[_zero(reg) for _ in range(n)] for _ in range(n)]
    for i in range(n1):
        for j in range(n1):
            S[i][j] = G1.S[i][j]
    for i in range(n2):
        for j in range(n2):
            S[n1 + i][n1 + j] = G2.S[i][j]
    L = list(G1.L) + list(G2.L)
    return SLHTriple(reg, S, L, G1.H + G2.H)


def series(G2: SLHTriple, G1: SLHTriple) -> SLHTriple:
    """Series product G2 ◁ G1: the outputs of G1 feed the inputs of G2."""
    if not G1.registry.compatible(G2.registry):
        raise RegistryMismatchError("series of triples over different registries")
    if G1.n_ports != G2.n_ports:
        raise PortCountError(
            f"series needs equal port counts, got {G2.n_ports} <| {G1.n_ports}")
    reg = G1.registry
    n = G1.n_ports
    S = [[_zero(reg) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = _zero(reg)
            for k in range(n):
                acc = acc + G2.S[i][k] * G1.S[k][j]
            S[i][j] = acc
    L = []
    for i in range(n):
        acc = G2.L[i]
        for k in range(n):
            acc = acc + G2.S[i][k] * G1.L[k]
        L.append(acc)
    cross = _zero(reg)
    for k in range(n):
        inner = _zero(reg)
        for j in range(n):
            inner = inner + G2.S[k][j] * G1.L[j]
        cross = cross + G2.L[k].adjoint() * inner
    H = G1.H + G2.H + cross.hermitian_part_imag()
    out = SLHTriple(reg, S, L, H)
    _assert_closure(out)
    return out


def _assert_closure(G: SLHTriple) -> None:
    # composition must preserve Hermitian H (the Im{} construction
    # guarantees it; catching a violation here means a bug upstream)
    if not G.H.equals_canonical(G.H.adjoint(), HERMITICITY_EPS):
        raise ValidationError("composed H lost Hermiticity")


def validate(G: SLHTriple) -> list[str]:
    """Structural invariants; returns human-readable violations (empty = valid)."""
    violations: list[str] = []
    n = len(G.L)
    if len(G.S) != n or any(len(row) != n for row in G.S):
        violations.append(f"S shape does not match L length {n}")
        return violations
    if not G.H.equals_canonical(G.H.adjoint(), HERMITICITY_EPS):
        violations.append("H is not Hermitian")
    if G.has_scalar_S():
        s = G.scalar_S()
        err = np.max(np.abs(s.conj().T @ s - np.eye(n))) if n else 0.0
        if err > UNITARITY_EPS:
            violations.append(f"scalar S is not unitary (deviation {err:.3e})")
    return violations


def output_amplitudes(G: SLHTriple, mode_amps, in_fields) -> list[PortField]:
    """Coherent output amplitudes: out_k = L_k(amps) + sum_l S_kl * in_l.

    Valid for affine-linear L and scalar S, which covers every component
    in this package; raises NonlinearExprError / scalar_value errors
    otherwise.  ``mode_amps`` is indexed by mode ordinal; ``in_fields``
    must cover every port.
    """
    n = G.n_ports
    amps = np.asarray(mode_amps, dtype=complex)
    if amps.shape != (len(G.registry),):
        raise ValueError(
            f"need {len(G.registry)} mode amplitudes, got {amps.shape}")
    ins = np.zeros(n, dtype=complex)
    seen = set()
    for f in in_fields:
        if f.port < 0 or f.port >= n:
            raise ValueError(f"input port {f.port} out of range")
        ins[f.port] = complex(f.amplitude)
        seen.add(f.port)
    if len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        raise ValueError(f"input fields missing for ports {missing}")
    s = G.scalar_S()
    out = []
    for k in range(n):
        val = G.L[k].eval_coherent(amps) + complex(np.dot(s[k], ins))
        out.append(PortField(port=k, amplitude=val))
    return out


# ---- primitive components (the building blocks of ring-cavity networks) ----

def mirror(reg: ModeRegistry, mode, rate: float, freq: float = 0.0) -> SLHTriple:
    """Single-port cavity mirror: (1, sqrt(rate)*a, freq*ad*a)."""
    if rate < 0:
        raise ValueError("mirror rate must be >= 0")
    a = OperatorExpr.annihilation(reg, mode)
    H = (a.adjoint() * a).scale(freq) if freq != 0.0 else _zero(reg)
    return SLHTriple(reg, [[_sc(reg, 1.0)]], [a.scale(math.sqrt(rate))], H)


def loss_mirror(reg: ModeRegistry, mode, rate: float) -> SLHTriple:
    """Fictitious mirror that models intrinsic loss: (1, sqrt(rate)*a, 0)."""
    return mirror(reg, mode, rate, 0.0)


def drive(reg: ModeRegistry, amplitude: complex) -> SLHTriple:
    """Coherent displacement of a port's input field: (1, alpha, 0)."""
    return SLHTriple(reg, [[_sc(reg, 1.0)]], [_sc(reg, amplitude)], _zero(reg))


def phase_shifter(reg: ModeRegistry, theta: float) -> SLHTriple:
    """Pure phase: (e^{i theta}, 0, 0)."""
    return SLHTriple(reg, [[_sc(reg, cmath.exp(1j * theta))]],
                     [_zero(reg)], _zero(reg))


def passthrough(reg: ModeRegistry, n: int = 1) -> SLHTriple:
    """n-port identity component (I_n, 0, 0); the series identity."""
    if n < 1:
        raise ValueError("passthrough needs n >= 1")
    S = [[_sc(reg, 1.0) if i == j else _zero(reg) for j in range(n)]
         for i in range(n)]
    return SLHTriple(reg, S, [_zero(reg)] * n, _zero(reg))


def beamsplitter(reg: ModeRegistry, eta: float) -> SLHTriple:
    """Two-port coupler modelling waveguide power loss eta.

    S = [[t, r], [r, -t]] with t = sqrt(1-eta), r = sqrt(eta): a fraction
    eta of the input power is routed to the second (fictitious) port.
    The matrix is orthogonal, so loss accounting stays unitary at the
    network level; the minus sign sits on the fictitious-port reflection,
    where it multiplies only vacuum inputs.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    t = math.sqrt(1.0 - eta)
    r = math.sqrt(eta)
    S = [[_sc(reg, t), _sc(reg, r)], [_sc(reg, r), _sc(reg, -t)]]
    return SLHTriple(reg, S, [_zero(reg), _zero(reg)], _zero(reg))


def embed_inputs(G: SLHTriple, in_fields) -> SLHTriple:
    """Fold coherent input amplitudes into the triple as drive components.

    Equivalent to sending coherent fields into the ports: composes
    G ◁ (drive(b1) ⊞ ... ⊞ drive(bn)) with zero amplitude on unlisted
    ports.  The result has vacuum inputs, which is what the master
    equation oracle and the steady-state lowering assume.
    """
    n = G.n_ports
    amps = [0.0 + 0.0j] * n
    for f in in_fields:
        if f.port < 0 or f.port >= n:
            raise ValueError(f"input port {f.port} out of range")
        amps[f.port] = complex(f.amplitude)
    if all(a == 0 for a in amps):
        return G
    block = drive(G.registry, amps[0])
    for a in amps[1:]:
        block = concat(block, drive(G.registry, a))
    return series(G, block)


def detune(G: SLHTriple, probe_omega: float) -> SLHTriple:
    """Shift into the frame rotating at ``probe_omega``.

    Subtracts probe_omega * sum_i ad_i a_i from H, turning absolute mode
    frequencies into detunings.  Steady states of the resulting triple
    under static drives are the monochromatic response at the probe.
    """
    reg = G.registry
    shift = _zero(reg)
    for m in reg:
        a = OperatorExpr.annihilation(reg, m)
        shift = shift + (a.adjoint() * a)
    return SLHTriple(reg, G.S, G.L, G.H - shift.scale(probe_omega))


def triple_to_text(G: SLHTriple) -> str:
    """Canonical text serialization (S row-major, then L, then H)."""
    lines = [f"ports {G.n_ports}", f"modes {','.join(G.registry.names)}"]
    for i, row in enumerate(G.S):
        for j, entry in enumerate(row):
            lines.append(f"S[{i}][{j}] = {pretty(entry)}")
    for i, entry in enumerate(G.L):
        lines.append(f"L[{i}] = {pretty(entry)}")
    lines.append(f"H = {pretty(G.H)}")
    return "\n".join(lines) + "\n"
