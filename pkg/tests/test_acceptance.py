"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v`` (the -v names double as the
per-criterion report); each test also writes its own line to the real
stdout so the verdicts are visible in captured runs.
"""

import cmath
import math
import sys
import time

import numpy as np
import pytest

from conftest import random_params
from slhnet import (CcdParams, FitConfig, ModeRegistry, OperatorExpr,
                    PortField, anneal, build_ccd, ccd_closed_form, ccd_model,
                    detune, embed_inputs, lambda_nm_to_omega, nonlinear_phase,
                    objective, output_amplitudes, passthrough,
                    q_factor_threshold, spectrum, synth_data,
                    waveguide_length_threshold)
from slhnet.cli import main as cli_main
from slhnet.netlist import NetlistError, parse, pretty_print
from slhnet.oracle import expectation, liouvillian, steady_state_rho
from slhnet.slh import SLHTriple, series


def report(criterion: int, label: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {label}"
    if detail:
        line += f" ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    import conftest
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def triples_equal(g1, g2, eps=1e-12):
    ok = g1.n_ports == g2.n_ports
    ok = ok and all(g1.S[i][j].equals_canonical(g2.S[i][j], eps)
                    for i in range(g1.n_ports) for j in range(g1.n_ports))
    ok = ok and all(l1.equals_canonical(l2, eps)
                    for l1, l2 in zip(g1.L, g2.L))
    return ok and g1.H.equals_canonical(g2.H, eps)


def test_criterion_1_composition_reproduces_closed_form():
    """Composing the ten primitives == closed-form triple, 100 draws, <5 s."""
    rng = np.random.default_rng(11)
    t0 = time.monotonic()
    ok = True
    for _ in range(100):
        p = random_params(rng)
        if not triples_equal(build_ccd(p), ccd_closed_form(p), 1e-12):
            ok = False
            break
    elapsed = time.monotonic() - t0
    report(1, "network composition reproduces the closed-form device triple",
           ok and elapsed < 5.0, f"100 draws in {elapsed:.2f}s")


def test_criterion_2_port1_output_field():
    """Port-1 output amplitude, symbolic and at 20 random points, 1e-12."""
    rng = np.random.default_rng(22)
    p = CcdParams(lambda_p_nm=1549.9, lambda_c_nm=1550.2, kappa=1.7e11,
                  gamma_p=2e10, gamma_c=9e10, phi=0.73, eta=0.21,
                  drive_amplitude=0.4 - 0.6j)
    g = build_ccd(p)
    reg = g.registry
    a = OperatorExpr.annihilation(reg, "a")
    b = OperatorExpr.annihilation(reg, "b")
    s_fb = math.sqrt(1 - p.eta) * cmath.exp(1j * p.phi)
    expected_l = (a + b.scale(s_fb)).scale(math.sqrt(p.kappa))
    sym_ok = g.L[0].equals_canonical(expected_l, 1e-12)
    srow = [g.S[0][j].scalar_value() for j in range(5)]
    sym_ok = sym_ok and abs(srow[0] - s_fb) < 1e-12 and \
        abs(srow[1] - math.sqrt(p.eta)) < 1e-12 and \
        all(abs(s) < 1e-15 for s in srow[2:])

    num_ok = True
    for _ in range(20):
        amps = rng.normal(size=2) + 1j * rng.normal(size=2)
        ins = rng.normal(size=5) + 1j * rng.normal(size=5)
        outs = output_amplitudes(g, amps, [PortField(k, ins[k])
                                           for k in range(5)])
        hand = (math.sqrt(p.kappa) * (amps[0] + s_fb * amps[1])
                + s_fb * ins[0] + math.sqrt(p.eta) * ins[1])
        scale = max(1.0, abs(hand))
        if abs(outs[0].amplitude - hand) > 1e-12 * scale:
            num_ok = False
            break
    report(2, "port-1 output field matches the interference formula",
           sym_ok and num_ok)


def test_criterion_3_series_rule_unit_suite():
    """Identity, 500 randomized associativity cases, hand-derived chain."""
    reg = ModeRegistry(["a", "b"])
    rng = np.random.default_rng(33)

    def rand_unitary(n):
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        q, r = np.linalg.qr(z)
        return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))

    def rand_triple(n):
        s = rand_unitary(n)
        sexpr = [[OperatorExpr.scalar(reg, s[i, j]) for j in range(n)]
                 for i in range(n)]
        ann = [OperatorExpr.annihilation(reg, m) for m in reg]
        ls = []
        for _ in range(n):
            e = OperatorExpr.scalar(reg, complex(rng.normal(), rng.normal()))
            for x in ann:
                e = e + x.scale(complex(rng.normal(), rng.normal()))
            ls.append(e)
        h = OperatorExpr.zero(reg)
        for i, xi in enumerate(ann):
            for j, xj in enumerate(ann):
                h = h + (xi.adjoint() * xj).scale(
                    complex(rng.normal(), rng.normal()))
        h = (h + h.adjoint()).scale(0.5)
        return SLHTriple(reg, sexpr, ls, h)

    ident_ok = True
    g = rand_triple(2)
    ident = passthrough(reg, 2)
    ident_ok = triples_equal(series(ident, g), g) and \
        triples_equal(series(g, ident), g)

    assoc_ok = True
    for _ in range(500):
        n = int(rng.integers(1, 4))
        g1, g2, g3 = rand_triple(n), rand_triple(n), rand_triple(n)
        if not triples_equal(series(series(g3, g2), g1),
                             series(g3, series(g2, g1)), 1e-12):
            assoc_ok = False
            break

    # hand expansion of the driven chain (controller <| plant <| drive)
    from slhnet import drive, mirror
    kappa, wp, wc, alpha = 1.3, 0.8, 1.1, 0.3 + 0.7j
    chain = series(mirror(reg, "b", kappa, wc),
                   series(mirror(reg, "a", kappa, wp), drive(reg, alpha)))
    a = OperatorExpr.annihilation(reg, "a")
    b = OperatorExpr.annihilation(reg, "b")
    sqk = math.sqrt(kappa)
    h_hand = (a.adjoint() * a).scale(wp) + (b.adjoint() * b).scale(wc) \
        + (a.adjoint().scale(alpha) - a.scale(alpha.conjugate())).scale(sqk / 2j) \
        + (b.adjoint() * a - a.adjoint() * b).scale(kappa / 2j) \
        + (b.adjoint().scale(alpha) - b.scale(alpha.conjugate())).scale(sqk / 2j)
    l_hand = (a + b).scale(sqk) + OperatorExpr.scalar(reg, alpha)
    hand_ok = chain.H.equals_canonical(h_hand, 1e-12) and \
        chain.L[0].equals_canonical(l_hand, 1e-12)

    report(3, "series rule: identity, associativity x500, hand-derived chain",
           ident_ok and assoc_ok and hand_ok)


def _random_linear_network(rng):
    """Random physical-scale linear network, <=2 modes, embedded weak drive."""
    n_modes = int(rng.integers(1, 3))
    n_ports = int(rng.integers(1, 4))
    names = ["a", "b"][:n_modes]
    reg = ModeRegistry(names)
    ann = [OperatorExpr.annihilation(reg, m) for m in reg]
    w0 = lambda_nm_to_omega(1550.0, 2.85)

    z = rng.normal(size=(n_ports, n_ports)) + 1j * rng.normal(size=(n_ports, n_ports))
    q, r = np.linalg.qr(z)
    s = q @ np.diag(np.diag(r) / np.abs(np.diag(r)))
    sexpr = [[OperatorExpr.scalar(reg, s[i, j]) for j in range(n_ports)]
             for i in range(n_ports)]

    c = (rng.normal(size=(n_ports, n_modes))
         + 1j * rng.normal(size=(n_ports, n_modes))) * math.sqrt(2e11)
    ls = []
    for k in range(n_ports):
        e = OperatorExpr.zero(reg)
        for i, x in enumerate(ann):
            e = e + x.scale(c[k, i])
        ls.append(e)

    h = OperatorExpr.zero(reg)
    for i, xi in enumerate(ann):
        h = h + (xi.adjoint() * xi).scale(w0 + rng.uniform(-4e11, 4e11))
    if n_modes == 2:
        gcoup = complex(rng.normal(), rng.normal()) * 1e11
        h = h + (ann[0].adjoint() * ann[1]).scale(gcoup) \
            + (ann[1].adjoint() * ann[0]).scale(np.conj(gcoup))
    g = SLHTriple(reg, sexpr, ls, h)

    # scale the embedded drive so the mean photon number stays below 0.01
    from slhnet import lower, steady_state
    drive_port = int(rng.integers(0, n_ports))
    probe = w0
    trial = embed_inputs(g, [PortField(drive_port, math.sqrt(2e11))])
    x = steady_state(lower(trial, probe))
    target = 0.05  # |x| = 0.05 -> <n> = 2.5e-3
    scale = target / max(np.max(np.abs(x)), 1e-300)
    amp = math.sqrt(2e11) * scale
    return embed_inputs(g, [PortField(drive_port, amp)]), int(rng.integers(0, n_ports))


def test_criterion_4_oracle_equivalence():
    """Lowering spectra vs Fock oracle, 1e-4 relative, <2 min total."""
    t0 = time.monotonic()
    rng = np.random.default_rng(44)
    n_eff = 2.85
    worst = 0.0
    worst_photon = 0.0

    def check_network(g, port, lams):
        nonlocal worst, worst_photon
        model = spectrum(g, [], np.asarray(lams), port, n_eff=n_eff,
                         unit="watt")
        reg = g.registry
        base_dims = (4,) * len(reg)
        # one truncation-doubling convergence proof at the central point
        from slhnet.oracle import converged_steady_state
        rot_mid = detune(g, lambda_nm_to_omega(lams[len(lams) // 2], n_eff))
        _, _, delta, converged = converged_steady_state(rot_mid, base_dims)
        assert converged and delta < 1e-6
        for lam, p_model in zip(lams, model.power):
            rot = detune(g, lambda_nm_to_omega(lam, n_eff))
            rho = steady_state_rho(liouvillian(rot, base_dims), base_dims)
            nbar = sum(
                expectation(OperatorExpr.annihilation(reg, m).adjoint()
                            * OperatorExpr.annihilation(reg, m), rho).real
                for m in reg)
            worst_photon = max(worst_photon, nbar)
            p_oracle = abs(expectation(rot.L[port], rho)) ** 2
            if p_oracle > 1e-30:
                worst = max(worst, abs(p_model - p_oracle) / p_oracle)

    # the coupled-cavity device itself, weak drive
    p = CcdParams(lambda_p_nm=1549.95, lambda_c_nm=1550.1, kappa=2e11,
                  gamma_p=2e10, gamma_c=1.1e11, phi=0.6, eta=0.08,
                  drive_amplitude=1.0)
    check_network(ccd_closed_form(p), 0, [1549.7, 1550.0, 1550.4])

    for _ in range(20):
        g, port = _random_linear_network(rng)
        check_network(g, port, [1549.9, 1550.0, 1550.1])

    elapsed = time.monotonic() - t0
    ok = worst < 1e-4 and worst_photon < 0.01 and elapsed < 120.0
    report(4, "linear-lowering spectra match the Fock oracle",
           ok, f"worst rel {worst:.2e}, max <n> {worst_photon:.2e}, "
               f"{elapsed:.0f}s")


def test_criterion_5_lossless_power_conservation():
    """Sum of output powers equals input power, 201 points, 1e-9 relative."""
    p = CcdParams(lambda_p_nm=1549.9, lambda_c_nm=1550.1, kappa=2e11,
                  gamma_p=0.0, gamma_c=0.0, phi=0.5, eta=0.0,
                  drive_amplitude=0.8 + 0.3j)
    g = ccd_closed_form(p)
    grid = np.linspace(1548.0, 1552.0, 201)
    total = np.zeros_like(grid)
    for port in range(5):
        total += spectrum(g, [], grid, port, unit="watt").power
    pin = abs(p.drive_amplitude) ** 2
    worst = float(np.max(np.abs(total - pin)) / pin)
    report(5, "lossless device conserves total output power",
           worst < 1e-9, f"worst rel {worst:.2e}")


def test_criterion_6_design_rule_numbers():
    """Published length and Q thresholds from the stated inputs."""
    lstar = waveguide_length_threshold(150.0, 1e-6)  # 1.5e5 /(W km), 1 uW
    length_ok = abs(lstar - 670.0) / 670.0 < 0.01
    qstar = q_factor_threshold(1550e-9, 2.85, 150.0, 1e-6)
    q_ok = abs(qstar - 3.5e9) / 3.5e9 < 0.2
    # consistency: at the threshold length the phase criterion is met
    dphi = nonlinear_phase(150.0, lstar, 1e-6)
    report(6, "design-rule thresholds reproduce the published numbers",
           length_ok and q_ok and abs(dphi - 0.1) < 1e-12,
           f"length {lstar:.1f} m, Q* {qstar:.3e}")


TRUTH = dict(lambda_p_nm=1549.90, lambda_c_nm=1550.15, kappa=2.0e11,
             gamma_p=3.0e10, gamma_c=1.2e11, phi=0.55, eta=0.12)
FREE6 = ("lambda_p_nm", "lambda_c_nm", "kappa", "gamma_p", "gamma_c", "phi")
BOUNDS = dict(lambda_p_nm=(1546.0, 1554.0), lambda_c_nm=(1546.0, 1554.0),
              kappa=(2e10, 2e12), gamma_p=(1e8, 1e12), gamma_c=(1e8, 1e12),
              phi=(0.02, 3.0), eta=(0.0, 0.9))


def _fabrication_guess(rng, free):
    guess = {}
    for k in free:
        if k.startswith("lambda"):
            guess[k] = TRUTH[k] + rng.uniform(-0.2, 0.2)
        else:
            guess[k] = TRUTH[k] * (1 + rng.uniform(-0.2, 0.2))
    return guess


def test_criterion_7_fitter_round_trip():
    """41-point noise-free synthetic spectrum: six free parameters recovered
    within 1%; with all seven free the fitted objective is no worse than
    the truth's.  <2e5 evaluations per fit, <3 min total."""
    t0 = time.monotonic()
    grid = np.linspace(1546.0, 1554.0, 41)

    model6 = ccd_model(0, grid, fixed={"eta": TRUTH["eta"]})
    data6 = synth_data(model6, {k: TRUTH[k] for k in FREE6})
    rng = np.random.default_rng(777)
    cfg6 = FitConfig(guess=_fabrication_guess(rng, FREE6),
                     bounds={k: BOUNDS[k] for k in FREE6},
                     cooling=0.85, steps_per_temp=48, t_stop_frac=1e-7,
                     seed=7001, restarts=5, restart_threshold=1e-10,
                     polish=True)
    res6 = anneal(cfg6, data6, model6)
    six_ok = res6.evaluations < 2 * 10 ** 5 and all(
        abs(res6.params[k] - TRUTH[k]) / abs(TRUTH[k]) < 0.01 for k in FREE6)

    free7 = FREE6 + ("eta",)
    model7 = ccd_model(0, grid)
    data7 = synth_data(model7, TRUTH)
    cfg7 = FitConfig(guess=_fabrication_guess(rng, free7),
                     bounds={k: BOUNDS[k] for k in free7},
                     cooling=0.85, steps_per_temp=48, t_stop_frac=1e-7,
                     seed=7002, restarts=5, restart_threshold=1e-10,
                     polish=True)
    res7 = anneal(cfg7, data7, model7)
    truth_obj = objective(TRUTH, data7, model7)
    seven_ok = res7.evaluations < 2 * 10 ** 5 and \
        res7.objective <= truth_obj + 1e-16

    elapsed = time.monotonic() - t0
    worst6 = max(abs(res6.params[k] - TRUTH[k]) / abs(TRUTH[k]) for k in FREE6)
    report(7, "synthetic round-trip fit recovers the device parameters",
           six_ok and seven_ok and elapsed < 180.0,
           f"worst 1-param error {worst6:.2e}, 7-free objective "
           f"{res7.objective:.1e}, {res6.evaluations}+{res7.evaluations} "
           f"evals, {elapsed:.0f}s")


def test_criterion_8_null_shifts_monotonically_with_phase():
    """Degenerate cavities: the transmission-null wavelength is strictly
    ordered across phi in {0.4, 0.5, 0.6} rad."""
    grid = np.linspace(1549.5, 1551.5, 2001)
    argmins = []
    for phi in (0.4, 0.5, 0.6):
        p = CcdParams(lambda_p_nm=1550.0, lambda_c_nm=1550.0, kappa=2e11,
                      gamma_p=1e9, gamma_c=1e9, phi=phi, eta=0.01)
        power = spectrum(ccd_closed_form(p), [], grid, 0, unit="watt").power
        argmins.append(float(grid[int(np.argmin(power))]))
    ok = argmins[0] < argmins[1] < argmins[2]
    report(8, "interference-null wavelength shifts monotonically with phase",
           ok, f"nulls at {argmins[0]:.4f} < {argmins[1]:.4f} < "
               f"{argmins[2]:.4f} nm")


def test_criterion_9_netlist_round_trip_and_diagnostics(ccd_netlist_path,
                                                        tmp_path, capsys):
    """parse -> print -> parse fixed point; malformed input exits 2 with a
    positioned diagnostic."""
    text = ccd_netlist_path.read_text()
    once = pretty_print(parse(text))
    twice = pretty_print(parse(once))
    fixed_point_ok = once == twice

    bad = tmp_path / "bad.slh"
    bad.write_text("mode a\ncomp m = mirror(a,\nnetwork = m\n")
    code = cli_main(["compose", str(bad)])
    err = capsys.readouterr().err
    diag_ok = code == 2 and "2:" in err

    with pytest.raises(NetlistError) as exc:
        parse("network = mirror(")
    pos_ok = exc.value.line == 1 and exc.value.col > 0

    report(9, "netlist round trip is a fixed point and diagnostics carry "
              "positions", fixed_point_ok and diag_ok and pos_ok)
