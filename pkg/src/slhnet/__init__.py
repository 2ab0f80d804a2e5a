"""slhnet: composition, spectra and fitting for linear photonic networks.

The package composes open-network components described by (S, L, H)
triples, lowers linear networks to steady-state transmission spectra,
cross-validates them against a truncated-Fock master-equation oracle,
and fits coupled-cavity device parameters to measured spectra by
simulated annealing.
"""

__version__ = "0.1.0"

from .ccd import (CcdParams, build_ccd, ccd_closed_form, enhancement_factor,
                  kappa_from_transmittance, nonlinear_phase,
                  q_factor_threshold, waveguide_length_threshold)
from .fit import (FitConfig, FitResult, anneal, ccd_model, netlist_model,
                  objective, synth_data)
from .lowering import (LinearModel, SingularDriftError, Spectrum,
                       lambda_nm_to_omega, lower, omega_to_lambda_nm,
                       read_spectrum_csv, spectrum, steady_state,
                       write_spectrum_csv)
from .netlist import NetlistError, compile_netlist, parse, pretty_print
from .ops import ModeId, ModeRegistry, NonlinearExprError, OperatorExpr
from .oracle import (DensityMatrix, converged_steady_state, expectation,
                     liouvillian, steady_state_rho)
from .slh import (PortField, SLHTriple, beamsplitter, concat, detune, drive,
                  embed_inputs, loss_mirror, mirror, output_amplitudes,
                  passthrough, phase_shifter, series, triple_to_text, validate)

__all__ = [
    "__version__",
    # operator algebra
    "ModeId", "ModeRegistry", "OperatorExpr", "NonlinearExprError",
    # slh core
    "SLHTriple", "PortField", "concat", "series", "validate",
    "output_amplitudes", "mirror", "loss_mirror", "drive", "phase_shifter",
    "passthrough", "beamsplitter", "embed_inputs", "detune", "triple_to_text",
    # netlist
    "NetlistError", "parse", "compile_netlist", "pretty_print",
    # lowering
    "LinearModel", "Spectrum", "SingularDriftError", "lower", "steady_state",
    "spectrum", "lambda_nm_to_omega", "omega_to_lambda_nm",
    "read_spectrum_csv", "write_spectrum_csv",
    # oracle
    "DensityMatrix", "liouvillian", "steady_state_rho", "expectation",
    "converged_steady_state",
    # ccd model
    "CcdParams", "build_ccd", "ccd_closed_form", "nonlinear_phase",
    "enhancement_factor", "kappa_from_transmittance",
    "waveguide_length_threshold", "q_factor_threshold",
    # fitter
    "FitConfig", "FitResult", "objective", "anneal", "synth_data",
    "netlist_model", "ccd_model",
]
