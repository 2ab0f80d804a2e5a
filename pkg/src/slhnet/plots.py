"""Figure rendering for spectra and fit reports.

Figures are written next to the delimited output files by the CLI.  The
PNG metadata is pinned so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lowering import Spectrum

__all__ = ["save_spectrum_figure", "save_fit_figure"]


def _png_metadata(manifest_lines):
    return {"Software": "slhnet", "Description": " | ".join(manifest_lines)}


def save_spectrum_figure(path, spec: Spectrum, manifest_lines=(),
                         title: str = "transmission spectrum",
                         oracle: Spectrum | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    db = spec.to_db()
    ax.plot(db.wavelengths_nm, db.power, lw=1.2, label="steady-state model")
    if oracle is not None:
        odb = oracle.to_db()
        ax.plot(odb.wavelengths_nm, odb.power, ls="none", marker="o", ms=3.5,
                alpha=0.7, label="Fock oracle")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("output power (dB)")
    ax.set_title(title, fontsize=10)
    ax.grid(alpha=0.3, lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_png_metadata(manifest_lines))
    plt.close(fig)


def save_fit_figure(path, data: Spectrum, model_db: np.ndarray,
                    trace: np.ndarray, manifest_lines=()) -> None:
    """Two panels: data vs fitted model, and the objective trace."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    d = data.to_db()
    offset = float(np.mean(d.power - model_db))
    ax1.plot(d.wavelengths_nm, d.power, ls="none", marker="o", ms=3.0,
             alpha=0.6, label="data")
    ax1.plot(d.wavelengths_nm, model_db + offset, lw=1.2, label="fit")
    ax1.set_xlabel("wavelength (nm)")
    ax1.set_ylabel("output power (dB)")
    ax1.legend(frameon=False, fontsize=8)
    ax1.grid(alpha=0.3, lw=0.5)

    running = np.minimum.accumulate(trace) if len(trace) else trace
    ax2.semilogy(np.maximum(running, 1e-300), lw=1.0)
    ax2.set_xlabel("objective evaluation")
    ax2.set_ylabel("best objective (dB$^2$)")
    ax2.grid(alpha=0.3, lw=0.5)

    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_png_metadata(manifest_lines))
    plt.close(fig)
