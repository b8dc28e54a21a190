"""First-order radio energy model with free-space / multipath crossover.

All functions return joules and accept numpy arrays for ``d``.
"""

from __future__ import annotations

import numpy as np

from .model import RadioParams


def crossover_distance(radio: RadioParams) -> float:
    return float(np.sqrt(radio.e_fs / radio.e_mp))


def tx_energy(radio: RadioParams, k, d):
    """Energy to transmit ``k`` bits over ``d`` meters.

    Distances up to and including the crossover use the d^2 amplifier,
    longer ones the d^4 amplifier.
    """
    d = np.asarray(d, dtype=float)
    d2 = d * d
    d0 = crossover_distance(radio)
    amp = np.where(d <= d0, radio.e_fs * d2, radio.e_mp * d2 * d2)
    out = k * (radio.e_elec + amp)
    return float(out) if out.ndim == 0 else out


def rx_energy(radio: RadioParams, k) -> float:
    return radio.e_elec * k


def aggregation_energy(radio: RadioParams, k, signals):
    # the CH's own reading counts as one signal
    return radio.e_da * k * signals
