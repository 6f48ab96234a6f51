"""Phase-scan calibration of Alice's modulator.

Bob holds a fixed phase while Alice sweeps her drive over one full period;
each curve S(v) is fit to a sinusoid and the fitted phase is tracked across
repeated scans. The scan-to-scan scatter of that phase is the calibration
uncertainty that feeds the phase plan.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .measurement import (
    estimate_expectation,
    fit_sinusoid,
    implied_expectation,
    simulate_counts,
)


def wrap_phase(phi):
    """Map an angle into (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass
class CurveSummary:
    bob_phase: float
    amplitude_mean: float
    amplitude_std: float
    phase_mean: float
    phase_std: float
    offset_mean: float
    offset_std: float
    recovered_bob_phase: float


@dataclass
class CalibrationResult:
    drive: np.ndarray
    scans: np.ndarray
    fits: list
    curves: list
    pooled_phase_std: float

    def to_dict(self):
        return {
            "drive_volts": self.drive.tolist(),
            "curves": [vars(c) for c in self.curves],
            "fits": [[f._asdict() for f in row] for row in self.fits],
            "pooled_phase_std_rad": self.pooled_phase_std,
        }


def run_calibration(model, plan, bob_phases, points, repetitions, shots_per_point,
                    drive_to_phase, seed, noiseless=False):
    """Simulate and fit ``repetitions`` scans for each of Bob's phases.

    In noiseless mode the scans use exact expectation values and no phase
    jitter, so the fit recovers Bob's phases to round-off.
    """
    period = 2 * math.pi / drive_to_phase
    drive = np.arange(points) * period / points
    scans = np.empty((len(bob_phases), repetitions, points))
    fits = []
    for c, theta_b in enumerate(bob_phases):
        row = []
        for r in range(repetitions):
            if noiseless:
                jitter = 0.0
            else:
                jitter = streams.substream(seed, streams.CALIBRATION, c, r, 0).normal(
                    0.0, plan.phase_jitter_sigma)
            for i, v in enumerate(drive):
                theta_a = drive_to_phase * v + jitter
                if noiseless:
                    scans[c, r, i] = implied_expectation(theta_a, theta_b, model)
                else:
                    rng = streams.substream(seed, streams.CALIBRATION, c, r, i + 1)
                    counts = simulate_counts(theta_a, theta_b, model, None,
                                             shots_per_point, rng)
                    scans[c, r, i] = estimate_expectation(counts)
            row.append(fit_sinusoid(drive, scans[c, r], drive_to_phase=drive_to_phase))
        fits.append(row)

    curves = []
    variances = []
    for c, theta_b in enumerate(bob_phases):
        phases = np.array([f.phase for f in fits[c]])
        centre = math.atan2(np.sin(phases).mean(), np.cos(phases).mean())
        dev = np.array([wrap_phase(p - centre) for p in phases])
        phase_mean = wrap_phase(centre + dev.mean())
        var = dev.var(ddof=1)
        variances.append(var)
        amps = np.array([f.amplitude for f in fits[c]])
        offs = np.array([f.offset for f in fits[c]])
        curves.append(CurveSummary(
            bob_phase=float(theta_b),
            amplitude_mean=float(amps.mean()), amplitude_std=float(amps.std(ddof=1)),
            phase_mean=phase_mean, phase_std=float(math.sqrt(var)),
            offset_mean=float(offs.mean()), offset_std=float(offs.std(ddof=1)),
            recovered_bob_phase=(-phase_mean) % (2 * math.pi),
        ))
    pooled = float(math.sqrt(np.mean(variances)))
    return CalibrationResult(drive, scans, fits, curves, pooled)
