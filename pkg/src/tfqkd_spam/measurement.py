"""Charlie's interference measurement and the count-level estimators.

Pulses from Alice and Bob meet at a beam splitter; the detection probability
at D+ / D- per shot is

    p(+/-) = mu * (1 +/- d +/- V cos(theta_A - theta_B + delta)) / 2 + bg

with visibility V, detected mean photon number mu, detector imbalance d,
background bg and an optional Charlie-side offset delta keyed by Alice's label.
Counts over many shots are drawn as aggregate Poisson variables; at mu < 0.01
that is indistinguishable from per-shot Bernoulli sampling.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import FitDegenerate, InvalidModel, NoCounts
from .pauli import deviation_matrix
from .states import build_prep_matrix, jittered_prep_matrices

OPERATING_MU_LIMIT = 0.01


@dataclass(frozen=True)
class InterferometerModel:
    visibility: float = 0.99
    mean_photons_per_pulse: float = 0.005
    detector_imbalance: float = 0.0
    background_rate: float = 0.0
    measurement_offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise InvalidModel(f"visibility {self.visibility} outside [0, 1]")
        if not self.mean_photons_per_pulse > 0.0:
            raise InvalidModel("mean_photons_per_pulse must be > 0")
        if not -1.0 < self.detector_imbalance < 1.0:
            raise InvalidModel("detector_imbalance must lie in (-1, 1)")
        if not self.background_rate >= 0.0:
            raise InvalidModel("background_rate must be >= 0")
        if self.mean_photons_per_pulse > OPERATING_MU_LIMIT:
            warnings.warn(
                f"mean_photons_per_pulse={self.mean_photons_per_pulse} is above "
                f"the single-photon operating regime (<= {OPERATING_MU_LIMIT})",
                stacklevel=2,
            )
        # The formula for p(+/-) goes negative if the fringe overshoots.
        lo = self.mean_photons_per_pulse * (1 - abs(self.detector_imbalance) - self.visibility) / 2
        if lo + self.background_rate < 0:
            raise InvalidModel(
                "visibility + |detector_imbalance| > 1 gives negative click probabilities")

    def measurement_matrix(self):
        """Pauli-basis coefficients of the joint measurement this model implements.

        With preparation vectors ``(1, cos, sin, 0)`` the expectation reduces to
        ``x_II + x_XX cos(dphi)``; only I-I, X-X and Y-Y entries are non-zero.
        """
        total = self.mean_photons_per_pulse + 2 * self.background_rate
        scale = self.mean_photons_per_pulse / total
        x = np.zeros((4, 4))
        x[0, 0] = scale * self.detector_imbalance
        x[1, 1] = x[2, 2] = scale * self.visibility
        return x


@dataclass(frozen=True)
class CountRecord:
    n_plus: int
    n_minus: int
    shots: int

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0 or self.shots < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self):
        return self.n_plus + self.n_minus

    def __add__(self, other):
        return CountRecord(self.n_plus + other.n_plus, self.n_minus + other.n_minus,
                           self.shots + other.shots)


def click_probabilities(theta_a, theta_b, model, alice_label=None):
    """Per-shot click probabilities ``(p_plus, p_minus)`` at D+ and D-.

    Raises:
        InvalidModel: if either probability falls outside [0, 1].
    """
    delta = theta_a - theta_b + model.measurement_offsets.get(alice_label, 0.0)
    fringe = model.visibility * math.cos(delta)
    mu = model.mean_photons_per_pulse
    d = model.detector_imbalance
    p_plus = mu * (1 + d + fringe) / 2 + model.background_rate
    p_minus = mu * (1 - d - fringe) / 2 + model.background_rate
    for p in (p_plus, p_minus):
        if not 0.0 <= p <= 1.0:
            raise InvalidModel(f"click probability {p:.6g} outside [0, 1]")
    return p_plus, p_minus


def implied_expectation(theta_a, theta_b, model, alice_label=None):
    p_plus, p_minus = click_probabilities(theta_a, theta_b, model, alice_label)
    return (p_plus - p_minus) / (p_plus + p_minus)


def simulate_counts(theta_a, theta_b, model, alice_label, shots, rng):
    """Poisson-sample the D+ and D- counts for ``shots`` pulses."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p_plus, p_minus = click_probabilities(theta_a, theta_b, model, alice_label)
    n_plus, n_minus = rng.poisson([shots * p_plus, shots * p_minus])
    return CountRecord(int(n_plus), int(n_minus), int(shots))


def estimate_expectation(c):
    """``(N+ - N-) / (N+ + N-)``; raises NoCounts when nothing clicked."""
    if c.total == 0:
        raise NoCounts("no detections for this preparation pair")
    return (c.n_plus - c.n_minus) / c.total


def theoretical_sigma(S_full, alice_labels, a1_selection, a2_selection, mean_counts,
                      plan, resamples, rng, phase_sigma=None):
    """Monte-Carlo spread of the deviation matrix expected for one trial.

    Each resample redraws every S entry from Poisson counts with
    ``mean_counts`` expected detections and perturbs the nominal A matrices by
    the plan's phase jitter; the element-wise sample standard deviation of the
    resulting M matrices is returned.

    Args:
        S_full: Predicted expectations, shape ``(len(alice_labels), n_bob)``.
        alice_labels: Row labels of ``S_full``.
        a1_selection: Labels forming A1.
        a2_selection: Labels forming A2.
        mean_counts: Expected N+ + N- per cell; ``math.inf`` disables count noise.
        plan: PhasePlan giving nominal phases and jitter model.
        resamples: Number of Monte-Carlo draws (>= 100).
        rng: numpy Generator.
        phase_sigma: Overrides ``plan.phase_jitter_sigma`` when given.
    """
    if not mean_counts > 0:
        raise ValueError("mean_counts must be > 0")
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    S_full = np.clip(np.asarray(S_full, dtype=float), -1.0, 1.0)
    if phase_sigma is not None:
        plan = replace(plan, phase_jitter_sigma=phase_sigma)
    rows = {label: i for i, label in enumerate(alice_labels)}
    if math.isinf(mean_counts):
        S_draw = np.broadcast_to(S_full, (resamples,) + S_full.shape)
    else:
        lam_plus = mean_counts * (1 + S_full) / 2
        lam_minus = mean_counts * (1 - S_full) / 2
        n_plus = rng.poisson(lam_plus, size=(resamples,) + S_full.shape)
        n_minus = rng.poisson(lam_minus, size=(resamples,) + S_full.shape)
        total = n_plus + n_minus
        if np.any(total == 0):
            raise NoCounts("mean_counts too small: a resampled cell has no detections")
        S_draw = (n_plus - n_minus) / total
    S1 = S_draw[:, [rows[label] for label in a1_selection], :]
    S2 = S_draw[:, [rows[label] for label in a2_selection], :]
    A1, A2 = jittered_pair(a1_selection, a2_selection, plan, resamples, rng)
    M = deviation_matrix(A1, S1, A2, S2)
    return M.std(axis=0, ddof=1)


def jittered_pair(a1_selection, a2_selection, plan, size, rng):
    """A1 and A2 stacks sharing one phase-error draw per label."""
    if plan.phase_jitter_sigma == 0:
        A1 = build_prep_matrix(a1_selection, plan)
        A2 = build_prep_matrix(a2_selection, plan)
        return (np.broadcast_to(A1, (size, 4, 4)), np.broadcast_to(A2, (size, 4, 4)))
    union = list(dict.fromkeys(list(a1_selection) + list(a2_selection)))
    batch = plan.sample_jitter_batch(union, size, rng)
    return (jittered_prep_matrices(a1_selection, plan, batch),
            jittered_prep_matrices(a2_selection, plan, batch))


class SinusoidFit(NamedTuple):
    amplitude: float
    phase: float
    offset: float
    residual: float


def fit_sinusoid(drive, S, weights=None, drive_to_phase=1.0):
    """Least-squares fit of ``S(v) = amplitude * cos(k v + phase) + offset``.

    The drive-to-phase scale ``k`` is known, so the fit is linear in
    ``(cos kv, sin kv, 1)``; amplitude and phase come from the first two
    coefficients. ``residual`` is the unweighted RMS misfit.

    Raises:
        FitDegenerate: fewer than 6 samples, or the regressors are rank
            deficient (e.g. every sample at one drive value).
    """
    drive = np.asarray(drive, dtype=float)
    S = np.asarray(S, dtype=float)
    if drive.shape != S.shape or drive.ndim != 1:
        raise ValueError("drive and S must be 1-d arrays of equal length")
    if drive.size < 6:
        raise FitDegenerate(f"need at least 6 samples, got {drive.size}")
    w = np.ones_like(S) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    phi = drive_to_phase * drive
    design = np.column_stack([np.cos(phi), np.sin(phi), np.ones_like(phi)])
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(design * sw[:, None], S * sw, rcond=None)
    if rank < 3:
        raise FitDegenerate("phase scan does not constrain a sinusoid")
    c, s, offset = coef
    amplitude = math.hypot(c, s)
    phase = math.atan2(-s, c)
    residual = float(np.sqrt(np.mean((design @ coef - S) ** 2)))
    return SinusoidFit(amplitude, phase, float(offset), residual)
