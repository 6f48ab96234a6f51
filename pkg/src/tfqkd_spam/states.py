"""Preparation labels, phase plans and the Bloch vectors Alice and Bob send.

Fixed-phase states are weak coherent pulses distinguished only by phase and
map to ``(1, cos theta, sin theta, 0)``. The phase-randomized ``-Z`` state maps
to ``(1, 0, 0, -1)``; physically its phase steps through ``n*pi/2`` in equal
sub-batches, which averages the X and Y components away.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSet, SingularMatrix
from .pauli import DEFAULT_COND_LIMIT, invert_transpose

PLUS_X = "+X"
MINUS_X = "-X"
PLUS_Y = "+Y"
MINUS_Y = "-Y"
MINUS_Z = "-Z"

STANDARD_PHASES = {
    PLUS_X: 0.0,
    MINUS_X: math.pi,
    PLUS_Y: math.pi / 2,
    MINUS_Y: 3 * math.pi / 2,
}
Z_SLOT_PHASES = tuple(n * math.pi / 2 for n in range(4))

JITTER_MODES = ("common", "independent")


def bloch_from_phase(theta):
    """Preparation vector of a fixed-phase pulse: ``(1, cos theta, sin theta, 0)``."""
    return np.array([1.0, math.cos(theta), math.sin(theta), 0.0])


def bloch_randomized():
    """Preparation vector of the phase-randomized ``-Z`` state."""
    return np.array([1.0, 0.0, 0.0, -1.0])


@dataclass(frozen=True)
class PhasePlan:
    """Nominal phases, calibration jitter and injected errors for Alice.

    ``jitter_mode`` decides how the per-trial calibration error is drawn:
    ``"common"`` shifts every fixed-phase label by the same amount in a trial
    (a drift of the whole voltage-to-phase curve), ``"independent"`` draws a
    separate value for each label.
    """

    nominal_phases: dict = field(default_factory=lambda: dict(STANDARD_PHASES))
    phase_jitter_sigma: float = 0.029
    correlated_offsets: dict = field(default_factory=dict)
    jitter_mode: str = "common"

    def __post_init__(self):
        if not self.phase_jitter_sigma >= 0:
            raise ValueError("phase_jitter_sigma must be >= 0")
        if self.jitter_mode not in JITTER_MODES:
            raise ValueError(f"jitter_mode must be one of {JITTER_MODES}")
        if MINUS_Z in self.nominal_phases:
            raise ValueError("-Z is phase-randomized and has no nominal phase")
        wrapped = {}
        for label, phase in self.nominal_phases.items():
            if not math.isfinite(phase):
                raise ValueError(f"nominal phase for {label} is not finite")
            wrapped[label] = phase % (2 * math.pi)
        object.__setattr__(self, "nominal_phases", wrapped)
        for label, offset in self.correlated_offsets.items():
            if not self.is_known(label):
                raise ValueError(f"correlated offset for unknown label {label!r}")
            if not math.isfinite(offset):
                raise ValueError(f"correlated offset for {label} is not finite")

    def is_known(self, label):
        return label == MINUS_Z or label in self.nominal_phases

    def offset(self, label):
        return self.correlated_offsets.get(label, 0.0)

    def sample_jitter(self, labels, rng):
        """Draw one trial's calibration error for each label in ``labels``."""
        labels = list(labels)
        if self.jitter_mode == "common":
            shared = rng.normal(0.0, self.phase_jitter_sigma)
            return {label: shared for label in labels}
        draws = rng.normal(0.0, self.phase_jitter_sigma, size=len(labels))
        return dict(zip(labels, draws.tolist()))

    def sample_jitter_batch(self, labels, size, rng):
        """Vectorized ``sample_jitter``: maps label -> array of ``size`` draws."""
        labels = list(labels)
        if self.jitter_mode == "common":
            shared = rng.normal(0.0, self.phase_jitter_sigma, size=size)
            return {label: shared for label in labels}
        draws = rng.normal(0.0, self.phase_jitter_sigma, size=(len(labels), size))
        return dict(zip(labels, draws))


def apply_error_model(plan, label, trial_jitter=0.0, slot=0):
    """True emitted phase for ``label``: nominal + correlated offset + jitter.

    For ``-Z`` the nominal phase is the slot phase ``slot * pi/2``; the same
    offset is added to every slot.
    """
    if label == MINUS_Z:
        nominal = Z_SLOT_PHASES[slot]
    else:
        nominal = plan.nominal_phases[label]
    return nominal + plan.offset(label) + trial_jitter


def prep_vector(label, plan, use_true_phases=False, jitter=0.0):
    if label == MINUS_Z:
        return bloch_randomized()
    if use_true_phases:
        return bloch_from_phase(apply_error_model(plan, label, jitter))
    return bloch_from_phase(plan.nominal_phases[label])


def build_prep_matrix(labels, plan, use_true_phases=False, jitter=None,
                      check_invertible=True, cond_limit=DEFAULT_COND_LIMIT):
    """Stack four preparations as the columns of a 4x4 matrix.

    Args:
        labels: Four distinct preparation labels.
        plan: PhasePlan supplying nominal phases and offsets.
        use_true_phases: Include correlated offsets and ``jitter``; otherwise
            return the nominal matrix Alice believes she prepared.
        jitter: Optional mapping label -> phase error in radians.
        check_invertible: Reject sets that cannot serve as an A matrix.
        cond_limit: Condition-number bound used by that check.

    Raises:
        DegenerateSet: if ``check_invertible`` and the columns are dependent.
    """
    labels = list(labels)
    if len(labels) != 4 or len(set(labels)) != 4:
        raise ValueError(f"need four distinct labels, got {labels}")
    for label in labels:
        if not plan.is_known(label):
            raise ValueError(f"unknown preparation label {label!r}")
    jitter = jitter or {}
    A = np.column_stack([
        prep_vector(label, plan, use_true_phases, jitter.get(label, 0.0))
        for label in labels
    ])
    if check_invertible:
        try:
            invert_transpose(A, cond_limit)
        except SingularMatrix as exc:
            raise DegenerateSet(
                f"preparations {labels} are linearly dependent ({exc})",
                condition=exc.condition,
            ) from None
    return A


def jittered_prep_matrices(labels, plan, jitter_batch):
    """Nominal matrices for ``labels`` perturbed by a batch of phase errors.

    ``jitter_batch`` maps label -> array of shape ``(size,)``; returns an array
    of shape ``(size, 4, 4)``. Correlated offsets are *not* applied: this is
    Alice's uncertain knowledge of what she sent, not what she sent.
    """
    columns = []
    size = None
    for label in labels:
        if label == MINUS_Z:
            columns.append(None)
            continue
        theta = plan.nominal_phases[label] + np.asarray(jitter_batch[label])
        size = theta.shape[0]
        columns.append(np.stack([np.ones_like(theta), np.cos(theta),
                                 np.sin(theta), np.zeros_like(theta)], axis=-1))
    if size is None:
        raise ValueError("jitter batch has no fixed-phase labels")
    out = np.empty((size, 4, 4))
    for i, col in enumerate(columns):
        out[:, :, i] = bloch_randomized() if col is None else col
    return out
