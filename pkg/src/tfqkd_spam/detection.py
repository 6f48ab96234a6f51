"""M-matrix statistics: ensemble mean and spread, t-tests and the min-p verdict."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .measurement import jittered_pair
from .pauli import DEFAULT_COND_LIMIT, deviation_matrix
from .states import build_prep_matrix

CONSISTENT = "consistent-with-zero"
DETECTED = "error-detected"

# p-value reported when sigma == 0 and M != 0 (only reachable with exact data).
P_FLOOR = 1e-300
N_ELEMENTS = 16

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXITER = 10_000


def _betacf(a, b, x):
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a, b, x, y=None):
    """Regularized incomplete beta ``I_x(a, b)``.

    ``y`` may carry ``1 - x`` computed without cancellation by the caller.
    """
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def t_tail_probability(t, dof):
    """Two-sided tail ``P(|T| >= |t|)`` of Student's t with ``dof`` degrees of freedom."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    t = abs(float(t))
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    t2 = t * t
    x = dof / (dof + t2)
    y = t2 / (dof + t2)
    return betainc_regularized(dof / 2.0, 0.5, x, y)


def t_cutoff(alpha, dof):
    """Two-sided critical value: ``t_tail_probability(t*, dof) == alpha``.

    The root is nudged to the float boundary so that ``|t| > t*`` holds exactly
    when ``t_tail_probability(t, dof) < alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    hi = 1.0
    while t_tail_probability(hi, dof) > alpha:
        hi *= 2.0
    t = brentq(lambda s: t_tail_probability(s, dof) - alpha, 0.0, hi,
               xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    while t_tail_probability(t, dof) < alpha:
        t = math.nextafter(t, 0.0)
    while t_tail_probability(math.nextafter(t, math.inf), dof) >= alpha:
        t = math.nextafter(t, math.inf)
    return t


@dataclass
class TrialEnsemble:
    S1: np.ndarray
    S2: np.ndarray

    def __post_init__(self):
        self.S1 = np.asarray(self.S1, dtype=float)
        self.S2 = np.asarray(self.S2, dtype=float)
        if self.S1.shape != self.S2.shape or self.S1.shape[1:] != (4, 4):
            raise ValueError("S1 and S2 must both have shape (N, 4, 4)")
        if self.S1.shape[0] < 2:
            raise ValueError("an ensemble needs at least 2 trials")
        if not (np.all(np.isfinite(self.S1)) and np.all(np.isfinite(self.S2))):
            raise ValueError("ensemble contains non-finite expectation values")

    @property
    def N(self):
        return self.S1.shape[0]


@dataclass
class EnsembleEstimate:
    mean: np.ndarray
    sigma: np.ndarray
    sigma_trial: np.ndarray
    sigma_phase: np.ndarray
    per_trial: np.ndarray


def ensemble_M(ensemble, a1_selection, a2_selection, plan, resamples, rng,
               cond_limit=DEFAULT_COND_LIMIT):
    """Mean deviation matrix over trials and its per-trial spread.

    The mean uses Alice's nominal A matrices. The spread combines, in
    quadrature, the sample standard deviation across trials and the spread
    from redrawing A's phases ``resamples`` times per trial with the plan's
    jitter model (averaged over trials as a variance).

    Returns:
        EnsembleEstimate with ``sigma`` and its two components.
    """
    A1 = build_prep_matrix(a1_selection, plan, cond_limit=cond_limit)
    A2 = build_prep_matrix(a2_selection, plan, cond_limit=cond_limit)
    per_trial = deviation_matrix(A1, ensemble.S1, A2, ensemble.S2, cond_limit)
    mean = per_trial.mean(axis=0)
    sigma_trial = per_trial.std(axis=0, ddof=1)
    sigma_phase = np.zeros_like(mean)
    if resamples > 1 and plan.phase_jitter_sigma > 0:
        var = np.zeros_like(mean)
        for t in range(ensemble.N):
            A1r, A2r = jittered_pair(a1_selection, a2_selection, plan, resamples, rng)
            Mr = deviation_matrix(A1r, ensemble.S1[t], A2r, ensemble.S2[t], cond_limit)
            var += Mr.var(axis=0, ddof=1)
        sigma_phase = np.sqrt(var / ensemble.N)
    sigma = np.sqrt(sigma_trial ** 2 + sigma_phase ** 2)
    return EnsembleEstimate(mean, sigma, sigma_trial, sigma_phase, per_trial)


@dataclass
class DetectionReport:
    M: np.ndarray
    sigma: np.ndarray
    ci_half_width: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    excludes_zero: np.ndarray
    min_p: float
    verdict: str
    t_cutoff: float
    N: int
    alpha: float
    effective_alpha: float
    bonferroni: bool

    @property
    def detected(self):
        return self.verdict == DETECTED

    def to_dict(self):
        def arr(a):
            return [[_jsonable(v) for v in row] for row in np.asarray(a).tolist()]
        return {
            "M": arr(self.M),
            "sigma": arr(self.sigma),
            "ci_half_width": arr(self.ci_half_width),
            "ci_lower": arr(self.M - self.ci_half_width),
            "ci_upper": arr(self.M + self.ci_half_width),
            "t_stat": arr(self.t_stat),
            "p_value": arr(self.p_value),
            "excludes_zero": np.asarray(self.excludes_zero).tolist(),
            "min_p": self.min_p,
            "verdict": self.verdict,
            "t_cutoff": self.t_cutoff,
            "N": self.N,
            "alpha": self.alpha,
            "effective_alpha": self.effective_alpha,
            "bonferroni": self.bonferroni,
            "formulas": {
                "t_stat": "M_ij / (sigma_ij / sqrt(N))",
                "confidence_interval": "M_ij +/- t*_{N-1} * sigma_ij / sqrt(N)",
                "p_value": "P(|T_{N-1}| >= |t_ij|)",
                "verdict": "error-detected iff min_ij p_ij < effective_alpha",
            },
        }


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def detection_report(M, sigma, N, alpha=0.05, bonferroni=False, atol=1e-12):
    """Per-element t-tests on M and the min-p verdict.

    Elements whose ``sigma`` and ``|M|`` are both at or below ``atol`` are
    treated as exact zeros (t = 0, p = 1) so round-off in structurally zero
    entries cannot trigger a detection. ``sigma <= atol`` with ``|M| > atol``
    gives an infinite t and ``p = P_FLOOR``.
    """
    M = np.asarray(M, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if N < 2:
        raise ValueError("N must be >= 2")
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    effective_alpha = alpha / N_ELEMENTS if bonferroni else alpha
    dof = N - 1
    root_n = math.sqrt(N)
    zero_sigma = sigma <= atol
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = np.where(zero_sigma,
                          np.where(np.abs(M) <= atol, 0.0, np.sign(M) * np.inf),
                          M / (sigma / root_n))
    p = np.array([[t_tail_probability(v, dof) for v in row] for row in t_stat])
    p = np.maximum(p, P_FLOOR)
    t_star = t_cutoff(effective_alpha, dof)
    excludes = np.abs(t_stat) > t_star
    min_p = float(p.min())
    verdict = DETECTED if bool(excludes.any()) else CONSISTENT
    return DetectionReport(
        M=M, sigma=sigma, ci_half_width=t_star * sigma / root_n, t_stat=t_stat,
        p_value=p, excludes_zero=excludes, min_p=min_p, verdict=verdict,
        t_cutoff=t_star, N=N, alpha=alpha, effective_alpha=effective_alpha,
        bonferroni=bonferroni,
    )
