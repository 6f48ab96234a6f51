"""The four end-to-end operations behind the command-line interface.

``simulate`` and ``detect`` talk only through files, so measured count data can
be fed to ``detect`` in place of a simulated ensemble.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import files, streams
from .calibration import run_calibration
from .detection import detection_report, ensemble_M
from .measurement import theoretical_sigma
from .pauli import deviation_matrix, predict_expectations
from .protocol import assemble_expectations, run_experiment
from .states import (
    MINUS_Z,
    STANDARD_PHASES,
    apply_error_model,
    bloch_from_phase,
    bloch_randomized,
    build_prep_matrix,
)

TRANSCRIPT = "transcript.jsonl"
ENSEMBLE = "ensemble.json"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
PREDICTION_JSON = "prediction.json"
PREDICTION_CSV = "prediction.csv"
CALIBRATION_JSON = "calibration.json"


def _out(out_dir):
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def simulate(config, out_dir, workers=None):
    """Run the three-party experiment and write the transcript and ensemble."""
    out = _out(out_dir)
    schedule = config.schedule()
    plan = config.plan()
    schedule.check_invertible(plan)
    results = run_experiment(schedule, plan, config.model(), config.seed,
                             workers=workers or config.workers)
    S1, S2 = assemble_expectations(results, schedule)
    files.write_transcript(out / TRANSCRIPT, results, config.seed)
    files.write_ensemble(out / ENSEMBLE, results, schedule, S1, S2)
    return results


@dataclass
class Detection:
    report: object
    estimate: object


def analyse(ensemble, a1_selection, a2_selection, config):
    plan = config.plan()
    rng = streams.substream(config.seed, streams.ANALYSIS, 0)
    est = ensemble_M(ensemble, a1_selection, a2_selection, plan, config.resamples, rng,
                     cond_limit=config.condition_limit)
    report = detection_report(est.mean, est.sigma, ensemble.N, alpha=config.alpha,
                              bonferroni=config.bonferroni)
    return Detection(report, est)


def detect(ensemble_path, config, out_dir):
    """M matrix, uncertainties, t-tests and verdict for an ensemble file."""
    out = _out(out_dir)
    doc = files.read_ensemble(ensemble_path)
    result = analyse(doc.ensemble(), doc.a1_selection, doc.a2_selection, config)
    extra = {
        "bob_tokens": doc.bob_tokens,
        "a1_selection": doc.a1_selection,
        "a2_selection": doc.a2_selection,
        "sigma_trial": result.estimate.sigma_trial.tolist(),
        "sigma_phase": result.estimate.sigma_phase.tolist(),
        "config": config.model_dump(),
    }
    files.write_report(out / REPORT_JSON, out / REPORT_CSV, result.report, extra)
    return result.report


def true_prep_vectors(config):
    """Columns of what Alice actually emits, as Charlie's device sees them.

    Correlated preparation offsets and Charlie-side measurement offsets both
    rotate the fixed-phase vectors; the -Z vector is unaffected by either since
    every slot shifts by the same amount.
    """
    plan = config.plan()
    cols = []
    for label in config.alice_labels:
        if label == MINUS_Z:
            cols.append(bloch_randomized())
        else:
            theta = apply_error_model(plan, label)
            theta += config.measurement_offsets_rad.get(label, 0.0)
            cols.append(bloch_from_phase(theta))
    return np.column_stack(cols)


def bob_prep_matrix(config):
    return np.column_stack([bloch_from_phase(STANDARD_PHASES[b]) for b in config.bob_labels])


def predicted_expectations(config):
    return predict_expectations(true_prep_vectors(config), config.model().measurement_matrix(),
                                bob_prep_matrix(config))


def predict(config, out_dir=None):
    """Noise-free M and its expected per-trial spread for the configured errors."""
    plan = config.plan()
    schedule = config.schedule()
    schedule.check_invertible(plan)
    S_full = predicted_expectations(config)
    rows = {label: i for i, label in enumerate(config.alice_labels)}
    S1 = S_full[[rows[a] for a in config.a1_selection]]
    S2 = S_full[[rows[a] for a in config.a2_selection]]
    A1 = build_prep_matrix(config.a1_selection, plan, cond_limit=config.condition_limit)
    A2 = build_prep_matrix(config.a2_selection, plan, cond_limit=config.condition_limit)
    M_th = deviation_matrix(A1, S1, A2, S2, config.condition_limit)
    model = config.model()
    mean_counts = config.shots_per_pair * (model.mean_photons_per_pulse
                                           + 2 * model.background_rate)
    rng = streams.substream(config.seed, streams.ANALYSIS, 1)
    dM_th = theoretical_sigma(S_full, config.alice_labels, config.a1_selection,
                              config.a2_selection, mean_counts, plan, config.resamples, rng)
    doc = {
        "M_th": M_th.tolist(),
        "dM_th": dM_th.tolist(),
        "S_full": S_full.tolist(),
        "alice_labels": list(config.alice_labels),
        "bob_tokens": list(schedule.bob_tokens),
        "mean_counts_per_cell": mean_counts,
        "max_abs_M_th": float(np.abs(M_th).max()),
        "config": config.model_dump(),
    }
    if out_dir is not None:
        out = _out(out_dir)
        files.write_json(out / PREDICTION_JSON, doc)
        files.write_matrix_csv(out / PREDICTION_CSV, {"M_th": M_th, "dM_th": dM_th})
    return M_th, dM_th


def calibrate(config, out_dir=None):
    """Simulated phase scans, sinusoid fits and their scatter."""
    result = run_calibration(
        config.model(), config.plan(), config.calibration_bob_phases_rad,
        config.calibration_scan_points, config.calibration_repetitions,
        config.calibration_shots_per_point, config.drive_to_phase_rad_per_volt,
        config.seed, noiseless=config.calibration_noiseless,
    )
    if out_dir is not None:
        out = _out(out_dir)
        doc = result.to_dict()
        doc["config"] = config.model_dump()
        files.write_json(out / CALIBRATION_JSON, doc)
        for c, curve in enumerate(result.curves):
            path = out / f"scan_curve{c}.csv"
            with open(path, "w") as fh:
                fh.write("repetition,drive_volts,S\n")
                for r in range(result.scans.shape[1]):
                    for v, s in zip(result.drive, result.scans[c, r]):
                        fh.write(f"{r},{v!r},{float(s)!r}\n")
    return result

