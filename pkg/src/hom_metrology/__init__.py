"""Fisher-information-optimised Hong-Ou-Mandel delay metrology.

Submodules
----------
model        forward coincidence model with loss
fisher       Fisher information, optimal operating point, dynamic range
fringe       phase-fringe extension of the coincidence model
estimation   closed-form MLE/MAP delay estimator and precision bookkeeping
calibration  estimation of loss, pair number, visibility and dip width
bench        seeded synthetic experiments (counts, drift, in/out protocol)
formats      CSV/JSON file formats
cli          the ``hom-metrology`` command
"""
__version__ = "0.1.0"

from .model import ModelParams, OutcomeProbabilities, outcome_probabilities  # noqa: E402
from .fisher import dynamic_range, fisher_information, information_profile, peak_information_delay  # noqa: E402
from .estimation import CoincidenceCounts, DelayEstimate, EstimatorConfig, mle_estimate  # noqa: E402
from .calibration import CalibrationRecord, ScanRecord, calibrate  # noqa: E402
from .bench import DriftConfig, ProtocolConfig, run_protocol, sample_counts  # noqa: E402

__all__ = [
    "ModelParams", "OutcomeProbabilities", "outcome_probabilities",
    "dynamic_range", "fisher_information", "information_profile", "peak_information_delay",
    "CoincidenceCounts", "DelayEstimate", "EstimatorConfig", "mle_estimate",
    "CalibrationRecord", "ScanRecord", "calibrate",
    "DriftConfig", "ProtocolConfig", "run_protocol", "sample_counts",
]
