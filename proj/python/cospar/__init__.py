"""Preference-based optimization with pairwise and coactive feedback."""

import json

from ._cospar import (
    ActionSpace,
    ConfigError,
    ConflictError,
    CosparError,
    Dimension,
    Engine,
    EngineConfig,
    FeedbackBundle,
    FeedbackSource,
    KernelParams,
    LaplaceFit,
    NotFoundError,
    NumericalError,
    ObjectiveTable,
    ParseError,
    PreferenceModel,
    PreferenceRecord,
    ProtocolError,
    RecordOutcome,
    Rng,
    UnsupportedVersionError,
    ValidationError,
    argmax,
    child_seed,
    coactive_oracle,
    compass_gait_kernel,
    laplace_posterior,
    load_objective_csv,
    log_normal_cdf,
    negative_log_posterior,
    nlp_gradient,
    nlp_hessian,
    normal_cdf,
    normalize_objective,
    pair_likelihood,
    prior_covariance,
    run_file_experiment,
    sample_gp_objective,
    step_length_grid,
    synthetic_2d_kernel,
    write_objective_csv,
)
from ._cospar import SessionService as _SessionService
from ._cospar import default_synthetic_suite as _default_synthetic_suite
from ._cospar import run_suite as _run_suite

__version__ = "0.1.0"


def default_synthetic_suite():
    """The six-cell synthetic suite as a dict."""
    return json.loads(_default_synthetic_suite())


def run_suite(suite, seed, jobs=1):
    """Runs every cell of `suite` (a dict); returns {id: (mean, standard_error)}."""
    return {cell: (mean, se) for cell, mean, se in _run_suite(json.dumps(suite), seed, jobs)}


class SessionService:
    """Session lifecycle over a snapshot directory, with dict requests and responses."""

    def __init__(self, snapshot_dir, presets_file=None):
        self._service = _SessionService(str(snapshot_dir), None if presets_file is None else str(presets_file))

    def create(self, request):
        return json.loads(self._service.create(json.dumps(request)))

    def get(self, session_id):
        return json.loads(self._service.get(session_id))

    def submit_feedback(self, session_id, payload):
        return json.loads(self._service.submit_feedback(session_id, json.dumps(payload)))

    def posterior(self, session_id):
        return json.loads(self._service.posterior(session_id))

    def history(self, session_id):
        return json.loads(self._service.history(session_id))

    def close(self, session_id):
        return json.loads(self._service.close(session_id))

    def export_session(self, session_id):
        return json.loads(self._service.export_session(session_id))

    def import_session(self, snapshot):
        return json.loads(self._service.import_session(json.dumps(snapshot)))

    def list_presets(self):
        return json.loads(self._service.list_presets())

    def ids(self):
        return self._service.ids()
