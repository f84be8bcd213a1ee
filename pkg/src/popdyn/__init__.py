"""Long-term popularity dynamics: models, training, data tooling, metrics."""

from .baselines import LinearModel, fit_linear, predict_linear
from .data import (
    PopularityHistory,
    TrainingSample,
    build_sample_arrays,
    build_samples,
    citation_distribution,
    filter_training_set,
    ingest_events,
)
from .errors import DataError, ModelFormatError, NumericalError
from .metrics import EvalReport, acc, evaluate, mape
from .model import AttentionParams, AttentionTrace, DlamModel
from .serialize import load_model, model_from_document, model_to_document, save_model
from .synthgen import CorpusSpec, RppParams, generate_corpus, generate_trajectory
from .training import TrainConfig, TrainReport, mape_loss, train

__version__ = "0.1.0"
