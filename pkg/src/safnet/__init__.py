"""Self-attention fusion classifier for two-view feature matrices.

Feature embedding, scaled dot-product attention over the two view tokens,
and a sigmoid head, trained from scratch with weighted BCE and Adam, plus a
stratified cross-validation harness, metric suite, and KNN/MLP baselines.
"""
from .baselines import KnnModel, MlpBaseline, knn_fit, knn_predict, mlp_predict_prob, mlp_train
from .dataio import Dataset, IngestionError, SynthSpec, load_feature_csv, synth_generate, write_feature_csv
from .evaluation import (
    ConfusionMatrix,
    FoldPlan,
    MetricReport,
    Metrics,
    ModelSpec,
    aggregate_folds,
    confusion,
    grid_search,
    metrics_from_cm,
    run_experiment,
    stratified_kfold,
)
from .linalg import Matrix, ShapeError, glorot_uniform, matmul, relu, row_softmax
from .model import (
    ForwardTrace,
    ModelDims,
    MultiViewSample,
    SafNetParams,
    classify,
    embed_views,
    forward,
    init_params,
    predict_prob,
    self_attention,
)
from .training import (
    AdamState,
    GradientSet,
    TrainConfig,
    TrainHistory,
    adam_step,
    backward,
    class_weights,
    grad_check,
    train_model,
    weighted_bce,
)

__all__ = [name for name in dir() if not name.startswith("_")]
