"""Semi-supervised multi-label event detection.

Small dense networks trained with class-weighted cross-entropy, grown with
self-training or ensemble tri-training over an unlabeled pool, combined by
probability averaging, compressed back into one model by distillation, and
judged by DET-curve area and equal error rate.
"""

__version__ = "0.1.0"

from .data import (
    LabeledDataset,
    UnlabeledPool,
    bootstrap_sample,
    compute_norm_stats,
    apply_norm,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split,
)
from .learner import (
    EarlyStop,
    Model,
    ModelConfig,
    TrainParams,
    compute_class_weights,
    init_model,
    load_model,
    save_model,
    sigmoid_t,
    train,
    weighted_bce_loss,
)
from .semisup import (
    SelfTrainParams,
    TriTrainParams,
    TriTrainResult,
    self_train,
    tri_train,
)
from .ensemble import (
    DistillParams,
    Ensemble,
    distill,
    ensemble_logits,
    ensemble_predict,
    kd_loss,
    load_ensemble,
    save_ensemble,
)
from .metrics import (
    DetCurve,
    MetricsReport,
    auc_det,
    det_curve,
    eer,
    evaluate,
    format_report,
    mean_auc,
)
