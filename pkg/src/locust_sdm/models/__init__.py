"""From-scratch classifiers behind a shared score/classify contract."""

from .api import classify, model_margin, predict_proba
from .boosting import BoostedEnsemble, gbm_fit
from .forest import Forest, rf_fit
from .linear import LinearModel, logistic_loss_grad, lr_fit
from .maxent import MaxentModel, maxent_fit, maxent_objective
from .ocsvm import OcsvmModel, ocsvm_fit
from .serialize import load_model, save_model
from .trees import TreeNode

__all__ = [
    "BoostedEnsemble",
    "Forest",
    "LinearModel",
    "MaxentModel",
    "OcsvmModel",
    "TreeNode",
    "classify",
    "gbm_fit",
    "load_model",
    "logistic_loss_grad",
    "lr_fit",
    "maxent_fit",
    "maxent_objective",
    "model_margin",
    "ocsvm_fit",
    "predict_proba",
    "rf_fit",
    "save_model",
]
