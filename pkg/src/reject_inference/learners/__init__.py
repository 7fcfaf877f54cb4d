from .gbt import GbtModel, GbtParams, fit_gbt, fit_gbt_early_stopped
from .iforest import IsolationForestModel, fit_isolation_forest, similarity_score
from .logistic import L1LogisticModel, fit_l1_logistic


def predict_proba(model, X):
    """Predicted probability of default from an L1 logistic or boosted-tree model."""
    return model.predict_proba(X)


__all__ = [
    "GbtModel",
    "GbtParams",
    "IsolationForestModel",
    "L1LogisticModel",
    "fit_gbt",
    "fit_gbt_early_stopped",
    "fit_isolation_forest",
    "fit_l1_logistic",
    "predict_proba",
    "similarity_score",
]
