"""From-scratch regression/classification base learners with a shared predict contract."""

from .base import FAMILIES, DimensionError, LearnerSpec, RegressionModel, SpecError
from .gp import GPModel, IllConditionedKernelError, fit_gp, rbf
from .knn import KNNModel, fit_knn
from .linear import LinearModel, SingularDesignError, fit_linear, lasso_grid, lasso_path, soft_threshold
from .logistic import ClassifierModel, ConvergenceError, fit_classifier
from .trees import BoostingModel, ForestModel, Tree, TreeModel, fit_boosting, fit_forest, fit_tree
from .tuning import cross_validate, fit, fold_ids

__all__ = [
    "FAMILIES", "LearnerSpec", "RegressionModel", "SpecError", "DimensionError",
    "fit", "cross_validate", "fold_ids",
    "fit_linear", "lasso_path", "lasso_grid", "soft_threshold", "LinearModel", "SingularDesignError",
    "fit_knn", "KNNModel",
    "fit_tree", "fit_forest", "fit_boosting", "Tree", "TreeModel", "ForestModel", "BoostingModel",
    "fit_gp", "rbf", "GPModel", "IllConditionedKernelError",
    "fit_classifier", "ClassifierModel", "ConvergenceError",
]
