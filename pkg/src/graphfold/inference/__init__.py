"""Clustering, residual checks, hypothesis tests and link prediction."""

from .clt import clt_residuals, empirical_covariance, relative_frobenius
from .gmm import GaussianMixture, cluster, gmm_fit
from .linkpred import candidate_mask, link_predict, score_new_edges
from .metrics import RocCurve, classification_error, roc_auc
from .testing import RdpgNull, TestReport, critical_value, null_statistics, two_graph_statistic, two_graph_test

__all__ = [
    "GaussianMixture", "RdpgNull", "RocCurve", "TestReport", "candidate_mask",
    "classification_error", "clt_residuals", "cluster", "critical_value",
    "empirical_covariance", "gmm_fit", "link_predict", "null_statistics",
    "relative_frobenius", "roc_auc", "score_new_edges", "two_graph_statistic",
    "two_graph_test",
]
