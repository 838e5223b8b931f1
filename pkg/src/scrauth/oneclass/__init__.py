"""One-class authenticators: RBF one-class SVM and Local Outlier Factor."""

from .enrollment import AuthDecision, EnrollmentModel, enroll, load, save
from .lof import LofModel, lof_fit, lof_score
from .ocsvm import OcsvmModel, ocsvm_fit, rbf_kernel, scale_gamma

__all__ = ["AuthDecision", "EnrollmentModel", "enroll", "load", "save", "LofModel", "lof_fit",
           "lof_score", "OcsvmModel", "ocsvm_fit", "rbf_kernel", "scale_gamma"]
