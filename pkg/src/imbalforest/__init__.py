"""Imbalanced fraud classification: SMOTE, random forests and ROC evaluation."""

__version__ = "0.1.0"
