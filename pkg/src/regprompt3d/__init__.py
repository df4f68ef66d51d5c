"""Regulated multi-modal prompt tuning for point-cloud recognition at desk scale."""

__version__ = "0.1.0"
