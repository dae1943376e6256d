"""Identification regions, set estimators, and confidence sets for partially
identified models, built on a finite random-closed-set engine."""

__version__ = "0.1.0"
