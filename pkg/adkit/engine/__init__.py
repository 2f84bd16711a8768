"""Scoring, training and evaluation engines."""
