"""Command-line layer: shared dependencies and the train/eval/predict commands."""
