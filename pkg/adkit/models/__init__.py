"""Image encoders and projection heads."""
