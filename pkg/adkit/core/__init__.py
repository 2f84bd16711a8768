"""Core infrastructure: settings, errors, feature cache and tensor container."""
